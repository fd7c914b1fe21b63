#include "provgate/action.hpp"

namespace provgate {
namespace {

struct KindRow {
  ActionKind kind;
  const char* name;
  GateHook hook;
};

constexpr KindRow kRows[] = {
    {ActionKind::SkillCreate, "skill-create", GateHook::H6},
    {ActionKind::SkillModify, "skill-modify", GateHook::H6},
    {ActionKind::SkillLoad, "skill-load", GateHook::H6},
    {ActionKind::SkillExec, "skill-exec", GateHook::H6},
    {ActionKind::PluginInstall, "plugin-install", GateHook::H6},
    {ActionKind::PluginModify, "plugin-modify", GateHook::H6},
    {ActionKind::PluginLoad, "plugin-load", GateHook::H6},
    {ActionKind::PluginExec, "plugin-exec", GateHook::H6},
    {ActionKind::McpServerInstall, "mcp-server-install", GateHook::H6},
    {ActionKind::McpServerModify, "mcp-server-modify", GateHook::H6},
    {ActionKind::McpServerLoad, "mcp-server-load", GateHook::H6},
    {ActionKind::McpToolCall, "mcp-tool-call", GateHook::H6},
    {ActionKind::ManifestWrite, "manifest-write", GateHook::H6},
    {ActionKind::ContactListRead, "contact-list-read", GateHook::H6},
    {ActionKind::HostShellExec, "host-shell-exec", GateHook::H7},
    {ActionKind::FsWrite, "fs-write", GateHook::H8},
    {ActionKind::ConfigWrite, "config-write", GateHook::H8},
    {ActionKind::ModelRouterWrite, "model-router-write", GateHook::H8},
    {ActionKind::SystemPromptWrite, "system-prompt-write", GateHook::H8},
    {ActionKind::AgentBootstrapWrite, "agent-bootstrap-write", GateHook::H8},
    {ActionKind::ScheduleCreate, "schedule-create", GateHook::H9},
    {ActionKind::ScheduleModify, "schedule-modify", GateHook::H9},
    {ActionKind::ScheduleRemove, "schedule-remove", GateHook::H9},
    {ActionKind::MessagingSend, "messaging-send", GateHook::H10},
    {ActionKind::NetworkEgress, "network-egress", GateHook::H10},
    {ActionKind::OutboundAttestIssue, "outbound-attest-issue", GateHook::H10},
};

}  // namespace

const char* action_kind_name(ActionKind k) {
  for (const KindRow& row : kRows)
    if (row.kind == k) return row.name;
  return "unknown";
}

std::optional<ActionKind> action_kind_from_name(std::string_view name) {
  for (const KindRow& row : kRows)
    if (name == row.name) return row.kind;
  return std::nullopt;
}

std::vector<ActionKind> all_action_kinds() {
  std::vector<ActionKind> out;
  for (const KindRow& row : kRows) out.push_back(row.kind);
  return out;
}

const char* gate_hook_name(GateHook h) {
  switch (h) {
    case GateHook::H6: return "H6";
    case GateHook::H7: return "H7";
    case GateHook::H8: return "H8";
    case GateHook::H9: return "H9";
    case GateHook::H10: return "H10";
  }
  return "?";
}

GateHook gate_hook_for(ActionKind k) {
  for (const KindRow& row : kRows)
    if (row.kind == k) return row.hook;
  return GateHook::H6;  // unreachable for enum values
}

bool is_mutating_h6_kind(ActionKind k) {
  switch (k) {
    case ActionKind::SkillCreate:
    case ActionKind::SkillModify:
    case ActionKind::PluginInstall:
    case ActionKind::PluginModify:
    case ActionKind::McpServerInstall:
    case ActionKind::McpServerModify:
    case ActionKind::ManifestWrite:
      return true;
    default:
      return false;
  }
}

const char* profile_name(Profile p) {
  switch (p) {
    case Profile::P0: return "P0";
    case Profile::P1: return "P1";
    case Profile::P2: return "P2";
  }
  return "?";
}

std::optional<Profile> profile_from_name(std::string_view name) {
  if (name == "P0" || name == "p0") return Profile::P0;
  if (name == "P1" || name == "p1") return Profile::P1;
  if (name == "P2" || name == "p2") return Profile::P2;
  return std::nullopt;
}

bool kind_enabled(Profile p, ActionKind k) {
  switch (k) {
    // Available in every profile: the messaging gateway itself.
    case ActionKind::MessagingSend:
    case ActionKind::ContactListRead:
      return true;
    // Host surfaces arrive with P1.
    case ActionKind::SkillCreate:
    case ActionKind::SkillModify:
    case ActionKind::SkillLoad:
    case ActionKind::SkillExec:
    case ActionKind::PluginInstall:
    case ActionKind::PluginModify:
    case ActionKind::PluginLoad:
    case ActionKind::PluginExec:
    case ActionKind::McpServerInstall:
    case ActionKind::McpServerModify:
    case ActionKind::McpServerLoad:
    case ActionKind::McpToolCall:
    case ActionKind::ManifestWrite:
    case ActionKind::HostShellExec:
    case ActionKind::FsWrite:
    case ActionKind::ConfigWrite:
    case ActionKind::ModelRouterWrite:
    case ActionKind::SystemPromptWrite:
    case ActionKind::AgentBootstrapWrite:
    case ActionKind::OutboundAttestIssue:
      return p != Profile::P0;
    // Scheduler and unrestricted outbound arrive with P2.
    case ActionKind::ScheduleCreate:
    case ActionKind::ScheduleModify:
    case ActionKind::ScheduleRemove:
    case ActionKind::NetworkEgress:
      return p == Profile::P2;
  }
  return false;
}

}  // namespace provgate
