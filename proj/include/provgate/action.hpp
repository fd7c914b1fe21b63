#pragma once

#include <optional>
#include <string>
#include <vector>

#include "provgate/artifact.hpp"
#include "provgate/source_tag.hpp"
#include "provgate/value.hpp"

namespace provgate {

// The closed set of consequential action kinds. Anything a model emission
// normalizes into that is not on this list is "unclassified" and is denied
// outright by tiers that gate at all.
enum class ActionKind {
  SkillCreate,
  SkillModify,
  SkillLoad,
  SkillExec,
  PluginInstall,
  PluginModify,
  PluginLoad,
  PluginExec,
  McpServerInstall,
  McpServerModify,
  McpServerLoad,
  McpToolCall,
  ManifestWrite,
  ContactListRead,
  HostShellExec,
  FsWrite,
  ConfigWrite,
  ModelRouterWrite,
  SystemPromptWrite,
  AgentBootstrapWrite,
  ScheduleCreate,
  ScheduleModify,
  ScheduleRemove,
  MessagingSend,
  NetworkEgress,
  OutboundAttestIssue,
};

const char* action_kind_name(ActionKind k);
std::optional<ActionKind> action_kind_from_name(std::string_view name);
std::vector<ActionKind> all_action_kinds();

// Enforcement points. H1–H5 are update hooks (they register artifacts and
// propagate tags but never decide anything); these are the decision hooks.
enum class GateHook { H6, H7, H8, H9, H10 };

const char* gate_hook_name(GateHook h);

// Which decision hook mediates each kind:
//   H6  agent-internal surfaces (skills, plugins, MCP, manifests, contacts)
//   H7  host shell
//   H8  filesystem and configuration writes
//   H9  scheduler registration
//   H10 outbound messaging, network egress, outbound attestation issuance
GateHook gate_hook_for(ActionKind k);

// True for kinds whose dispatch mutates durable agent/host state (used by
// the D3 session-flag accumulator for hook-H6 kinds).
bool is_mutating_h6_kind(ActionKind k);

// Runtime capability profiles. A kind disabled by the active profile is
// treated as unclassified: the runtime has no substrate for it, so the gate
// refuses to recognise it.
enum class Profile { P0, P1, P2 };

const char* profile_name(Profile p);
std::optional<Profile> profile_from_name(std::string_view name);

// P0 is a gateway-only deployment: messaging in and out, contact lookups,
// nothing host-side. P1 adds the host surfaces (skills, plugins, MCP, shell,
// filesystem/config writes, memory) for the owner's main session. P2 adds
// the scheduler and unrestricted outbound network.
bool kind_enabled(Profile p, ActionKind k);

// One normalized consequential action instance, ready for digesting.
//
//   kind_name : the kind string (equals the enum spelling when classified;
//               preserved raw for unclassified emissions so denials can
//               name what was attempted)
//   kind      : nullopt when the emission did not classify under the
//               active profile
//   causal    : sorted, de-duplicated artifact ids; nullopt means the
//               causal set could not be enumerated, which no gating tier
//               ever dispatches
//   args      : normalized argument structure (defaults filled, aliases
//               rewritten) — the bytes that will actually be dispatched
//   target    : destination identifier (URL, address, path, job or skill id)
//   owner_device : the owner pairing this agent instance runs under
//   initiating_skill : set when the action was lowered from a skill body,
//               so capability manifests can be applied to it
struct Action {
  std::string kind_name;
  std::optional<ActionKind> kind;
  std::optional<std::vector<ArtifactId>> causal;
  Value args = Value::object();
  std::string target;
  PrincipalDevice owner_device;
  std::optional<std::string> initiating_skill;
};

}  // namespace provgate
