// Canonical byte-encoding suite: the production encoder against an
// independently written reference, golden byte strings, and rejection of
// values that have no canonical form.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "provgate/canonical.hpp"
#include "support/oracle_canonical.hpp"
#include "support/value_gen.hpp"

using provgate::CanonicalError;
using provgate::Value;

namespace {

std::string must_canonical(const Value& v) { return provgate::canonicalize(v); }

}  // namespace

TEST_CASE("encoder agrees with the reference on random structured values") {
  testsupport::ValueGen gen(20240817);
  for (int i = 0; i < 300; ++i) {
    Value v = gen.value();
    auto expected = testsupport::oracle_canonicalize(v);
    REQUIRE(expected.has_value());
    CHECK(must_canonical(v) == *expected);
  }
}

TEST_CASE("golden bytes: separators, ordering, escapes") {
  CHECK(must_canonical(Value::object()) == "{}");
  CHECK(must_canonical(Value::array()) == "[]");
  CHECK(must_canonical(Value(nullptr)) == "null");
  CHECK(must_canonical(Value(true)) == "true");
  CHECK(must_canonical(Value(-12)) == "-12");

  // Keys sort by raw byte order: uppercase before lowercase.
  Value o{{"b", 1}, {"a", 2}, {"Z", 3}};
  CHECK(must_canonical(o) == "{\"Z\":3,\"a\":2,\"b\":1}");

  // No insignificant whitespace anywhere.
  Value nested{{"k", Value::array({1, Value{{"x", "y"}}})}};
  CHECK(must_canonical(nested) == "{\"k\":[1,{\"x\":\"y\"}]}");

  // Short escapes for the named controls, \u00xx for the rest, raw UTF-8
  // passes through untouched.
  CHECK(must_canonical(Value("a\"b\\c")) == "\"a\\\"b\\\\c\"");
  CHECK(must_canonical(Value("\t\n\r")) == "\"\\t\\n\\r\"");
  CHECK(must_canonical(Value(std::string("\x01", 1))) == "\"\\u0001\"");
  CHECK(must_canonical(Value(std::string("\x1f", 1))) == "\"\\u001f\"");
  CHECK(must_canonical(Value("caf\xc3\xa9")) == "\"caf\xc3\xa9\"");

  // 64-bit extremes survive exactly.
  CHECK(must_canonical(Value(std::int64_t(9223372036854775807LL))) ==
        "9223372036854775807");
  CHECK(must_canonical(Value(std::numeric_limits<std::int64_t>::min())) ==
        "-9223372036854775808");
}

TEST_CASE("values with no canonical form are rejected by both implementations") {
  Value bad_cases[] = {
      Value(0.5),
      Value(1e300),
      Value{{"k", 0.25}},
      Value::array({1, 2, 3.5}),
      Value(std::uint64_t(9223372036854775808ULL)),  // one past int64 max
  };
  for (const Value& v : bad_cases) {
    CHECK_THROWS_AS((void)provgate::canonicalize(v), CanonicalError);
    CHECK_FALSE(testsupport::oracle_canonicalize(v).has_value());
  }
  // Integral-valued floats are still floats: no silent coercion.
  CHECK_THROWS_AS((void)provgate::canonicalize(Value(2.0)), CanonicalError);
}

TEST_CASE("parse-then-encode is the identity on canonical bytes") {
  testsupport::ValueGen gen(5551212);
  for (int i = 0; i < 200; ++i) {
    std::string bytes = must_canonical(gen.value());
    Value reparsed = provgate::parse_json(bytes);
    CHECK(must_canonical(reparsed) == bytes);
  }
}

TEST_CASE("strict parser rejects junk") {
  CHECK_THROWS_AS((void)provgate::parse_json("{"), CanonicalError);
  CHECK_THROWS_AS((void)provgate::parse_json(""), CanonicalError);
  CHECK_THROWS_AS((void)provgate::parse_json("{\"a\":1} trailing"),
                  CanonicalError);
  CHECK_THROWS_AS((void)provgate::parse_json("nul"), CanonicalError);
  // Well-formed input round-trips.
  CHECK(must_canonical(provgate::parse_json("  {\"a\" : [ 1 , 2 ] }  ")) ==
        "{\"a\":[1,2]}");
}
