#include <algorithm>

#include "doctest.h"
#include "fcpipe/verify.hpp"
#include "test_helpers.hpp"

using namespace fcpipe;
using fcpipe::testing::tiny_trajectory;
using fcpipe::testing::wildfire;

namespace {

std::vector<std::string> codes_of(const std::vector<verify::Finding>& findings) {
  std::vector<std::string> out;
  for (const auto& f : findings) out.push_back(verify::to_string(f.code));
  return out;
}

}  // namespace

TEST_CASE("finding code strings and severities") {
  using verify::FindingCode;
  CHECK(verify::to_string(FindingCode::UndefinedFunction) == "UNDEFINED_FUNCTION");
  CHECK(verify::to_string(FindingCode::UndefinedArgument) == "UNDEFINED_ARGUMENT");
  CHECK(verify::to_string(FindingCode::ArgTypeMismatch) == "ARG_TYPE_MISMATCH");
  CHECK(verify::to_string(FindingCode::NameHallucination) == "NAME_HALLUCINATION");
  CHECK(verify::to_string(FindingCode::ValueUngrounded) == "VALUE_UNGROUNDED");
  CHECK(verify::to_string(FindingCode::MissingRequiredArg) == "MISSING_REQUIRED_ARG");
  CHECK(verify::to_string(FindingCode::RepetitiveContent) == "REPETITIVE_CONTENT");
  CHECK(verify::to_string(FindingCode::ExecFailure) == "EXEC_FAILURE");
  for (auto c : {FindingCode::UndefinedFunction, FindingCode::UndefinedArgument,
                 FindingCode::ArgTypeMismatch, FindingCode::NameHallucination,
                 FindingCode::MissingRequiredArg, FindingCode::ExecFailure})
    CHECK(verify::severity_of(c) == verify::Severity::Error);
  for (auto c : {FindingCode::ValueUngrounded, FindingCode::RepetitiveContent})
    CHECK(verify::severity_of(c) == verify::Severity::Suspect);
  CHECK(verify::finding_code_from_string("ARG_TYPE_MISMATCH") ==
        FindingCode::ArgTypeMismatch);
  CHECK(!verify::finding_code_from_string("NOPE").has_value());
}

TEST_CASE("coercion table") {
  using unified::ValueType;
  CHECK(verify::coerce_value(Json("50"), ValueType::Integer) == Json(50));
  CHECK(verify::coerce_value(Json("-3"), ValueType::Integer) == Json(-3));
  CHECK(!verify::coerce_value(Json("3.5"), ValueType::Integer).has_value());
  CHECK(!verify::coerce_value(Json("fifty"), ValueType::Integer).has_value());

  // An integer-shaped numeric string becomes an integer JSON value even when
  // the target is the wider "number" type.
  auto n = verify::coerce_value(Json("50"), ValueType::Number);
  REQUIRE(n.has_value());
  CHECK(n->is_number_integer());
  CHECK(*n == Json(50));
  auto f = verify::coerce_value(Json("3.5"), ValueType::Number);
  REQUIRE(f.has_value());
  CHECK(f->is_number_float());
  CHECK(*f == Json(3.5));
  CHECK(verify::coerce_value(Json("2e3"), ValueType::Number) == Json(2000.0));
  CHECK(!verify::coerce_value(Json("nan"), ValueType::Number).has_value());
  CHECK(!verify::coerce_value(Json(""), ValueType::Number).has_value());

  CHECK(verify::coerce_value(Json("true"), ValueType::Boolean) == Json(true));
  CHECK(verify::coerce_value(Json("FALSE"), ValueType::Boolean) == Json(false));
  CHECK(!verify::coerce_value(Json("yes"), ValueType::Boolean).has_value());

  CHECK(verify::coerce_value(Json("[1, 2]"), ValueType::Array) ==
        Json::parse("[1,2]"));
  CHECK(verify::coerce_value(Json(R"({"a":1})"), ValueType::Object) ==
        Json::parse(R"({"a":1})"));
  CHECK(!verify::coerce_value(Json("[1,2]"), ValueType::Object).has_value());
  CHECK(!verify::coerce_value(Json("not json"), ValueType::Array).has_value());

  CHECK(verify::coerce_value(Json(7), ValueType::Number) == Json(7));
  CHECK(!verify::coerce_value(Json(7.5), ValueType::Integer).has_value());
  CHECK(!verify::coerce_value(Json(50), ValueType::String).has_value());
  CHECK(!verify::coerce_value(Json(true), ValueType::String).has_value());
}

TEST_CASE("undefined function and argument checks") {
  auto t = tiny_trajectory("v1");
  unified::ToolCall call = t.steps[0].tool_calls[0];
  CHECK(verify::check_undefined_function(call, t.tools).empty());

  call.name = "get_wether";
  auto findings = verify::check_undefined_function(call, t.tools);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].code == verify::FindingCode::UndefinedFunction);
  CHECK(findings[0].path == "name");

  call = t.steps[0].tool_calls[0];
  call.arguments["units"] = "metric";
  auto arg_findings = verify::check_undefined_arguments(call, t.tools[0]);
  REQUIRE(arg_findings.size() == 1);
  CHECK(arg_findings[0].code == verify::FindingCode::UndefinedArgument);
  CHECK(arg_findings[0].path == "arguments.units");

  call.arguments.erase("city");
  call.arguments.erase("units");
  auto missing = verify::check_undefined_arguments(call, t.tools[0]);
  REQUIRE(missing.size() == 1);
  CHECK(missing[0].code == verify::FindingCode::MissingRequiredArg);
  CHECK(missing[0].path == "arguments.city");
}

TEST_CASE("argument type check with repair") {
  auto t = tiny_trajectory("v2");
  unified::ToolCall call = t.steps[0].tool_calls[0];
  call.arguments["days"] = "3";

  auto no_repair = verify::check_argument_types(call, t.tools[0], false);
  REQUIRE(no_repair.findings.size() == 1);
  CHECK(no_repair.findings[0].code == verify::FindingCode::ArgTypeMismatch);
  CHECK(no_repair.findings[0].path == "arguments.days");
  CHECK(!no_repair.findings[0].repair.has_value());
  CHECK(!no_repair.repaired.has_value());

  auto repaired = verify::check_argument_types(call, t.tools[0], true);
  REQUIRE(repaired.repaired.has_value());
  CHECK(repaired.repaired->arguments["days"] == Json(3));
  REQUIRE(repaired.findings.size() == 1);
  REQUIRE(repaired.findings[0].repair.has_value());
  CHECK(repaired.findings[0].repair->arguments["days"] == Json(3));

  // The repaired call re-passes the check.
  auto recheck = verify::check_argument_types(*repaired.repaired, t.tools[0], false);
  CHECK(recheck.findings.empty());

  // Uncoercible values report without a repair, and block the repaired call.
  call.arguments["days"] = "several";
  auto blocked = verify::check_argument_types(call, t.tools[0], true);
  REQUIRE(blocked.findings.size() == 1);
  CHECK(!blocked.findings[0].repair.has_value());
  CHECK(!blocked.repaired.has_value());

  // Wildfire with a stringified radius: the canonical repair example.
  auto w = wildfire();
  unified::ToolCall fire = w.steps[1].tool_calls[0];
  fire.arguments["radius"] = "50";
  auto fixed = verify::check_argument_types(fire, w.tools[0], true);
  REQUIRE(fixed.repaired.has_value());
  CHECK(fixed.repaired->arguments["radius"] == Json(50));
  CHECK(fixed.repaired->arguments["radius"].is_number_integer());
}

TEST_CASE("name hallucination check") {
  auto t = tiny_trajectory("v3");
  auto calls = t.steps[0].tool_calls;
  CHECK(verify::check_name_hallucination(calls, t.tools).empty());

  calls[0].name = "made_up";
  calls[0].arguments = Json::object();
  calls[0].arguments["city"] = "Paris";  // known param name elsewhere
  auto findings = verify::check_name_hallucination(calls, t.tools);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].code == verify::FindingCode::NameHallucination);
  CHECK(findings[0].path == "tool_calls[0].name");

  calls[0].arguments["volume"] = 11;
  findings = verify::check_name_hallucination(calls, t.tools);
  REQUIRE(findings.size() == 2);
  CHECK(findings[0].path == "tool_calls[0].name");
  CHECK(findings[1].path == "tool_calls[0].arguments.volume");
}

TEST_CASE("grounding context and value grounding") {
  auto w = wildfire();
  auto ctx = verify::build_grounding_context(w, 1);
  CHECK(ctx.query == w.query);
  REQUIRE(ctx.prior_user_inputs.size() == 1);
  CHECK(ctx.prior_user_inputs[0] == "User: Let me think... 50 miles.");
  CHECK(ctx.enum_values.size() == 2);

  // Step 0 sees no priors.
  auto ctx0 = verify::build_grounding_context(w, 0);
  CHECK(ctx0.prior_user_inputs.empty());
  CHECK(ctx0.prior_observations.empty());

  // California comes from the query, 50 from the prior user input; both
  // grounded regardless of numeric spelling.
  CHECK(verify::check_value_grounding(w.steps[1].tool_calls[0], ctx).empty());

  unified::ToolCall drifted = w.steps[1].tool_calls[0];
  drifted.arguments["radius"] = 50.0;  // float vs "50" in context
  CHECK(verify::check_value_grounding(drifted, ctx).empty());

  drifted.arguments["location"] = "Nevada";
  auto findings = verify::check_value_grounding(drifted, ctx);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].code == verify::FindingCode::ValueUngrounded);
  CHECK(findings[0].severity == verify::Severity::Suspect);
  CHECK(findings[0].path == "arguments.location");

  // Booleans and empty strings are exempt; array elements ground one by one.
  unified::ToolCall mixed;
  mixed.name = "get_fire_info";
  mixed.arguments["location"] = "";
  mixed.arguments["flags"] = Json::parse("[true, false]");
  CHECK(verify::check_value_grounding(mixed, ctx).empty());
  mixed.arguments["places"] = Json::parse(R"(["California", "Atlantis"])");
  auto elementwise = verify::check_value_grounding(mixed, ctx);
  REQUIRE(elementwise.size() == 1);
  CHECK(elementwise[0].path == "arguments.places[1]");
}

TEST_CASE("repetition heuristics") {
  auto t = tiny_trajectory("v4");
  t.steps[0].thought = "go go go go go go go go go";  // 4-gram "go go go go" x6
  auto findings = verify::check_repetition(t, 3, 2);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].code == verify::FindingCode::RepetitiveContent);
  CHECK(findings[0].path == "steps[0].thought");
  CHECK(findings[0].step_id == 1);
  CHECK(verify::check_repetition(t, 6, 2).empty());

  // Duplicate-step runs: three identical steps exceed max_dup_steps=2.
  auto dup = tiny_trajectory("v5");
  dup.steps[0].thought = "checking";
  dup.steps.push_back(dup.steps[0]);
  dup.steps.push_back(dup.steps[0]);
  dup.steps[1].step_id = 2;
  dup.steps[2].step_id = 3;
  findings = verify::check_repetition(dup, 3, 2);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].path == "steps[0]");
  CHECK(verify::check_repetition(dup, 3, 3).empty());
}

TEST_CASE("sandbox execution") {
  verify::SandboxRegistry registry;
  registry.add("get_weather", [](const Json& args) {
    if (!args.contains("city")) return verify::SandboxOutcome{false, "no city"};
    return verify::SandboxOutcome{true, "sunny"};
  });
  CHECK_THROWS_AS(registry.add("get_weather", nullptr), ConfigError);

  unified::ToolCall call;
  call.name = "get_weather";
  call.arguments["city"] = "Paris";
  auto outcome = verify::execute_in_sandbox(call, registry);
  REQUIRE(std::holds_alternative<std::string>(outcome));
  CHECK(std::get<std::string>(outcome) == "sunny");

  call.arguments.erase("city");
  outcome = verify::execute_in_sandbox(call, registry);
  REQUIRE(std::holds_alternative<verify::Finding>(outcome));
  CHECK(std::get<verify::Finding>(outcome).code ==
        verify::FindingCode::ExecFailure);

  call.name = "unknown";
  outcome = verify::execute_in_sandbox(call, registry);
  CHECK(std::holds_alternative<verify::Finding>(outcome));

  auto canned = verify::SandboxRegistry::from_json(
      Json::parse(R"({"ok_fn":{"outcome":"fine"},"bad_fn":{"error":"boom"}})"));
  unified::ToolCall ok;
  ok.name = "ok_fn";
  CHECK(std::get<std::string>(verify::execute_in_sandbox(ok, canned)) == "fine");
  unified::ToolCall bad;
  bad.name = "bad_fn";
  CHECK(std::holds_alternative<verify::Finding>(
      verify::execute_in_sandbox(bad, canned)));
}

TEST_CASE("verify_trajectory on the wildfire fixture is clean") {
  auto report = verify::verify_trajectory(wildfire(), verify::VerifyPolicy{});
  CHECK(report.trajectory_id == "wildfire-ca-0001");
  CHECK(report.findings.empty());
  CHECK(report.clean);
  CHECK(!report.repaired.has_value());
}

TEST_CASE("verify_trajectory rebases paths and sorts findings") {
  auto w = wildfire();
  w.steps[1].tool_calls[0].arguments["radius"] = "50";
  w.steps[1].tool_calls[0].arguments["urgency"] = "high";

  verify::VerifyPolicy policy;
  auto report = verify::verify_trajectory(w, policy);
  CHECK(!report.clean);
  auto codes = codes_of(report.findings);
  CHECK(std::count(codes.begin(), codes.end(), "UNDEFINED_ARGUMENT") == 1);
  CHECK(std::count(codes.begin(), codes.end(), "ARG_TYPE_MISMATCH") == 1);
  CHECK(std::count(codes.begin(), codes.end(), "NAME_HALLUCINATION") == 1);
  for (const auto& f : report.findings) {
    CHECK(f.step_id == 2);
    CHECK(f.path.rfind("steps[1].tool_calls[0].", 0) == 0);
  }
  // Sorted by (step_id, path, code).
  auto sorted = report.findings;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const verify::Finding& a, const verify::Finding& b) {
                     return std::tie(a.step_id, a.path) <
                            std::tie(b.step_id, b.path);
                   });
  for (std::size_t i = 0; i < sorted.size(); ++i)
    CHECK(sorted[i].path == report.findings[i].path);
}

TEST_CASE("verify_trajectory applies repairs when asked") {
  auto w = wildfire();
  w.steps[1].tool_calls[0].arguments["radius"] = "50";

  verify::VerifyPolicy policy;
  policy.apply_repairs = true;
  auto report = verify::verify_trajectory(w, policy);
  REQUIRE(report.repaired.has_value());
  CHECK(report.repaired->steps[1].tool_calls[0].arguments["radius"] == Json(50));
  // The repaired trajectory verifies clean.
  auto again = verify::verify_trajectory(*report.repaired, verify::VerifyPolicy{});
  CHECK(again.findings.empty());

  // Uncoercible mismatch: finding without repair, no repaired trajectory.
  // ("fifty" also trips the grounding heuristic, which is fine here.)
  w.steps[1].tool_calls[0].arguments["radius"] = "fifty";
  auto stuck = verify::verify_trajectory(w, policy);
  CHECK(!stuck.repaired.has_value());
  bool saw_mismatch = false;
  for (const auto& f : stuck.findings)
    if (f.code == verify::FindingCode::ArgTypeMismatch) {
      saw_mismatch = true;
      CHECK(!f.repair.has_value());
    }
  CHECK(saw_mismatch);
}

TEST_CASE("grounding judge hook can clear suspect findings") {
  auto w = wildfire();
  w.steps[1].tool_calls[0].arguments["location"] = "Sacramento region";

  verify::VerifyPolicy policy;
  auto baseline = verify::verify_trajectory(w, policy);
  REQUIRE(baseline.findings.size() == 1);
  CHECK(baseline.findings[0].code == verify::FindingCode::ValueUngrounded);
  CHECK(baseline.clean);  // SUSPECT only

  int judged = 0;
  policy.grounding_judge = [&](const verify::Finding& f, const unified::Trajectory&) {
    ++judged;
    CHECK(f.code == verify::FindingCode::ValueUngrounded);
    return false;  // grounded after all
  };
  auto cleared = verify::verify_trajectory(w, policy);
  CHECK(judged == 1);
  CHECK(cleared.findings.empty());
}

TEST_CASE("verify_trajectory sandbox integration") {
  verify::SandboxRegistry registry;
  registry.add("get_weather",
               [](const Json&) { return verify::SandboxOutcome{false, "api down"}; });
  verify::VerifyPolicy policy;
  policy.run_sandbox = true;
  policy.sandbox = &registry;
  auto report = verify::verify_trajectory(tiny_trajectory("sb"), policy);
  auto codes = codes_of(report.findings);
  CHECK(std::count(codes.begin(), codes.end(), "EXEC_FAILURE") == 1);
  CHECK(!report.clean);

  verify::VerifyPolicy no_registry;
  no_registry.run_sandbox = true;
  CHECK_THROWS_AS(verify::verify_trajectory(tiny_trajectory("sb2"), no_registry),
                  ConfigError);
}

TEST_CASE("policy file parsing") {
  auto policy = verify::policy_from_json(Json::parse(
      R"({"apply_repairs":true,"check_grounding":false,"max_ngram_repeat":5,"max_dup_steps":4,"check_repetition":true,"run_sandbox":false})"));
  CHECK(policy.apply_repairs);
  CHECK(!policy.check_grounding);
  CHECK(policy.max_ngram_repeat == 5);
  CHECK(policy.max_dup_steps == 4);
  CHECK_THROWS_AS(verify::policy_from_json(Json::parse(R"({"typo":1})")),
                  ConfigError);
  CHECK_THROWS_AS(
      verify::policy_from_json(Json::parse(R"({"max_ngram_repeat":0})")),
      ConfigError);
}

TEST_CASE("finding serialization") {
  auto f = verify::make_finding(verify::FindingCode::ArgTypeMismatch, 2,
                                "steps[1].tool_calls[0].arguments.radius",
                                "expected number, found string");
  unified::ToolCall repair;
  repair.name = "get_fire_info";
  repair.arguments["radius"] = 50;
  f.repair = repair;
  auto j = f.to_json();
  CHECK(j["code"] == "ARG_TYPE_MISMATCH");
  CHECK(j["severity"] == "error");
  CHECK(j["step_id"] == 2);
  CHECK(j["repair"]["name"] == "get_fire_info");

  verify::DiagnosticReport report;
  report.trajectory_id = "t1";
  report.findings.push_back(f);
  report.clean = false;
  auto rj = report.to_json();
  CHECK(rj["trajectory_id"] == "t1");
  CHECK(rj["clean"] == false);
  CHECK(rj["findings"].size() == 1);
  CHECK(!rj.contains("repaired"));
}
