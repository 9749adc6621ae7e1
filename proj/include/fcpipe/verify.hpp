#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fcpipe/common.hpp"
#include "fcpipe/unified.hpp"

namespace fcpipe::verify {

// ---------------------------------------------------------------------------
// Rule-based trajectory verification: undefined names, argument-type errors
// with coercion repair, hallucinated names, context grounding, repetition
// heuristics and optional sandbox execution. Error-code strings are a stable
// public contract; report files carry them verbatim.
// ---------------------------------------------------------------------------

enum class FindingCode {
  UndefinedFunction,
  UndefinedArgument,
  ArgTypeMismatch,
  NameHallucination,
  ValueUngrounded,
  MissingRequiredArg,
  RepetitiveContent,
  ExecFailure,
};

enum class Severity { Error, Suspect };

std::string to_string(FindingCode c);
std::optional<FindingCode> finding_code_from_string(std::string_view s);
std::string to_string(Severity s);

/// VALUE_UNGROUNDED and REPETITIVE_CONTENT are SUSPECT; everything else is
/// ERROR.
Severity severity_of(FindingCode c);

struct Finding {
  FindingCode code;
  Severity severity;
  int step_id = 0;
  std::string path;
  std::string detail;
  std::optional<unified::ToolCall> repair;  // only for ARG_TYPE_MISMATCH

  Json to_json() const;
  bool operator==(const Finding&) const = default;
};

Finding make_finding(FindingCode code, int step_id, std::string path, std::string detail);

struct DiagnosticReport {
  std::string trajectory_id;
  std::vector<Finding> findings;
  bool clean = true;  // no ERROR-severity finding

  /// Set when apply_repairs changed at least one call. Not part of the
  /// serialized report; `verify --repair` writes it to the repaired corpus.
  std::optional<unified::Trajectory> repaired;

  Json to_json() const;  // {trajectory_id, findings, clean}
};

// ---------------------------------------------------------------------------
// Grounding context: everything an argument value may legitimately echo.
// Strictly the query, the task instruction, observations and user inputs of
// steps BEFORE the one under check, and parameter description texts (which
// carry enumeration values).
// ---------------------------------------------------------------------------

struct GroundingContext {
  std::string query;
  std::string task_instruction;
  std::vector<std::string> prior_observations;
  std::vector<std::string> prior_user_inputs;
  std::vector<std::string> enum_values;
};

GroundingContext build_grounding_context(const unified::Trajectory& t,
                                         std::size_t step_index);

// ---------------------------------------------------------------------------
// Sandbox registry: pure, deterministic stubs keyed by function name.
// ---------------------------------------------------------------------------

struct SandboxOutcome {
  bool ok = false;
  std::string text;  // outcome on success, reason on failure
};

using SandboxStub = std::function<SandboxOutcome(const Json& arguments)>;

class SandboxRegistry {
 public:
  /// Throws ConfigError on duplicate names.
  void add(const std::string& name, SandboxStub stub);

  const SandboxStub* find(const std::string& name) const;

  /// Canned stubs from a registry file: an object mapping function name to
  /// either {"outcome": text} or {"error": text}.
  static SandboxRegistry from_json(const Json& j);

 private:
  std::map<std::string, SandboxStub> stubs_;
};

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

struct VerifyPolicy {
  bool apply_repairs = false;
  bool check_grounding = true;
  bool check_repetition = true;
  bool run_sandbox = false;
  int max_ngram_repeat = 3;
  int max_dup_steps = 2;
  const SandboxRegistry* sandbox = nullptr;

  /// Escalation hook for SUSPECT grounding findings. Returns false to clear
  /// the finding (judged grounded after all), true to keep it. Unset keeps
  /// every heuristic finding.
  std::function<bool(const Finding&, const unified::Trajectory&)> grounding_judge;
};

/// Flags and thresholds from a policy file; unknown keys are ConfigErrors.
VerifyPolicy policy_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Individual checks. Each returns findings with call-relative paths
// ("name", "arguments.radius") and step_id 0; verify_trajectory rebases them
// onto the owning step and call.
// ---------------------------------------------------------------------------

std::vector<Finding> check_undefined_function(const unified::ToolCall& call,
                                              const std::vector<unified::ToolSpec>& tools);

/// Precondition: call.name == spec.name.
std::vector<Finding> check_undefined_arguments(const unified::ToolCall& call,
                                               const unified::ToolSpec& spec);

struct TypeCheckResult {
  std::vector<Finding> findings;
  /// Present iff repair was requested and at least one coercion applied; the
  /// call with every coercible argument converted. Each finding whose own
  /// argument was coercible carries the same repaired call.
  std::optional<unified::ToolCall> repaired;
};

/// Precondition: call.name == spec.name and no undefined arguments.
TypeCheckResult check_argument_types(const unified::ToolCall& call,
                                     const unified::ToolSpec& spec, bool repair);

/// The coercion table. Returns the converted value, or nullopt when `v`
/// cannot be converted to `target`:
///   numeric string -> number / integer (strict decimal grammar; integer
///     requires no fractional part), "true"/"false" (any case) -> boolean,
///   string parsing as a JSON list/object -> array / object,
///   integer -> number (widening). Everything else is un-coercible.
std::optional<Json> coerce_value(const Json& v, unified::ValueType target);

/// Paths are call-list relative: "tool_calls[1].name",
/// "tool_calls[0].arguments.state". Argument names check against the called
/// tool's parameters when it is defined, otherwise against the union of all
/// tools' parameter names.
std::vector<Finding> check_name_hallucination(const std::vector<unified::ToolCall>& calls,
                                              const std::vector<unified::ToolSpec>& tools);

/// SUSPECT findings for scalar argument values (element-wise inside arrays
/// and objects) whose normalized form appears nowhere in the context.
/// Booleans and empty strings are exempt; numbers compare by value.
std::vector<Finding> check_value_grounding(const unified::ToolCall& call,
                                           const GroundingContext& ctx);

/// One SUSPECT finding per thought in which some word 4-gram occurs more
/// than max_ngram_repeat times, one per run of more than max_dup_steps
/// consecutive identical (thought, tool_calls) steps. Paths are
/// trajectory-absolute.
std::vector<Finding> check_repetition(const unified::Trajectory& t, int max_ngram_repeat,
                                      int max_dup_steps);

/// Outcome text on success, EXEC_FAILURE finding (call-relative path "") on
/// unknown name or stub-declared failure.
std::variant<std::string, Finding> execute_in_sandbox(const unified::ToolCall& call,
                                                      const SandboxRegistry& registry);

/// Full pipeline over one trajectory: names, arguments, types (repairs
/// applied before grounding when requested), grounding, repetition, then
/// sandbox when enabled. Findings sorted by (step_id, path, code string).
DiagnosticReport verify_trajectory(const unified::Trajectory& t, const VerifyPolicy& policy);

}  // namespace fcpipe::verify
