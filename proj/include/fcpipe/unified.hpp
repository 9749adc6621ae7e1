#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fcpipe/common.hpp"

namespace fcpipe::unified {

// The unified trajectory schema. One trajectory is one complete agent
// episode: task instruction, tool specs, user query and ordered steps.
// Objects remember the key order they were parsed with (`key_order`); an
// empty key_order means the schema-declared order. Serialization honors it,
// so order shuffles survive a round trip, and canonicalize() resets it.

enum class ValueType { String, Number, Integer, Boolean, Array, Object };

std::string to_string(ValueType t);
std::optional<ValueType> value_type_from_string(std::string_view s);

/// Kind of a concrete JSON value in ToolCall arguments. Null is not part of
/// the value universe and is rejected at validation time.
std::optional<ValueType> value_kind(const Json& v);

struct ParamSpec {
  std::string name;
  ValueType type = ValueType::String;
  std::string description;
  bool required = false;
  std::vector<std::string> key_order;  // of {type, description, required}

  bool operator==(const ParamSpec&) const = default;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ParamSpec> parameters;  // ordered map name -> ParamSpec
  std::vector<std::string> key_order;  // of {name, description, parameters}

  const ParamSpec* find_param(std::string_view pname) const;
  bool operator==(const ToolSpec&) const = default;
};

struct ToolCall {
  std::string name;
  Json arguments = Json::object();  // ordered map name -> value
  std::vector<std::string> key_order;  // of {name, arguments}

  bool operator==(const ToolCall&) const = default;
};

struct Step {
  std::string thought;
  std::vector<ToolCall> tool_calls;
  int step_id = 1;
  std::string next_observation;
  std::string user_input;
  std::vector<std::string> key_order;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::string unique_trajectory_id;
  std::string task_instruction;
  std::vector<Trajectory> few_shot_examples;  // trajectory shape minus id
  std::string query;
  std::vector<ToolSpec> tools;
  std::vector<Step> steps;
  std::vector<std::string> key_order;

  const ToolSpec* find_tool(std::string_view name) const;
  bool operator==(const Trajectory&) const = default;
};

// Closed set of schema error codes. The strings are a stable public
// contract; reports serialize them verbatim.
enum class IssueCode {
  MissingField,     // MISSING_FIELD: required key absent or wrong JSON kind
  BadStepId,        // BAD_STEP_ID: ids not exactly 1..N in order
  DupParam,         // DUP_PARAM: duplicate parameter name within a tool
  DupArg,           // DUP_ARG: duplicate argument name within a call
  EmptyName,        // EMPTY_NAME: empty tool/param/call name
  EmptyQuery,       // EMPTY_QUERY
  EmptyId,          // EMPTY_ID: empty unique_trajectory_id
  EmptyStep,        // EMPTY_STEP: fully empty step
  BadType,          // BAD_TYPE: value_type outside the six-member enum
  NestedFewShot,    // NESTED_FEW_SHOT: few-shot example carries its own
  DupTrajectoryId,  // DUP_TRAJECTORY_ID: corpus-level id collision
};

std::string to_string(IssueCode code);

struct ValidationIssue {
  IssueCode code;
  std::string path;  // e.g. "steps[1].step_id"
  std::string detail;

  bool operator==(const ValidationIssue&) const = default;
};

/// Pure schema check. Empty result iff every invariant holds; one issue per
/// violation, in deterministic field order.
std::vector<ValidationIssue> validate_trajectory(const Trajectory& t);

// Schema-declared key orders, the defaults an empty key_order stands for.
const std::vector<std::string>& declared_trajectory_keys();
const std::vector<std::string>& declared_tool_keys();
const std::vector<std::string>& declared_param_keys();
const std::vector<std::string>& declared_call_keys();
const std::vector<std::string>& declared_step_keys();

/// Canonical form: every struct-shaped map back to schema-declared key
/// order, free-form maps (parameters, arguments, nested objects) sorted
/// lexicographically by key. Text fields are untouched. Idempotent.
/// Rejects invalid trajectories with ConfigError.
Trajectory canonicalize(const Trajectory& t);

// --- JSON (de)serialization, field names per the unified format -----------

Json param_to_json(const ParamSpec& p);
Json tool_to_json(const ToolSpec& t);
Json call_to_json(const ToolCall& c);
Json step_to_json(const Step& s);
Json trajectory_to_json(const Trajectory& t);

/// One-line canonical record for corpus files.
std::string serialize_trajectory(const Trajectory& t);

/// Strict structural parse. Throws ParseError on malformed JSON or on keys
/// of the wrong kind; does not run validate_trajectory.
Trajectory trajectory_from_json(const Json& j);
Trajectory parse_trajectory(std::string_view line);

// --- Corpus files ----------------------------------------------------------
//
// Line-delimited UTF-8, one trajectory per line. Writers start the file
// with a version header line {"corpus_version": 1}; readers skip it when
// present.

inline constexpr int kCorpusVersion = 1;

std::string corpus_header_line();
bool is_corpus_header(const Json& j);

void write_corpus(const std::string& path,
                  const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_corpus(const std::string& path);

}  // namespace fcpipe::unified
