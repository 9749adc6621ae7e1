#include "fcpipe/unified.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace fcpipe::unified {

namespace {

const std::vector<std::string> kTrajectoryKeys = {
    "unique_trajectory_id", "task_instruction", "few_shot_examples",
    "query",                "tools",            "steps"};
const std::vector<std::string> kExampleKeys = {
    "task_instruction", "few_shot_examples", "query", "tools", "steps"};
const std::vector<std::string> kToolKeys = {"name", "description",
                                            "parameters"};
const std::vector<std::string> kParamKeys = {"type", "description",
                                             "required"};
const std::vector<std::string> kCallKeys = {"name", "arguments"};
const std::vector<std::string> kStepKeys = {
    "thought", "tool_calls", "step_id", "next_observation", "user_input"};

}  // namespace

const std::vector<std::string>& declared_trajectory_keys() { return kTrajectoryKeys; }
const std::vector<std::string>& declared_tool_keys() { return kToolKeys; }
const std::vector<std::string>& declared_param_keys() { return kParamKeys; }
const std::vector<std::string>& declared_call_keys() { return kCallKeys; }
const std::vector<std::string>& declared_step_keys() { return kStepKeys; }

std::string to_string(ValueType t) {
  switch (t) {
    case ValueType::String: return "string";
    case ValueType::Number: return "number";
    case ValueType::Integer: return "integer";
    case ValueType::Boolean: return "boolean";
    case ValueType::Array: return "array";
    case ValueType::Object: return "object";
  }
  return "string";
}

std::optional<ValueType> value_type_from_string(std::string_view s) {
  if (s == "string") return ValueType::String;
  if (s == "number") return ValueType::Number;
  if (s == "integer") return ValueType::Integer;
  if (s == "boolean") return ValueType::Boolean;
  if (s == "array") return ValueType::Array;
  if (s == "object") return ValueType::Object;
  return std::nullopt;
}

std::optional<ValueType> value_kind(const Json& v) {
  switch (v.type()) {
    case Json::value_t::string: return ValueType::String;
    case Json::value_t::number_float: return ValueType::Number;
    case Json::value_t::number_integer: return ValueType::Integer;
    case Json::value_t::number_unsigned: return ValueType::Integer;
    case Json::value_t::boolean: return ValueType::Boolean;
    case Json::value_t::array: return ValueType::Array;
    case Json::value_t::object: return ValueType::Object;
    default: return std::nullopt;
  }
}

std::string to_string(IssueCode code) {
  switch (code) {
    case IssueCode::MissingField: return "MISSING_FIELD";
    case IssueCode::BadStepId: return "BAD_STEP_ID";
    case IssueCode::DupParam: return "DUP_PARAM";
    case IssueCode::DupArg: return "DUP_ARG";
    case IssueCode::EmptyName: return "EMPTY_NAME";
    case IssueCode::EmptyQuery: return "EMPTY_QUERY";
    case IssueCode::EmptyId: return "EMPTY_ID";
    case IssueCode::EmptyStep: return "EMPTY_STEP";
    case IssueCode::BadType: return "BAD_TYPE";
    case IssueCode::NestedFewShot: return "NESTED_FEW_SHOT";
    case IssueCode::DupTrajectoryId: return "DUP_TRAJECTORY_ID";
  }
  return "UNKNOWN";
}

const ParamSpec* ToolSpec::find_param(std::string_view pname) const {
  for (const auto& p : parameters)
    if (p.name == pname) return &p;
  return nullptr;
}

const ToolSpec* Trajectory::find_tool(std::string_view name) const {
  for (const auto& t : tools)
    if (t.name == name) return &t;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void check_null_free(const Json& v, const std::string& path,
                     std::vector<ValidationIssue>& out) {
  if (v.is_null()) {
    out.push_back({IssueCode::BadType, path, "null is not a permitted value"});
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i)
      check_null_free(v[i], path + "[" + std::to_string(i) + "]", out);
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      check_null_free(it.value(), path + "." + it.key(), out);
  }
}

void validate_tool(const ToolSpec& tool, const std::string& path,
                   std::vector<ValidationIssue>& out) {
  if (tool.name.empty())
    out.push_back({IssueCode::EmptyName, path + ".name", "tool name empty"});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < tool.parameters.size(); ++i) {
    const auto& p = tool.parameters[i];
    std::string ppath = path + ".parameters." +
                        (p.name.empty() ? "[" + std::to_string(i) + "]"
                                        : p.name);
    if (p.name.empty())
      out.push_back({IssueCode::EmptyName, ppath, "parameter name empty"});
    else if (!seen.insert(p.name).second)
      out.push_back({IssueCode::DupParam, ppath,
                     "duplicate parameter name '" + p.name + "'"});
  }
}

void validate_call(const ToolCall& call, const std::string& path,
                   std::vector<ValidationIssue>& out) {
  if (call.name.empty())
    out.push_back({IssueCode::EmptyName, path + ".name", "call name empty"});
  // Arguments live in a JSON object, so duplicate names cannot survive a
  // parse; DUP_ARG exists for programmatically built calls and is caught by
  // the duplicate-key scan at parse time instead.
  check_null_free(call.arguments, path + ".arguments", out);
}

void validate_record(const Trajectory& t, const std::string& prefix,
                     bool is_element, std::vector<ValidationIssue>& out) {
  if (is_element) {
    if (!t.unique_trajectory_id.empty())
      out.push_back({IssueCode::NestedFewShot,
                     prefix + "unique_trajectory_id",
                     "few-shot example must not carry a trajectory id"});
    if (!t.few_shot_examples.empty())
      out.push_back({IssueCode::NestedFewShot, prefix + "few_shot_examples",
                     "few-shot examples must not nest their own examples"});
  } else {
    if (t.unique_trajectory_id.empty())
      out.push_back({IssueCode::EmptyId, prefix + "unique_trajectory_id",
                     "unique_trajectory_id is empty"});
  }
  if (t.query.empty())
    out.push_back({IssueCode::EmptyQuery, prefix + "query", "query is empty"});
  for (std::size_t i = 0; i < t.tools.size(); ++i)
    validate_tool(t.tools[i], prefix + "tools[" + std::to_string(i) + "]",
                  out);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    std::string spath = prefix + "steps[" + std::to_string(i) + "]";
    int expected = static_cast<int>(i) + 1;
    if (s.step_id != expected)
      out.push_back({IssueCode::BadStepId, spath + ".step_id",
                     "expected step_id " + std::to_string(expected) +
                         ", found " + std::to_string(s.step_id)});
    if (s.thought.empty() && s.tool_calls.empty() &&
        s.next_observation.empty() && s.user_input.empty())
      out.push_back({IssueCode::EmptyStep, spath, "fully empty step"});
    for (std::size_t c = 0; c < s.tool_calls.size(); ++c)
      validate_call(s.tool_calls[c],
                    spath + ".tool_calls[" + std::to_string(c) + "]", out);
  }
  if (!is_element) {
    for (std::size_t i = 0; i < t.few_shot_examples.size(); ++i)
      validate_record(t.few_shot_examples[i],
                      prefix + "few_shot_examples[" + std::to_string(i) +
                          "].",
                      true, out);
  }
}

}  // namespace

std::vector<ValidationIssue> validate_trajectory(const Trajectory& t) {
  std::vector<ValidationIssue> out;
  validate_record(t, "", false, out);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

namespace {

Json sort_value_keys(const Json& v) {
  if (v.is_object()) {
    std::map<std::string, const Json*> sorted;
    for (auto it = v.begin(); it != v.end(); ++it)
      sorted.emplace(it.key(), &it.value());
    Json out = Json::object();
    for (const auto& [k, child] : sorted) out[k] = sort_value_keys(*child);
    return out;
  }
  if (v.is_array()) {
    Json out = Json::array();
    for (const auto& item : v) out.push_back(sort_value_keys(item));
    return out;
  }
  return v;
}

Trajectory canonicalize_record(const Trajectory& t) {
  Trajectory out = t;
  out.key_order.clear();
  for (auto& tool : out.tools) {
    tool.key_order.clear();
    std::stable_sort(
        tool.parameters.begin(), tool.parameters.end(),
        [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
    for (auto& p : tool.parameters) p.key_order.clear();
  }
  for (auto& step : out.steps) {
    step.key_order.clear();
    for (auto& call : step.tool_calls) {
      call.key_order.clear();
      call.arguments = sort_value_keys(call.arguments);
    }
  }
  for (auto& ex : out.few_shot_examples) ex = canonicalize_record(ex);
  return out;
}

}  // namespace

Trajectory canonicalize(const Trajectory& t) {
  auto issues = validate_trajectory(t);
  if (!issues.empty())
    throw ConfigError("canonicalize: invalid trajectory (" +
                      to_string(issues.front().code) + " at " +
                      issues.front().path + ")");
  return canonicalize_record(t);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& effective_order(
    const std::vector<std::string>& stored,
    const std::vector<std::string>& declared) {
  return stored.empty() ? declared : stored;
}

}  // namespace

Json param_to_json(const ParamSpec& p) {
  Json out = Json::object();
  for (const auto& key : effective_order(p.key_order, kParamKeys)) {
    if (key == "type") out["type"] = to_string(p.type);
    else if (key == "description") out["description"] = p.description;
    else if (key == "required") out["required"] = p.required;
  }
  return out;
}

Json tool_to_json(const ToolSpec& t) {
  Json out = Json::object();
  for (const auto& key : effective_order(t.key_order, kToolKeys)) {
    if (key == "name") {
      out["name"] = t.name;
    } else if (key == "description") {
      out["description"] = t.description;
    } else if (key == "parameters") {
      Json params = Json::object();
      for (const auto& p : t.parameters) params[p.name] = param_to_json(p);
      out["parameters"] = params;
    }
  }
  return out;
}

Json call_to_json(const ToolCall& c) {
  Json out = Json::object();
  for (const auto& key : effective_order(c.key_order, kCallKeys)) {
    if (key == "name") out["name"] = c.name;
    else if (key == "arguments") out["arguments"] = c.arguments;
  }
  return out;
}

Json step_to_json(const Step& s) {
  Json out = Json::object();
  for (const auto& key : effective_order(s.key_order, kStepKeys)) {
    if (key == "thought") {
      out["thought"] = s.thought;
    } else if (key == "tool_calls") {
      Json calls = Json::array();
      for (const auto& c : s.tool_calls) calls.push_back(call_to_json(c));
      out["tool_calls"] = calls;
    } else if (key == "step_id") {
      out["step_id"] = s.step_id;
    } else if (key == "next_observation") {
      out["next_observation"] = s.next_observation;
    } else if (key == "user_input") {
      out["user_input"] = s.user_input;
    }
  }
  return out;
}

namespace {

Json trajectory_to_json_impl(const Trajectory& t, bool as_element) {
  Json out = Json::object();
  const auto& declared = as_element ? kExampleKeys : kTrajectoryKeys;
  for (const auto& key : effective_order(t.key_order, declared)) {
    if (key == "unique_trajectory_id") {
      if (!as_element) out["unique_trajectory_id"] = t.unique_trajectory_id;
    } else if (key == "task_instruction") {
      out["task_instruction"] = t.task_instruction;
    } else if (key == "few_shot_examples") {
      Json exs = Json::array();
      for (const auto& ex : t.few_shot_examples)
        exs.push_back(trajectory_to_json_impl(ex, true));
      out["few_shot_examples"] = exs;
    } else if (key == "query") {
      out["query"] = t.query;
    } else if (key == "tools") {
      Json tools = Json::array();
      for (const auto& tool : t.tools) tools.push_back(tool_to_json(tool));
      out["tools"] = tools;
    } else if (key == "steps") {
      Json steps = Json::array();
      for (const auto& s : t.steps) steps.push_back(step_to_json(s));
      out["steps"] = steps;
    }
  }
  return out;
}

}  // namespace

Json trajectory_to_json(const Trajectory& t) {
  return trajectory_to_json_impl(t, false);
}

std::string serialize_trajectory(const Trajectory& t) {
  return trajectory_to_json(t).dump();
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void shape_error(const std::string& path,
                              const std::string& what) {
  throw ParseError(0, "at " + path + ": " + what, "MISSING_FIELD");
}

std::string require_string(const Json& obj, const char* key,
                           const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) return "";
  if (!it->is_string())
    shape_error(path + "." + key, "expected a string");
  return it->get<std::string>();
}

/// Captures the observed key order. Unknown keys are a parse error; the
/// order is stored only when it deviates from the declared one.
std::vector<std::string> capture_order(const Json& obj,
                                       const std::vector<std::string>& known,
                                       const std::string& path) {
  std::vector<std::string> observed;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ParseError(0, "at " + path + ": unknown field '" + it.key() + "'");
    observed.push_back(it.key());
  }
  // Declared order with absent keys removed still counts as declared.
  std::vector<std::string> declared_present;
  for (const auto& k : known)
    if (obj.contains(k)) declared_present.push_back(k);
  if (observed == declared_present) return {};
  return observed;
}

ParamSpec param_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) shape_error(path, "expected a parameter object");
  ParamSpec p;
  p.key_order = capture_order(j, kParamKeys, path);
  std::string type_str = require_string(j, "type", path);
  if (type_str.empty()) type_str = "string";
  auto vt = value_type_from_string(type_str);
  if (!vt)
    throw ParseError(0, "at " + path + ".type: unknown value type '" +
                            type_str + "'",
                     "BAD_TYPE");
  p.type = *vt;
  p.description = require_string(j, "description", path);
  if (auto it = j.find("required"); it != j.end()) {
    if (!it->is_boolean()) shape_error(path + ".required", "expected boolean");
    p.required = it->get<bool>();
  }
  return p;
}

ToolSpec tool_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) shape_error(path, "expected a tool object");
  ToolSpec t;
  t.key_order = capture_order(j, kToolKeys, path);
  t.name = require_string(j, "name", path);
  t.description = require_string(j, "description", path);
  if (auto it = j.find("parameters"); it != j.end()) {
    if (!it->is_object()) shape_error(path + ".parameters", "expected object");
    for (auto p = it->begin(); p != it->end(); ++p) {
      ParamSpec spec =
          param_from_json(p.value(), path + ".parameters." + p.key());
      spec.name = p.key();
      t.parameters.push_back(std::move(spec));
    }
  }
  return t;
}

ToolCall call_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) shape_error(path, "expected a tool call object");
  ToolCall c;
  c.key_order = capture_order(j, kCallKeys, path);
  c.name = require_string(j, "name", path);
  if (auto it = j.find("arguments"); it != j.end()) {
    if (!it->is_object()) shape_error(path + ".arguments", "expected object");
    c.arguments = *it;
  }
  return c;
}

Step step_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) shape_error(path, "expected a step object");
  Step s;
  s.key_order = capture_order(j, kStepKeys, path);
  s.thought = require_string(j, "thought", path);
  if (auto it = j.find("tool_calls"); it != j.end()) {
    if (!it->is_array()) shape_error(path + ".tool_calls", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i)
      s.tool_calls.push_back(call_from_json(
          (*it)[i], path + ".tool_calls[" + std::to_string(i) + "]"));
  }
  if (auto it = j.find("step_id"); it != j.end()) {
    if (!it->is_number_integer() && !it->is_number_unsigned())
      shape_error(path + ".step_id", "expected integer");
    s.step_id = it->get<int>();
  } else {
    s.step_id = 0;  // flagged as BAD_STEP_ID downstream
  }
  s.next_observation = require_string(j, "next_observation", path);
  s.user_input = require_string(j, "user_input", path);
  return s;
}

Trajectory trajectory_from_json_impl(const Json& j, bool as_element,
                                     const std::string& path) {
  if (!j.is_object()) shape_error(path, "expected a trajectory object");
  Trajectory t;
  const auto& declared = as_element ? kExampleKeys : kTrajectoryKeys;
  t.key_order = capture_order(j, declared, path);
  if (!as_element)
    t.unique_trajectory_id = require_string(j, "unique_trajectory_id", path);
  t.task_instruction = require_string(j, "task_instruction", path);
  t.query = require_string(j, "query", path);
  if (auto it = j.find("tools"); it != j.end()) {
    if (!it->is_array()) shape_error(path + ".tools", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i)
      t.tools.push_back(
          tool_from_json((*it)[i], path + ".tools[" + std::to_string(i) + "]"));
  }
  if (auto it = j.find("steps"); it != j.end()) {
    if (!it->is_array()) shape_error(path + ".steps", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i)
      t.steps.push_back(step_from_json(
          (*it)[i], path + ".steps[" + std::to_string(i) + "]"));
  }
  if (auto it = j.find("few_shot_examples"); it != j.end()) {
    if (!it->is_array())
      shape_error(path + ".few_shot_examples", "expected array");
    for (std::size_t i = 0; i < it->size(); ++i)
      t.few_shot_examples.push_back(trajectory_from_json_impl(
          (*it)[i], true,
          path + ".few_shot_examples[" + std::to_string(i) + "]"));
  }
  return t;
}

// SAX scanner that rejects duplicate keys anywhere in a record. nlohmann's
// DOM parse silently keeps the first occurrence, which would hide DUP_PARAM
// and DUP_ARG corruption in source data.
struct DupKeyScanner : nlohmann::json_sax<Json> {
  struct Frame {
    std::set<std::string> keys;
    std::string opened_under;  // key whose value this object is
  };
  std::vector<Frame> object_stack;
  std::string last_key;
  std::string duplicate;
  std::string duplicate_context;

  bool key(Json::string_t& val) override {
    last_key = val;
    if (!object_stack.empty() &&
        !object_stack.back().keys.insert(val).second) {
      duplicate = val;
      duplicate_context = object_stack.back().opened_under;
      return false;
    }
    return true;
  }
  bool start_object(std::size_t) override {
    object_stack.push_back({{}, last_key});
    last_key.clear();
    return true;
  }
  bool end_object() override {
    object_stack.pop_back();
    return true;
  }
  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(Json::number_integer_t) override { return true; }
  bool number_unsigned(Json::number_unsigned_t) override { return true; }
  bool number_float(Json::number_float_t, const Json::string_t&) override {
    return true;
  }
  bool string(Json::string_t&) override { return true; }
  bool binary(Json::binary_t&) override { return true; }
  bool start_array(std::size_t) override { return true; }
  bool end_array() override { return true; }
  bool parse_error(std::size_t, const std::string&,
                   const nlohmann::detail::exception&) override {
    return false;
  }
};

}  // namespace

Trajectory trajectory_from_json(const Json& j) {
  return trajectory_from_json_impl(j, false, "$");
}

Trajectory parse_trajectory(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw ParseError(offset, e.what());
  }
  DupKeyScanner scanner;
  if (!Json::sax_parse(line, &scanner) && !scanner.duplicate.empty()) {
    std::string code = "PARSE_ERROR";
    if (scanner.duplicate_context == "arguments") code = "DUP_ARG";
    else if (scanner.duplicate_context == "parameters") code = "DUP_PARAM";
    throw ParseError(0, "duplicate key '" + scanner.duplicate + "'", code);
  }
  return trajectory_from_json(j);
}

// ---------------------------------------------------------------------------
// Corpus files
// ---------------------------------------------------------------------------

std::string corpus_header_line() {
  Json h = Json::object();
  h["corpus_version"] = kCorpusVersion;
  return h.dump();
}

bool is_corpus_header(const Json& j) {
  return j.is_object() && j.contains("corpus_version") &&
         !j.contains("unique_trajectory_id");
}

void write_corpus(const std::string& path,
                  const std::vector<Trajectory>& trajectories) {
  std::string out = corpus_header_line() + "\n";
  for (const auto& t : trajectories) out += serialize_trajectory(t) + "\n";
  write_file(path, out);
}

std::vector<Trajectory> read_corpus(const std::string& path) {
  std::string text = read_file(path);
  std::vector<Trajectory> out;
  bool first = true;
  for (const auto& [line, offset] : split_lines(text)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      Json j = Json::parse(line, nullptr, false);
      if (is_corpus_header(j)) continue;
    }
    out.push_back(parse_trajectory(line));
  }
  return out;
}

}  // namespace fcpipe::unified
