#include "fcpipe/verify.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

namespace fcpipe::verify {

namespace {

using unified::ParamSpec;
using unified::Step;
using unified::ToolCall;
using unified::ToolSpec;
using unified::Trajectory;
using unified::ValueType;

std::string quote(const std::string& s) { return Json(s).dump(); }

const ToolSpec* find_tool(const std::vector<ToolSpec>& tools, const std::string& name) {
  for (const auto& t : tools)
    if (t.name == name) return &t;
  return nullptr;
}

bool kind_matches(const Json& value, ValueType declared) {
  auto kind = unified::value_kind(value);
  if (!kind) return false;
  if (declared == ValueType::Number)
    return *kind == ValueType::Number || *kind == ValueType::Integer;
  return *kind == declared;
}

// --- coercion ----------------------------------------------------------------

bool integer_grammar(std::string_view s) {
  if (!s.empty() && s[0] == '-') s.remove_prefix(1);
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

bool decimal_grammar(std::string_view s) {
  // -?digits(.digits)?([eE][+-]?digits)?
  std::size_t i = 0;
  auto digits = [&] {
    std::size_t start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    return i > start;
  };
  if (i < s.size() && s[i] == '-') ++i;
  if (!digits()) return false;
  if (i < s.size() && s[i] == '.') {
    ++i;
    if (!digits()) return false;
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    if (!digits()) return false;
  }
  return i == s.size();
}

std::string trim_spaces(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::optional<Json> coerce_value(const Json& v, ValueType target) {
  auto kind = unified::value_kind(v);
  if (!kind) return std::nullopt;
  if (*kind == ValueType::Integer && target == ValueType::Number) return v;
  if (*kind != ValueType::String) return std::nullopt;
  auto text = trim_spaces(v.get<std::string>());
  switch (target) {
    case ValueType::Integer: {
      if (!integer_grammar(text)) return std::nullopt;
      std::int64_t out = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
      if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
      return Json(out);
    }
    case ValueType::Number: {
      if (!decimal_grammar(text)) return std::nullopt;
      if (integer_grammar(text)) {
        std::int64_t out = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
        if (ec == std::errc() && ptr == text.data() + text.size()) return Json(out);
      }
      try {
        return Json(std::stod(text));
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
    case ValueType::Boolean: {
      auto lc = to_lower_ascii(text);
      if (lc == "true") return Json(true);
      if (lc == "false") return Json(false);
      return std::nullopt;
    }
    case ValueType::Array:
    case ValueType::Object: {
      Json parsed = Json::parse(text, nullptr, false);
      if (parsed.is_discarded()) return std::nullopt;
      if (target == ValueType::Array && parsed.is_array()) return parsed;
      if (target == ValueType::Object && parsed.is_object()) return parsed;
      return std::nullopt;
    }
    case ValueType::String:
      return std::nullopt;
  }
  return std::nullopt;
}

// --- finding plumbing ----------------------------------------------------------

std::string to_string(FindingCode c) {
  switch (c) {
    case FindingCode::UndefinedFunction: return "UNDEFINED_FUNCTION";
    case FindingCode::UndefinedArgument: return "UNDEFINED_ARGUMENT";
    case FindingCode::ArgTypeMismatch: return "ARG_TYPE_MISMATCH";
    case FindingCode::NameHallucination: return "NAME_HALLUCINATION";
    case FindingCode::ValueUngrounded: return "VALUE_UNGROUNDED";
    case FindingCode::MissingRequiredArg: return "MISSING_REQUIRED_ARG";
    case FindingCode::RepetitiveContent: return "REPETITIVE_CONTENT";
    case FindingCode::ExecFailure: return "EXEC_FAILURE";
  }
  throw ConfigError("unknown finding code");
}

std::optional<FindingCode> finding_code_from_string(std::string_view s) {
  for (auto c : {FindingCode::UndefinedFunction, FindingCode::UndefinedArgument,
                 FindingCode::ArgTypeMismatch, FindingCode::NameHallucination,
                 FindingCode::ValueUngrounded, FindingCode::MissingRequiredArg,
                 FindingCode::RepetitiveContent, FindingCode::ExecFailure})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::string to_string(Severity s) { return s == Severity::Error ? "error" : "suspect"; }

Severity severity_of(FindingCode c) {
  return (c == FindingCode::ValueUngrounded || c == FindingCode::RepetitiveContent)
             ? Severity::Suspect
             : Severity::Error;
}

Finding make_finding(FindingCode code, int step_id, std::string path, std::string detail) {
  Finding f;
  f.code = code;
  f.severity = severity_of(code);
  f.step_id = step_id;
  f.path = std::move(path);
  f.detail = std::move(detail);
  return f;
}

Json Finding::to_json() const {
  Json j = Json::object();
  j["code"] = verify::to_string(code);
  j["severity"] = verify::to_string(severity);
  j["step_id"] = step_id;
  j["path"] = path;
  j["detail"] = detail;
  if (repair) j["repair"] = unified::call_to_json(*repair);
  return j;
}

Json DiagnosticReport::to_json() const {
  Json j = Json::object();
  j["trajectory_id"] = trajectory_id;
  Json fs = Json::array();
  for (const auto& f : findings) fs.push_back(f.to_json());
  j["findings"] = std::move(fs);
  j["clean"] = clean;
  return j;
}

// --- grounding context ----------------------------------------------------------

GroundingContext build_grounding_context(const Trajectory& t, std::size_t step_index) {
  GroundingContext ctx;
  ctx.query = t.query;
  ctx.task_instruction = t.task_instruction;
  for (std::size_t i = 0; i < step_index && i < t.steps.size(); ++i) {
    if (!t.steps[i].next_observation.empty())
      ctx.prior_observations.push_back(t.steps[i].next_observation);
    if (!t.steps[i].user_input.empty())
      ctx.prior_user_inputs.push_back(t.steps[i].user_input);
  }
  for (const auto& tool : t.tools)
    for (const auto& p : tool.parameters)
      if (!p.description.empty()) ctx.enum_values.push_back(p.description);
  return ctx;
}

// --- sandbox ---------------------------------------------------------------------

void SandboxRegistry::add(const std::string& name, SandboxStub stub) {
  if (stubs_.count(name)) throw ConfigError("duplicate sandbox stub: " + name);
  stubs_[name] = std::move(stub);
}

const SandboxStub* SandboxRegistry::find(const std::string& name) const {
  auto it = stubs_.find(name);
  return it == stubs_.end() ? nullptr : &it->second;
}

SandboxRegistry SandboxRegistry::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("sandbox registry must be an object");
  SandboxRegistry reg;
  for (const auto& [name, entry] : j.items()) {
    if (!entry.is_object() || entry.size() != 1 ||
        !(entry.contains("outcome") || entry.contains("error")))
      throw ConfigError("stub " + name + " must be {\"outcome\": text} or {\"error\": text}");
    if (entry.contains("outcome")) {
      std::string text = entry.at("outcome").get<std::string>();
      reg.add(name, [text](const Json&) { return SandboxOutcome{true, text}; });
    } else {
      std::string text = entry.at("error").get<std::string>();
      reg.add(name, [text](const Json&) { return SandboxOutcome{false, text}; });
    }
  }
  return reg;
}

VerifyPolicy policy_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("policy must be an object");
  VerifyPolicy p;
  for (const auto& [key, value] : j.items()) {
    if (key == "apply_repairs") p.apply_repairs = value.get<bool>();
    else if (key == "check_grounding") p.check_grounding = value.get<bool>();
    else if (key == "check_repetition") p.check_repetition = value.get<bool>();
    else if (key == "run_sandbox") p.run_sandbox = value.get<bool>();
    else if (key == "max_ngram_repeat") p.max_ngram_repeat = value.get<int>();
    else if (key == "max_dup_steps") p.max_dup_steps = value.get<int>();
    else throw ConfigError("unknown policy key: " + key);
  }
  if (p.max_ngram_repeat < 1 || p.max_dup_steps < 1)
    throw ConfigError("repetition thresholds must be >= 1");
  return p;
}

// --- checks -----------------------------------------------------------------------

std::vector<Finding> check_undefined_function(const ToolCall& call,
                                              const std::vector<ToolSpec>& tools) {
  if (find_tool(tools, call.name)) return {};
  return {make_finding(FindingCode::UndefinedFunction, 0, "name",
                       "call " + quote(call.name) + " matches no declared tool")};
}

std::vector<Finding> check_undefined_arguments(const ToolCall& call, const ToolSpec& spec) {
  if (call.name != spec.name)
    throw ConfigError("check_undefined_arguments: call/spec name mismatch");
  std::vector<Finding> out;
  for (const auto& item : call.arguments.items()) {
    if (!spec.find_param(item.key()))
      out.push_back(make_finding(FindingCode::UndefinedArgument, 0,
                                 "arguments." + item.key(),
                                 "argument " + quote(item.key()) + " is not declared by " +
                                     quote(spec.name)));
  }
  for (const auto& p : spec.parameters) {
    if (p.required && !call.arguments.contains(p.name))
      out.push_back(make_finding(FindingCode::MissingRequiredArg, 0, "arguments." + p.name,
                                 "required argument " + quote(p.name) + " is absent"));
  }
  return out;
}

TypeCheckResult check_argument_types(const ToolCall& call, const ToolSpec& spec,
                                     bool repair) {
  if (call.name != spec.name)
    throw ConfigError("check_argument_types: call/spec name mismatch");
  TypeCheckResult result;
  ToolCall fixed = call;
  bool any_coerced = false;
  bool all_coercible = true;
  struct Pending {
    std::size_t finding_index;
    bool coerced;
  };
  std::vector<Pending> pending;
  for (const auto& item : call.arguments.items()) {
    const ParamSpec* p = spec.find_param(item.key());
    if (!p) continue;  // undefined arguments are a different check
    if (kind_matches(item.value(), p->type)) continue;
    auto coerced = repair ? coerce_value(item.value(), p->type) : std::nullopt;
    std::string detail = "argument " + quote(item.key()) + " should be " +
                         unified::to_string(p->type) + ", got " + item.value().dump();
    result.findings.push_back(make_finding(FindingCode::ArgTypeMismatch, 0,
                                           "arguments." + item.key(), detail));
    if (coerced) {
      fixed.arguments[item.key()] = *coerced;
      any_coerced = true;
      pending.push_back({result.findings.size() - 1, true});
    } else {
      all_coercible = false;
      pending.push_back({result.findings.size() - 1, false});
    }
  }
  if (repair && any_coerced) {
    for (const auto& p : pending)
      if (p.coerced) result.findings[p.finding_index].repair = fixed;
    if (all_coercible) result.repaired = fixed;
  }
  return result;
}

std::vector<Finding> check_name_hallucination(const std::vector<ToolCall>& calls,
                                              const std::vector<ToolSpec>& tools) {
  std::set<std::string> all_params;
  for (const auto& t : tools)
    for (const auto& p : t.parameters) all_params.insert(p.name);
  std::vector<Finding> out;
  for (std::size_t c = 0; c < calls.size(); ++c) {
    const auto& call = calls[c];
    const ToolSpec* spec = find_tool(tools, call.name);
    std::string base = "tool_calls[" + std::to_string(c) + "]";
    if (!spec)
      out.push_back(make_finding(FindingCode::NameHallucination, 0, base + ".name",
                                 "tool name " + quote(call.name) +
                                     " does not appear in the provided tool list"));
    for (const auto& item : call.arguments.items()) {
      bool known = spec ? spec->find_param(item.key()) != nullptr
                        : all_params.count(item.key()) > 0;
      if (!known)
        out.push_back(make_finding(FindingCode::NameHallucination, 0,
                                   base + ".arguments." + item.key(),
                                   "argument name " + quote(item.key()) +
                                       " does not appear in the provided argument list"));
    }
  }
  return out;
}

namespace {

bool grounded_in(const std::string& needle, const std::vector<std::string>& haystacks) {
  if (needle.empty()) return true;  // nothing checkable once normalized away
  for (const auto& h : haystacks)
    if (h.find(needle) != std::string::npos) return true;
  return false;
}

void ground_value(const Json& value, const std::string& path,
                  const std::vector<std::string>& normalized_context,
                  std::vector<Finding>& out) {
  if (value.is_boolean() || value.is_null()) return;
  if (value.is_array()) {
    for (std::size_t i = 0; i < value.size(); ++i)
      ground_value(value[i], path + "[" + std::to_string(i) + "]", normalized_context, out);
    return;
  }
  if (value.is_object()) {
    for (const auto& item : value.items())
      ground_value(item.value(), path + "." + item.key(), normalized_context, out);
    return;
  }
  std::string needle;
  if (value.is_number()) {
    needle = canonical_number(value.get<double>());
  } else {
    auto text = value.get<std::string>();
    if (text.empty()) return;
    needle = normalize_text(text);
  }
  if (!grounded_in(needle, normalized_context))
    out.push_back(make_finding(FindingCode::ValueUngrounded, 0, path,
                               "value " + value.dump() +
                                   " appears in no query, instruction, prior "
                                   "observation, prior user input or parameter "
                                   "description"));
}

}  // namespace

std::vector<Finding> check_value_grounding(const ToolCall& call, const GroundingContext& ctx) {
  std::vector<std::string> normalized;
  normalized.push_back(normalize_text(ctx.query));
  normalized.push_back(normalize_text(ctx.task_instruction));
  for (const auto& s : ctx.prior_observations) normalized.push_back(normalize_text(s));
  for (const auto& s : ctx.prior_user_inputs) normalized.push_back(normalize_text(s));
  for (const auto& s : ctx.enum_values) normalized.push_back(normalize_text(s));
  std::vector<Finding> out;
  for (const auto& item : call.arguments.items())
    ground_value(item.value(), "arguments." + item.key(), normalized, out);
  return out;
}

std::vector<Finding> check_repetition(const Trajectory& t, int max_ngram_repeat,
                                      int max_dup_steps) {
  if (max_ngram_repeat < 1 || max_dup_steps < 1)
    throw ConfigError("repetition thresholds must be >= 1");
  std::vector<Finding> out;
  constexpr std::size_t kNgram = 4;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    auto words = split_words(normalize_text(t.steps[i].thought));
    if (words.size() < kNgram) continue;
    std::map<std::string, int> counts;
    int worst = 0;
    std::string worst_gram;
    for (std::size_t w = 0; w + kNgram <= words.size(); ++w) {
      std::string gram = words[w];
      for (std::size_t k = 1; k < kNgram; ++k) gram += " " + words[w + k];
      int c = ++counts[gram];
      if (c > worst) {
        worst = c;
        worst_gram = gram;
      }
    }
    if (worst > max_ngram_repeat)
      out.push_back(make_finding(
          FindingCode::RepetitiveContent, static_cast<int>(i) + 1,
          "steps[" + std::to_string(i) + "].thought",
          "4-gram " + quote(worst_gram) + " occurs " + std::to_string(worst) +
              " times (limit " + std::to_string(max_ngram_repeat) + ")"));
  }
  auto same = [](const Step& a, const Step& b) {
    return a.thought == b.thought && a.tool_calls == b.tool_calls;
  };
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= t.steps.size(); ++i) {
    if (i < t.steps.size() && same(t.steps[i], t.steps[run_start])) continue;
    std::size_t run_len = i - run_start;
    if (run_len > static_cast<std::size_t>(max_dup_steps))
      out.push_back(make_finding(
          FindingCode::RepetitiveContent, static_cast<int>(run_start) + 1,
          "steps[" + std::to_string(run_start) + "]",
          std::to_string(run_len) + " consecutive identical steps (limit " +
              std::to_string(max_dup_steps) + ")"));
    run_start = i;
  }
  return out;
}

std::variant<std::string, Finding> execute_in_sandbox(const ToolCall& call,
                                                      const SandboxRegistry& registry) {
  const SandboxStub* stub = registry.find(call.name);
  if (!stub)
    return make_finding(FindingCode::ExecFailure, 0, "",
                        "no sandbox stub registered for " + quote(call.name));
  SandboxOutcome outcome = (*stub)(call.arguments);
  if (!outcome.ok)
    return make_finding(FindingCode::ExecFailure, 0, "",
                        "stub " + quote(call.name) + " failed: " + outcome.text);
  return outcome.text;
}

// --- composition ---------------------------------------------------------------

namespace {

// Rebases a call-relative finding onto its owning step and call.
Finding rebase(Finding f, std::size_t step_index, std::optional<std::size_t> call_index) {
  f.step_id = static_cast<int>(step_index) + 1;
  std::string prefix = "steps[" + std::to_string(step_index) + "]";
  if (call_index) prefix += ".tool_calls[" + std::to_string(*call_index) + "]";
  f.path = f.path.empty() ? prefix : prefix + "." + f.path;
  return f;
}

}  // namespace

DiagnosticReport verify_trajectory(const Trajectory& t, const VerifyPolicy& policy) {
  if (policy.run_sandbox && !policy.sandbox)
    throw ConfigError("run_sandbox requires a sandbox registry");
  DiagnosticReport report;
  report.trajectory_id = t.unique_trajectory_id;
  Trajectory work = t;
  bool any_repair = false;

  for (std::size_t s = 0; s < work.steps.size(); ++s) {
    auto& step = work.steps[s];
    for (std::size_t c = 0; c < step.tool_calls.size(); ++c) {
      auto& call = step.tool_calls[c];
      for (auto f : check_undefined_function(call, work.tools))
        report.findings.push_back(rebase(std::move(f), s, c));
    }
    for (auto f : check_name_hallucination(step.tool_calls, work.tools))
      report.findings.push_back(rebase(std::move(f), s, std::nullopt));
    for (std::size_t c = 0; c < step.tool_calls.size(); ++c) {
      auto& call = step.tool_calls[c];
      const ToolSpec* spec = find_tool(work.tools, call.name);
      if (!spec) continue;
      for (auto f : check_undefined_arguments(call, *spec))
        report.findings.push_back(rebase(std::move(f), s, c));
      auto typed = check_argument_types(call, *spec, policy.apply_repairs);
      for (auto f : typed.findings)
        report.findings.push_back(rebase(std::move(f), s, c));
      if (policy.apply_repairs && typed.repaired) {
        call = *typed.repaired;
        any_repair = true;
      }
    }
    if (policy.check_grounding) {
      GroundingContext ctx = build_grounding_context(work, s);
      for (std::size_t c = 0; c < step.tool_calls.size(); ++c) {
        for (auto f : check_value_grounding(step.tool_calls[c], ctx)) {
          Finding rebased = rebase(std::move(f), s, c);
          if (policy.grounding_judge && !policy.grounding_judge(rebased, work)) continue;
          report.findings.push_back(std::move(rebased));
        }
      }
    }
  }
  if (policy.check_repetition)
    for (auto& f : check_repetition(work, policy.max_ngram_repeat, policy.max_dup_steps))
      report.findings.push_back(f);
  if (policy.run_sandbox) {
    for (std::size_t s = 0; s < work.steps.size(); ++s) {
      for (std::size_t c = 0; c < work.steps[s].tool_calls.size(); ++c) {
        auto outcome = execute_in_sandbox(work.steps[s].tool_calls[c], *policy.sandbox);
        if (auto* f = std::get_if<Finding>(&outcome))
          report.findings.push_back(rebase(std::move(*f), s, c));
      }
    }
  }

  std::stable_sort(report.findings.begin(), report.findings.end(),
                   [](const Finding& a, const Finding& b) {
                     if (a.step_id != b.step_id) return a.step_id < b.step_id;
                     if (a.path != b.path) return a.path < b.path;
                     return to_string(a.code) < to_string(b.code);
                   });
  report.clean = std::none_of(report.findings.begin(), report.findings.end(),
                              [](const Finding& f) { return f.severity == Severity::Error; });
  if (any_repair) report.repaired = std::move(work);
  return report;
}

}  // namespace fcpipe::verify
