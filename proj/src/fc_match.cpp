#include "fcpipe/fc_match.hpp"

#include <cmath>
#include <functional>

#include "fcpipe/common.hpp"
#include "fcpipe/verify.hpp"

namespace fcpipe::fc_match {

namespace {

using unified::ToolCall;
using unified::ToolSpec;

bool numbers_close(double a, double b, double tol) {
  if (a == b) return true;
  double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= tol * scale;
}

void compare_values(const Json& pred, const Json& exp, const std::string& path,
                    const MatchPolicy& policy,
                    std::vector<std::pair<std::string, std::string>>& out);

// Ordered or (policy) unordered element-wise array comparison. Unordered mode
// backtracks over assignments; argument arrays are small.
void compare_arrays(const Json& pred, const Json& exp, const std::string& path,
                    const MatchPolicy& policy,
                    std::vector<std::pair<std::string, std::string>>& out) {
  if (pred.size() != exp.size()) {
    out.emplace_back(path, "array length " + std::to_string(pred.size()) + " != " +
                               std::to_string(exp.size()));
    return;
  }
  if (!policy.unordered_arrays) {
    for (std::size_t i = 0; i < pred.size(); ++i)
      compare_values(pred[i], exp[i], path + "[" + std::to_string(i) + "]", policy, out);
    return;
  }
  std::size_t n = pred.size();
  std::vector<bool> used(n, false);
  std::function<bool(std::size_t)> assign = [&](std::size_t i) -> bool {
    if (i == n) return true;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      std::vector<std::pair<std::string, std::string>> probe;
      compare_values(pred[i], exp[j], path, policy, probe);
      if (!probe.empty()) continue;
      used[j] = true;
      if (assign(i + 1)) return true;
      used[j] = false;
    }
    return false;
  };
  if (!assign(0)) out.emplace_back(path, "no unordered element assignment matches");
}

void compare_values(const Json& pred, const Json& exp, const std::string& path,
                    const MatchPolicy& policy,
                    std::vector<std::pair<std::string, std::string>>& out) {
  if (pred.is_number() && exp.is_number()) {
    if (!numbers_close(pred.get<double>(), exp.get<double>(), policy.float_tolerance))
      out.emplace_back(path, pred.dump() + " != " + exp.dump());
    return;
  }
  auto pred_kind = unified::value_kind(pred);
  auto exp_kind = unified::value_kind(exp);
  if (pred_kind != exp_kind) {
    if (policy.coerce_types && exp_kind) {
      if (auto coerced = verify::coerce_value(pred, *exp_kind)) {
        compare_values(*coerced, exp, path, policy, out);
        return;
      }
    }
    out.emplace_back(path, "kind mismatch: " + pred.dump() + " vs " + exp.dump());
    return;
  }
  if (exp.is_string()) {
    auto a = pred.get<std::string>();
    auto b = exp.get<std::string>();
    bool equal = policy.string_case_sensitive ? a == b
                                              : to_lower_ascii(a) == to_lower_ascii(b);
    if (!equal) out.emplace_back(path, Json(a).dump() + " != " + Json(b).dump());
    return;
  }
  if (exp.is_boolean()) {
    if (pred.get<bool>() != exp.get<bool>())
      out.emplace_back(path, pred.dump() + " != " + exp.dump());
    return;
  }
  if (exp.is_array()) {
    compare_arrays(pred, exp, path, policy, out);
    return;
  }
  if (exp.is_object()) {
    for (const auto& item : exp.items()) {
      if (!pred.contains(item.key())) {
        out.emplace_back(path + "." + item.key(), "missing in prediction");
        continue;
      }
      compare_values(pred.at(item.key()), item.value(), path + "." + item.key(), policy, out);
    }
    for (const auto& item : pred.items())
      if (!exp.contains(item.key()))
        out.emplace_back(path + "." + item.key(), "unexpected in prediction");
    return;
  }
  if (pred != exp) out.emplace_back(path, pred.dump() + " != " + exp.dump());
}

const ToolSpec* find_spec(const std::vector<ToolSpec>& specs, const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return &s;
  return nullptr;
}

std::string join_mismatches(const MatchResult& r) {
  std::string s;
  for (const auto& [path, reason] : r.mismatches) {
    if (!s.empty()) s += "; ";
    s += path.empty() ? reason : path + ": " + reason;
  }
  return s;
}

}  // namespace

std::string to_string(Category c) {
  switch (c) {
    case Category::Simple: return "simple";
    case Category::Multiple: return "multiple";
    case Category::Parallel: return "parallel";
    case Category::ParallelMultiple: return "parallel_multiple";
    case Category::Relevance: return "relevance";
    case Category::Irrelevance: return "irrelevance";
  }
  throw ConfigError("unknown category");
}

std::optional<Category> category_from_string(std::string_view s) {
  for (auto c : {Category::Simple, Category::Multiple, Category::Parallel,
                 Category::ParallelMultiple, Category::Relevance, Category::Irrelevance})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

MatchResult match_call(const ToolCall& pred, const ToolCall& exp,
                       const std::vector<ToolSpec>& specs, const MatchPolicy& policy) {
  if (!find_spec(specs, exp.name))
    throw ConfigError("expected call names unknown tool " + exp.name);
  MatchResult r;
  if (pred.name != exp.name) {
    r.mismatches.emplace_back("name", pred.name + " != " + exp.name);
    r.matched = false;
    return r;
  }
  for (const auto& item : exp.arguments.items()) {
    if (!pred.arguments.contains(item.key())) {
      r.mismatches.emplace_back("arguments." + item.key(), "missing in prediction");
      continue;
    }
    compare_values(pred.arguments.at(item.key()), item.value(),
                   "arguments." + item.key(), policy, r.mismatches);
  }
  for (const auto& item : pred.arguments.items())
    if (!exp.arguments.contains(item.key()))
      r.mismatches.emplace_back("arguments." + item.key(), "unexpected in prediction");
  r.matched = r.mismatches.empty();
  return r;
}

MatchResult match_call_set(const std::vector<ToolCall>& preds,
                           const std::vector<ToolCall>& exps,
                           const std::vector<ToolSpec>& specs, const MatchPolicy& policy) {
  MatchResult r;
  if (preds.size() != exps.size()) {
    r.mismatches.emplace_back("tool_calls", "call count " + std::to_string(preds.size()) +
                                                " != " + std::to_string(exps.size()));
    return r;
  }
  std::size_t n = preds.size();
  if (n == 0) {
    r.matched = true;
    return r;
  }
  std::vector<std::vector<bool>> compat(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      compat[i][j] = match_call(preds[i], exps[j], specs, policy).matched;

  bool matched = false;
  if (n <= 8) {
    std::vector<bool> used(n, false);
    std::function<bool(std::size_t)> assign = [&](std::size_t i) -> bool {
      if (i == n) return true;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j] || !compat[i][j]) continue;
        used[j] = true;
        if (assign(i + 1)) return true;
        used[j] = false;
      }
      return false;
    };
    matched = assign(0);
  } else {
    // Kuhn's augmenting-path maximum matching.
    std::vector<int> match_of_exp(n, -1);
    std::function<bool(std::size_t, std::vector<bool>&)> try_kuhn =
        [&](std::size_t i, std::vector<bool>& visited) -> bool {
      for (std::size_t j = 0; j < n; ++j) {
        if (!compat[i][j] || visited[j]) continue;
        visited[j] = true;
        if (match_of_exp[j] < 0 ||
            try_kuhn(static_cast<std::size_t>(match_of_exp[j]), visited)) {
          match_of_exp[j] = static_cast<int>(i);
          return true;
        }
      }
      return false;
    };
    std::size_t matched_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<bool> visited(n, false);
      if (try_kuhn(i, visited)) ++matched_count;
    }
    matched = matched_count == n;
  }
  r.matched = matched;
  if (!matched) {
    for (std::size_t i = 0; i < n; ++i) {
      bool has_partner = false;
      for (std::size_t j = 0; j < n && !has_partner; ++j) has_partner = compat[i][j];
      if (!has_partner)
        r.mismatches.emplace_back("tool_calls[" + std::to_string(i) + "]",
                                  "matches no expected call");
    }
    if (r.mismatches.empty())
      r.mismatches.emplace_back("tool_calls", "no perfect assignment of calls exists");
  }
  return r;
}

ScoreResult score_example_detail(const std::string& pred_text, augment::FormatId f,
                                 const std::vector<ToolCall>& exps, Category cat,
                                 const std::vector<ToolSpec>& specs,
                                 const MatchPolicy& policy) {
  augment::StepOutput parsed;
  try {
    parsed = augment::parse_output(pred_text, f);
  } catch (const ParseError& e) {
    return {false, std::string("PARSE_FAIL: ") + e.what()};
  }
  const auto& calls = parsed.tool_calls;
  try {
    switch (cat) {
    case Category::Simple:
    case Category::Multiple: {
      if (exps.size() != 1)
        return {false, "BAD_EXPECTATION: " + to_string(cat) + " needs exactly one expected call"};
      if (calls.size() != 1)
        return {false, "CALL_COUNT: expected 1 call, got " + std::to_string(calls.size())};
      auto r = match_call(calls[0], exps[0], specs, policy);
      if (!r.matched) return {false, "MISMATCH: " + join_mismatches(r)};
      return {true, ""};
    }
    case Category::Parallel:
    case Category::ParallelMultiple: {
      if (calls.size() != exps.size())
        return {false, "CALL_COUNT: expected " + std::to_string(exps.size()) +
                           " calls, got " + std::to_string(calls.size())};
      auto r = match_call_set(calls, exps, specs, policy);
      if (!r.matched) return {false, "MISMATCH: " + join_mismatches(r)};
      return {true, ""};
    }
    case Category::Irrelevance: {
      if (!calls.empty())
        return {false, "EXPECTED_NO_CALLS: got " + std::to_string(calls.size())};
      return {true, ""};
    }
    case Category::Relevance: {
      if (calls.empty()) return {false, "EXPECTED_CALLS: got none"};
      for (const auto& c : calls)
        if (!find_spec(specs, c.name))
          return {false, "UNKNOWN_TOOL: " + c.name};
      return {true, ""};
    }
    }
  } catch (const std::exception& e) {
    return {false, std::string("BAD_EXPECTATION: ") + e.what()};
  }
  return {false, "BAD_CATEGORY"};
}

bool score_example(const std::string& pred_text, augment::FormatId f,
                   const std::vector<ToolCall>& exps, Category cat,
                   const std::vector<ToolSpec>& specs, const MatchPolicy& policy) {
  return score_example_detail(pred_text, f, exps, cat, specs, policy).pass;
}

}  // namespace fcpipe::fc_match
