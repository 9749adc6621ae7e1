#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fcpipe/augment.hpp"
#include "fcpipe/unified.hpp"

namespace fcpipe::fc_match {

// ---------------------------------------------------------------------------
// Structural (AST-level) matching of predicted vs. expected calls, plus the
// six-category scorer used by `score`.
// ---------------------------------------------------------------------------

enum class Category { Simple, Multiple, Parallel, ParallelMultiple, Relevance, Irrelevance };

std::string to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);

struct MatchPolicy {
  double float_tolerance = 1e-9;  // relative
  bool string_case_sensitive = true;
  bool coerce_types = true;
  bool unordered_arrays = false;
};

struct MatchResult {
  bool matched = false;
  std::vector<std::pair<std::string, std::string>> mismatches;  // (path, reason)
};

/// Name plus argument-map equality under the policy: numeric values compare
/// within the relative tolerance, strings per the case rule, and (when
/// coercion is on) a prediction value may first be converted toward the
/// expected value's kind via the verify coercion table. Mismatch paths name
/// the deepest differing node. Precondition: exp.name exists in specs.
MatchResult match_call(const unified::ToolCall& pred, const unified::ToolCall& exp,
                       const std::vector<unified::ToolSpec>& specs,
                       const MatchPolicy& policy);

/// Order-insensitive set equality: |preds| == |exps| and a perfect matching
/// of preds onto exps under match_call exists. Exhaustive assignment up to
/// n = 8, Kuhn's maximum bipartite matching beyond.
MatchResult match_call_set(const std::vector<unified::ToolCall>& preds,
                           const std::vector<unified::ToolCall>& exps,
                           const std::vector<unified::ToolSpec>& specs,
                           const MatchPolicy& policy);

struct ScoreResult {
  bool pass = false;
  std::string reason;  // empty on pass; starts with a stable code otherwise
};

/// Parses pred_text under f, then scores by category:
///   simple / multiple       exactly one predicted call matching the one expected
///   parallel / parallel_multiple   set match against all expected calls
///   irrelevance             no predicted calls at all
///   relevance               at least one call, every name a declared tool
/// Never throws; parse failures fold into {false, "PARSE_FAIL: ..."}.
ScoreResult score_example_detail(const std::string& pred_text, augment::FormatId f,
                                 const std::vector<unified::ToolCall>& exps, Category cat,
                                 const std::vector<unified::ToolSpec>& specs,
                                 const MatchPolicy& policy);

bool score_example(const std::string& pred_text, augment::FormatId f,
                   const std::vector<unified::ToolCall>& exps, Category cat,
                   const std::vector<unified::ToolSpec>& specs, const MatchPolicy& policy);

}  // namespace fcpipe::fc_match
