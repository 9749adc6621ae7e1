#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcpipe/augment.hpp"
#include "fcpipe/unified.hpp"

namespace fcpipe::render {

// ---------------------------------------------------------------------------
// Training-pair rendering: sectioned prompts plus a format-encoded target,
// byte-deterministic. Section payloads are identical across styles; only the
// boundary tokens differ.
// ---------------------------------------------------------------------------

enum class ConcatStyle {
  BracketCaps,  // [BEGIN OF QUERY] ... [END OF QUERY]
  XmlTags,      // <query> ... </query>
  PlainText,    // QUERY: heading line
};

std::string to_string(ConcatStyle s);
std::optional<ConcatStyle> style_from_string(std::string_view s);

struct RenderedExample {
  std::string prompt;
  std::string target;
  std::string trajectory_id;
  int step_index = 0;
  ConcatStyle style = ConcatStyle::BracketCaps;
  augment::FormatId format = augment::FormatId::JsonCompact;
  std::uint64_t seed = 0;
  augment::SectionOrder section_order;

  Json to_json() const;
};

/// Renders the prompt for step `step_index` (1-based): every section before
/// that step, in `order`, empty sections omitted, one blank line between
/// sections, trailing newline. The target is convert_output of the step's
/// (thought, tool_calls) under `f`. Throws ConfigError when step_index is
/// out of range.
RenderedExample render_example(const unified::Trajectory& t, int step_index,
                               ConcatStyle style, augment::FormatId f,
                               const augment::SectionOrder& order);

struct RenderPlan {
  std::vector<ConcatStyle> styles = {ConcatStyle::BracketCaps};
  std::vector<augment::FormatId> formats = {augment::FormatId::JsonCompact};
  augment::ShuffleSpec shuffle;  // aspect flags; per-example seeds are derived
  std::uint64_t seed = 0;
  int variants_per_step = 1;
  bool last_step_only = false;

  static RenderPlan from_json(const Json& j);
};

/// One example per (trajectory, step, variant). Style, format and shuffle
/// seed are drawn from a per-example RNG seeded by
/// mix_seed(mix_seed(derive_trajectory_seed(plan.seed, id), step), variant),
/// so output depends only on the plan and the trajectory, not on corpus
/// position or worker count.
std::vector<RenderedExample> render_corpus(const std::vector<unified::Trajectory>& corpus,
                                           const RenderPlan& plan,
                                           std::size_t workers = 1);

}  // namespace fcpipe::render
