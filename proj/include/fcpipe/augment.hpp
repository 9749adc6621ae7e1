#pragma once

#include <array>
#include <string>
#include <vector>

#include "fcpipe/unified.hpp"

namespace fcpipe::judge {
class JudgeClient;
}

namespace fcpipe::augment {

// ---------------------------------------------------------------------------
// Output format catalog. Exactly 15 formats, each with a converter, an
// exact-inverse parser and a fixed instruction paragraph. Grammars are
// documented in docs/formats.md; the shared escaping rule (scalar payloads
// are JSON-encoded tokens) makes every Unicode thought encodable in every
// format.
// ---------------------------------------------------------------------------

enum class FormatId {
  JsonCompact,
  JsonPretty,
  JsonFenced,
  Xml,
  Yaml,
  PlainKv,
  MarkdownList,
  PythonicCall,
  TaggedCall,
  TsvArgs,
  BulletedText,
  NumberedText,
  KeyEquals,
  BracketCall,
  YamlFlow,
};

inline constexpr std::size_t kFormatCount = 15;

const std::array<FormatId, kFormatCount>& all_formats();
std::string to_string(FormatId f);
std::optional<FormatId> format_from_string(std::string_view s);

/// The semantic payload every format encodes losslessly.
struct StepOutput {
  std::string thought;
  std::vector<unified::ToolCall> tool_calls;

  bool operator==(const StepOutput&) const = default;
};

/// Deterministic text encoding of `out` in format `f`. Byte-stable across
/// runs and platforms. Presentation-only state (call key_order) is not
/// encoded; parse_output always returns calls in canonical field order.
std::string convert_output(const StepOutput& out, FormatId f);

/// Exact inverse of convert_output on its own output:
/// parse_output(convert_output(x, f), f) == x for every x and every f.
/// Throws ParseError (with byte offset) on malformed text; never returns a
/// partial result.
StepOutput parse_output(std::string_view text, FormatId f);

/// Fixed instruction paragraph for `f`, with one worked schema example in
/// that format between `"""` fences. The example is generated by
/// convert_output, so it always parses under `f`.
std::string format_instruction(FormatId f);

// ---------------------------------------------------------------------------
// Order shuffling
// ---------------------------------------------------------------------------

enum class Section {
  TaskInstruction,
  AvailableTools,
  FormatInstruction,
  FewShotExamples,
  Query,
  HistorySteps,
};

using SectionOrder = std::vector<Section>;

SectionOrder default_section_order();
std::string to_string(Section s);
std::optional<Section> section_from_string(std::string_view s);

struct ShuffleSpec {
  bool shuffle_tools = false;        // order of the tool list
  bool shuffle_tool_fields = false;  // key order inside tools and params
  bool shuffle_params = false;       // entry order of each parameters map
  bool shuffle_tool_calls = false;   // call list order, call fields and
                                     // top-level argument key order
  bool shuffle_sections = false;     // prompt section order
  std::uint64_t seed = 0;
};

struct ShuffleResult {
  unified::Trajectory trajectory;
  SectionOrder section_order;
};

/// Permutes the enabled collections with SplitMix64-driven Fisher-Yates.
/// Each aspect draws from its own sub-seed (mix_seed(seed, aspect index)),
/// so enabling one aspect never changes another's permutation. Element
/// multisets are unchanged at every level; same (t, spec) gives identical
/// output.
ShuffleResult shuffle(const unified::Trajectory& t, const ShuffleSpec& spec);

/// Per-trajectory seed derivation for parallel workers:
/// mix_seed(base_seed, fnv1a64(trajectory_id)).
std::uint64_t derive_trajectory_seed(std::uint64_t base_seed,
                                     std::string_view trajectory_id);

// ---------------------------------------------------------------------------
// Task-instruction rephrasing hook. Candidate texts come from the judge
// client's transport (recorded responses in mock mode); each candidate is
// re-verified through the client's accept check and dropped on reject.
// ---------------------------------------------------------------------------

std::vector<std::string> rephrase_hook(const std::string& task_instruction,
                                       judge::JudgeClient& client);

}  // namespace fcpipe::augment
