#include "fcpipe/augment.hpp"

#include "fcpipe/common.hpp"

namespace fcpipe::augment {

namespace {

using unified::Trajectory;

// Sub-seed indices; each shuffle aspect draws from its own stream so flags
// compose without disturbing each other.
enum Aspect : std::uint64_t {
  kTools = 0,
  kFields = 1,
  kParams = 2,
  kCalls = 3,
  kSections = 4,
};

std::vector<std::string> permuted_keys(const std::vector<std::string>& declared, Rng& rng) {
  auto keys = declared;
  rng.shuffle(keys);
  // Identity permutations collapse to the empty (declared) marker, matching
  // what a parse of the serialized form would capture.
  if (keys == declared) keys.clear();
  return keys;
}

Json permute_object(const Json& obj, Rng& rng) {
  std::vector<std::string> keys;
  for (const auto& item : obj.items()) keys.push_back(item.key());
  auto perm = rng.permutation(keys.size());
  Json out = Json::object();
  for (std::size_t i : perm) out[keys[i]] = obj.at(keys[i]);
  return out;
}

void shuffle_tool_list(Trajectory& t, Rng& rng) {
  rng.shuffle(t.tools);
  for (auto& ex : t.few_shot_examples) shuffle_tool_list(ex, rng);
}

void shuffle_field_orders(Trajectory& t, Rng& rng) {
  for (auto& tool : t.tools) {
    tool.key_order = permuted_keys(unified::declared_tool_keys(), rng);
    for (auto& p : tool.parameters)
      p.key_order = permuted_keys(unified::declared_param_keys(), rng);
  }
  for (auto& ex : t.few_shot_examples) shuffle_field_orders(ex, rng);
}

void shuffle_param_lists(Trajectory& t, Rng& rng) {
  for (auto& tool : t.tools) rng.shuffle(tool.parameters);
  for (auto& ex : t.few_shot_examples) shuffle_param_lists(ex, rng);
}

void shuffle_call_lists(Trajectory& t, Rng& rng) {
  for (auto& step : t.steps) {
    rng.shuffle(step.tool_calls);
    for (auto& call : step.tool_calls) {
      call.key_order = permuted_keys(unified::declared_call_keys(), rng);
      call.arguments = permute_object(call.arguments, rng);
    }
  }
  for (auto& ex : t.few_shot_examples) shuffle_call_lists(ex, rng);
}

}  // namespace

SectionOrder default_section_order() {
  return {Section::TaskInstruction, Section::AvailableTools,
          Section::FormatInstruction, Section::FewShotExamples,
          Section::Query, Section::HistorySteps};
}

std::string to_string(Section s) {
  switch (s) {
    case Section::TaskInstruction: return "task_instruction";
    case Section::AvailableTools: return "available_tools";
    case Section::FormatInstruction: return "format_instruction";
    case Section::FewShotExamples: return "few_shot_examples";
    case Section::Query: return "query";
    case Section::HistorySteps: return "history_steps";
  }
  throw ConfigError("unknown section");
}

std::optional<Section> section_from_string(std::string_view s) {
  for (Section sec : default_section_order())
    if (to_string(sec) == s) return sec;
  return std::nullopt;
}

ShuffleResult shuffle(const unified::Trajectory& t, const ShuffleSpec& spec) {
  ShuffleResult r;
  r.trajectory = t;
  r.section_order = default_section_order();
  if (spec.shuffle_tools) {
    Rng rng(mix_seed(spec.seed, kTools));
    shuffle_tool_list(r.trajectory, rng);
  }
  if (spec.shuffle_tool_fields) {
    Rng rng(mix_seed(spec.seed, kFields));
    shuffle_field_orders(r.trajectory, rng);
  }
  if (spec.shuffle_params) {
    Rng rng(mix_seed(spec.seed, kParams));
    shuffle_param_lists(r.trajectory, rng);
  }
  if (spec.shuffle_tool_calls) {
    Rng rng(mix_seed(spec.seed, kCalls));
    shuffle_call_lists(r.trajectory, rng);
  }
  if (spec.shuffle_sections) {
    Rng rng(mix_seed(spec.seed, kSections));
    rng.shuffle(r.section_order);
  }
  return r;
}

std::uint64_t derive_trajectory_seed(std::uint64_t base_seed,
                                     std::string_view trajectory_id) {
  return mix_seed(base_seed, fnv1a64(trajectory_id));
}

}  // namespace fcpipe::augment
