#include "fcpipe/render.hpp"

#include "fcpipe/common.hpp"

namespace fcpipe::render {

namespace {

using augment::Section;

std::string section_heading(Section s) {
  switch (s) {
    case Section::TaskInstruction: return "TASK INSTRUCTION";
    case Section::AvailableTools: return "AVAILABLE TOOLS";
    case Section::FormatInstruction: return "FORMAT INSTRUCTION";
    case Section::FewShotExamples: return "FEW SHOT EXAMPLES";
    case Section::Query: return "QUERY";
    case Section::HistorySteps: return "HISTORY STEPS";
  }
  throw ConfigError("unknown section");
}

std::string section_payload(const unified::Trajectory& t, Section s, int step_index,
                            augment::FormatId f) {
  switch (s) {
    case Section::TaskInstruction:
      return t.task_instruction;
    case Section::AvailableTools: {
      Json arr = Json::array();
      for (const auto& tool : t.tools) arr.push_back(unified::tool_to_json(tool));
      return arr.dump(4);
    }
    case Section::FormatInstruction:
      return augment::format_instruction(f);
    case Section::FewShotExamples: {
      if (t.few_shot_examples.empty()) return "";
      Json arr = Json::array();
      for (const auto& ex : t.few_shot_examples) {
        Json j = unified::trajectory_to_json(ex);
        j.erase("unique_trajectory_id");
        arr.push_back(std::move(j));
      }
      return arr.dump(4);
    }
    case Section::Query:
      return t.query;
    case Section::HistorySteps: {
      if (step_index <= 1) return "";
      Json arr = Json::array();
      for (int i = 0; i + 1 < step_index; ++i)
        arr.push_back(unified::step_to_json(t.steps[static_cast<std::size_t>(i)]));
      return arr.dump(4);
    }
  }
  throw ConfigError("unknown section");
}

std::string wrap_section(ConcatStyle style, Section s, const std::string& payload) {
  const std::string heading = section_heading(s);
  switch (style) {
    case ConcatStyle::BracketCaps:
      return "[BEGIN OF " + heading + "]\n" + payload + "\n[END OF " + heading + "]";
    case ConcatStyle::XmlTags: {
      const std::string tag = augment::to_string(s);
      return "<" + tag + ">\n" + payload + "\n</" + tag + ">";
    }
    case ConcatStyle::PlainText:
      return heading + ":\n" + payload;
  }
  throw ConfigError("unknown style");
}

}  // namespace

std::string to_string(ConcatStyle s) {
  switch (s) {
    case ConcatStyle::BracketCaps: return "bracket_caps";
    case ConcatStyle::XmlTags: return "xml_tags";
    case ConcatStyle::PlainText: return "plain_text";
  }
  throw ConfigError("unknown style");
}

std::optional<ConcatStyle> style_from_string(std::string_view s) {
  for (auto st : {ConcatStyle::BracketCaps, ConcatStyle::XmlTags, ConcatStyle::PlainText})
    if (to_string(st) == s) return st;
  return std::nullopt;
}

Json RenderedExample::to_json() const {
  Json j = Json::object();
  j["prompt"] = prompt;
  j["target"] = target;
  j["trajectory_id"] = trajectory_id;
  j["step_index"] = step_index;
  j["style"] = render::to_string(style);
  j["format"] = augment::to_string(format);
  j["seed"] = seed;
  Json order = Json::array();
  for (auto s : section_order) order.push_back(augment::to_string(s));
  j["section_order"] = std::move(order);
  return j;
}

RenderedExample render_example(const unified::Trajectory& t, int step_index,
                               ConcatStyle style, augment::FormatId f,
                               const augment::SectionOrder& order) {
  if (step_index < 1 || static_cast<std::size_t>(step_index) > t.steps.size())
    throw ConfigError("step_index " + std::to_string(step_index) + " out of range for " +
                      std::to_string(t.steps.size()) + " steps");
  RenderedExample ex;
  ex.trajectory_id = t.unique_trajectory_id;
  ex.step_index = step_index;
  ex.style = style;
  ex.format = f;
  ex.section_order = order;

  std::string prompt;
  for (Section s : order) {
    std::string payload = section_payload(t, s, step_index, f);
    if (payload.empty()) continue;  // empty sections are omitted entirely
    if (!prompt.empty()) prompt += "\n";
    prompt += wrap_section(style, s, payload) + "\n";
  }
  ex.prompt = std::move(prompt);

  const auto& step = t.steps[static_cast<std::size_t>(step_index) - 1];
  augment::StepOutput out;
  out.thought = step.thought;
  out.tool_calls = step.tool_calls;
  for (auto& call : out.tool_calls) call.key_order.clear();
  ex.target = augment::convert_output(out, f);
  return ex;
}

RenderPlan RenderPlan::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("render plan must be an object");
  RenderPlan plan;
  for (const auto& [key, value] : j.items()) {
    if (key == "styles") {
      plan.styles.clear();
      for (const auto& s : value) {
        auto st = style_from_string(s.get<std::string>());
        if (!st) throw ConfigError("unknown style: " + s.get<std::string>());
        plan.styles.push_back(*st);
      }
    } else if (key == "formats") {
      plan.formats.clear();
      for (const auto& s : value) {
        auto f = augment::format_from_string(s.get<std::string>());
        if (!f) throw ConfigError("unknown format: " + s.get<std::string>());
        plan.formats.push_back(*f);
      }
    } else if (key == "seed") {
      plan.seed = value.get<std::uint64_t>();
    } else if (key == "variants_per_step") {
      plan.variants_per_step = value.get<int>();
    } else if (key == "last_step_only") {
      plan.last_step_only = value.get<bool>();
    } else if (key == "shuffle") {
      for (const auto& [flag, on] : value.items()) {
        if (flag == "tools") plan.shuffle.shuffle_tools = on.get<bool>();
        else if (flag == "tool_fields") plan.shuffle.shuffle_tool_fields = on.get<bool>();
        else if (flag == "params") plan.shuffle.shuffle_params = on.get<bool>();
        else if (flag == "tool_calls") plan.shuffle.shuffle_tool_calls = on.get<bool>();
        else if (flag == "sections") plan.shuffle.shuffle_sections = on.get<bool>();
        else throw ConfigError("unknown shuffle flag: " + flag);
      }
    } else {
      throw ConfigError("unknown render plan key: " + key);
    }
  }
  if (plan.styles.empty() || plan.formats.empty() || plan.variants_per_step < 1)
    throw ConfigError("render plan needs at least one style, format and variant");
  return plan;
}

std::vector<RenderedExample> render_corpus(const std::vector<unified::Trajectory>& corpus,
                                           const RenderPlan& plan, std::size_t workers) {
  std::function<std::vector<RenderedExample>(std::size_t)> per_trajectory =
      [&](std::size_t index) {
        const auto& t = corpus[index];
        std::vector<RenderedExample> out;
        std::uint64_t traj_seed =
            augment::derive_trajectory_seed(plan.seed, t.unique_trajectory_id);
        int first_step = plan.last_step_only ? static_cast<int>(t.steps.size()) : 1;
        for (int step = first_step; step <= static_cast<int>(t.steps.size()); ++step) {
          for (int v = 0; v < plan.variants_per_step; ++v) {
            std::uint64_t ex_seed = mix_seed(
                mix_seed(traj_seed, static_cast<std::uint64_t>(step)),
                static_cast<std::uint64_t>(v));
            Rng rng(ex_seed);
            ConcatStyle style = plan.styles[rng.bounded(plan.styles.size())];
            augment::FormatId f = plan.formats[rng.bounded(plan.formats.size())];
            augment::ShuffleSpec spec = plan.shuffle;
            spec.seed = rng.next();
            auto shuffled = augment::shuffle(t, spec);
            RenderedExample ex =
                render_example(shuffled.trajectory, step, style, f, shuffled.section_order);
            ex.seed = ex_seed;
            out.push_back(std::move(ex));
          }
        }
        return out;
      };
  auto chunks = parallel_map<std::vector<RenderedExample>>(corpus.size(), workers,
                                                           per_trajectory);
  std::vector<RenderedExample> merged;
  for (auto& chunk : chunks)
    for (auto& ex : chunk) merged.push_back(std::move(ex));
  return merged;
}

}  // namespace fcpipe::render
