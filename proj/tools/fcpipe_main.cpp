// fcpipe: corpus engineering for function-calling trajectories.
// Exit codes: 0 success, 1 findings / partial results, 2 fatal.

#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"

#include "fcpipe/augment.hpp"
#include "fcpipe/common.hpp"
#include "fcpipe/fc_match.hpp"
#include "fcpipe/ingest.hpp"
#include "fcpipe/judge.hpp"
#include "fcpipe/mixture.hpp"
#include "fcpipe/pipeline.hpp"
#include "fcpipe/render.hpp"
#include "fcpipe/unified.hpp"
#include "fcpipe/verify.hpp"

namespace {

using namespace fcpipe;

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kFatal = 2;

Json load_json_file(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::pair<Json, std::size_t>> load_jsonl(const std::string& path) {
  std::vector<std::pair<Json, std::size_t>> out;
  std::size_t line_no = 0;
  for (const auto& [line, offset] : split_lines(read_file(path))) {
    ++line_no;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ConfigError(path + " line " + std::to_string(line_no) + ": malformed JSON");
    if (line_no == 1 && unified::is_corpus_header(j)) continue;
    out.emplace_back(std::move(j), line_no);
  }
  return out;
}

// --- ingest ---------------------------------------------------------------

int cmd_ingest(const std::string& input, const std::string& adapter_name,
               const std::string& output, const std::string& report_path, bool strict,
               std::size_t workers) {
  auto adapter = ingest::adapter_from_string(adapter_name);
  if (!adapter) throw ConfigError("unknown adapter: " + adapter_name);
  auto result = ingest::ingest_corpus(input, *adapter, strict, workers);
  if (!output.empty()) unified::write_corpus(output, result.trajectories);
  if (!report_path.empty())
    write_file(report_path, result.report.to_json().dump(2) + "\n");
  std::cout << result.report.to_json().dump() << "\n";
  return result.report.rejected == 0 ? kOk : kFindings;
}

// --- verify ---------------------------------------------------------------

int cmd_verify(const std::string& input, const std::string& policy_path, bool repair,
               const std::string& sandbox_path, const std::string& fail_on,
               const std::string& report_path, const std::string& repaired_output,
               std::size_t workers) {
  verify::VerifyPolicy policy;
  if (!policy_path.empty()) policy = verify::policy_from_json(load_json_file(policy_path));
  if (repair) policy.apply_repairs = true;
  verify::SandboxRegistry registry;
  if (!sandbox_path.empty()) {
    registry = verify::SandboxRegistry::from_json(load_json_file(sandbox_path));
    policy.run_sandbox = true;
    policy.sandbox = &registry;
  }
  auto corpus = unified::read_corpus(input);
  std::function<verify::DiagnosticReport(std::size_t)> check = [&](std::size_t i) {
    return verify::verify_trajectory(corpus[i], policy);
  };
  auto reports = parallel_map<verify::DiagnosticReport>(corpus.size(), workers, check);

  std::string lines;
  std::size_t with_errors = 0;
  std::size_t with_findings = 0;
  std::vector<unified::Trajectory> repaired_corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    lines += reports[i].to_json().dump() + "\n";
    if (!reports[i].clean) ++with_errors;
    if (!reports[i].findings.empty()) ++with_findings;
    if (!repaired_output.empty())
      repaired_corpus.push_back(reports[i].repaired ? *reports[i].repaired : corpus[i]);
  }
  if (!report_path.empty()) write_file(report_path, lines);
  if (!repaired_output.empty()) unified::write_corpus(repaired_output, repaired_corpus);

  Json summary = Json::object();
  summary["records"] = corpus.size();
  summary["with_errors"] = with_errors;
  summary["with_findings"] = with_findings;
  std::cout << summary.dump() << "\n";

  if (fail_on == "error") return with_errors == 0 ? kOk : kFindings;
  if (fail_on == "suspect") return with_findings == 0 ? kOk : kFindings;
  if (fail_on == "never") return kOk;
  throw ConfigError("unknown fail-on mode: " + fail_on);
}

// --- augment ----------------------------------------------------------------

int cmd_augment(const std::string& input, const std::string& output,
                std::uint64_t seed, const std::vector<std::string>& shuffle_aspects,
                const std::vector<std::string>& format_names, int variants) {
  augment::ShuffleSpec base;
  for (const auto& aspect : shuffle_aspects) {
    if (aspect == "tools") base.shuffle_tools = true;
    else if (aspect == "fields") base.shuffle_tool_fields = true;
    else if (aspect == "params") base.shuffle_params = true;
    else if (aspect == "calls") base.shuffle_tool_calls = true;
    else if (aspect == "sections") base.shuffle_sections = true;
    else if (aspect == "all") {
      base.shuffle_tools = base.shuffle_tool_fields = base.shuffle_params = true;
      base.shuffle_tool_calls = base.shuffle_sections = true;
    } else {
      throw ConfigError("unknown shuffle aspect: " + aspect);
    }
  }
  std::vector<augment::FormatId> formats;
  for (const auto& name : format_names) {
    auto f = augment::format_from_string(name);
    if (!f) throw ConfigError("unknown format: " + name);
    formats.push_back(*f);
  }
  if (formats.empty()) formats.push_back(augment::FormatId::JsonCompact);
  if (variants < 1) throw ConfigError("variants must be >= 1");

  auto corpus = unified::read_corpus(input);
  std::string lines;
  for (const auto& t : corpus) {
    std::uint64_t traj_seed = augment::derive_trajectory_seed(seed, t.unique_trajectory_id);
    for (int v = 0; v < variants; ++v) {
      std::uint64_t variant_seed = mix_seed(traj_seed, static_cast<std::uint64_t>(v));
      Rng rng(variant_seed);
      augment::FormatId format = formats[rng.bounded(formats.size())];
      augment::ShuffleSpec spec = base;
      spec.seed = rng.next();
      auto shuffled = augment::shuffle(t, spec);
      Json record = Json::object();
      record["source_id"] = t.unique_trajectory_id;
      record["variant"] = v;
      record["seed"] = variant_seed;
      record["format"] = augment::to_string(format);
      Json order = Json::array();
      for (auto s : shuffled.section_order) order.push_back(augment::to_string(s));
      record["section_order"] = std::move(order);
      record["trajectory"] = unified::trajectory_to_json(shuffled.trajectory);
      lines += record.dump() + "\n";
    }
  }
  write_file(output, lines);
  return kOk;
}

// --- render ------------------------------------------------------------------

int cmd_render(const std::string& input, const std::string& output,
               const std::string& style_name, const std::string& format_name,
               const std::string& plan_path, std::uint64_t seed, std::size_t workers) {
  render::RenderPlan plan;
  if (!plan_path.empty()) {
    plan = render::RenderPlan::from_json(load_json_file(plan_path));
  } else {
    auto style = render::style_from_string(style_name);
    if (!style) throw ConfigError("unknown style: " + style_name);
    auto format = augment::format_from_string(format_name);
    if (!format) throw ConfigError("unknown format: " + format_name);
    plan.styles = {*style};
    plan.formats = {*format};
  }
  plan.seed = seed;
  auto corpus = unified::read_corpus(input);
  auto rendered = render::render_corpus(corpus, plan, workers);
  std::string lines;
  for (const auto& ex : rendered) lines += ex.to_json().dump() + "\n";
  write_file(output, lines);
  std::cout << Json{{"rendered", rendered.size()}}.dump() << "\n";
  return kOk;
}

// --- mix ---------------------------------------------------------------------

int cmd_mix(const std::vector<std::string>& tagged_inputs, const std::string& output_dir,
            const std::string& plan_path, double dedup_threshold, int shingle_len,
            std::size_t num_workers, std::uint64_t base_seed,
            std::size_t interleave_block) {
  namespace fs = std::filesystem;
  std::map<mixture::SourceTag, std::vector<unified::Trajectory>> pools;
  std::vector<mixture::TaggedRecord> all;
  Json dedup_report = Json::array();
  for (const auto& spec : tagged_inputs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--input needs tag=path, got: " + spec);
    auto tag = mixture::source_tag_from_string(spec.substr(0, eq));
    if (!tag) throw ConfigError("unknown source tag in: " + spec);
    auto corpus = unified::read_corpus(spec.substr(eq + 1));
    if (dedup_threshold > 0.0) {
      auto deduped = mixture::dedup(corpus, dedup_threshold, shingle_len);
      for (const auto& drop : deduped.dropped) {
        Json e = Json::object();
        e["dropped_id"] = drop.dropped_id;
        e["kept_id"] = drop.kept_id;
        e["similarity"] = drop.similarity;
        dedup_report.push_back(std::move(e));
      }
      corpus = std::move(deduped.kept);
    }
    for (auto& t : corpus) {
      pools[*tag].push_back(t);
      all.push_back({std::move(t), *tag});
    }
  }

  std::vector<mixture::TaggedRecord> mixed;
  if (!plan_path.empty()) {
    auto plan = mixture::MixturePlan::from_json(load_json_file(plan_path));
    mixed = mixture::plan_mixture(pools, plan);
  } else {
    mixed = std::move(all);
  }

  mixture::ShardSpec shard_spec{num_workers, base_seed, interleave_block};
  auto shards = mixture::shard(mixed, shard_spec);
  fs::create_directories(output_dir);
  Json sizes = Json::array();
  for (std::size_t w = 0; w < shards.size(); ++w) {
    std::string body = unified::corpus_header_line() + "\n";
    for (const auto& rec : shards[w])
      body += unified::serialize_trajectory(rec.trajectory) + "\n";
    write_file((fs::path(output_dir) / mixture::shard_file_name(w)).string(), body);
    sizes.push_back(shards[w].size());
  }
  write_file((fs::path(output_dir) / "dedup_report.json").string(),
             dedup_report.dump(2) + "\n");
  Json summary = Json::object();
  summary["records"] = mixed.size();
  summary["shard_sizes"] = std::move(sizes);
  summary["dropped"] = dedup_report.size();
  std::cout << summary.dump() << "\n";
  return dedup_report.empty() ? kOk : kFindings;
}

// --- score -------------------------------------------------------------------

int cmd_score(const std::string& predictions_path, const std::string& expectations_path,
              const std::string& report_path, double float_tolerance,
              bool case_insensitive, bool no_coerce, bool unordered_arrays) {
  fc_match::MatchPolicy policy;
  policy.float_tolerance = float_tolerance;
  policy.string_case_sensitive = !case_insensitive;
  policy.coerce_types = !no_coerce;
  policy.unordered_arrays = unordered_arrays;

  struct Expectation {
    fc_match::Category category;
    std::vector<unified::ToolCall> calls;
    std::vector<unified::ToolSpec> specs;
  };
  std::map<std::string, Expectation> expectations;
  for (const auto& [j, line_no] : load_jsonl(expectations_path)) {
    Expectation e;
    auto cat = fc_match::category_from_string(j.at("category").get<std::string>());
    if (!cat)
      throw ConfigError(expectations_path + " line " + std::to_string(line_no) +
                        ": unknown category");
    e.category = *cat;
    // Reuse the unified parser for calls and tool specs via a scaffold record.
    Json scaffold = Json::object();
    scaffold["unique_trajectory_id"] = "scaffold";
    scaffold["task_instruction"] = "";
    scaffold["few_shot_examples"] = Json::array();
    scaffold["query"] = "scaffold";
    scaffold["tools"] = j.contains("tools") ? j.at("tools") : Json::array();
    Json step = Json::object();
    step["thought"] = "";
    step["tool_calls"] = j.contains("expected") ? j.at("expected") : Json::array();
    step["step_id"] = 1;
    step["next_observation"] = "";
    step["user_input"] = "";
    scaffold["steps"] = Json::array({step});
    auto t = unified::trajectory_from_json(scaffold);
    e.calls = t.steps[0].tool_calls;
    e.specs = t.tools;
    expectations[j.at("id").get<std::string>()] = std::move(e);
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> per_category;  // passed, total
  std::string reasons;
  std::size_t failed = 0;
  for (const auto& [j, line_no] : load_jsonl(predictions_path)) {
    auto id = j.at("id").get<std::string>();
    auto it = expectations.find(id);
    if (it == expectations.end())
      throw ConfigError(predictions_path + " line " + std::to_string(line_no) +
                        ": no expectation for id " + id);
    auto format = augment::format_from_string(j.at("format").get<std::string>());
    if (!format)
      throw ConfigError(predictions_path + " line " + std::to_string(line_no) +
                        ": unknown format");
    auto detail = fc_match::score_example_detail(j.at("text").get<std::string>(), *format,
                                                 it->second.calls, it->second.category,
                                                 it->second.specs, policy);
    auto& bucket = per_category[fc_match::to_string(it->second.category)];
    bucket.second += 1;
    if (detail.pass) bucket.first += 1;
    else ++failed;
    Json line = Json::object();
    line["id"] = id;
    line["category"] = fc_match::to_string(it->second.category);
    line["pass"] = detail.pass;
    line["reason"] = detail.reason;
    reasons += line.dump() + "\n";
  }
  if (!report_path.empty()) write_file(report_path, reasons);

  Json summary = Json::object();
  for (const auto& [cat, counts] : per_category) {
    Json entry = Json::object();
    entry["passed"] = counts.first;
    entry["total"] = counts.second;
    entry["accuracy"] =
        counts.second == 0 ? 0.0
                           : static_cast<double>(counts.first) /
                                 static_cast<double>(counts.second);
    summary[cat] = std::move(entry);
  }
  std::cout << summary.dump() << "\n";
  return failed == 0 ? kOk : kFindings;
}

// --- stats -------------------------------------------------------------------

int cmd_stats(const std::string& input, const std::string& output) {
  auto corpus = unified::read_corpus(input);
  std::map<std::size_t, std::size_t> tool_counts;
  std::map<std::size_t, std::size_t> step_counts;
  std::map<std::size_t, std::size_t> calls_per_step;
  double tool_sum = 0;
  for (const auto& t : corpus) {
    tool_counts[t.tools.size()] += 1;
    step_counts[t.steps.size()] += 1;
    tool_sum += static_cast<double>(t.tools.size());
    for (const auto& s : t.steps) calls_per_step[s.tool_calls.size()] += 1;
  }
  auto histogram = [](const std::map<std::size_t, std::size_t>& m) {
    Json h = Json::object();
    for (const auto& [k, v] : m) h[std::to_string(k)] = v;
    return h;
  };
  Json stats = Json::object();
  stats["records"] = corpus.size();
  stats["mean_tools_per_record"] =
      corpus.empty() ? 0.0 : tool_sum / static_cast<double>(corpus.size());
  stats["tool_count_histogram"] = histogram(tool_counts);
  stats["step_count_histogram"] = histogram(step_counts);
  stats["calls_per_step_histogram"] = histogram(calls_per_step);
  auto text = stats.dump(2) + "\n";
  if (!output.empty()) write_file(output, text);
  std::cout << text;
  return kOk;
}

// --- pipeline -----------------------------------------------------------------

int cmd_pipeline(const std::string& config_path, std::size_t workers) {
  auto config = load_json_file(config_path);
  auto result = pipeline::run_pipeline(config, workers);
  std::cout << result.manifest.at("counts").dump() << "\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus engineering for function-calling trajectories"};
  app.require_subcommand(1);

  // ingest
  std::string in_input, in_adapter = "unified", in_output, in_report;
  bool in_strict = false;
  std::size_t workers = 1;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse source records into the unified corpus format");
  ingest_cmd->add_option("--input", in_input)->required();
  ingest_cmd->add_option("--adapter", in_adapter)
      ->check(CLI::IsMember({"unified", "flat_call_pairs", "chat_transcript"}));
  ingest_cmd->add_option("--output", in_output);
  ingest_cmd->add_option("--report", in_report);
  ingest_cmd->add_flag("--strict", in_strict);
  ingest_cmd->add_option("--workers", workers);

  // verify
  std::string v_input, v_policy, v_sandbox, v_fail_on = "error", v_report, v_repaired;
  bool v_repair = false;
  auto* verify_cmd = app.add_subcommand("verify", "Run the quality checks over a corpus");
  verify_cmd->add_option("--input", v_input)->required();
  verify_cmd->add_option("--policy", v_policy);
  verify_cmd->add_flag("--repair", v_repair);
  verify_cmd->add_option("--sandbox", v_sandbox);
  verify_cmd->add_option("--fail-on", v_fail_on)
      ->check(CLI::IsMember({"error", "suspect", "never"}));
  verify_cmd->add_option("--report", v_report);
  verify_cmd->add_option("--repaired-output", v_repaired);
  verify_cmd->add_option("--workers", workers);

  // augment
  std::string a_input, a_output;
  std::uint64_t a_seed = 0;
  std::vector<std::string> a_shuffle, a_formats;
  int a_variants = 1;
  auto* augment_cmd = app.add_subcommand("augment", "Emit shuffled trajectory variants");
  augment_cmd->add_option("--input", a_input)->required();
  augment_cmd->add_option("--output", a_output)->required();
  augment_cmd->add_option("--seed", a_seed);
  augment_cmd->add_option("--shuffle", a_shuffle)->delimiter(',');
  augment_cmd->add_option("--formats", a_formats)->delimiter(',');
  augment_cmd->add_option("--variants-per-input", a_variants);

  // render
  std::string r_input, r_output, r_style = "bracket_caps", r_format = "json_compact", r_plan;
  std::uint64_t r_seed = 0;
  auto* render_cmd = app.add_subcommand("render", "Render prompt/target training pairs");
  render_cmd->add_option("--input", r_input)->required();
  render_cmd->add_option("--output", r_output)->required();
  render_cmd->add_option("--style", r_style);
  render_cmd->add_option("--format", r_format);
  render_cmd->add_option("--plan", r_plan);
  render_cmd->add_option("--seed", r_seed);
  render_cmd->add_option("--workers", workers);

  // mix
  std::vector<std::string> m_inputs;
  std::string m_output_dir, m_plan;
  double m_dedup_threshold = 0.0;
  int m_shingle_len = 3;
  std::size_t m_workers = 1, m_interleave = 1;
  std::uint64_t m_base_seed = 0;
  auto* mix_cmd = app.add_subcommand("mix", "Dedup, mix and shard tagged corpora");
  mix_cmd->add_option("--input", m_inputs, "tag=path, repeatable")->required();
  mix_cmd->add_option("--output-dir", m_output_dir)->required();
  mix_cmd->add_option("--plan", m_plan);
  mix_cmd->add_option("--dedup-threshold", m_dedup_threshold);
  mix_cmd->add_option("--shingle-len", m_shingle_len);
  mix_cmd->add_option("--workers", m_workers);
  mix_cmd->add_option("--base-seed", m_base_seed);
  mix_cmd->add_option("--interleave-block", m_interleave);

  // score
  std::string s_predictions, s_expectations, s_report;
  double s_tolerance = 1e-9;
  bool s_case_insensitive = false, s_no_coerce = false, s_unordered = false;
  auto* score_cmd = app.add_subcommand("score", "Score predictions against expected calls");
  score_cmd->add_option("--predictions", s_predictions)->required();
  score_cmd->add_option("--expectations", s_expectations)->required();
  score_cmd->add_option("--report", s_report);
  score_cmd->add_option("--float-tolerance", s_tolerance);
  score_cmd->add_flag("--case-insensitive", s_case_insensitive);
  score_cmd->add_flag("--no-coerce", s_no_coerce);
  score_cmd->add_flag("--unordered-arrays", s_unordered);

  // stats
  std::string st_input, st_output;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("--input", st_input)->required();
  stats_cmd->add_option("--output", st_output);

  // pipeline
  std::string p_config;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the full configured pipeline");
  pipeline_cmd->add_option("--config", p_config)->required();
  pipeline_cmd->add_option("--workers", workers);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kFatal;
  }

  try {
    if (app.got_subcommand(ingest_cmd))
      return cmd_ingest(in_input, in_adapter, in_output, in_report, in_strict, workers);
    if (app.got_subcommand(verify_cmd))
      return cmd_verify(v_input, v_policy, v_repair, v_sandbox, v_fail_on, v_report,
                        v_repaired, workers);
    if (app.got_subcommand(augment_cmd))
      return cmd_augment(a_input, a_output, a_seed, a_shuffle, a_formats, a_variants);
    if (app.got_subcommand(render_cmd))
      return cmd_render(r_input, r_output, r_style, r_format, r_plan, r_seed, workers);
    if (app.got_subcommand(mix_cmd))
      return cmd_mix(m_inputs, m_output_dir, m_plan, m_dedup_threshold, m_shingle_len,
                     m_workers, m_base_seed, m_interleave);
    if (app.got_subcommand(score_cmd))
      return cmd_score(s_predictions, s_expectations, s_report, s_tolerance,
                       s_case_insensitive, s_no_coerce, s_unordered);
    if (app.got_subcommand(stats_cmd)) return cmd_stats(st_input, st_output);
    if (app.got_subcommand(pipeline_cmd)) return cmd_pipeline(p_config, workers);
  } catch (const std::exception& e) {
    std::cerr << "fcpipe: " << e.what() << "\n";
    return kFatal;
  }
  std::cerr << "fcpipe: no subcommand\n";
  return kFatal;
}
