#include "fcpipe/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

namespace fcpipe::pipeline {

namespace fs = std::filesystem;

namespace {

using mixture::SourceTag;
using mixture::TaggedRecord;
using unified::Trajectory;

struct InputSpec {
  std::string path;
  ingest::SourceAdapterId adapter = ingest::SourceAdapterId::Unified;
  SourceTag tag = SourceTag::AgentCleaned;
};

std::vector<InputSpec> parse_inputs(const Json& config) {
  if (!config.contains("inputs") || !config.at("inputs").is_array() ||
      config.at("inputs").empty())
    throw ConfigError("config needs a non-empty inputs array");
  std::vector<InputSpec> out;
  for (const auto& entry : config.at("inputs")) {
    InputSpec spec;
    spec.path = entry.at("path").get<std::string>();
    if (entry.contains("adapter")) {
      auto a = ingest::adapter_from_string(entry.at("adapter").get<std::string>());
      if (!a) throw ConfigError("unknown adapter: " + entry.at("adapter").dump());
      spec.adapter = *a;
    }
    if (entry.contains("tag")) {
      auto t = mixture::source_tag_from_string(entry.at("tag").get<std::string>());
      if (!t) throw ConfigError("unknown source tag: " + entry.at("tag").dump());
      spec.tag = *t;
    }
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace

std::string digest_bytes(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

std::string digest_file(const std::string& path) { return digest_bytes(read_file(path)); }

PipelineResult run_pipeline(const Json& config, std::size_t workers) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (!config.contains("output_dir")) throw ConfigError("config needs output_dir");
  const std::string output_dir = config.at("output_dir").get<std::string>();
  fs::create_directories(output_dir);
  auto out_path = [&](const std::string& name) {
    return (fs::path(output_dir) / name).string();
  };

  PipelineResult result;
  std::map<std::string, std::string> output_digests;  // relative name -> digest
  auto emit = [&](const std::string& name, const std::string& bytes) {
    write_file(out_path(name), bytes);
    output_digests[name] = digest_bytes(bytes);
  };

  // --- ingest ---------------------------------------------------------------
  auto inputs = parse_inputs(config);
  std::vector<TaggedRecord> records;
  Json ingest_reports = Json::array();
  for (const auto& input : inputs) {
    auto ingested = ingest::ingest_corpus(input.path, input.adapter, false, workers);
    for (auto& t : ingested.trajectories)
      records.push_back({std::move(t), input.tag});
    result.counts.rejected += ingested.report.rejected;
    Json entry = Json::object();
    entry["path"] = input.path;
    entry["tag"] = mixture::to_string(input.tag);
    entry["report"] = ingested.report.to_json();
    ingest_reports.push_back(std::move(entry));
  }
  result.counts.ingested = records.size();
  emit("ingest_report.json", ingest_reports.dump(2) + "\n");

  // --- verify ----------------------------------------------------------------
  if (config.contains("verify")) {
    Json policy_json = config.at("verify");
    bool drop_unclean = true;
    if (policy_json.contains("drop_unclean")) {
      drop_unclean = policy_json.at("drop_unclean").get<bool>();
      policy_json.erase("drop_unclean");
    }
    verify::VerifyPolicy policy = verify::policy_from_json(policy_json);
    std::function<verify::DiagnosticReport(std::size_t)> check = [&](std::size_t i) {
      return verify::verify_trajectory(records[i].trajectory, policy);
    };
    auto reports =
        parallel_map<verify::DiagnosticReport>(records.size(), workers, check);
    std::string report_lines;
    std::vector<TaggedRecord> kept;
    for (std::size_t i = 0; i < records.size(); ++i) {
      report_lines += reports[i].to_json().dump() + "\n";
      if (reports[i].repaired) records[i].trajectory = *reports[i].repaired;
      // A record survives when it is clean, or when every error it had was
      // repaired (the repaired call re-passes the type check by contract).
      bool survives = reports[i].clean;
      if (!survives && reports[i].repaired)
        survives = std::none_of(reports[i].findings.begin(), reports[i].findings.end(),
                                [](const verify::Finding& f) {
                                  return f.severity == verify::Severity::Error &&
                                         !f.repair;
                                });
      if (drop_unclean && !survives) {
        ++result.counts.dropped_unclean;
        continue;
      }
      kept.push_back(std::move(records[i]));
    }
    records = std::move(kept);
    emit("verify_report.jsonl", report_lines);
  }
  result.counts.verified = records.size();

  // --- dedup ------------------------------------------------------------------
  if (config.contains("dedup")) {
    const Json& d = config.at("dedup");
    double threshold = d.contains("threshold") ? d.at("threshold").get<double>() : 0.9;
    int shingle_len = d.contains("shingle_len") ? d.at("shingle_len").get<int>() : 3;
    std::vector<Trajectory> plain;
    plain.reserve(records.size());
    for (const auto& r : records) plain.push_back(r.trajectory);
    auto deduped = mixture::dedup(plain, threshold, shingle_len);
    std::set<std::string> kept_ids;
    for (const auto& t : deduped.kept) kept_ids.insert(t.unique_trajectory_id);
    std::vector<TaggedRecord> kept;
    for (auto& r : records)
      if (kept_ids.count(r.trajectory.unique_trajectory_id))
        kept.push_back(std::move(r));
    result.counts.deduped_away = records.size() - kept.size();
    records = std::move(kept);
    Json drop_report = Json::array();
    for (const auto& drop : deduped.dropped) {
      Json e = Json::object();
      e["dropped_id"] = drop.dropped_id;
      e["kept_id"] = drop.kept_id;
      e["similarity"] = drop.similarity;
      drop_report.push_back(std::move(e));
    }
    emit("dedup_report.json", drop_report.dump(2) + "\n");
  }

  // --- mixture -----------------------------------------------------------------
  if (config.contains("mixture")) {
    auto plan = mixture::MixturePlan::from_json(config.at("mixture"));
    std::map<SourceTag, std::vector<Trajectory>> pools;
    for (auto& r : records) pools[r.tag].push_back(std::move(r.trajectory));
    records = mixture::plan_mixture(pools, plan);
  }
  result.counts.mixed = records.size();

  // --- render --------------------------------------------------------------------
  if (config.contains("render")) {
    auto plan = render::RenderPlan::from_json(config.at("render"));
    std::vector<Trajectory> plain;
    plain.reserve(records.size());
    for (const auto& r : records) plain.push_back(r.trajectory);
    auto rendered = render::render_corpus(plain, plan, workers);
    std::string lines;
    for (const auto& ex : rendered) lines += ex.to_json().dump() + "\n";
    result.counts.rendered = rendered.size();
    emit("rendered.jsonl", lines);
  }

  // --- shard -----------------------------------------------------------------------
  mixture::ShardSpec shard_spec;
  if (config.contains("shard")) {
    const Json& s = config.at("shard");
    for (const auto& [key, value] : s.items()) {
      if (key == "num_workers") shard_spec.num_workers = value.get<std::size_t>();
      else if (key == "base_seed") shard_spec.base_seed = value.get<std::uint64_t>();
      else if (key == "interleave_block")
        shard_spec.interleave_block = value.get<std::size_t>();
      else throw ConfigError("unknown shard key: " + key);
    }
  }
  auto shards = mixture::shard(records, shard_spec);
  for (std::size_t w = 0; w < shards.size(); ++w) {
    std::string body = unified::corpus_header_line() + "\n";
    for (const auto& rec : shards[w])
      body += unified::serialize_trajectory(rec.trajectory) + "\n";
    emit(mixture::shard_file_name(w), body);
    result.counts.shard_sizes.push_back(shards[w].size());
  }

  // --- manifest ----------------------------------------------------------------------
  Json manifest = Json::object();
  manifest["tool_version"] = kToolVersion;
  manifest["config_digest"] = digest_bytes(config.dump());
  Json input_digests = Json::array();
  for (const auto& input : inputs) {
    Json e = Json::object();
    e["path"] = input.path;
    e["digest"] = digest_file(input.path);
    input_digests.push_back(std::move(e));
  }
  manifest["inputs"] = std::move(input_digests);
  Json outputs = Json::object();
  for (const auto& [name, digest] : output_digests) outputs[name] = digest;
  manifest["outputs"] = std::move(outputs);
  Json counts = Json::object();
  counts["ingested"] = result.counts.ingested;
  counts["rejected"] = result.counts.rejected;
  counts["verified"] = result.counts.verified;
  counts["dropped_unclean"] = result.counts.dropped_unclean;
  counts["deduped_away"] = result.counts.deduped_away;
  counts["mixed"] = result.counts.mixed;
  counts["rendered"] = result.counts.rendered;
  counts["shard_sizes"] = result.counts.shard_sizes;
  manifest["counts"] = std::move(counts);
  write_file(out_path("manifest.json"), manifest.dump(2) + "\n");

  result.manifest = std::move(manifest);
  bool partial = result.counts.rejected > 0 || result.counts.dropped_unclean > 0 ||
                 result.counts.deduped_away > 0;
  result.exit_code = partial ? 1 : 0;
  return result;
}

}  // namespace fcpipe::pipeline
