#include "fcpipe/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <set>
#include <unordered_map>

#include "fcpipe/common.hpp"

namespace fcpipe::mixture {

namespace {

using unified::Trajectory;

std::set<std::string> shingle_set(const std::vector<std::string>& shingles) {
  return {shingles.begin(), shingles.end()};
}

double jaccard_sets(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& s : a) inter += b.count(s);
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::string to_string(SourceTag t) {
  switch (t) {
    case SourceTag::AgentCleaned: return "agent_cleaned";
    case SourceTag::SyntheticFc: return "synthetic_fc";
    case SourceTag::GeneralInstruct: return "general_instruct";
  }
  throw ConfigError("unknown source tag");
}

std::optional<SourceTag> source_tag_from_string(std::string_view s) {
  for (SourceTag t : all_source_tags())
    if (to_string(t) == s) return t;
  return std::nullopt;
}

const std::vector<SourceTag>& all_source_tags() {
  static const std::vector<SourceTag> tags = {
      SourceTag::AgentCleaned, SourceTag::SyntheticFc, SourceTag::GeneralInstruct};
  return tags;
}

std::vector<std::string> query_shingles(const std::string& query, int shingle_len) {
  if (shingle_len < 1) throw ConfigError("shingle_len must be >= 1");
  auto normalized = normalize_text(query);
  auto words = split_words(normalized);
  std::vector<std::string> out;
  if (words.size() < static_cast<std::size_t>(shingle_len)) {
    out.push_back(normalized);
    return out;
  }
  for (std::size_t i = 0; i + shingle_len <= words.size(); ++i) {
    std::string shingle = words[i];
    for (std::size_t k = 1; k < static_cast<std::size_t>(shingle_len); ++k)
      shingle += " " + words[i + k];
    out.push_back(std::move(shingle));
  }
  return out;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return jaccard_sets(shingle_set(a), shingle_set(b));
}

DedupResult dedup(const std::vector<Trajectory>& corpus, double threshold, int shingle_len) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ConfigError("dedup threshold must be in (0, 1]");
  DedupResult result;
  std::vector<std::set<std::string>> kept_shingles;
  std::unordered_map<std::string, std::vector<std::size_t>> index;  // shingle -> kept idx
  for (const auto& t : corpus) {
    auto shingles = shingle_set(query_shingles(t.query, shingle_len));
    std::set<std::size_t> candidates;
    for (const auto& s : shingles) {
      auto it = index.find(s);
      if (it == index.end()) continue;
      candidates.insert(it->second.begin(), it->second.end());
    }
    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t k : candidates) {
      double sim = jaccard_sets(shingles, kept_shingles[k]);
      if (sim > best) {
        best = sim;
        best_idx = k;
      }
    }
    if (best >= threshold) {
      result.dropped.push_back(
          {t.unique_trajectory_id, result.kept[best_idx].unique_trajectory_id, best});
      continue;
    }
    std::size_t idx = result.kept.size();
    result.kept.push_back(t);
    for (const auto& s : shingles) index[s].push_back(idx);
    kept_shingles.push_back(std::move(shingles));
  }
  return result;
}

MixturePlan MixturePlan::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("mixture plan must be an object");
  MixturePlan plan;
  for (const auto& [key, value] : j.items()) {
    if (key == "targets") {
      for (const auto& [tag_name, fraction] : value.items()) {
        auto tag = source_tag_from_string(tag_name);
        if (!tag) throw ConfigError("unknown source tag: " + tag_name);
        plan.targets[*tag] = fraction.get<double>();
      }
    } else if (key == "total") {
      plan.total = value.get<std::size_t>();
    } else if (key == "seed") {
      plan.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown mixture plan key: " + key);
    }
  }
  return plan;
}

std::map<SourceTag, std::size_t> mixture_counts(const MixturePlan& plan) {
  if (plan.targets.empty()) throw ConfigError("mixture plan has no targets");
  double sum = 0.0;
  for (const auto& [tag, fraction] : plan.targets) {
    if (fraction < 0.0 || fraction > 1.0)
      throw ConfigError("fraction for " + to_string(tag) + " outside [0, 1]");
    sum += fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mixture fractions must sum to 1");

  std::map<SourceTag, std::size_t> counts;
  long long assigned = 0;
  SourceTag largest = plan.targets.begin()->first;
  for (const auto& [tag, fraction] : plan.targets) {
    auto c = std::llround(static_cast<double>(plan.total) * fraction);
    counts[tag] = static_cast<std::size_t>(std::max(0LL, c));
    assigned += c;
    if (fraction > plan.targets.at(largest)) largest = tag;
  }
  long long residue = static_cast<long long>(plan.total) - assigned;
  counts[largest] = static_cast<std::size_t>(
      std::max(0LL, static_cast<long long>(counts[largest]) + residue));
  return counts;
}

std::vector<TaggedRecord> plan_mixture(
    const std::map<SourceTag, std::vector<Trajectory>>& pools, const MixturePlan& plan) {
  auto counts = mixture_counts(plan);
  std::vector<TaggedRecord> out;
  for (SourceTag tag : all_source_tags()) {
    auto want_it = counts.find(tag);
    if (want_it == counts.end() || want_it->second == 0) continue;
    std::size_t want = want_it->second;
    auto pool_it = pools.find(tag);
    std::size_t have = pool_it == pools.end() ? 0 : pool_it->second.size();
    if (have < want)
      throw ConfigError("pool " + to_string(tag) + " has " + std::to_string(have) +
                        " records, plan needs " + std::to_string(want));
    std::vector<std::size_t> order(have);
    for (std::size_t i = 0; i < have; ++i) order[i] = i;
    Rng rng(mix_seed(plan.seed, fnv1a64(to_string(tag))));
    rng.shuffle(order);
    for (std::size_t i = 0; i < want; ++i)
      out.push_back({pool_it->second[order[i]], tag});
  }
  return out;
}

std::vector<std::vector<TaggedRecord>> shard(const std::vector<TaggedRecord>& corpus,
                                             const ShardSpec& spec) {
  if (spec.num_workers < 1) throw ConfigError("num_workers must be >= 1");
  if (spec.interleave_block < 1) throw ConfigError("interleave_block must be >= 1");
  std::vector<std::vector<TaggedRecord>> shards(spec.num_workers);
  for (const auto& rec : corpus) {
    std::size_t worker = static_cast<std::size_t>(
        fnv1a64(rec.trajectory.unique_trajectory_id) % spec.num_workers);
    shards[worker].push_back(rec);
  }
  for (std::size_t w = 0; w < spec.num_workers; ++w) {
    auto& records = shards[w];
    Rng rng(mix_seed(spec.base_seed, static_cast<std::uint64_t>(w)));
    rng.shuffle(records);
    // Round-robin the tags in blocks, preserving the shuffled order inside
    // each tag's stream.
    std::map<SourceTag, std::deque<TaggedRecord>> queues;
    for (auto& rec : records) queues[rec.tag].push_back(std::move(rec));
    std::vector<TaggedRecord> interleaved;
    interleaved.reserve(records.size());
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (SourceTag tag : all_source_tags()) {
        auto it = queues.find(tag);
        if (it == queues.end()) continue;
        auto& q = it->second;
        for (std::size_t k = 0; k < spec.interleave_block && !q.empty(); ++k) {
          interleaved.push_back(std::move(q.front()));
          q.pop_front();
          progressed = true;
        }
      }
    }
    records = std::move(interleaved);
  }
  return shards;
}

std::string shard_file_name(std::size_t worker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard-%05zu.jsonl", worker);
  return buf;
}

}  // namespace fcpipe::mixture
