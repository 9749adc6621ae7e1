#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcpipe/unified.hpp"

namespace fcpipe::mixture {

// ---------------------------------------------------------------------------
// Dedup, ratio-targeted mixing and deterministic sharding. The stable hash
// (FNV-1a 64) and the seed mixer are part of the file-format contract;
// changing either breaks shard reproducibility.
// ---------------------------------------------------------------------------

enum class SourceTag { AgentCleaned, SyntheticFc, GeneralInstruct };

std::string to_string(SourceTag t);
std::optional<SourceTag> source_tag_from_string(std::string_view s);
const std::vector<SourceTag>& all_source_tags();

struct TaggedRecord {
  unified::Trajectory trajectory;
  SourceTag tag = SourceTag::AgentCleaned;
};

// --- dedup -------------------------------------------------------------------

struct DropEntry {
  std::string dropped_id;
  std::string kept_id;
  double similarity = 0.0;
};

struct DedupResult {
  std::vector<unified::Trajectory> kept;
  std::vector<DropEntry> dropped;
};

/// Word shingles of length `shingle_len` over normalize_text(query). Queries
/// shorter than one shingle contribute their whole normalized text as a
/// single shingle, so every record has a non-empty set.
std::vector<std::string> query_shingles(const std::string& query, int shingle_len);

/// Exact |a∩b| / |a∪b| over the shingle multiset collapsed to a set.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Greedy first-wins scan in corpus order: a record is dropped iff its
/// shingle set reaches `threshold` similarity against any already-kept
/// record (candidates found through an inverted shingle index, similarity
/// always computed exactly).
DedupResult dedup(const std::vector<unified::Trajectory>& corpus, double threshold = 0.9,
                  int shingle_len = 3);

// --- mixing --------------------------------------------------------------------

struct MixturePlan {
  std::map<SourceTag, double> targets;  // fractions, sum to 1 (±1e-9)
  std::size_t total = 0;
  std::uint64_t seed = 0;

  static MixturePlan from_json(const Json& j);
};

/// Per-tag counts: llround(total × fraction), any rounding residue assigned
/// to the largest-fraction tag (ties by tag enum order). Sampling without
/// replacement by seeded shuffle + prefix. Output groups tags in enum order;
/// interleaving happens at shard time. Throws ConfigError on a short pool.
std::vector<TaggedRecord> plan_mixture(
    const std::map<SourceTag, std::vector<unified::Trajectory>>& pools,
    const MixturePlan& plan);

std::map<SourceTag, std::size_t> mixture_counts(const MixturePlan& plan);

// --- sharding --------------------------------------------------------------------

struct ShardSpec {
  std::size_t num_workers = 1;
  std::uint64_t base_seed = 0;
  std::size_t interleave_block = 1;
};

/// Record → worker fnv1a64(trajectory_id) % num_workers; each shard shuffled
/// with seed mix_seed(base_seed, worker); then tags are interleaved
/// round-robin in blocks of interleave_block (enum order, exhausted tags
/// skipped). Union of shards is exactly the input multiset.
std::vector<std::vector<TaggedRecord>> shard(const std::vector<TaggedRecord>& corpus,
                                             const ShardSpec& spec);

/// shard-00042.jsonl style name for a worker index.
std::string shard_file_name(std::size_t worker);

}  // namespace fcpipe::mixture
