#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcpipe/common.hpp"
#include "fcpipe/ingest.hpp"
#include "fcpipe/mixture.hpp"
#include "fcpipe/render.hpp"
#include "fcpipe/verify.hpp"

namespace fcpipe::pipeline {

inline constexpr const char* kToolVersion = "fcpipe 0.1.0";

// ---------------------------------------------------------------------------
// Config-driven end-to-end run: ingest → verify → dedup → mixture → render →
// shard, all stages after ingest optional. The run writes its outputs plus a
// manifest (config digest, input digests, one digest per output file) and is
// a pure function of (config, input files): reruns are byte-identical.
//
// Config shape (JSON):
//   {
//     "output_dir": "out",
//     "inputs": [{"path": "a.jsonl", "adapter": "unified", "tag": "agent_cleaned"}],
//     "verify": { ...policy keys..., "drop_unclean": true },   // optional
//     "dedup": {"threshold": 0.9, "shingle_len": 3},           // optional
//     "mixture": {"targets": {...}, "total": N, "seed": S},    // optional
//     "render": { ...render plan keys... },                    // optional
//     "shard": {"num_workers": N, "base_seed": S, "interleave_block": B}
//   }
// ---------------------------------------------------------------------------

struct StageCounts {
  std::size_t ingested = 0;
  std::size_t rejected = 0;
  std::size_t verified = 0;
  std::size_t dropped_unclean = 0;
  std::size_t deduped_away = 0;
  std::size_t mixed = 0;
  std::size_t rendered = 0;
  std::vector<std::size_t> shard_sizes;
};

struct PipelineResult {
  int exit_code = 0;  // 0 all records kept, 1 some rejected or dropped
  Json manifest;
  StageCounts counts;
};

/// File digest used throughout the manifest: fnv1a64 of the raw bytes, hex.
std::string digest_file(const std::string& path);
std::string digest_bytes(std::string_view bytes);

/// Runs the whole pipeline. Relative paths in the config resolve against the
/// current working directory. Throws ConfigError / ParseError on fatal
/// problems; data-level rejects only lower the exit code to 1.
PipelineResult run_pipeline(const Json& config, std::size_t workers = 1);

}  // namespace fcpipe::pipeline
