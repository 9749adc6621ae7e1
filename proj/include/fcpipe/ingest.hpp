#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fcpipe/unified.hpp"

namespace fcpipe::ingest {

/// Closed set of source formats. New formats arrive by adding an adapter
/// here, not through configuration.
enum class SourceAdapterId { Unified, FlatCallPairs, ChatTranscript };

std::string to_string(SourceAdapterId id);
std::optional<SourceAdapterId> adapter_from_string(std::string_view s);

struct ParseFailure {
  std::size_t offset = 0;     // byte offset within the record
  std::string code;           // PARSE_ERROR or a schema issue code
  std::string reason;
};

using ParseOutcome = std::variant<unified::Trajectory, ParseFailure>;

/// Maps one source record into the unified shape. A successful outcome
/// always passes validate_trajectory.
ParseOutcome parse_record(std::string_view bytes, SourceAdapterId adapter);

struct IngestReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> issues_by_code;
  std::vector<std::pair<std::size_t, std::string>> rejected_ids;  // line, why

  Json to_json() const;
};

struct IngestResult {
  std::vector<unified::Trajectory> trajectories;
  IngestReport report;
};

/// strict=true aborts at the first bad line (ConfigError naming it);
/// strict=false skips and tallies. Accepted trajectories keep input order.
/// Lines may be parsed in parallel; results are merged in input order.
IngestResult ingest_corpus(const std::string& path, SourceAdapterId adapter,
                           bool strict, std::size_t workers = 1);

}  // namespace fcpipe::ingest
