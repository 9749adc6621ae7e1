#include "fcpipe/ingest.hpp"

#include <algorithm>
#include <set>

namespace fcpipe::ingest {

using unified::Trajectory;

std::string to_string(SourceAdapterId id) {
  switch (id) {
    case SourceAdapterId::Unified: return "unified";
    case SourceAdapterId::FlatCallPairs: return "flat_call_pairs";
    case SourceAdapterId::ChatTranscript: return "chat_transcript";
  }
  return "unified";
}

std::optional<SourceAdapterId> adapter_from_string(std::string_view s) {
  if (s == "unified") return SourceAdapterId::Unified;
  if (s == "flat_call_pairs") return SourceAdapterId::FlatCallPairs;
  if (s == "chat_transcript") return SourceAdapterId::ChatTranscript;
  return std::nullopt;
}

namespace {

Json parse_json_record(std::string_view bytes) {
  try {
    return Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
}

std::string get_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return "";
  return it->get<std::string>();
}

// Flat record: {"query": ..., "call": {"name": ..., "arguments": {...}},
// "id"?: ..., "tools"?: [unified tool shape]}. Becomes a one-step
// trajectory with step_id 1, empty thought and empty observation.
Trajectory from_flat_pair(std::string_view bytes) {
  Json j = parse_json_record(bytes);
  if (!j.is_object())
    throw ParseError(0, "flat record must be an object", "MISSING_FIELD");
  Trajectory t;
  t.query = get_string(j, "query");
  t.unique_trajectory_id = get_string(j, "id");
  if (t.unique_trajectory_id.empty())
    t.unique_trajectory_id = "flat-" + hex64(fnv1a64(bytes));
  auto call_it = j.find("call");
  if (call_it == j.end() || !call_it->is_object())
    throw ParseError(0, "flat record missing 'call' object", "MISSING_FIELD");
  unified::ToolCall call;
  call.name = get_string(*call_it, "name");
  if (auto a = call_it->find("arguments"); a != call_it->end()) {
    if (!a->is_object())
      throw ParseError(0, "call arguments must be an object", "MISSING_FIELD");
    call.arguments = *a;
  }
  if (auto tools = j.find("tools"); tools != j.end()) {
    if (!tools->is_array())
      throw ParseError(0, "tools must be an array", "MISSING_FIELD");
    Json wrapper = Json::object();
    wrapper["unique_trajectory_id"] = t.unique_trajectory_id;
    wrapper["query"] = t.query;
    wrapper["tools"] = *tools;
    t.tools = unified::trajectory_from_json(wrapper).tools;
  }
  unified::Step step;
  step.step_id = 1;
  step.tool_calls.push_back(std::move(call));
  t.steps.push_back(std::move(step));
  return t;
}

// Chat record: {"id"?: ..., "system"?: ..., "tools"?: [...], "messages":
// [{"role": user|assistant|tool, "content": ..., "tool_calls"?: [...]}]}.
// The first user message is the query; each assistant message opens a step;
// tool messages fill next_observation and user messages fill user_input of
// the step before them.
Trajectory from_chat_transcript(std::string_view bytes) {
  Json j = parse_json_record(bytes);
  if (!j.is_object())
    throw ParseError(0, "chat record must be an object", "MISSING_FIELD");
  Trajectory t;
  t.unique_trajectory_id = get_string(j, "id");
  if (t.unique_trajectory_id.empty())
    t.unique_trajectory_id = "chat-" + hex64(fnv1a64(bytes));
  t.task_instruction = get_string(j, "system");
  if (auto tools = j.find("tools"); tools != j.end()) {
    if (!tools->is_array())
      throw ParseError(0, "tools must be an array", "MISSING_FIELD");
    Json wrapper = Json::object();
    wrapper["unique_trajectory_id"] = t.unique_trajectory_id;
    wrapper["query"] = "x";
    wrapper["tools"] = *tools;
    t.tools = unified::trajectory_from_json(wrapper).tools;
  }
  auto msgs = j.find("messages");
  if (msgs == j.end() || !msgs->is_array())
    throw ParseError(0, "chat record missing 'messages' array",
                     "MISSING_FIELD");
  bool seen_query = false;
  for (const auto& m : *msgs) {
    if (!m.is_object())
      throw ParseError(0, "message must be an object", "MISSING_FIELD");
    std::string role = get_string(m, "role");
    std::string content = get_string(m, "content");
    if (role == "system") {
      if (t.task_instruction.empty()) t.task_instruction = content;
    } else if (role == "user") {
      if (!seen_query) {
        t.query = content;
        seen_query = true;
      } else if (!t.steps.empty()) {
        t.steps.back().user_input = content;
      }
      // a second user turn before any assistant step has nowhere to go
      // in the unified shape; it is dropped by design of this adapter
    } else if (role == "assistant") {
      unified::Step step;
      step.step_id = static_cast<int>(t.steps.size()) + 1;
      step.thought = content;
      if (auto calls = m.find("tool_calls"); calls != m.end()) {
        if (!calls->is_array())
          throw ParseError(0, "tool_calls must be an array", "MISSING_FIELD");
        for (std::size_t i = 0; i < calls->size(); ++i) {
          const auto& cj = (*calls)[i];
          if (!cj.is_object())
            throw ParseError(0, "tool call must be an object",
                             "MISSING_FIELD");
          unified::ToolCall call;
          call.name = get_string(cj, "name");
          if (auto a = cj.find("arguments");
              a != cj.end() && a->is_object())
            call.arguments = *a;
          step.tool_calls.push_back(std::move(call));
        }
      }
      t.steps.push_back(std::move(step));
    } else if (role == "tool") {
      if (!t.steps.empty()) {
        auto& obs = t.steps.back().next_observation;
        if (!obs.empty()) obs += "\n";
        obs += content;
      }
    } else {
      throw ParseError(0, "unknown message role '" + role + "'",
                       "MISSING_FIELD");
    }
  }
  return t;
}

}  // namespace

ParseOutcome parse_record(std::string_view bytes, SourceAdapterId adapter) {
  try {
    Trajectory t;
    switch (adapter) {
      case SourceAdapterId::Unified:
        t = unified::parse_trajectory(bytes);
        break;
      case SourceAdapterId::FlatCallPairs:
        t = from_flat_pair(bytes);
        break;
      case SourceAdapterId::ChatTranscript:
        t = from_chat_transcript(bytes);
        break;
    }
    auto issues = unified::validate_trajectory(t);
    if (!issues.empty()) {
      const auto& first = issues.front();
      return ParseFailure{0, unified::to_string(first.code),
                          "invalid record: " + first.detail + " at " +
                              first.path};
    }
    return t;
  } catch (const ParseError& e) {
    return ParseFailure{e.offset(), e.code(), e.what()};
  }
}

Json IngestReport::to_json() const {
  Json j = Json::object();
  j["total"] = total;
  j["accepted"] = accepted;
  j["rejected"] = rejected;
  Json codes = Json::object();
  for (const auto& [code, count] : issues_by_code) codes[code] = count;
  j["issues_by_code"] = codes;
  Json rejects = Json::array();
  for (const auto& [line, reason] : rejected_ids) {
    Json r = Json::object();
    r["line"] = line;
    r["reason"] = reason;
    rejects.push_back(r);
  }
  j["rejected_ids"] = rejects;
  return j;
}

IngestResult ingest_corpus(const std::string& path, SourceAdapterId adapter,
                           bool strict, std::size_t workers) {
  std::string text = read_file(path);
  auto lines = split_lines(text);

  // Optional corpus header line, not counted as a record.
  std::size_t first_record = 0;
  if (!lines.empty() && adapter == SourceAdapterId::Unified) {
    Json j = Json::parse(lines[0].first, nullptr, false);
    if (unified::is_corpus_header(j)) first_record = 1;
  }

  std::vector<std::size_t> record_lines;  // 1-based line numbers
  std::vector<std::string_view> records;
  for (std::size_t i = first_record; i < lines.size(); ++i) {
    if (lines[i].first.empty()) continue;
    record_lines.push_back(i + 1);
    records.push_back(lines[i].first);
  }

  auto outcomes = parallel_map<ParseOutcome>(
      records.size(), workers,
      [&](std::size_t i) { return parse_record(records[i], adapter); });

  IngestResult result;
  result.report.total = records.size();
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    std::size_t line_no = record_lines[i];
    ParseFailure failure;
    bool failed = false;
    if (auto* t = std::get_if<Trajectory>(&outcomes[i])) {
      if (!seen_ids.insert(t->unique_trajectory_id).second) {
        failed = true;
        failure = {0, "DUP_TRAJECTORY_ID",
                   "duplicate trajectory id '" + t->unique_trajectory_id +
                       "'"};
      } else {
        result.trajectories.push_back(std::move(*t));
        result.report.accepted++;
        continue;
      }
    } else {
      failed = true;
      failure = std::get<ParseFailure>(outcomes[i]);
    }
    if (failed) {
      if (strict)
        throw ConfigError("line " + std::to_string(line_no) + ": " +
                          failure.reason);
      result.report.rejected++;
      result.report.issues_by_code[failure.code]++;
      result.report.rejected_ids.emplace_back(line_no, failure.reason);
    }
  }
  return result;
}

}  // namespace fcpipe::ingest
