#include <cstdio>

#include "doctest.h"
#include "fcpipe/ingest.hpp"
#include "test_helpers.hpp"

using namespace fcpipe;
using fcpipe::testing::tiny_trajectory;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string name, std::string_view contents)
      : path(std::move(name)) {
    write_file(path, contents);
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("adapter names round trip") {
  using ingest::SourceAdapterId;
  for (auto id : {SourceAdapterId::Unified, SourceAdapterId::FlatCallPairs,
                  SourceAdapterId::ChatTranscript})
    CHECK(ingest::adapter_from_string(ingest::to_string(id)) == id);
  CHECK(!ingest::adapter_from_string("csv").has_value());
}

TEST_CASE("unified adapter accepts valid and tallies invalid") {
  std::string good = unified::serialize_trajectory(tiny_trajectory("g1"));
  std::string bad_json = "{broken";
  std::string bad_schema =
      R"({"unique_trajectory_id":"g2","task_instruction":"","few_shot_examples":[],"query":"","tools":[],"steps":[]})";
  TempFile f("ingest_unified_test.jsonl",
             unified::corpus_header_line() + "\n" + good + "\n" + bad_json +
                 "\n" + bad_schema + "\n" + good + "\n");

  auto result =
      ingest::ingest_corpus(f.path, ingest::SourceAdapterId::Unified, false);
  CHECK(result.report.total == 4);
  CHECK(result.report.accepted == 1);
  CHECK(result.report.rejected == 3);
  CHECK(result.report.issues_by_code.at("PARSE_ERROR") == 1);
  CHECK(result.report.issues_by_code.at("EMPTY_QUERY") == 1);
  CHECK(result.report.issues_by_code.at("DUP_TRAJECTORY_ID") == 1);
  REQUIRE(result.trajectories.size() == 1);
  CHECK(result.trajectories[0].unique_trajectory_id == "g1");

  // Line numbers in the report refer to the physical file.
  REQUIRE(result.report.rejected_ids.size() == 3);
  CHECK(result.report.rejected_ids[0].first == 3);
  CHECK(result.report.rejected_ids[1].first == 4);
  CHECK(result.report.rejected_ids[2].first == 5);

  CHECK_THROWS_AS(
      ingest::ingest_corpus(f.path, ingest::SourceAdapterId::Unified, true),
      ConfigError);
}

TEST_CASE("parallel ingest matches serial") {
  std::string body = unified::corpus_header_line() + "\n";
  for (int i = 0; i < 40; ++i)
    body += unified::serialize_trajectory(
                tiny_trajectory("p" + std::to_string(i))) +
            "\n";
  TempFile f("ingest_parallel_test.jsonl", body);
  auto serial =
      ingest::ingest_corpus(f.path, ingest::SourceAdapterId::Unified, false, 1);
  auto threaded =
      ingest::ingest_corpus(f.path, ingest::SourceAdapterId::Unified, false, 4);
  REQUIRE(serial.trajectories.size() == 40);
  REQUIRE(threaded.trajectories.size() == 40);
  for (std::size_t i = 0; i < 40; ++i)
    CHECK(serial.trajectories[i] == threaded.trajectories[i]);
}

TEST_CASE("flat call pair adapter") {
  std::string record =
      R"({"id":"fp-1","query":"weather in Paris",)"
      R"("call":{"name":"get_weather","arguments":{"city":"Paris"}},)"
      R"("tools":[{"name":"get_weather","description":"d",)"
      R"("parameters":{"city":{"type":"string","description":"","required":true}}}]})";
  auto outcome =
      ingest::parse_record(record, ingest::SourceAdapterId::FlatCallPairs);
  auto* t = std::get_if<unified::Trajectory>(&outcome);
  REQUIRE(t != nullptr);
  CHECK(t->unique_trajectory_id == "fp-1");
  CHECK(t->query == "weather in Paris");
  REQUIRE(t->steps.size() == 1);
  CHECK(t->steps[0].step_id == 1);
  REQUIRE(t->steps[0].tool_calls.size() == 1);
  CHECK(t->steps[0].tool_calls[0].name == "get_weather");
  REQUIRE(t->tools.size() == 1);
  CHECK(t->tools[0].parameters[0].name == "city");

  // Records without an id get a deterministic one from their bytes.
  std::string anon = R"({"query":"q","call":{"name":"f","arguments":{}}})";
  auto a1 = ingest::parse_record(anon, ingest::SourceAdapterId::FlatCallPairs);
  auto a2 = ingest::parse_record(anon, ingest::SourceAdapterId::FlatCallPairs);
  auto* t1 = std::get_if<unified::Trajectory>(&a1);
  auto* t2 = std::get_if<unified::Trajectory>(&a2);
  REQUIRE(t1 != nullptr);
  REQUIRE(t2 != nullptr);
  CHECK(t1->unique_trajectory_id == t2->unique_trajectory_id);
  CHECK(t1->unique_trajectory_id.rfind("flat-", 0) == 0);

  auto bad = ingest::parse_record(R"({"query":"q"})",
                                  ingest::SourceAdapterId::FlatCallPairs);
  auto* failure = std::get_if<ingest::ParseFailure>(&bad);
  REQUIRE(failure != nullptr);
  CHECK(failure->code == "MISSING_FIELD");
}

TEST_CASE("chat transcript adapter builds stepwise structure") {
  std::string record = R"({
    "id": "chat-7",
    "system": "Use tools when needed.",
    "tools": [{"name":"search","description":"","parameters":{"q":{"type":"string","description":"","required":true}}}],
    "messages": [
      {"role": "user", "content": "Find cafes nearby"},
      {"role": "assistant", "content": "Searching now.",
       "tool_calls": [{"name": "search", "arguments": {"q": "cafes nearby"}}]},
      {"role": "tool", "content": "3 results"},
      {"role": "user", "content": "Pick the closest"},
      {"role": "assistant", "content": "The closest is Cafe A."}
    ]
  })";
  auto outcome =
      ingest::parse_record(record, ingest::SourceAdapterId::ChatTranscript);
  auto* t = std::get_if<unified::Trajectory>(&outcome);
  REQUIRE(t != nullptr);
  CHECK(t->task_instruction == "Use tools when needed.");
  CHECK(t->query == "Find cafes nearby");
  REQUIRE(t->steps.size() == 2);
  CHECK(t->steps[0].step_id == 1);
  CHECK(t->steps[0].thought == "Searching now.");
  CHECK(t->steps[0].next_observation == "3 results");
  CHECK(t->steps[0].user_input == "Pick the closest");
  REQUIRE(t->steps[0].tool_calls.size() == 1);
  CHECK(t->steps[0].tool_calls[0].arguments["q"] == Json("cafes nearby"));
  CHECK(t->steps[1].step_id == 2);
  CHECK(t->steps[1].tool_calls.empty());

  auto bad = ingest::parse_record(R"({"messages":[{"role":"oracle"}]})",
                                  ingest::SourceAdapterId::ChatTranscript);
  CHECK(std::holds_alternative<ingest::ParseFailure>(bad));
}

TEST_CASE("ingest report serialization") {
  ingest::IngestReport report;
  report.total = 3;
  report.accepted = 2;
  report.rejected = 1;
  report.issues_by_code["PARSE_ERROR"] = 1;
  report.rejected_ids.emplace_back(2, "bad json");
  auto j = report.to_json();
  CHECK(j["total"] == 3);
  CHECK(j["issues_by_code"]["PARSE_ERROR"] == 1);
  CHECK(j["rejected_ids"][0]["line"] == 2);
}
