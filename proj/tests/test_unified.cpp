#include <algorithm>
#include <set>

#include "doctest.h"
#include "fcpipe/common.hpp"
#include "fcpipe/unified.hpp"
#include "test_helpers.hpp"

using namespace fcpipe;
using fcpipe::testing::tiny_trajectory;
using fcpipe::testing::wildfire;

// Reference outputs for the hashing and seeding contract. These values were
// computed with an independent implementation and are frozen: any change
// here breaks every shard assignment and shuffle reproduction in the wild.

TEST_CASE("splitmix64 reference streams") {
  std::uint64_t s = 0;
  CHECK(splitmix64_next(s) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64_next(s) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64_next(s) == 0x06c45d188009454fULL);
  CHECK(splitmix64_next(s) == 0xf88bb8a8724c81ecULL);

  s = 1234567;
  CHECK(splitmix64_next(s) == 0x599ed017fb08fc85ULL);
  CHECK(splitmix64_next(s) == 0x2c73f08458540fa5ULL);
  CHECK(splitmix64_next(s) == 0x883ebce5a3f27c77ULL);
  CHECK(splitmix64_next(s) == 0x3fbef740e9177b3fULL);

  s = 0xDEADBEEFULL;
  CHECK(splitmix64_next(s) == 0x4adfb90f68c9eb9bULL);
  CHECK(splitmix64_next(s) == 0xde586a3141a10922ULL);
  CHECK(splitmix64_next(s) == 0x021fbc2f8e1cfc1dULL);
  CHECK(splitmix64_next(s) == 0x7466ce737be16790ULL);
}

TEST_CASE("fnv1a64 reference digests") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a64("hello world") == 0x779a65e7023cd2e7ULL);
  CHECK(fnv1a64("get_fire_info") == 0x25308569882645b1ULL);
}

TEST_CASE("mix_seed reference values") {
  CHECK(mix_seed(42, 0) == 0xbdd732262feb6e95ULL);
  CHECK(mix_seed(42, 1) == 0x28efe333b266f103ULL);
  CHECK(mix_seed(0, 7) == 0xc584133ac916ab3cULL);
}

TEST_CASE("rng shuffle is deterministic and a permutation") {
  Rng a(99), b(99);
  std::vector<int> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> y = x;
  a.shuffle(x);
  b.shuffle(y);
  CHECK(x == y);
  std::vector<int> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});

  auto p = Rng(5).permutation(64);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 64);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 63);
}

TEST_CASE("text normalization") {
  CHECK(normalize_text("Hello,   World!") == "hello world");
  CHECK(normalize_text("  a\tb\nc  ") == "a b c");
  CHECK(normalize_text("Let me think... 50 miles.") == "let me think 50 miles");
  CHECK(normalize_text("") == "");
  CHECK(split_words("one two  three") ==
        std::vector<std::string>{"one", "two", "three"});
}

TEST_CASE("canonical number text") {
  CHECK(canonical_number(50.0) == "50");
  CHECK(canonical_number(-3.0) == "-3");
  CHECK(canonical_number(0.5) == "0.5");
  CHECK(canonical_number(0.0) == "0");
  CHECK(canonical_number(1e15) == "1000000000000000");
}

TEST_CASE("hex64 formatting") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(hex64(0xffffffffffffffffULL) == "ffffffffffffffff");
}

TEST_CASE("dump_pyjson uses python separators") {
  Json v = Json::parse(R"({"thought":"","tool_calls":[{"name":"get_fire_info","arguments":{"location":"California","radius":50}}]})");
  CHECK(dump_pyjson(v) ==
        "{\"thought\": \"\", \"tool_calls\": [{\"name\": \"get_fire_info\", "
        "\"arguments\": {\"location\": \"California\", \"radius\": 50}}]}");
  CHECK(dump_pyjson(Json::array()) == "[]");
  CHECK(dump_pyjson(Json::object()) == "{}");
  CHECK(dump_pyjson(Json(3.5)) == "3.5");
}

TEST_CASE("split_lines offsets") {
  auto lines = split_lines("ab\ncd\n\nef");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == std::pair<std::string, std::size_t>{"ab", 0});
  CHECK(lines[1] == std::pair<std::string, std::size_t>{"cd", 3});
  CHECK(lines[2] == std::pair<std::string, std::size_t>{"", 6});
  CHECK(lines[3] == std::pair<std::string, std::size_t>{"ef", 7});
  CHECK(split_lines("ab\n").size() == 1);
  CHECK(split_lines("").empty());
}

TEST_CASE("parallel_map preserves index order") {
  std::function<std::size_t(std::size_t)> square = [](std::size_t i) {
    return i * i;
  };
  auto one = parallel_map<std::size_t>(100, 1, square);
  auto four = parallel_map<std::size_t>(100, 4, square);
  CHECK(one == four);
  CHECK(four[17] == 289);
}

// --- schema ---------------------------------------------------------------

TEST_CASE("wildfire fixture parses and revalidates clean") {
  auto t = wildfire();
  CHECK(t.unique_trajectory_id == "wildfire-ca-0001");
  REQUIRE(t.tools.size() == 1);
  CHECK(t.tools[0].name == "get_fire_info");
  REQUIRE(t.tools[0].parameters.size() == 2);
  CHECK(t.tools[0].parameters[0].name == "location");
  CHECK(t.tools[0].parameters[0].required);
  CHECK(t.tools[0].parameters[1].type == unified::ValueType::Number);
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].tool_calls.empty());
  CHECK(t.steps[1].tool_calls.size() == 1);
  CHECK(t.steps[1].tool_calls[0].arguments["radius"] == Json(50));
  CHECK(unified::validate_trajectory(t).empty());
}

TEST_CASE("serialization round trip preserves bytes") {
  Json original = fcpipe::testing::load_json("tests/fixtures/wildfire.json");
  auto t = unified::trajectory_from_json(original);
  CHECK(unified::trajectory_to_json(t) == original);
  CHECK(unified::trajectory_to_json(t).dump() == original.dump());

  // Declared-order input stores no explicit key order.
  CHECK(t.key_order.empty());
  CHECK(t.tools[0].key_order.empty());
  CHECK(t.steps[0].key_order.empty());
}

TEST_CASE("non-declared key order survives a round trip") {
  std::string line =
      R"({"query":"q","unique_trajectory_id":"x1","task_instruction":"t",)"
      R"("tools":[{"parameters":{"p":{"required":true,"type":"string","description":"d"}},"name":"f","description":"d"}],)"
      R"("steps":[{"tool_calls":[{"arguments":{"p":"v"},"name":"f"}],"thought":"","step_id":1,"next_observation":"","user_input":"u"}],)"
      R"("few_shot_examples":[]})";
  auto t = unified::parse_trajectory(line);
  CHECK(t.key_order == std::vector<std::string>{"query", "unique_trajectory_id",
                                                "task_instruction", "tools",
                                                "steps", "few_shot_examples"});
  CHECK(t.tools[0].key_order ==
        std::vector<std::string>{"parameters", "name", "description"});
  CHECK(t.steps[0].tool_calls[0].key_order ==
        std::vector<std::string>{"arguments", "name"});
  CHECK(unified::serialize_trajectory(t) == line);

  auto canon = unified::canonicalize(t);
  CHECK(canon.key_order.empty());
  CHECK(canon.tools[0].key_order.empty());
  CHECK(unified::serialize_trajectory(canon) ==
        unified::serialize_trajectory(unified::canonicalize(canon)));
}

TEST_CASE("canonicalize sorts free-form maps only") {
  auto t = tiny_trajectory("c1");
  t.steps[0].tool_calls[0].arguments = Json::parse(R"({"z":1,"a":{"y":2,"b":3}})");
  std::swap(t.tools[0].parameters[0], t.tools[0].parameters[1]);
  auto canon = unified::canonicalize(t);
  CHECK(canon.tools[0].parameters[0].name == "city");
  CHECK(canon.tools[0].parameters[1].name == "days");
  CHECK(canon.steps[0].tool_calls[0].arguments.dump() ==
        R"({"a":{"b":3,"y":2},"z":1})");
  // Idempotent.
  CHECK(unified::trajectory_to_json(unified::canonicalize(canon)) ==
        unified::trajectory_to_json(canon));
}

TEST_CASE("validation catches each defect class") {
  auto issue_codes = [](const unified::Trajectory& t) {
    std::vector<std::string> codes;
    for (const auto& i : unified::validate_trajectory(t))
      codes.push_back(unified::to_string(i.code));
    return codes;
  };

  CHECK(issue_codes(tiny_trajectory("ok")).empty());

  auto t = tiny_trajectory("bad-steps");
  t.steps[0].step_id = 2;
  auto codes = issue_codes(t);
  REQUIRE(codes.size() == 1);
  CHECK(codes[0] == "BAD_STEP_ID");
  CHECK(unified::validate_trajectory(t)[0].path == "steps[0].step_id");

  t = tiny_trajectory("");
  CHECK(issue_codes(t) == std::vector<std::string>{"EMPTY_ID"});

  t = tiny_trajectory("no-query");
  t.query = "";
  CHECK(issue_codes(t) == std::vector<std::string>{"EMPTY_QUERY"});

  t = tiny_trajectory("dup-param");
  t.tools[0].parameters[1].name = "city";
  CHECK(issue_codes(t) == std::vector<std::string>{"DUP_PARAM"});

  t = tiny_trajectory("empty-name");
  t.steps[0].tool_calls[0].name = "";
  CHECK(issue_codes(t) == std::vector<std::string>{"EMPTY_NAME"});

  t = tiny_trajectory("empty-step");
  t.steps[0].tool_calls.clear();
  CHECK(issue_codes(t) == std::vector<std::string>{"EMPTY_STEP"});

  t = tiny_trajectory("null-arg");
  t.steps[0].tool_calls[0].arguments["city"] = nullptr;
  CHECK(issue_codes(t) == std::vector<std::string>{"BAD_TYPE"});

  t = tiny_trajectory("nested");
  unified::Trajectory ex = tiny_trajectory("");
  unified::Trajectory inner = tiny_trajectory("");
  ex.few_shot_examples.push_back(inner);
  t.few_shot_examples.push_back(ex);
  codes = issue_codes(t);
  CHECK(std::count(codes.begin(), codes.end(), "NESTED_FEW_SHOT") == 1);

  t = tiny_trajectory("id-inside-example");
  t.few_shot_examples.push_back(tiny_trajectory("carries-id"));
  codes = issue_codes(t);
  CHECK(std::count(codes.begin(), codes.end(), "NESTED_FEW_SHOT") == 1);
}

TEST_CASE("strict parse failures") {
  CHECK_THROWS_AS(unified::parse_trajectory("{nope"), ParseError);
  CHECK_THROWS_AS(unified::parse_trajectory(R"({"unique_trajectory_id":7})"),
                  ParseError);
  CHECK_THROWS_AS(
      unified::parse_trajectory(R"({"unique_trajectory_id":"x","bogus":1})"),
      ParseError);

  try {
    unified::parse_trajectory("   {]");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
    CHECK(e.code() == "PARSE_ERROR");
  }

  // Duplicate argument keys are invisible to a DOM parse; the SAX scan
  // catches them and tags the failure by context.
  std::string dup_arg =
      R"({"unique_trajectory_id":"x","task_instruction":"","few_shot_examples":[],"query":"q","tools":[],)"
      R"("steps":[{"thought":"","tool_calls":[{"name":"f","arguments":{"a":1,"a":2}}],"step_id":1,"next_observation":"","user_input":""}]})";
  try {
    unified::parse_trajectory(dup_arg);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.code() == "DUP_ARG");
  }

  std::string dup_param =
      R"({"unique_trajectory_id":"x","task_instruction":"","few_shot_examples":[],"query":"q",)"
      R"("tools":[{"name":"f","description":"","parameters":{"p":{"type":"string","description":""},"p":{"type":"string","description":""}}}],"steps":[]})";
  try {
    unified::parse_trajectory(dup_param);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.code() == "DUP_PARAM");
  }

  try {
    unified::parse_trajectory(
        R"({"unique_trajectory_id":"x","task_instruction":"","few_shot_examples":[],"query":"q",)"
        R"("tools":[{"name":"f","description":"","parameters":{"p":{"type":"decimal","description":""}}}],"steps":[]})");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.code() == "BAD_TYPE");
  }
}

TEST_CASE("corpus files carry a version header") {
  CHECK(unified::corpus_header_line() == R"({"corpus_version":1})");
  std::string path = "corpus_roundtrip_test.jsonl";
  std::vector<unified::Trajectory> corpus{tiny_trajectory("a"),
                                          tiny_trajectory("b")};
  unified::write_corpus(path, corpus);
  std::string text = read_file(path);
  CHECK(text.rfind(R"({"corpus_version":1})" "\n", 0) == 0);
  auto back = unified::read_corpus(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == corpus[0]);
  CHECK(back[1] == corpus[1]);

  // A headerless file still reads.
  write_file(path, unified::serialize_trajectory(corpus[0]) + "\n");
  CHECK(unified::read_corpus(path).size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("value kind classification") {
  CHECK(unified::value_kind(Json("x")) == unified::ValueType::String);
  CHECK(unified::value_kind(Json(1)) == unified::ValueType::Integer);
  CHECK(unified::value_kind(Json(1u)) == unified::ValueType::Integer);
  CHECK(unified::value_kind(Json(1.5)) == unified::ValueType::Number);
  CHECK(unified::value_kind(Json(true)) == unified::ValueType::Boolean);
  CHECK(unified::value_kind(Json::array()) == unified::ValueType::Array);
  CHECK(unified::value_kind(Json::object()) == unified::ValueType::Object);
  CHECK(!unified::value_kind(Json(nullptr)).has_value());
}
