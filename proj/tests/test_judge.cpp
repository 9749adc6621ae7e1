#include <cstdlib>

#include "doctest.h"
#include "fcpipe/augment.hpp"
#include "fcpipe/judge.hpp"
#include "test_helpers.hpp"

using namespace fcpipe;
using judge::Decision;
using judge::JudgeKind;

namespace {

judge::JudgeRequest make_request(JudgeKind kind, const std::string& payload) {
  judge::JudgeRequest req;
  req.kind = kind;
  req.payload = payload;
  return req;
}

Json recordings_for(const std::vector<std::pair<std::string, Json>>& entries) {
  Json rec = Json::object();
  for (const auto& [payload, response] : entries)
    rec[judge::payload_digest(payload)] = response;
  return rec;
}

// Scripted transport for retry behaviour: fails `failures` times, optionally
// transiently, then answers.
class FlakyTransport : public judge::Transport {
 public:
  FlakyTransport(int failures, bool transient, Json response)
      : failures_(failures), transient_(transient), response_(std::move(response)) {}

  Json send(const Json&) override {
    ++calls_;
    if (failures_ > 0) {
      --failures_;
      throw judge::TransportError("TRANSPORT_FAILURE: scripted", transient_);
    }
    return response_;
  }

  int calls() const { return calls_; }

 private:
  int failures_;
  bool transient_;
  Json response_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("judge kind and decision names round trip") {
  for (auto k : {JudgeKind::Grounding, JudgeKind::TrajectoryRating, JudgeKind::StepRating,
                 JudgeKind::RephraseAccept})
    CHECK(judge::judge_kind_from_string(judge::to_string(k)) == k);
  CHECK(judge::to_string(JudgeKind::TrajectoryRating) == "trajectory_rating");
  CHECK(!judge::judge_kind_from_string("vibes").has_value());

  for (auto d : {Decision::Accept, Decision::Reject, Decision::Uncertain})
    CHECK(judge::decision_from_string(judge::to_string(d)) == d);
  CHECK(!judge::decision_from_string("maybe").has_value());

  CHECK(judge::is_rating(JudgeKind::TrajectoryRating));
  CHECK(judge::is_rating(JudgeKind::StepRating));
  CHECK(!judge::is_rating(JudgeKind::Grounding));
  CHECK(!judge::is_rating(JudgeKind::RephraseAccept));
}

TEST_CASE("payload digest and request serialization") {
  CHECK(judge::payload_digest("hello world") == hex64(fnv1a64("hello world")));
  CHECK(judge::payload_digest("") == "cbf29ce484222325");

  auto req = make_request(JudgeKind::Grounding, "is it grounded?");
  auto j = req.to_json();
  CHECK(j.at("kind") == "grounding");
  CHECK(j.at("payload") == "is it grounded?");
  CHECK(j.at("request_id") == judge::payload_digest("is it grounded?"));

  req.request_id = "custom-7";
  CHECK(req.to_json().at("request_id") == "custom-7");
}

TEST_CASE("verdict serialization") {
  judge::JudgeVerdict v;
  v.request_id = "r1";
  v.decision = Decision::Accept;
  v.rationale = "looks fine";
  auto j = v.to_json();
  CHECK(j.at("request_id") == "r1");
  CHECK(j.at("decision") == "accept");
  CHECK(!j.contains("score"));
  CHECK(j.at("rationale") == "looks fine");
  v.score = 4.5;
  CHECK(v.to_json().at("score") == 4.5);
}

TEST_CASE("mock transport replays recordings and never fabricates") {
  auto rec = recordings_for({{"known payload", Json{{"decision", "accept"}}}});
  judge::MockTransport mock(rec);

  auto req = make_request(JudgeKind::Grounding, "known payload").to_json();
  CHECK(mock.send(req) == Json{{"decision", "accept"}});
  CHECK(mock.send(req) == Json{{"decision", "accept"}});

  auto missing = make_request(JudgeKind::Grounding, "never recorded").to_json();
  try {
    mock.send(missing);
    FAIL("expected TransportError");
  } catch (const judge::TransportError& e) {
    CHECK(!e.transient());
    CHECK(std::string(e.what()).rfind("MISSING_RECORDING", 0) == 0);
  }

  CHECK_THROWS_AS(judge::MockTransport(Json::array()), ConfigError);
}

TEST_CASE("rating verdicts derive the decision from the threshold") {
  auto payload_hi = "rate this: good";
  auto payload_lo = "rate this: bad";
  auto payload_mid = "rate this: fine";
  auto rec = recordings_for({
      {payload_hi, Json{{"score", 5}, {"rationale", "strong"}}},
      {payload_lo, Json{{"score", 1.5}}},
      {payload_mid, Json{{"score", 3}}},
  });
  judge::MockTransport mock(rec);
  judge::JudgeClient client(mock);
  CHECK(client.options().score_threshold == 3.0);
  CHECK(client.options().max_retries == 2);

  auto hi = client.judge(make_request(JudgeKind::TrajectoryRating, payload_hi));
  CHECK(hi.decision == Decision::Accept);
  CHECK(hi.score == 5.0);
  CHECK(hi.rationale == "strong");
  CHECK(hi.request_id == judge::payload_digest(payload_hi));

  auto lo = client.judge(make_request(JudgeKind::StepRating, payload_lo));
  CHECK(lo.decision == Decision::Reject);
  CHECK(lo.score == 1.5);

  // Threshold is inclusive.
  auto mid = client.judge(make_request(JudgeKind::StepRating, payload_mid));
  CHECK(mid.decision == Decision::Accept);

  judge::JudgeOptions strict;
  strict.score_threshold = 4.0;
  judge::JudgeClient picky(mock, strict);
  CHECK(picky.judge(make_request(JudgeKind::StepRating, payload_mid)).decision ==
        Decision::Reject);
}

TEST_CASE("malformed verdicts are errors, not guesses") {
  auto rec = recordings_for({
      {"p1", Json{{"score", 9}}},
      {"p2", Json{{"rationale", "no score"}}},
      {"p3", Json{{"decision", "accept"}, {"score", 4}}},
      {"p4", Json{{"decision", "perhaps"}}},
      {"p5", Json::array()},
      {"p6", Json{{"decision", "uncertain"}}},
  });
  judge::MockTransport mock(rec);
  judge::JudgeClient client(mock);

  CHECK_THROWS_WITH_AS(client.judge(make_request(JudgeKind::StepRating, "p1")),
                       doctest::Contains("MALFORMED_VERDICT"), judge::JudgeError);
  CHECK_THROWS_WITH_AS(client.judge(make_request(JudgeKind::TrajectoryRating, "p2")),
                       doctest::Contains("MALFORMED_VERDICT"), judge::JudgeError);
  // A score on a decision kind means the judge answered the wrong question.
  CHECK_THROWS_WITH_AS(client.judge(make_request(JudgeKind::Grounding, "p3")),
                       doctest::Contains("MALFORMED_VERDICT"), judge::JudgeError);
  CHECK_THROWS_WITH_AS(client.judge(make_request(JudgeKind::RephraseAccept, "p4")),
                       doctest::Contains("MALFORMED_VERDICT"), judge::JudgeError);
  CHECK_THROWS_AS(client.judge(make_request(JudgeKind::Grounding, "p5")),
                  judge::JudgeError);
  CHECK(client.judge(make_request(JudgeKind::Grounding, "p6")).decision ==
        Decision::Uncertain);
}

TEST_CASE("retries cover transient failures only") {
  Json ok = Json{{"decision", "accept"}};
  auto req = make_request(JudgeKind::Grounding, "payload");

  SUBCASE("transient failures within the budget succeed") {
    FlakyTransport flaky(2, true, ok);
    judge::JudgeClient client(flaky);
    CHECK(client.judge(req).decision == Decision::Accept);
    CHECK(flaky.calls() == 3);
  }

  SUBCASE("budget exhausted") {
    FlakyTransport flaky(3, true, ok);
    judge::JudgeClient client(flaky);
    CHECK_THROWS_AS(client.judge(req), judge::JudgeError);
    CHECK(flaky.calls() == 3);  // initial try + 2 retries
  }

  SUBCASE("non-transient failures are never retried") {
    FlakyTransport flaky(1, false, ok);
    judge::JudgeClient client(flaky);
    CHECK_THROWS_AS(client.judge(req), judge::JudgeError);
    CHECK(flaky.calls() == 1);
  }

  SUBCASE("zero retries allowed") {
    FlakyTransport flaky(1, true, ok);
    judge::JudgeOptions opts;
    opts.max_retries = 0;
    judge::JudgeClient client(flaky, opts);
    CHECK_THROWS_AS(client.judge(req), judge::JudgeError);
    CHECK(flaky.calls() == 1);
    opts.max_retries = -1;
    CHECK_THROWS_AS(judge::JudgeClient(flaky, opts), ConfigError);
  }
}

TEST_CASE("batch judging keeps request order and survives partial failure") {
  auto rec = recordings_for({
      {"b0", Json{{"decision", "accept"}}},
      {"b2", Json{{"decision", "reject"}}},
      {"b3", Json{{"score", 4}}},
  });
  judge::MockTransport mock(rec);
  judge::JudgeClient client(mock);

  std::vector<judge::JudgeRequest> reqs = {
      make_request(JudgeKind::Grounding, "b0"),
      make_request(JudgeKind::Grounding, "b1-missing"),
      make_request(JudgeKind::RephraseAccept, "b2"),
      make_request(JudgeKind::StepRating, "b3"),
  };

  auto slots = client.batch_judge(reqs, 3);
  REQUIRE(slots.size() == 4);
  CHECK(std::get<judge::JudgeVerdict>(slots[0]).decision == Decision::Accept);
  CHECK(std::get<std::string>(slots[1]).rfind("MISSING_RECORDING", 0) == 0);
  CHECK(std::get<judge::JudgeVerdict>(slots[2]).decision == Decision::Reject);
  CHECK(std::get<judge::JudgeVerdict>(slots[3]).score == 4.0);

  auto serial = client.batch_judge(reqs, 1);
  REQUIRE(serial.size() == slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    CHECK(serial[i].index() == slots[i].index());

  SUBCASE("all failures raise") {
    std::vector<judge::JudgeRequest> doomed = {
        make_request(JudgeKind::Grounding, "x-missing"),
        make_request(JudgeKind::Grounding, "y-missing"),
    };
    CHECK_THROWS_AS(client.batch_judge(doomed, 2), judge::JudgeError);
  }

  SUBCASE("empty batch is fine") {
    CHECK(client.batch_judge({}, 2).empty());
  }

  SUBCASE("parallelism must be positive") {
    CHECK_THROWS_AS(client.batch_judge(reqs, 0), ConfigError);
  }
}

TEST_CASE("rephrase candidate fetch") {
  auto instruction = std::string("Answer with an API request when a tool applies.");
  auto fetch_payload = judge::rephrase_candidates_request(instruction);
  auto rec = recordings_for({
      {fetch_payload, Json{{"candidates", Json::array({"Use a tool when one fits.",
                                                       "Reply with an API call."})}}},
  });
  judge::MockTransport mock(rec);
  judge::JudgeClient client(mock);
  auto candidates = client.rephrase_candidates(instruction);
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0] == "Use a tool when one fits.");

  Json bad = recordings_for({{fetch_payload, Json{{"candidates", "nope"}}}});
  judge::MockTransport broken(bad);
  judge::JudgeClient client2(broken);
  CHECK_THROWS_AS(client2.rephrase_candidates(instruction), judge::JudgeError);
}

TEST_CASE("rephrase hook keeps only judge-accepted candidates") {
  auto instruction = std::string("Answer with an API request when a tool applies.");
  auto c1 = std::string("Use a tool when one fits.");
  auto c2 = std::string("Ignore the tools entirely.");
  auto c3 = std::string("Reply with an API call.");
  auto rec = recordings_for({
      {judge::rephrase_candidates_request(instruction),
       Json{{"candidates", Json::array({c1, c2, c3})}}},
      {judge::rephrase_accept_payload(instruction, c1), Json{{"decision", "accept"}}},
      {judge::rephrase_accept_payload(instruction, c2), Json{{"decision", "reject"}}},
      {judge::rephrase_accept_payload(instruction, c3), Json{{"decision", "accept"}}},
  });
  judge::MockTransport mock(rec);
  judge::JudgeClient client(mock);
  auto accepted = augment::rephrase_hook(instruction, client);
  CHECK(accepted == std::vector<std::string>{c1, c3});
}

TEST_CASE("payload templates mention their inputs") {
  auto g = judge::grounding_payload("\"Nevada\"", "steps[0].tool_calls[0].arguments.location",
                                    "query: fires in California");
  CHECK(g.find("\"Nevada\"") != std::string::npos);
  CHECK(g.find("steps[0].tool_calls[0].arguments.location") != std::string::npos);
  CHECK(g.find("fires in California") != std::string::npos);
  CHECK(judge::trajectory_rating_payload("{\"x\":1}").find("{\"x\":1}") != std::string::npos);
  CHECK(judge::step_rating_payload("{\"y\":2}").find("{\"y\":2}") != std::string::npos);
  auto r = judge::rephrase_accept_payload("orig", "cand");
  CHECK(r.find("orig") != std::string::npos);
  CHECK(r.find("cand") != std::string::npos);
}

TEST_CASE("http transport env wiring") {
  CHECK(std::string(judge::kJudgeEndpointEnv) == "FCPIPE_JUDGE_ENDPOINT");
  CHECK(std::string(judge::kJudgeTokenEnv) == "FCPIPE_JUDGE_TOKEN");
  ::unsetenv(judge::kJudgeEndpointEnv);
  CHECK(judge::HttpTransport::from_env() == nullptr);
  ::setenv(judge::kJudgeEndpointEnv, "http://localhost:1", 1);
  auto transport = judge::HttpTransport::from_env();
  CHECK(transport != nullptr);
  ::unsetenv(judge::kJudgeEndpointEnv);
}
