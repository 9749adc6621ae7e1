#include "fcpipe/judge.hpp"

#include <cstdlib>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include "httplib.h"

#include "fcpipe/augment.hpp"

namespace fcpipe::judge {

std::string to_string(JudgeKind k) {
  switch (k) {
    case JudgeKind::Grounding: return "grounding";
    case JudgeKind::TrajectoryRating: return "trajectory_rating";
    case JudgeKind::StepRating: return "step_rating";
    case JudgeKind::RephraseAccept: return "rephrase_accept";
  }
  throw ConfigError("unknown judge kind");
}

std::optional<JudgeKind> judge_kind_from_string(std::string_view s) {
  for (auto k : {JudgeKind::Grounding, JudgeKind::TrajectoryRating, JudgeKind::StepRating,
                 JudgeKind::RephraseAccept})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "accept";
    case Decision::Reject: return "reject";
    case Decision::Uncertain: return "uncertain";
  }
  throw ConfigError("unknown decision");
}

std::optional<Decision> decision_from_string(std::string_view s) {
  for (auto d : {Decision::Accept, Decision::Reject, Decision::Uncertain})
    if (to_string(d) == s) return d;
  return std::nullopt;
}

bool is_rating(JudgeKind k) {
  return k == JudgeKind::TrajectoryRating || k == JudgeKind::StepRating;
}

Json JudgeRequest::to_json() const {
  Json j = Json::object();
  j["kind"] = judge::to_string(kind);
  j["payload"] = payload;
  j["request_id"] = request_id.empty() ? payload_digest(payload) : request_id;
  return j;
}

Json JudgeVerdict::to_json() const {
  Json j = Json::object();
  j["request_id"] = request_id;
  j["decision"] = judge::to_string(decision);
  if (score) j["score"] = *score;
  j["rationale"] = rationale;
  return j;
}

std::string payload_digest(std::string_view payload) { return hex64(fnv1a64(payload)); }

// --- payload templates -----------------------------------------------------------

std::string grounding_payload(const std::string& value_dump, const std::string& path,
                              const std::string& context_summary) {
  return "Argument value " + value_dump + " at " + path +
         " was not found in the conversation context.\nContext:\n" + context_summary +
         "\nIs the value nevertheless grounded in the context? Answer accept if grounded, "
         "reject if hallucinated.";
}

std::string trajectory_rating_payload(const std::string& trajectory_json) {
  return "Rate the overall quality of this agent trajectory from 1 (unusable) to 5 "
         "(excellent), considering coherence of thoughts, correctness of calls and "
         "faithfulness to the query.\n" +
         trajectory_json;
}

std::string step_rating_payload(const std::string& step_json) {
  return "Rate this single agent step from 1 (unusable) to 5 (excellent), considering "
         "whether the thought justifies the calls.\n" +
         step_json;
}

std::string rephrase_accept_payload(const std::string& original, const std::string& candidate) {
  return "Original instruction:\n" + original + "\nCandidate rephrasing:\n" + candidate +
         "\nCan a model following only the rephrasing still satisfy the original exactly? "
         "Answer accept or reject.";
}

std::string rephrase_candidates_request(const std::string& instruction) {
  return "Propose diverse rephrasings of this task instruction, one per line:\n" + instruction;
}

// --- transports --------------------------------------------------------------------

MockTransport::MockTransport(Json recordings) : recordings_(std::move(recordings)) {
  if (!recordings_.is_object()) throw ConfigError("recordings must be a JSON object");
}

MockTransport MockTransport::from_file(const std::string& path) {
  return MockTransport(Json::parse(read_file(path)));
}

Json MockTransport::send(const Json& request) {
  auto digest = payload_digest(request.at("payload").get<std::string>());
  if (!recordings_.contains(digest))
    throw TransportError("MISSING_RECORDING: no recorded response for digest " + digest,
                         false);
  return recordings_.at(digest);
}

HttpTransport::HttpTransport(std::string endpoint, std::string token)
    : endpoint_(std::move(endpoint)), token_(std::move(token)) {}

std::unique_ptr<HttpTransport> HttpTransport::from_env() {
  const char* endpoint = std::getenv(kJudgeEndpointEnv);
  if (!endpoint || !*endpoint) return nullptr;
  const char* token = std::getenv(kJudgeTokenEnv);
  return std::make_unique<HttpTransport>(endpoint, token ? token : "");
}

Json HttpTransport::send(const Json& request) {
  httplib::Client client(endpoint_);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  auto res = client.Post("/judge", headers, request.dump(), "application/json");
  if (!res) throw TransportError("TRANSPORT_FAILURE: no response from " + endpoint_, true);
  if (res->status >= 500)
    throw TransportError("TRANSPORT_FAILURE: status " + std::to_string(res->status), true);
  if (res->status < 200 || res->status >= 300)
    throw TransportError("TRANSPORT_FAILURE: status " + std::to_string(res->status), false);
  Json parsed = Json::parse(res->body, nullptr, false);
  if (parsed.is_discarded())
    throw TransportError("TRANSPORT_FAILURE: non-JSON response body", false);
  return parsed;
}

// --- client ---------------------------------------------------------------------

JudgeClient::JudgeClient(Transport& transport, JudgeOptions options)
    : transport_(transport), options_(options) {
  if (options_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

Json JudgeClient::send_with_retry(const Json& request) {
  int attempts_left = options_.max_retries;
  while (true) {
    try {
      return transport_.send(request);
    } catch (const TransportError& e) {
      if (!e.transient() || attempts_left == 0) throw JudgeError(e.what());
      --attempts_left;
    }
  }
}

JudgeVerdict JudgeClient::judge(const JudgeRequest& req) {
  Json request = req.to_json();
  Json response = send_with_retry(request);
  if (!response.is_object()) throw JudgeError("MALFORMED_VERDICT: response is not an object");

  JudgeVerdict verdict;
  verdict.request_id = request.at("request_id").get<std::string>();
  if (response.contains("rationale")) {
    if (!response.at("rationale").is_string())
      throw JudgeError("MALFORMED_VERDICT: rationale must be a string");
    verdict.rationale = response.at("rationale").get<std::string>();
  }
  if (is_rating(req.kind)) {
    if (!response.contains("score") || !response.at("score").is_number())
      throw JudgeError("MALFORMED_VERDICT: rating response needs a numeric score");
    double score = response.at("score").get<double>();
    if (score < 1.0 || score > 5.0)
      throw JudgeError("MALFORMED_VERDICT: score " + std::to_string(score) +
                       " outside [1, 5]");
    verdict.score = score;
    verdict.decision = score >= options_.score_threshold ? Decision::Accept : Decision::Reject;
  } else {
    if (response.contains("score"))
      throw JudgeError("MALFORMED_VERDICT: score on a non-rating kind");
    if (!response.contains("decision") || !response.at("decision").is_string())
      throw JudgeError("MALFORMED_VERDICT: response needs a decision");
    auto decision = decision_from_string(response.at("decision").get<std::string>());
    if (!decision)
      throw JudgeError("MALFORMED_VERDICT: unknown decision " +
                       response.at("decision").dump());
    verdict.decision = *decision;
  }
  return verdict;
}

std::vector<std::variant<JudgeVerdict, std::string>> JudgeClient::batch_judge(
    const std::vector<JudgeRequest>& reqs, int parallelism) {
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  using Slot = std::variant<JudgeVerdict, std::string>;
  std::function<Slot(std::size_t)> one = [&](std::size_t i) -> Slot {
    try {
      return judge(reqs[i]);
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
  };
  auto slots = parallel_map<Slot>(reqs.size(), static_cast<std::size_t>(parallelism), one);
  if (!reqs.empty()) {
    bool all_failed = true;
    for (const auto& s : slots)
      if (std::holds_alternative<JudgeVerdict>(s)) all_failed = false;
    if (all_failed) throw JudgeError("batch_judge: every request failed");
  }
  return slots;
}

std::vector<std::string> JudgeClient::rephrase_candidates(const std::string& instruction) {
  Json request = Json::object();
  request["kind"] = "rephrase_candidates";
  request["payload"] = rephrase_candidates_request(instruction);
  request["request_id"] = payload_digest(request.at("payload").get<std::string>());
  Json response = send_with_retry(request);
  if (!response.is_object() || !response.contains("candidates") ||
      !response.at("candidates").is_array())
    throw JudgeError("MALFORMED_VERDICT: candidates response needs a candidates array");
  std::vector<std::string> out;
  for (const auto& c : response.at("candidates")) {
    if (!c.is_string()) throw JudgeError("MALFORMED_VERDICT: candidate must be a string");
    out.push_back(c.get<std::string>());
  }
  return out;
}

}  // namespace fcpipe::judge

// --- augment's rephrase hook lives here: it needs the full client type ------------

namespace fcpipe::augment {

std::vector<std::string> rephrase_hook(const std::string& task_instruction,
                                       judge::JudgeClient& client) {
  auto candidates = client.rephrase_candidates(task_instruction);
  std::vector<std::string> accepted;
  for (const auto& candidate : candidates) {
    judge::JudgeRequest req;
    req.kind = judge::JudgeKind::RephraseAccept;
    req.payload = judge::rephrase_accept_payload(task_instruction, candidate);
    auto verdict = client.judge(req);
    if (verdict.decision == judge::Decision::Accept) accepted.push_back(candidate);
  }
  return accepted;
}

}  // namespace fcpipe::augment
