#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fcpipe/common.hpp"

namespace fcpipe::judge {

// ---------------------------------------------------------------------------
// External-judge interface for decisions the rule checks cannot make, with a
// deterministic recorded-response mock. The client never fabricates a
// verdict: a request the transport cannot answer is an error.
// ---------------------------------------------------------------------------

enum class JudgeKind { Grounding, TrajectoryRating, StepRating, RephraseAccept };
enum class Decision { Accept, Reject, Uncertain };

std::string to_string(JudgeKind k);
std::optional<JudgeKind> judge_kind_from_string(std::string_view s);
std::string to_string(Decision d);
std::optional<Decision> decision_from_string(std::string_view s);

bool is_rating(JudgeKind k);

struct JudgeRequest {
  JudgeKind kind = JudgeKind::Grounding;
  std::string payload;     // deterministically rendered context text
  std::string request_id;  // defaults to the payload digest when empty

  Json to_json() const;
};

struct JudgeVerdict {
  std::string request_id;
  Decision decision = Decision::Uncertain;
  std::optional<double> score;  // present iff the kind is a rating, in [1,5]
  std::string rationale;

  Json to_json() const;
};

/// Digest keying the recordings file: fnv1a64 of the payload text, as hex.
std::string payload_digest(std::string_view payload);

// --- payload templates (one per kind; wording is ours) ------------------------

std::string grounding_payload(const std::string& value_dump, const std::string& path,
                              const std::string& context_summary);
std::string trajectory_rating_payload(const std::string& trajectory_json);
std::string step_rating_payload(const std::string& step_json);
std::string rephrase_accept_payload(const std::string& original, const std::string& candidate);
std::string rephrase_candidates_request(const std::string& instruction);

// --- transport -----------------------------------------------------------------

class TransportError : public std::runtime_error {
 public:
  TransportError(std::string message, bool transient)
      : std::runtime_error(std::move(message)), transient_(transient) {}
  bool transient() const { return transient_; }

 private:
  bool transient_;
};

/// Byte-level channel to the judge. Implementations must be safe to call
/// from several batch workers at once.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Json send(const Json& request) = 0;  // throws TransportError
};

/// Replays canned responses keyed by payload digest. Requests without a
/// recording raise a non-transient MISSING_RECORDING error.
class MockTransport : public Transport {
 public:
  explicit MockTransport(Json recordings);
  static MockTransport from_file(const std::string& path);

  Json send(const Json& request) override;

 private:
  Json recordings_;
};

/// POSTs the request to $FCPIPE_JUDGE_ENDPOINT (plus optional bearer token
/// from $FCPIPE_JUDGE_TOKEN). Never used in mock mode; 5xx responses count
/// as transient.
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint, std::string token);
  static std::unique_ptr<HttpTransport> from_env();

  Json send(const Json& request) override;

 private:
  std::string endpoint_;
  std::string token_;
};

inline constexpr const char* kJudgeEndpointEnv = "FCPIPE_JUDGE_ENDPOINT";
inline constexpr const char* kJudgeTokenEnv = "FCPIPE_JUDGE_TOKEN";

// --- client ----------------------------------------------------------------------

struct JudgeOptions {
  double score_threshold = 3.0;  // rating >= threshold counts as accept
  int max_retries = 2;           // transient transport failures only
};

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgeClient {
 public:
  JudgeClient(Transport& transport, JudgeOptions options = {});

  /// One request, retrying transient transport failures up to the cap.
  /// Rating kinds require a numeric score in [1,5] in the response and
  /// derive the decision from the threshold; decision kinds require an
  /// explicit decision. Anything else is a MALFORMED_VERDICT error.
  JudgeVerdict judge(const JudgeRequest& req);

  /// Verdicts (or per-request error strings) in request order regardless of
  /// parallelism. Throws JudgeError only when every request failed.
  std::vector<std::variant<JudgeVerdict, std::string>> batch_judge(
      const std::vector<JudgeRequest>& reqs, int parallelism);

  /// Raw candidate fetch for the rephrase flow; acceptance filtering is the
  /// caller's job (see augment::rephrase_hook).
  std::vector<std::string> rephrase_candidates(const std::string& instruction);

  const JudgeOptions& options() const { return options_; }

 private:
  Transport& transport_;
  JudgeOptions options_;

  Json send_with_retry(const Json& request);
};

}  // namespace fcpipe::judge
