#pragma once
// One client for every LLM role: idea extraction, pairwise judging and
// candidate generation, over an OpenAI-compatible chat-completion endpoint or
// a scripted offline stub.
//
// Stub script format (JSON file):
//   {
//     "queue": [                      consumed one entry per complete() call
//       {"text": "..."},              same reply for every sample
//       {"texts": ["...", "..."]},    one reply per sample (cycled if short)
//       {"error": "transient"}        transient | timeout | auth | malformed | permanent
//     ],
//     "rules": [                      used once the queue is empty; first match wins
//       {"contains": "substring of the user prompt", "text": "..."}
//     ],
//     "synthetic": true               otherwise fall back to a deterministic
//   }                                 reply derived from the prompt

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "citedag/config.hpp"
#include "citedag/core_model.hpp"
#include "citedag/http.hpp"

namespace citedag {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_output_tokens = 1024;
  int num_samples = 1;
};

// Throws InvalidArgument when a field is out of range.
void validate_request(const ChatRequest& req);

enum class BackendErrorKind { kTransient, kTimeout, kAuth, kMalformed, kPermanent };

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  BackendErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == BackendErrorKind::kTransient || kind_ == BackendErrorKind::kTimeout; }

 private:
  BackendErrorKind kind_;
};

class ExtractionFailure : public Error {
 public:
  using Error::Error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Exactly req.num_samples completions, or a BackendError.
  virtual std::vector<std::string> complete(const ChatRequest& req) = 0;
};

class OpenAiBackend final : public ChatBackend {
 public:
  OpenAiBackend(std::string base_url, std::string model, std::string api_key, std::shared_ptr<HttpTransport> transport);
  std::vector<std::string> complete(const ChatRequest& req) override;

  // Request body and response parsing, exposed for wire-format tests.
  static std::string request_body(const std::string& model, const ChatRequest& req);
  static std::vector<std::string> parse_response(const std::string& body, int expected);

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  std::shared_ptr<HttpTransport> transport_;
};

struct StubEntry {
  std::vector<std::string> texts;
  std::optional<BackendErrorKind> error;
};

struct StubRule {
  std::string contains;
  std::vector<std::string> texts;
};

struct StubScript {
  std::vector<StubEntry> queue;
  std::vector<StubRule> rules;
  bool synthetic = true;
};

StubScript load_stub_script(const std::filesystem::path& path);
StubScript stub_script_from_json_text(const std::string& text);

// Produces sample `index` for a request when nothing scripted applies.
using Synthesizer = std::function<std::string(const ChatRequest&, int index)>;

class StubBackend final : public ChatBackend {
 public:
  explicit StubBackend(StubScript script, Synthesizer synthesize = {});
  std::vector<std::string> complete(const ChatRequest& req) override;
  std::size_t calls() const;

 private:
  StubScript script_;
  Synthesizer synthesize_;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
};

// Deterministic replies used by the stub when synthetic fallback is on.
std::string synthetic_idea_reply(const ChatRequest& req, int index);
std::string synthetic_judge_reply(const ChatRequest& req, int index);

struct RetryPolicy {
  int max_retries = 3;
  double initial_backoff_seconds = 0.5;
  std::function<void(double)> sleep;  // empty: real sleep
};

// Retries retryable BackendErrors with exponential backoff.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {});

  std::vector<std::string> complete(const ChatRequest& req);

  // Attempts beyond the first, summed over all complete() calls.
  std::size_t retries() const;

 private:
  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy retry_;
  mutable std::mutex mutex_;
  std::size_t retries_ = 0;
};

enum class Role { kExtractor, kJudge, kGenerator };

// Builds the backend named in the role config. Stub backends read
// cfg.stub_script when set and synthesize role-appropriate replies otherwise.
std::shared_ptr<ChatBackend> make_backend(const LlmRoleConfig& cfg, Role role,
                                          std::shared_ptr<HttpTransport> transport = nullptr);
Gateway make_gateway(const LlmRoleConfig& cfg, Role role, std::shared_ptr<HttpTransport> transport = nullptr);

// Pulls the JSON object out of a reply (code fences and surrounding prose
// are ignored) and validates it against the five-field schema: exactly the
// five keys, each a non-empty string. Throws ExtractionFailure.
FiveFieldIdea parse_idea_reply(const std::string& reply);

const std::string& extractor_system_prompt();

// One call, plus one repair call when the reply does not parse.
FiveFieldIdea extract_idea(Gateway& gateway, const std::string& paper_text);

enum class Outcome { kWinA, kTie, kWinB };
std::string_view to_string(Outcome outcome);

struct JudgeVerdict {
  std::vector<Outcome> outcomes;  // aligned with the configured dimensions
  bool abstained = false;
  std::string note;
};

const std::string& judge_system_prompt();
std::string judge_user_prompt(const std::string& seed_context, const FiveFieldIdea& a, const FiveFieldIdea& b,
                              const std::vector<std::string>& dimensions);
// sha256 of the judge template (system prompt plus the user prompt skeleton).
std::string judge_template_hash();

// Parses {"<dimension>": "A" | "B" | "tie", ...}; throws ExtractionFailure.
std::vector<Outcome> parse_verdict(const std::string& reply, const std::vector<std::string>& dimensions);

// One call for the ordered presentation; a malformed reply gets one retry,
// after which (or on backend failure) every dimension is a flagged tie.
JudgeVerdict judge_pair(Gateway& gateway, const std::string& seed_context, const FiveFieldIdea& a,
                        const FiveFieldIdea& b, const std::vector<std::string>& dimensions);

struct CandidateAttempt {
  std::optional<FiveFieldIdea> idea;
  std::string raw;
  std::string error;  // empty when idea is set
};

// Exactly sampling.num_samples attempts; unparseable samples stay as failures.
std::vector<CandidateAttempt> generate_candidates(Gateway& gateway, const std::string& prompt,
                                                  const SamplingConfig& sampling = {});
ChatRequest generation_request(const std::string& prompt, const SamplingConfig& sampling);

}  // namespace citedag
