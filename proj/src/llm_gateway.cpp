#include "citedag/llm_gateway.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "citedag/serializer.hpp"
#include "citedag/util.hpp"

namespace citedag {

using nlohmann::json;

void validate_request(const ChatRequest& req) {
  if (req.num_samples < 1) throw InvalidArgument("num_samples must be at least 1");
  if (!(req.temperature >= 0)) throw InvalidArgument("temperature must be non-negative");
  if (!(req.top_p > 0 && req.top_p <= 1)) throw InvalidArgument("top_p must be in (0, 1]");
  if (req.max_output_tokens < 1) throw InvalidArgument("max_output_tokens must be positive");
}

namespace {

std::optional<BackendErrorKind> error_kind_from_string(std::string_view s) {
  if (s == "transient") return BackendErrorKind::kTransient;
  if (s == "timeout") return BackendErrorKind::kTimeout;
  if (s == "auth") return BackendErrorKind::kAuth;
  if (s == "malformed") return BackendErrorKind::kMalformed;
  if (s == "permanent") return BackendErrorKind::kPermanent;
  return std::nullopt;
}

std::vector<std::string> texts_of(const json& item, const std::string& where) {
  if (item.contains("text")) {
    if (!item["text"].is_string()) throw ConfigError(where + ": \"text\" must be a string");
    return {item["text"].get<std::string>()};
  }
  if (item.contains("texts")) {
    if (!item["texts"].is_array() || item["texts"].empty()) throw ConfigError(where + ": \"texts\" must be a non-empty array");
    std::vector<std::string> out;
    for (const auto& t : item["texts"]) {
      if (!t.is_string()) throw ConfigError(where + ": \"texts\" entries must be strings");
      out.push_back(t.get<std::string>());
    }
    return out;
  }
  throw ConfigError(where + ": needs \"text\" or \"texts\"");
}

std::vector<std::string> replicate(const std::vector<std::string>& texts, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(texts[static_cast<std::size_t>(i) % texts.size()]);
  return out;
}

}  // namespace

OpenAiBackend::OpenAiBackend(std::string base_url, std::string model, std::string api_key,
                             std::shared_ptr<HttpTransport> transport)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)), transport_(std::move(transport)) {
  if (!transport_) throw InvalidArgument("OpenAiBackend needs a transport");
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string OpenAiBackend::request_body(const std::string& model, const ChatRequest& req) {
  json body = {
      {"model", model},
      {"messages", json::array({{{"role", "system"}, {"content", req.system_prompt}},
                                {{"role", "user"}, {"content", req.user_prompt}}})},
      {"temperature", req.temperature},
      {"top_p", req.top_p},
      {"max_tokens", req.max_output_tokens},
      {"n", req.num_samples},
  };
  return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<std::string> OpenAiBackend::parse_response(const std::string& body, int expected) {
  std::vector<std::string> out;
  try {
    auto j = json::parse(body);
    for (const auto& choice : j.at("choices")) out.push_back(choice.at("message").at("content").get<std::string>());
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::kMalformed, std::string("malformed chat-completion response: ") + e.what());
  }
  if (static_cast<int>(out.size()) != expected)
    throw BackendError(BackendErrorKind::kMalformed, "expected " + std::to_string(expected) + " choices, got " +
                                                         std::to_string(out.size()));
  return out;
}

std::vector<std::string> OpenAiBackend::complete(const ChatRequest& req) {
  validate_request(req);
  HttpHeaders headers{{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  HttpResponse response;
  try {
    response = transport_->post(base_url_ + "/chat/completions", headers, request_body(model_, req));
  } catch (const TransportError& e) {
    throw BackendError(BackendErrorKind::kTimeout, e.what());
  }
  if (response.status == 401 || response.status == 403)
    throw BackendError(BackendErrorKind::kAuth, "chat endpoint rejected credentials (HTTP " + std::to_string(response.status) + ")");
  if (response.status == 429 || response.status >= 500)
    throw BackendError(BackendErrorKind::kTransient, "chat endpoint returned HTTP " + std::to_string(response.status));
  if (response.status != 200)
    throw BackendError(BackendErrorKind::kPermanent, "chat endpoint returned HTTP " + std::to_string(response.status));
  return parse_response(response.body, req.num_samples);
}

StubScript stub_script_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stub script is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("stub script must be a JSON object");
  StubScript script;
  if (j.contains("queue")) {
    for (std::size_t i = 0; i < j["queue"].size(); ++i) {
      const auto& item = j["queue"][i];
      const auto where = "stub queue entry " + std::to_string(i);
      StubEntry entry;
      if (item.contains("error")) {
        auto kind = item["error"].is_string() ? error_kind_from_string(item["error"].get<std::string>()) : std::nullopt;
        if (!kind) throw ConfigError(where + ": unknown error kind");
        entry.error = kind;
      } else {
        entry.texts = texts_of(item, where);
      }
      script.queue.push_back(std::move(entry));
    }
  }
  if (j.contains("rules")) {
    for (std::size_t i = 0; i < j["rules"].size(); ++i) {
      const auto& item = j["rules"][i];
      const auto where = "stub rule " + std::to_string(i);
      if (!item.contains("contains") || !item["contains"].is_string()) throw ConfigError(where + ": needs \"contains\"");
      script.rules.push_back({item["contains"].get<std::string>(), texts_of(item, where)});
    }
  }
  script.synthetic = j.value("synthetic", true);
  return script;
}

StubScript load_stub_script(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("stub script not found: " + path.string());
  return stub_script_from_json_text(read_file(path));
}

StubBackend::StubBackend(StubScript script, Synthesizer synthesize)
    : script_(std::move(script)), synthesize_(std::move(synthesize)) {}

std::size_t StubBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::vector<std::string> StubBackend::complete(const ChatRequest& req) {
  validate_request(req);
  std::optional<StubEntry> entry;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    if (next_ < script_.queue.size()) entry = script_.queue[next_++];
  }
  if (entry) {
    if (entry->error) throw BackendError(*entry->error, "scripted stub failure");
    return replicate(entry->texts, req.num_samples);
  }
  for (const auto& rule : script_.rules)
    if (req.user_prompt.find(rule.contains) != std::string::npos) return replicate(rule.texts, req.num_samples);
  if (!script_.synthetic || !synthesize_)
    throw BackendError(BackendErrorKind::kPermanent, "stub script has no reply for this request");
  std::vector<std::string> out;
  for (int i = 0; i < req.num_samples; ++i) out.push_back(synthesize_(req, i));
  return out;
}

namespace {

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (cur.size() > 3) words.push_back(cur);
      cur.clear();
    }
  }
  if (cur.size() > 3) words.push_back(cur);
  return words;
}

}  // namespace

std::string synthetic_idea_reply(const ChatRequest& req, int index) {
  auto words = content_words(req.user_prompt);
  if (words.empty()) words = {"placeholder"};
  const auto digest = sha256_hex(req.user_prompt + "#" + std::to_string(index));
  json out = json::object();
  std::size_t cursor = 0;
  const auto& names = FiveFieldIdea::field_names();
  for (std::size_t f = 0; f < names.size(); ++f) {
    std::string value;
    for (int w = 0; w < 12; ++w) {
      const auto pick = std::stoul(digest.substr((cursor++ % 28), 6), nullptr, 16);
      if (!value.empty()) value += ' ';
      value += words[(pick + static_cast<unsigned long>(w) * 7919UL + f * 104729UL) % words.size()];
    }
    out[names[f]] = value;
  }
  return out.dump();
}

std::string synthetic_judge_reply(const ChatRequest& req, int /*index*/) {
  const auto& p = req.user_prompt;
  const auto a = p.find("=== Idea A ===");
  const auto b = p.find("=== Idea B ===");
  const auto d = p.find("Dimensions: ");
  if (a == std::string::npos || b == std::string::npos || d == std::string::npos) return "{}";
  const auto text_a = p.substr(a + 14, b - a - 14);
  const auto text_b = p.substr(b + 14, d - b - 14);
  std::string dims = p.substr(d + 12, p.find('\n', d) - d - 12);
  json out = json::object();
  std::size_t start = 0;
  while (start <= dims.size()) {
    auto comma = dims.find(", ", start);
    auto dim = dims.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    // Position-independent preference, so both orderings agree.
    const auto ha = sha256_hex(dim + text_a).substr(0, 2);
    const auto hb = sha256_hex(dim + text_b).substr(0, 2);
    out[dim] = ha == hb ? "tie" : (ha < hb ? "A" : "B");
    if (comma == std::string::npos) break;
    start = comma + 2;
  }
  return out.dump();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry) : backend_(std::move(backend)), retry_(std::move(retry)) {
  if (!backend_) throw InvalidArgument("Gateway needs a backend");
  if (!retry_.sleep)
    retry_.sleep = [](double s) {
      if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
}

std::size_t Gateway::retries() const {
  std::lock_guard lock(mutex_);
  return retries_;
}

std::vector<std::string> Gateway::complete(const ChatRequest& req) {
  validate_request(req);
  for (int attempt = 0;; ++attempt) {
    try {
      auto out = backend_->complete(req);
      if (static_cast<int>(out.size()) != req.num_samples)
        throw BackendError(BackendErrorKind::kMalformed, "backend returned the wrong number of samples");
      return out;
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= retry_.max_retries) throw;
      {
        std::lock_guard lock(mutex_);
        ++retries_;
      }
      const double delay = retry_.initial_backoff_seconds * std::pow(2.0, attempt);
      spdlog::warn("LLM call failed ({}), retry {} in {:.2f}s", e.what(), attempt + 1, delay);
      retry_.sleep(delay);
    }
  }
}

std::shared_ptr<ChatBackend> make_backend(const LlmRoleConfig& cfg, Role role, std::shared_ptr<HttpTransport> transport) {
  if (cfg.backend == "openai") {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!transport) transport = make_http_transport(120);
    return std::make_shared<OpenAiBackend>(cfg.base_url, cfg.model, key ? key : "", std::move(transport));
  }
  if (cfg.backend == "stub") {
    StubScript script = cfg.stub_script.empty() ? StubScript{} : load_stub_script(cfg.stub_script);
    Synthesizer synth = role == Role::kJudge ? Synthesizer(synthetic_judge_reply) : Synthesizer(synthetic_idea_reply);
    return std::make_shared<StubBackend>(std::move(script), std::move(synth));
  }
  throw ConfigError("unknown LLM backend: " + cfg.backend);
}

Gateway make_gateway(const LlmRoleConfig& cfg, Role role, std::shared_ptr<HttpTransport> transport) {
  RetryPolicy retry;
  retry.max_retries = cfg.max_retries;
  if (cfg.backend == "stub") retry.sleep = [](double) {};
  return Gateway(make_backend(cfg, role, std::move(transport)), retry);
}

namespace {

// Body of the first ``` fence if any, otherwise the text itself, then cut
// to the outermost braces.
std::string json_candidate(const std::string& reply) {
  std::string body = reply;
  if (auto open = reply.find("```"); open != std::string::npos) {
    auto line_end = reply.find('\n', open);
    auto close = line_end == std::string::npos ? std::string::npos : reply.find("```", line_end);
    if (close != std::string::npos) body = reply.substr(line_end + 1, close - line_end - 1);
  }
  auto first = body.find('{');
  auto last = body.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) return body;
  return body.substr(first, last - first + 1);
}

}  // namespace

FiveFieldIdea parse_idea_reply(const std::string& reply) {
  json j;
  try {
    j = json::parse(json_candidate(reply));
  } catch (const json::exception& e) {
    throw ExtractionFailure(std::string("reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ExtractionFailure("reply JSON is not an object");
  const auto& names = FiveFieldIdea::field_names();
  for (const auto& [key, value] : j.items())
    if (std::ranges::find(names, key) == names.end()) throw ExtractionFailure("unexpected key \"" + key + "\"");
  std::vector<std::string> values;
  for (const auto& name : names) {
    if (!j.contains(name)) throw ExtractionFailure("missing key \"" + name + "\"");
    if (!j[name].is_string() || trim(j[name].get<std::string>()).empty())
      throw ExtractionFailure("key \"" + name + "\" must be a non-empty string");
    values.push_back(j[name].get<std::string>());
  }
  return {values[0], values[1], values[2], values[3], values[4]};
}

const std::string& extractor_system_prompt() {
  static const std::string prompt =
      "You read the introduction and method sections of a research paper and summarise its core idea.\n"
      "Reply with a single JSON object and nothing else. It must have exactly these string keys:\n"
      "\"Problem\", \"Existing Methods\", \"Motivation\", \"Proposed Method\", \"Experiment Plan\".\n"
      "Problem: the question the paper addresses. Existing Methods: prior approaches and their limits.\n"
      "Motivation: the insight that suggests a better approach. Proposed Method: what the paper does.\n"
      "Experiment Plan: how the paper tests it. Each value is a few plain sentences.";
  return prompt;
}

FiveFieldIdea extract_idea(Gateway& gateway, const std::string& paper_text) {
  if (trim(paper_text).empty()) throw InvalidArgument("extract_idea needs non-empty paper text");
  ChatRequest req{extractor_system_prompt(), paper_text, 0.0, 1.0, 2048, 1};
  const auto first = gateway.complete(req).front();
  try {
    return parse_idea_reply(first);
  } catch (const ExtractionFailure& e) {
    spdlog::info("idea extraction reply rejected ({}), asking for a repair", e.what());
    ChatRequest repair = req;
    repair.user_prompt = paper_text + "\n\nYour previous reply could not be used (" + e.what() +
                         "). Previous reply:\n" + first +
                         "\n\nReply again with only the JSON object with the five required keys.";
    const auto second = gateway.complete(repair).front();
    try {
      return parse_idea_reply(second);
    } catch (const ExtractionFailure& again) {
      throw ExtractionFailure(std::string("idea extraction failed after repair: ") + again.what());
    }
  }
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kWinA: return "A";
    case Outcome::kTie: return "tie";
    case Outcome::kWinB: return "B";
  }
  return "tie";
}

const std::string& judge_system_prompt() {
  static const std::string prompt =
      "You are an expert reviewer comparing two research ideas written for the same seed paper context.\n"
      "For each listed dimension decide which idea is better: \"A\", \"B\", or \"tie\" when neither is.\n"
      "Judge the content only; the order of presentation carries no information.\n"
      "Reply with a single JSON object mapping every dimension name to \"A\", \"B\" or \"tie\".";
  return prompt;
}

namespace {

constexpr std::string_view kJudgeUserTemplate =
    "Seed context:\n{context}\n\n=== Idea A ===\n{a}\n=== Idea B ===\n{b}\nDimensions: {dimensions}\n"
    "Reply with the JSON verdict.\n";

}  // namespace

std::string judge_user_prompt(const std::string& seed_context, const FiveFieldIdea& a, const FiveFieldIdea& b,
                              const std::vector<std::string>& dimensions) {
  std::string dims;
  for (std::size_t i = 0; i < dimensions.size(); ++i) dims += (i ? ", " : "") + dimensions[i];
  std::string out(kJudgeUserTemplate);
  auto fill = [&out](std::string_view slot, const std::string& value) {
    out.replace(out.find(slot), slot.size(), value);
  };
  // Fill the idea slots last so text inside the context cannot shadow them.
  fill("{dimensions}", dims);
  fill("{b}", render_target(b));
  fill("{a}", render_target(a));
  fill("{context}", seed_context);
  return out;
}

std::string judge_template_hash() {
  return sha256_hex(judge_system_prompt() + "\n--\n" + std::string(kJudgeUserTemplate));
}

std::vector<Outcome> parse_verdict(const std::string& reply, const std::vector<std::string>& dimensions) {
  json j;
  try {
    j = json::parse(json_candidate(reply));
  } catch (const json::exception& e) {
    throw ExtractionFailure(std::string("verdict is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ExtractionFailure("verdict is not an object");
  std::vector<Outcome> out;
  for (const auto& dim : dimensions) {
    if (!j.contains(dim) || !j[dim].is_string()) throw ExtractionFailure("verdict lacks dimension " + dim);
    const auto v = to_lower_ascii(trim(j[dim].get<std::string>()));
    if (v == "a") out.push_back(Outcome::kWinA);
    else if (v == "b") out.push_back(Outcome::kWinB);
    else if (v == "tie") out.push_back(Outcome::kTie);
    else throw ExtractionFailure("verdict value for " + dim + " is not A, B or tie");
  }
  return out;
}

JudgeVerdict judge_pair(Gateway& gateway, const std::string& seed_context, const FiveFieldIdea& a,
                        const FiveFieldIdea& b, const std::vector<std::string>& dimensions) {
  if (!a.is_valid() || !b.is_valid()) throw InvalidArgument("judge_pair needs two valid ideas");
  ChatRequest req{judge_system_prompt(), judge_user_prompt(seed_context, a, b, dimensions), 0.0, 1.0, 512, 1};
  JudgeVerdict verdict;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      verdict.outcomes = parse_verdict(gateway.complete(req).front(), dimensions);
      return verdict;
    } catch (const ExtractionFailure& e) {
      problem = e.what();
    } catch (const BackendError& e) {
      problem = e.what();
      break;
    }
  }
  spdlog::warn("judge abstained: {}", problem);
  verdict.outcomes.assign(dimensions.size(), Outcome::kTie);
  verdict.abstained = true;
  verdict.note = problem;
  return verdict;
}

ChatRequest generation_request(const std::string& prompt, const SamplingConfig& sampling) {
  return ChatRequest{"", prompt, sampling.temperature, sampling.top_p, 2048, sampling.num_candidates};
}

std::vector<CandidateAttempt> generate_candidates(Gateway& gateway, const std::string& prompt,
                                                  const SamplingConfig& sampling) {
  const auto replies = gateway.complete(generation_request(prompt, sampling));
  std::vector<CandidateAttempt> out;
  for (const auto& raw : replies) {
    CandidateAttempt attempt;
    attempt.raw = raw;
    try {
      attempt.idea = parse_idea_reply(raw);
    } catch (const ExtractionFailure& e) {
      attempt.error = e.what();
    }
    out.push_back(std::move(attempt));
  }
  return out;
}

}  // namespace citedag
