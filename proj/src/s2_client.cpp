#include "citedag/s2_client.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <thread>
#include <unordered_set>

#include "citedag/json_io.hpp"
#include "citedag/util.hpp"

namespace citedag {

namespace fs = std::filesystem;

Timing Timing::real() {
  return Timing{
      [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
      },
      [](double seconds) {
        if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
      },
  };
}

RateLimiter::RateLimiter(double requests_per_second, Timing timing)
    : interval_(requests_per_second > 0 ? 1.0 / requests_per_second : 0.0), timing_(std::move(timing)) {
  if (!(requests_per_second > 0)) throw InvalidArgument("requests_per_second must be positive");
}

void RateLimiter::acquire() {
  std::lock_guard lock(mutex_);
  double now = timing_.now();
  if (next_allowed_ && now < *next_allowed_) {
    timing_.sleep(*next_allowed_ - now);
    now = *next_allowed_;
  }
  next_allowed_ = now + interval_;
}

PaperRecord with_citation_link(PaperRecord record, const CitationLink& link) {
  record.is_influential = link.is_influential;
  record.contexts = link.contexts;
  return record;
}

std::string cache_file_name(const PaperId& id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id.str()) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  if (out == "." || out == "..") out = "%2E" + out.substr(1);
  return out + ".json";
}

PaperRecord record_from_s2_json(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw FetchError(std::string("malformed Semantic Scholar response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("paperId") || !j["paperId"].is_string())
    throw FetchError("Semantic Scholar response lacks paperId");
  PaperRecord r;
  r.id = PaperId(j["paperId"].get<std::string>());
  auto str = [&](const char* key) {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string();
  };
  r.title = str("title");
  r.venue = str("venue");
  r.abstract_text = str("abstract");
  if (j.contains("year") && j["year"].is_number_integer()) r.year = j["year"].get<int>();
  if (j.contains("citationCount") && j["citationCount"].is_number_unsigned())
    r.global_cite_count = j["citationCount"].get<std::uint64_t>();
  if (j.contains("authors") && j["authors"].is_array())
    for (const auto& a : j["authors"])
      if (a.contains("name") && a["name"].is_string()) r.authors.push_back(a["name"].get<std::string>());
  std::unordered_set<std::string> seen;
  if (j.contains("references") && j["references"].is_array()) {
    for (const auto& ref : j["references"]) {
      if (!ref.contains("paperId") || !ref["paperId"].is_string()) continue;
      auto id = ref["paperId"].get<std::string>();
      if (id.empty() || id == r.id.str() || !seen.insert(id).second) continue;
      r.reference_ids.emplace_back(std::move(id));
    }
  }
  return r;
}

std::vector<CitationLink> links_from_s2_json(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw FetchError(std::string("malformed Semantic Scholar response: ") + e.what());
  }
  std::vector<CitationLink> links;
  if (!j.contains("data") || !j["data"].is_array()) throw FetchError("references response lacks data");
  for (const auto& item : j["data"]) {
    const auto& cited = item.contains("citedPaper") ? item["citedPaper"] : json();
    if (!cited.is_object() || !cited.contains("paperId") || !cited["paperId"].is_string()) continue;
    CitationLink link{PaperId(cited["paperId"].get<std::string>()), false, {}};
    if (item.contains("isInfluential") && item["isInfluential"].is_boolean())
      link.is_influential = item["isInfluential"].get<bool>();
    if (item.contains("contexts") && item["contexts"].is_array())
      for (const auto& c : item["contexts"])
        if (c.is_string()) link.contexts.push_back(c.get<std::string>());
    links.push_back(std::move(link));
  }
  return links;
}

std::string links_to_canonical_json(const std::vector<CitationLink>& links) {
  json out = json::array();
  for (const auto& l : links)
    out.push_back({{"target", l.target.str()}, {"is_influential", l.is_influential}, {"contexts", l.contexts}});
  return canonical_dump(out);
}

std::vector<CitationLink> links_from_canonical_json(const std::string& text) {
  std::vector<CitationLink> links;
  try {
    for (const auto& item : json::parse(text)) {
      links.push_back({PaperId(item.at("target").get<std::string>()), item.value("is_influential", false),
                       item.value("contexts", std::vector<std::string>{})});
    }
  } catch (const json::exception& e) {
    throw FetchError(std::string("corrupt citation-link cache entry: ") + e.what());
  }
  return links;
}

S2Client::S2Client(FetchPolicy policy, std::shared_ptr<HttpTransport> transport, Timing timing)
    : policy_(std::move(policy)),
      transport_(std::move(transport)),
      timing_(timing),
      limiter_(policy_.requests_per_second, timing) {
  if (!policy_.offline_only && !transport_) throw InvalidArgument("online S2Client needs a transport");
}

std::size_t S2Client::network_calls() const {
  std::lock_guard lock(mutex_);
  return network_calls_;
}

PaperRecord S2Client::fetch_record(const PaperId& id) {
  if (id.empty()) throw InvalidArgument("fetch_record needs a non-empty id");
  const auto file = policy_.cache_dir / "records" / cache_file_name(id);
  const auto url = policy_.base_url + "/paper/" + id.str() +
                   "?fields=title,year,venue,authors,abstract,citationCount,references.paperId";
  const auto text = get_or_fetch(
      file, url, [](const std::string& body) { return canonical_dump(to_json(record_from_s2_json(body))); },
      "paper " + id.str());
  try {
    return record_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw FetchError("corrupt cache entry " + file.string() + ": " + e.what());
  }
}

std::vector<CitationLink> S2Client::fetch_citation_links(const PaperId& seed) {
  const auto file = policy_.cache_dir / "links" / cache_file_name(seed);
  const auto url =
      policy_.base_url + "/paper/" + seed.str() + "/references?fields=paperId,contexts,isInfluential&limit=1000";
  const auto text = get_or_fetch(
      file, url, [](const std::string& body) { return links_to_canonical_json(links_from_s2_json(body)); },
      "references of " + seed.str());
  return links_from_canonical_json(text);
}

std::string S2Client::get_or_fetch(const fs::path& cache_file, const std::string& url,
                                   const std::function<std::string(const std::string&)>& to_canonical,
                                   const std::string& what) {
  if (fs::exists(cache_file)) return read_file(cache_file);
  if (policy_.offline_only) throw CacheMissError("offline mode: no cached entry for " + what);

  std::promise<std::string> promise;
  std::shared_future<std::string> future;
  bool owner = false;
  {
    std::lock_guard lock(mutex_);
    if (auto it = in_flight_.find(cache_file); it != in_flight_.end()) {
      future = it->second;
    } else {
      if (fs::exists(cache_file)) return read_file(cache_file);
      future = promise.get_future().share();
      in_flight_.emplace(cache_file, future);
      owner = true;
    }
  }
  if (!owner) return future.get();

  try {
    auto canonical = to_canonical(request(url, what));
    write_file(cache_file, canonical);
    promise.set_value(std::move(canonical));
  } catch (...) {
    promise.set_exception(std::current_exception());
  }
  {
    std::lock_guard lock(mutex_);
    in_flight_.erase(cache_file);
  }
  return future.get();
}

std::string S2Client::request(const std::string& url, const std::string& what) {
  HttpHeaders headers;
  if (const char* key = std::getenv(policy_.api_key_env.c_str()); key && *key) headers.emplace_back("x-api-key", key);

  bool last_was_rate_limit = false;
  std::string last_problem;
  for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = policy_.backoff_initial_seconds * std::pow(2.0, attempt - 1);
      spdlog::warn("retrying {} in {:.1f}s ({})", what, delay, last_problem);
      timing_.sleep(delay);
    }
    limiter_.acquire();
    {
      std::lock_guard lock(mutex_);
      ++network_calls_;
    }
    try {
      const auto response = transport_->get(url, headers);
      if (response.status == 200) return response.body;
      if (response.status == 404) throw NotFoundError("Semantic Scholar has no record for " + what);
      if (response.status == 429 || response.status >= 500) {
        last_was_rate_limit = response.status == 429;
        last_problem = "HTTP " + std::to_string(response.status);
        continue;
      }
      throw FetchError("HTTP " + std::to_string(response.status) + " fetching " + what);
    } catch (const TransportError& e) {
      last_was_rate_limit = false;
      last_problem = e.what();
    }
  }
  if (last_was_rate_limit) throw RateLimitError("rate limited fetching " + what + " after retries");
  throw NetworkError("giving up on " + what + ": " + last_problem);
}

std::set<PaperId> mine_predecessors(const PaperRecord& ref, const std::set<PaperId>& seed_ref_set) {
  std::set<PaperId> out;
  for (const auto& id : ref.reference_ids)
    if (id != ref.id && seed_ref_set.contains(id)) out.insert(id);
  return out;
}

}  // namespace citedag
