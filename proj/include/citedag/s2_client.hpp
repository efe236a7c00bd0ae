#pragma once
// Semantic Scholar Graph API client with an on-disk JSON cache, a request
// rate limiter, retry with exponential backoff and a fully offline mode.
//
// Cache layout (the offline fixture directories use the same layout):
//   <cache_dir>/records/<id>.json   one PaperRecord, canonical JSON
//   <cache_dir>/links/<id>.json     the paper's outgoing citation links
// Ids are percent-encoded outside [A-Za-z0-9._-] to form file names.

#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "citedag/core_model.hpp"
#include "citedag/http.hpp"

namespace citedag {

class FetchError : public Error {
 public:
  using Error::Error;
};
class NotFoundError : public FetchError {
 public:
  using FetchError::FetchError;
};
class CacheMissError : public FetchError {
 public:
  using FetchError::FetchError;
};
class RateLimitError : public FetchError {
 public:
  using FetchError::FetchError;
};
class NetworkError : public FetchError {
 public:
  using FetchError::FetchError;
};

struct FetchPolicy {
  double requests_per_second = 1.0;
  int max_retries = 4;
  std::filesystem::path cache_dir = "s2_cache";
  bool offline_only = false;
  std::string base_url = "https://api.semanticscholar.org/graph/v1";
  std::string api_key_env = "S2_API_KEY";
  double backoff_initial_seconds = 1.0;
};

// Injectable time source so limiter and backoff are testable without sleeping.
struct Timing {
  std::function<double()> now;          // seconds, monotonic
  std::function<void(double)> sleep;    // seconds
  static Timing real();
};

// Token bucket with a burst of one: consecutive grants are at least
// 1/rate seconds apart.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Timing timing = Timing::real());
  void acquire();

 private:
  double interval_;
  Timing timing_;
  std::mutex mutex_;
  std::optional<double> next_allowed_;
};

// Citation-pair properties of "seed cites target".
struct CitationLink {
  PaperId target;
  bool is_influential = false;
  std::vector<std::string> contexts;
  friend bool operator==(const CitationLink&, const CitationLink&) = default;
};

// Copies the seed-relative influential flag and contexts onto a record.
PaperRecord with_citation_link(PaperRecord record, const CitationLink& link);

class S2Client {
 public:
  // `transport` may be null when policy.offline_only is set.
  S2Client(FetchPolicy policy, std::shared_ptr<HttpTransport> transport, Timing timing = Timing::real());

  // Cache first; on a miss fetches, stores the canonical JSON and returns the
  // record parsed back from the stored bytes. Concurrent callers asking for
  // the same id share one fetch.
  PaperRecord fetch_record(const PaperId& id);
  std::vector<CitationLink> fetch_citation_links(const PaperId& seed);

  std::size_t network_calls() const;
  const FetchPolicy& policy() const noexcept { return policy_; }

 private:
  std::string get_or_fetch(const std::filesystem::path& cache_file, const std::string& url,
                           const std::function<std::string(const std::string&)>& to_canonical,
                           const std::string& what);
  std::string request(const std::string& url, const std::string& what);

  FetchPolicy policy_;
  std::shared_ptr<HttpTransport> transport_;
  Timing timing_;
  RateLimiter limiter_;
  mutable std::mutex mutex_;
  std::map<std::filesystem::path, std::shared_future<std::string>> in_flight_;
  std::size_t network_calls_ = 0;
};

std::string cache_file_name(const PaperId& id);

// Converts one Graph API paper object into a record (null reference ids,
// duplicates and self references are dropped).
PaperRecord record_from_s2_json(const std::string& body);
std::vector<CitationLink> links_from_s2_json(const std::string& body);
std::string links_to_canonical_json(const std::vector<CitationLink>& links);
std::vector<CitationLink> links_from_canonical_json(const std::string& text);

// ref.reference_ids ∩ seed_ref_set, never containing ref.id.
std::set<PaperId> mine_predecessors(const PaperRecord& ref, const std::set<PaperId>& seed_ref_set);

}  // namespace citedag
