#pragma once
// End-to-end corpus construction over seed manifests, split checks, leak
// checks and corpus statistics.
//
// Seed manifests are TSV lines "id<TAB>year<TAB>venue[<TAB>title]"; blank
// lines and lines starting with '#' are ignored.
//
// A paper universe is a directory in the S2 cache layout (records/, links/)
// plus optional GROBID output in tei/<id>.tei.xml.
//
// Corpus layout written by build_corpus:
//   manifest.json               run summary: created, config hash, input digests, per-seed status
//   generation_manifest.json    sampling parameters for candidate generation
//   stats.json                  corpus_stats over the successful seeds
//   splits/<split>.json         SplitManifest per split
//   sft/<split>.<variant>.jsonl SFT examples grouped by split
//   seeds/<id>/graph.json       subgraph, config hash, 2-hop reference ids and titles
//   seeds/<id>/prompt.graph.txt, prompt.plain.txt, sft.jsonl, seed.log
//   seeds/<id>/candidates.jsonl only when candidate generation is on

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "citedag/config.hpp"
#include "citedag/core_model.hpp"
#include "citedag/json_io.hpp"
#include "citedag/llm_gateway.hpp"
#include "citedag/s2_client.hpp"

namespace citedag {

class DatasetError : public Error {
 public:
  using Error::Error;
};

struct SeedEntry {
  PaperId id;
  int year = 0;
  std::string venue;
  std::string title;  // optional fourth column
  friend bool operator==(const SeedEntry&, const SeedEntry&) = default;
};

struct SplitManifest {
  std::string split;  // train | validation | test
  std::vector<SeedEntry> seeds;
  std::string created;
  std::string config_hash;
};

SplitManifest parse_seed_manifest(const std::string& text, const std::string& split);
SplitManifest load_seed_manifest(const std::filesystem::path& path, const std::string& split);
json to_json(const SplitManifest& manifest);

// Split invariants: no id in two splits, no duplicate within a split, and
// every test year strictly above every train year.
std::vector<std::string> validate_splits(const std::vector<SplitManifest>& splits);

struct TwoHopRef {
  PaperId id;
  std::string title;
};

struct SeedBuild {
  AnnotatedSubgraph graph;
  std::vector<TwoHopRef> two_hop;  // the expanded pool before the cone, sorted by id
  std::vector<std::string> log;
};

struct DatasetOptions {
  std::filesystem::path universe;
  std::shared_ptr<HttpTransport> transport;  // null: offline
  std::filesystem::path out_dir;
  bool generate_candidates = false;
  // Filled by the caller when known; recorded in manifest.json.
  std::map<std::string, std::string> input_digests;
  std::string created;  // timestamp, manifests only
};

class Universe {
 public:
  // Offline by default: records and links must already be in `root`. With a
  // transport, cache misses are fetched and stored under `root`.
  explicit Universe(const std::filesystem::path& root, std::shared_ptr<HttpTransport> transport = nullptr,
                    FetchPolicy policy = {});
  std::optional<PaperRecord> lookup(const PaperId& id);
  PaperRecord seed(const PaperId& id);
  std::optional<std::string> tei(const PaperId& id) const;
  S2Client& client() { return client_; }

 private:
  std::filesystem::path root_;
  S2Client client_;
};

struct Gateways {
  Gateway extractor;
  Gateway generator;
};

Gateways make_gateways(const PipelineConfig& config);

// Everything for one seed up to the annotated graph with ideas attached.
// Throws on seed-level failure.
SeedBuild build_seed(const SeedEntry& entry, Universe& universe, Gateway& extractor, const PipelineConfig& config);

struct SeedStatus {
  PaperId id;
  std::string split;
  bool ok = false;
  std::string error;
  std::size_t nodes = 0;
  std::size_t prompt_tokens = 0;
};

struct CorpusReport {
  std::vector<SeedStatus> seeds;
  std::size_t failures = 0;
  bool aborted = false;  // failure fraction above the configured budget
  std::vector<std::string> split_violations;
  std::size_t leak_violations = 0;
};

// Builds every seed of every split (split checks first; violations abort
// before any seed is built). Per-seed failures are logged and skipped; the
// failure budget is checked once all seeds have been attempted.
CorpusReport build_corpus(const std::vector<SplitManifest>& splits, const PipelineConfig& config,
                          const DatasetOptions& options);

// --- leak check ---

struct TrainGraph {
  AnnotatedSubgraph graph;
  std::vector<TwoHopRef> two_hop;
};

json graph_file_json(const SeedBuild& build, const std::string& config_hash);
TrainGraph train_graph_from_json(const json& j);

enum class LeakKind { kIdOverlap, kTitleOverlap, kTemporal };
std::string_view to_string(LeakKind kind);

struct LeakViolation {
  LeakKind kind;
  PaperId test_seed;
  std::string location;  // "train:<id> seed|node|two_hop" or "splits"
  std::string detail;
};

// One violation per (test seed, train seed), the id kind taking precedence,
// plus one temporal violation per test seed not newer than every train seed.
// Test titles come from the manifest's title column or `test_titles`.
std::vector<LeakViolation> leak_check(const SplitManifest& train, const SplitManifest& test,
                                      const std::vector<TrainGraph>& train_graphs,
                                      const std::map<PaperId, std::string>& test_titles = {});
json to_json(const LeakViolation& v);

// --- statistics ---

struct Distribution {
  std::size_t count = 0;
  double median = 0;
  double mean = 0;
  double max = 0;
  double min = 0;
};

Distribution describe(std::vector<double> values);

struct CorpusStats {
  std::size_t graphs = 0;
  Distribution nodes;
  Distribution edges;             // explicit + parallel + direct_to_seed
  Distribution predecessor_edges; // explicit + parallel
  double mean_explicit = 0;
  double mean_parallel = 0;
  double mean_direct = 0;
  Distribution prompt_tokens;
  std::size_t prompts_over_limit = 0;
};

// `prompt_tokens` aligns with `graphs`; pass an empty vector to skip.
CorpusStats corpus_stats(const std::vector<AnnotatedSubgraph>& graphs, const std::vector<std::size_t>& prompt_tokens,
                         int max_prompt_tokens);
json to_json(const CorpusStats& stats);

// Reads seeds/*/graph.json and prompt.graph.txt from a corpus directory, in id order.
struct LoadedCorpus {
  std::vector<TrainGraph> graphs;
  std::vector<std::size_t> prompt_tokens;
};
LoadedCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace citedag
