#pragma once
// Seed paper -> annotated citation DAG.
//
// Stages: 2-hop expansion, strict temporal cone, two ranking passes (the
// second adds a sibling boost for papers many top-ranked candidates list as
// predecessors), budgeted top-K selection, predecessor edge
// classification, cycle breaking and per-node feature annotation.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "citedag/config.hpp"
#include "citedag/core_model.hpp"
#include "citedag/tei_parser.hpp"

namespace citedag {

class EmptySubgraphError : public Error {
 public:
  using Error::Error;
};

// Returns nullopt for papers that cannot be retrieved.
using RecordLookup = std::function<std::optional<PaperRecord>(const PaperId&)>;

struct Candidate {
  PaperRecord record;
  int layer_depth = 1;
  std::uint64_t cite_count = 0;  // seed-internal citation frequency
  ScoreComponents components;    // s_cite, s_sec, s_infl, s_sib
  std::set<PaperId> predecessors_in_pool;
  double pass1 = 0.0;
  double pass2 = 0.0;
};

struct Expansion {
  std::vector<PaperRecord> records;  // sorted by id, seed excluded
  std::map<PaperId, int> layer;      // 1 = direct reference, 2 = reference of a reference
  std::vector<PaperId> skipped;      // unretrievable ids, in discovery order
};

// R(v) ∪ {r' ∈ R(r) : r ∈ R(v)}. Unretrievable papers are skipped.
Expansion expand_two_hop(const PaperRecord& seed, const RecordLookup& fetch);

// Keeps members whose known year is strictly below seed_year.
std::vector<PaperRecord> apply_temporal_cone(std::vector<PaperRecord> pool, int seed_year);

// min(cap, max(floor, ceil(fraction * num_seed_refs))).
int compute_budget(std::size_t num_seed_refs, const BudgetConfig& budget = {});

double score_pass1(const Candidate& c, const Pass1Weights& w = {});
double score_pass2(const Candidate& c, const Pass2Weights& w = {});

// Fraction of `top_k1` (normalised by k) that lists r as a predecessor.
double sibling_boost(const Candidate& r, std::span<const Candidate> top_k1, int k);

enum class RankBy { kPass1, kPass2 };

// The k best candidates by score; ties by higher s_cite, then smaller id.
std::vector<Candidate> select_top_k(std::vector<Candidate> scored, std::size_t k, RankBy by = RankBy::kPass2);

// Component scores for a pool. s_cite is the seed-internal count divided by
// the pool maximum, s_sec the weight of the best citing section; layer-2
// papers have neither. Predecessors are the paper's references that are in
// the seed's reference list and in the pool.
std::vector<Candidate> make_candidates(const std::vector<PaperRecord>& pool, const std::map<PaperId, int>& layer,
                                       const std::set<PaperId>& seed_refs,
                                       const std::map<PaperId, CitationStats>& profile, const PipelineConfig& config);

// Nodes in (year, id) order. A listed predecessor of the same year becomes
// parallel_pred, an older one explicit_pred; a younger one cannot precede
// and is dropped. Layer depth and scores are carried over from the candidates.
std::vector<SubgraphNode> classify_edges(const std::vector<Candidate>& selected);

struct RemovedEdge {
  PaperId from;  // the predecessor
  PaperId to;    // the node that listed it
  friend bool operator==(const RemovedEdge&, const RemovedEdge&) = default;
};

struct CycleBreakReport {
  std::vector<RemovedEdge> two_cycle_edges;
  std::vector<RemovedEdge> long_cycle_edges;
};

// Mutual pairs lose the edge out of the node with lower s_cite (equal s_cite:
// out of the larger id). Any remaining cycle, found by depth-first search in
// node order, loses the edge out of its weakest member under the same rule,
// until the predecessor relation is acyclic.
std::vector<SubgraphNode> break_cycles(std::vector<SubgraphNode> nodes, CycleBreakReport* report = nullptr);

// Fills the eight seed-relation features. Layer-2 nodes and layer-1 nodes
// missing from the profile get no sections, cite_count 0, low_confidence.
std::vector<SubgraphNode> annotate_features(std::vector<SubgraphNode> nodes, const PaperRecord& seed,
                                            const std::map<PaperId, CitationStats>& profile,
                                            const PipelineConfig& config);

struct BuildTrace {
  std::size_t num_seed_refs = 0;
  std::size_t expanded = 0;
  std::size_t after_cone = 0;  // cone survivors among the ranked set's input or output
  std::size_t selected = 0;    // top-K result before classification
  int budget = 0;
  std::vector<PaperId> skipped;
  CycleBreakReport cycles;
  std::vector<std::string> log;
};

struct BuildResult {
  AnnotatedSubgraph graph;
  BuildTrace trace;
};

// Full composition. Throws EmptySubgraphError when nothing survives.
BuildResult build(const PaperRecord& seed, const RecordLookup& fetch,
                  const std::map<PaperId, CitationStats>& profile, const PipelineConfig& config);

}  // namespace citedag
