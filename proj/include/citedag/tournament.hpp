#pragma once
// Round-robin pairwise judging over a seed set.
//
// Every ordered pair (A, B) of distinct methods is judged once per seed, so
// each unordered pair is seen in both presentation orders. Per dimension the
// first-listed method gets 2/1/0 points for win/tie/loss and the other the
// complement, hence 5 dims x 2 orders x 2 points = 20 points per pair and
// seed. "Mean Elo" is the per-seed point total averaged over seeds; no
// rating updates are involved.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "citedag/core_model.hpp"
#include "citedag/llm_gateway.hpp"

namespace citedag {

class TournamentError : public Error {
 public:
  using Error::Error;
};

struct MethodEntry {
  std::string name;
  std::map<PaperId, FiveFieldIdea> ideas;
};

// Idea files are JSONL: {"seed_id": "...", "idea": {five keys}} per line.
MethodEntry load_method_entry(const std::string& name, const std::filesystem::path& path);

using JudgeFn = std::function<JudgeVerdict(const PaperId& seed, const FiveFieldIdea& a, const FiveFieldIdea& b)>;

struct PairCell {
  PaperId seed;
  std::string first;
  std::string second;
  std::vector<Outcome> outcomes;
  bool abstained = false;
};

struct TournamentLedger {
  std::vector<std::string> dimensions;
  std::vector<std::string> methods;  // sorted
  std::vector<PaperId> seeds;        // sorted
  std::vector<PairCell> cells;       // sorted by (seed, first, second)
  std::string judge_template_hash;
};

struct RoundRobinOptions {
  std::vector<std::string> dimensions = {"novelty", "significance", "feasibility", "clarity", "effectiveness"};
  int workers = 1;
  std::string judge_template_hash;
};

// Throws TournamentError on fewer than two methods, duplicate names, an
// empty seed list or a method missing a seed.
TournamentLedger run_round_robin(const std::vector<MethodEntry>& methods, const std::vector<PaperId>& seeds,
                                 const JudgeFn& judge, const RoundRobinOptions& options = {});

struct Wtl {
  double win = 0.0;
  double tie = 0.0;
  double loss = 0.0;
};

struct PairSummary {
  std::string a;  // a < b
  std::string b;
  std::vector<Wtl> per_dimension;  // from a's point of view
  double mean_margin = 0.0;         // mean over seeds of a's minus b's points within the pair
  double ci_low = 0.0;              // paired bootstrap 95% interval of mean_margin
  double ci_high = 0.0;
};

struct TournamentSummary {
  std::vector<std::string> dimensions;
  std::vector<std::string> methods;
  std::vector<PaperId> seeds;
  std::map<std::string, std::map<PaperId, int>> points;  // method -> seed -> total
  std::map<std::string, double> mean_elo;
  std::map<std::string, int> rank1;
  std::vector<PairSummary> pairs;
  std::size_t abstentions = 0;          // judge calls that fell back to all-tie
  std::size_t abstention_ties = 0;      // dimensions tied by abstention
  std::size_t genuine_ties = 0;
  std::size_t decisive = 0;
  std::string tie_break_dimension;
  int bootstrap_resamples = 0;
  std::uint64_t bootstrap_seed = 0;
  std::string judge_template_hash;
};

struct AggregateOptions {
  std::string tie_break_dimension = "novelty";
  int bootstrap_resamples = 10000;
  std::uint64_t bootstrap_seed = 20240917;
};

TournamentSummary aggregate(const TournamentLedger& ledger, const AggregateOptions& options = {});

// Percentile bootstrap of the mean over paired per-seed margins.
std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& margins, int resamples, std::uint64_t seed,
                                            double level = 0.95);

std::string render_report(const TournamentSummary& summary);
std::string render_ledger_json(const TournamentLedger& ledger, const TournamentSummary& summary);

}  // namespace citedag
