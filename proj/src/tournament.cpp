#include "citedag/tournament.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "citedag/json_io.hpp"
#include "citedag/util.hpp"

namespace citedag {

MethodEntry load_method_entry(const std::string& name, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw TournamentError("idea file not found: " + path.string());
  MethodEntry entry{name, {}};
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      PaperId seed(j.at("seed_id").get<std::string>());
      if (!entry.ideas.emplace(seed, idea_from_json(j.at("idea"))).second)
        throw TournamentError("duplicate seed " + seed.str());
    } catch (const std::exception& e) {
      throw TournamentError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return entry;
}

TournamentLedger run_round_robin(const std::vector<MethodEntry>& methods, const std::vector<PaperId>& seeds,
                                 const JudgeFn& judge, const RoundRobinOptions& options) {
  if (seeds.empty()) throw TournamentError("tournament needs at least one seed");
  if (methods.size() < 2) throw TournamentError("tournament needs at least two methods");
  if (options.dimensions.empty()) throw TournamentError("tournament needs at least one judging dimension");

  std::map<std::string, const MethodEntry*> by_name;
  for (const auto& m : methods)
    if (!by_name.emplace(m.name, &m).second) throw TournamentError("duplicate method name " + m.name);

  TournamentLedger ledger;
  ledger.dimensions = options.dimensions;
  ledger.judge_template_hash = options.judge_template_hash;
  for (const auto& [name, _] : by_name) ledger.methods.push_back(name);
  ledger.seeds = seeds;
  std::ranges::sort(ledger.seeds);
  if (std::ranges::adjacent_find(ledger.seeds) != ledger.seeds.end()) throw TournamentError("duplicate seed in roster");

  for (const auto& seed : ledger.seeds)
    for (const auto& [name, m] : by_name) {
      auto it = m->ideas.find(seed);
      if (it == m->ideas.end()) throw TournamentError("method " + name + " has no idea for seed " + seed.str());
      if (!it->second.is_valid()) throw TournamentError("method " + name + " has an incomplete idea for seed " + seed.str());
    }

  for (const auto& seed : ledger.seeds)
    for (const auto& a : ledger.methods)
      for (const auto& b : ledger.methods)
        if (a != b) ledger.cells.push_back({seed, a, b, {}, false});

  auto run_cell = [&](PairCell& cell) {
    const auto& ia = by_name.at(cell.first)->ideas.at(cell.seed);
    const auto& ib = by_name.at(cell.second)->ideas.at(cell.seed);
    auto verdict = judge(cell.seed, ia, ib);
    if (verdict.outcomes.size() != ledger.dimensions.size()) {
      verdict.outcomes.assign(ledger.dimensions.size(), Outcome::kTie);
      verdict.abstained = true;
    }
    cell.outcomes = std::move(verdict.outcomes);
    cell.abstained = verdict.abstained;
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    for (auto& cell : ledger.cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < ledger.cells.size();) {
          try {
            run_cell(ledger.cells[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return ledger;
}

std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& margins, int resamples, std::uint64_t seed,
                                            double level) {
  if (margins.empty() || resamples <= 0) return {0.0, 0.0};
  std::mt19937_64 rng(seed);
  const auto n = margins.size();
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += margins[rng() % n];
    means.push_back(sum / static_cast<double>(n));
  }
  std::ranges::sort(means);
  auto at = [&](double q) {
    auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples)));
    return means[std::min(idx, means.size() - 1)];
  };
  return {at((1.0 - level) / 2.0), at((1.0 + level) / 2.0)};
}

namespace {

int first_points(Outcome o) { return o == Outcome::kWinA ? 2 : (o == Outcome::kTie ? 1 : 0); }

}  // namespace

TournamentSummary aggregate(const TournamentLedger& ledger, const AggregateOptions& options) {
  TournamentSummary s;
  s.dimensions = ledger.dimensions;
  s.methods = ledger.methods;
  s.seeds = ledger.seeds;
  s.tie_break_dimension = options.tie_break_dimension;
  s.bootstrap_resamples = options.bootstrap_resamples;
  s.bootstrap_seed = options.bootstrap_seed;
  s.judge_template_hash = ledger.judge_template_hash;
  if (s.seeds.empty()) throw TournamentError("cannot aggregate a tournament without seeds");

  const auto dims = ledger.dimensions.size();
  const auto tb = std::ranges::find(ledger.dimensions, options.tie_break_dimension) - ledger.dimensions.begin();

  // pair_dim[(a, b)][seed][d]: a's points against b on dimension d over both orders.
  std::map<std::pair<std::string, std::string>, std::map<PaperId, std::vector<int>>> pair_dim;
  std::map<std::string, std::map<PaperId, int>> tb_points;
  for (const auto& m : s.methods)
    for (const auto& seed : s.seeds) {
      s.points[m][seed] = 0;
      tb_points[m][seed] = 0;
    }

  for (const auto& cell : ledger.cells) {
    if (cell.abstained) ++s.abstentions;
    const bool first_is_a = cell.first < cell.second;
    const auto key = first_is_a ? std::pair{cell.first, cell.second} : std::pair{cell.second, cell.first};
    auto& subtotal = pair_dim[key][cell.seed];
    subtotal.resize(dims, 0);
    for (std::size_t d = 0; d < dims; ++d) {
      const auto o = cell.outcomes[d];
      if (o == Outcome::kTie) (cell.abstained ? s.abstention_ties : s.genuine_ties) += 1;
      else ++s.decisive;
      const int p = first_points(o);
      s.points[cell.first][cell.seed] += p;
      s.points[cell.second][cell.seed] += 2 - p;
      if (static_cast<std::ptrdiff_t>(d) == tb) {
        tb_points[cell.first][cell.seed] += p;
        tb_points[cell.second][cell.seed] += 2 - p;
      }
      subtotal[d] += first_is_a ? p : 2 - p;
    }
  }

  const double n = static_cast<double>(s.seeds.size());
  for (const auto& m : s.methods) {
    long long total = 0;
    for (const auto& seed : s.seeds) total += s.points[m][seed];
    s.mean_elo[m] = static_cast<double>(total) / n;
    s.rank1[m] = 0;
  }
  for (const auto& seed : s.seeds) {
    const std::string* best = nullptr;
    for (const auto& m : s.methods) {  // sorted, so the first of equals wins the name tie-break
      if (!best) {
        best = &m;
        continue;
      }
      const auto pm = s.points[m][seed], pb = s.points[*best][seed];
      if (pm > pb || (pm == pb && tb_points[m][seed] > tb_points[*best][seed])) best = &m;
    }
    ++s.rank1[*best];
  }

  for (const auto& [key, per_seed] : pair_dim) {
    PairSummary p;
    p.a = key.first;
    p.b = key.second;
    p.per_dimension.resize(dims);
    std::vector<double> margins;
    for (const auto& seed : s.seeds) {
      auto it = per_seed.find(seed);
      if (it == per_seed.end()) continue;
      int pair_points = 0;
      for (std::size_t d = 0; d < dims; ++d) {
        const int v = it->second[d];
        pair_points += v;
        auto& w = p.per_dimension[d];
        (v > 2 ? w.win : (v == 2 ? w.tie : w.loss)) += 1.0;
      }
      const int pair_total = 4 * static_cast<int>(dims);
      margins.push_back(static_cast<double>(2 * pair_points - pair_total));
    }
    const double count = static_cast<double>(margins.size());
    for (auto& w : p.per_dimension) {
      w.win /= count;
      w.tie /= count;
      w.loss /= count;
    }
    double sum = 0.0;
    for (double m : margins) sum += m;
    p.mean_margin = sum / count;
    std::tie(p.ci_low, p.ci_high) = bootstrap_mean_ci(margins, options.bootstrap_resamples, options.bootstrap_seed);
    s.pairs.push_back(std::move(p));
  }
  return s;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string render_report(const TournamentSummary& s) {
  std::ostringstream out;
  const int per_pair = 4 * static_cast<int>(s.dimensions.size());
  out << "# Pairwise tournament\n"
      << "seeds: " << s.seeds.size() << "    methods: " << s.methods.size() << "\n"
      << "mean Elo: per-seed point total averaged over seeds (2/1/0 per dimension, both orders, " << per_pair
      << " points per pair and seed); not a rating fit\n"
      << "rank-1 tie-break: total, then " << s.tie_break_dimension << " points, then method name\n"
      << "W/T/L: per seed, a method's two-order points on one dimension: W if > 2, T if = 2, L if < 2\n"
      << "judge template sha256: " << s.judge_template_hash << "\n\n";

  out << "method\tmean_elo\trank1\n";
  for (const auto& m : s.methods) out << m << "\t" << fmt("%.2f", s.mean_elo.at(m)) << "\t" << s.rank1.at(m) << "\n";

  for (const auto& p : s.pairs) {
    out << "\n## " << p.a << " vs " << p.b << "\n";
    out << "dimension\tW\tT\tL\n";
    for (std::size_t d = 0; d < s.dimensions.size(); ++d) {
      const auto& w = p.per_dimension[d];
      out << s.dimensions[d] << "\t" << fmt("%.2f", w.win) << "\t" << fmt("%.2f", w.tie) << "\t" << fmt("%.2f", w.loss)
          << "\n";
    }
    out << "mean margin " << fmt("%.2f", p.mean_margin) << "  bootstrap 95% CI [" << fmt("%.2f", p.ci_low) << ", "
        << fmt("%.2f", p.ci_high) << "]  (" << s.bootstrap_resamples << " resamples, seed " << s.bootstrap_seed << ")\n";
  }
  out << "\njudge calls abstained: " << s.abstentions << "\n"
      << "dimension outcomes: decisive " << s.decisive << ", genuine ties " << s.genuine_ties << ", abstention ties "
      << s.abstention_ties << "\n";
  return out.str();
}

std::string render_ledger_json(const TournamentLedger& ledger, const TournamentSummary& s) {
  json cells = json::array();
  for (const auto& c : ledger.cells) {
    json outcomes = json::array();
    for (auto o : c.outcomes) outcomes.push_back(std::string(to_string(o)));
    cells.push_back({{"seed", c.seed.str()}, {"first", c.first}, {"second", c.second}, {"outcomes", outcomes},
                     {"abstained", c.abstained}});
  }
  json points = json::object();
  for (const auto& [m, per_seed] : s.points) {
    json row = json::object();
    for (const auto& [seed, p] : per_seed) row[seed.str()] = p;
    points[m] = row;
  }
  json pairs = json::array();
  for (const auto& p : s.pairs) {
    json dims = json::object();
    for (std::size_t d = 0; d < s.dimensions.size(); ++d)
      dims[s.dimensions[d]] = {{"win", round6(p.per_dimension[d].win)},
                               {"tie", round6(p.per_dimension[d].tie)},
                               {"loss", round6(p.per_dimension[d].loss)}};
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"wtl", dims}, {"mean_margin", round6(p.mean_margin)},
                     {"ci95", {round6(p.ci_low), round6(p.ci_high)}}});
  }
  json mean_elo = json::object();
  for (const auto& [m, v] : s.mean_elo) mean_elo[m] = round6(v);
  json seeds = json::array();
  for (const auto& seed : s.seeds) seeds.push_back(seed.str());
  json out = {
      {"dimensions", s.dimensions},
      {"methods", s.methods},
      {"seeds", seeds},
      {"cells", cells},
      {"points", points},
      {"mean_elo", mean_elo},
      {"rank1", s.rank1},
      {"pairs", pairs},
      {"abstentions", s.abstentions},
      {"abstention_ties", s.abstention_ties},
      {"genuine_ties", s.genuine_ties},
      {"decisive", s.decisive},
      {"tie_break_dimension", s.tie_break_dimension},
      {"bootstrap", {{"resamples", s.bootstrap_resamples}, {"seed", s.bootstrap_seed}}},
      {"judge_template_sha256", s.judge_template_hash},
  };
  return canonical_dump(out);
}

}  // namespace citedag
