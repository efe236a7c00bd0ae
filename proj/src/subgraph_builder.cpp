#include "citedag/subgraph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "citedag/s2_client.hpp"

namespace citedag {

Expansion expand_two_hop(const PaperRecord& seed, const RecordLookup& fetch) {
  if (seed.reference_ids.empty())
    throw EmptySubgraphError("seed " + seed.id.str() + " has no references to expand");

  Expansion out;
  std::map<PaperId, PaperRecord> found;
  std::set<PaperId> attempted{seed.id};

  auto visit = [&](const PaperId& id, int layer) -> const PaperRecord* {
    if (!attempted.insert(id).second) {
      auto it = found.find(id);
      return it == found.end() ? nullptr : &it->second;
    }
    auto record = fetch(id);
    if (!record) {
      out.skipped.push_back(id);
      return nullptr;
    }
    out.layer[id] = layer;
    return &found.emplace(id, std::move(*record)).first->second;
  };

  std::vector<const PaperRecord*> first_hop;
  for (const auto& id : seed.reference_ids)
    if (const auto* r = visit(id, 1)) first_hop.push_back(r);
  // Copy the reference lists first: the map may grow while we walk them.
  std::vector<std::vector<PaperId>> second_ids;
  for (const auto* r : first_hop) second_ids.push_back(r->reference_ids);
  for (const auto& ids : second_ids)
    for (const auto& id : ids) visit(id, 2);

  for (auto& [id, record] : found) out.records.push_back(std::move(record));
  return out;
}

std::vector<PaperRecord> apply_temporal_cone(std::vector<PaperRecord> pool, int seed_year) {
  std::erase_if(pool, [&](const PaperRecord& r) { return !r.year || *r.year >= seed_year; });
  return pool;
}

int compute_budget(std::size_t num_seed_refs, const BudgetConfig& budget) {
  double scaled = budget.fraction * static_cast<double>(num_seed_refs);
  // 0.15 * 20 evaluates to 3.0000000000000004; snap near-integers first.
  const double nearest = std::round(scaled);
  if (std::abs(scaled - nearest) < 1e-9 * std::max(1.0, scaled)) scaled = nearest;
  const double wanted = std::ceil(scaled);
  const double bounded = std::min<double>(budget.cap, std::max<double>(budget.floor, wanted));
  return static_cast<int>(bounded);
}

double score_pass1(const Candidate& c, const Pass1Weights& w) {
  return w.cite * c.components.cite + w.sec * c.components.sec + w.infl * c.components.infl;
}

double score_pass2(const Candidate& c, const Pass2Weights& w) {
  return w.cite * c.components.cite + w.sec * c.components.sec + w.infl * c.components.infl +
         w.sib * c.components.sib;
}

double sibling_boost(const Candidate& r, std::span<const Candidate> top_k1, int k) {
  if (k <= 0) throw InvalidArgument("sibling_boost needs k > 0");
  const auto listing = std::ranges::count_if(
      top_k1, [&](const Candidate& s) { return s.predecessors_in_pool.contains(r.record.id); });
  return static_cast<double>(listing) / static_cast<double>(k);
}

std::vector<Candidate> select_top_k(std::vector<Candidate> scored, std::size_t k, RankBy by) {
  auto key = [by](const Candidate& c) { return by == RankBy::kPass1 ? c.pass1 : c.pass2; };
  auto better = [&](const Candidate& a, const Candidate& b) {
    if (key(a) != key(b)) return key(a) > key(b);
    if (a.components.cite != b.components.cite) return a.components.cite > b.components.cite;
    return a.record.id < b.record.id;
  };
  if (k < scored.size()) {
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
    scored.resize(k);
  } else {
    std::sort(scored.begin(), scored.end(), better);
  }
  return scored;
}

std::vector<Candidate> make_candidates(const std::vector<PaperRecord>& pool, const std::map<PaperId, int>& layer,
                                       const std::set<PaperId>& seed_refs,
                                       const std::map<PaperId, CitationStats>& profile,
                                       const PipelineConfig& config) {
  std::set<PaperId> pool_ids;
  for (const auto& r : pool) pool_ids.insert(r.id);

  std::vector<Candidate> out;
  out.reserve(pool.size());
  std::uint64_t max_count = 0;
  for (const auto& record : pool) {
    Candidate c;
    c.record = record;
    auto it = layer.find(record.id);
    c.layer_depth = it == layer.end() ? 1 : it->second;
    if (c.layer_depth == 1) {
      if (auto p = profile.find(record.id); p != profile.end()) {
        c.cite_count = p->second.cite_count;
        for (auto label : p->second.sections)
          c.components.sec = std::max(c.components.sec, config.section_weight(label));
      }
    }
    c.components.infl = record.is_influential ? 1.0 : 0.0;
    for (const auto& pred : mine_predecessors(record, seed_refs))
      if (pool_ids.contains(pred)) c.predecessors_in_pool.insert(pred);
    max_count = std::max(max_count, c.cite_count);
    out.push_back(std::move(c));
  }
  for (auto& c : out)
    c.components.cite = max_count == 0 ? 0.0 : static_cast<double>(c.cite_count) / static_cast<double>(max_count);
  return out;
}

namespace {

bool node_before(const SubgraphNode& a, const SubgraphNode& b) {
  const int ya = a.record.year.value_or(0);
  const int yb = b.record.year.value_or(0);
  if (ya != yb) return ya < yb;
  return a.record.id < b.record.id;
}

// The node whose outgoing edge is dropped when breaking a cycle.
bool weaker(const SubgraphNode& a, const SubgraphNode& b) {
  if (a.components.cite != b.components.cite) return a.components.cite < b.components.cite;
  return a.record.id > b.record.id;
}

void remove_predecessor(SubgraphNode& node, const PaperId& pred) {
  std::erase_if(node.predecessors, [&](const Predecessor& p) { return p.id == pred; });
}

bool lists(const SubgraphNode& node, const PaperId& pred) {
  return std::ranges::any_of(node.predecessors, [&](const Predecessor& p) { return p.id == pred; });
}

// First cycle in depth-first order over predecessor links, as a list of
// (node index, predecessor index) steps.
std::optional<std::vector<std::pair<std::size_t, std::size_t>>> find_cycle(
    const std::vector<SubgraphNode>& nodes, const std::unordered_map<PaperId, std::size_t, PaperIdHash>& index) {
  enum class Mark { kWhite, kGrey, kBlack };
  std::vector<Mark> mark(nodes.size(), Mark::kWhite);
  struct Frame {
    std::size_t node;
    std::size_t next;
  };
  for (std::size_t root = 0; root < nodes.size(); ++root) {
    if (mark[root] != Mark::kWhite) continue;
    std::vector<Frame> stack{{root, 0}};
    mark[root] = Mark::kGrey;
    while (!stack.empty()) {
      Frame& top = stack.back();
      const auto& preds = nodes[top.node].predecessors;
      if (top.next == preds.size()) {
        mark[top.node] = Mark::kBlack;
        stack.pop_back();
        continue;
      }
      auto it = index.find(preds[top.next++].id);
      if (it == index.end()) continue;
      const std::size_t next = it->second;
      if (mark[next] == Mark::kGrey) {
        std::vector<std::pair<std::size_t, std::size_t>> cycle;
        auto start = std::ranges::find_if(stack, [&](const Frame& f) { return f.node == next; });
        for (auto f = start; f != stack.end(); ++f) {
          const auto succ = (f + 1 == stack.end()) ? next : (f + 1)->node;
          cycle.emplace_back(f->node, succ);
        }
        return cycle;
      }
      if (mark[next] == Mark::kWhite) {
        mark[next] = Mark::kGrey;
        stack.push_back({next, 0});
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<SubgraphNode> classify_edges(const std::vector<Candidate>& selected) {
  std::map<PaperId, const Candidate*> retained;
  for (const auto& c : selected) retained.emplace(c.record.id, &c);

  std::vector<SubgraphNode> nodes;
  nodes.reserve(selected.size());
  for (const auto& c : selected) {
    SubgraphNode node;
    node.record = c.record;
    node.seed_features.layer_depth = c.layer_depth;
    node.components = c.components;
    node.pass1_score = c.pass1;
    node.pass2_score = c.pass2;
    for (const auto& pred_id : c.predecessors_in_pool) {
      auto it = retained.find(pred_id);
      if (it == retained.end() || pred_id == c.record.id) continue;
      const auto& own = c.record.year;
      const auto& theirs = it->second->record.year;
      if (!own || !theirs) continue;
      if (*own > *theirs) node.predecessors.push_back({pred_id, EdgeType::kExplicitPred, *own - *theirs});
      else if (*own == *theirs) node.predecessors.push_back({pred_id, EdgeType::kParallelPred, 0});
    }
    nodes.push_back(std::move(node));
  }
  std::sort(nodes.begin(), nodes.end(), node_before);

  std::map<PaperId, std::size_t> order;
  for (std::size_t i = 0; i < nodes.size(); ++i) order.emplace(nodes[i].record.id, i);
  for (auto& node : nodes)
    std::ranges::sort(node.predecessors, [&](const Predecessor& a, const Predecessor& b) {
      return order.at(a.id) < order.at(b.id);
    });
  return nodes;
}

std::vector<SubgraphNode> break_cycles(std::vector<SubgraphNode> nodes, CycleBreakReport* report) {
  std::unordered_map<PaperId, std::size_t, PaperIdHash> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i].record.id, i);

  CycleBreakReport local;
  // Mutual pairs first: j lists i and i lists j.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto preds = nodes[i].predecessors;  // copy, the list may shrink
    for (const auto& p : preds) {
      auto it = index.find(p.id);
      if (it == index.end()) continue;
      const std::size_t j = it->second;
      if (j <= i || !lists(nodes[j], nodes[i].record.id) || !lists(nodes[i], nodes[j].record.id)) continue;
      // Edge u -> v exists when u is listed by v; drop the one leaving the weaker node.
      const std::size_t loser = weaker(nodes[i], nodes[j]) ? i : j;
      const std::size_t other = loser == i ? j : i;
      remove_predecessor(nodes[other], nodes[loser].record.id);
      local.two_cycle_edges.push_back({nodes[loser].record.id, nodes[other].record.id});
    }
  }

  while (auto cycle = find_cycle(nodes, index)) {
    // Step (v, u): u is a predecessor of v, i.e. edge u -> v.
    auto chosen = (*cycle)[0];
    for (const auto& step : *cycle)
      if (weaker(nodes[step.second], nodes[chosen.second])) chosen = step;
    remove_predecessor(nodes[chosen.first], nodes[chosen.second].record.id);
    local.long_cycle_edges.push_back({nodes[chosen.second].record.id, nodes[chosen.first].record.id});
  }

  if (report) *report = std::move(local);
  return nodes;
}

std::vector<SubgraphNode> annotate_features(std::vector<SubgraphNode> nodes, const PaperRecord& seed,
                                            const std::map<PaperId, CitationStats>& profile,
                                            const PipelineConfig& config) {
  std::map<PaperId, std::uint64_t> listed_by;
  for (const auto& node : nodes)
    for (const auto& p : node.predecessors) ++listed_by[p.id];

  for (auto& node : nodes) {
    auto& f = node.seed_features;
    f.cited_in_sections.clear();
    f.cite_count = 0;
    f.low_confidence = true;
    f.section_weight = 0.0;
    if (f.layer_depth == 1) {
      if (auto it = profile.find(node.record.id); it != profile.end()) {
        f.cited_in_sections = it->second.sections;
        f.cite_count = it->second.cite_count;
        f.low_confidence = it->second.low_confidence;
      }
    }
    for (auto label : f.cited_in_sections) f.section_weight = std::max(f.section_weight, config.section_weight(label));
    f.delta_year = (seed.year && node.record.year) ? *seed.year - *node.record.year : 0;
    f.is_influential_raw = node.record.is_influential;
    auto it = listed_by.find(node.record.id);
    f.cited_by_subgraph = it == listed_by.end() ? 0 : it->second;
  }
  return nodes;
}

BuildResult build(const PaperRecord& seed, const RecordLookup& fetch,
                  const std::map<PaperId, CitationStats>& profile, const PipelineConfig& config) {
  if (!seed.year) throw EmptySubgraphError("seed " + seed.id.str() + " has no year; the temporal cone is undefined");
  BuildResult result;
  auto& trace = result.trace;
  trace.num_seed_refs = seed.reference_ids.size();

  auto expansion = expand_two_hop(seed, fetch);
  trace.expanded = expansion.records.size();
  trace.skipped = expansion.skipped;
  for (const auto& id : expansion.skipped) trace.log.push_back("skipped unretrievable paper " + id.str());

  const int k = compute_budget(seed.reference_ids.size(), config.budget);
  trace.budget = k;
  const std::set<PaperId> seed_refs(seed.reference_ids.begin(), seed.reference_ids.end());

  std::vector<PaperRecord> pool = std::move(expansion.records);
  if (config.cone_stage == ConeStage::kPreRank) {
    pool = apply_temporal_cone(std::move(pool), *seed.year);
    trace.after_cone = pool.size();
    if (pool.empty())
      throw EmptySubgraphError("seed " + seed.id.str() + ": no candidate survives the temporal cone");
  }

  auto candidates = make_candidates(pool, expansion.layer, seed_refs, profile, config);
  for (auto& c : candidates) c.pass1 = score_pass1(c, config.score1_weights);
  const auto top_k1 = select_top_k(candidates, static_cast<std::size_t>(k), RankBy::kPass1);
  for (auto& c : candidates) {
    c.components.sib = sibling_boost(c, top_k1, k);
    c.pass2 = score_pass2(c, config.score2_weights);
  }
  auto selected = select_top_k(std::move(candidates), static_cast<std::size_t>(k), RankBy::kPass2);
  trace.selected = selected.size();

  if (config.cone_stage == ConeStage::kPostSelect) {
    std::erase_if(selected, [&](const Candidate& c) { return !c.record.year || *c.record.year >= *seed.year; });
    trace.after_cone = selected.size();
    if (selected.empty())
      throw EmptySubgraphError("seed " + seed.id.str() + ": no selected candidate survives the temporal cone");
  }

  std::set<PaperId> retained;
  for (const auto& c : selected) retained.insert(c.record.id);
  for (auto& c : selected)
    std::erase_if(c.predecessors_in_pool, [&](const PaperId& id) { return !retained.contains(id); });

  auto nodes = classify_edges(selected);
  nodes = break_cycles(std::move(nodes), &trace.cycles);
  for (const auto& e : trace.cycles.two_cycle_edges)
    trace.log.push_back("broke 2-cycle: dropped edge " + e.from.str() + " -> " + e.to.str());
  for (const auto& e : trace.cycles.long_cycle_edges)
    trace.log.push_back("broke longer cycle: dropped edge " + e.from.str() + " -> " + e.to.str());
  nodes = annotate_features(std::move(nodes), seed, profile, config);

  result.graph.seed = seed;
  result.graph.nodes = std::move(nodes);
  result.graph.k_budget = k;
  if (auto violations = validate_subgraph(result.graph); !violations.empty())
    throw Error("built subgraph for " + seed.id.str() + " is invalid: " + violations.front());
  return result;
}

}  // namespace citedag
