#include "citedag/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace citedag {

PaperId::PaperId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) throw InvalidArgument("PaperId must be non-empty");
}

namespace {

constexpr std::pair<SectionLabel, std::string_view> kSectionNames[] = {
    {SectionLabel::kIntroduction, "introduction"}, {SectionLabel::kRelatedWork, "related_work"},
    {SectionLabel::kMethod, "method"},             {SectionLabel::kExperiments, "experiments"},
    {SectionLabel::kConclusion, "conclusion"},     {SectionLabel::kAppendix, "appendix"},
    {SectionLabel::kOther, "other"},
};

constexpr std::pair<EdgeType, std::string_view> kEdgeTypeNames[] = {
    {EdgeType::kExplicitPred, "explicit_pred"},
    {EdgeType::kParallelPred, "parallel_pred"},
    {EdgeType::kDirectToSeed, "direct_to_seed"},
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view to_string(SectionLabel label) {
  for (const auto& [l, name] : kSectionNames)
    if (l == label) return name;
  return "other";
}

std::optional<SectionLabel> section_label_from_string(std::string_view text) {
  for (const auto& [l, name] : kSectionNames)
    if (name == text) return l;
  return std::nullopt;
}

const std::vector<SectionLabel>& all_section_labels() {
  static const std::vector<SectionLabel> labels = [] {
    std::vector<SectionLabel> out;
    for (const auto& entry : kSectionNames) out.push_back(entry.first);
    return out;
  }();
  return labels;
}

std::string_view to_string(EdgeType type) {
  for (const auto& [t, name] : kEdgeTypeNames)
    if (t == type) return name;
  return "explicit_pred";
}

std::optional<EdgeType> edge_type_from_string(std::string_view text) {
  for (const auto& [t, name] : kEdgeTypeNames)
    if (name == text) return t;
  return std::nullopt;
}

std::string_view to_string(PromptVariant variant) {
  return variant == PromptVariant::kGraph ? "graph" : "plain";
}

std::optional<PromptVariant> prompt_variant_from_string(std::string_view text) {
  if (text == "graph") return PromptVariant::kGraph;
  if (text == "plain") return PromptVariant::kPlain;
  return std::nullopt;
}

const std::vector<std::string>& FiveFieldIdea::field_names() {
  static const std::vector<std::string> names = {"Problem", "Existing Methods", "Motivation",
                                                 "Proposed Method", "Experiment Plan"};
  return names;
}

std::vector<std::string_view> FiveFieldIdea::fields() const {
  return {problem, existing_methods, motivation, proposed_method, experiment_plan};
}

bool FiveFieldIdea::is_valid() const {
  return std::ranges::all_of(fields(), [](std::string_view f) { return !trim(f).empty(); });
}

std::vector<std::string> validate_record(const PaperRecord& record) {
  std::vector<std::string> problems;
  if (record.id.empty()) problems.push_back("record has an empty id");
  if (record.year && *record.year <= 1900)
    problems.push_back("record " + record.id.str() + ": year " + std::to_string(*record.year) +
                       " is not after 1900");
  std::unordered_set<PaperId, PaperIdHash> seen;
  for (const auto& ref : record.reference_ids) {
    if (ref == record.id) problems.push_back("record " + record.id.str() + " references itself");
    if (!seen.insert(ref).second)
      problems.push_back("record " + record.id.str() + " lists reference " + ref.str() + " twice");
  }
  return problems;
}

EdgeCounts AnnotatedSubgraph::edge_counts() const {
  EdgeCounts counts;
  for (const auto& node : nodes) {
    if (node.direct_to_seed()) ++counts.direct_to_seed;
    for (const auto& pred : node.predecessors) {
      if (pred.type == EdgeType::kExplicitPred) ++counts.explicit_pred;
      else if (pred.type == EdgeType::kParallelPred) ++counts.parallel_pred;
    }
  }
  return counts;
}

std::optional<std::size_t> AnnotatedSubgraph::index_of(const PaperId& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].record.id == id) return i;
  return std::nullopt;
}

namespace {

// Depth-first search over predecessor links; every back edge closes a
// cycle and yields one violation.
void find_back_edges(const AnnotatedSubgraph& graph,
                     const std::unordered_map<PaperId, std::size_t, PaperIdHash>& index,
                     std::vector<std::string>& violations) {
  enum class Mark { kWhite, kGrey, kBlack };
  std::vector<Mark> mark(graph.nodes.size(), Mark::kWhite);
  struct Frame {
    std::size_t node;
    std::size_t next_pred;
  };
  for (std::size_t root = 0; root < graph.nodes.size(); ++root) {
    if (mark[root] != Mark::kWhite) continue;
    std::vector<Frame> stack{{root, 0}};
    mark[root] = Mark::kGrey;
    while (!stack.empty()) {
      Frame& top = stack.back();
      const auto& preds = graph.nodes[top.node].predecessors;
      if (top.next_pred == preds.size()) {
        mark[top.node] = Mark::kBlack;
        stack.pop_back();
        continue;
      }
      const auto& pred = preds[top.next_pred++];
      auto it = index.find(pred.id);
      if (it == index.end()) continue;
      const std::size_t next = it->second;
      if (mark[next] == Mark::kGrey) {
        violations.push_back("acyclicity: edge " + pred.id.str() + " -> " +
                             graph.nodes[top.node].record.id.str() + " closes a cycle");
      } else if (mark[next] == Mark::kWhite) {
        mark[next] = Mark::kGrey;
        stack.push_back({next, 0});
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_subgraph(const AnnotatedSubgraph& graph) {
  std::vector<std::string> violations;
  const auto n = graph.nodes.size();
  if (n > static_cast<std::size_t>(std::max(graph.k_budget, 0)) && n > 0)
    violations.push_back("budget: " + std::to_string(n) + " nodes exceed k_budget " +
                         std::to_string(graph.k_budget));

  std::unordered_map<PaperId, std::size_t, PaperIdHash> index;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = graph.nodes[i].record.id;
    if (!index.emplace(id, i).second) violations.push_back("duplicate node " + id.str());
  }

  std::optional<int> previous_year;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = graph.nodes[i];
    const auto& id = node.record.id.str();
    const auto& year = node.record.year;
    const auto& f = node.seed_features;
    if (!year || !graph.seed.year || *year >= *graph.seed.year) {
      violations.push_back("temporal cone: node " + id + " does not strictly predate the seed");
    } else if (f.delta_year != *graph.seed.year - *year) {
      violations.push_back("delta_year: node " + id + " has delta_year " +
                           std::to_string(f.delta_year) + " but the years differ by " +
                           std::to_string(*graph.seed.year - *year));
    }
    if (year) {
      if (previous_year && *year < *previous_year)
        violations.push_back("year order: node " + id + " appears after a younger node");
      previous_year = year;
    }

    if (f.layer_depth != 1 && f.layer_depth != 2)
      violations.push_back("layer_depth: node " + id + " has depth " + std::to_string(f.layer_depth));
    if (n > 0 && f.cited_by_subgraph > n - 1)
      violations.push_back("cited_by_subgraph: node " + id + " exceeds retained node count");

    for (const auto& pred : node.predecessors) {
      if (pred.id == node.record.id) {
        violations.push_back("predecessor: node " + id + " lists itself");
        continue;
      }
      if (!index.contains(pred.id))
        violations.push_back("predecessor: node " + id + " lists " + pred.id.str() +
                             " which is not retained");
      switch (pred.type) {
        case EdgeType::kParallelPred:
          if (pred.delta_yr != 0)
            violations.push_back("edge type: parallel_pred " + pred.id.str() + " -> " + id +
                                 " has non-zero delta_yr");
          break;
        case EdgeType::kExplicitPred:
          if (pred.delta_yr <= 0)
            violations.push_back("edge type: explicit_pred " + pred.id.str() + " -> " + id +
                                 " has non-positive delta_yr");
          break;
        case EdgeType::kDirectToSeed:
          violations.push_back("edge type: direct_to_seed used as predecessor edge on " + id);
          break;
      }
    }
  }
  find_back_edges(graph, index, violations);
  return violations;
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace citedag
