#pragma once
// Shared domain types for the citation-DAG pipeline.
//
// Every type here is an immutable-after-construction value object; the
// pipeline stages pass them by value or const reference and never mutate
// shared instances.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace citedag {

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Opaque paper identifier (Semantic Scholar id or fixture-local id).
// Totally ordered lexicographically; the order is used for tie-breaking.
class PaperId {
 public:
  PaperId() = default;
  explicit PaperId(std::string value);

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const PaperId&, const PaperId&) = default;
  friend bool operator==(const PaperId&, const PaperId&) = default;

 private:
  std::string value_;
};

struct PaperIdHash {
  std::size_t operator()(const PaperId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

// Closed set of canonical section labels. Declaration order is the
// rendering order for section sets.
enum class SectionLabel {
  kIntroduction,
  kRelatedWork,
  kMethod,
  kExperiments,
  kConclusion,
  kAppendix,
  kOther,
};

std::string_view to_string(SectionLabel label);
std::optional<SectionLabel> section_label_from_string(std::string_view text);
const std::vector<SectionLabel>& all_section_labels();

// The five-field idea schema. Field order is fixed everywhere it is rendered.
struct FiveFieldIdea {
  std::string problem;
  std::string existing_methods;
  std::string motivation;
  std::string proposed_method;
  std::string experiment_plan;

  friend bool operator==(const FiveFieldIdea&, const FiveFieldIdea&) = default;

  // Display keys, in schema order.
  static const std::vector<std::string>& field_names();
  // Field values in schema order.
  std::vector<std::string_view> fields() const;
  // True when every field is non-empty after whitespace trim.
  bool is_valid() const;
};

struct PaperRecord {
  PaperId id;
  std::string title;
  std::optional<int> year;
  std::string venue;
  std::vector<std::string> authors;
  std::string abstract_text;
  std::uint64_t global_cite_count = 0;
  // Citation-pair property: whether the requesting seed marks this paper
  // as influential.
  bool is_influential = false;
  std::vector<std::string> contexts;
  std::vector<PaperId> reference_ids;
  std::optional<FiveFieldIdea> idea;

  friend bool operator==(const PaperRecord&, const PaperRecord&) = default;
};

// Checks year > 1900 when known, no duplicate or self references.
std::vector<std::string> validate_record(const PaperRecord& record);

// The eight per-node features describing the node's relation to the seed.
struct EdgeFeatures {
  int layer_depth = 1;
  std::set<SectionLabel> cited_in_sections;
  std::uint64_t cite_count = 0;
  double section_weight = 0.0;
  int delta_year = 0;
  bool is_influential_raw = false;
  bool low_confidence = false;
  std::uint64_t cited_by_subgraph = 0;

  friend bool operator==(const EdgeFeatures&, const EdgeFeatures&) = default;
};

enum class EdgeType { kExplicitPred, kParallelPred, kDirectToSeed };

std::string_view to_string(EdgeType type);
std::optional<EdgeType> edge_type_from_string(std::string_view text);

struct Predecessor {
  PaperId id;
  EdgeType type = EdgeType::kExplicitPred;
  int delta_yr = 0;

  friend bool operator==(const Predecessor&, const Predecessor&) = default;
};

// Normalized ranking components, each in [0,1].
struct ScoreComponents {
  double cite = 0.0;
  double sec = 0.0;
  double infl = 0.0;
  double sib = 0.0;

  friend bool operator==(const ScoreComponents&, const ScoreComponents&) = default;
};

struct SubgraphNode {
  PaperRecord record;
  EdgeFeatures seed_features;
  std::vector<Predecessor> predecessors;
  ScoreComponents components;
  double pass1_score = 0.0;
  double pass2_score = 0.0;

  // A node without in-subgraph predecessors hangs directly off the seed.
  bool direct_to_seed() const noexcept { return predecessors.empty(); }

  friend bool operator==(const SubgraphNode&, const SubgraphNode&) = default;
};

struct EdgeCounts {
  std::size_t explicit_pred = 0;
  std::size_t parallel_pred = 0;
  std::size_t direct_to_seed = 0;

  std::size_t predecessor_edges() const noexcept { return explicit_pred + parallel_pred; }
  // Predecessor edges plus one seed edge for every source node.
  std::size_t total() const noexcept { return explicit_pred + parallel_pred + direct_to_seed; }

  friend bool operator==(const EdgeCounts&, const EdgeCounts&) = default;
};

struct AnnotatedSubgraph {
  PaperRecord seed;
  std::vector<SubgraphNode> nodes;  // non-decreasing year order
  int k_budget = 0;

  EdgeCounts edge_counts() const;
  // Index of the node with the given id, if retained.
  std::optional<std::size_t> index_of(const PaperId& id) const;

  friend bool operator==(const AnnotatedSubgraph&, const AnnotatedSubgraph&) = default;
};

// Lists every broken AnnotatedSubgraph invariant. Empty means valid.
std::vector<std::string> validate_subgraph(const AnnotatedSubgraph& graph);

enum class PromptVariant { kGraph, kPlain };

std::string_view to_string(PromptVariant variant);
std::optional<PromptVariant> prompt_variant_from_string(std::string_view text);

// One completion-only training example. `prompt` holds the full training
// sequence: the conditioning text followed by the target. Loss is applied
// from `mask_boundary` onwards, so prompt.substr(mask_boundary) == target.
struct SftExample {
  PaperId seed_id;
  PromptVariant variant = PromptVariant::kGraph;
  std::string prompt;
  std::string target;
  std::size_t mask_boundary = 0;

  std::string_view conditioning() const { return std::string_view(prompt).substr(0, mask_boundary); }
  std::string_view completion() const { return std::string_view(prompt).substr(mask_boundary); }
};

// Whitespace helpers shared by the parsers and serializers.
std::string trim(std::string_view text);
std::string collapse_whitespace(std::string_view text);

}  // namespace citedag
