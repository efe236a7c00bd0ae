#pragma once
// Surface metrics against a gold idea: ROUGE-L F1, cosine over externally
// computed embeddings, weighted top-1 cosine across candidates, and oracle
// top-1 selection.
//
// ROUGE tokenization: lowercase ASCII, tokens are maximal runs of letters
// and digits (bytes >= 0x80 are kept inside tokens); everything else splits.
//
// Embedding file (JSONL):
//   {"dimension": 768, "source_tag": "specter2"}                first line
//   {"seed_id": "...", "role": "gold" | "candidate_<k>", "field": "Problem", "vector": [...]}

#include <array>
#include <optional>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citedag/core_model.hpp"

namespace citedag {

class MetricError : public Error {
 public:
  using Error::Error;
};
class DimensionMismatch : public MetricError {
 public:
  using MetricError::MetricError;
};
class ZeroNorm : public MetricError {
 public:
  using MetricError::MetricError;
};
class NoValidCandidate : public MetricError {
 public:
  using MetricError::MetricError;
};

std::vector<std::string> rouge_tokens(std::string_view text);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
double rouge_l_f1(std::string_view candidate, std::string_view reference);

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_tag;
};

double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// One vector per idea field, in schema order.
using FieldEmbeddings = std::array<EmbeddingVector, 5>;

// max over candidates of sum_f w_f * cosine(candidate_f, gold_f).
// Throws MetricError on no candidates or weights that are negative or do
// not sum to 1.
double wtop1(std::span<const FieldEmbeddings> candidates, const FieldEmbeddings& gold,
             const std::array<double, 5>& weights = {0.2, 0.2, 0.2, 0.2, 0.2});

using IdeaMetric = std::function<double(const FiveFieldIdea& candidate, const FiveFieldIdea& gold)>;

// ROUGE-L F1 on the Proposed Method field.
double method_rouge_l(const FiveFieldIdea& candidate, const FiveFieldIdea& gold);

struct OracleChoice {
  std::size_t index = 0;  // position in the input list
  double score = 0.0;
};

// Best valid candidate by `metric`; ties go to the lowest index. Invalid
// candidates are skipped; none valid throws NoValidCandidate.
OracleChoice oracle_top1(std::span<const FiveFieldIdea> candidates, const FiveFieldIdea& gold, const IdeaMetric& metric);

struct SeedEmbeddings {
  std::optional<FieldEmbeddings> gold;
  std::map<int, FieldEmbeddings> candidates;  // keyed by k
};

struct EmbeddingSet {
  std::size_t dimension = 0;
  std::string source_tag;
  std::map<PaperId, SeedEmbeddings> seeds;
};

// Throws MetricError on malformed lines, unknown fields/roles, vectors of the
// wrong length, or incomplete field sets.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
EmbeddingSet embeddings_from_text(const std::string& text);

struct MetricsRow {
  PaperId seed;
  std::size_t valid_candidates = 0;
  std::size_t oracle_index = 0;
  double rouge_l = 0.0;
  std::optional<double> wtop1;  // absent without embeddings for the seed
};

// TSV keyed by seed: seed_id, valid_candidates, oracle_index, rouge_l_method,
// wtop1, bert_f1 (always "out_of_scope"), then a mean row. A header comment
// records the tokenization and wTop1 weights.
std::string render_metrics_report(const std::vector<MetricsRow>& rows, const std::array<double, 5>& weights,
                                  const std::string& embedding_source);

}  // namespace citedag
