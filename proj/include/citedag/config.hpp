#pragma once
// PipelineConfig: every tunable of the pipeline, loaded from a single
// human-editable JSON file. Defaults are the reference constants.
//
// Schema (all keys optional; missing keys keep their defaults):
//
//   score1_weights        {"cite": .45, "sec": .40, "infl": .15}
//   score2_weights        {"cite": .40, "sec": .35, "infl": .10, "sib": .15}
//   budget                {"floor": 12, "cap": 30, "fraction": 0.15}
//   cone_stage            "pre_rank" | "post_select"
//   section_weights       {"method": 1.0, "experiments": 0.8, ...}
//   section_keywords      [{"label": "appendix", "keywords": ["appendix", ...]}, ...]
//   title_match           {"fuzzy_threshold": 0.90, "year_tolerance": 1}
//   sampling              {"num_candidates": 10, "temperature": 0.9, "top_p": 0.95}
//   judge_dimensions      ["novelty", "significance", "feasibility", "clarity", "effectiveness"]
//   max_prompt_tokens     16384
//   max_authors           6
//   wtop1_field_weights   [0.2, 0.2, 0.2, 0.2, 0.2]
//   failure_budget        0.2
//   bootstrap_resamples   10000
//   workers               1
//   llm                   {"extractor": {...}, "judge": {...}, "generator": {...}}
//                         each {"backend": "stub"|"openai", "base_url", "model",
//                               "api_key_env", "stub_script", "max_retries"}

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "citedag/core_model.hpp"

namespace citedag {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Pass1Weights {
  double cite = 0.45;
  double sec = 0.40;
  double infl = 0.15;
  friend bool operator==(const Pass1Weights&, const Pass1Weights&) = default;
};

struct Pass2Weights {
  double cite = 0.40;
  double sec = 0.35;
  double infl = 0.10;
  double sib = 0.15;
  friend bool operator==(const Pass2Weights&, const Pass2Weights&) = default;
};

struct BudgetConfig {
  int floor = 12;
  int cap = 30;
  double fraction = 0.15;
  friend bool operator==(const BudgetConfig&, const BudgetConfig&) = default;
};

// Where the temporal cone is applied relative to ranking.
//   kPreRank:    cone filters the 2-hop pool, then ranking and the budget apply.
//   kPostSelect: ranking and the budget apply to the 2-hop pool, then the
//                cone filters the selected set.
enum class ConeStage { kPreRank, kPostSelect };

struct SectionKeywords {
  SectionLabel label = SectionLabel::kOther;
  std::vector<std::string> keywords;
  friend bool operator==(const SectionKeywords&, const SectionKeywords&) = default;
};

struct TitleMatchConfig {
  double fuzzy_threshold = 0.90;
  int year_tolerance = 1;
  friend bool operator==(const TitleMatchConfig&, const TitleMatchConfig&) = default;
};

struct SamplingConfig {
  int num_candidates = 10;
  double temperature = 0.9;
  double top_p = 0.95;
  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

struct LlmRoleConfig {
  std::string backend = "stub";  // "stub" or "openai"
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string stub_script;  // empty: synthetic stub replies
  int max_retries = 3;
  friend bool operator==(const LlmRoleConfig&, const LlmRoleConfig&) = default;
};

struct LlmConfig {
  LlmRoleConfig extractor;
  LlmRoleConfig judge;
  LlmRoleConfig generator;
  friend bool operator==(const LlmConfig&, const LlmConfig&) = default;
};

struct PipelineConfig {
  Pass1Weights score1_weights;
  Pass2Weights score2_weights;
  BudgetConfig budget;
  ConeStage cone_stage = ConeStage::kPreRank;
  std::map<SectionLabel, double> section_weights = default_section_weights();
  // Matched in list order; the first label with a keyword hit wins.
  std::vector<SectionKeywords> section_keywords = default_section_keywords();
  TitleMatchConfig title_match;
  SamplingConfig sampling;
  std::vector<std::string> judge_dimensions = {"novelty", "significance", "feasibility", "clarity",
                                               "effectiveness"};
  int max_prompt_tokens = 16384;
  int max_authors = 6;
  std::array<double, 5> wtop1_field_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  double failure_budget = 0.2;
  int bootstrap_resamples = 10000;
  int workers = 1;
  LlmConfig llm;

  static std::map<SectionLabel, double> default_section_weights();
  static std::vector<SectionKeywords> default_section_keywords();

  double section_weight(SectionLabel label) const;

  // Throws ConfigError on negative weights, weights not summing to 1,
  // inverted budget bounds and similar.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

std::string_view to_string(ConeStage stage);

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json_text(const std::string& text);
// Canonical JSON (sorted keys) of the full config.
std::string config_to_json_text(const PipelineConfig& config);
// sha256 hex of the canonical JSON.
std::string config_hash(const PipelineConfig& config);

}  // namespace citedag
