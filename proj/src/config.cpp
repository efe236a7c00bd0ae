#include "citedag/config.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "citedag/util.hpp"

namespace citedag {

using json = nlohmann::json;

std::map<SectionLabel, double> PipelineConfig::default_section_weights() {
  return {
      {SectionLabel::kMethod, 1.0},      {SectionLabel::kExperiments, 0.8},
      {SectionLabel::kIntroduction, 0.6}, {SectionLabel::kRelatedWork, 0.4},
      {SectionLabel::kConclusion, 0.4},  {SectionLabel::kAppendix, 0.2},
      {SectionLabel::kOther, 0.2},
  };
}

std::vector<SectionKeywords> PipelineConfig::default_section_keywords() {
  return {
      {SectionLabel::kAppendix, {"appendix", "appendices", "supplementary", "supplemental"}},
      {SectionLabel::kRelatedWork, {"related work", "background", "prior work", "previous work", "literature"}},
      {SectionLabel::kIntroduction, {"introduction", "intro", "overview"}},
      {SectionLabel::kExperiments,
       {"experiment", "evaluation", "result", "analysis", "ablation", "benchmark", "empirical", "setup"}},
      {SectionLabel::kConclusion, {"conclusion", "concluding", "discussion", "limitation", "future work", "summary"}},
      {SectionLabel::kMethod,
       {"method", "approach", "model", "framework", "architecture", "proposed", "algorithm", "preliminar",
        "formulation", "training", "technique"}},
  };
}

double PipelineConfig::section_weight(SectionLabel label) const {
  auto it = section_weights.find(label);
  return it == section_weights.end() ? 0.0 : it->second;
}

std::string_view to_string(ConeStage stage) {
  return stage == ConeStage::kPreRank ? "pre_rank" : "post_select";
}

void PipelineConfig::validate() const {
  auto check_weights = [](std::initializer_list<double> weights, const char* name) {
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError(std::string(name) + ": weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(name) + ": weights must sum to 1");
  };
  check_weights({score1_weights.cite, score1_weights.sec, score1_weights.infl}, "score1_weights");
  check_weights({score2_weights.cite, score2_weights.sec, score2_weights.infl, score2_weights.sib},
                "score2_weights");
  check_weights({wtop1_field_weights[0], wtop1_field_weights[1], wtop1_field_weights[2],
                 wtop1_field_weights[3], wtop1_field_weights[4]},
                "wtop1_field_weights");
  if (budget.floor < 1 || budget.cap < budget.floor)
    throw ConfigError("budget: need 1 <= floor <= cap");
  if (!(budget.fraction > 0.0)) throw ConfigError("budget: fraction must be positive");
  for (const auto& [label, w] : section_weights)
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("section_weights: values must lie in [0,1]");
  if (!(title_match.fuzzy_threshold > 0.0 && title_match.fuzzy_threshold <= 1.0))
    throw ConfigError("title_match.fuzzy_threshold must lie in (0,1]");
  if (title_match.year_tolerance < 0) throw ConfigError("title_match.year_tolerance must be >= 0");
  if (sampling.num_candidates < 1) throw ConfigError("sampling.num_candidates must be >= 1");
  if (!(sampling.temperature >= 0.0)) throw ConfigError("sampling.temperature must be >= 0");
  if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0)) throw ConfigError("sampling.top_p must lie in (0,1]");
  if (judge_dimensions.size() != 5) throw ConfigError("judge_dimensions must list exactly 5 labels");
  if (max_prompt_tokens < 1) throw ConfigError("max_prompt_tokens must be positive");
  if (max_authors < 1) throw ConfigError("max_authors must be positive");
  if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) throw ConfigError("failure_budget must lie in [0,1]");
  if (bootstrap_resamples < 1) throw ConfigError("bootstrap_resamples must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

namespace {

json role_to_json(const LlmRoleConfig& r) {
  return {{"backend", r.backend},   {"base_url", r.base_url},         {"model", r.model},
          {"api_key_env", r.api_key_env}, {"stub_script", r.stub_script}, {"max_retries", r.max_retries}};
}

void role_from_json(const json& j, LlmRoleConfig& r) {
  r.backend = j.value("backend", r.backend);
  r.base_url = j.value("base_url", r.base_url);
  r.model = j.value("model", r.model);
  r.api_key_env = j.value("api_key_env", r.api_key_env);
  r.stub_script = j.value("stub_script", r.stub_script);
  r.max_retries = j.value("max_retries", r.max_retries);
  if (r.backend != "stub" && r.backend != "openai")
    throw ConfigError("llm backend must be 'stub' or 'openai', got '" + r.backend + "'");
}

SectionLabel parse_label(const std::string& text) {
  auto label = section_label_from_string(text);
  if (!label) throw ConfigError("unknown section label '" + text + "'");
  return *label;
}

json config_to_json(const PipelineConfig& c) {
  json weights = json::object();
  for (const auto& [label, w] : c.section_weights) weights[std::string(to_string(label))] = w;
  json keywords = json::array();
  for (const auto& entry : c.section_keywords)
    keywords.push_back({{"label", std::string(to_string(entry.label))}, {"keywords", entry.keywords}});
  return json{
      {"score1_weights", {{"cite", c.score1_weights.cite}, {"sec", c.score1_weights.sec}, {"infl", c.score1_weights.infl}}},
      {"score2_weights",
       {{"cite", c.score2_weights.cite}, {"sec", c.score2_weights.sec}, {"infl", c.score2_weights.infl}, {"sib", c.score2_weights.sib}}},
      {"budget", {{"floor", c.budget.floor}, {"cap", c.budget.cap}, {"fraction", c.budget.fraction}}},
      {"cone_stage", std::string(to_string(c.cone_stage))},
      {"section_weights", weights},
      {"section_keywords", keywords},
      {"title_match", {{"fuzzy_threshold", c.title_match.fuzzy_threshold}, {"year_tolerance", c.title_match.year_tolerance}}},
      {"sampling",
       {{"num_candidates", c.sampling.num_candidates}, {"temperature", c.sampling.temperature}, {"top_p", c.sampling.top_p}}},
      {"judge_dimensions", c.judge_dimensions},
      {"max_prompt_tokens", c.max_prompt_tokens},
      {"max_authors", c.max_authors},
      {"wtop1_field_weights", c.wtop1_field_weights},
      {"failure_budget", c.failure_budget},
      {"bootstrap_resamples", c.bootstrap_resamples},
      {"workers", c.workers},
      {"llm", {{"extractor", role_to_json(c.llm.extractor)}, {"judge", role_to_json(c.llm.judge)}, {"generator", role_to_json(c.llm.generator)}}},
  };
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  PipelineConfig c;
  try {
    if (auto it = j.find("score1_weights"); it != j.end()) {
      c.score1_weights.cite = it->value("cite", c.score1_weights.cite);
      c.score1_weights.sec = it->value("sec", c.score1_weights.sec);
      c.score1_weights.infl = it->value("infl", c.score1_weights.infl);
    }
    if (auto it = j.find("score2_weights"); it != j.end()) {
      c.score2_weights.cite = it->value("cite", c.score2_weights.cite);
      c.score2_weights.sec = it->value("sec", c.score2_weights.sec);
      c.score2_weights.infl = it->value("infl", c.score2_weights.infl);
      c.score2_weights.sib = it->value("sib", c.score2_weights.sib);
    }
    if (auto it = j.find("budget"); it != j.end()) {
      c.budget.floor = it->value("floor", c.budget.floor);
      c.budget.cap = it->value("cap", c.budget.cap);
      c.budget.fraction = it->value("fraction", c.budget.fraction);
    }
    if (auto it = j.find("cone_stage"); it != j.end()) {
      const auto stage = it->get<std::string>();
      if (stage == "pre_rank") c.cone_stage = ConeStage::kPreRank;
      else if (stage == "post_select") c.cone_stage = ConeStage::kPostSelect;
      else throw ConfigError("cone_stage must be 'pre_rank' or 'post_select'");
    }
    if (auto it = j.find("section_weights"); it != j.end()) {
      for (const auto& [key, value] : it->items()) c.section_weights[parse_label(key)] = value.get<double>();
    }
    if (auto it = j.find("section_keywords"); it != j.end()) {
      c.section_keywords.clear();
      for (const auto& entry : *it) {
        SectionKeywords kw{parse_label(entry.at("label").get<std::string>()),
                           entry.at("keywords").get<std::vector<std::string>>()};
        for (auto& k : kw.keywords) k = to_lower_ascii(k);
        c.section_keywords.push_back(std::move(kw));
      }
    }
    if (auto it = j.find("title_match"); it != j.end()) {
      c.title_match.fuzzy_threshold = it->value("fuzzy_threshold", c.title_match.fuzzy_threshold);
      c.title_match.year_tolerance = it->value("year_tolerance", c.title_match.year_tolerance);
    }
    if (auto it = j.find("sampling"); it != j.end()) {
      c.sampling.num_candidates = it->value("num_candidates", c.sampling.num_candidates);
      c.sampling.temperature = it->value("temperature", c.sampling.temperature);
      c.sampling.top_p = it->value("top_p", c.sampling.top_p);
    }
    c.judge_dimensions = j.value("judge_dimensions", c.judge_dimensions);
    c.max_prompt_tokens = j.value("max_prompt_tokens", c.max_prompt_tokens);
    c.max_authors = j.value("max_authors", c.max_authors);
    c.wtop1_field_weights = j.value("wtop1_field_weights", c.wtop1_field_weights);
    c.failure_budget = j.value("failure_budget", c.failure_budget);
    c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
    c.workers = j.value("workers", c.workers);
    if (auto it = j.find("llm"); it != j.end()) {
      if (it->contains("extractor")) role_from_json(it->at("extractor"), c.llm.extractor);
      if (it->contains("judge")) role_from_json(it->at("judge"), c.llm.judge);
      if (it->contains("generator")) role_from_json(it->at("generator"), c.llm.generator);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return config_from_json_text(read_file(path));
}

std::string config_to_json_text(const PipelineConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

std::string config_hash(const PipelineConfig& config) {
  return sha256_hex(config_to_json(config).dump());
}

}  // namespace citedag
