#include "citedag/surface_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "citedag/util.hpp"

namespace citedag {

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (const auto& x : a) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = x == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::string_view candidate, std::string_view reference) {
  const auto c = rouge_tokens(candidate);
  const auto r = rouge_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  return 2 * p * rec / (p + rec);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.values.size() != v.values.size())
    throw DimensionMismatch("cosine of vectors with lengths " + std::to_string(u.values.size()) + " and " +
                            std::to_string(v.values.size()));
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu == 0 || nv == 0) throw ZeroNorm("cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double wtop1(std::span<const FieldEmbeddings> candidates, const FieldEmbeddings& gold, const std::array<double, 5>& weights) {
  if (candidates.empty()) throw NoValidCandidate("wtop1 needs at least one candidate");
  double total = 0;
  for (double w : weights) {
    if (w < 0) throw MetricError("wtop1 weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw MetricError("wtop1 weights must sum to 1");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    double s = 0;
    for (std::size_t f = 0; f < 5; ++f) s += weights[f] * cosine(c[f], gold[f]);
    best = std::max(best, s);
  }
  return best;
}

double method_rouge_l(const FiveFieldIdea& candidate, const FiveFieldIdea& gold) {
  return rouge_l_f1(candidate.proposed_method, gold.proposed_method);
}

OracleChoice oracle_top1(std::span<const FiveFieldIdea> candidates, const FiveFieldIdea& gold, const IdeaMetric& metric) {
  std::optional<OracleChoice> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].is_valid()) continue;
    const double s = metric(candidates[i], gold);
    if (!best || s > best->score) best = OracleChoice{i, s};
  }
  if (!best) throw NoValidCandidate("oracle_top1: no valid candidate");
  return *best;
}

EmbeddingSet embeddings_from_text(const std::string& text) {
  using nlohmann::json;
  EmbeddingSet set;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  std::map<PaperId, std::map<std::string, std::array<std::optional<EmbeddingVector>, 5>>> partial;
  const auto& names = FiveFieldIdea::field_names();
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto where = "embeddings line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw MetricError(where + ": " + e.what());
    }
    if (!header) {
      if (!j.contains("dimension") || !j["dimension"].is_number_unsigned() || j["dimension"].get<std::size_t>() == 0)
        throw MetricError(where + ": header needs a positive \"dimension\"");
      set.dimension = j["dimension"].get<std::size_t>();
      set.source_tag = j.value("source_tag", "");
      header = true;
      continue;
    }
    try {
      PaperId seed(j.at("seed_id").get<std::string>());
      const auto role = j.at("role").get<std::string>();
      const auto field = j.at("field").get<std::string>();
      auto values = j.at("vector").get<std::vector<double>>();
      auto f = std::ranges::find(names, field);
      if (f == names.end()) throw MetricError("unknown field " + field);
      if (role != "gold" && (role.rfind("candidate_", 0) != 0 || role.size() == 10))
        throw MetricError("unknown role " + role);
      if (values.size() != set.dimension)
        throw DimensionMismatch("vector length " + std::to_string(values.size()) + " != " + std::to_string(set.dimension));
      auto& slot = partial[seed][role][static_cast<std::size_t>(f - names.begin())];
      if (slot) throw MetricError("duplicate vector for " + seed.str() + " " + role + " " + field);
      slot = EmbeddingVector{std::move(values), set.source_tag};
    } catch (const json::exception& e) {
      throw MetricError(where + ": " + e.what());
    } catch (const MetricError& e) {
      throw MetricError(where + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw MetricError(where + ": " + e.what());
    }
  }
  if (!header) throw MetricError("embedding file is empty");
  for (auto& [seed, roles] : partial) {
    auto& out = set.seeds[seed];
    for (auto& [role, fields] : roles) {
      FieldEmbeddings full;
      for (std::size_t f = 0; f < 5; ++f) {
        if (!fields[f]) throw MetricError("seed " + seed.str() + " role " + role + " lacks field " + names[f]);
        full[f] = std::move(*fields[f]);
      }
      if (role == "gold") {
        out.gold = std::move(full);
      } else {
        int k = 0;
        try {
          k = std::stoi(role.substr(10));
        } catch (const std::exception&) {
          throw MetricError("bad candidate role " + role);
        }
        out.candidates[k] = std::move(full);
      }
    }
  }
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MetricError("embedding file not found: " + path.string());
  return embeddings_from_text(read_file(path));
}

namespace {

std::string f4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_metrics_report(const std::vector<MetricsRow>& rows, const std::array<double, 5>& weights,
                                  const std::string& embedding_source) {
  std::ostringstream out;
  out << "# rouge_l_method: ROUGE-L F1 on Proposed Method, lowercase alphanumeric tokens, oracle top-1 over candidates\n";
  out << "# wtop1 weights:";
  for (double w : weights) out << " " << f4(w);
  out << "  embeddings: " << (embedding_source.empty() ? "none" : embedding_source) << "\n";
  out << "# bert_f1 is out of scope (needs model inference)\n";
  out << "seed_id\tvalid_candidates\toracle_index\trouge_l_method\twtop1\tbert_f1\n";
  double rouge_sum = 0, wtop_sum = 0;
  std::size_t wtop_n = 0;
  for (const auto& r : rows) {
    out << r.seed.str() << "\t" << r.valid_candidates << "\t" << r.oracle_index << "\t" << f4(r.rouge_l) << "\t"
        << (r.wtop1 ? f4(*r.wtop1) : "n/a") << "\tout_of_scope\n";
    rouge_sum += r.rouge_l;
    if (r.wtop1) {
      wtop_sum += *r.wtop1;
      ++wtop_n;
    }
  }
  if (!rows.empty())
    out << "MEAN\t\t\t" << f4(rouge_sum / static_cast<double>(rows.size())) << "\t"
        << (wtop_n ? f4(wtop_sum / static_cast<double>(wtop_n)) : "n/a") << "\tout_of_scope\n";
  return out.str();
}

}  // namespace citedag
