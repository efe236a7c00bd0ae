#include <gtest/gtest.h>

#include <random>

#include "citedag/surface_metrics.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace citedag;
using citedag::testing::fixture;
using citedag::testing::make_idea;

namespace {

std::string random_text(std::mt19937_64& rng, int max_tokens) {
  static const std::vector<std::string> vocab = {"the", "Graph", "of", "citations", "model", "idea", "A", "b",
                                                 "x1", "seed", "THE", "über"};
  static const std::vector<std::string> seps = {" ", ", ", ". ", "-", "\n", " (", ") "};
  std::string s;
  const int n = static_cast<int>(rng() % static_cast<unsigned>(max_tokens + 1));
  for (int i = 0; i < n; ++i) {
    if (i) s += seps[rng() % seps.size()];
    s += vocab[rng() % vocab.size()];
  }
  return s;
}

EmbeddingVector vec(std::vector<double> v) { return {std::move(v), "t"}; }

FieldEmbeddings random_fields(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(-1, 1);
  FieldEmbeddings f;
  for (auto& e : f) {
    e.values.resize(dim);
    for (auto& x : e.values) x = u(rng);
  }
  return f;
}

double brute_wtop1(const std::vector<FieldEmbeddings>& cands, const FieldEmbeddings& gold,
                   const std::array<double, 5>& w) {
  double best = -2;
  for (const auto& c : cands) {
    double s = 0;
    for (std::size_t f = 0; f < 5; ++f) s += w[f] * oracle::cosine(c[f].values, gold[f].values);
    if (s > best) best = s;
  }
  return best;
}

}  // namespace

TEST(Rouge, TokenizationMatchesOracle) {
  EXPECT_EQ(rouge_tokens("Hello, World-42 it's"), (std::vector<std::string>{"hello", "world", "42", "it", "s"}));
  EXPECT_EQ(rouge_tokens("  "), std::vector<std::string>{});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    auto t = random_text(rng, 30);
    ASSERT_EQ(rouge_tokens(t), oracle::tokens(t)) << t;
  }
}

TEST(Rouge, F1MatchesDynamicProgrammingOracle) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_text(rng, 40);
    auto b = random_text(rng, 40);
    const auto ta = oracle::tokens(a), tb = oracle::tokens(b);
    ASSERT_EQ(lcs_length(ta, tb), oracle::lcs(ta, tb));
    ASSERT_NEAR(rouge_l_f1(a, b), oracle::rouge_l(ta, tb), 1e-12) << a << " | " << b;
  }
}

TEST(Rouge, KnownValues) {
  EXPECT_DOUBLE_EQ(rouge_l_f1("a b c", "a b c"), 1.0);
  EXPECT_DOUBLE_EQ(rouge_l_f1("a b c", "d e"), 0.0);
  EXPECT_DOUBLE_EQ(rouge_l_f1("", "a"), 0.0);
  // lcs("a b c d", "a c") = 2: p = .5, r = 1
  EXPECT_NEAR(rouge_l_f1("a b c d", "a c"), 2 * 0.5 / 1.5, 1e-15);
  EXPECT_DOUBLE_EQ(rouge_l_f1("a b", "b a"), 0.5);
}

TEST(Cosine, ScaleInvarianceAndErrors) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3, 3), scale(0.001, 1000);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(16), b(16);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const double base = cosine(vec(a), vec(b));
    const double s = scale(rng), t = scale(rng);
    auto as = a, bt = b;
    for (auto& x : as) x *= s;
    for (auto& x : bt) x *= t;
    ASSERT_NEAR(cosine(vec(as), vec(bt)), base, 1e-9);
    ASSERT_NEAR(base, oracle::cosine(a, b), 1e-12);
  }
  EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine(vec({1, 1}), vec({-2, -2})), -1.0);
  EXPECT_THROW(cosine(vec({1, 2}), vec({1, 2, 3})), DimensionMismatch);
  EXPECT_THROW(cosine(vec({0, 0}), vec({1, 2})), ZeroNorm);
}

TEST(WTop1, EqualsBruteForceAndIsMonotone) {
  std::mt19937_64 rng(34);
  const std::array<double, 5> w = {0.1, 0.2, 0.3, 0.25, 0.15};
  for (int i = 0; i < 1000; ++i) {
    const auto gold = random_fields(rng, 6);
    std::vector<FieldEmbeddings> cands;
    double prev = -2;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) {
      cands.push_back(random_fields(rng, 6));
      const double v = wtop1(cands, gold, w);
      ASSERT_GE(v, prev);
      ASSERT_NEAR(v, brute_wtop1(cands, gold, w), 1e-12);
      prev = v;
    }
  }
}

TEST(WTop1, ScalingCandidateVectorsChangesNothing) {
  std::mt19937_64 rng(55);
  const auto gold = random_fields(rng, 5);
  std::vector<FieldEmbeddings> cands = {random_fields(rng, 5), random_fields(rng, 5)};
  const double base = wtop1(cands, gold);
  for (auto& c : cands)
    for (auto& f : c)
      for (auto& x : f.values) x *= 37.5;
  EXPECT_NEAR(wtop1(cands, gold), base, 1e-9);
}

TEST(WTop1, RejectsBadWeightsAndEmptyInput) {
  std::mt19937_64 rng(1);
  const auto gold = random_fields(rng, 3);
  std::vector<FieldEmbeddings> cands = {random_fields(rng, 3)};
  EXPECT_THROW(wtop1({}, gold), NoValidCandidate);
  EXPECT_THROW(wtop1(cands, gold, {0.5, 0.5, 0.5, 0, 0}), MetricError);
  EXPECT_THROW(wtop1(cands, gold, {-0.2, 0.4, 0.4, 0.2, 0.2}), MetricError);
  EXPECT_NO_THROW(wtop1(cands, gold, {1, 0, 0, 0, 0}));
}

TEST(OracleTop1, PicksBestValidLowestIndexOnTies) {
  const auto gold = make_idea("alpha beta");
  std::vector<FiveFieldIdea> cands = {make_idea("gamma"), FiveFieldIdea{}, make_idea("alpha beta"),
                                      make_idea("alpha beta")};
  auto best = oracle_top1(cands, gold, method_rouge_l);
  EXPECT_EQ(best.index, 2u);
  EXPECT_DOUBLE_EQ(best.score, 1.0);
  std::vector<FiveFieldIdea> none = {FiveFieldIdea{}};
  EXPECT_THROW(oracle_top1(none, gold, method_rouge_l), NoValidCandidate);
}

TEST(Embeddings, LoadFixtureFile) {
  auto set = load_embeddings(fixture("eval/embeddings.jsonl"));
  EXPECT_EQ(set.dimension, 8u);
  EXPECT_EQ(set.source_tag, "fixture-random");
  ASSERT_EQ(set.seeds.size(), 3u);
  const auto& seed = set.seeds.at(PaperId("gpt3"));
  EXPECT_TRUE(seed.gold.has_value());
  EXPECT_EQ(seed.candidates.size(), 4u);
  EXPECT_EQ(seed.candidates.at(3)[4].values.size(), 8u);
}

TEST(Embeddings, MalformedInputsAreRejected) {
  const std::string header = R"({"dimension": 2, "source_tag": "t"})";
  auto line = [](const std::string& role, const std::string& field, const std::string& v) {
    return "{\"seed_id\": \"s\", \"role\": \"" + role + "\", \"field\": \"" + field + "\", \"vector\": " + v + "}\n";
  };
  std::string full = header + "\n";
  for (const auto* f : {"Problem", "Existing Methods", "Motivation", "Proposed Method", "Experiment Plan"})
    full += line("gold", f, "[1, 2]");
  EXPECT_NO_THROW(embeddings_from_text(full));
  EXPECT_THROW(embeddings_from_text(""), MetricError);
  EXPECT_THROW(embeddings_from_text(R"({"dimension": 0})"), MetricError);
  EXPECT_THROW(embeddings_from_text(header + "\n" + line("gold", "Problem", "[1, 2]")), MetricError);
  EXPECT_THROW(embeddings_from_text(full + line("gold", "Problem", "[1, 2]")), MetricError);
  EXPECT_THROW(embeddings_from_text(full + line("gold", "Title", "[1, 2]")), MetricError);
  EXPECT_THROW(embeddings_from_text(full + line("judge", "Problem", "[1, 2]")), MetricError);
  EXPECT_THROW(embeddings_from_text(full + line("candidate_0", "Problem", "[1, 2, 3]")), MetricError);
  EXPECT_THROW(embeddings_from_text(full + "not json\n"), MetricError);
  EXPECT_THROW(load_embeddings("/no/such/file.jsonl"), MetricError);
}

TEST(MetricsReport, LayoutAndMeans) {
  std::vector<MetricsRow> rows = {{PaperId("a"), 3, 1, 0.5, 0.25}, {PaperId("b"), 2, 0, 0.25, std::nullopt}};
  auto text = render_metrics_report(rows, {0.2, 0.2, 0.2, 0.2, 0.2}, "tag");
  EXPECT_NE(text.find("a\t3\t1\t0.5000\t0.2500\tout_of_scope\n"), std::string::npos);
  EXPECT_NE(text.find("b\t2\t0\t0.2500\tn/a\tout_of_scope\n"), std::string::npos);
  EXPECT_NE(text.find("MEAN\t\t\t0.3750\t0.2500\tout_of_scope\n"), std::string::npos);
  EXPECT_NE(text.find("embeddings: tag"), std::string::npos);
}
