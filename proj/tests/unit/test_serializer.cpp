#include <gtest/gtest.h>

#include <random>

#include "citedag/serializer.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace citedag;
using citedag::testing::check_golden;
using citedag::testing::make_idea;
using citedag::testing::make_record;

namespace {

AnnotatedSubgraph one_node_graph() {
  AnnotatedSubgraph g;
  g.seed = make_record("seed", 2020);
  g.seed.venue = "NeurIPS";
  g.seed.idea = FiveFieldIdea{"Few-shot transfer without gradient updates.",
                              "Fine-tuning on task-specific labelled data.",
                              "Labelled data is scarce and fine-tuned models overfit to narrow distributions.",
                              "Scale an autoregressive language model and condition it on demonstrations.",
                              "Evaluate zero-, one- and few-shot accuracy on twenty benchmarks."};
  g.k_budget = 12;
  SubgraphNode n;
  n.record = make_record("n1", 2018);
  n.record.title = "Improving Language Understanding\nby Generative Pre-Training";
  n.record.venue = "";
  n.record.authors = {"Alec Radford", "Karthik Narasimhan", "Tim Salimans", "Ilya Sutskever", "Extra One",
                      "Extra Two", "Extra Three"};
  n.record.abstract_text = "Natural language understanding   comprises a wide range of tasks.";
  n.record.idea = make_idea("gpt1");
  n.seed_features = {1, {SectionLabel::kMethod, SectionLabel::kIntroduction}, 7, 1.0, 2, true, false, 0};
  g.nodes.push_back(n);
  return g;
}

AnnotatedSubgraph three_node_graph() {
  AnnotatedSubgraph g = one_node_graph();
  SubgraphNode b;
  b.record = make_record("n2", 2019);
  b.record.authors = {};
  b.seed_features = {2, {}, 0, 0.0, 1, false, true, 0};
  b.predecessors = {{PaperId("n1"), EdgeType::kExplicitPred, 1}};
  SubgraphNode c;
  c.record = make_record("n3", 2019);
  c.seed_features = {1, {SectionLabel::kExperiments}, 2, 0.8, 1, false, false, 0};
  c.predecessors = {{PaperId("n1"), EdgeType::kExplicitPred, 1}, {PaperId("n2"), EdgeType::kParallelPred, 0}};
  g.nodes.push_back(b);
  g.nodes.push_back(c);
  g.nodes[0].seed_features.cited_by_subgraph = 2;
  g.nodes[1].seed_features.cited_by_subgraph = 1;
  return g;
}

}  // namespace

TEST(Serializer, OneNodeGraphMatchesGolden) {
  EXPECT_EQ(check_golden("prompt_one_node.graph.txt", serialize_graph(one_node_graph())), "");
}

TEST(Serializer, OneNodePlainMatchesGolden) {
  EXPECT_EQ(check_golden("prompt_one_node.plain.txt", serialize_plain(one_node_graph())), "");
}

TEST(Serializer, TargetMatchesGolden) {
  EXPECT_EQ(check_golden("target.json", render_target(*one_node_graph().seed.idea) + "\n"), "");
}

TEST(Serializer, NodeHeaderDetails) {
  auto text = serialize_graph(one_node_graph());
  EXPECT_NE(text.find("## [1] Improving Language Understanding by Generative Pre-Training (2018, n/a) authors: "
                      "Alec Radford, Karthik Narasimhan, Tim Salimans, Ilya Sutskever, Extra One, Extra Two, et al."),
            std::string::npos);
  EXPECT_NE(text.find("     cited_in_sections = [introduction, method]"), std::string::npos);
  EXPECT_NE(text.find("     section_weight = 1.00"), std::string::npos);
  EXPECT_NE(text.find("   [ABSTRACT] Natural language understanding comprises a wide range of tasks."),
            std::string::npos);
  SerializeOptions narrow{2};
  EXPECT_NE(serialize_graph(one_node_graph(), narrow).find("authors: Alec Radford, Karthik Narasimhan, et al."),
            std::string::npos);
}

TEST(Serializer, MissingValuesRenderPlaceholders) {
  auto g = three_node_graph();
  g.nodes[1].record.abstract_text = "";
  g.nodes[1].record.idea = std::nullopt;
  auto text = serialize_graph(g);
  EXPECT_NE(text.find("authors: unknown"), std::string::npos);
  EXPECT_NE(text.find("   [IDEA -- 5 fields]\n     unavailable\n"), std::string::npos);
  EXPECT_NE(text.find("   [ABSTRACT]\n"), std::string::npos);
  EXPECT_NE(text.find("     - ref_idx=[2]  delta_yr=0  edge_type=parallel_pred\n"
                      "     - ref_idx=[1]  delta_yr=1  edge_type=explicit_pred\n"),
            std::string::npos);
  EXPECT_NE(text.find("# CITATION SUBGRAPH (3 refs, temporally ordered by year)"), std::string::npos);
}

TEST(Serializer, PredecessorsGroupByDeltaAndType) {
  AnnotatedSubgraph g = three_node_graph();
  SubgraphNode d;
  d.record = make_record("n4", 2019);
  d.seed_features = {1, {}, 1, 0.2, 1, false, false, 0};
  d.predecessors = {{PaperId("n1"), EdgeType::kExplicitPred, 1},
                    {PaperId("n2"), EdgeType::kParallelPred, 0},
                    {PaperId("n3"), EdgeType::kParallelPred, 0}};
  g.nodes.push_back(d);
  auto text = serialize_graph(g);
  EXPECT_NE(text.find("     - ref_idx=[2, 3]  delta_yr=0  edge_type=parallel_pred"), std::string::npos);
  auto parsed = parse_prompt(text);
  ASSERT_EQ(parsed.nodes.size(), 4u);
  EXPECT_EQ(parsed.nodes[3].predecessors.size(), 2u);
}

TEST(Serializer, PlainVariantDiffersOnlyStructurally) {
  auto g = three_node_graph();
  EXPECT_TRUE(citedag::testing::structural_delta_violations(serialize_graph(g), serialize_plain(g)).empty());
  for (const auto& graph : citedag::testing::fixture_corpus_graphs()) {
    auto violations =
        citedag::testing::structural_delta_violations(serialize_graph(graph), serialize_plain(graph));
    EXPECT_TRUE(violations.empty()) << graph.seed.id.str() << ": " << violations.front();
  }
}

TEST(Serializer, StructuralDeltaCheckerCatchesOtherDifferences) {
  auto g = one_node_graph();
  auto plain = serialize_plain(g);
  auto tampered = plain;
  tampered.replace(tampered.find("Natural"), 7, "Unnatural");
  EXPECT_FALSE(citedag::testing::structural_delta_violations(serialize_graph(g), tampered).empty());
}

TEST(Serializer, TargetRoundTripsAndRejectsBadJson) {
  auto idea = make_idea("x \"quoted\" \\ ünï");
  EXPECT_EQ(parse_idea(render_target(idea)), idea);
  auto target = render_target(idea);
  EXPECT_EQ(target.find("{\n  \"Problem\""), 0u);
  EXPECT_NE(target.back(), '\n');
  EXPECT_THROW(parse_idea("{}"), SerializeError);
  EXPECT_THROW(parse_idea("[1]"), SerializeError);
  EXPECT_THROW(parse_idea("not json"), SerializeError);
  EXPECT_THROW(parse_idea(R"({"Problem": 1, "Existing Methods": "", "Motivation": "", "Proposed Method": "",
                              "Experiment Plan": ""})"),
               SerializeError);
}

TEST(Serializer, SftExampleMasksTheConditioning) {
  auto g = three_node_graph();
  for (auto variant : {PromptVariant::kGraph, PromptVariant::kPlain}) {
    auto ex = make_sft_example(g, variant);
    EXPECT_EQ(ex.seed_id, PaperId("seed"));
    EXPECT_EQ(ex.completion(), ex.target);
    EXPECT_EQ(ex.conditioning(), serialize(g, variant));
    EXPECT_EQ(ex.prompt.size(), ex.mask_boundary + ex.target.size());
    EXPECT_EQ(ex.target, render_target(*g.seed.idea));
  }
  g.seed.idea = std::nullopt;
  EXPECT_THROW(make_sft_example(g, PromptVariant::kGraph), SerializeError);
}

TEST(Serializer, TaskBlockEndsThePrompt) {
  auto text = serialize_graph(one_node_graph());
  EXPECT_EQ(text.back(), '\n');
  EXPECT_NE(text.find("Problem"), text.rfind("Problem"));
  EXPECT_EQ(serialize(one_node_graph(), PromptVariant::kPlain), serialize_plain(one_node_graph()));
}

TEST(TokenEstimate, MatchesOracleOnRandomText) {
  std::mt19937_64 rng(3);
  const std::string alphabet = "abcXYZ019 \n\t.,;:{}[]()-_=\"'\xc3\xa9\xe2\x80\x94";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const int len = static_cast<int>(rng() % 200);
    for (int j = 0; j < len; ++j) s.push_back(alphabet[rng() % alphabet.size()]);
    ASSERT_EQ(estimate_tokens(s), oracle::token_estimate(s)) << s;
  }
  EXPECT_EQ(estimate_tokens(""), 0u);
  EXPECT_EQ(estimate_tokens("abcdef"), 1u);
  EXPECT_EQ(estimate_tokens("abcdefg"), 2u);
  EXPECT_EQ(estimate_tokens("a, b"), 3u);
}

TEST(PromptParser, RecoversStructureFromCorpusPrompts) {
  for (const auto& g : citedag::testing::fixture_corpus_graphs()) {
    auto parsed = parse_prompt(serialize_graph(g));
    EXPECT_EQ(parsed.variant, PromptVariant::kGraph);
    EXPECT_EQ(parsed.seed_year, std::to_string(*g.seed.year));
    ASSERT_EQ(parsed.nodes.size(), g.nodes.size());
    EXPECT_EQ(parsed.declared_count, static_cast<int>(g.nodes.size()));
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto& node = g.nodes[i];
      const auto& pn = parsed.nodes[i];
      EXPECT_EQ(pn.index, static_cast<int>(i + 1));
      EXPECT_EQ(pn.year, std::to_string(*node.record.year));
      ASSERT_TRUE(pn.features.has_value());
      EXPECT_EQ(pn.features->layer_depth, node.seed_features.layer_depth);
      EXPECT_EQ(pn.features->cite_count, node.seed_features.cite_count);
      EXPECT_EQ(pn.features->cited_in_sections, node.seed_features.cited_in_sections);
      EXPECT_EQ(pn.features->cited_by_subgraph, node.seed_features.cited_by_subgraph);
      EXPECT_EQ(pn.direct_to_seed, node.direct_to_seed());
      EXPECT_EQ(pn.idea.has_value(), node.record.idea.has_value());
      std::size_t refs = 0;
      for (const auto& grp : pn.predecessors) {
        refs += grp.ref_idx.size();
        for (int r : grp.ref_idx) {
          ASSERT_GE(r, 1);
          ASSERT_LT(r, static_cast<int>(i + 1) + static_cast<int>(g.nodes.size()));
          const auto& pred = g.nodes[r - 1];
          EXPECT_EQ(*node.record.year - *pred.record.year, grp.delta_yr);
        }
      }
      EXPECT_EQ(refs, node.predecessors.size());
    }
    auto plain = parse_prompt(serialize_plain(g));
    EXPECT_EQ(plain.variant, PromptVariant::kPlain);
    EXPECT_EQ(plain.nodes.size(), g.nodes.size());
    EXPECT_FALSE(plain.nodes.front().features.has_value());
  }
}
