#include <gtest/gtest.h>

#include <cmath>

#include "agcr/error.hpp"
#include "agcr/taxonomy.hpp"
#include "toy_data.hpp"

using namespace agcr;
using namespace agcr::taxonomy;

namespace {

LabelEmbedding table(std::vector<std::string> labels, std::vector<float> values, std::size_t dim) {
  return LabelEmbedding(std::move(labels), dim, std::move(values));
}

bool is_edge(const LabelTaxonomy& tax, const std::string& parent, const std::string& child) {
  return tax.is_parent(*tax.find(parent), *tax.find(child));
}

// Every consecutive triple turns around at its middle label: up-then-down or down-then-up.
void expect_valid_walk(const LabelTaxonomy& tax, const Walk& w) {
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    ASSERT_TRUE(is_edge(tax, w[i], w[i + 1]) || is_edge(tax, w[i + 1], w[i])) << w[i] << " " << w[i + 1];
  }
  for (std::size_t i = 0; i + 2 < w.size(); ++i) {
    const bool up_down = is_edge(tax, w[i + 1], w[i]) && is_edge(tax, w[i + 1], w[i + 2]);
    const bool down_up = is_edge(tax, w[i], w[i + 1]) && is_edge(tax, w[i + 2], w[i + 1]);
    ASSERT_TRUE(up_down || down_up) << w[i] << " " << w[i + 1] << " " << w[i + 2];
  }
}

}  // namespace

TEST(Taxonomy, ParseTwoEdges) {
  auto tax = parse_taxonomy("A\tB\nA\tC\n");
  EXPECT_EQ(tax.size(), 3u);
  EXPECT_EQ(tax.edges().size(), 2u);
  EXPECT_EQ(tax.labels(), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_TRUE(is_edge(tax, "A", "C"));
  EXPECT_FALSE(is_edge(tax, "C", "A"));
}

TEST(Taxonomy, ParseAcceptsCycleAndDuplicates) {
  auto tax = parse_taxonomy(
      "Economic\tInternational trade\nInternational trade\tArms sales\n"
      "Economic\tDefense economy\nDefense economy\tArms sales\nArms sales\tEconomic\nEconomic\tDefense economy\n");
  EXPECT_EQ(tax.size(), 4u);
  EXPECT_EQ(tax.edges().size(), 5u);
  EXPECT_EQ(tax.parents(*tax.find("Arms sales")).size(), 2u);
}

TEST(Taxonomy, SingleColumnDeclaresIsolatedLabel) {
  auto tax = parse_taxonomy("solo\r\nA\tB\n");
  EXPECT_EQ(tax.size(), 3u);
  EXPECT_TRUE(tax.parents(0).empty());
  EXPECT_TRUE(tax.children(0).empty());
}

TEST(Taxonomy, EmptyFileIsAnError) {
  EXPECT_THROW(parse_taxonomy(""), ParseError);
  EXPECT_THROW(parse_taxonomy("\n\n"), ParseError);
}

TEST(Taxonomy, MalformedLineNamesLine) {
  try {
    parse_taxonomy("A\tB\nA\tB\tC\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Walks, IsolatedLabelStaysPut) {
  auto tax = parse_taxonomy("solo\n");
  auto walks = metapath_walks(tax, {.walks_per_node = 4, .steps = 50, .seed = 1});
  ASSERT_EQ(walks.size(), 4u);
  for (const auto& w : walks) EXPECT_EQ(w, (Walk{"solo"}));
}

TEST(Walks, ChainAlternates) {
  auto tax = parse_taxonomy("A\tB\n");
  auto walks = metapath_walks(tax, {.walks_per_node = 3, .steps = 7, .seed = 5});
  for (const auto& w : walks) {
    ASSERT_EQ(w.size(), 8u);
    for (std::size_t i = 1; i < w.size(); ++i) EXPECT_NE(w[i], w[i - 1]);
  }
  EXPECT_EQ(walks[3], (Walk{"B", "A", "B", "A", "B", "A", "B", "A"}));
}

TEST(Walks, DefaultStepCount) { EXPECT_EQ(WalkConfig{}.steps, 500u); }

TEST(Walks, EveryTripleIsAMetaPath) {
  for (std::size_t cycles : {0u, 3u, 8u}) {
    auto tax = agcr::testing::synthetic_taxonomy(cycles, 17 + cycles);
    auto walks = metapath_walks(tax, {.walks_per_node = 5, .steps = 60, .seed = 3});
    EXPECT_EQ(walks.size(), tax.size() * 5);
    for (const auto& w : walks) {
      EXPECT_LE(w.size(), 61u);
      expect_valid_walk(tax, w);
    }
  }
  auto toy = agcr::testing::toy_taxonomy();
  for (const auto& w : metapath_walks(toy, {.walks_per_node = 10, .steps = 100, .seed = 9})) expect_valid_walk(toy, w);
}

TEST(Walks, IndependentOfThreadCount) {
  auto tax = agcr::testing::synthetic_taxonomy(4, 2);
  WalkConfig cfg{.walks_per_node = 3, .steps = 40, .seed = 8};
  auto serial = metapath_walks(tax, cfg);
  cfg.threads = 4;
  EXPECT_EQ(metapath_walks(tax, cfg), serial);
}

TEST(LabelEmbedding, DisjointPairsSeparate) {
  auto tax = parse_taxonomy("A\tB\nC\tD\n");
  skipgram::SkipgramConfig sg;
  sg.dim = 16;
  sg.epochs = 5;
  sg.window = 2;
  auto emb = embed_labels(tax, {.walks_per_node = 20, .steps = 40, .seed = 2}, sg);
  EXPECT_EQ(emb.vocab(), tax.labels());
  const auto& ce = emb;
  auto d = [&](const char* a, const char* b) { return skipgram::cosine_distance(ce.row(*ce.find(a)), ce.row(*ce.find(b))); };
  EXPECT_LT(d("A", "B"), d("A", "C"));
  EXPECT_LT(d("A", "B"), d("B", "D"));
  EXPECT_LT(d("C", "D"), d("A", "D"));
  auto again = embed_labels(tax, {.walks_per_node = 20, .steps = 40, .seed = 2}, sg);
  EXPECT_EQ(again.data(), emb.data());
}

TEST(LabelEmbedding, IsolatedLabelGetsZeroVectorWhenMissing) {
  auto tax = parse_taxonomy("A\tB\nsolo\n");
  skipgram::SkipgramConfig sg;
  sg.dim = 4;
  sg.epochs = 1;
  sg.min_count = 2;
  auto emb = embed_labels(tax, {.walks_per_node = 1, .steps = 4, .seed = 1}, sg);
  for (float x : emb.row(*emb.find("solo"))) EXPECT_EQ(x, 0.f);
}

TEST(Alpha, Examples) {
  auto emb = table({"t", "same", "orth", "neg"}, {1, 0, 1, 0, 0, 1, -1, 0}, 2);
  auto a = alpha_weights(emb, {"t"}, {"t", "same", "orth", "neg", "missing"});
  EXPECT_EQ(a.size(), 4u);
  EXPECT_FALSE(a.contains("t"));
  EXPECT_NEAR(a["same"], 0.0, 1e-12);
  EXPECT_NEAR(a["orth"], 1.0, 1e-12);
  EXPECT_NEAR(a["neg"], 1.0, 1e-12);
  EXPECT_NEAR(a["missing"], 1.0, 1e-12);
}

TEST(Alpha, UsesClosestPositive) {
  auto emb = table({"t1", "t2", "k"}, {1, 0, 0, 1, 1, 1}, 2);
  auto a = alpha_weights(emb, {"t1", "t2"}, {"t1", "t2", "k"});
  EXPECT_NEAR(a["k"], 1.0 - 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_THROW(alpha_weights(emb, {}, {"k"}), Error);
}

TEST(CalibrateP, Examples) {
  AlphaTable hundred;
  for (int i = 0; i < 200; ++i) hundred["l" + std::to_string(i)] = 0.5;
  EXPECT_NEAR(calibrate_p({hundred, hundred, hundred}), 0.01, 1e-12);
  EXPECT_NEAR(calibrate_p({{{"a", 1.0}, {"b", 1.0}, {"c", 2.0}}}), 0.25, 1e-12);
  EXPECT_THROW(calibrate_p({}), Error);
  EXPECT_THROW(calibrate_p({{{"a", 0.0}}}), Error);
}

TEST(CalibrateP, NormalizesMeanWeightedSum) {
  Rng rng(4);
  std::vector<AlphaTable> tables(30);
  for (auto& t : tables) {
    for (int k = 0; k < 12; ++k) t["l" + std::to_string(k)] = rng.uniform();
  }
  const double p = calibrate_p(tables);
  double mean = 0.0;
  for (const auto& t : tables) {
    for (const auto& [_, a] : t) mean += p * a;
  }
  EXPECT_NEAR(mean / tables.size(), 1.0, 1e-12);
}

TEST(Reconstruction, ExtremeThresholds) {
  auto tax = agcr::testing::toy_taxonomy();
  auto emb = agcr::testing::toy_label_embedding();
  auto pts = reconstruct_eval(emb, tax, {-1.0, 1.5});
  ASSERT_EQ(pts.size(), 2u);
  const double pairs = 8.0 * 7.0 / 2.0;
  EXPECT_EQ(pts[0].predicted_edges, 28u);
  EXPECT_NEAR(pts[0].recall, 1.0, 1e-12);
  EXPECT_NEAR(pts[0].precision, tax.edges().size() / pairs, 1e-12);
  EXPECT_NEAR(pts[0].micro_f1, random_edge_baseline_f1(tax), 1e-12);
  EXPECT_EQ(pts[1].predicted_edges, 0u);
  EXPECT_EQ(pts[1].recall, 0.0);
  EXPECT_EQ(pts[1].micro_f1, 0.0);
}

TEST(Reconstruction, RecoversToyTaxonomyAboveBaseline) {
  auto tax = agcr::testing::toy_taxonomy();
  auto emb = agcr::testing::toy_label_embedding();
  double best = 0.0;
  for (const auto& pt : reconstruct_eval(emb, tax, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8})) {
    best = std::max(best, pt.macro_f1);
    EXPECT_GE(pt.micro_f1, 0.0);
    EXPECT_LE(pt.micro_f1, 1.0);
  }
  EXPECT_GT(best, random_edge_baseline_f1(tax));
}
