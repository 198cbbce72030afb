#include <gtest/gtest.h>

#include <cmath>

#include "agcr/error.hpp"
#include "agcr/random.hpp"
#include "agcr/skipgram.hpp"
#include "agcr/taxonomy.hpp"

using namespace agcr;
using namespace agcr::skipgram;

namespace {

double distance(const EmbeddingTable& t, const std::string& a, const std::string& b) {
  return cosine_distance(t.row(*t.find(a)), t.row(*t.find(b)));
}

std::vector<Sequence> topic_corpus(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sequence> out;
  for (int i = 0; i < 300; ++i) {
    Sequence s;
    const int topic = static_cast<int>(rng.below(3));
    for (int k = 0; k < 12; ++k) s.push_back("t" + std::to_string(topic) + "_" + std::to_string(rng.below(8)));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Skipgram, Defaults) {
  SkipgramConfig cfg;
  EXPECT_EQ(cfg.dim, 50u);
  EXPECT_EQ(cfg.window, 5u);
  EXPECT_EQ(taxonomy::default_label_skipgram().dim, 200u);
}

TEST(Skipgram, AdjacentTokensEndUpCloserThanControl) {
  // a and b always appear side by side in one context pool; c lives in another.
  Rng rng(6);
  std::vector<Sequence> seqs;
  auto filler = [&](const std::string& stem) { return stem + std::to_string(rng.below(6)); };
  for (int i = 0; i < 300; ++i) {
    seqs.push_back({filler("x"), filler("x"), "a", "b", filler("x"), filler("x")});
    seqs.push_back({filler("y"), filler("y"), "c", filler("y"), filler("y")});
  }
  SkipgramConfig cfg;
  cfg.dim = 10;
  cfg.epochs = 50;
  cfg.seed = 4;
  auto t = train_skipgram(seqs, cfg);
  EXPECT_LT(distance(t, "a", "b"), distance(t, "a", "c"));
  EXPECT_LT(distance(t, "a", "b"), distance(t, "b", "c"));
}

TEST(Skipgram, SingleTokenCorpus) {
  auto t = train_skipgram({{"only"}}, SkipgramConfig{});
  ASSERT_EQ(t.size(), 1u);
  for (float x : t.row(0)) EXPECT_TRUE(std::isfinite(x));
  EXPECT_TRUE(t.epoch_loss.empty());
}

TEST(Skipgram, EmptyVocabularyThrows) {
  SkipgramConfig cfg;
  cfg.min_count = 5;
  EXPECT_THROW(train_skipgram({{"a", "b"}}, cfg), Error);
  EXPECT_THROW(train_skipgram({}, SkipgramConfig{}), Error);
}

TEST(Skipgram, VocabularyOrderedByCountThenToken) {
  auto t = train_skipgram({{"b", "a", "c", "c", "a"}}, SkipgramConfig{});
  EXPECT_EQ(t.vocab(), (std::vector<std::string>{"a", "c", "b"}));
}

TEST(Skipgram, DeterministicForFixedSeed) {
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  auto corpus = topic_corpus(1);
  auto a = train_skipgram(corpus, cfg);
  auto b = train_skipgram(corpus, cfg);
  EXPECT_EQ(a.data(), b.data());
  cfg.seed = 2;
  EXPECT_NE(train_skipgram(corpus, cfg).data(), a.data());
}

TEST(Skipgram, MonitorLossMostlyDecreases) {
  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 8;
  auto t = train_skipgram(topic_corpus(5), cfg);
  ASSERT_EQ(t.epoch_loss.size(), 8u);
  for (std::size_t e = 1; e < t.epoch_loss.size(); ++e) EXPECT_LE(t.epoch_loss[e], t.epoch_loss[e - 1] * 1.05);
  EXPECT_LT(t.epoch_loss.back(), t.epoch_loss.front());
}

TEST(Skipgram, ParallelModeProducesFiniteTable) {
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.threads = 3;
  auto t = train_skipgram(topic_corpus(9), cfg);
  for (float x : t.data()) ASSERT_TRUE(std::isfinite(x));
  EXPECT_LT(distance(t, "t0_1", "t0_2"), distance(t, "t0_1", "t1_2"));
}

TEST(EmbeddingFile, ParseHeaderAndRows) {
  auto t = parse_embeddings("2 3\nx 1 2 3\ny -0.5 0 1e-3\n");
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_FLOAT_EQ(t.row(1)[2], 1e-3f);
}

TEST(EmbeddingFile, WrongArityNamesLine) {
  try {
    parse_embeddings("2 3\nx 1 2 3\ny 1 2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(EmbeddingFile, RoundTrip) {
  SkipgramConfig cfg;
  cfg.dim = 7;
  cfg.epochs = 1;
  auto t = train_skipgram(topic_corpus(3), cfg);
  auto back = parse_embeddings(format_embeddings(t));
  ASSERT_EQ(back.vocab(), t.vocab());
  for (std::size_t i = 0; i < t.data().size(); ++i) ASSERT_NEAR(back.data()[i], t.data()[i], 1e-6);
}

TEST(Cosine, Identities) {
  std::vector<double> u{1, 2, 3}, neg{-1, -2, -3}, orth{3, 0, -1}, zero{0, 0, 0};
  EXPECT_NEAR(cosine_distance(u, u), 0.0, 1e-12);
  EXPECT_NEAR(cosine_distance(u, orth), 1.0, 1e-12);
  EXPECT_NEAR(cosine_distance(u, neg), 2.0, 1e-12);
  EXPECT_EQ(cosine_distance(u, zero), 1.0);
  EXPECT_THROW(cosine_distance(u, std::vector<double>{1, 2}), ShapeError);
}

TEST(Cosine, SymmetryRangeAndScaleInvariance) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> u(6), v(6);
    for (auto& x : u) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const double d = cosine_distance(u, v);
    EXPECT_NEAR(d, cosine_distance(v, u), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    auto cu = u;
    for (auto& x : cu) x *= 3.7;
    EXPECT_NEAR(cosine_distance(cu, v), d, 1e-12);
  }
}
