#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "agcr/corpus.hpp"
#include "agcr/error.hpp"
#include "agcr/random.hpp"

using namespace agcr;
using namespace agcr::corpus;

namespace {

std::vector<std::pair<std::string, std::size_t>> lemma_positions(const TokenStream& s) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& t : s.tokens) out.emplace_back(t.lemma, t.position);
  return out;
}

}  // namespace

TEST(Tokenize, StopwordsKeepPositions) {
  TextConfig cfg;
  cfg.lowercase = true;
  cfg.lemmas = {{"told", "tell"}};
  cfg.stopwords = {"the"};
  auto s = tokenize("Musk told the electric car company", cfg);
  std::vector<std::pair<std::string, std::size_t>> want{
      {"musk", 1}, {"tell", 2}, {"electric", 4}, {"car", 5}, {"company", 6}};
  EXPECT_EQ(lemma_positions(s), want);
  EXPECT_EQ(s.tokens[1].surface, "told");
}

TEST(Tokenize, EmptyText) { EXPECT_TRUE(tokenize("", TextConfig{}).empty()); }

TEST(Tokenize, RepeatedToken) {
  auto s = tokenize("a a a", TextConfig{});
  std::vector<std::pair<std::string, std::size_t>> want{{"a", 1}, {"a", 2}, {"a", 3}};
  EXPECT_EQ(lemma_positions(s), want);
}

TEST(Tokenize, PunctuationAndHyphens) {
  auto words = split_words("state-of-the-art, (well) -dash- end.");
  std::vector<std::string> want{"state-of-the-art", "well", "dash", "end"};
  EXPECT_EQ(words, want);
}

TEST(Tokenize, Utf8BytesStayInsideWords) {
  auto words = split_words("caf\xC3\xA9 na\xC3\xAFve");
  ASSERT_EQ(words.size(), 2u);
  EXPECT_EQ(words[0], "caf\xC3\xA9");
}

TEST(Tokenize, LowercaseOnlyWhenConfigured) {
  auto s = tokenize("Car", TextConfig{});
  EXPECT_EQ(s.tokens[0].lemma, "Car");
  TextConfig lower;
  lower.lowercase = true;
  EXPECT_EQ(tokenize("Car", lower).tokens[0].lemma, "car");
}

TEST(Tokenize, StopwordPositionsMatchUnfilteredIndex) {
  // Oracle: the surviving tokens are exactly the unfiltered words that are not
  // stopwords, at their 1-based unfiltered index.
  Rng rng(17);
  const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "the", "of", "and"};
  TextConfig cfg;
  cfg.stopwords = {"the", "of", "and"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.below(51);
    std::vector<std::string> words;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      words.push_back(vocab[rng.below(vocab.size())]);
      text += (i ? (rng.coin() ? " " : ", ") : "") + words.back();
    }
    std::vector<std::pair<std::string, std::size_t>> want;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (!cfg.stopwords.contains(words[i])) want.emplace_back(words[i], i + 1);
    }
    const auto got = tokenize(text, cfg);
    ASSERT_EQ(lemma_positions(got), want) << text;
    for (std::size_t i = 1; i < got.size(); ++i) ASSERT_LT(got.tokens[i - 1].position, got.tokens[i].position);
  }
}

TEST(Tokenize, WindowMustBeAtLeastTwo) {
  TextConfig cfg;
  cfg.window = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Corpus, ParsesDocuments) {
  auto docs = parse_corpus(
      "{\"id\":\"d1\",\"text\":\"hello world\",\"labels\":[\"A\"]}\n"
      "\n"
      "{\"id\":\"d2\",\"text\":\"more\",\"labels\":[\"C15\",\"C151\",\"GCAT\"]}\n");
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].id, "d1");
  EXPECT_EQ(docs[1].labels.size(), 3u);
}

TEST(Corpus, MissingTextNamesLine) {
  try {
    parse_corpus("{\"id\":\"d1\",\"text\":\"x\"}\n{\"id\":\"d2\"}\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, MalformedAndDuplicateLinesThrow) {
  EXPECT_THROW(parse_corpus("{not json}\n"), ParseError);
  EXPECT_THROW(parse_corpus("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n"), ParseError);
}

TEST(Corpus, SaveLoadRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "agcr_corpus_test";
  std::filesystem::create_directories(dir);
  std::vector<Document> docs{{"x", "some \"quoted\" text", {"L1", "L2"}}, {"y", "", {}}};
  save_corpus(docs, dir / "c.jsonl");
  auto back = load_corpus(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, docs[0].text);
  EXPECT_EQ(back[0].labels, docs[0].labels);
  std::filesystem::remove_all(dir);
}

TEST(TextMaps, ParseStopwordsAndLemmas) {
  EXPECT_EQ(parse_stopwords("the\na\n"), (StopwordSet{"the", "a"}));
  EXPECT_EQ(parse_lemmas("told\ttell\n\n"), (LemmaMap{{"told", "tell"}}));
  EXPECT_TRUE(parse_stopwords("").empty());
  EXPECT_TRUE(parse_lemmas("").empty());
  EXPECT_THROW(parse_lemmas("told tell\n"), ParseError);
}

TEST(TextMaps, EmptyPathsGiveEmptyMaps) {
  auto [stop, lem] = load_text_maps({}, {});
  EXPECT_TRUE(stop.empty());
  EXPECT_TRUE(lem.empty());
}
