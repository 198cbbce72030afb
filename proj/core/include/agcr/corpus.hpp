#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace agcr::corpus {

struct Document {
  std::string id;
  std::string text;
  std::set<std::string> labels;
};

/// One surviving token. `position` is the 1-based index in the unfiltered
/// token sequence, so removed stopwords leave gaps.
struct Token {
  std::string surface;
  std::string lemma;
  std::size_t position = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenStream {
  std::vector<Token> tokens;

  bool empty() const noexcept { return tokens.empty(); }
  std::size_t size() const noexcept { return tokens.size(); }
};

using StopwordSet = std::unordered_set<std::string>;
using LemmaMap = std::unordered_map<std::string, std::string>;

struct TextConfig {
  StopwordSet stopwords;
  LemmaMap lemmas;
  bool lowercase = false;
  /// Co-occurrence window of the document graph (>= 2).
  int window = 3;

  void validate() const;
};

/// Split raw text into word tokens.
///
/// Any byte that is not an ASCII letter/digit and not part of a multi-byte
/// UTF-8 sequence separates tokens, except a hyphen with word characters on
/// both sides. Lowercasing (when enabled) is ASCII-only. A token is dropped
/// when its surface or lemma is a stopword; it still consumes a position.
TokenStream tokenize(std::string_view text, const TextConfig& cfg);

/// Raw word split without lowercasing, lemmatization or stopword removal.
std::vector<std::string> split_words(std::string_view text);

/// Reads JSON Lines: {"id": ..., "text": ..., "labels": [...]}. Blank lines
/// are skipped; "labels" may be omitted.
std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::string_view jsonl, const std::string& source = "<corpus>");

void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path);

StopwordSet load_stopwords(const std::filesystem::path& path);
LemmaMap load_lemmas(const std::filesystem::path& path);
StopwordSet parse_stopwords(std::string_view content);
LemmaMap parse_lemmas(std::string_view content, const std::string& source = "<lemmas>");

/// Convenience for optional paths: empty path yields an empty container.
std::pair<StopwordSet, LemmaMap> load_text_maps(const std::filesystem::path& stopword_path,
                                                const std::filesystem::path& lemma_path);

std::string read_file(const std::filesystem::path& path);

}  // namespace agcr::corpus
