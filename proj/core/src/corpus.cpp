#include "agcr/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "agcr/error.hpp"

namespace agcr::corpus {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::string ascii_lower(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == content.size()) break;
    start = end + 1;
  }
  return lines;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

void TextConfig::validate() const {
  if (window < 2) throw ConfigError("text window must be >= 2, got " + std::to_string(window));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(c));
    } else if (c == '-' && !current.empty() && i + 1 < n &&
               is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back('-');
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

TokenStream tokenize(std::string_view text, const TextConfig& cfg) {
  TokenStream out;
  std::size_t position = 0;
  for (auto& word : split_words(text)) {
    ++position;
    std::string surface = cfg.lowercase ? ascii_lower(std::move(word)) : std::move(word);
    auto it = cfg.lemmas.find(surface);
    std::string lemma = it == cfg.lemmas.end() ? surface : it->second;
    if (cfg.stopwords.contains(surface) || cfg.stopwords.contains(lemma)) continue;
    out.tokens.push_back(Token{std::move(surface), std::move(lemma), position});
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Document> parse_corpus(std::string_view jsonl, const std::string& source) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : split_lines(jsonl)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    auto id = j.find("id");
    auto text = j.find("text");
    if (id == j.end() || !id->is_string()) throw ParseError(source, line_no, "missing string field \"id\"");
    if (text == j.end() || !text->is_string()) throw ParseError(source, line_no, "missing string field \"text\"");
    Document doc{id->get<std::string>(), text->get<std::string>(), {}};
    if (auto labels = j.find("labels"); labels != j.end()) {
      if (!labels->is_array()) throw ParseError(source, line_no, "\"labels\" must be an array");
      for (const auto& l : *labels) {
        if (!l.is_string()) throw ParseError(source, line_no, "label must be a string");
        doc.labels.insert(l.get<std::string>());
      }
    }
    if (!seen.insert(doc.id).second) throw ParseError(source, line_no, "duplicate document id \"" + doc.id + "\"");
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path), path.string());
}

void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& d : docs) {
    nlohmann::json j = {{"id", d.id}, {"text", d.text}, {"labels", d.labels}};
    out << j.dump() << '\n';
  }
}

StopwordSet parse_stopwords(std::string_view content) {
  StopwordSet words;
  for (auto line : split_lines(content)) {
    if (is_blank(line)) continue;
    auto first = line.find_first_not_of(" \t");
    auto last = line.find_last_not_of(" \t");
    words.emplace(line.substr(first, last - first + 1));
  }
  return words;
}

LemmaMap parse_lemmas(std::string_view content, const std::string& source) {
  LemmaMap lemmas;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, line_no, "expected \"surface<TAB>lemma\"");
    auto surface = line.substr(0, tab);
    auto lemma = line.substr(tab + 1);
    if (surface.empty() || lemma.empty()) throw ParseError(source, line_no, "empty surface or lemma");
    lemmas[std::string(surface)] = std::string(lemma);
  }
  return lemmas;
}

StopwordSet load_stopwords(const std::filesystem::path& path) { return parse_stopwords(read_file(path)); }

LemmaMap load_lemmas(const std::filesystem::path& path) { return parse_lemmas(read_file(path), path.string()); }

std::pair<StopwordSet, LemmaMap> load_text_maps(const std::filesystem::path& stopword_path,
                                                const std::filesystem::path& lemma_path) {
  StopwordSet stop = stopword_path.empty() ? StopwordSet{} : load_stopwords(stopword_path);
  LemmaMap lemmas = lemma_path.empty() ? LemmaMap{} : load_lemmas(lemma_path);
  return {std::move(stop), std::move(lemmas)};
}

}  // namespace agcr::corpus
