#include "agcr/pipeline.hpp"

#include <set>

#include "agcr/parallel.hpp"

namespace agcr::pipeline {

std::vector<corpus::TokenStream> tokenize_all(const std::vector<corpus::Document>& docs, const corpus::TextConfig& text,
                                              std::size_t threads) {
  text.validate();
  std::vector<corpus::TokenStream> out(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = corpus::tokenize(docs[i].text, text); });
  return out;
}

std::vector<textgraph::ArrangedMatrix> arrange_all(const std::vector<corpus::Document>& docs, const PrepConfig& cfg) {
  cfg.text.validate();
  cfg.graph.validate();
  std::vector<textgraph::ArrangedMatrix> out(docs.size());
  parallel_for(docs.size(), cfg.threads, [&](std::size_t i) {
    out[i] = textgraph::arrange_matrix(corpus::tokenize(docs[i].text, cfg.text), cfg.graph, docs[i].id);
  });
  return out;
}

std::vector<skipgram::Sequence> lemma_sequences(const std::vector<corpus::TokenStream>& streams) {
  std::vector<skipgram::Sequence> out;
  out.reserve(streams.size());
  for (const auto& s : streams) {
    skipgram::Sequence seq;
    seq.reserve(s.size());
    for (const auto& t : s.tokens) seq.push_back(t.lemma);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<wordvec::DocTensor> assemble_all(const std::vector<textgraph::ArrangedMatrix>& matrices,
                                             const skipgram::EmbeddingTable& emb, std::size_t threads) {
  std::vector<wordvec::DocTensor> out(matrices.size());
  parallel_for(matrices.size(), threads, [&](std::size_t i) { out[i] = wordvec::assemble(matrices[i], emb); });
  return out;
}

std::vector<model::Example> make_examples(const std::vector<corpus::Document>& docs,
                                          std::vector<wordvec::DocTensor> tensors) {
  if (docs.size() != tensors.size()) throw Error("make_examples: document and tensor counts differ");
  std::vector<model::Example> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) out.push_back({std::move(tensors[i]), docs[i].labels});
  return out;
}

std::vector<std::string> collect_labels(const std::vector<corpus::Document>& docs) {
  std::set<std::string> all;
  for (const auto& d : docs) all.insert(d.labels.begin(), d.labels.end());
  return {all.begin(), all.end()};
}

}  // namespace agcr::pipeline
