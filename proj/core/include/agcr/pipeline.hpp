#pragma once

#include <string>
#include <vector>

#include "agcr/corpus.hpp"
#include "agcr/model/trainer.hpp"
#include "agcr/skipgram.hpp"
#include "agcr/textgraph.hpp"
#include "agcr/wordvec.hpp"

namespace agcr::pipeline {

struct PrepConfig {
  corpus::TextConfig text;
  textgraph::GraphConfig graph;
  std::size_t threads = 1;
};

std::vector<corpus::TokenStream> tokenize_all(const std::vector<corpus::Document>& docs, const corpus::TextConfig& text,
                                              std::size_t threads = 1);

/// tokenize -> arrange_matrix per document, in input order.
std::vector<textgraph::ArrangedMatrix> arrange_all(const std::vector<corpus::Document>& docs, const PrepConfig& cfg);

/// Lemma sequences for word-embedding training.
std::vector<skipgram::Sequence> lemma_sequences(const std::vector<corpus::TokenStream>& streams);

std::vector<wordvec::DocTensor> assemble_all(const std::vector<textgraph::ArrangedMatrix>& matrices,
                                             const skipgram::EmbeddingTable& emb, std::size_t threads = 1);

std::vector<model::Example> make_examples(const std::vector<corpus::Document>& docs,
                                          std::vector<wordvec::DocTensor> tensors);

/// Sorted union of all document labels.
std::vector<std::string> collect_labels(const std::vector<corpus::Document>& docs);

}  // namespace agcr::pipeline
