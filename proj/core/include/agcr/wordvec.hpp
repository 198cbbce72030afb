#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "agcr/nn/tensor.hpp"
#include "agcr/skipgram.hpp"
#include "agcr/textgraph.hpp"

namespace agcr::wordvec {

/// Model input for one document: N x T x D values, with a pad mask and the
/// block label of every slot (0 for PAD).
struct DocTensor {
  std::string doc_id;
  nn::Tensor<float> values;
  std::vector<std::uint8_t> mask;     ///< 1 = word slot (known or OOV), 0 = PAD
  std::vector<std::int32_t> blocks;   ///< N x T
  std::size_t oov = 0;                ///< non-PAD slots whose lemma is missing from the table

  std::size_t rows() const { return values.dim(0); }
  std::size_t seq_len() const { return values.dim(1); }
  std::size_t dim() const { return values.dim(2); }
  /// Number of blocks in row r.
  int block_count(std::size_t r) const;

  friend bool operator==(const DocTensor&, const DocTensor&) = default;
};

/// Look up every non-PAD slot in `emb`. Out-of-vocabulary lemmas become zero
/// vectors (mask stays 1) and are counted in `oov`. expected_dim = 0 skips the
/// dimension check.
DocTensor assemble(const textgraph::ArrangedMatrix& matrix, const skipgram::EmbeddingTable& emb,
                   std::size_t expected_dim = 0);

inline constexpr std::string_view kTensorMagic = "AGTX";
inline constexpr std::uint32_t kTensorVersion = 1;

/// Same container as checkpoints: "AGTX" | u32 version | u64 JSON length |
/// JSON {doc_id,N,T,D,oov} | N*T*D f32 | N*T u8 mask | N*T i32 blocks.
std::string serialize_tensor(const DocTensor& dt);
DocTensor deserialize_tensor(std::string_view bytes, const std::string& source = "<tensor>");
void save_tensor(const DocTensor& dt, const std::filesystem::path& path);
DocTensor load_tensor(const std::filesystem::path& path);

}  // namespace agcr::wordvec
