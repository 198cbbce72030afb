#include "agcr/wordvec.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agcr/binary_io.hpp"
#include "agcr/corpus.hpp"

namespace agcr::wordvec {

int DocTensor::block_count(std::size_t r) const {
  const std::size_t T = seq_len();
  int q = 0;
  for (std::size_t t = 0; t < T; ++t) q = std::max(q, blocks[r * T + t]);
  return q;
}

DocTensor assemble(const textgraph::ArrangedMatrix& matrix, const skipgram::EmbeddingTable& emb,
                   std::size_t expected_dim) {
  const std::size_t D = emb.dim();
  if (expected_dim != 0 && expected_dim != D) {
    throw ShapeError("assemble: embedding dim " + std::to_string(D) + " != expected " + std::to_string(expected_dim));
  }
  const std::size_t N = matrix.rows.size(), T = matrix.seq_len;
  DocTensor dt;
  dt.doc_id = matrix.doc_id;
  dt.values = nn::Tensor<float>({N, T, D});
  dt.mask.assign(N * T, 0);
  dt.blocks.assign(N * T, 0);
  for (std::size_t r = 0; r < N; ++r) {
    const auto& row = matrix.rows[r];
    if (row.slots.size() != T) throw ShapeError("assemble: row length differs from T");
    for (std::size_t t = 0; t < T; ++t) {
      const auto& slot = row.slots[t];
      if (slot.is_pad()) continue;
      dt.mask[r * T + t] = 1;
      dt.blocks[r * T + t] = slot.block;
      if (auto idx = emb.find(slot.lemma)) {
        auto src = emb.row(*idx);
        std::copy(src.begin(), src.end(), dt.values.data() + (r * T + t) * D);
      } else {
        ++dt.oov;
      }
    }
  }
  if (dt.oov) spdlog::debug("{}: {} out-of-vocabulary slots", dt.doc_id, dt.oov);
  return dt;
}

std::string serialize_tensor(const DocTensor& dt) {
  const std::size_t N = dt.rows(), T = dt.seq_len(), D = dt.dim();
  nlohmann::json meta = {{"doc_id", dt.doc_id}, {"N", N}, {"T", T}, {"D", D}, {"oov", dt.oov}};
  io::ByteWriter w;
  io::write_header(w, kTensorMagic, kTensorVersion, meta.dump());
  for (float v : dt.values.values()) w.f32(v);
  for (auto m : dt.mask) w.u8(m);
  for (auto b : dt.blocks) w.i32(b);
  return w.take();
}

DocTensor deserialize_tensor(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  const std::string meta_text = io::read_header(r, kTensorMagic, kTensorVersion);
  DocTensor dt;
  std::size_t N = 0, T = 0, D = 0;
  try {
    auto meta = nlohmann::json::parse(meta_text);
    dt.doc_id = meta.at("doc_id").get<std::string>();
    N = meta.at("N").get<std::size_t>();
    T = meta.at("T").get<std::size_t>();
    D = meta.at("D").get<std::size_t>();
    dt.oov = meta.at("oov").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": bad tensor metadata: " + e.what());
  }
  std::vector<float> values(N * T * D);
  for (auto& v : values) v = r.f32();
  dt.values = nn::Tensor<float>({N, T, D}, std::move(values));
  dt.mask.resize(N * T);
  for (auto& m : dt.mask) m = r.u8();
  dt.blocks.resize(N * T);
  for (auto& b : dt.blocks) b = r.i32();
  if (r.remaining() != 0) throw Error(source + ": trailing bytes after tensor payload");
  return dt;
}

void save_tensor(const DocTensor& dt, const std::filesystem::path& path) { io::write_file(path, serialize_tensor(dt)); }

DocTensor load_tensor(const std::filesystem::path& path) {
  return deserialize_tensor(corpus::read_file(path), path.string());
}

}  // namespace agcr::wordvec
