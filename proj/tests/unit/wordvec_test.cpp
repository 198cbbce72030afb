#include <gtest/gtest.h>

#include <filesystem>

#include "agcr/binary_io.hpp"
#include "agcr/error.hpp"
#include "agcr/random.hpp"
#include "agcr/wordvec.hpp"

using namespace agcr;
using namespace agcr::wordvec;
using textgraph::ArrangedMatrix;
using textgraph::NormalizedRow;
using textgraph::Slot;

namespace {

skipgram::EmbeddingTable small_table() {
  return skipgram::EmbeddingTable({"car", "company", "electric"}, 2, {1.f, 2.f, 3.f, 4.f, -5.f, 6.f});
}

ArrangedMatrix matrix(std::vector<std::vector<Slot>> rows, std::size_t T) {
  ArrangedMatrix m;
  m.doc_id = "d";
  m.seq_len = T;
  for (auto& slots : rows) {
    NormalizedRow r;
    int q = 0;
    for (const auto& s : slots) q = std::max(q, s.block);
    slots.resize(T);
    r.slots = std::move(slots);
    r.q = q;
    m.rows.push_back(std::move(r));
  }
  return m;
}

}  // namespace

TEST(Assemble, AllPadMatrixIsZero) {
  auto dt = assemble(matrix({{}, {}}, 4), small_table());
  EXPECT_EQ(dt.values.shape(), (nn::Shape{2, 4, 2}));
  for (float v : dt.values.values()) EXPECT_EQ(v, 0.f);
  for (auto m : dt.mask) EXPECT_EQ(m, 0);
  for (auto b : dt.blocks) EXPECT_EQ(b, 0);
  EXPECT_EQ(dt.oov, 0u);
  EXPECT_EQ(dt.block_count(0), 0);
}

TEST(Assemble, KnownLemmaGetsExactRow) {
  auto dt = assemble(matrix({{}, {{"company", 3, 1}, {"electric", 9, 2}}}, 3), small_table());
  EXPECT_EQ(dt.values.at(1, 0, 0), 3.f);
  EXPECT_EQ(dt.values.at(1, 0, 1), 4.f);
  EXPECT_EQ(dt.values.at(1, 1, 0), -5.f);
  EXPECT_EQ(dt.values.at(1, 2, 0), 0.f);
  EXPECT_EQ(dt.mask, (std::vector<std::uint8_t>{0, 0, 0, 1, 1, 0}));
  EXPECT_EQ(dt.blocks, (std::vector<std::int32_t>{0, 0, 0, 1, 2, 0}));
  EXPECT_EQ(dt.block_count(1), 2);
}

TEST(Assemble, OovCountMatchesOracle) {
  Rng rng(3);
  auto table = small_table();
  const std::vector<std::string> pool{"car", "company", "electric", "zebra", "quux"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<Slot>> rows(3);
    std::size_t expected_oov = 0;
    for (auto& row : rows) {
      const std::size_t len = rng.below(6);
      for (std::size_t t = 0; t < len; ++t) {
        const auto& w = pool[rng.below(pool.size())];
        expected_oov += !table.contains(w);
        row.push_back({w, t + 1, 1});
      }
    }
    auto dt = assemble(matrix(rows, 5), table);
    EXPECT_EQ(dt.oov, expected_oov);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t t = 0; t < rows[r].size(); ++t) {
        EXPECT_EQ(dt.mask[r * 5 + t], 1);
        if (!table.contains(rows[r][t].lemma)) {
          EXPECT_EQ(dt.values.at(r, t, 0), 0.f);
          EXPECT_EQ(dt.values.at(r, t, 1), 0.f);
        }
      }
    }
  }
}

TEST(Assemble, DimensionMismatchThrows) {
  EXPECT_THROW(assemble(matrix({{}}, 3), small_table(), 5), ShapeError);
  EXPECT_NO_THROW(assemble(matrix({{}}, 3), small_table(), 2));
}

TEST(TensorFile, RoundTripIsIdentity) {
  auto dt = assemble(matrix({{{"car", 1, 1}, {"nope", 2, 1}}, {{"company", 5, 1}}}, 4), small_table());
  dt.doc_id = "doc-7";
  auto bytes = serialize_tensor(dt);
  EXPECT_EQ(deserialize_tensor(bytes), dt);
  EXPECT_EQ(serialize_tensor(deserialize_tensor(bytes)), bytes);
}

TEST(TensorFile, CorruptionErrors) {
  auto dt = assemble(matrix({{{"car", 1, 1}}}, 3), small_table());
  auto bytes = serialize_tensor(dt);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_tensor(bad), io::BadMagicError);
  bad = bytes;
  bad[4] = static_cast<char>(kTensorVersion + 1);
  EXPECT_THROW(deserialize_tensor(bad), io::UnsupportedVersionError);
  EXPECT_THROW(deserialize_tensor(std::string_view(bytes).substr(0, bytes.size() - 1)), io::TruncatedError);
  EXPECT_THROW(deserialize_tensor(bytes + "x"), Error);
}

TEST(TensorFile, FileSizeMatchesLayout) {
  auto dt = assemble(matrix({{{"car", 1, 1}}, {}}, 3), small_table());
  auto path = std::filesystem::temp_directory_path() / "agcr_wordvec_test.agtx";
  save_tensor(dt, path);
  const std::size_t header = 4 + 4 + 8;
  const auto bytes = serialize_tensor(dt);
  std::size_t json_len = 0;
  for (int i = 7; i >= 0; --i) json_len = (json_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  EXPECT_EQ(std::filesystem::file_size(path), header + json_len + 2 * 3 * 2 * 4 + 2 * 3 * 1 + 2 * 3 * 4);
  EXPECT_EQ(load_tensor(path), dt);
  std::filesystem::remove(path);
}
