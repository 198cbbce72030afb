#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agcr/error.hpp"

namespace agcr::skipgram {

using Sequence = std::vector<std::string>;

struct SkipgramConfig {
  std::size_t dim = 50;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  std::size_t min_count = 1;
  /// >1 enables sharded training with per-epoch delta merging. Results then
  /// depend on the shard layout and are no longer bit-identical to serial mode.
  std::size_t threads = 1;
  /// Size of the fixed (center, context) sample used to monitor the loss.
  std::size_t monitor_pairs = 2000;

  void validate() const;
};

struct EmbeddingMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t window = 0;
  std::size_t negatives = 0;
};

/// Dense row-per-token embedding table.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> vocab, std::size_t dim, std::vector<float> vectors);

  std::size_t size() const noexcept { return vocab_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& vocab() const noexcept { return vocab_; }
  const std::vector<float>& data() const noexcept { return vectors_; }
  std::vector<float>& data() noexcept { return vectors_; }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  std::span<const float> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {vectors_.data() + i * dim_, dim_}; }

  EmbeddingMetadata metadata;
  /// Mean loss on the monitor sample after each epoch (training only).
  std::vector<double> epoch_loss;

 private:
  std::vector<std::string> vocab_;
  std::size_t dim_ = 0;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Skip-gram with negative sampling. Noise tokens come from the unigram
/// distribution raised to 3/4; the learning rate decays linearly to 1e-4 of
/// its initial value. Vocabulary is ordered by descending count, then
/// lexicographically. Deterministic for a fixed seed in serial mode.
EmbeddingTable train_skipgram(const std::vector<Sequence>& sequences, const SkipgramConfig& cfg);

/// Text format: "vocab_size dim" header, then "token v1 ... vD" per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view content, const std::string& source = "<embeddings>");
std::string format_embeddings(const EmbeddingTable& table);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

namespace detail {
void warn_zero_vector();
}

/// cos(u, v); 0 when either vector is zero.
template <class T>
double cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    nu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
    nv += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

/// 1 - cos(u, v) in [0, 2]. A zero vector yields 1 and logs a warning.
template <class T>
double cosine_distance(std::span<const T> u, std::span<const T> v) {
  double c = cosine_similarity(u, v);
  if (c == 0.0) {
    bool zero_u = true, zero_v = true;
    for (auto x : u) zero_u = zero_u && x == T{0};
    for (auto x : v) zero_v = zero_v && x == T{0};
    if (zero_u || zero_v) detail::warn_zero_vector();
  }
  return 1.0 - c;
}

inline double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_distance(std::span<const double>(u), std::span<const double>(v));
}

inline double cosine_distance(const std::vector<float>& u, const std::vector<float>& v) {
  return cosine_distance(std::span<const float>(u), std::span<const float>(v));
}

}  // namespace agcr::skipgram
