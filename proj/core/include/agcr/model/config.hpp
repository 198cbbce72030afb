#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agcr/nn/capsule.hpp"
#include "agcr/nn/loss.hpp"

namespace agcr::model {

/// Which mechanisms a network uses. `lstm` is the plain recurrent unit and
/// `attentional_lstm` the block-attention unit; either one enables the
/// recurrent pathway (attention wins when both are set).
struct Flags {
  bool cnn = true;
  bool sorting = true;
  bool lstm = false;
  bool attentional_lstm = false;
  bool capsule = false;
  bool weighted_margin_loss = false;

  bool recurrent() const noexcept { return lstm || attentional_lstm; }
  friend bool operator==(const Flags&, const Flags&) = default;
};

struct VariantSpec {
  std::string_view name;
  Flags flags;
};

/// The 13 named variants, from TGCNN(No-R) to HE-AGCRCNN.
const std::array<VariantSpec, 13>& variants();
std::optional<Flags> variant_flags(std::string_view name);
/// Name of the variant with exactly these flags, or nullopt.
std::optional<std::string_view> variant_name(const Flags& flags);
/// Names of the flags on which `a` and `b` differ.
std::vector<std::string> flag_diff(const Flags& a, const Flags& b);

struct Dims {
  std::size_t N = 100;  ///< subgraph rows
  std::size_t T = 20;   ///< words per row
  std::size_t D = 50;   ///< word vector size
  std::size_t k1 = 64;  ///< layer-1 kernels (and LSTM width)
  std::size_t k2 = 128; ///< layer-2 kernels (and LSTM width)
  std::size_t m = 16;   ///< primary capsule size
  std::size_t M = 64;   ///< primary capsule channels
  std::size_t digit_dim = 32;
  std::size_t L = 0;    ///< labels; taken from ModelConfig::labels when 0
  std::size_t stride = 1;
  std::size_t primary_kernel = 0;  ///< primary capsule kernel width in layer-2 positions; 0 = full row
  std::vector<std::size_t> fc_hidden{1024};

  std::size_t width1() const;
  std::size_t width2() const;
  std::size_t primary_width() const;       ///< resolved kernel width
  std::size_t primary_positions() const;   ///< capsule positions per row
  std::size_t input_capsules() const;      ///< N * positions * M
  std::size_t flat_size() const { return N * width2() * k2; }
};

struct TrainConfig {
  std::size_t batch = 32;
  double lr = 0.001;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  std::size_t routing_iters = 3;
  double threshold = 0.5;
  std::size_t threads = 1;
  double p = 0.0;  ///< adjustment factor; 0 = calibrate on the training set
  nn::RoutingGradient routing_gradient = nn::RoutingGradient::Full;
  double m_plus = 0.9;
  double m_minus = 0.1;
  double lambda = 0.5;
};

struct ModelConfig {
  std::string variant = "HE-AGCRCNN";  ///< Table name, or anything when custom
  bool custom = false;
  Flags flags = *variant_flags("HE-AGCRCNN");
  Dims dims;
  TrainConfig training;
  std::vector<std::string> labels;

  /// Named variant with default dims.
  static ModelConfig for_variant(std::string_view name);

  std::size_t label_count() const { return dims.L ? dims.L : labels.size(); }
  nn::MarginLossConfig margin(bool weighted) const;
  /// Throws ConfigError on inconsistent flags, dims or labels.
  void validate() const;
};

std::string config_to_json(const ModelConfig& cfg, int indent = -1);
ModelConfig config_from_json(std::string_view text);

}  // namespace agcr::model
