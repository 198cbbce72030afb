#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agcr/model/config.hpp"
#include "agcr/nn/capsule.hpp"
#include "agcr/nn/layers.hpp"
#include "agcr/nn/loss.hpp"
#include "agcr/nn/params.hpp"
#include "agcr/random.hpp"

namespace agcr::model {

/// Parameter name of the attention scalars for (layer, row, block count).
inline std::string attention_name(int layer, std::size_t row, int q) {
  return "attn" + std::to_string(layer) + "/" + std::to_string(row) + "/" + std::to_string(q);
}

/// Block label of every output position: the label at the center of its
/// 3-wide receptive field.
inline std::vector<int> conv_blocks(std::span<const int> in, std::size_t rows, std::size_t width, std::size_t stride) {
  const std::size_t out_w = nn::conv_out_width(width, stride);
  std::vector<int> out(rows * out_w);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_w; ++j) out[r * out_w + j] = in[r * width + j * stride + 1];
  }
  return out;
}

template <class T>
struct Forward {
  nn::Tensor<T> x;           // [N x T x D]
  std::vector<int> blocks0;  // N x T
  std::vector<int> blocks1;  // N x W1
  std::vector<int> blocks2;  // N x W2
  std::vector<int> q;        // blocks per row
  nn::Tensor<T> conv1, h1, conv2, h2;
  std::vector<nn::LstmRowCache<T>> lstm1, lstm2;
  // capsule path
  nn::Tensor<T> prim_s;  // [I x m] before squash
  nn::Tensor<T> u;       // [I x m]
  nn::Tensor<T> u_hat;   // [I x L x digit]
  nn::RoutingResult<T> routing;
  // fc path
  nn::FcHeadCache<T> fc;
  /// Capsule lengths or sigmoid outputs, one per label.
  std::vector<T> scores;
};

template <class T>
struct Objective {
  T loss{0};
  std::vector<T> grad;      ///< w.r.t. scores, or logits when wrt_logits
  bool wrt_logits = false;
};

/// Labels whose score is >= threshold; the argmax label when none is.
template <class T>
std::set<std::size_t> predict(std::span<const T> scores, double threshold) {
  std::set<std::size_t> out;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (static_cast<double>(scores[k]) >= threshold) out.insert(k);
  }
  if (out.empty() && !scores.empty()) {
    out.insert(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()));
  }
  return out;
}

/// Graph-CNN text classifier: two row-wise conv (+recurrent) layers, then
/// either primary capsules + DigitCaps routing or an FC sigmoid head.
template <class T>
class Network {
 public:
  Network(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    init(seed);
  }

  Network(ModelConfig cfg, nn::LayerParams<T> params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  nn::LayerParams<T>& params() noexcept { return params_; }
  const nn::LayerParams<T>& params() const noexcept { return params_; }
  std::size_t labels() const { return cfg_.label_count(); }

  /// Creates (all-ones) attention scalars for every non-empty row of a
  /// document that has no bank entry yet. Returns the names added.
  std::vector<std::string> ensure_attention(std::span<const std::int32_t> blocks) {
    std::vector<std::string> added;
    if (!cfg_.flags.attentional_lstm) return added;
    const auto q = row_blocks(blocks);
    for (std::size_t r = 0; r < q.size(); ++r) {
      if (q[r] <= 0) continue;
      for (int layer : {1, 2}) {
        auto name = attention_name(layer, r, q[r]);
        if (params_.contains(name)) continue;
        params_.add(name, nn::Tensor<T>({static_cast<std::size_t>(q[r])}, T{1}));
        added.push_back(std::move(name));
      }
    }
    return added;
  }

  /// Block count per row (max block label).
  std::vector<int> row_blocks(std::span<const std::int32_t> blocks) const {
    const auto& d = cfg_.dims;
    if (blocks.size() != d.N * d.T) throw ShapeError("block labels: expected N*T entries");
    std::vector<int> q(d.N, 0);
    for (std::size_t r = 0; r < d.N; ++r) {
      for (std::size_t t = 0; t < d.T; ++t) q[r] = std::max(q[r], static_cast<int>(blocks[r * d.T + t]));
    }
    return q;
  }

  Forward<T> forward(const nn::Tensor<T>& x, std::span<const std::int32_t> blocks) const {
    const auto& d = cfg_.dims;
    nn::expect_shape(x.shape(), {d.N, d.T, d.D}, "model input");
    Forward<T> fw;
    fw.x = x;
    fw.blocks0.assign(blocks.begin(), blocks.end());
    fw.q = row_blocks(blocks);
    fw.blocks1 = conv_blocks(fw.blocks0, d.N, d.T, d.stride);
    fw.blocks2 = conv_blocks(fw.blocks1, d.N, d.width1(), d.stride);

    fw.conv1 = nn::conv_row(fw.x, params_.value("conv1.K"), params_.value("conv1.b"), d.stride);
    fw.h1 = recurrent_forward(1, fw.conv1, fw.blocks1, fw.q, fw.lstm1);
    fw.conv2 = nn::conv_row(fw.h1, params_.value("conv2.K"), params_.value("conv2.b"), d.stride);
    fw.h2 = recurrent_forward(2, fw.conv2, fw.blocks2, fw.q, fw.lstm2);

    if (cfg_.flags.capsule) {
      capsule_forward(fw);
    } else {
      fw.fc = nn::fc_sigmoid_head<T>(params_, "fc", d.fc_hidden.size() + 1, fw.h2.values());
      fw.scores = fw.fc.outputs;
    }
    return fw;
  }

  /// Loss for one document. targets: 0/1 per label; alpha: per-label weights
  /// (ignored unless the weighted margin loss is enabled; empty means 1).
  Objective<T> objective(const Forward<T>& fw, std::span<const T> targets, std::span<const T> alpha) const {
    Objective<T> out;
    if (cfg_.flags.weighted_margin_loss || cfg_.flags.capsule) {
      const bool weighted = cfg_.flags.weighted_margin_loss;
      auto lv = nn::margin_loss<T>(fw.scores, targets, weighted ? alpha : std::span<const T>{}, cfg_.margin(weighted));
      out.loss = lv.loss;
      out.grad = std::move(lv.grad);
    } else {
      auto lv = nn::bce_with_logits<T>(fw.fc.logits, targets);
      out.loss = lv.loss;
      out.grad = std::move(lv.grad);
      out.wrt_logits = true;
    }
    return out;
  }

  /// Accumulates parameter gradients (times `scale`) into g. Attention
  /// buffers are tracked on demand.
  void backward(const Forward<T>& fw, const Objective<T>& obj, nn::Gradients<T>& g, T scale = T{1}) const {
    const auto& d = cfg_.dims;
    std::vector<T> dhead(obj.grad.begin(), obj.grad.end());
    for (auto& v : dhead) v *= scale;
    nn::Tensor<T> dh2(fw.h2.shape());
    if (cfg_.flags.capsule) {
      capsule_backward(fw, dhead, dh2, g);
    } else {
      if (!obj.wrt_logits) {
        for (std::size_t k = 0; k < dhead.size(); ++k) dhead[k] *= fw.scores[k] * (T{1} - fw.scores[k]);
      }
      nn::fc_sigmoid_head_backward<T>(params_, g, "fc", d.fc_hidden.size() + 1, fw.fc, dhead, dh2.values());
    }
    nn::Tensor<T> dconv2 = recurrent_backward(2, fw.conv2, fw.blocks2, fw.q, fw.lstm2, dh2, g);
    nn::Tensor<T> dh1;
    nn::conv_row_backward(fw.h1, params_.value("conv2.K"), fw.conv2, dconv2, d.stride, &dh1, g.at("conv2.K"),
                          g.at("conv2.b"));
    nn::Tensor<T> dconv1 = recurrent_backward(1, fw.conv1, fw.blocks1, fw.q, fw.lstm1, dh1, g);
    nn::conv_row_backward<T>(fw.x, params_.value("conv1.K"), fw.conv1, dconv1, d.stride, nullptr, g.at("conv1.K"),
                             g.at("conv1.b"));
  }

 private:
  void init(std::uint64_t seed) {
    const auto& d = cfg_.dims;
    const std::size_t L = labels();
    Rng rng(derive_seed(seed, fnv1a64("model-init")));
    const double relu_gain = std::sqrt(2.0);
    params_.add("conv1.K", nn::fan_in_uniform<T>({d.k1, 3, d.D}, 3 * d.D, relu_gain, rng));
    params_.add("conv1.b", nn::Tensor<T>({d.k1}));
    if (cfg_.flags.recurrent()) nn::add_lstm_params(params_, "lstm1", d.k1, d.k1, rng);
    params_.add("conv2.K", nn::fan_in_uniform<T>({d.k2, 3, d.k1}, 3 * d.k1, relu_gain, rng));
    params_.add("conv2.b", nn::Tensor<T>({d.k2}));
    if (cfg_.flags.recurrent()) nn::add_lstm_params(params_, "lstm2", d.k2, d.k2, rng);
    if (cfg_.flags.capsule) {
      const std::size_t fan = d.primary_width() * d.k2;
      params_.add("prim.W", nn::fan_in_uniform<T>({d.M * d.m, fan}, fan, 1.0, rng));
      params_.add("prim.b", nn::Tensor<T>({d.M * d.m}));
      params_.add("digit.W", nn::fan_in_uniform<T>({d.input_capsules(), L, d.digit_dim, d.m}, d.m, 1.0, rng));
    } else {
      nn::add_fc_head_params(params_, "fc", d.flat_size(), d.fc_hidden, L, rng);
    }
  }

  std::span<const T> attention_values(int layer, std::size_t row, int q) const {
    if (!cfg_.flags.attentional_lstm || q <= 0) return {};
    const auto name = attention_name(layer, row, q);
    if (!params_.contains(name)) throw Error("attention scalars " + name + " missing; call ensure_attention first");
    return params_.value(name).values();
  }

  nn::Tensor<T> recurrent_forward(int layer, const nn::Tensor<T>& in, const std::vector<int>& blocks,
                                  const std::vector<int>& q, std::vector<nn::LstmRowCache<T>>& caches) const {
    if (!cfg_.flags.recurrent()) return in;
    const std::size_t N = in.dim(0), W = in.dim(1), C = in.dim(2);
    const auto w = nn::lstm_weights(params_, "lstm" + std::to_string(layer));
    nn::Tensor<T> h({N, W, w.hidden()});
    caches.clear();
    caches.reserve(N);
    for (std::size_t r = 0; r < N; ++r) {
      caches.push_back(nn::attn_lstm_row<T>(std::span<const T>(in.data() + r * W * C, W * C),
                                            std::span<const int>(blocks.data() + r * W, W),
                                            attention_values(layer, r, q[r]), w,
                                            std::span<T>(h.data() + r * W * w.hidden(), W * w.hidden())));
    }
    return h;
  }

  nn::Tensor<T> recurrent_backward(int layer, const nn::Tensor<T>& in, const std::vector<int>& blocks,
                                   const std::vector<int>& q, const std::vector<nn::LstmRowCache<T>>& caches,
                                   const nn::Tensor<T>& dh, nn::Gradients<T>& g) const {
    if (!cfg_.flags.recurrent()) return dh;
    const std::size_t N = in.dim(0), W = in.dim(1), C = in.dim(2);
    const std::string prefix = "lstm" + std::to_string(layer);
    const auto w = nn::lstm_weights(params_, prefix);
    auto lg = nn::lstm_grads(g, prefix);
    const std::size_t H = w.hidden();
    nn::Tensor<T> din(in.shape());
    for (std::size_t r = 0; r < N; ++r) {
      std::span<T> dalpha;
      if (cfg_.flags.attentional_lstm && q[r] > 0) {
        const auto name = attention_name(layer, r, q[r]);
        g.track(name, {static_cast<std::size_t>(q[r])});
        dalpha = g.at(name).values();
      }
      nn::attn_lstm_row_backward<T>(caches[r], std::span<const T>(in.data() + r * W * C, W * C),
                                    std::span<const int>(blocks.data() + r * W, W), w,
                                    std::span<const T>(dh.data() + r * W * H, W * H),
                                    std::span<T>(din.data() + r * W * C, W * C), lg, dalpha);
    }
    return din;
  }

  void capsule_forward(Forward<T>& fw) const {
    const auto& d = cfg_.dims;
    const std::size_t W2 = d.width2(), Kp = d.primary_width(), P = d.primary_positions();
    const std::size_t I = d.input_capsules();
    const auto& pw = params_.value("prim.W");
    const auto& pb = params_.value("prim.b");
    fw.prim_s = nn::Tensor<T>({I, d.m});
    fw.u = nn::Tensor<T>({I, d.m});
    for (std::size_t r = 0; r < d.N; ++r) {
      for (std::size_t p = 0; p < P; ++p) {
        std::span<const T> window(fw.h2.data() + (r * W2 + p) * d.k2, Kp * d.k2);
        const std::size_t first = (r * P + p) * d.M;  // first capsule of this position
        nn::dense_forward<T>(pw, pb, window, std::span<T>(fw.prim_s.data() + first * d.m, d.M * d.m));
      }
    }
    for (std::size_t i = 0; i < I; ++i) {
      nn::squash<T>(std::span<const T>(fw.prim_s.data() + i * d.m, d.m), std::span<T>(fw.u.data() + i * d.m, d.m));
    }
    fw.u_hat = nn::prediction_vectors(fw.u, params_.value("digit.W"));
    fw.routing = nn::dynamic_routing(fw.u_hat, cfg_.training.routing_iters);
    fw.scores = nn::capsule_lengths(fw.routing.v);
  }

  void capsule_backward(const Forward<T>& fw, std::span<const T> dlen, nn::Tensor<T>& dh2, nn::Gradients<T>& g) const {
    const auto& d = cfg_.dims;
    const std::size_t W2 = d.width2(), Kp = d.primary_width(), P = d.primary_positions();
    const std::size_t I = d.input_capsules();
    auto dv = nn::capsule_lengths_backward<T>(fw.routing.v, fw.scores, dlen);
    auto du_hat = nn::dynamic_routing_backward(fw.u_hat, fw.routing, dv, cfg_.training.routing_gradient);
    nn::Tensor<T> du;
    nn::prediction_vectors_backward(fw.u, params_.value("digit.W"), du_hat, &du, g.at("digit.W"));
    nn::Tensor<T> ds({I, d.m});
    for (std::size_t i = 0; i < I; ++i) {
      nn::squash_backward<T>(std::span<const T>(fw.prim_s.data() + i * d.m, d.m),
                             std::span<const T>(du.data() + i * d.m, d.m), std::span<T>(ds.data() + i * d.m, d.m));
    }
    const auto& pw = params_.value("prim.W");
    auto& gw = g.at("prim.W");
    auto& gb = g.at("prim.b");
    dh2.zero();
    std::vector<T> dwin(Kp * d.k2);
    for (std::size_t r = 0; r < d.N; ++r) {
      for (std::size_t p = 0; p < P; ++p) {
        std::span<const T> window(fw.h2.data() + (r * W2 + p) * d.k2, Kp * d.k2);
        const std::size_t first = (r * P + p) * d.M;
        nn::dense_backward<T>(pw, window, std::span<const T>(ds.data() + first * d.m, d.M * d.m), dwin, gw, gb);
        T* dst = dh2.data() + (r * W2 + p) * d.k2;
        for (std::size_t k = 0; k < dwin.size(); ++k) dst[k] += dwin[k];
      }
    }
  }

  ModelConfig cfg_;
  nn::LayerParams<T> params_;
};

}  // namespace agcr::model
