#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "agcr/nn/params.hpp"

namespace agcr::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamMoments {
  Tensor<T> m;
  Tensor<T> v;
};

/// Adam with bias correction. Moment buffers are created on first use, so
/// parameters added later (attention scalars) are picked up automatically.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return t_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }

  std::map<std::string, AdamMoments<T>>& moments() noexcept { return moments_; }
  const std::map<std::string, AdamMoments<T>>& moments() const noexcept { return moments_; }

  void step(LayerParams<T>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    for (auto& [name, p] : params) {
      auto it = moments_.find(name);
      if (it == moments_.end()) {
        it = moments_.emplace(name, AdamMoments<T>{Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape())}).first;
      }
      auto& mo = it->second;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const T g = p.grad[i];
        mo.m[i] = b1 * mo.m[i] + (T{1} - b1) * g;
        mo.v[i] = b2 * mo.v[i] + (T{1} - b2) * g * g;
        const double mhat = static_cast<double>(mo.m[i]) / bc1;
        const double vhat = static_cast<double>(mo.v[i]) / bc2;
        p.value[i] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, AdamMoments<T>> moments_;
};

}  // namespace agcr::nn
