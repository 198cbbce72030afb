#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "agcr/nn/tensor.hpp"
#include "agcr/random.hpp"

namespace agcr::nn {

template <class T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Param(Tensor<T> v = {}) : value(std::move(v)), grad(value.shape()) {}
};

/// Named trainable tensors with gradient accumulators. Ordered by name so
/// that iteration (optimizer, serialization) is deterministic.
template <class T>
class LayerParams {
 public:
  using Map = std::map<std::string, Param<T>>;

  Param<T>& add(const std::string& name, Tensor<T> value) {
    auto [it, inserted] = params_.try_emplace(name, std::move(value));
    if (!inserted) throw Error("duplicate parameter \"" + name + "\"");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.contains(name); }

  Param<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter \"" + name + "\"");
    return it->second;
  }
  const Param<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter \"" + name + "\"");
    return it->second;
  }

  Tensor<T>& value(const std::string& name) { return at(name).value; }
  const Tensor<T>& value(const std::string& name) const { return at(name).value; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.zero();
  }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  template <class U>
  LayerParams<U> cast() const {
    LayerParams<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>());
    return out;
  }

 private:
  Map params_;
};

/// Gradient buffers keyed like LayerParams; used by backward passes so that
/// independent documents can be differentiated into separate buffers and
/// merged afterwards.
template <class T>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const LayerParams<T>& params) {
    for (const auto& [name, p] : params) grads_.emplace(name, Tensor<T>(p.value.shape()));
  }

  Tensor<T>& at(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw Error("no gradient buffer for \"" + name + "\"");
    return it->second;
  }

  /// Creates a zero buffer for a parameter added after construction.
  void track(const std::string& name, const Shape& shape) { grads_.try_emplace(name, Tensor<T>(shape)); }

  void zero() {
    for (auto& [_, g] : grads_) g.zero();
  }

  /// params[name].grad += scale * this[name]
  void accumulate_into(LayerParams<T>& params, T scale = T{1}) const {
    for (const auto& [name, g] : grads_) {
      auto& dst = params.at(name).grad;
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += scale * g[i];
    }
  }

  auto begin() { return grads_.begin(); }
  auto end() { return grads_.end(); }
  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }

 private:
  std::map<std::string, Tensor<T>> grads_;
};

/// Uniform(-bound, bound) fill.
template <class T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.values()) x = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

/// Fan-in scaled uniform init: bound = gain * sqrt(3 / fan_in).
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  return uniform_tensor<T>(std::move(shape), gain * std::sqrt(3.0 / static_cast<double>(fan_in)), rng);
}

}  // namespace agcr::nn
