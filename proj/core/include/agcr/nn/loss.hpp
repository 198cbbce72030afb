#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "agcr/error.hpp"

namespace agcr::nn {

struct MarginLossConfig {
  double m_plus = 0.9;
  double m_minus = 0.1;
  double lambda = 0.5;
  double p = 1.0;  ///< adjustment factor scaling the negative term
};

template <class T>
struct LossValue {
  T loss{0};
  std::vector<T> grad;  ///< d(loss)/d(input), same length as the input
};

/// Hierarchy-weighted margin loss over class scores in [0, 1]:
///   sum_k T_k max(0, m+ - len_k)^2 + lambda p alpha_k (1 - T_k) max(0, len_k - m-)^2
/// alpha entries at positive positions are ignored. With alpha = 1 and p = 1
/// this is the plain capsule margin loss.
template <class T>
LossValue<T> margin_loss(std::span<const T> lengths, std::span<const T> targets, std::span<const T> alpha,
                         const MarginLossConfig& cfg) {
  const std::size_t L = lengths.size();
  if (targets.size() != L || (!alpha.empty() && alpha.size() != L)) throw ShapeError("margin_loss: size mismatch");
  LossValue<T> out;
  out.grad.assign(L, T{0});
  const T mp = static_cast<T>(cfg.m_plus), mm = static_cast<T>(cfg.m_minus);
  const T neg_scale = static_cast<T>(cfg.lambda * cfg.p);
  for (std::size_t k = 0; k < L; ++k) {
    const T len = lengths[k];
    if (targets[k] > T{0.5}) {
      const T gap = mp - len;
      if (gap > T{0}) {
        out.loss += gap * gap;
        out.grad[k] = T{-2} * gap;
      }
    } else {
      const T a = alpha.empty() ? T{1} : alpha[k];
      const T gap = len - mm;
      if (gap > T{0}) {
        out.loss += neg_scale * a * gap * gap;
        out.grad[k] = T{2} * neg_scale * a * gap;
      }
    }
  }
  return out;
}

/// Per-class binary cross-entropy on logits; grad is w.r.t. the logits.
template <class T>
LossValue<T> bce_with_logits(std::span<const T> logits, std::span<const T> targets) {
  const std::size_t L = logits.size();
  if (targets.size() != L) throw ShapeError("bce_with_logits: size mismatch");
  LossValue<T> out;
  out.grad.assign(L, T{0});
  for (std::size_t k = 0; k < L; ++k) {
    const T y = logits[k], t = targets[k];
    out.loss += std::max(y, T{0}) - y * t + std::log1p(std::exp(-std::abs(y)));
    out.grad[k] = T{1} / (T{1} + std::exp(-y)) - t;
  }
  return out;
}

}  // namespace agcr::nn
