#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "agcr/nn/tensor.hpp"

namespace agcr::nn {

/// v = (|s|^2 / (1 + |s|^2)) * s / |s|, with v = 0 at s = 0.
template <class T>
void squash(std::span<const T> s, std::span<T> v) {
  T n2{0};
  for (T x : s) n2 += x * x;
  if (n2 == T{0}) {
    std::fill(v.begin(), v.end(), T{0});
    return;
  }
  const T n = std::sqrt(n2);
  const T scale = n / (T{1} + n2);
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = scale * s[i];
}

template <class T>
std::vector<T> squash(const std::vector<T>& s) {
  std::vector<T> v(s.size());
  squash<T>(s, v);
  return v;
}

/// ds = J^T dv for v = squash(s). Writing v = phi(|s|) s with phi(n) = n/(1+n^2):
/// ds = phi dv + (phi'(n)/n) (s . dv) s.
template <class T>
void squash_backward(std::span<const T> s, std::span<const T> dv, std::span<T> ds) {
  T n2{0}, sdv{0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    n2 += s[i] * s[i];
    sdv += s[i] * dv[i];
  }
  if (n2 == T{0}) {
    std::fill(ds.begin(), ds.end(), T{0});
    return;
  }
  const T n = std::sqrt(n2);
  const T d = T{1} + n2;
  const T phi = n / d;
  const T dphi_over_n = (T{1} - n2) / (d * d * n);
  for (std::size_t i = 0; i < s.size(); ++i) ds[i] = phi * dv[i] + dphi_over_n * sdv * s[i];
}

/// u [I x m_in], W [I x J x m_out x m_in] -> u_hat [I x J x m_out], u_hat(i,j) = W(i,j) u(i).
template <class T>
Tensor<T> prediction_vectors(const Tensor<T>& u, const Tensor<T>& w) {
  if (u.rank() != 2 || w.rank() != 4) throw ShapeError("prediction_vectors: bad tensor ranks");
  const std::size_t I = u.dim(0), m_in = u.dim(1), J = w.dim(1), m_out = w.dim(2);
  if (w.dim(0) != I || w.dim(3) != m_in) {
    throw ShapeError("prediction_vectors: W " + shape_string(w.shape()) + " incompatible with u " + shape_string(u.shape()));
  }
  Tensor<T> out({I, J, m_out});
  for (std::size_t i = 0; i < I; ++i) {
    const T* ui = u.data() + i * m_in;
    for (std::size_t j = 0; j < J; ++j) {
      const T* wij = w.data() + ((i * J + j) * m_out) * m_in;
      T* o = out.data() + (i * J + j) * m_out;
      for (std::size_t a = 0; a < m_out; ++a) {
        T acc{0};
        const T* row = wij + a * m_in;
        for (std::size_t b = 0; b < m_in; ++b) acc += row[b] * ui[b];
        o[a] = acc;
      }
    }
  }
  check_finite(out, "prediction_vectors");
  return out;
}

/// Accumulates dW; overwrites du when non-null.
template <class T>
void prediction_vectors_backward(const Tensor<T>& u, const Tensor<T>& w, const Tensor<T>& d_uhat, Tensor<T>* du,
                                 Tensor<T>& dw) {
  const std::size_t I = u.dim(0), m_in = u.dim(1), J = w.dim(1), m_out = w.dim(2);
  if (du) {
    if (du->shape() != u.shape()) *du = Tensor<T>(u.shape());
    du->zero();
  }
  for (std::size_t i = 0; i < I; ++i) {
    const T* ui = u.data() + i * m_in;
    for (std::size_t j = 0; j < J; ++j) {
      const T* g = d_uhat.data() + (i * J + j) * m_out;
      const std::size_t base = ((i * J + j) * m_out) * m_in;
      for (std::size_t a = 0; a < m_out; ++a) {
        if (g[a] == T{0}) continue;
        T* dwrow = dw.data() + base + a * m_in;
        for (std::size_t b = 0; b < m_in; ++b) dwrow[b] += g[a] * ui[b];
        if (du) {
          const T* wrow = w.data() + base + a * m_in;
          T* dui = du->data() + i * m_in;
          for (std::size_t b = 0; b < m_in; ++b) dui[b] += g[a] * wrow[b];
        }
      }
    }
  }
}

enum class RoutingGradient {
  Full,            ///< differentiate through every routing iteration
  FinalIteration,  ///< treat the final coupling coefficients as constants
};

template <class T>
struct RoutingResult {
  Tensor<T> v;  ///< [J x m_out]
  Tensor<T> c;  ///< final coupling coefficients [I x J]
  // per-iteration state for the backward pass
  std::vector<Tensor<T>> couplings;  // c^r [I x J]
  std::vector<Tensor<T>> inputs;     // s^r [J x m_out]
  std::vector<Tensor<T>> outputs;    // v^r [J x m_out]
};

/// Routing-by-agreement: logits b start at 0; each iteration sets
/// c = softmax_j(b), s_j = sum_i c_ij u_hat(i,j), v_j = squash(s_j) and, except
/// after the last iteration, b_ij += u_hat(i,j) . v_j.
template <class T>
RoutingResult<T> dynamic_routing(const Tensor<T>& u_hat, std::size_t iterations) {
  if (u_hat.rank() != 3) throw ShapeError("dynamic_routing: u_hat must be [I x J x m]");
  if (iterations < 1) throw ShapeError("dynamic_routing: iterations must be >= 1");
  const std::size_t I = u_hat.dim(0), J = u_hat.dim(1), M = u_hat.dim(2);
  RoutingResult<T> res;
  Tensor<T> b({I, J});
  for (std::size_t it = 0; it < iterations; ++it) {
    Tensor<T> c({I, J});
    for (std::size_t i = 0; i < I; ++i) {
      T mx = b.at(i, 0);
      for (std::size_t j = 1; j < J; ++j) mx = std::max(mx, b.at(i, j));
      T z{0};
      for (std::size_t j = 0; j < J; ++j) z += (c.at(i, j) = std::exp(b.at(i, j) - mx));
      for (std::size_t j = 0; j < J; ++j) c.at(i, j) /= z;
    }
    Tensor<T> s({J, M});
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        const T cij = c.at(i, j);
        const T* uh = u_hat.data() + (i * J + j) * M;
        T* sj = s.data() + j * M;
        for (std::size_t a = 0; a < M; ++a) sj[a] += cij * uh[a];
      }
    }
    Tensor<T> v({J, M});
    for (std::size_t j = 0; j < J; ++j) {
      squash<T>(std::span<const T>(s.data() + j * M, M), std::span<T>(v.data() + j * M, M));
    }
    if (it + 1 < iterations) {
      for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
          const T* uh = u_hat.data() + (i * J + j) * M;
          const T* vj = v.data() + j * M;
          T agree{0};
          for (std::size_t a = 0; a < M; ++a) agree += uh[a] * vj[a];
          b.at(i, j) += agree;
        }
      }
    }
    res.couplings.push_back(std::move(c));
    res.inputs.push_back(std::move(s));
    res.outputs.push_back(std::move(v));
  }
  res.v = res.outputs.back();
  res.c = res.couplings.back();
  check_finite(res.v, "dynamic_routing");
  return res;
}

/// d(loss)/d(u_hat) given d(loss)/d(v) of the final iteration.
template <class T>
Tensor<T> dynamic_routing_backward(const Tensor<T>& u_hat, const RoutingResult<T>& res, const Tensor<T>& dv,
                                   RoutingGradient mode = RoutingGradient::Full) {
  const std::size_t I = u_hat.dim(0), J = u_hat.dim(1), M = u_hat.dim(2);
  const std::size_t R = res.couplings.size();
  Tensor<T> du({I, J, M});
  Tensor<T> db_next({I, J});  // gradient w.r.t. b^{r+1}
  std::vector<T> ds(J * M);
  const std::size_t last = mode == RoutingGradient::Full ? 0 : R - 1;
  for (std::size_t r = R; r-- > last;) {
    const auto& c = res.couplings[r];
    const auto& s = res.inputs[r];
    const auto& v = res.outputs[r];
    // dv^r: from the output (final iteration) and from b^{r+1} = b^r + u_hat . v^r
    std::vector<T> dvr(J * M, T{0});
    if (r + 1 == R) {
      std::copy(dv.values().begin(), dv.values().end(), dvr.begin());
    } else {
      for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
          const T g = db_next.at(i, j);
          if (g == T{0}) continue;
          const T* uh = u_hat.data() + (i * J + j) * M;
          const T* vj = v.data() + j * M;
          T* duij = du.data() + (i * J + j) * M;
          for (std::size_t a = 0; a < M; ++a) {
            dvr[j * M + a] += g * uh[a];
            duij[a] += g * vj[a];
          }
        }
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      squash_backward<T>(std::span<const T>(s.data() + j * M, M), std::span<const T>(dvr.data() + j * M, M),
                         std::span<T>(ds.data() + j * M, M));
    }
    Tensor<T> db({I, J});
    for (std::size_t i = 0; i < I; ++i) {
      T weighted{0};
      std::vector<T> dc(J);
      for (std::size_t j = 0; j < J; ++j) {
        const T* uh = u_hat.data() + (i * J + j) * M;
        T* duij = du.data() + (i * J + j) * M;
        T acc{0};
        for (std::size_t a = 0; a < M; ++a) {
          acc += ds[j * M + a] * uh[a];
          duij[a] += c.at(i, j) * ds[j * M + a];
        }
        dc[j] = acc;
        weighted += c.at(i, j) * acc;
      }
      for (std::size_t j = 0; j < J; ++j) db.at(i, j) = db_next.at(i, j) + c.at(i, j) * (dc[j] - weighted);
    }
    db_next = std::move(db);
  }
  return du;
}

/// Euclidean norm of each row of v [J x M].
template <class T>
std::vector<T> capsule_lengths(const Tensor<T>& v) {
  const std::size_t J = v.dim(0), M = v.dim(1);
  std::vector<T> out(J);
  for (std::size_t j = 0; j < J; ++j) {
    T n2{0};
    for (std::size_t a = 0; a < M; ++a) n2 += v.at(j, a) * v.at(j, a);
    out[j] = std::sqrt(n2);
  }
  return out;
}

template <class T>
Tensor<T> capsule_lengths_backward(const Tensor<T>& v, std::span<const T> lengths, std::span<const T> dlen) {
  const std::size_t J = v.dim(0), M = v.dim(1);
  Tensor<T> dv({J, M});
  for (std::size_t j = 0; j < J; ++j) {
    if (lengths[j] == T{0}) continue;
    for (std::size_t a = 0; a < M; ++a) dv.at(j, a) = dlen[j] * v.at(j, a) / lengths[j];
  }
  return dv;
}

}  // namespace agcr::nn
