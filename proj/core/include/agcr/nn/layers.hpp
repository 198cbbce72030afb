#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "agcr/nn/params.hpp"
#include "agcr/nn/tensor.hpp"

namespace agcr::nn {

// ---------------------------------------------------------------------------
// Row-wise 1x3 convolution + ReLU

inline std::size_t conv_out_width(std::size_t width, std::size_t stride) {
  if (width < 3) throw ShapeError("conv_row: input width " + std::to_string(width) + " < kernel width 3");
  return (width - 3) / stride + 1;
}

/// x [N x W x Cin], kernels [Cout x 3 x Cin], bias [Cout] -> ReLU(conv) [N x W' x Cout].
/// Rows never mix: output row r only reads input row r.
template <class T>
Tensor<T> conv_row(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias, std::size_t stride = 1) {
  if (x.rank() != 3 || kernels.rank() != 3 || bias.rank() != 1) throw ShapeError("conv_row: bad tensor ranks");
  if (stride != 1 && stride != 2) throw ShapeError("conv_row: stride must be 1 or 2");
  const std::size_t N = x.dim(0), W = x.dim(1), Cin = x.dim(2), Cout = kernels.dim(0);
  expect_shape(kernels.shape(), {Cout, 3, Cin}, "conv_row kernels");
  expect_shape(bias.shape(), {Cout}, "conv_row bias");
  const std::size_t Wo = conv_out_width(W, stride);
  Tensor<T> out({N, Wo, Cout});
  const std::size_t span = 3 * Cin;
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t j = 0; j < Wo; ++j) {
      const T* in = x.data() + (r * W + j * stride) * Cin;  // 3 consecutive positions
      T* o = out.data() + (r * Wo + j) * Cout;
      for (std::size_t k = 0; k < Cout; ++k) {
        const T* ker = kernels.data() + k * span;
        T acc = bias[k];
        for (std::size_t i = 0; i < span; ++i) acc += ker[i] * in[i];
        o[k] = acc > T{0} ? acc : T{0};
      }
    }
  }
  check_finite(out, "conv_row");
  return out;
}

/// Backward of conv_row given its forward output `out`. Accumulates into
/// grad_kernels / grad_bias; overwrites *grad_x when non-null.
template <class T>
void conv_row_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& out, const Tensor<T>& grad_out,
                       std::size_t stride, Tensor<T>* grad_x, Tensor<T>& grad_kernels, Tensor<T>& grad_bias) {
  const std::size_t N = x.dim(0), W = x.dim(1), Cin = x.dim(2), Cout = kernels.dim(0);
  const std::size_t Wo = out.dim(1);
  expect_shape(grad_out.shape(), out.shape(), "conv_row_backward grad");
  const std::size_t span = 3 * Cin;
  if (grad_x) {
    if (grad_x->shape() != x.shape()) *grad_x = Tensor<T>(x.shape());
    grad_x->zero();
  }
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t j = 0; j < Wo; ++j) {
      const std::size_t in_off = (r * W + j * stride) * Cin;
      const T* in = x.data() + in_off;
      const T* o = out.data() + (r * Wo + j) * Cout;
      const T* go = grad_out.data() + (r * Wo + j) * Cout;
      for (std::size_t k = 0; k < Cout; ++k) {
        if (!(o[k] > T{0})) continue;
        const T g = go[k];
        if (g == T{0}) continue;
        grad_bias[k] += g;
        T* gk = grad_kernels.data() + k * span;
        for (std::size_t i = 0; i < span; ++i) gk[i] += g * in[i];
        if (grad_x) {
          const T* ker = kernels.data() + k * span;
          T* gx = grad_x->data() + in_off;
          for (std::size_t i = 0; i < span; ++i) gx[i] += g * ker[i];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Attentional LSTM over one row
//
//   f = sig(Wf a x + Uf c' + bf)    i = sig(Wi a x + Ui c' + bi)
//   o = sig(Wo a x + Uo c' + bo)    c = f c' + i tanh(Wc a x + bc)
//   h = o tanh(c)
//
// Gates read the previous cell state c'. `a` is the attention scalar of the
// block the position belongs to. PAD positions (block 0) carry the cell state
// through unchanged and emit h = 0.

template <class T>
struct LstmWeights {
  const Tensor<T>& wf;
  const Tensor<T>& wi;
  const Tensor<T>& wo;
  const Tensor<T>& wc;
  const Tensor<T>& uf;
  const Tensor<T>& ui;
  const Tensor<T>& uo;
  const Tensor<T>& bf;
  const Tensor<T>& bi;
  const Tensor<T>& bo;
  const Tensor<T>& bc;

  std::size_t hidden() const { return wf.dim(0); }
  std::size_t input() const { return wf.dim(1); }
};

template <class T>
struct LstmGrads {
  Tensor<T>& wf;
  Tensor<T>& wi;
  Tensor<T>& wo;
  Tensor<T>& wc;
  Tensor<T>& uf;
  Tensor<T>& ui;
  Tensor<T>& uo;
  Tensor<T>& bf;
  Tensor<T>& bi;
  Tensor<T>& bo;
  Tensor<T>& bc;
};

inline const char* const kLstmParamNames[] = {"Wf", "Wi", "Wo", "Wc", "Uf", "Ui", "Uo", "bf", "bi", "bo", "bc"};

template <class T>
LstmWeights<T> lstm_weights(const LayerParams<T>& p, const std::string& prefix) {
  auto v = [&](const char* n) -> const Tensor<T>& { return p.value(prefix + "." + n); };
  return {v("Wf"), v("Wi"), v("Wo"), v("Wc"), v("Uf"), v("Ui"), v("Uo"), v("bf"), v("bi"), v("bo"), v("bc")};
}

template <class T>
LstmGrads<T> lstm_grads(Gradients<T>& g, const std::string& prefix) {
  auto v = [&](const char* n) -> Tensor<T>& { return g.at(prefix + "." + n); };
  return {v("Wf"), v("Wi"), v("Wo"), v("Wc"), v("Uf"), v("Ui"), v("Uo"), v("bf"), v("bi"), v("bo"), v("bc")};
}

/// Registers the LSTM tensors under `prefix`.
template <class T>
void add_lstm_params(LayerParams<T>& p, const std::string& prefix, std::size_t input, std::size_t hidden, Rng& rng) {
  for (const char* n : {"Wf", "Wi", "Wo", "Wc"}) p.add(prefix + "." + n, fan_in_uniform<T>({hidden, input}, input, 1.0, rng));
  for (const char* n : {"Uf", "Ui", "Uo"}) p.add(prefix + "." + n, fan_in_uniform<T>({hidden, hidden}, hidden, 1.0, rng));
  for (const char* n : {"bf", "bi", "bo", "bc"}) p.add(prefix + "." + n, Tensor<T>({hidden}));
}

template <class T>
struct LstmRowCache {
  std::size_t steps = 0;
  std::size_t hidden = 0;
  std::vector<T> f, i, o, g, c, tanh_c, c_prev;  // steps x hidden
  std::vector<T> scale;                          // attention scalar per step (0 for PAD)
};

namespace detail {
template <class T>
inline T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}
}  // namespace detail

/// x: steps x C (row-major), blocks: per-step block index (0 = PAD),
/// alpha: per-block scalars (alpha[b-1]); empty alpha means every scalar is 1.
/// Writes h (steps x H) and returns the cache needed by the backward pass.
template <class T>
LstmRowCache<T> attn_lstm_row(std::span<const T> x, std::span<const int> blocks, std::span<const T> alpha,
                              const LstmWeights<T>& w, std::span<T> h) {
  const std::size_t H = w.hidden(), C = w.input();
  const std::size_t steps = blocks.size();
  if (x.size() != steps * C || h.size() != steps * H) throw ShapeError("attn_lstm_row: size mismatch");
  LstmRowCache<T> cache;
  cache.steps = steps;
  cache.hidden = H;
  for (auto* v : {&cache.f, &cache.i, &cache.o, &cache.g, &cache.c, &cache.tanh_c, &cache.c_prev}) v->assign(steps * H, T{0});
  cache.scale.assign(steps, T{0});

  std::vector<T> c(H, T{0});
  std::vector<T> xs(C);
  for (std::size_t t = 0; t < steps; ++t) {
    T* ht = h.data() + t * H;
    std::copy(c.begin(), c.end(), cache.c_prev.begin() + static_cast<std::ptrdiff_t>(t * H));
    const int b = blocks[t];
    if (b <= 0) {
      std::fill(ht, ht + H, T{0});
      std::copy(c.begin(), c.end(), cache.c.begin() + static_cast<std::ptrdiff_t>(t * H));
      for (std::size_t k = 0; k < H; ++k) cache.tanh_c[t * H + k] = std::tanh(c[k]);
      continue;
    }
    if (!alpha.empty() && static_cast<std::size_t>(b) > alpha.size()) throw ShapeError("attn_lstm_row: block index exceeds attention size");
    const T a = alpha.empty() ? T{1} : alpha[static_cast<std::size_t>(b - 1)];
    cache.scale[t] = a;
    const T* xt = x.data() + t * C;
    for (std::size_t k = 0; k < C; ++k) xs[k] = a * xt[k];
    for (std::size_t r = 0; r < H; ++r) {
      T af = w.bf[r], ai = w.bi[r], ao = w.bo[r], ag = w.bc[r];
      const T* wf = w.wf.data() + r * C;
      const T* wi = w.wi.data() + r * C;
      const T* wo = w.wo.data() + r * C;
      const T* wc = w.wc.data() + r * C;
      for (std::size_t k = 0; k < C; ++k) {
        af += wf[k] * xs[k];
        ai += wi[k] * xs[k];
        ao += wo[k] * xs[k];
        ag += wc[k] * xs[k];
      }
      const T* uf = w.uf.data() + r * H;
      const T* ui = w.ui.data() + r * H;
      const T* uo = w.uo.data() + r * H;
      for (std::size_t k = 0; k < H; ++k) {
        af += uf[k] * c[k];
        ai += ui[k] * c[k];
        ao += uo[k] * c[k];
      }
      const std::size_t idx = t * H + r;
      cache.f[idx] = detail::sigmoid(af);
      cache.i[idx] = detail::sigmoid(ai);
      cache.o[idx] = detail::sigmoid(ao);
      cache.g[idx] = std::tanh(ag);
    }
    for (std::size_t r = 0; r < H; ++r) {
      const std::size_t idx = t * H + r;
      c[r] = cache.f[idx] * c[r] + cache.i[idx] * cache.g[idx];
      cache.c[idx] = c[r];
      cache.tanh_c[idx] = std::tanh(c[r]);
      ht[r] = cache.o[idx] * cache.tanh_c[idx];
    }
  }
  check_finite(std::span<const T>(h.data(), h.size()), "attn_lstm_row");
  return cache;
}

/// Backward of attn_lstm_row. dh: steps x H. Overwrites dx (steps x C) when
/// non-empty; accumulates weight gradients and, when dalpha is non-empty,
/// attention-scalar gradients (dalpha[b-1]).
template <class T>
void attn_lstm_row_backward(const LstmRowCache<T>& cache, std::span<const T> x, std::span<const int> blocks,
                            const LstmWeights<T>& w, std::span<const T> dh, std::span<T> dx, LstmGrads<T>& g,
                            std::span<T> dalpha) {
  const std::size_t H = cache.hidden, C = w.input(), steps = cache.steps;
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), T{0});
  std::vector<T> dc_next(H, T{0});
  std::vector<T> dc_prev(H);
  std::vector<T> daf(H), dai(H), dao(H), dag(H), dxs(C), xs(C);
  for (std::size_t s = steps; s-- > 0;) {
    if (blocks[s] <= 0) continue;  // c passes through unchanged; h is constant 0
    const T a = cache.scale[s];
    const T* xt = x.data() + s * C;
    for (std::size_t k = 0; k < C; ++k) xs[k] = a * xt[k];
    for (std::size_t r = 0; r < H; ++r) {
      const std::size_t idx = s * H + r;
      const T o = cache.o[idx], tc = cache.tanh_c[idx], f = cache.f[idx], i = cache.i[idx], gg = cache.g[idx];
      const T dht = dh[idx];
      const T dc = dc_next[r] + dht * o * (T{1} - tc * tc);
      dao[r] = dht * tc * o * (T{1} - o);
      daf[r] = dc * cache.c_prev[idx] * f * (T{1} - f);
      dai[r] = dc * gg * i * (T{1} - i);
      dag[r] = dc * i * (T{1} - gg * gg);
      dc_prev[r] = dc * f;
    }
    const T* cp = cache.c_prev.data() + s * H;
    std::fill(dxs.begin(), dxs.end(), T{0});
    for (std::size_t r = 0; r < H; ++r) {
      g.bf[r] += daf[r];
      g.bi[r] += dai[r];
      g.bo[r] += dao[r];
      g.bc[r] += dag[r];
      T* gwf = g.wf.data() + r * C;
      T* gwi = g.wi.data() + r * C;
      T* gwo = g.wo.data() + r * C;
      T* gwc = g.wc.data() + r * C;
      const T* wf = w.wf.data() + r * C;
      const T* wi = w.wi.data() + r * C;
      const T* wo = w.wo.data() + r * C;
      const T* wc = w.wc.data() + r * C;
      for (std::size_t k = 0; k < C; ++k) {
        gwf[k] += daf[r] * xs[k];
        gwi[k] += dai[r] * xs[k];
        gwo[k] += dao[r] * xs[k];
        gwc[k] += dag[r] * xs[k];
        dxs[k] += wf[k] * daf[r] + wi[k] * dai[r] + wo[k] * dao[r] + wc[k] * dag[r];
      }
      T* guf = g.uf.data() + r * H;
      T* gui = g.ui.data() + r * H;
      T* guo = g.uo.data() + r * H;
      const T* uf = w.uf.data() + r * H;
      const T* ui = w.ui.data() + r * H;
      const T* uo = w.uo.data() + r * H;
      for (std::size_t k = 0; k < H; ++k) {
        guf[k] += daf[r] * cp[k];
        gui[k] += dai[r] * cp[k];
        guo[k] += dao[r] * cp[k];
        dc_prev[k] += uf[k] * daf[r] + ui[k] * dai[r] + uo[k] * dao[r];
      }
    }
    if (!dx.empty()) {
      T* dxt = dx.data() + s * C;
      for (std::size_t k = 0; k < C; ++k) dxt[k] = a * dxs[k];
    }
    if (!dalpha.empty()) {
      T acc{0};
      for (std::size_t k = 0; k < C; ++k) acc += dxs[k] * xt[k];
      dalpha[static_cast<std::size_t>(blocks[s] - 1)] += acc;
    }
    dc_next.swap(dc_prev);
  }
}

// ---------------------------------------------------------------------------
// Dense layers

/// y = W x + b; W [out x in].
template <class T>
void dense_forward(const Tensor<T>& w, const Tensor<T>& b, std::span<const T> x, std::span<T> y) {
  const std::size_t out = w.dim(0), in = w.dim(1);
  if (x.size() != in || y.size() != out) throw ShapeError("dense: size mismatch");
  for (std::size_t r = 0; r < out; ++r) {
    const T* row = w.data() + r * in;
    T acc = b[r];
    for (std::size_t k = 0; k < in; ++k) acc += row[k] * x[k];
    y[r] = acc;
  }
}

template <class T>
void dense_backward(const Tensor<T>& w, std::span<const T> x, std::span<const T> dy, std::span<T> dx, Tensor<T>& gw,
                    Tensor<T>& gb) {
  const std::size_t out = w.dim(0), in = w.dim(1);
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), T{0});
  for (std::size_t r = 0; r < out; ++r) {
    const T g = dy[r];
    if (g == T{0}) continue;
    gb[r] += g;
    T* grow = gw.data() + r * in;
    for (std::size_t k = 0; k < in; ++k) grow[k] += g * x[k];
    if (!dx.empty()) {
      const T* row = w.data() + r * in;
      for (std::size_t k = 0; k < in; ++k) dx[k] += g * row[k];
    }
  }
}

/// Multi-layer perceptron head: (FC -> ReLU) for each hidden width, then
/// FC to `outputs` logits, then sigmoid. Parameters are "<prefix>.W<i>" and
/// "<prefix>.b<i>".
template <class T>
struct FcHeadCache {
  std::vector<std::vector<T>> activations;  // input, hidden outputs (post-ReLU)
  std::vector<T> logits;
  std::vector<T> outputs;  // sigmoid(logits)
};

template <class T>
void add_fc_head_params(LayerParams<T>& p, const std::string& prefix, std::size_t input,
                        const std::vector<std::size_t>& hidden, std::size_t outputs, Rng& rng) {
  std::size_t in = input;
  std::size_t layer = 0;
  for (std::size_t h : hidden) {
    p.add(prefix + ".W" + std::to_string(layer), fan_in_uniform<T>({h, in}, in, std::sqrt(2.0), rng));
    p.add(prefix + ".b" + std::to_string(layer), Tensor<T>({h}));
    in = h;
    ++layer;
  }
  p.add(prefix + ".W" + std::to_string(layer), fan_in_uniform<T>({outputs, in}, in, 1.0, rng));
  p.add(prefix + ".b" + std::to_string(layer), Tensor<T>({outputs}));
}

template <class T>
FcHeadCache<T> fc_sigmoid_head(const LayerParams<T>& p, const std::string& prefix, std::size_t layers,
                               std::span<const T> x) {
  FcHeadCache<T> cache;
  cache.activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = p.value(prefix + ".W" + std::to_string(l));
    const auto& b = p.value(prefix + ".b" + std::to_string(l));
    std::vector<T> y(w.dim(0));
    dense_forward<T>(w, b, cache.activations.back(), y);
    if (l + 1 == layers) {
      cache.logits = std::move(y);
    } else {
      for (auto& v : y) v = v > T{0} ? v : T{0};
      cache.activations.push_back(std::move(y));
    }
  }
  cache.outputs.resize(cache.logits.size());
  for (std::size_t k = 0; k < cache.logits.size(); ++k) cache.outputs[k] = detail::sigmoid(cache.logits[k]);
  check_finite(std::span<const T>(cache.outputs), "fc_sigmoid_head");
  return cache;
}

/// Backward from d(loss)/d(logits). Overwrites dx when non-empty.
template <class T>
void fc_sigmoid_head_backward(const LayerParams<T>& p, Gradients<T>& g, const std::string& prefix, std::size_t layers,
                              const FcHeadCache<T>& cache, std::span<const T> dlogits, std::span<T> dx) {
  std::vector<T> dy(dlogits.begin(), dlogits.end());
  for (std::size_t l = layers; l-- > 0;) {
    const auto& w = p.value(prefix + ".W" + std::to_string(l));
    const auto& in = cache.activations[l];
    std::vector<T> din(l == 0 && dx.empty() ? 0 : in.size());
    dense_backward<T>(w, in, dy, din, g.at(prefix + ".W" + std::to_string(l)), g.at(prefix + ".b" + std::to_string(l)));
    if (l == 0) {
      if (!dx.empty()) std::copy(din.begin(), din.end(), dx.begin());
    } else {
      for (std::size_t k = 0; k < din.size(); ++k) din[k] = in[k] > T{0} ? din[k] : T{0};
      dy = std::move(din);
    }
  }
}

}  // namespace agcr::nn
