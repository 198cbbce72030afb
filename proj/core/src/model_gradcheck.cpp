#include "agcr/model/gradcheck.hpp"

#include <algorithm>

#include "agcr/model/network.hpp"
#include "agcr/random.hpp"

namespace agcr::model {

namespace {

// Rows hold 1-3 contiguous blocks followed by PAD; the last row is all PAD.
std::vector<std::int32_t> random_blocks(const Dims& d, Rng& rng) {
  std::vector<std::int32_t> blocks(d.N * d.T, 0);
  for (std::size_t r = 0; r + 1 < std::max<std::size_t>(d.N, 2); ++r) {
    const std::size_t len = d.T / 2 + rng.below(d.T - d.T / 2 + 1);
    const int q = 1 + static_cast<int>(rng.below(3));
    for (std::size_t t = 0; t < len; ++t) blocks[r * d.T + t] = 1 + static_cast<int>(t * static_cast<std::size_t>(q) / len);
  }
  return blocks;
}

template <class W>
nn::Tensor<W> widen(const nn::Tensor<double>& t) {
  nn::Tensor<W> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out.values()[i] = static_cast<W>(t.values()[i]);
  return out;
}

}  // namespace

ModelGradCheck check_model_gradients(const ModelConfig& cfg_in, std::uint64_t seed, double eps, std::size_t stride) {
  constexpr double weight_gain = 3.0;
  ModelConfig cfg = cfg_in;
  if (cfg.training.p <= 0.0) cfg.training.p = 0.3;
  Network<double> net(cfg, seed);
  const auto& d = cfg.dims;
  Rng rng(derive_seed(seed, fnv1a64("gradcheck")));
  const auto blocks = random_blocks(d, rng);
  nn::Tensor<double> x({d.N, d.T, d.D});
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (blocks[i / d.D] != 0) x[i] = rng.uniform(-1.0, 1.0);
  }
  net.ensure_attention(blocks);
  // Keep ReLU inputs of PAD positions off the kink and capsules away from the
  // flat region of squash near zero.
  for (auto& [name, p] : net.params()) {
    if (name.rfind("attn", 0) == 0) {
      for (auto& v : p.value.values()) v = rng.uniform(0.5, 1.5);
    } else if (p.value.rank() == 1) {
      for (auto& v : p.value.values()) v = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.05, 0.3);
    } else if (name == "prim.W" || name == "digit.W") {
      for (auto& v : p.value.values()) v *= weight_gain;
    }
  }
  const std::size_t L = cfg.label_count();
  std::vector<double> targets(L, 0.0), alpha(L, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    targets[k] = rng.coin() ? 1.0 : 0.0;
    alpha[k] = targets[k] > 0.5 ? 0.0 : rng.uniform(0.2, 1.0);
  }
  targets[rng.below(L)] = 1.0;

  nn::Gradients<double> g(net.params());
  {
    auto fw = net.forward(x, blocks);
    auto obj = net.objective(fw, targets, alpha);
    net.backward(fw, obj, g);
  }

  // Finite differences are taken on an extended-precision copy of the
  // network so roundoff stays far below the smallest checked gradients.
  using Wide = long double;
  nn::LayerParams<Wide> wide_params;
  for (const auto& [name, p] : net.params()) wide_params.add(name, widen<Wide>(p.value));
  Network<Wide> wide(cfg, std::move(wide_params));
  const auto wx = widen<Wide>(x);
  const std::vector<Wide> wt(targets.begin(), targets.end()), wa(alpha.begin(), alpha.end());
  auto loss = [&] { return wide.objective(wide.forward(wx, blocks), wt, wa).loss; };

  ModelGradCheck out;
  for (const auto& [name, p] : net.params()) {
    auto values = wide.params().value(name).values();
    const auto analytic = g.at(name).values();
    nn::GradCheckResult res;
    for (std::size_t i = 0; i < values.size(); i += std::max<std::size_t>(stride, 1)) {
      const Wide saved = values[i];
      values[i] = saved + eps;
      const Wide fp = loss();
      values[i] = saved - eps;
      const Wide fm = loss();
      values[i] = saved;
      const double numeric = static_cast<double>((fp - fm) / (2 * static_cast<Wide>(eps)));
      const double err = nn::relative_error(analytic[i], numeric);
      if (++res.checked == 1 || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_index = i;
        res.analytic = analytic[i];
        res.numeric = numeric;
      }
    }
    out.max_rel_error = std::max(out.max_rel_error, res.max_rel_error);
    out.params.push_back({name, res});
  }
  return out;
}

}  // namespace agcr::model
