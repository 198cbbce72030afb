#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "agcr/model/network.hpp"
#include "agcr/nn/capsule.hpp"
#include "agcr/nn/layers.hpp"
#include "agcr/random.hpp"
#include "agcr/skipgram.hpp"
#include "agcr/textgraph.hpp"

using namespace agcr;

namespace {

template <class T>
nn::Tensor<T> random_tensor(nn::Shape shape, Rng& rng) {
  nn::Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return t;
}

corpus::TokenStream random_stream(std::size_t tokens, std::size_t vocab, Rng& rng) {
  corpus::TokenStream s;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tokens; ++i) {
    pos += 1 + rng.below(2);
    auto w = "w" + std::to_string(rng.below(vocab));
    s.tokens.push_back({w, w, pos});
  }
  return s;
}

// N rows of T slots; each row holds two blocks.
std::vector<std::int32_t> two_block_rows(std::size_t N, std::size_t T) {
  std::vector<std::int32_t> blocks(N * T);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = (i % T) < T / 2 ? 1 : 2;
  return blocks;
}

void BM_ConvRow(benchmark::State& state) {
  Rng rng(1);
  const auto N = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor<float>({N, 20, 50}, rng);
  auto k = random_tensor<float>({64, 3, 50}, rng);
  auto b = random_tensor<float>({64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv_row(x, k, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(N));
}
BENCHMARK(BM_ConvRow)->Arg(16)->Arg(100);

void BM_AttnLstmRow(benchmark::State& state) {
  Rng rng(2);
  const std::size_t C = 64, H = 64, steps = 18;
  nn::LayerParams<float> p;
  nn::add_lstm_params(p, "l", C, H, rng);
  std::vector<float> x(steps * C), h(steps * H), alpha{1.0f, 0.8f};
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<int> blocks(steps, 1);
  for (std::size_t t = steps / 2; t < steps; ++t) blocks[t] = 2;
  const auto w = nn::lstm_weights(p, "l");
  for (auto _ : state) benchmark::DoNotOptimize(nn::attn_lstm_row<float>(x, blocks, alpha, w, h));
}
BENCHMARK(BM_AttnLstmRow);

void BM_DynamicRouting(benchmark::State& state) {
  Rng rng(3);
  const auto I = static_cast<std::size_t>(state.range(0));
  auto u_hat = random_tensor<float>({I, 8, 32}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::dynamic_routing(u_hat, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(I));
}
BENCHMARK(BM_DynamicRouting)->Arg(128)->Arg(1024);

void BM_GraphAndCloseness(benchmark::State& state) {
  Rng rng(4);
  const auto s = random_stream(static_cast<std::size_t>(state.range(0)), 300, rng);
  for (auto _ : state) {
    auto g = textgraph::build_graph(s, 3);
    benchmark::DoNotOptimize(textgraph::closeness_centrality(g));
  }
}
BENCHMARK(BM_GraphAndCloseness)->Arg(200)->Arg(1000);

void BM_ArrangeMatrix(benchmark::State& state) {
  Rng rng(5);
  const auto s = random_stream(1000, 300, rng);
  textgraph::GraphConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(textgraph::arrange_matrix(s, cfg));
}
BENCHMARK(BM_ArrangeMatrix);

void BM_Skipgram(benchmark::State& state) {
  Rng rng(6);
  std::vector<skipgram::Sequence> seqs(50);
  for (auto& seq : seqs)
    for (int i = 0; i < 200; ++i) seq.push_back("w" + std::to_string(rng.below(500)));
  skipgram::SkipgramConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(skipgram::train_skipgram(seqs, cfg));
  state.SetItemsProcessed(state.iterations() * 50 * 200);
}
BENCHMARK(BM_Skipgram);

// Forward + backward of one document through a named variant at reduced dims.
void BM_ModelStep(benchmark::State& state, const char* variant) {
  auto cfg = model::ModelConfig::for_variant(variant);
  cfg.labels = {"a", "b", "c", "d", "e", "f", "g", "h"};
  auto& d = cfg.dims;
  d.N = 16;
  d.T = 12;
  d.D = 16;
  d.k1 = 16;
  d.k2 = 32;
  d.m = 8;
  d.M = 8;
  d.digit_dim = 16;
  d.fc_hidden = {64};
  cfg.training.p = 0.3;
  model::Network<float> net(cfg, 1);
  Rng rng(7);
  auto x = random_tensor<float>({d.N, d.T, d.D}, rng);
  const auto blocks = two_block_rows(d.N, d.T);
  net.ensure_attention(blocks);
  std::vector<float> targets(8, 0.0f), alpha(8, 0.5f);
  targets[0] = 1.0f;
  alpha[0] = 0.0f;
  for (auto _ : state) {
    nn::Gradients<float> g(net.params());
    auto fw = net.forward(x, blocks);
    auto obj = net.objective(fw, targets, alpha);
    net.backward(fw, obj, g);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK_CAPTURE(BM_ModelStep, TGCNN, "TGCNN");
BENCHMARK_CAPTURE(BM_ModelStep, GCRCNN, "GCRCNN");
BENCHMARK_CAPTURE(BM_ModelStep, HE_AGCRCNN, "HE-AGCRCNN");

}  // namespace

BENCHMARK_MAIN();
