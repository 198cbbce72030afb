#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "agcr/binary_io.hpp"
#include "agcr/error.hpp"
#include "agcr/model/trainer.hpp"
#include "agcr/pipeline.hpp"
#include "agcr/random.hpp"
#include "toy_data.hpp"

using namespace agcr;
using namespace agcr::model;

namespace {

const std::vector<std::string> kLabels{"a", "b", "c"};

ModelConfig tiny(std::string_view variant) {
  auto cfg = ModelConfig::for_variant(variant);
  cfg.labels = kLabels;
  auto& d = cfg.dims;
  d.N = 3;
  d.T = 8;
  d.D = 4;
  d.k1 = 4;
  d.k2 = 6;
  d.m = 4;
  d.M = 3;
  d.digit_dim = 5;
  d.fc_hidden = {8};
  return cfg;
}

// Row r holds q[r] equal blocks over its first `len` slots.
wordvec::DocTensor random_doc(const Dims& d, const std::vector<int>& q, Rng& rng, std::string id = "doc") {
  wordvec::DocTensor dt;
  dt.doc_id = std::move(id);
  dt.values = nn::Tensor<float>({d.N, d.T, d.D});
  dt.mask.assign(d.N * d.T, 0);
  dt.blocks.assign(d.N * d.T, 0);
  for (std::size_t r = 0; r < d.N && r < q.size(); ++r) {
    if (q[r] == 0) continue;
    const std::size_t len = d.T - 1;
    for (std::size_t t = 0; t < len; ++t) {
      dt.blocks[r * d.T + t] = 1 + static_cast<int>(t * static_cast<std::size_t>(q[r]) / len);
      dt.mask[r * d.T + t] = 1;
      for (std::size_t k = 0; k < d.D; ++k) dt.values.at(r, t, k) = static_cast<float>(rng.uniform(-1, 1));
    }
  }
  return dt;
}

std::vector<Example> tiny_dataset(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.doc = random_doc(cfg.dims, {1 + static_cast<int>(i % 2), 2, 0}, rng, "d" + std::to_string(i));
    ex.labels = {kLabels[i % 3]};
    out.push_back(std::move(ex));
  }
  return out;
}

taxonomy::LabelEmbedding tiny_label_embedding() {
  return taxonomy::LabelEmbedding(kLabels, 2, {1.f, 0.f, 0.8f, 0.6f, 0.f, 1.f});
}

}  // namespace

TEST(Variants, TableHasThirteenRows) {
  ASSERT_EQ(variants().size(), 13u);
  for (const auto& v : variants()) {
    EXPECT_TRUE(v.flags.cnn);
    EXPECT_EQ(variant_name(v.flags), v.name);
  }
  EXPECT_EQ(flag_diff(*variant_flags("HE-AGCRCNN"), *variant_flags("AGCRCNN")),
            (std::vector<std::string>{"weighted_margin_loss"}));
  EXPECT_EQ(flag_diff(*variant_flags("TGCNN"), *variant_flags("TGCNN(No-R)")), (std::vector<std::string>{"sorting"}));
  EXPECT_FALSE(variant_flags("nope").has_value());
}

TEST(Config, ValidationAndJsonRoundTrip) {
  auto cfg = tiny("HE-AGCRCNN");
  cfg.training.routing_gradient = nn::RoutingGradient::FinalIteration;
  cfg.training.p = 0.01;
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))), config_to_json(cfg));
  auto bad = cfg;
  bad.flags.capsule = false;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.custom = true;
  EXPECT_NO_THROW(bad.validate());
  bad.flags.cnn = false;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.dims.T = 4;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.labels.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.training.threshold = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Network, ShapeChainAtDefaultDims) {
  auto cfg = ModelConfig::for_variant("HE-AGCRCNN");
  cfg.labels = {"x", "y"};
  Network<float> net(cfg, 1);
  Rng rng(1);
  std::vector<int> q(100, 1);
  auto doc = random_doc(cfg.dims, q, rng);
  net.ensure_attention(doc.blocks);
  auto fw = net.forward(doc.values, doc.blocks);
  EXPECT_EQ(fw.conv1.shape(), (nn::Shape{100, 18, 64}));
  EXPECT_EQ(fw.h1.shape(), (nn::Shape{100, 18, 64}));
  EXPECT_EQ(fw.conv2.shape(), (nn::Shape{100, 16, 128}));
  EXPECT_EQ(fw.h2.shape(), (nn::Shape{100, 16, 128}));
  EXPECT_EQ(fw.u.shape(), (nn::Shape{100 * 64, 16}));
  EXPECT_EQ(fw.routing.v.shape(), (nn::Shape{2, 32}));
  EXPECT_EQ(fw.scores.size(), 2u);
}

TEST(Network, StrideTwoHalvesWidths) {
  auto cfg = tiny("AGCRCNN");
  cfg.dims.T = 12;
  cfg.dims.stride = 2;
  Network<float> net(cfg, 1);
  Rng rng(2);
  auto doc = random_doc(cfg.dims, {2, 1, 0}, rng);
  net.ensure_attention(doc.blocks);
  auto fw = net.forward(doc.values, doc.blocks);
  EXPECT_EQ(fw.conv1.dim(1), 5u);
  EXPECT_EQ(fw.conv2.dim(1), 2u);
}

TEST(Network, RowsAreIndependentBeforeTheHead) {
  for (const char* v : {"HE-AGCRCNN", "TGRCNN", "TGCNN"}) {
    auto cfg = tiny(v);
    Network<float> net(cfg, 3);
    Rng rng(3);
    auto doc = random_doc(cfg.dims, {2, 1, 2}, rng);
    net.ensure_attention(doc.blocks);
    auto base = net.forward(doc.values, doc.blocks);
    auto moved = doc.values;
    for (std::size_t t = 0; t < cfg.dims.T * cfg.dims.D; ++t) moved[2 * cfg.dims.T * cfg.dims.D + t] += 0.5f;
    auto fw = net.forward(moved, doc.blocks);
    const std::size_t row = fw.h2.size() / cfg.dims.N;
    for (std::size_t i = 0; i < 2 * row; ++i) ASSERT_EQ(fw.h2[i], base.h2[i]) << v;
    bool changed = false;
    for (std::size_t i = 2 * row; i < 3 * row; ++i) changed = changed || fw.h2[i] != base.h2[i];
    EXPECT_TRUE(changed) << v;
  }
}

TEST(Network, AllPadDocumentIsFinite) {
  for (const auto& v : variants()) {
    auto cfg = tiny(v.name);
    Network<float> net(cfg, 4);
    Rng rng(4);
    auto doc = random_doc(cfg.dims, {0, 0, 0}, rng);
    EXPECT_TRUE(net.ensure_attention(doc.blocks).empty());
    auto fw = net.forward(doc.values, doc.blocks);
    for (float s : fw.scores) EXPECT_TRUE(std::isfinite(s)) << v.name;
  }
}

TEST(Network, CapsuleLengthsBelowOne) {
  auto cfg = tiny("GCCNN");
  Network<float> net(cfg, 5);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    auto doc = random_doc(cfg.dims, {1, 2, 3}, rng);
    for (auto& x : doc.values.values()) x *= 10.f;
    for (float s : net.forward(doc.values, doc.blocks).scores) {
      EXPECT_GE(s, 0.f);
      EXPECT_LT(s, 1.f);
    }
  }
}

TEST(Network, AttentionScalarsAreLazilyOnes) {
  auto cfg = tiny("HE-AGCRCNN");
  Network<float> net(cfg, 6);
  Rng rng(6);
  auto doc = random_doc(cfg.dims, {2, 1, 0}, rng);
  EXPECT_THROW(net.forward(doc.values, doc.blocks), Error);
  auto added = net.ensure_attention(doc.blocks);
  EXPECT_EQ(added.size(), 4u);
  EXPECT_EQ(net.params().value(attention_name(1, 0, 2)).storage(), (std::vector<float>{1.f, 1.f}));
  EXPECT_TRUE(net.ensure_attention(doc.blocks).empty());
}

TEST(Network, UnweightedLossEqualsAlphaOne) {
  auto weighted_cfg = tiny("HE-AGCRCNN");
  weighted_cfg.training.p = 1.0;
  auto plain_cfg = tiny("AGCRCNN");
  Network<float> weighted(weighted_cfg, 7);
  Network<float> plain(plain_cfg, weighted.params());
  Rng rng(7);
  auto doc = random_doc(weighted_cfg.dims, {1, 2, 1}, rng);
  weighted.ensure_attention(doc.blocks);
  plain.ensure_attention(doc.blocks);
  plain.params() = weighted.params();
  auto fw1 = weighted.forward(doc.values, doc.blocks);
  auto fw2 = plain.forward(doc.values, doc.blocks);
  std::vector<float> targets{1, 0, 0}, ones{0, 1, 1}, random_alpha{0, 0.3f, 0.7f};
  EXPECT_EQ(weighted.objective(fw1, targets, ones).loss, plain.objective(fw2, targets, random_alpha).loss);
  auto lv = nn::margin_loss<float>(fw2.scores, targets, {}, nn::MarginLossConfig{});
  EXPECT_EQ(plain.objective(fw2, targets, {}).loss, lv.loss);
}

TEST(Network, BceForNonCapsuleModels) {
  auto cfg = tiny("TGCNN");
  Network<float> net(cfg, 8);
  for (auto& [name, p] : net.params()) {
    if (name.rfind("fc.", 0) == 0) p.value.zero();
  }
  Rng rng(8);
  auto doc = random_doc(cfg.dims, {1, 1, 1}, rng);
  auto fw = net.forward(doc.values, doc.blocks);
  for (float s : fw.scores) EXPECT_EQ(s, 0.5f);
  std::vector<float> t{1, 0, 0};
  auto obj = net.objective(fw, t, {});
  EXPECT_TRUE(obj.wrt_logits);
  EXPECT_NEAR(obj.loss, 3 * std::log(2.0), 1e-6);
}

TEST(Predict, ThresholdAndFallback) {
  EXPECT_EQ(predict<float>(std::vector<float>{0.95f, 0.2f, 0.91f}, 0.5), (std::set<std::size_t>{0, 2}));
  EXPECT_EQ(predict<float>(std::vector<float>{0.1f, 0.1f, 0.1f}, 0.5), (std::set<std::size_t>{0}));
  EXPECT_EQ(predict<float>(std::vector<float>{0.1f, 0.3f, 0.2f}, 0.5), (std::set<std::size_t>{1}));
  EXPECT_EQ(predict<float>(std::vector<float>{0.5f, 0.4f}, 0.5), (std::set<std::size_t>{0}));
}

TEST(Training, OverfitsOneDocument) {
  auto cfg = tiny("HE-AGCRCNN");
  cfg.training.epochs = 200;
  cfg.training.batch = 1;
  cfg.training.lr = 0.005;
  auto data = tiny_dataset(cfg, 1, 9);
  auto emb = tiny_label_embedding();
  auto res = train(data, cfg, {.label_embedding = &emb});
  ASSERT_EQ(res.history.size(), 200u);
  EXPECT_LT(res.history.back().loss, res.history.front().loss);
  EXPECT_EQ(res.history.back().micro_f1, 1.0);
  EXPECT_GT(res.checkpoint.config.training.p, 0.0);
}

TEST(Training, DeterministicCheckpointBytes) {
  auto cfg = tiny("TGRCNN");
  cfg.training.epochs = 3;
  cfg.training.batch = 2;
  auto data = tiny_dataset(cfg, 5, 10);
  auto a = serialize_checkpoint(train(data, cfg).checkpoint);
  auto b = serialize_checkpoint(train(data, cfg).checkpoint);
  EXPECT_EQ(a, b);
  cfg.training.seed = 2;
  EXPECT_NE(serialize_checkpoint(train(data, cfg).checkpoint), a);
}

TEST(Training, ThreadedRunReducesLoss) {
  auto cfg = tiny("AGCRCNN");
  cfg.training.epochs = 15;
  cfg.training.batch = 3;
  cfg.training.threads = 3;
  auto res = train(tiny_dataset(cfg, 9, 11), cfg);
  EXPECT_LT(res.history.back().loss, res.history.front().loss);
}

TEST(Training, Errors) {
  auto cfg = tiny("HE-AGCRCNN");
  auto data = tiny_dataset(cfg, 2, 12);
  EXPECT_THROW(train(data, cfg), ConfigError);
  EXPECT_THROW(train({}, tiny("TGCNN")), ConfigError);
  data[0].labels = {"unknown"};
  EXPECT_THROW(train(data, tiny("TGCNN")), Error);
}

TEST(Training, EpochCallbackAndJsonLine) {
  auto cfg = tiny("TGCNN");
  cfg.training.epochs = 2;
  std::vector<std::string> lines;
  train(tiny_dataset(cfg, 3, 13), cfg, {.on_epoch = [&](const EpochLog& l) { lines.push_back(epoch_log_json(l)); }});
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_NE(lines[1].find("\"epoch\":2"), std::string::npos);
  EXPECT_EQ(lines[0].find('\n'), std::string::npos);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  auto cfg = tiny("HE-AGCRCNN");
  cfg.training.epochs = 2;
  auto emb = tiny_label_embedding();
  auto ckpt = train(tiny_dataset(cfg, 4, 14), cfg, {.label_embedding = &emb}).checkpoint;
  EXPECT_FALSE(ckpt.moments.empty());
  auto bytes = serialize_checkpoint(ckpt);
  auto back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  for (const auto& [name, p] : ckpt.params) EXPECT_EQ(back.params.value(name).storage(), p.value.storage()) << name;
  EXPECT_EQ(back.optimizer_steps, ckpt.optimizer_steps);
  EXPECT_EQ(config_to_json(back.config), config_to_json(ckpt.config));

  auto path = std::filesystem::temp_directory_path() / "agcr_model_test.agcr";
  save_checkpoint(ckpt, path);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(path)), bytes);
  std::filesystem::remove(path);
}

TEST(Checkpoint, DistinctCorruptionErrors) {
  auto cfg = tiny("TGCNN");
  cfg.training.epochs = 1;
  auto bytes = serialize_checkpoint(train(tiny_dataset(cfg, 2, 15), cfg).checkpoint);
  auto bad = bytes;
  bad[1] = 'Z';
  EXPECT_THROW(deserialize_checkpoint(bad), io::BadMagicError);
  bad = bytes;
  bad[4] = static_cast<char>(kCheckpointVersion + 1);
  EXPECT_THROW(deserialize_checkpoint(bad), io::UnsupportedVersionError);
  EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 3)), io::TruncatedError);
  EXPECT_THROW(deserialize_checkpoint(std::string_view(bytes).substr(0, 10)), io::TruncatedError);
}

TEST(Export, AttentionCsvHasOneLinePerScalar) {
  auto cfg = tiny("HE-AGCRCNN");
  Network<float> net(cfg, 16);
  Rng rng(16);
  auto doc = random_doc(cfg.dims, {2, 1, 2}, rng, "docA");
  auto entries = collect_attention(net, doc);
  EXPECT_EQ(entries.size(), 10u);
  std::ostringstream out;
  write_attention_csv(out, entries);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "doc_id,row,layer,block,alpha");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(line.rfind("docA,", 0), 0u);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "1");
  }
  EXPECT_EQ(n, 10u);
  Network<float> plain(tiny("TGRCNN"), 16);
  EXPECT_THROW(collect_attention(plain, doc), ConfigError);
}

TEST(Export, LengthsCsvHasOneLinePerLabel) {
  auto cfg = tiny("GCCNN");
  Network<float> net(cfg, 17);
  Rng rng(17);
  std::vector<wordvec::DocTensor> docs{random_doc(cfg.dims, {1, 1, 0}, rng, "x"), random_doc(cfg.dims, {2, 0, 0}, rng, "y")};
  auto preds = predict_docs(net, docs, 0.5);
  std::ostringstream out;
  write_lengths_csv(out, preds, cfg.labels);
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 2 * kLabels.size());
  EXPECT_EQ(predict_docs(net, docs, 0.5, 2)[1].scores, preds[1].scores);
}

TEST(Evaluate, PerfectPredictionsScoreOne) {
  auto cfg = tiny("TGCNN");
  std::vector<DocPrediction> preds{{"x", {0.9f, 0.1f, 0.2f}, {0}}, {"y", {0.1f, 0.8f, 0.7f}, {1, 2}}};
  auto rep = evaluate(preds, {{"a"}, {"b", "c"}}, cfg, 0.5);
  EXPECT_EQ(rep.micro_f1, 1.0);
  EXPECT_EQ(rep.macro_f1, 1.0);
  auto json = metrics_json(rep);
  EXPECT_NE(json.find("\"per_label\""), std::string::npos);
  EXPECT_NE(json.find("\"threshold\""), std::string::npos);
  EXPECT_NE(metrics_table(rep).find("micro"), std::string::npos);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Sorting, UnsortedRowsKeepMembersOncePerLemma) {
  auto toy = agcr::testing::toy_corpus();
  corpus::Document d;
  d.id = "dense";
  d.text = "alpha beta gamma delta alpha beta epsilon gamma zeta";
  d.labels = {"econ"};
  auto sorted = pipeline::arrange_all({d}, agcr::testing::toy_prep(toy, true));
  auto unsorted = pipeline::arrange_all({d}, agcr::testing::toy_prep(toy, false));
  ASSERT_EQ(sorted[0].rows.size(), unsorted[0].rows.size());
  for (std::size_t r = 0; r < sorted[0].rows.size(); ++r) {
    std::set<std::string> a, b;
    std::size_t filled = 0;
    for (const auto& s : sorted[0].rows[r].slots)
      if (!s.is_pad()) a.insert(s.lemma);
    for (const auto& s : unsorted[0].rows[r].slots)
      if (!s.is_pad()) {
        b.insert(s.lemma);
        ++filled;
      }
    EXPECT_EQ(a, b);
    EXPECT_EQ(filled, b.size());
    EXPECT_LE(unsorted[0].rows[r].q, 1);
  }
}
