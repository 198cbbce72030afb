#include "agcr/model/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agcr/binary_io.hpp"
#include "agcr/corpus.hpp"

namespace agcr::model {

using nlohmann::json;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string epoch_log_json(const EpochLog& log) {
  json j = {{"epoch", log.epoch},
            {"loss", log.loss},
            {"micro_f1", log.micro_f1},
            {"macro_f1", log.macro_f1},
            {"seconds", log.seconds}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

void append_tensor(json& dir, io::ByteWriter& data, const std::string& name, const nn::Tensor<float>& t,
                   std::uint64_t& offset) {
  dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
  for (float v : t.values()) data.f32(v);
  offset += t.size() * sizeof(float);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json dir = json::array();
  io::ByteWriter data;
  std::uint64_t offset = 0;
  for (const auto& [name, p] : ckpt.params) append_tensor(dir, data, name, p.value, offset);
  for (const auto& [name, mo] : ckpt.moments) {
    append_tensor(dir, data, "adam.m:" + name, mo.m, offset);
    append_tensor(dir, data, "adam.v:" + name, mo.v, offset);
  }
  json meta;
  meta["config"] = json::parse(config_to_json(ckpt.config));
  meta["tensors"] = std::move(dir);
  meta["optimizer"] = {{"type", "adam"}, {"t", ckpt.optimizer_steps}};
  meta["epoch"] = ckpt.epoch;
  meta["seed"] = ckpt.seed;
  io::ByteWriter w;
  io::write_header(w, kCheckpointMagic, kCheckpointVersion, meta.dump());
  w.bytes(data.str());
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  const std::string meta_text = io::read_header(r, kCheckpointMagic, kCheckpointVersion);
  Checkpoint ckpt;
  json meta;
  try {
    meta = json::parse(meta_text);
    ckpt.config = config_from_json(meta.at("config").dump());
    ckpt.optimizer_steps = meta.at("optimizer").at("t").get<std::uint64_t>();
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(source + ": bad checkpoint metadata: " + e.what());
  }
  const std::size_t data_start = r.position();
  for (const auto& entry : meta.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<nn::Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    if (data_start + offset != r.position()) throw Error(source + ": tensor directory out of order at " + name);
    std::vector<float> values(nn::shape_size(shape));
    for (auto& v : values) v = r.f32();
    nn::Tensor<float> t(shape, std::move(values));
    constexpr std::string_view m_prefix = "adam.m:", v_prefix = "adam.v:";
    if (name.starts_with(m_prefix)) {
      ckpt.moments[name.substr(m_prefix.size())].m = std::move(t);
    } else if (name.starts_with(v_prefix)) {
      ckpt.moments[name.substr(v_prefix.size())].v = std::move(t);
    } else {
      ckpt.params.add(name, std::move(t));
    }
  }
  if (r.remaining() != 0) throw Error(source + ": trailing bytes after checkpoint tensors");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(corpus::read_file(path), path.string());
}

Network<float> network_from(const Checkpoint& ckpt) { return Network<float>(ckpt.config, ckpt.params.cast<float>()); }

// ---------------------------------------------------------------------------
// Training

std::vector<float> label_targets(const ModelConfig& cfg, const std::set<std::string>& labels) {
  std::vector<float> t(cfg.labels.size(), 0.0f);
  for (const auto& l : labels) {
    auto it = std::find(cfg.labels.begin(), cfg.labels.end(), l);
    if (it == cfg.labels.end()) throw ConfigError("label \"" + l + "\" is not in the model's label set");
    t[static_cast<std::size_t>(it - cfg.labels.begin())] = 1.0f;
  }
  return t;
}

std::vector<float> alpha_vector(const ModelConfig& cfg, const taxonomy::AlphaTable& table) {
  std::vector<float> a(cfg.labels.size(), 0.0f);
  for (std::size_t k = 0; k < cfg.labels.size(); ++k) {
    auto it = table.find(cfg.labels[k]);
    if (it != table.end()) a[k] = static_cast<float>(it->second);
  }
  return a;
}

namespace {

std::set<std::size_t> label_indices(const ModelConfig& cfg, const std::set<std::string>& labels) {
  std::set<std::size_t> out;
  for (const auto& l : labels) {
    auto it = std::find(cfg.labels.begin(), cfg.labels.end(), l);
    if (it != cfg.labels.end()) out.insert(static_cast<std::size_t>(it - cfg.labels.begin()));
  }
  return out;
}

struct DocResult {
  double loss = 0.0;
  std::set<std::size_t> predicted;
};

// Forward + backward of docs [begin, end) of `order` into g.
void run_chunk(const Network<float>& net, const std::vector<Example>& data, const std::vector<std::size_t>& order,
               std::size_t begin, std::size_t end, const std::vector<std::vector<float>>& targets,
               const std::vector<std::vector<float>>& alphas, float scale, double threshold,
               nn::Gradients<float>& g, std::vector<DocResult>& results) {
  for (std::size_t k = begin; k < end; ++k) {
    const auto idx = order[k];
    const auto& doc = data[idx].doc;
    auto fw = net.forward(doc.values, doc.blocks);
    auto obj = net.objective(fw, targets[idx], alphas.empty() ? std::span<const float>{} : alphas[idx]);
    net.backward(fw, obj, g, scale);
    results[k].loss = obj.loss;
    results[k].predicted = predict<float>(fw.scores, threshold);
  }
}

}  // namespace

TrainResult train(const std::vector<Example>& data, ModelConfig cfg, const TrainOptions& opts) {
  if (data.empty()) throw ConfigError("train: empty dataset");
  if (cfg.labels.empty()) throw ConfigError("train: model config has no labels");
  cfg.validate();
  const bool weighted = cfg.flags.weighted_margin_loss;
  if (weighted && opts.label_embedding == nullptr) {
    throw ConfigError("train: the weighted margin loss needs a label embedding");
  }

  std::vector<std::vector<float>> targets;
  std::vector<std::set<std::size_t>> truth;
  targets.reserve(data.size());
  for (const auto& ex : data) {
    targets.push_back(label_targets(cfg, ex.labels));
    truth.push_back(label_indices(cfg, ex.labels));
  }
  std::vector<std::vector<float>> alphas;
  if (weighted) {
    std::vector<taxonomy::AlphaTable> tables;
    tables.reserve(data.size());
    for (const auto& ex : data) tables.push_back(taxonomy::alpha_weights(*opts.label_embedding, ex.labels, cfg.labels));
    for (const auto& t : tables) alphas.push_back(alpha_vector(cfg, t));
    if (cfg.training.p == 0.0) {
      cfg.training.p = taxonomy::calibrate_p(tables);
      spdlog::info("calibrated adjustment factor p = {}", cfg.training.p);
    }
  }

  const auto& tc = cfg.training;
  Network<float> net(cfg, tc.seed);
  for (const auto& ex : data) net.ensure_attention(ex.doc.blocks);
  nn::Adam<float> adam(nn::AdamConfig{tc.lr});
  const std::size_t threads = std::max<std::size_t>(1, tc.threads);
  std::vector<nn::Gradients<float>> grads;
  for (std::size_t w = 0; w < threads; ++w) grads.emplace_back(net.params());

  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::vector<DocResult> doc_results(data.size());
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(tc.seed, epoch));
    shuffle_rng.shuffle(order);

    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch) {
      const std::size_t end = std::min(order.size(), begin + tc.batch);
      const float scale = 1.0f / static_cast<float>(end - begin);
      const std::size_t workers = std::min(threads, end - begin);
      for (std::size_t w = 0; w < workers; ++w) grads[w].zero();
      if (workers == 1) {
        run_chunk(net, data, order, begin, end, targets, alphas, scale, tc.threshold, grads[0], doc_results);
      } else {
        std::vector<std::thread> pool;
        const std::size_t n = end - begin;
        for (std::size_t w = 0; w < workers; ++w) {
          const std::size_t b = begin + n * w / workers, e = begin + n * (w + 1) / workers;
          pool.emplace_back([&, b, e, w] {
            run_chunk(net, data, order, b, e, targets, alphas, scale, tc.threshold, grads[w], doc_results);
          });
        }
        for (auto& t : pool) t.join();
      }
      net.params().zero_grad();
      for (std::size_t w = 0; w < workers; ++w) grads[w].accumulate_into(net.params());
      adam.step(net.params());
    }

    EpochLog log;
    log.epoch = epoch;
    std::vector<std::set<std::size_t>> predicted(data.size()), expected(data.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      log.loss += doc_results[k].loss;
      predicted[k] = doc_results[k].predicted;
      expected[k] = truth[order[k]];
    }
    log.loss /= static_cast<double>(data.size());
    const auto counts = metrics::count_predictions(predicted, expected, cfg.labels.size());
    log.micro_f1 = metrics::micro_f1(counts);
    log.macro_f1 = metrics::macro_f1(counts);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    spdlog::debug("epoch {} loss {:.6f} micro {:.4f} macro {:.4f}", epoch, log.loss, log.micro_f1, log.macro_f1);
    if (opts.on_epoch) opts.on_epoch(log);
    result.history.push_back(log);
  }

  auto& ckpt = result.checkpoint;
  ckpt.config = cfg;
  ckpt.params = net.params().cast<float>();
  ckpt.optimizer_steps = adam.steps();
  ckpt.moments = adam.moments();
  ckpt.epoch = tc.epochs;
  ckpt.seed = tc.seed;
  return result;
}

// ---------------------------------------------------------------------------
// Prediction and evaluation

DocPrediction predict_doc(Network<float>& net, const wordvec::DocTensor& doc, double threshold) {
  net.ensure_attention(doc.blocks);
  auto fw = net.forward(doc.values, doc.blocks);
  DocPrediction p;
  p.doc_id = doc.doc_id;
  p.scores = fw.scores;
  p.labels = predict<float>(fw.scores, threshold);
  return p;
}

std::vector<DocPrediction> predict_docs(Network<float>& net, const std::vector<wordvec::DocTensor>& docs,
                                        double threshold, std::size_t threads) {
  for (const auto& d : docs) net.ensure_attention(d.blocks);
  std::vector<DocPrediction> out(docs.size());
  const Network<float>& cnet = net;
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto fw = cnet.forward(docs[i].values, docs[i].blocks);
      out[i].doc_id = docs[i].doc_id;
      out[i].scores = fw.scores;
      out[i].labels = predict<float>(fw.scores, threshold);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, docs.size()));
  if (threads == 1) {
    work(0, docs.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back(work, docs.size() * w / threads, docs.size() * (w + 1) / threads);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

EvalReport evaluate(const std::vector<DocPrediction>& predictions, const std::vector<std::set<std::string>>& truth,
                    const ModelConfig& cfg, double threshold) {
  if (predictions.size() != truth.size()) throw Error("evaluate: prediction and truth counts differ");
  std::vector<std::set<std::size_t>> predicted, expected;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    predicted.push_back(predictions[i].labels);
    expected.push_back(label_indices(cfg, truth[i]));
  }
  EvalReport rep;
  rep.threshold = threshold;
  rep.labels = cfg.labels;
  rep.counts = metrics::count_predictions(predicted, expected, cfg.labels.size());
  rep.micro_f1 = metrics::micro_f1(rep.counts);
  rep.macro_f1 = metrics::macro_f1(rep.counts);
  return rep;
}

std::string metrics_json(const EvalReport& rep) {
  json per_label = json::array();
  for (std::size_t k = 0; k < rep.labels.size(); ++k) {
    const auto& c = rep.counts[k];
    per_label.push_back({{"label", rep.labels[k]}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"f1", metrics::f1(c)}});
  }
  json j = {{"micro_f1", rep.micro_f1}, {"macro_f1", rep.macro_f1}, {"per_label", per_label}, {"threshold", rep.threshold}};
  return j.dump(2);
}

std::string metrics_table(const EvalReport& rep) {
  std::size_t width = 5;
  for (const auto& l : rep.labels) width = std::max(width, l.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %6s %6s %6s %8s\n", static_cast<int>(width), "label", "tp", "fp", "fn", "f1");
  out += line;
  for (std::size_t k = 0; k < rep.labels.size(); ++k) {
    const auto& c = rep.counts[k];
    std::snprintf(line, sizeof line, "%-*s %6zu %6zu %6zu %8.4f\n", static_cast<int>(width), rep.labels[k].c_str(), c.tp,
                  c.fp, c.fn, metrics::f1(c));
    out += line;
  }
  std::snprintf(line, sizeof line, "micro_f1 %.4f  macro_f1 %.4f  threshold %.3f\n", rep.micro_f1, rep.macro_f1,
                rep.threshold);
  out += line;
  return out;
}

// ---------------------------------------------------------------------------
// Attention export

std::vector<AttentionEntry> collect_attention(Network<float>& net, const wordvec::DocTensor& doc) {
  if (!net.config().flags.attentional_lstm) throw ConfigError("attention export needs an attentional-LSTM model");
  net.ensure_attention(doc.blocks);
  const auto q = net.row_blocks(doc.blocks);
  std::vector<AttentionEntry> out;
  for (std::size_t r = 0; r < q.size(); ++r) {
    if (q[r] <= 0) continue;
    for (int layer : {1, 2}) {
      const auto& a = net.params().value(attention_name(layer, r, q[r]));
      for (int b = 1; b <= q[r]; ++b) out.push_back({doc.doc_id, r, layer, b, a[static_cast<std::size_t>(b - 1)]});
    }
  }
  return out;
}

void write_attention_csv(std::ostream& out, const std::vector<AttentionEntry>& entries) {
  out << "doc_id,row,layer,block,alpha\n";
  for (const auto& e : entries) {
    out << e.doc_id << ',' << e.row << ',' << e.layer << ',' << e.block << ',' << format_number(e.alpha) << '\n';
  }
}

void write_lengths_csv(std::ostream& out, const std::vector<DocPrediction>& preds, const std::vector<std::string>& labels) {
  out << "doc_id,label,length\n";
  for (const auto& p : preds) {
    for (std::size_t k = 0; k < p.scores.size(); ++k) {
      out << p.doc_id << ',' << labels.at(k) << ',' << format_number(p.scores[k]) << '\n';
    }
  }
}

}  // namespace agcr::model
