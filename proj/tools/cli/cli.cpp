#include "cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agcr/corpus.hpp"
#include "agcr/error.hpp"
#include "agcr/model/ablation.hpp"
#include "agcr/model/gradcheck.hpp"
#include "agcr/model/trainer.hpp"
#include "agcr/pipeline.hpp"
#include "agcr/skipgram.hpp"
#include "agcr/taxonomy.hpp"
#include "agcr/textgraph.hpp"
#include "agcr/wordvec.hpp"
#include "cli/manifest.hpp"

namespace agcr::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Global {
  std::uint64_t seed = 1;
  bool serial = false;
  std::size_t threads = 1;
  fs::path out_dir = "out";

  std::size_t workers() const { return serial ? 1 : std::max<std::size_t>(threads, 1); }
};

struct TextOpts {
  fs::path corpus, stopwords, lemmas;
  int window = 3;
  bool lowercase = false;

  void add(CLI::App* app, bool corpus_required = true) {
    auto* c = app->add_option("--corpus", corpus, "Corpus, JSON Lines {id, text, labels}");
    if (corpus_required) c->required();
    c->check(CLI::ExistingFile);
    app->add_option("--stopwords", stopwords, "Stopword file, one per line")->check(CLI::ExistingFile);
    app->add_option("--lemmas", lemmas, "Lemma map, surface<TAB>lemma per line")->check(CLI::ExistingFile);
    app->add_option("--window", window, "Document-graph co-occurrence window")->capture_default_str();
    app->add_flag("--lowercase", lowercase, "Lowercase tokens (ASCII)");
  }

  corpus::TextConfig load() const {
    corpus::TextConfig cfg;
    std::tie(cfg.stopwords, cfg.lemmas) = corpus::load_text_maps(stopwords, lemmas);
    cfg.lowercase = lowercase;
    cfg.window = window;
    cfg.validate();
    return cfg;
  }

  ojson json() const { return {{"window", window}, {"lowercase", lowercase}}; }
  void inputs(RunManifest& m) const {
    m.add_input(corpus);
    m.add_input(stopwords);
    m.add_input(lemmas);
  }
};

struct GraphOpts {
  textgraph::GraphConfig cfg;
  bool no_sort = false;

  void add(CLI::App* app) {
    app->add_option("--central-words", cfg.central_words, "N, central words (rows) per document")->capture_default_str();
    app->add_option("--max-subgraph", cfg.max_subgraph, "K, maximum subgraph size")->capture_default_str();
    app->add_option("--seq-len", cfg.seq_len, "T, slots per row")->capture_default_str();
    app->add_flag("--no-sort", no_sort, "Keep subgraph order instead of block order");
  }

  textgraph::GraphConfig resolve(int window, bool sort_override = true) const {
    auto g = cfg;
    g.window = window;
    g.sort = sort_override && !no_sort;
    g.validate();
    return g;
  }

  ojson json() const {
    return {{"central_words", cfg.central_words}, {"max_subgraph", cfg.max_subgraph}, {"seq_len", cfg.seq_len},
            {"sort", !no_sort}};
  }
};

struct SkipgramOpts {
  skipgram::SkipgramConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--dim", cfg.dim, "Embedding size")->capture_default_str();
    app->add_option("--sg-window", cfg.window, "Skip-gram context window")->capture_default_str();
    app->add_option("--negatives", cfg.negatives, "Negative samples per pair")->capture_default_str();
    app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", cfg.learning_rate, "Initial learning rate")->capture_default_str();
    app->add_option("--min-count", cfg.min_count, "Minimum token count")->capture_default_str();
  }

  ojson json() const {
    return {{"dim", cfg.dim},       {"window", cfg.window}, {"negatives", cfg.negatives},
            {"epochs", cfg.epochs}, {"lr", cfg.learning_rate}, {"min_count", cfg.min_count}};
  }
};

struct ModelOpts {
  std::string variant = "HE-AGCRCNN";
  fs::path config;
  std::optional<std::size_t> k1, k2, m, M, digit_dim, stride, primary_kernel, batch, epochs, routing_iters;
  std::optional<std::vector<std::size_t>> fc_hidden;
  std::optional<double> lr, threshold, p_override;

  void add(CLI::App* app, bool choose_variant = true) {
    if (choose_variant) {
      app->add_option("--variant", variant, "Named model variant")->capture_default_str();
      app->add_option("--config", config, "Model config JSON (overrides --variant)")->check(CLI::ExistingFile);
    }
    app->add_option("--k1", k1, "Layer-1 kernels");
    app->add_option("--k2", k2, "Layer-2 kernels");
    app->add_option("--m", m, "Primary capsule size");
    app->add_option("--M", M, "Primary capsule channels");
    app->add_option("--digit-dim", digit_dim, "Label capsule size");
    app->add_option("--stride", stride, "Convolution stride");
    app->add_option("--primary-kernel", primary_kernel, "Primary capsule kernel width (0 = full row)");
    app->add_option("--fc-hidden", fc_hidden, "Hidden layer sizes of the FC head");
    app->add_option("--batch", batch, "Mini-batch size");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--routing-iters", routing_iters, "Dynamic routing iterations");
    app->add_option("--threshold", threshold, "Prediction threshold");
    app->add_option("--p-override", p_override, "Adjustment factor p (default: calibrated)");
  }

  model::ModelConfig resolve(std::size_t N, std::size_t T, std::size_t D, std::vector<std::string> labels,
                             const Global& g) const {
    auto cfg = config.empty() ? model::ModelConfig::for_variant(variant)
                              : model::config_from_json(corpus::read_file(config));
    auto& d = cfg.dims;
    d.N = N;
    d.T = T;
    d.D = D;
    d.L = 0;
    if (k1) d.k1 = *k1;
    if (k2) d.k2 = *k2;
    if (m) d.m = *m;
    if (M) d.M = *M;
    if (digit_dim) d.digit_dim = *digit_dim;
    if (stride) d.stride = *stride;
    if (primary_kernel) d.primary_kernel = *primary_kernel;
    if (fc_hidden) d.fc_hidden = *fc_hidden;
    auto& t = cfg.training;
    if (batch) t.batch = *batch;
    if (epochs) t.epochs = *epochs;
    if (lr) t.lr = *lr;
    if (routing_iters) t.routing_iters = *routing_iters;
    if (threshold) t.threshold = *threshold;
    if (p_override) t.p = *p_override;
    t.seed = g.seed;
    t.threads = g.workers();
    cfg.labels = std::move(labels);
    cfg.validate();
    return cfg;
  }
};

// ------------------------------------------------------------------ helpers

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + path.string());
}

RunManifest start_manifest(const std::string& command, const std::vector<std::string>& args, const Global& g) {
  RunManifest m;
  m.command = command;
  m.args = args;
  m.seeds["seed"] = g.seed;
  m.threads = g.workers();
  return m;
}

void finish_manifest(const RunManifest& m, const Global& g, std::ostream& out) {
  const auto path = write_manifest(m, g.out_dir);
  out << fmt::format("wrote {}\n", path.string());
}

struct Dataset {
  std::vector<model::Example> examples;
  std::vector<std::string> labels;
  std::vector<fs::path> files;
};

Dataset load_dataset(const fs::path& dir) {
  const auto index_path = dir / "dataset.json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(corpus::read_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(index_path.string(), 0, e.what());
  }
  Dataset ds;
  ds.files.push_back(index_path);
  ds.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& d : j.at("docs")) {
    const auto path = dir / d.at("tensor").get<std::string>();
    model::Example ex;
    ex.doc = wordvec::load_tensor(path);
    const auto labels = d.at("labels").get<std::vector<std::string>>();
    ex.labels = {labels.begin(), labels.end()};
    ds.examples.push_back(std::move(ex));
    ds.files.push_back(path);
  }
  if (ds.examples.empty()) throw Error(index_path.string() + ": no documents");
  return ds;
}

std::vector<wordvec::DocTensor> docs_of(const std::vector<model::Example>& ex) {
  std::vector<wordvec::DocTensor> out;
  for (const auto& e : ex) out.push_back(e.doc);
  return out;
}

std::vector<std::set<std::string>> truth_of(const std::vector<model::Example>& ex) {
  std::vector<std::set<std::string>> out;
  for (const auto& e : ex) out.push_back(e.labels);
  return out;
}

void add_dataset_inputs(RunManifest& m, const Dataset& ds) {
  for (const auto& f : ds.files) m.add_input(f);
}

// ------------------------------------------------------------------ commands

int cmd_prep(const Global& g, const TextOpts& text, const GraphOpts& graph, const fs::path& embeddings,
             const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("prep", args, g);
  const auto docs = corpus::load_corpus(text.corpus);
  pipeline::PrepConfig prep;
  prep.text = text.load();
  prep.graph = graph.resolve(text.window);
  prep.threads = g.workers();
  const auto matrices = pipeline::arrange_all(docs, prep);
  fs::create_directories(g.out_dir);

  std::string jsonl;
  for (const auto& mat : matrices) jsonl += textgraph::to_json(mat) + "\n";
  const auto matrices_path = g.out_dir / "matrices.jsonl";
  write_text(matrices_path, jsonl);
  m.config = {{"text", text.json()}, {"graph", graph.json()}};
  text.inputs(m);
  m.add_output(matrices_path);

  if (!embeddings.empty()) {
    m.add_input(embeddings);
    const auto emb = skipgram::load_embeddings(embeddings);
    const auto tensors = pipeline::assemble_all(matrices, emb, g.workers());
    ojson index;
    index["labels"] = pipeline::collect_labels(docs);
    index["N"] = prep.graph.central_words;
    index["T"] = prep.graph.seq_len;
    index["D"] = emb.dim();
    index["sorted"] = prep.graph.sort;
    index["docs"] = ojson::array();
    std::size_t oov = 0;
    fs::create_directories(g.out_dir / "tensors");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto rel = fmt::format("tensors/{:06d}.agtx", i);
      wordvec::save_tensor(tensors[i], g.out_dir / rel);
      m.add_output(g.out_dir / rel);
      oov += tensors[i].oov;
      index["docs"].push_back({{"id", docs[i].id},
                               {"labels", std::vector<std::string>(docs[i].labels.begin(), docs[i].labels.end())},
                               {"tensor", rel}});
    }
    const auto index_path = g.out_dir / "dataset.json";
    write_text(index_path, index.dump(2) + "\n");
    m.add_output(index_path);
    if (oov) spdlog::warn("{} out-of-vocabulary slots mapped to zero vectors", oov);
  }
  out << fmt::format("prepared {} documents\n", docs.size());
  finish_manifest(m, g, out);
  return 0;
}

int cmd_embed_words(const Global& g, const TextOpts& text, SkipgramOpts sg, const fs::path& load,
                    const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("embed-words", args, g);
  skipgram::EmbeddingTable emb;
  if (!load.empty()) {
    m.add_input(load);
    emb = skipgram::load_embeddings(load);
    m.config = {{"load", load.string()}};
  } else {
    if (text.corpus.empty()) throw ConfigError("embed-words needs --corpus or --load");
    const auto docs = corpus::load_corpus(text.corpus);
    const auto streams = pipeline::tokenize_all(docs, text.load(), g.workers());
    sg.cfg.seed = g.seed;
    sg.cfg.threads = g.workers();
    emb = skipgram::train_skipgram(pipeline::lemma_sequences(streams), sg.cfg);
    text.inputs(m);
    m.config = {{"text", text.json()}, {"skipgram", sg.json()}};
  }
  fs::create_directories(g.out_dir);
  const auto path = g.out_dir / "words.vec";
  skipgram::save_embeddings(emb, path);
  m.add_output(path);
  out << fmt::format("{} tokens, dim {}\n", emb.size(), emb.dim());
  if (!emb.epoch_loss.empty()) out << fmt::format("final monitor loss {:.6f}\n", emb.epoch_loss.back());
  finish_manifest(m, g, out);
  return 0;
}

int cmd_embed_labels(const Global& g, const fs::path& taxonomy_path, std::size_t walks_per_node, std::size_t steps,
                     std::optional<std::size_t> label_dim, std::optional<std::size_t> epochs,
                     const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("embed-labels", args, g);
  const auto tax = taxonomy::load_taxonomy(taxonomy_path);
  taxonomy::WalkConfig wc;
  wc.walks_per_node = walks_per_node;
  wc.steps = steps;
  wc.seed = g.seed;
  wc.threads = g.workers();
  auto sg = taxonomy::default_label_skipgram();
  if (label_dim) sg.dim = *label_dim;
  if (epochs) sg.epochs = *epochs;
  sg.seed = g.seed;
  sg.threads = g.workers();
  const auto emb = taxonomy::embed_labels(tax, wc, sg);

  std::vector<double> thresholds;
  for (int i = -20; i <= 20; ++i) thresholds.push_back(i * 0.05);
  const auto points = taxonomy::reconstruct_eval(emb, tax, thresholds);
  const auto best = *std::max_element(points.begin(), points.end(),
                                      [](const auto& a, const auto& b) { return a.micro_f1 < b.micro_f1; });
  const double baseline = taxonomy::random_edge_baseline_f1(tax);
  ojson report;
  report["labels"] = tax.size();
  report["edges"] = tax.edges().size();
  report["baseline_micro_f1"] = baseline;
  report["best"] = {{"threshold", best.threshold}, {"micro_f1", best.micro_f1}, {"macro_f1", best.macro_f1}};
  report["points"] = ojson::array();
  for (const auto& p : points) {
    report["points"].push_back({{"threshold", p.threshold},
                                {"micro_f1", p.micro_f1},
                                {"macro_f1", p.macro_f1},
                                {"precision", p.precision},
                                {"recall", p.recall},
                                {"predicted_edges", p.predicted_edges}});
  }
  fs::create_directories(g.out_dir);
  const auto vec_path = g.out_dir / "labels.vec";
  const auto report_path = g.out_dir / "reconstruction.json";
  skipgram::save_embeddings(emb, vec_path);
  write_text(report_path, report.dump(2) + "\n");
  m.add_input(taxonomy_path);
  m.config = {{"walks_per_node", walks_per_node}, {"walk_steps", steps}, {"label_dim", sg.dim}, {"epochs", sg.epochs}};
  m.add_output(vec_path);
  m.add_output(report_path);
  out << fmt::format("{} labels; reconstruction micro-F1 {:.4f} at threshold {:.2f} (random baseline {:.4f})\n",
                     tax.size(), best.micro_f1, best.threshold, baseline);
  finish_manifest(m, g, out);
  return 0;
}

int cmd_train(const Global& g, const fs::path& data, const fs::path& label_embedding, const ModelOpts& mo,
              const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("train", args, g);
  const auto ds = load_dataset(data);
  const auto& doc0 = ds.examples.front().doc;
  auto cfg = mo.resolve(doc0.rows(), doc0.seq_len(), doc0.dim(), ds.labels, g);
  std::optional<taxonomy::LabelEmbedding> emb;
  if (!label_embedding.empty()) {
    emb = skipgram::load_embeddings(label_embedding);
    m.add_input(label_embedding);
  }
  fs::create_directories(g.out_dir);
  const auto log_path = g.out_dir / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::binary);
  model::TrainOptions opts;
  opts.label_embedding = emb ? &*emb : nullptr;
  opts.on_epoch = [&](const model::EpochLog& e) {
    log << model::epoch_log_json(e) << "\n";
    log.flush();
    spdlog::info("epoch {} loss {:.6f} micro-F1 {:.4f} macro-F1 {:.4f}", e.epoch, e.loss, e.micro_f1, e.macro_f1);
  };
  const auto res = model::train(ds.examples, cfg, opts);
  log.close();
  const auto ckpt_path = g.out_dir / "checkpoint.agcr";
  model::save_checkpoint(res.checkpoint, ckpt_path);
  add_dataset_inputs(m, ds);
  m.config = nlohmann::ordered_json::parse(model::config_to_json(res.checkpoint.config));
  m.add_output(ckpt_path);
  m.add_output(log_path, false);
  const auto& last = res.history.back();
  out << fmt::format("trained {} ({} epochs): loss {:.6f}, training micro-F1 {:.4f}\n", cfg.variant, last.epoch,
                     last.loss, last.micro_f1);
  finish_manifest(m, g, out);
  return 0;
}

struct Scored {
  Dataset ds;
  model::Checkpoint ckpt;
  model::Network<float> net;
  double threshold;
  std::vector<model::DocPrediction> preds;
};

Scored score(const Global& g, const fs::path& data, const fs::path& checkpoint, std::optional<double> threshold) {
  auto ds = load_dataset(data);
  auto ckpt = model::load_checkpoint(checkpoint);
  auto net = model::network_from(ckpt);
  const double thr = threshold.value_or(ckpt.config.training.threshold);
  auto preds = model::predict_docs(net, docs_of(ds.examples), thr, g.workers());
  return {std::move(ds), std::move(ckpt), std::move(net), thr, std::move(preds)};
}

int cmd_eval(const Global& g, const fs::path& data, const fs::path& checkpoint, std::optional<double> threshold,
             const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("eval", args, g);
  const auto s = score(g, data, checkpoint, threshold);
  const auto rep = model::evaluate(s.preds, truth_of(s.ds.examples), s.ckpt.config, s.threshold);
  fs::create_directories(g.out_dir);
  const auto path = g.out_dir / "metrics.json";
  write_text(path, model::metrics_json(rep) + "\n");
  add_dataset_inputs(m, s.ds);
  m.add_input(checkpoint);
  m.config = {{"threshold", s.threshold}};
  m.add_output(path);
  out << model::metrics_table(rep);
  finish_manifest(m, g, out);
  return 0;
}

int cmd_predict(const Global& g, const fs::path& data, const fs::path& checkpoint, std::optional<double> threshold,
                const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("predict", args, g);
  const auto s = score(g, data, checkpoint, threshold);
  const auto& labels = s.ckpt.config.labels;
  std::string jsonl;
  for (const auto& p : s.preds) {
    ojson j;
    j["doc_id"] = p.doc_id;
    j["labels"] = ojson::array();
    for (auto k : p.labels) j["labels"].push_back(labels[k]);
    j["scores"] = ojson::object();
    for (std::size_t k = 0; k < labels.size(); ++k) j["scores"][labels[k]] = static_cast<double>(p.scores[k]);
    jsonl += j.dump() + "\n";
  }
  fs::create_directories(g.out_dir);
  const auto pred_path = g.out_dir / "predictions.jsonl";
  const auto len_path = g.out_dir / "lengths.csv";
  write_text(pred_path, jsonl);
  std::ostringstream csv;
  model::write_lengths_csv(csv, s.preds, labels);
  write_text(len_path, csv.str());
  add_dataset_inputs(m, s.ds);
  m.add_input(checkpoint);
  m.config = {{"threshold", s.threshold}};
  m.add_output(pred_path);
  m.add_output(len_path);
  out << fmt::format("{} predictions\n", s.preds.size());
  finish_manifest(m, g, out);
  return 0;
}

int cmd_attn_dump(const Global& g, const fs::path& data, const fs::path& checkpoint,
                  const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("attn-dump", args, g);
  auto s = score(g, data, checkpoint, std::nullopt);
  std::vector<model::AttentionEntry> entries;
  for (const auto& ex : s.ds.examples) {
    auto e = model::collect_attention(s.net, ex.doc);
    entries.insert(entries.end(), e.begin(), e.end());
  }
  std::ostringstream attn, lengths;
  model::write_attention_csv(attn, entries);
  model::write_lengths_csv(lengths, s.preds, s.ckpt.config.labels);
  fs::create_directories(g.out_dir);
  const auto attn_path = g.out_dir / "attention.csv";
  const auto len_path = g.out_dir / "lengths.csv";
  write_text(attn_path, attn.str());
  write_text(len_path, lengths.str());
  add_dataset_inputs(m, s.ds);
  m.add_input(checkpoint);
  m.add_output(attn_path);
  m.add_output(len_path);
  out << fmt::format("{} attention rows\n", entries.size());
  finish_manifest(m, g, out);
  return 0;
}

int cmd_ablate(const Global& g, const TextOpts& text, const GraphOpts& graph, const fs::path& embeddings,
               const fs::path& label_embedding, const ModelOpts& mo, const std::vector<std::string>& variants,
               const std::vector<std::string>& args, std::ostream& out) {
  auto m = start_manifest("ablate", args, g);
  const auto docs = corpus::load_corpus(text.corpus);
  const auto emb = skipgram::load_embeddings(embeddings);
  const auto label_emb = skipgram::load_embeddings(label_embedding);
  pipeline::PrepConfig prep;
  prep.text = text.load();
  prep.threads = g.workers();
  prep.graph = graph.resolve(text.window, true);
  auto sorted = pipeline::make_examples(docs, pipeline::assemble_all(pipeline::arrange_all(docs, prep), emb, g.workers()));
  prep.graph.sort = false;
  auto unsorted =
      pipeline::make_examples(docs, pipeline::assemble_all(pipeline::arrange_all(docs, prep), emb, g.workers()));

  model::AblationInputs in;
  in.sorted = &sorted;
  in.unsorted = &unsorted;
  in.label_embedding = &label_emb;
  in.base = mo.resolve(prep.graph.central_words, prep.graph.seq_len, emb.dim(), pipeline::collect_labels(docs), g);
  const auto rows = model::run_ablation(in, variants);

  fs::create_directories(g.out_dir);
  const auto json_path = g.out_dir / "ablation.json";
  const auto table_path = g.out_dir / "ablation.txt";
  const auto table = model::ablation_table(rows);
  write_text(json_path, model::ablation_json(rows) + "\n");
  write_text(table_path, table);
  text.inputs(m);
  m.add_input(embeddings);
  m.add_input(label_embedding);
  m.config = {{"text", text.json()},
              {"graph", graph.json()},
              {"base", nlohmann::ordered_json::parse(model::config_to_json(in.base))}};
  m.add_output(json_path);
  m.add_output(table_path);
  out << table;
  finish_manifest(m, g, out);
  return 0;
}

struct GradcheckOpts {
  std::vector<std::string> variants;
  std::size_t N = 2, T = 8, D = 4, labels = 3, k1 = 3, k2 = 4, m = 3, M = 2, digit_dim = 4;
  std::vector<std::size_t> fc_hidden{5};
  double eps = 1e-5, tolerance = 1e-4;
  std::size_t stride = 1;
};

int cmd_gradcheck(const Global& g, const GradcheckOpts& o, std::ostream& out) {
  std::vector<std::string> names = o.variants;
  if (names.empty())
    for (const auto& v : model::variants()) names.emplace_back(v.name);
  bool ok = true;
  double overall = 0.0;
  for (const auto& name : names) {
    auto cfg = model::ModelConfig::for_variant(name);
    auto& d = cfg.dims;
    d.N = o.N;
    d.T = o.T;
    d.D = o.D;
    d.k1 = o.k1;
    d.k2 = o.k2;
    d.m = o.m;
    d.M = o.M;
    d.digit_dim = o.digit_dim;
    d.fc_hidden = o.fc_hidden;
    cfg.labels.clear();
    for (std::size_t k = 0; k < o.labels; ++k) cfg.labels.push_back(fmt::format("label{}", k));
    const auto res = model::check_model_gradients(cfg, g.seed, o.eps, o.stride);
    std::string worst = "-";
    for (const auto& p : res.params)
      if (p.result.max_rel_error == res.max_rel_error) worst = p.name;
    const bool pass = res.max_rel_error < o.tolerance;
    ok = ok && pass;
    overall = std::max(overall, res.max_rel_error);
    out << fmt::format("{:<14} {:>3} tensors  max rel error {:.3e}  worst {:<16} {}\n", name, res.params.size(),
                       res.max_rel_error, worst, pass ? "ok" : "FAIL");
  }
  out << fmt::format("max rel error {:.3e} (tolerance {:.0e}): {}\n", overall, o.tolerance, ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"agcr: graph-of-words capsule network for hierarchical multi-label text classification", "agcr"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  Global g;
  app.add_option("--seed", g.seed, "Seed for every stochastic step")->capture_default_str();
  app.add_flag("--serial", g.serial, "Force single-threaded, bit-reproducible execution");
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for artifacts and manifests")->capture_default_str();

  TextOpts text;
  GraphOpts graph;
  SkipgramOpts sg;
  ModelOpts model_opts;
  fs::path embeddings, label_embedding, data, checkpoint, load, taxonomy_path;
  std::optional<double> threshold;
  std::size_t walks_per_node = 10, walk_steps = 500;
  std::optional<std::size_t> label_dim, label_epochs;
  std::vector<std::string> variants;
  GradcheckOpts gc;

  auto* prep = app.add_subcommand("prep", "Corpus to arranged matrices and, with --embeddings, input tensors");
  text.add(prep);
  graph.add(prep);
  prep->add_option("--embeddings", embeddings, "Word embedding file; writes tensors and dataset.json")
      ->check(CLI::ExistingFile);

  auto* embed_words = app.add_subcommand("embed-words", "Train skip-gram word vectors on a corpus, or load them");
  text.add(embed_words, false);
  sg.add(embed_words);
  embed_words->add_option("--load", load, "Existing embedding file to validate and copy")->check(CLI::ExistingFile);

  auto* embed_labels = app.add_subcommand("embed-labels", "Taxonomy to label vectors plus reconstruction report");
  embed_labels->add_option("--taxonomy", taxonomy_path, "Taxonomy TSV, parent<TAB>child")
      ->required()
      ->check(CLI::ExistingFile);
  embed_labels->add_option("--walks-per-node", walks_per_node, "Walks started at every label")->capture_default_str();
  embed_labels->add_option("--walk-steps", walk_steps, "Steps per walk")->capture_default_str();
  embed_labels->add_option("--label-dim", label_dim, "Label vector size (default 200)");
  embed_labels->add_option("--epochs", label_epochs, "Skip-gram epochs over the walks");

  auto* train = app.add_subcommand("train", "Train a model on a prepared dataset");
  train->add_option("--data", data, "Directory written by prep")->required()->check(CLI::ExistingDirectory);
  train->add_option("--label-embedding", label_embedding, "Label vectors (needed by HE variants)")
      ->check(CLI::ExistingFile);
  model_opts.add(train);

  auto* eval = app.add_subcommand("eval", "Checkpoint + dataset to metrics JSON");
  auto* predict = app.add_subcommand("predict", "Checkpoint + dataset to predictions and capsule lengths");
  auto* attn = app.add_subcommand("attn-dump", "Export attention scalars and capsule lengths as CSV");
  for (auto* sub : {eval, predict, attn}) {
    sub->add_option("--data", data, "Directory written by prep")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  }
  for (auto* sub : {eval, predict}) sub->add_option("--threshold", threshold, "Prediction threshold");

  auto* ablate = app.add_subcommand("ablate", "Train every named variant on one corpus and compare");
  text.add(ablate);
  graph.add(ablate);
  ablate->add_option("--embeddings", embeddings, "Word embedding file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--label-embedding", label_embedding, "Label vectors")->required()->check(CLI::ExistingFile);
  ablate->add_option("--variants", variants, "Subset of variants (default: all)");
  model_opts.add(ablate, false);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model at tiny dims");
  gradcheck->add_option("--variant", gc.variants, "Variants to check (default: all)");
  gradcheck->add_option("--N", gc.N)->capture_default_str();
  gradcheck->add_option("--T", gc.T)->capture_default_str();
  gradcheck->add_option("--D", gc.D)->capture_default_str();
  gradcheck->add_option("--labels", gc.labels)->capture_default_str();
  gradcheck->add_option("--k1", gc.k1)->capture_default_str();
  gradcheck->add_option("--k2", gc.k2)->capture_default_str();
  gradcheck->add_option("--m", gc.m)->capture_default_str();
  gradcheck->add_option("--M", gc.M)->capture_default_str();
  gradcheck->add_option("--digit-dim", gc.digit_dim)->capture_default_str();
  gradcheck->add_option("--fc-hidden", gc.fc_hidden)->capture_default_str();
  gradcheck->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--sample-stride", gc.stride, "Check every n-th entry")->capture_default_str();

  std::vector<const char*> argv{"agcr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& v : variants)
      if (!model::variant_flags(v)) throw ConfigError("unknown variant " + v);
    if (prep->parsed()) return cmd_prep(g, text, graph, embeddings, args, out);
    if (embed_words->parsed()) return cmd_embed_words(g, text, sg, load, args, out);
    if (embed_labels->parsed())
      return cmd_embed_labels(g, taxonomy_path, walks_per_node, walk_steps, label_dim, label_epochs, args, out);
    if (train->parsed()) return cmd_train(g, data, label_embedding, model_opts, args, out);
    if (eval->parsed()) return cmd_eval(g, data, checkpoint, threshold, args, out);
    if (predict->parsed()) return cmd_predict(g, data, checkpoint, threshold, args, out);
    if (attn->parsed()) return cmd_attn_dump(g, data, checkpoint, args, out);
    if (ablate->parsed())
      return cmd_ablate(g, text, graph, embeddings, label_embedding, model_opts, variants, args, out);
    if (gradcheck->parsed()) return cmd_gradcheck(g, gc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace agcr::cli
