#include "agcr/model/ablation.hpp"

#include <chrono>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "agcr/error.hpp"

namespace agcr::model {

std::vector<AblationRow> run_ablation(const AblationInputs& in, const std::vector<std::string>& names,
                                      const std::function<void(const AblationRow&)>& on_row) {
  if (in.sorted == nullptr) throw ConfigError("ablation: no training examples");
  std::vector<std::string> todo = names;
  if (todo.empty()) {
    for (const auto& v : variants()) todo.emplace_back(v.name);
  }
  const Flags reference = *variant_flags("HE-AGCRCNN");
  std::vector<AblationRow> rows;
  for (const auto& name : todo) {
    auto cfg = ModelConfig::for_variant(name);
    cfg.dims = in.base.dims;
    cfg.training = in.base.training;
    cfg.labels = in.base.labels;
    const bool sorted = cfg.flags.sorting;
    const auto* data = sorted ? in.sorted : in.unsorted;
    if (data == nullptr) throw ConfigError("ablation: variant " + name + " needs unsorted examples");

    const auto started = std::chrono::steady_clock::now();
    TrainOptions opts;
    opts.label_embedding = in.label_embedding;
    auto res = train(*data, cfg, opts);
    auto net = network_from(res.checkpoint);
    std::vector<wordvec::DocTensor> docs;
    std::vector<std::set<std::string>> truth;
    for (const auto& ex : *data) {
      docs.push_back(ex.doc);
      truth.push_back(ex.labels);
    }
    const double threshold = cfg.training.threshold;
    auto report = evaluate(predict_docs(net, docs, threshold, cfg.training.threads), truth, cfg, threshold);

    AblationRow row;
    row.variant = name;
    row.flags = cfg.flags;
    row.diff = flag_diff(cfg.flags, reference);
    row.first_loss = res.history.front().loss;
    row.last_loss = res.history.back().loss;
    row.loss_reduction = row.first_loss > 0.0 ? 1.0 - row.last_loss / row.first_loss : 0.0;
    row.micro_f1 = report.micro_f1;
    row.macro_f1 = report.macro_f1;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    spdlog::info("{}: loss {:.4f} -> {:.4f}, micro-F1 {:.3f}", name, row.first_loss, row.last_loss, row.micro_f1);
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    out.push_back({{"variant", r.variant},
                   {"flags",
                    {{"cnn", r.flags.cnn},
                     {"sorting", r.flags.sorting},
                     {"lstm", r.flags.lstm},
                     {"attentional_lstm", r.flags.attentional_lstm},
                     {"capsule", r.flags.capsule},
                     {"weighted_margin_loss", r.flags.weighted_margin_loss}}},
                   {"diff_from_HE-AGCRCNN", r.diff},
                   {"first_loss", r.first_loss},
                   {"last_loss", r.last_loss},
                   {"loss_reduction", r.loss_reduction},
                   {"micro_f1", r.micro_f1},
                   {"macro_f1", r.macro_f1}});
  }
  return out.dump(2);
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  auto mark = [](bool b) { return b ? "x" : "-"; };
  out << fmt::format("{:<12} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4} {:>10} {:>10} {:>8} {:>8} {:>8}\n", "variant", "cnn",
                     "sort", "lstm", "attn", "caps", "he", "loss@1", "loss@end", "reduce", "micro", "macro");
  for (const auto& r : rows) {
    const auto& f = r.flags;
    out << fmt::format("{:<12} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4} {:>10.4f} {:>10.4f} {:>7.1f}% {:>8.3f} {:>8.3f}\n",
                       r.variant, mark(f.cnn), mark(f.sorting), mark(f.lstm), mark(f.attentional_lstm),
                       mark(f.capsule), mark(f.weighted_margin_loss), r.first_loss, r.last_loss,
                       100.0 * r.loss_reduction, r.micro_f1, r.macro_f1);
  }
  return out.str();
}

}  // namespace agcr::model
