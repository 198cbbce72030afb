#include "agcr/metrics.hpp"

#include "agcr/error.hpp"

namespace agcr::metrics {

namespace {

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

LabelCounts pooled(std::span<const LabelCounts> counts) {
  LabelCounts total;
  for (const auto& c : counts) total += c;
  return total;
}

}  // namespace

double f1(const LabelCounts& c) {
  const double p = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  const double r = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  return harmonic(p, r);
}

double micro_precision(std::span<const LabelCounts> counts) {
  auto t = pooled(counts);
  return safe_div(static_cast<double>(t.tp), static_cast<double>(t.tp + t.fp));
}

double micro_recall(std::span<const LabelCounts> counts) {
  auto t = pooled(counts);
  return safe_div(static_cast<double>(t.tp), static_cast<double>(t.tp + t.fn));
}

double micro_f1(std::span<const LabelCounts> counts) { return harmonic(micro_precision(counts), micro_recall(counts)); }

double macro_f1(std::span<const LabelCounts> counts) {
  if (counts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : counts) sum += f1(c);
  return sum / static_cast<double>(counts.size());
}

std::vector<LabelCounts> count_predictions(std::span<const std::set<std::size_t>> predicted,
                                           std::span<const std::set<std::size_t>> truth, std::size_t num_labels) {
  if (predicted.size() != truth.size()) throw Error("count_predictions: predicted/truth size mismatch");
  std::vector<LabelCounts> counts(num_labels);
  for (std::size_t d = 0; d < predicted.size(); ++d) {
    for (auto k : predicted[d]) {
      if (k >= num_labels) throw Error("count_predictions: label index out of range");
      if (truth[d].contains(k)) {
        ++counts[k].tp;
      } else {
        ++counts[k].fp;
      }
    }
    for (auto k : truth[d]) {
      if (k >= num_labels) throw Error("count_predictions: label index out of range");
      if (!predicted[d].contains(k)) ++counts[k].fn;
    }
  }
  return counts;
}

}  // namespace agcr::metrics
