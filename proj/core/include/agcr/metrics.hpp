#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

namespace agcr::metrics {

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  LabelCounts& operator+=(const LabelCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

/// Per-label F1; 0 when precision + recall is 0 (including 0/0 cases).
double f1(const LabelCounts& c);

/// F1 of the label-pooled precision and recall.
double micro_f1(std::span<const LabelCounts> counts);
double micro_precision(std::span<const LabelCounts> counts);
double micro_recall(std::span<const LabelCounts> counts);

/// Unweighted mean of per-label F1.
double macro_f1(std::span<const LabelCounts> counts);

/// Tally predicted vs. true label-index sets for `num_labels` labels.
std::vector<LabelCounts> count_predictions(std::span<const std::set<std::size_t>> predicted,
                                           std::span<const std::set<std::size_t>> truth, std::size_t num_labels);

}  // namespace agcr::metrics
