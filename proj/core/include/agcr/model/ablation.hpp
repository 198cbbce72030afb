#pragma once

#include <functional>
#include <string>
#include <vector>

#include "agcr/model/trainer.hpp"

namespace agcr::model {

struct AblationRow {
  std::string variant;
  Flags flags;
  std::vector<std::string> diff;  ///< flags that differ from HE-AGCRCNN
  double first_loss = 0.0;
  double last_loss = 0.0;
  double loss_reduction = 0.0;  ///< 1 - last / first
  double micro_f1 = 0.0;        ///< training set, after the final epoch
  double macro_f1 = 0.0;
  double seconds = 0.0;
};

struct AblationInputs {
  /// Examples prepared with sorted rows and, for the No-R variant, unsorted rows.
  const std::vector<Example>* sorted = nullptr;
  const std::vector<Example>* unsorted = nullptr;
  const taxonomy::LabelEmbedding* label_embedding = nullptr;
  /// Dims, training settings and labels shared by every variant.
  ModelConfig base;
};

/// Trains every variant in table order. `variants` empty means all 13.
std::vector<AblationRow> run_ablation(const AblationInputs& in, const std::vector<std::string>& variants = {},
                                      const std::function<void(const AblationRow&)>& on_row = {});

std::string ablation_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace agcr::model
