#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agcr/model/config.hpp"
#include "agcr/nn/gradcheck.hpp"

namespace agcr::model {

struct ParamCheck {
  std::string name;
  nn::GradCheckResult result;
};

struct ModelGradCheck {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
};

/// Finite-difference check of the full per-document loss against the
/// analytic gradient of every parameter tensor (attention scalars included),
/// in double precision on a random document. `stride` > 1 samples entries.
ModelGradCheck check_model_gradients(const ModelConfig& cfg, std::uint64_t seed, double eps = 1e-5,
                                     std::size_t stride = 1);

}  // namespace agcr::model
