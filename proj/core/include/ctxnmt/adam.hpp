#pragma once

#include <cstdint>
#include <vector>

#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

/// Adam with global-norm gradient clipping. Moment buffers are kept in
/// parameter-list order, so every adam_step call must pass the same tensors
/// in the same order; they are sized lazily on the first step.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_threshold = 1.0;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments
  std::vector<std::vector<double>> v;  // second moments
};

/// L2 norm over all grad buffers jointly. Parameters must carry gradients.
double global_grad_norm(const std::vector<Tensor*>& params);

/// One bias-corrected Adam update. Gradients are first rescaled by
/// clip_threshold / ||g|| when the global norm exceeds the threshold
/// (direction preserved). Returns the scale that was applied (1.0 when no
/// clipping occurred). A NaN or Inf in any gradient rejects the step with
/// std::runtime_error before any state is touched.
double adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace ctxnmt
