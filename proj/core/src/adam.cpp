#include "ctxnmt/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxnmt {

namespace {

const std::vector<double>& grad_of(const Tensor* p, std::size_t i) {
  if (!p->grad || p->grad->size() != p->numel()) {
    throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                " carries no gradient");
  }
  return *p->grad;
}

}  // namespace

double global_grad_norm(const std::vector<Tensor*>& params) {
  double ss = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double g : grad_of(params[i], i)) ss += g * g;
  }
  return std::sqrt(ss);
}

double adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  if (!(state.clip_threshold > 0.0)) {
    throw std::invalid_argument("adam_step: clip_threshold must be positive");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->numel(), 0.0);
      state.v[i].assign(params[i]->numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter list size changed");
  }

  // Validate everything before touching any state: a rejected step must
  // leave moments, counter, and parameters exactly as they were.
  double ss = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double>& g = grad_of(params[i], i);
    if (g.size() != state.m[i].size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " changed size since the first step");
    }
    for (double gv : g) {
      if (!std::isfinite(gv)) {
        throw std::runtime_error("adam_step: non-finite gradient in parameter " +
                                 std::to_string(i) + "; step rejected");
      }
      ss += gv * gv;
    }
  }

  const double norm = std::sqrt(ss);
  const double scale =
      norm > state.clip_threshold ? state.clip_threshold / norm : 1.0;

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const std::vector<double>& g = *p.grad;
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double gj = g[j] * scale;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.values[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  return scale;
}

}  // namespace ctxnmt
