#pragma once
// Adam with bias correction, plus global-norm gradient clipping.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "intrasum/tensor.hpp"

namespace intrasum {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<Tensor> m;  // first moments, parallel to the parameter list
  std::vector<Tensor> v;  // second moments
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<Tensor*>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (double x : g->v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* g : grads)
      for (double& x : g->v) x *= s;
  }
  return norm;
}

// One Adam update over a parallel (params, grads) list. Accumulator shapes
// are pinned to the parameter shapes on first use.
inline void adam_step(std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads,
                      AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].reshape_zero_like(*params[i]);
      state.v[i].reshape_zero_like(*params[i]);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state tracks a different parameter list");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]))
      throw std::invalid_argument(
          "adam_step: gradient shape " + grads[i]->shape_str() +
          " does not match parameter " + params[i]->shape_str());
    if (!state.m[i].same_shape(*params[i]))
      throw std::invalid_argument("adam_step: accumulator shape drifted");
    for (double x : grads[i]->v)
      if (!std::isfinite(x))
        throw std::runtime_error("adam_step: non-finite gradient, step aborted");
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m.v[j] = state.beta1 * m.v[j] + (1.0 - state.beta1) * g.v[j];
      v.v[j] = state.beta2 * v.v[j] + (1.0 - state.beta2) * g.v[j] * g.v[j];
      const double mhat = m.v[j] / bc1;
      const double vhat = v.v[j] / bc2;
      p.v[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace intrasum
