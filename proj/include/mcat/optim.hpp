// Plain (non-centered) RMSProp: one running average of squared gradients
// per parameter.
//
//   v <- rho * v + (1 - rho) * g^2
//   theta <- theta - lr * g / (sqrt(v) + eps)
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcat/nn.hpp"
#include "mcat/tensor.hpp"

namespace mcat {

template <typename S>
struct RMSPropState {
  std::vector<Tensor<S>> v;  // one slot per trainable parameter, same shapes
  double decay = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;

  static RMSPropState make(const std::vector<ParamRef<S>>& params, double decay = 0.999,
                           double epsilon = 1e-8) {
    RMSPropState st;
    st.decay = decay;
    st.epsilon = epsilon;
    for (const auto& p : params)
      if (p.trainable) st.v.push_back(Tensor<S>(p.value->shape()));
    return st;
  }
};

// Single update over a parameter registry. weight_decay is added to the
// gradient of decay-eligible parameters (conv/fc weights) before the update.
template <typename S>
void rmsprop_update(std::vector<ParamRef<S>>& params, RMSPropState<S>& state, double lr,
                    double weight_decay = 0.0) {
  if (lr <= 0) throw std::invalid_argument("rmsprop_update: lr must be positive");
  const S rho = S(state.decay);
  const S eps = S(state.epsilon);
  std::size_t slot = 0;
  for (auto& p : params) {
    if (!p.trainable) continue;
    if (slot >= state.v.size() || !same_shape(state.v[slot], *p.value))
      throw std::runtime_error("rmsprop_update: state/parameter shape mismatch at " + p.name);
    Tensor<S>& v = state.v[slot++];
    Tensor<S>& theta = *p.value;
    const Tensor<S>& g = *p.grad;
    const S wd = p.weight_decay ? S(weight_decay) : S(0);
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      S gi = g[i] + wd * theta[i];
      if (!std::isfinite(double(gi)))
        throw std::runtime_error("rmsprop_update: non-finite gradient in " + p.name);
      v[i] = rho * v[i] + (S(1) - rho) * gi * gi;
      theta[i] -= S(lr) * gi / (std::sqrt(v[i]) + eps);
    }
  }
  ++state.step_count;
}

}  // namespace mcat
