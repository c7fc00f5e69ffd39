#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdpo/denoiser.hpp"

namespace mdpo {

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One Adam update in the ascent direction of `grad` (pass the negated
// gradient to descend). Deterministic; rejects non-finite gradients.
inline void adam_step(DenoiserParams& params, const std::vector<double>& grad,
                      AdamState& st, double lr) {
  if (grad.size() != params.size() || st.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw std::runtime_error("adam_step: non-finite gradient component");
  ++st.step;
  const double b1 = st.beta1, b2 = st.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    params.values[i] += lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace mdpo
