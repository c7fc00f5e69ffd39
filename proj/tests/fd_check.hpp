#pragma once

// Central-difference gradient oracle shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <vector>

#include "mdpo/denoiser.hpp"

namespace mdpo_test {

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// loss_fn must be a pure function of the parameter vector.
inline FdReport fd_check(mdpo::DenoiserParams& params,
                         const std::vector<double>& analytic,
                         const std::function<double()>& loss_fn,
                         const std::vector<std::size_t>& indices,
                         double h = 1e-5) {
  FdReport rep;
  for (std::size_t idx : indices) {
    double saved = params.values[idx];
    params.values[idx] = saved + h;
    double lp = loss_fn();
    params.values[idx] = saved - h;
    double lm = loss_fn();
    params.values[idx] = saved;
    double num = (lp - lm) / (2 * h);
    double denom = std::max({std::abs(num), std::abs(analytic[idx]), 1e-6});
    double rel = std::abs(num - analytic[idx]) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = idx;
    }
    ++rep.checked;
  }
  return rep;
}

// Deterministic spread of indices across the whole parameter vector.
inline std::vector<std::size_t> spread_indices(std::size_t total, std::size_t n) {
  std::vector<std::size_t> out;
  if (total == 0) return out;
  for (std::size_t i = 0; i < n; ++i) out.push_back((i * total) / n);
  return out;
}

}  // namespace mdpo_test
