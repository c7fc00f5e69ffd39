#pragma once

// The three per-token likelihood readings of a recorded trajectory:
//   true_step   — condition each step's tokens on z^{t-1}  (|steps| forwards)
//   mean_field  — condition every token on the prompt only (1 forward)
//   two_mf      — prompt-only up to step tau, then z^tau    (2 forwards)
// plus the KL-by-timestep diagnostic and the latent-recency probe.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdpo/denoiser.hpp"
#include "mdpo/sampler.hpp"

namespace mdpo {

enum class LikelihoodVariant { true_step, mean_field, two_mf };

struct LikelihoodMode {
  LikelihoodVariant variant = LikelihoodVariant::true_step;
  int tau = 0;  // two_mf only
};

// Per step, per newly-unmasked token (aligned with StepRecord order),
// log-probabilities of the committed tokens.
struct StepLikelihoods {
  std::vector<std::vector<double>> logp;
};

inline int step_function(int tau, int t) {
  if (tau < 0 || t < 1) throw std::invalid_argument("step_function: bad args");
  return t > tau ? tau : 0;
}

namespace detail {

inline std::vector<std::uint8_t> prompt_flags(const Trajectory& traj) {
  std::vector<std::uint8_t> f(traj.prompt.size() + traj.completion.size(), 0);
  for (int l = 0; l < traj.prompt_len; ++l) f[static_cast<std::size_t>(l)] = 1;
  return f;
}

}  // namespace detail

// Token committed at (step, slot): read from the next latent / completion.
inline int committed_token(const Trajectory& traj, std::size_t step_idx,
                           std::size_t slot) {
  const auto& rec = traj.steps[step_idx];
  const int pos = rec.positions[slot];
  if (step_idx + 1 < traj.steps.size())
    return traj.steps[step_idx + 1].latent_before[static_cast<std::size_t>(pos)];
  return traj.completion[static_cast<std::size_t>(pos - traj.prompt_len)];
}

inline StepLikelihoods true_step_likelihoods(const DenoiserParams& params,
                                             const Trajectory& traj) {
  const int V = params.cfg.vocab.size;
  auto flags = detail::prompt_flags(traj);
  StepLikelihoods out;
  out.logp.resize(traj.steps.size());
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const auto& rec = traj.steps[s];
    if (rec.latent_before.empty())
      throw std::invalid_argument("true_step_likelihoods: missing snapshot");
    ForwardOutput fo = forward(params, rec.latent_before, flags);
    out.logp[s].resize(rec.positions.size());
    for (std::size_t i = 0; i < rec.positions.size(); ++i)
      out.logp[s][i] = log_softmax_at(
          fo.logits.data() + static_cast<std::size_t>(rec.positions[i]) * V, V,
          committed_token(traj, s, i));
  }
  return out;
}

inline StepLikelihoods mean_field_likelihoods(const DenoiserParams& params,
                                              const Trajectory& traj) {
  const int V = params.cfg.vocab.size;
  auto flags = detail::prompt_flags(traj);
  ForwardOutput fo = forward(params, traj.latent_at(0), flags);
  StepLikelihoods out;
  out.logp.resize(traj.steps.size());
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const auto& rec = traj.steps[s];
    out.logp[s].resize(rec.positions.size());
    for (std::size_t i = 0; i < rec.positions.size(); ++i)
      out.logp[s][i] = log_softmax_at(
          fo.logits.data() + static_cast<std::size_t>(rec.positions[i]) * V, V,
          committed_token(traj, s, i));
  }
  return out;
}

inline StepLikelihoods two_mf_likelihoods(const DenoiserParams& params,
                                          const Trajectory& traj, int tau) {
  if (tau < 0 || tau >= static_cast<int>(traj.steps.size()))
    throw std::invalid_argument("two_mf_likelihoods: tau out of range");
  const int V = params.cfg.vocab.size;
  auto flags = detail::prompt_flags(traj);
  ForwardOutput fo0 = forward(params, traj.latent_at(0), flags);
  ForwardOutput fot = forward(params, traj.latent_at(tau), flags);
  StepLikelihoods out;
  out.logp.resize(traj.steps.size());
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const auto& rec = traj.steps[s];
    const int t = static_cast<int>(s) + 1;
    const ForwardOutput& fo = step_function(tau, t) == 0 ? fo0 : fot;
    out.logp[s].resize(rec.positions.size());
    for (std::size_t i = 0; i < rec.positions.size(); ++i)
      out.logp[s][i] = log_softmax_at(
          fo.logits.data() + static_cast<std::size_t>(rec.positions[i]) * V, V,
          committed_token(traj, s, i));
  }
  return out;
}

// KL over the ordinary-token simplex, KL(p || q).
inline double kl_divergence(const std::vector<double>& p,
                            const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], 1e-300));
  return kl;
}

struct KlByStep {
  std::vector<double> mean_kl;  // index t-1 holds step t
  std::vector<long> n_samples;
};

// Decodes each prompt under cfg and measures, per decode step, the mean KL
// between the recorded true conditional and the mode's conditional at each
// newly-unmasked position. For two_mf, tau is drawn uniformly per prompt.
inline KlByStep kl_by_timestep(const DenoiserParams& params,
                               const std::vector<TokenSeq>& prompts,
                               const SamplerConfig& cfg, LikelihoodMode mode,
                               Rng& rng) {
  if (prompts.empty()) throw std::invalid_argument("kl_by_timestep: no prompts");
  const int V = params.cfg.vocab.size;
  KlByStep agg;
  for (const auto& prompt : prompts) {
    Trajectory traj = decode(params, prompt, cfg, rng);
    auto flags = detail::prompt_flags(traj);
    int tau = 0;
    if (mode.variant == LikelihoodVariant::two_mf)
      tau = rng.uniform_int(0, static_cast<int>(traj.steps.size()) - 1);
    ForwardOutput fo0, fot;
    if (mode.variant != LikelihoodVariant::true_step) {
      fo0 = forward(params, traj.latent_at(0), flags);
      if (mode.variant == LikelihoodVariant::two_mf)
        fot = forward(params, traj.latent_at(tau), flags);
    }
    for (std::size_t s = 0; s < traj.steps.size(); ++s) {
      const auto& rec = traj.steps[s];
      const int t = static_cast<int>(s) + 1;
      if (agg.mean_kl.size() < static_cast<std::size_t>(t)) {
        agg.mean_kl.resize(static_cast<std::size_t>(t), 0.0);
        agg.n_samples.resize(static_cast<std::size_t>(t), 0);
      }
      for (std::size_t i = 0; i < rec.positions.size(); ++i) {
        double kl = 0.0;
        if (mode.variant != LikelihoodVariant::true_step) {
          const ForwardOutput& fo =
              (mode.variant == LikelihoodVariant::mean_field ||
               step_function(tau, t) == 0)
                  ? fo0
                  : fot;
          std::vector<double> approx = softmax_row(
              fo.logits.data() + static_cast<std::size_t>(rec.positions[i]) * V,
              V);
          kl = kl_divergence(rec.conditionals[i], approx);
        }
        agg.mean_kl[static_cast<std::size_t>(t - 1)] += kl;
        agg.n_samples[static_cast<std::size_t>(t - 1)] += 1;
      }
    }
  }
  for (std::size_t i = 0; i < agg.mean_kl.size(); ++i)
    if (agg.n_samples[i] > 0)
      agg.mean_kl[i] /= static_cast<double>(agg.n_samples[i]);
  return agg;
}

struct RecencyCurve {
  std::vector<double> f;           // f(tau; t) for tau = 0..t-1
  double nonincreasing_fraction = 0.0;
};

// For a fixed step t, mean KL between the step-t true conditional and the
// conditional computed from z^tau, over all trajectories with >= t steps.
inline RecencyCurve assumption1_probe(const DenoiserParams& params,
                                      const std::vector<Trajectory>& trajs,
                                      int t) {
  if (t < 2) throw std::invalid_argument("assumption1_probe: t must be >= 2");
  const int V = params.cfg.vocab.size;
  RecencyCurve curve;
  curve.f.assign(static_cast<std::size_t>(t), 0.0);
  std::vector<long> n(static_cast<std::size_t>(t), 0);
  for (const auto& traj : trajs) {
    if (static_cast<int>(traj.steps.size()) < t) continue;
    auto flags = detail::prompt_flags(traj);
    const auto& rec = traj.steps[static_cast<std::size_t>(t - 1)];
    for (int tau = 0; tau < t; ++tau) {
      ForwardOutput fo = forward(params, traj.latent_at(tau), flags);
      for (std::size_t i = 0; i < rec.positions.size(); ++i) {
        std::vector<double> approx = softmax_row(
            fo.logits.data() + static_cast<std::size_t>(rec.positions[i]) * V,
            V);
        curve.f[static_cast<std::size_t>(tau)] +=
            kl_divergence(rec.conditionals[i], approx);
        n[static_cast<std::size_t>(tau)] += 1;
      }
    }
  }
  for (std::size_t i = 0; i < curve.f.size(); ++i)
    if (n[i] > 0) curve.f[i] /= static_cast<double>(n[i]);
  int ok = 0;
  for (std::size_t i = 0; i + 1 < curve.f.size(); ++i)
    if (curve.f[i + 1] <= curve.f[i] + 1e-12) ++ok;
  if (curve.f.size() > 1)
    curve.nonincreasing_fraction =
        static_cast<double>(ok) / static_cast<double>(curve.f.size() - 1);
  return curve;
}

}  // namespace mdpo
