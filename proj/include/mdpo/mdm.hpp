#pragma once

// Masked-diffusion process math: noise schedule, forward masking, and the
// exact / model-approximated posteriors of the absorbing-state process.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpo/rng.hpp"

namespace mdpo {

using TokenSeq = std::vector<int>;

// Ordinary token ids live in [0, size); the mask symbol is one past them.
// eos and pad are ordinary tokens (the model may emit them); mask is not.
struct Vocab {
  int size = 0;     // number of ordinary tokens, eos/pad included
  int mask_id = 0;  // == size
  int eos_id = 0;
  int pad_id = 0;

  void validate() const {
    if (size <= 0) throw std::invalid_argument("Vocab: size must be positive");
    if (mask_id != size)
      throw std::invalid_argument("Vocab: mask_id must equal size");
    if (eos_id < 0 || eos_id >= size || pad_id < 0 || pad_id >= size ||
        eos_id == pad_id)
      throw std::invalid_argument("Vocab: eos/pad must be distinct ordinary ids");
  }
};

inline constexpr double kAlphaClamp = 1e-6;

// Discrete grid of T+1 survival probabilities, strictly decreasing,
// alpha[0] ~ 1 and alpha[T] ~ 0.
struct NoiseSchedule {
  int num_steps = 0;
  std::vector<double> alpha;  // size num_steps + 1

  double at(int t) const {
    if (t < 0 || t > num_steps)
      throw std::out_of_range("NoiseSchedule: t out of range");
    return alpha[static_cast<std::size_t>(t)];
  }
};

inline NoiseSchedule build_schedule(const std::string& kind, int num_steps) {
  if (num_steps < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
  if (kind != "linear")
    throw std::invalid_argument("build_schedule: unknown kind '" + kind + "'");
  NoiseSchedule s;
  s.num_steps = num_steps;
  s.alpha.resize(static_cast<std::size_t>(num_steps) + 1);
  for (int t = 0; t <= num_steps; ++t) {
    double a = 1.0 - static_cast<double>(t) / num_steps;
    a = std::min(1.0 - kAlphaClamp, std::max(kAlphaClamp, a));
    s.alpha[static_cast<std::size_t>(t)] = a;
  }
  return s;
}

// Latent state of the masking process: masked positions hold mask_id.
struct Latent {
  TokenSeq tokens;
  int time = 0;
};

// Each position independently keeps its token with probability alpha_t,
// otherwise becomes the mask symbol.
inline Latent forward_mask(const TokenSeq& x, int t, const NoiseSchedule& sched,
                           const Vocab& vocab, Rng& rng) {
  double a = sched.at(t);
  Latent z;
  z.time = t;
  z.tokens.resize(x.size());
  for (std::size_t l = 0; l < x.size(); ++l)
    z.tokens[l] = (rng.uniform() < a) ? x[l] : vocab.mask_id;
  return z;
}

// Per-position categorical over {mask} + ordinary tokens.
struct PosteriorRow {
  double mask_prob = 0.0;
  std::vector<double> token_probs;  // size vocab.size
};

// Exact posterior of the masking process given the clean sequence x.
// At unmasked positions: point mass on the observed token. At masked
// positions: (1-alpha_s)/(1-alpha_t) on mask, (alpha_s-alpha_t)/(1-alpha_t)
// on x's token.
inline std::vector<PosteriorRow> posterior(const Latent& z_t, const TokenSeq& x,
                                           int s, int t,
                                           const NoiseSchedule& sched,
                                           const Vocab& vocab) {
  if (s >= t) throw std::invalid_argument("posterior: requires s < t");
  if (z_t.tokens.size() != x.size())
    throw std::invalid_argument("posterior: length mismatch");
  double as = sched.at(s), at = sched.at(t);
  double p_mask = (1.0 - as) / (1.0 - at);
  double p_tok = (as - at) / (1.0 - at);
  std::vector<PosteriorRow> rows(x.size());
  for (std::size_t l = 0; l < x.size(); ++l) {
    rows[l].token_probs.assign(static_cast<std::size_t>(vocab.size), 0.0);
    if (z_t.tokens[l] != vocab.mask_id) {
      rows[l].token_probs[static_cast<std::size_t>(z_t.tokens[l])] = 1.0;
    } else {
      rows[l].mask_prob = p_mask;
      rows[l].token_probs[static_cast<std::size_t>(x[l])] = p_tok;
    }
  }
  return rows;
}

// Model-approximated posterior: the point mass on x is replaced by the
// model's per-position distribution over ordinary tokens.
inline std::vector<PosteriorRow> approx_posterior(
    const Latent& z_t, const std::vector<std::vector<double>>& x_probs, int s,
    int t, const NoiseSchedule& sched, const Vocab& vocab) {
  if (s >= t) throw std::invalid_argument("approx_posterior: requires s < t");
  if (z_t.tokens.size() != x_probs.size())
    throw std::invalid_argument("approx_posterior: length mismatch");
  double as = sched.at(s), at = sched.at(t);
  double p_mask = (1.0 - as) / (1.0 - at);
  double p_tok = (as - at) / (1.0 - at);
  std::vector<PosteriorRow> rows(x_probs.size());
  for (std::size_t l = 0; l < x_probs.size(); ++l) {
    const auto& probs = x_probs[l];
    if (static_cast<int>(probs.size()) != vocab.size)
      throw std::invalid_argument("approx_posterior: x_probs row size mismatch");
    double sum = 0.0;
    for (double p : probs) sum += p;
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("approx_posterior: x_probs row not normalized");
    rows[l].token_probs.assign(static_cast<std::size_t>(vocab.size), 0.0);
    if (z_t.tokens[l] != vocab.mask_id) {
      rows[l].token_probs[static_cast<std::size_t>(z_t.tokens[l])] = 1.0;
    } else {
      rows[l].mask_prob = p_mask;
      for (int v = 0; v < vocab.size; ++v)
        rows[l].token_probs[static_cast<std::size_t>(v)] =
            p_tok * probs[static_cast<std::size_t>(v)];
    }
  }
  return rows;
}

}  // namespace mdpo
