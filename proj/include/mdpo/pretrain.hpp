#pragma once

// Masked-denoising pretraining: sample a grid time per example, mask the
// completion region, cross-entropy on masked positions with the discrete
// NELBO weight T/t (linear schedule).

#include <utility>
#include <vector>

#include "mdpo/denoiser.hpp"
#include "mdpo/mdm.hpp"
#include "mdpo/rng.hpp"

namespace mdpo {

struct PretrainExample {
  TokenSeq prompt;
  TokenSeq completion;
};

struct PretrainResult {
  double loss = 0.0;            // mean weighted CE over the batch
  std::vector<double> grad;     // d(loss)/d(params), for descent
};

inline PretrainResult pretrain_step(const DenoiserParams& params,
                                    const std::vector<PretrainExample>& batch,
                                    const NoiseSchedule& sched, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");
  const auto& vocab = params.cfg.vocab;
  const int V = vocab.size;
  PretrainResult res;
  res.grad.assign(params.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const auto& ex : batch) {
    const int plen = static_cast<int>(ex.prompt.size());
    const int clen = static_cast<int>(ex.completion.size());
    const int t = rng.uniform_int(1, sched.num_steps);
    const double keep = sched.at(t);

    std::vector<int> tokens(ex.prompt);
    tokens.resize(static_cast<std::size_t>(plen + clen));
    std::vector<std::uint8_t> is_prompt(static_cast<std::size_t>(plen + clen), 0);
    std::vector<int> masked_pos;
    for (int l = 0; l < plen; ++l) is_prompt[static_cast<std::size_t>(l)] = 1;
    for (int l = 0; l < clen; ++l) {
      bool kept = rng.uniform() < keep;
      tokens[static_cast<std::size_t>(plen + l)] =
          kept ? ex.completion[static_cast<std::size_t>(l)] : vocab.mask_id;
      if (!kept) masked_pos.push_back(plen + l);
    }
    if (masked_pos.empty()) continue;  // fully unmasked draw: no loss term

    ForwardCache cache;
    ForwardOutput out = forward(params, tokens, is_prompt, &cache);
    const double w =
        static_cast<double>(sched.num_steps) / t / static_cast<double>(clen);
    std::vector<double> dlogits(out.logits.size(), 0.0);
    for (int pos : masked_pos) {
      const double* row = out.logits.data() + static_cast<std::size_t>(pos) * V;
      const int target = ex.completion[static_cast<std::size_t>(pos - plen)];
      res.loss -= w * inv_batch * log_softmax_at(row, V, target);
      std::vector<double> sm = softmax_row(row, V);
      double* drow = dlogits.data() + static_cast<std::size_t>(pos) * V;
      for (int v = 0; v < V; ++v)
        drow[v] = w * inv_batch * sm[static_cast<std::size_t>(v)];
      drow[target] -= w * inv_batch;
    }
    backward(params, cache, dlogits, res.grad);
  }
  return res;
}

// Held-out masked-token cross entropy (unweighted per-token mean), used to
// track pretraining progress.
inline double heldout_masked_ce(const DenoiserParams& params,
                                const std::vector<PretrainExample>& examples,
                                const NoiseSchedule& sched, Rng& rng) {
  const auto& vocab = params.cfg.vocab;
  const int V = vocab.size;
  double total = 0.0;
  long count = 0;
  for (const auto& ex : examples) {
    const int plen = static_cast<int>(ex.prompt.size());
    const int clen = static_cast<int>(ex.completion.size());
    const int t = rng.uniform_int(1, sched.num_steps);
    const double keep = sched.at(t);
    std::vector<int> tokens(ex.prompt);
    tokens.resize(static_cast<std::size_t>(plen + clen));
    std::vector<std::uint8_t> is_prompt(static_cast<std::size_t>(plen + clen), 0);
    for (int l = 0; l < plen; ++l) is_prompt[static_cast<std::size_t>(l)] = 1;
    std::vector<int> masked_pos;
    for (int l = 0; l < clen; ++l) {
      bool kept = rng.uniform() < keep;
      tokens[static_cast<std::size_t>(plen + l)] =
          kept ? ex.completion[static_cast<std::size_t>(l)] : vocab.mask_id;
      if (!kept) masked_pos.push_back(plen + l);
    }
    if (masked_pos.empty()) continue;
    ForwardOutput out = forward(params, tokens, is_prompt);
    for (int pos : masked_pos) {
      const double* row = out.logits.data() + static_cast<std::size_t>(pos) * V;
      total -= log_softmax_at(row, V,
                              ex.completion[static_cast<std::size_t>(pos - plen)]);
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace mdpo
