#pragma once

// Decoding strategies: which masked positions to commit at each step.
// random-k, top-k by score (confidence or negative entropy), and the
// entropy-bounded rule, all restricted to the current block of a
// semi-autoregressive left-to-right block schedule.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdpo/denoiser.hpp"
#include "mdpo/mdm.hpp"
#include "mdpo/rng.hpp"

namespace mdpo {

enum class Strategy { random_k, topk_confidence, topk_negentropy, eb };

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random_k: return "random_k";
    case Strategy::topk_confidence: return "topk_confidence";
    case Strategy::topk_negentropy: return "topk_negentropy";
    case Strategy::eb: return "eb";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "random_k") return Strategy::random_k;
  if (s == "topk_confidence") return Strategy::topk_confidence;
  if (s == "topk_negentropy") return Strategy::topk_negentropy;
  if (s == "eb") return Strategy::eb;
  throw std::invalid_argument("unknown sampler strategy '" + s + "'");
}

struct SamplerConfig {
  Strategy strategy = Strategy::topk_confidence;
  int k = 1;                 // random_k / top-k only
  double gamma = 0.1;        // eb only
  int block_size = 8;
  int max_len = 16;          // completion length
  double temperature = 1.0;  // 0 means argmax
  bool greedy_tokens = false;

  void validate() const {
    if (k <= 0) throw std::invalid_argument("SamplerConfig: k must be positive");
    if (gamma < 0.0) throw std::invalid_argument("SamplerConfig: gamma < 0");
    if (block_size <= 0 || max_len <= 0)
      throw std::invalid_argument("SamplerConfig: sizes must be positive");
    if (block_size > max_len)
      throw std::invalid_argument("SamplerConfig: block_size > max_len");
    if (temperature < 0.0)
      throw std::invalid_argument("SamplerConfig: temperature < 0");
  }
};

inline double score_confidence(const std::vector<double>& probs) {
  double m = 0.0;
  for (double p : probs) m = std::max(m, p);
  return m;
}

// Entropy in nats, 0 ln 0 := 0.
inline double entropy_cost(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

// Indices of the k highest-scoring entries; ties broken by ascending index.
inline std::vector<int> select_topk(const std::vector<double>& scores, int k) {
  if (scores.empty()) throw std::invalid_argument("select_topk: no positions");
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Longest ascending-cost prefix whose cumulative cost stays within gamma;
// if even the cheapest entry exceeds gamma, exactly the argmin entry.
// Ties broken by ascending index.
inline std::vector<int> select_eb(const std::vector<double>& costs,
                                  double gamma) {
  if (costs.empty()) throw std::invalid_argument("select_eb: no positions");
  std::vector<int> idx(costs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return costs[static_cast<std::size_t>(a)] < costs[static_cast<std::size_t>(b)];
  });
  std::vector<int> out;
  double acc = 0.0;
  for (int i : idx) {
    acc += costs[static_cast<std::size_t>(i)];
    if (acc > gamma) break;
    out.push_back(i);
  }
  if (out.empty()) out.push_back(idx.front());  // smallest-cost fallback
  std::sort(out.begin(), out.end());
  return out;
}

struct StepRecord {
  int time = 0;                 // 1-based decode-step index
  std::vector<int> positions;   // absolute positions unmasked at this step
  std::vector<std::vector<double>> conditionals;  // full rows, aligned
  TokenSeq latent_before;       // full sequence before this step (z^{t-1})
};

struct Trajectory {
  TokenSeq prompt;
  TokenSeq completion;              // completion region only
  int prompt_len = 0;
  std::vector<StepRecord> steps;
  std::vector<int> unmask_time;     // per completion position, 1-based step
  int nfe = 0;
  std::optional<double> threshold_logit;
  std::optional<double> threshold_old_mean;
  std::optional<double> gamma_used;

  TokenSeq full_sequence() const {
    TokenSeq s = prompt;
    s.insert(s.end(), completion.begin(), completion.end());
    return s;
  }
  // Latent after t decode steps; t in [0, steps.size()].
  TokenSeq latent_at(int t) const {
    if (t < 0 || t > static_cast<int>(steps.size()))
      throw std::out_of_range("Trajectory::latent_at: t out of range");
    if (t < static_cast<int>(steps.size()))
      return steps[static_cast<std::size_t>(t)].latent_before;
    return full_sequence();
  }
};

// Blockwise decode. Position-selection scores always use the model's
// temperature-1 distribution; token values are drawn at cfg.temperature
// (argmax when greedy_tokens or temperature == 0). gamma_override, when
// set, replaces cfg.gamma (threshold-head decoding).
inline Trajectory decode(const DenoiserParams& params, const TokenSeq& prompt,
                         const SamplerConfig& cfg, Rng& rng,
                         std::optional<double> gamma_override = {}) {
  cfg.validate();
  const auto& vocab = params.cfg.vocab;
  const int V = vocab.size;
  const int plen = static_cast<int>(prompt.size());
  const int clen = cfg.max_len;
  if (clen <= 0) throw std::invalid_argument("decode: empty completion region");
  if (plen + clen > params.cfg.max_len)
    throw std::invalid_argument("decode: prompt + max_len exceeds model capacity");
  const double gamma = gamma_override.value_or(cfg.gamma);

  Trajectory traj;
  traj.prompt = prompt;
  traj.prompt_len = plen;
  traj.unmask_time.assign(static_cast<std::size_t>(clen), 0);
  if (gamma_override) traj.gamma_used = gamma;

  TokenSeq seq = prompt;
  seq.resize(static_cast<std::size_t>(plen + clen), vocab.mask_id);
  std::vector<std::uint8_t> is_prompt(static_cast<std::size_t>(plen + clen), 0);
  for (int l = 0; l < plen; ++l) is_prompt[static_cast<std::size_t>(l)] = 1;

  int step_idx = 0;
  for (int bstart = plen; bstart < plen + clen; bstart += cfg.block_size) {
    const int bend = std::min(bstart + cfg.block_size, plen + clen);
    while (true) {
      std::vector<int> masked;
      for (int l = bstart; l < bend; ++l)
        if (seq[static_cast<std::size_t>(l)] == vocab.mask_id) masked.push_back(l);
      if (masked.empty()) break;

      ForwardOutput out = forward(params, seq, is_prompt);
      std::vector<std::vector<double>> probs(masked.size());
      for (std::size_t i = 0; i < masked.size(); ++i)
        probs[i] = softmax_row(
            out.logits.data() + static_cast<std::size_t>(masked[i]) * V, V);

      std::vector<int> chosen;  // indices into `masked`
      switch (cfg.strategy) {
        case Strategy::random_k: {
          std::vector<int> order(masked.size());
          std::iota(order.begin(), order.end(), 0);
          for (std::size_t i = 0; i < order.size(); ++i) {
            int j = rng.uniform_int(static_cast<int>(i),
                                    static_cast<int>(order.size()) - 1);
            std::swap(order[i], order[static_cast<std::size_t>(j)]);
          }
          order.resize(std::min<std::size_t>(order.size(),
                                             static_cast<std::size_t>(cfg.k)));
          std::sort(order.begin(), order.end());
          chosen = order;
          break;
        }
        case Strategy::topk_confidence: {
          std::vector<double> scores(masked.size());
          for (std::size_t i = 0; i < masked.size(); ++i)
            scores[i] = score_confidence(probs[i]);
          chosen = select_topk(scores, cfg.k);
          break;
        }
        case Strategy::topk_negentropy: {
          std::vector<double> scores(masked.size());
          for (std::size_t i = 0; i < masked.size(); ++i)
            scores[i] = -entropy_cost(probs[i]);
          chosen = select_topk(scores, cfg.k);
          break;
        }
        case Strategy::eb: {
          std::vector<double> costs(masked.size());
          for (std::size_t i = 0; i < masked.size(); ++i)
            costs[i] = entropy_cost(probs[i]);
          chosen = select_eb(costs, gamma);
          break;
        }
      }

      StepRecord rec;
      rec.time = ++step_idx;
      rec.latent_before = seq;
      for (int ci : chosen) {
        const int pos = masked[static_cast<std::size_t>(ci)];
        const auto& row = probs[static_cast<std::size_t>(ci)];
        int tok;
        if (cfg.greedy_tokens || cfg.temperature == 0.0) {
          tok = static_cast<int>(std::max_element(row.begin(), row.end()) -
                                 row.begin());
        } else if (cfg.temperature == 1.0) {
          tok = rng.categorical(row);
        } else {
          std::vector<double> tempered = softmax_row(
              out.logits.data() + static_cast<std::size_t>(pos) * V, V,
              cfg.temperature);
          tok = rng.categorical(tempered);
        }
        seq[static_cast<std::size_t>(pos)] = tok;
        rec.positions.push_back(pos);
        rec.conditionals.push_back(row);
        traj.unmask_time[static_cast<std::size_t>(pos - plen)] = rec.time;
      }
      traj.steps.push_back(std::move(rec));
    }
  }
  traj.completion.assign(seq.begin() + plen, seq.end());
  traj.nfe = static_cast<int>(traj.steps.size());
  return traj;
}

// Debug dump: one JSON object per decode step, newline-delimited.
inline void dump_trajectory_jsonl(const Trajectory& traj, std::ostream& os) {
  for (const auto& st : traj.steps) {
    nlohmann::json j;
    j["time"] = st.time;
    j["positions"] = st.positions;
    nlohmann::json toks = nlohmann::json::array();
    for (int pos : st.positions)
      toks.push_back(traj.completion[static_cast<std::size_t>(pos - traj.prompt_len)]);
    j["tokens"] = toks;
    j["latent_before"] = st.latent_before;
    j["conditionals"] = st.conditionals;
    if (st.time == 1) {
      j["prompt"] = traj.prompt;
      if (traj.gamma_used) j["gamma"] = *traj.gamma_used;
    }
    os << j.dump() << "\n";
  }
}

}  // namespace mdpo
