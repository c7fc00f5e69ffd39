#pragma once

// Group-relative policy optimization for the masked-diffusion policy and
// its sampler threshold head. All losses are objectives to MAXIMIZE and all
// returned gradients are ascent directions.
//
// Variants:
//   d1        — per-token clipped ratio of prompt-only (mean-field) likelihoods
//   two_mf    — per-step clipped ratio of two-times mean-field likelihoods
//   two_mf_is — two_mf with a capped importance weight correcting the
//               surrogate/behavior mismatch (constant in current params)
//   joint     — two_mf_is plus the threshold-as-token sampler term with
//               stopgrad on the denoiser body

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpo/checkpoint.hpp"
#include "mdpo/denoiser.hpp"
#include "mdpo/likelihood.hpp"
#include "mdpo/optimizer.hpp"
#include "mdpo/sampler.hpp"
#include "mdpo/tasks.hpp"

namespace mdpo {

enum class RLVariant { d1, two_mf, two_mf_is, joint };

inline std::string variant_name(RLVariant v) {
  switch (v) {
    case RLVariant::d1: return "d1";
    case RLVariant::two_mf: return "2mf";
    case RLVariant::two_mf_is: return "2mf_is";
    case RLVariant::joint: return "joint";
  }
  return "?";
}

inline RLVariant parse_variant(const std::string& s) {
  if (s == "d1") return RLVariant::d1;
  if (s == "2mf") return RLVariant::two_mf;
  if (s == "2mf_is") return RLVariant::two_mf_is;
  if (s == "joint") return RLVariant::joint;
  throw std::invalid_argument("unknown rl variant '" + s + "'");
}

struct RLConfig {
  int group_size = 6;
  double clip_eps = 0.2;
  double is_cap = 2.0;
  RLVariant variant = RLVariant::two_mf_is;
  double sigma_explore = 0.25;
  double gamma_max = 0.0;   // 0 -> default 2 ln(vocab)
  double gamma_init = 0.1;
  double lr = 1e-3;
  int steps = 100;
  std::uint64_t seed = 0;
  double adv_eps = 1e-8;
  int prompts_per_iter = 8;
  int ckpt_every = 0;  // 0 -> final only

  void validate(int vocab_size) const {
    if (group_size < 2) throw std::invalid_argument("RLConfig: group_size < 2");
    if (clip_eps <= 0.0 || clip_eps >= 1.0)
      throw std::invalid_argument("RLConfig: clip_eps must be in (0,1)");
    if (is_cap < 1.0) throw std::invalid_argument("RLConfig: is_cap < 1");
    if (sigma_explore < 0.0) throw std::invalid_argument("RLConfig: sigma < 0");
    double gmax = effective_gamma_max(vocab_size);
    if (gamma_init <= 0.0 || gamma_init >= gmax)
      throw std::invalid_argument("RLConfig: gamma_init outside (0, gamma_max)");
  }
  double effective_gamma_max(int vocab_size) const {
    return gamma_max > 0.0 ? gamma_max : 2.0 * std::log(vocab_size);
  }
};

struct RolloutGroup {
  TokenSeq prompt;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

struct ThresholdSample {
  double logit = 0.0;
  double gamma = 0.0;
  double old_mean = 0.0;
};

// (r_i - mean) / (population std + delta); all-equal rewards give all zeros.
inline std::vector<double> advantages(const std::vector<double>& rewards,
                                      double delta) {
  if (rewards.size() < 2)
    throw std::invalid_argument("advantages: need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (rewards[i] - mean) / (sd + delta);
  return adv;
}

// min(ratio*A, clip(ratio, 1-eps, 1+eps)*A) and its derivative w.r.t. ratio.
struct ClippedTerm {
  double value = 0.0;
  double dratio = 0.0;
};

inline ClippedTerm clipped_term(double ratio, double A, double eps) {
  if (ratio < 0.0) throw std::invalid_argument("clipped_term: ratio < 0");
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  ClippedTerm out;
  if (ratio * A <= clipped * A) {
    out.value = ratio * A;
    out.dratio = A;
  } else {
    out.value = clipped * A;
    out.dratio = 0.0;
  }
  return out;
}

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;  // ascent direction
};

namespace detail {

inline std::vector<std::uint8_t> flags_of(const Trajectory& traj) {
  std::vector<std::uint8_t> f(traj.prompt.size() + traj.completion.size(), 0);
  for (int l = 0; l < traj.prompt_len; ++l) f[static_cast<std::size_t>(l)] = 1;
  return f;
}

}  // namespace detail

// Eq.-5-style objective: one mean-field forward per trajectory under each
// parameter set; per-token clipped ratio, 1/|o| weighting, group sum,
// averaged over groups.
inline LossResult d1_loss(const DenoiserParams& params,
                          const DenoiserParams& old_params,
                          const std::vector<RolloutGroup>& groups,
                          const RLConfig& cfg) {
  const int V = params.cfg.vocab.size;
  LossResult res;
  res.grad.assign(params.size(), 0.0);
  if (groups.empty()) throw std::invalid_argument("d1_loss: no groups");
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    if (g.trajectories.size() != g.advantages.size())
      throw std::invalid_argument("d1_loss: group shape mismatch");
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& traj = g.trajectories[i];
      const double A = g.advantages[i];
      const auto flags = detail::flags_of(traj);
      const TokenSeq z0 = traj.latent_at(0);
      ForwardCache cache;
      ForwardOutput out_new = forward(params, z0, flags, &cache);
      ForwardOutput out_old = forward(old_params, z0, flags);
      const double w = inv_groups / static_cast<double>(traj.completion.size());
      std::vector<double> dlogits(out_new.logits.size(), 0.0);
      for (std::size_t k = 0; k < traj.completion.size(); ++k) {
        const int pos = traj.prompt_len + static_cast<int>(k);
        const int tok = traj.completion[k];
        const double lp_new = log_softmax_at(
            out_new.logits.data() + static_cast<std::size_t>(pos) * V, V, tok);
        const double lp_old = log_softmax_at(
            out_old.logits.data() + static_cast<std::size_t>(pos) * V, V, tok);
        const double ratio = std::exp(lp_new - lp_old);
        ClippedTerm ct = clipped_term(ratio, A, cfg.clip_eps);
        res.value += w * ct.value;
        const double dlp = w * ct.dratio * ratio;
        if (dlp != 0.0) {
          std::vector<double> sm = softmax_row(
              out_new.logits.data() + static_cast<std::size_t>(pos) * V, V);
          double* drow = dlogits.data() + static_cast<std::size_t>(pos) * V;
          for (int v = 0; v < V; ++v)
            drow[v] -= dlp * sm[static_cast<std::size_t>(v)];
          drow[tok] += dlp;
        }
      }
      backward(params, cache, dlogits, res.grad);
    }
  }
  return res;
}

// Eq.-9-style objective. tau_draws[g][i] is the per-trajectory latent index.
// The importance weight uses only old-parameter quantities: the recorded
// behavior conditionals (true step likelihood under old params) against the
// old-parameter two-times mean-field likelihood.
inline LossResult diffpo_model_loss(
    const DenoiserParams& params, const DenoiserParams& old_params,
    const std::vector<RolloutGroup>& groups,
    const std::vector<std::vector<int>>& tau_draws, const RLConfig& cfg,
    bool with_is) {
  const int V = params.cfg.vocab.size;
  LossResult res;
  res.grad.assign(params.size(), 0.0);
  if (groups.empty()) throw std::invalid_argument("diffpo_model_loss: no groups");
  if (tau_draws.size() != groups.size())
    throw std::invalid_argument("diffpo_model_loss: tau shape mismatch");
  const double inv_groups = 1.0 / static_cast<double>(groups.size());

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& traj = g.trajectories[i];
      if (traj.steps.empty() || traj.steps.front().conditionals.empty())
        throw std::invalid_argument("diffpo_model_loss: missing recorded conditionals");
      const double A = g.advantages[i];
      const int tau = tau_draws[gi][i];
      const int n_steps = static_cast<int>(traj.steps.size());
      if (tau < 0 || tau >= n_steps)
        throw std::invalid_argument("diffpo_model_loss: tau out of range");
      const auto flags = detail::flags_of(traj);
      const TokenSeq z0 = traj.latent_at(0);
      const TokenSeq ztau = traj.latent_at(tau);

      ForwardCache cache0, cachet;
      ForwardOutput new0 = forward(params, z0, flags, &cache0);
      ForwardOutput newt = forward(params, ztau, flags, &cachet);
      ForwardOutput old0 = forward(old_params, z0, flags);
      ForwardOutput oldt = forward(old_params, ztau, flags);

      const double w =
          inv_groups / static_cast<double>(traj.completion.size());
      std::vector<double> dlogits0(new0.logits.size(), 0.0);
      std::vector<double> dlogitst(newt.logits.size(), 0.0);

      for (int t = 1; t <= n_steps; ++t) {
        const auto& rec = traj.steps[static_cast<std::size_t>(t - 1)];
        const bool use_tau = step_function(tau, t) != 0;
        const ForwardOutput& fo_new = use_tau ? newt : new0;
        const ForwardOutput& fo_old = use_tau ? oldt : old0;
        double lp_new = 0.0, lp_old = 0.0, lp_behavior = 0.0;
        for (std::size_t s = 0; s < rec.positions.size(); ++s) {
          const int pos = rec.positions[s];
          const int tok = committed_token(traj, static_cast<std::size_t>(t - 1), s);
          lp_new += log_softmax_at(
              fo_new.logits.data() + static_cast<std::size_t>(pos) * V, V, tok);
          lp_old += log_softmax_at(
              fo_old.logits.data() + static_cast<std::size_t>(pos) * V, V, tok);
          lp_behavior +=
              std::log(std::max(rec.conditionals[s][static_cast<std::size_t>(tok)],
                                1e-300));
        }
        const double is_w =
            with_is ? std::min(cfg.is_cap, std::exp(lp_old - lp_behavior)) : 1.0;
        const double ratio = std::exp(lp_new - lp_old);
        ClippedTerm ct = clipped_term(ratio, A, cfg.clip_eps);
        res.value += w * is_w * ct.value;
        const double dlp = w * is_w * ct.dratio * ratio;
        if (dlp == 0.0) continue;
        std::vector<double>& dl = use_tau ? dlogitst : dlogits0;
        const ForwardOutput& fo = fo_new;
        for (std::size_t s = 0; s < rec.positions.size(); ++s) {
          const int pos = rec.positions[s];
          const int tok = committed_token(traj, static_cast<std::size_t>(t - 1), s);
          std::vector<double> sm = softmax_row(
              fo.logits.data() + static_cast<std::size_t>(pos) * V, V);
          double* drow = dl.data() + static_cast<std::size_t>(pos) * V;
          for (int v = 0; v < V; ++v)
            drow[v] -= dlp * sm[static_cast<std::size_t>(v)];
          drow[tok] += dlp;
        }
      }
      backward(params, cache0, dlogits0, res.grad);
      backward(params, cachet, dlogitst, res.grad);
    }
  }
  return res;
}

// Pre-sigmoid mean of the threshold policy for a prompt:
//   m = w . pooled_features(prompt, fully masked completion) + beta,
//   beta = log(gamma_init / (gamma_max - gamma_init)).
inline double threshold_mean(const DenoiserParams& params,
                             const TokenSeq& prompt, int completion_len,
                             const RLConfig& cfg) {
  const auto& vocab = params.cfg.vocab;
  TokenSeq seq = prompt;
  seq.resize(prompt.size() + static_cast<std::size_t>(completion_len),
             vocab.mask_id);
  std::vector<std::uint8_t> flags(seq.size(), 0);
  for (std::size_t l = 0; l < prompt.size(); ++l) flags[l] = 1;
  ForwardOutput out = forward(params, seq, flags);
  const double gmax = cfg.effective_gamma_max(vocab.size);
  const double beta = std::log(cfg.gamma_init / (gmax - cfg.gamma_init));
  const double* w = params.at(params.layout.thresh_w);
  double m = beta;
  for (int d = 0; d < params.cfg.embed_dim; ++d)
    m += w[d] * out.pooled[static_cast<std::size_t>(d)];
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline ThresholdSample sample_threshold(const DenoiserParams& params,
                                        const TokenSeq& prompt,
                                        int completion_len, const RLConfig& cfg,
                                        Rng& rng) {
  ThresholdSample ts;
  ts.old_mean = threshold_mean(params, prompt, completion_len, cfg);
  ts.logit = ts.old_mean + cfg.sigma_explore * rng.normal();
  ts.gamma = cfg.effective_gamma_max(params.cfg.vocab.size) * sigmoid(ts.logit);
  return ts;
}

// Gaussian log-density of the stored pre-sigmoid logit.
inline double threshold_log_likelihood(double mean, double sigma, double u) {
  if (sigma <= 0.0)
    throw std::invalid_argument("threshold_log_likelihood: sigma must be > 0");
  const double z = (u - mean) / sigma;
  return -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * M_PI));
}

// Sampler term of the joint objective: per-completion clipped ratio of the
// Gaussian threshold policy, 1/|o| weighted, gradients into w only (pooled
// features under current params are treated as constants).
// pooled_from, when given, supplies the network that computes the pooled
// features; they sit behind a stop-gradient in the objective, so evaluating
// them at a frozen snapshot leaves the defined loss (and its gradient, which
// flows only into the threshold weights) unchanged at the snapshot point.
inline LossResult joint_sampler_loss(const DenoiserParams& params,
                                     const std::vector<RolloutGroup>& groups,
                                     const RLConfig& cfg,
                                     const DenoiserParams* pooled_from = nullptr) {
  if (cfg.sigma_explore <= 0.0)
    throw std::invalid_argument("joint variant requires sigma_explore > 0");
  LossResult res;
  res.grad.assign(params.size(), 0.0);
  if (groups.empty()) throw std::invalid_argument("joint_sampler_loss: no groups");
  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  const int D = params.cfg.embed_dim;
  const std::size_t w_off = params.layout.thresh_w;
  const double sigma = cfg.sigma_explore;

  for (const auto& g : groups) {
    if (g.trajectories.empty()) continue;
    const int clen = static_cast<int>(g.trajectories.front().completion.size());
    // pooled features and m are shared across the group (same prompt)
    const auto& vocab = params.cfg.vocab;
    TokenSeq seq = g.prompt;
    seq.resize(g.prompt.size() + static_cast<std::size_t>(clen), vocab.mask_id);
    std::vector<std::uint8_t> flags(seq.size(), 0);
    for (std::size_t l = 0; l < g.prompt.size(); ++l) flags[l] = 1;
    ForwardOutput out = forward(pooled_from ? *pooled_from : params, seq, flags);
    const double gmax = cfg.effective_gamma_max(vocab.size);
    const double beta = std::log(cfg.gamma_init / (gmax - cfg.gamma_init));
    double m = beta;
    for (int d = 0; d < D; ++d)
      m += params.at(w_off)[d] * out.pooled[static_cast<std::size_t>(d)];

    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& traj = g.trajectories[i];
      if (!traj.threshold_logit || !traj.threshold_old_mean)
        throw std::invalid_argument("joint_sampler_loss: missing threshold sample");
      const double u = *traj.threshold_logit;
      const double m_old = *traj.threshold_old_mean;
      const double lp_new = threshold_log_likelihood(m, sigma, u);
      const double lp_old = threshold_log_likelihood(m_old, sigma, u);
      const double ratio = std::exp(lp_new - lp_old);
      ClippedTerm ct = clipped_term(ratio, g.advantages[i], cfg.clip_eps);
      const double w = inv_groups / static_cast<double>(traj.completion.size());
      res.value += w * ct.value;
      const double dm = w * ct.dratio * ratio * (u - m) / (sigma * sigma);
      for (int d = 0; d < D; ++d)
        res.grad[w_off + static_cast<std::size_t>(d)] +=
            dm * out.pooled[static_cast<std::size_t>(d)];
    }
  }
  return res;
}

inline LossResult joint_loss(const DenoiserParams& params,
                             const DenoiserParams& old_params,
                             const std::vector<RolloutGroup>& groups,
                             const std::vector<std::vector<int>>& tau_draws,
                             const RLConfig& cfg,
                             const DenoiserParams* pooled_from = nullptr) {
  LossResult model = diffpo_model_loss(params, old_params, groups, tau_draws,
                                       cfg, /*with_is=*/true);
  LossResult sampler = joint_sampler_loss(params, groups, cfg, pooled_from);
  model.value += sampler.value;
  for (std::size_t i = 0; i < model.grad.size(); ++i)
    model.grad[i] += sampler.grad[i];
  return model;
}

// ---- training loop ----

struct TrainOptions {
  std::string metrics_path;      // CSV: iter,variant,reward_mean,...
  std::string checkpoint_path;   // final (and periodic) checkpoint
  int threads = 1;
};

struct IterationStats {
  double reward_mean = 0.0, reward_std = 0.0;
  double accuracy = 0.0;
  double nfe_mean = 0.0, ets_mean = 0.0, gamma_mean = 0.0;
  double loss = 0.0;
};

inline void train(DenoiserParams& params, const TaskSpec& task,
                  const RLConfig& rl_cfg, const SamplerConfig& sampler_cfg,
                  const TrainOptions& opts,
                  std::vector<IterationStats>* history = nullptr) {
  rl_cfg.validate(params.cfg.vocab.size);
  sampler_cfg.validate();
  if (rl_cfg.variant == RLVariant::joint && sampler_cfg.strategy != Strategy::eb)
    throw std::invalid_argument("joint variant requires the eb sampler");
  std::ofstream metrics;
  if (!opts.metrics_path.empty()) {
    metrics.open(opts.metrics_path);
    if (!metrics)
      throw std::runtime_error("train: cannot open " + opts.metrics_path);
    metrics << "iter,variant,reward_mean,reward_std,accuracy,nfe_mean,ets_mean,"
               "gamma_mean,loss\n";
  }
  AdamState opt(params.size());
  const bool joint = rl_cfg.variant == RLVariant::joint;

  for (int iter = 0; iter < rl_cfg.steps; ++iter) {
    DenoiserParams old_params = params;  // behavior snapshot
    std::vector<RolloutGroup> groups(
        static_cast<std::size_t>(rl_cfg.prompts_per_iter));
    std::vector<std::vector<int>> tau_draws(groups.size());

    // Rollout phase: read-only on old_params; seeds are per (iter, prompt,
    // member) so the schedule is independent of execution order.
    auto roll_prompt = [&](int pi) {
      RolloutGroup& g = groups[static_cast<std::size_t>(pi)];
      Rng prompt_rng(derive_seed(rl_cfg.seed, "rl-prompt",
                                 static_cast<std::uint64_t>(iter),
                                 static_cast<std::uint64_t>(pi)));
      Instance inst = make_instance(task, prompt_rng);
      g.prompt = inst.prompt;
      g.trajectories.resize(static_cast<std::size_t>(rl_cfg.group_size));
      g.rewards.resize(static_cast<std::size_t>(rl_cfg.group_size));
      for (int mi = 0; mi < rl_cfg.group_size; ++mi) {
        Rng rng(derive_seed(
            rl_cfg.seed, "rollout",
            static_cast<std::uint64_t>(iter) * 100003 +
                static_cast<std::uint64_t>(pi),
            static_cast<std::uint64_t>(mi)));
        Trajectory traj;
        if (joint) {
          ThresholdSample ts = sample_threshold(
              old_params, g.prompt, sampler_cfg.max_len, rl_cfg, rng);
          traj = decode(old_params, g.prompt, sampler_cfg, rng, ts.gamma);
          traj.threshold_logit = ts.logit;
          traj.threshold_old_mean = ts.old_mean;
        } else {
          traj = decode(old_params, g.prompt, sampler_cfg, rng);
        }
        g.rewards[static_cast<std::size_t>(mi)] = reward(task, inst, traj.completion);
        g.trajectories[static_cast<std::size_t>(mi)] = std::move(traj);
      }
      g.advantages = advantages(g.rewards, rl_cfg.adv_eps);
    };
    if (opts.threads > 1) {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      for (int t = 0; t < opts.threads; ++t)
        pool.emplace_back([&] {
          for (int pi = next.fetch_add(1); pi < rl_cfg.prompts_per_iter;
               pi = next.fetch_add(1))
            roll_prompt(pi);
        });
      for (auto& th : pool) th.join();
    } else {
      for (int pi = 0; pi < rl_cfg.prompts_per_iter; ++pi) roll_prompt(pi);
    }

    // Statistics (over all rollouts this iteration).
    IterationStats st;
    long n_rollouts = 0;
    for (const auto& g : groups)
      for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
        st.reward_mean += g.rewards[i];
        st.nfe_mean += g.trajectories[i].nfe;
        st.ets_mean +=
            effective_tokens(g.trajectories[i].completion, task.vocab);
        st.gamma_mean += g.trajectories[i].gamma_used.value_or(
            sampler_cfg.strategy == Strategy::eb ? sampler_cfg.gamma : 0.0);
        ++n_rollouts;
      }
    st.reward_mean /= static_cast<double>(n_rollouts);
    st.nfe_mean /= static_cast<double>(n_rollouts);
    st.ets_mean /= static_cast<double>(n_rollouts);
    st.gamma_mean /= static_cast<double>(n_rollouts);
    for (const auto& g : groups)
      for (double r : g.rewards)
        st.reward_std += (r - st.reward_mean) * (r - st.reward_mean);
    st.reward_std = std::sqrt(st.reward_std / static_cast<double>(n_rollouts));
    st.accuracy = st.reward_mean;  // binary rewards

    // Drop zero-variance groups: their advantages are identically zero.
    std::vector<RolloutGroup> active;
    std::vector<std::vector<int>> active_taus;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      bool nonzero = false;
      for (double a : groups[gi].advantages)
        if (a != 0.0) nonzero = true;
      if (!nonzero) continue;
      Rng tau_rng(derive_seed(rl_cfg.seed, "tau",
                              static_cast<std::uint64_t>(iter),
                              static_cast<std::uint64_t>(gi)));
      std::vector<int> taus;
      for (const auto& traj : groups[gi].trajectories)
        taus.push_back(
            tau_rng.uniform_int(0, static_cast<int>(traj.steps.size()) - 1));
      active.push_back(std::move(groups[gi]));
      active_taus.push_back(std::move(taus));
    }

    if (!active.empty()) {
      LossResult loss;
      switch (rl_cfg.variant) {
        case RLVariant::d1:
          loss = d1_loss(params, old_params, active, rl_cfg);
          break;
        case RLVariant::two_mf:
          loss = diffpo_model_loss(params, old_params, active, active_taus,
                                   rl_cfg, false);
          break;
        case RLVariant::two_mf_is:
          loss = diffpo_model_loss(params, old_params, active, active_taus,
                                   rl_cfg, true);
          break;
        case RLVariant::joint:
          loss = joint_loss(params, old_params, active, active_taus, rl_cfg);
          break;
      }
      if (!std::isfinite(loss.value))
        throw std::runtime_error("train: non-finite loss at iter " +
                                 std::to_string(iter));
      st.loss = loss.value;
      adam_step(params, loss.grad, opt, rl_cfg.lr);
    }

    if (metrics.is_open()) {
      metrics << iter << ',' << variant_name(rl_cfg.variant) << ','
              << st.reward_mean << ',' << st.reward_std << ',' << st.accuracy
              << ',' << st.nfe_mean << ',' << st.ets_mean << ','
              << st.gamma_mean << ',' << st.loss << '\n';
    }
    if (history) history->push_back(st);
    if (!opts.checkpoint_path.empty() && rl_cfg.ckpt_every > 0 &&
        (iter + 1) % rl_cfg.ckpt_every == 0) {
      save_checkpoint(opts.checkpoint_path + "." + std::to_string(iter + 1),
                      params, &opt);
    }
  }
  if (!opts.checkpoint_path.empty())
    save_checkpoint(opts.checkpoint_path, params, &opt);
}

}  // namespace mdpo
