#pragma once

// Evaluation harness: accuracy/NFE/ETs measurement, gamma-sweep frontier,
// exact small-instance policy-transfer bound check, and variant comparison.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <utility>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdpo/likelihood.hpp"
#include "mdpo/rl.hpp"
#include "mdpo/sampler.hpp"
#include "mdpo/tasks.hpp"

namespace mdpo {

struct EvalRow {
  int index = 0;
  double reward = 0.0;
  int nfe = 0;
  int ets = 0;
  double gamma = 0.0;
};

struct EvalReport {
  std::string task;
  SamplerConfig sampler;
  int n_instances = 0;
  double accuracy = 0.0;
  double nfe_mean = 0.0, nfe_std = 0.0;
  double ets_mean = 0.0;
  std::vector<EvalRow> rows;
};

// Greedy-token decoding over n seeded instances. When use_threshold_head is
// set (EB only), each instance decodes at its prompt-adaptive threshold.
inline EvalReport evaluate(const DenoiserParams& params, const TaskSpec& task,
                           const SamplerConfig& sampler_cfg, int n,
                           std::uint64_t seed,
                           const RLConfig* threshold_head = nullptr) {
  if (n < 1) throw std::invalid_argument("evaluate: n must be >= 1");
  SamplerConfig cfg = sampler_cfg;
  cfg.greedy_tokens = true;
  EvalReport rep;
  rep.task = task_name_str(task.name);
  rep.sampler = cfg;
  rep.n_instances = n;
  auto insts = generate(task, n, seed);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "eval", static_cast<std::uint64_t>(i)));
    std::optional<double> gamma;
    if (threshold_head) {
      double m = threshold_mean(params, insts[static_cast<std::size_t>(i)].prompt,
                                cfg.max_len, *threshold_head);
      gamma = threshold_head->effective_gamma_max(params.cfg.vocab.size) *
              sigmoid(m);
    }
    Trajectory traj =
        decode(params, insts[static_cast<std::size_t>(i)].prompt, cfg, rng, gamma);
    EvalRow row;
    row.index = i;
    row.reward = reward(task, insts[static_cast<std::size_t>(i)], traj.completion);
    row.nfe = traj.nfe;
    row.ets = effective_tokens(traj.completion, task.vocab);
    row.gamma = gamma.value_or(cfg.strategy == Strategy::eb ? cfg.gamma : 0.0);
    rep.accuracy += row.reward;
    rep.nfe_mean += row.nfe;
    rep.ets_mean += row.ets;
    rep.rows.push_back(row);
  }
  rep.accuracy /= n;
  rep.nfe_mean /= n;
  rep.ets_mean /= n;
  for (const auto& r : rep.rows)
    rep.nfe_std += (r.nfe - rep.nfe_mean) * (r.nfe - rep.nfe_mean);
  rep.nfe_std = std::sqrt(rep.nfe_std / n);
  return rep;
}

struct FrontierPoint {
  double gamma = 0.0;
  double accuracy = 0.0;
  double nfe_mean = 0.0;
  bool adaptive = false;
};

// One EB evaluation per fixed gamma; if a threshold head is supplied, one
// extra point at the learned adaptive threshold.
inline std::vector<FrontierPoint> frontier(const DenoiserParams& params,
                                           const TaskSpec& task,
                                           const SamplerConfig& base_cfg,
                                           const std::vector<double>& gammas,
                                           int n, std::uint64_t seed,
                                           const RLConfig* threshold_head = nullptr) {
  if (gammas.empty()) throw std::invalid_argument("frontier: empty gamma list");
  std::vector<FrontierPoint> pts;
  for (double g : gammas) {
    SamplerConfig cfg = base_cfg;
    cfg.strategy = Strategy::eb;
    cfg.gamma = g;
    EvalReport rep = evaluate(params, task, cfg, n, seed);
    pts.push_back({g, rep.accuracy, rep.nfe_mean, false});
  }
  if (threshold_head) {
    SamplerConfig cfg = base_cfg;
    cfg.strategy = Strategy::eb;
    EvalReport rep = evaluate(params, task, cfg, n, seed, threshold_head);
    double gmean = 0.0;
    for (const auto& r : rep.rows) gmean += r.gamma;
    pts.push_back({gmean / rep.rows.size(), rep.accuracy, rep.nfe_mean, true});
  }
  return pts;
}

// ---- exact enumeration check of the surrogate transfer bound ----

struct PinskerReport {
  double mass_true = 0.0;      // trajectory probabilities, should sum to 1
  double mass_surrogate = 0.0;
  double expected_reward_true = 0.0;
  double expected_reward_surrogate = 0.0;
  double kl = 0.0;             // KL(surrogate || true), sequence level
  double epsilon = 0.0;        // sqrt(kl)
  double bound = 0.0;          // E_surrogate - sqrt(2) * M * epsilon
  bool holds = false;
};

namespace detail {

// Exact completion distribution of the decode policy (top-1 confidence
// position selection, temperature-1 tokens) by depth-first enumeration.
inline void enumerate_policy(const DenoiserParams& params, TokenSeq& seq,
                             const std::vector<std::uint8_t>& flags, int plen,
                             double prob, std::map<TokenSeq, double>& dist) {
  const auto& vocab = params.cfg.vocab;
  const int V = vocab.size;
  std::vector<int> masked;
  for (std::size_t l = static_cast<std::size_t>(plen); l < seq.size(); ++l)
    if (seq[l] == vocab.mask_id) masked.push_back(static_cast<int>(l));
  if (masked.empty()) {
    TokenSeq completion(seq.begin() + plen, seq.end());
    dist[completion] += prob;
    return;
  }
  ForwardOutput out = forward(params, seq, flags);
  std::vector<double> scores(masked.size());
  std::vector<std::vector<double>> probs(masked.size());
  for (std::size_t i = 0; i < masked.size(); ++i) {
    probs[i] = softmax_row(
        out.logits.data() + static_cast<std::size_t>(masked[i]) * V, V);
    scores[i] = score_confidence(probs[i]);
  }
  const int pick = masked[static_cast<std::size_t>(select_topk(scores, 1)[0])];
  const auto& row = probs[static_cast<std::size_t>(
      std::find(masked.begin(), masked.end(), pick) - masked.begin())];
  for (int v = 0; v < V; ++v) {
    const double p = row[static_cast<std::size_t>(v)];
    if (p < 1e-14) continue;
    seq[static_cast<std::size_t>(pick)] = v;
    enumerate_policy(params, seq, flags, plen, prob * p, dist);
    seq[static_cast<std::size_t>(pick)] = vocab.mask_id;
  }
}

}  // namespace detail

// Both policies share the same parameters: the true decode policy versus the
// mean-field surrogate (independent per-position sampling conditioned on the
// prompt only). Exact enumeration; requires a small completion region.
inline PinskerReport pinsker_check(const DenoiserParams& params,
                                   const TaskSpec& task, const Instance& inst,
                                   int completion_len) {
  const auto& vocab = params.cfg.vocab;
  const int V = vocab.size;
  if (completion_len > 6 || V > 5)
    throw std::invalid_argument("pinsker_check: enumeration budget exceeded");
  const int plen = static_cast<int>(inst.prompt.size());
  TokenSeq seq = inst.prompt;
  seq.resize(static_cast<std::size_t>(plen + completion_len), vocab.mask_id);
  std::vector<std::uint8_t> flags(seq.size(), 0);
  for (int l = 0; l < plen; ++l) flags[static_cast<std::size_t>(l)] = 1;

  std::map<TokenSeq, double> true_dist;
  detail::enumerate_policy(params, seq, flags, plen, 1.0, true_dist);

  // surrogate: product of mean-field marginals
  ForwardOutput mf = forward(params, seq, flags);
  std::vector<std::vector<double>> marginals(
      static_cast<std::size_t>(completion_len));
  for (int l = 0; l < completion_len; ++l)
    marginals[static_cast<std::size_t>(l)] = softmax_row(
        mf.logits.data() + static_cast<std::size_t>(plen + l) * V, V);

  PinskerReport rep;
  TokenSeq completion(static_cast<std::size_t>(completion_len), 0);
  std::function<void(int, double)> walk = [&](int depth, double prob) {
    if (depth == completion_len) {
      rep.mass_surrogate += prob;
      rep.expected_reward_surrogate += prob * reward(task, inst, completion);
      auto it = true_dist.find(completion);
      const double q = it != true_dist.end() ? it->second : 0.0;
      if (prob > 0.0) rep.kl += prob * std::log(prob / std::max(q, 1e-300));
      return;
    }
    for (int v = 0; v < V; ++v) {
      const double p =
          marginals[static_cast<std::size_t>(depth)][static_cast<std::size_t>(v)];
      if (p < 1e-300) continue;
      completion[static_cast<std::size_t>(depth)] = v;
      walk(depth + 1, prob * p);
    }
  };
  walk(0, 1.0);

  for (const auto& [comp, p] : true_dist) {
    rep.mass_true += p;
    rep.expected_reward_true += p * reward(task, inst, comp);
  }
  rep.epsilon = std::sqrt(std::max(rep.kl, 0.0));
  rep.bound = rep.expected_reward_surrogate - std::sqrt(2.0) * 1.0 * rep.epsilon;
  rep.holds = rep.expected_reward_true >= rep.bound - 1e-12;
  return rep;
}

// ---- variant comparison ----

struct VariantSummary {
  std::string variant;
  std::vector<double> final_rewards;  // one per seed, tail-window mean
  double mean = 0.0, stddev = 0.0;
};

struct ComparisonReport {
  std::vector<VariantSummary> variants;
  // paired per-seed differences between the first two variants, if present
  std::vector<double> paired_diffs;
};

// Tail-window mean reward of a metrics CSV written by train().
inline double final_reward_of_csv(const std::string& path, int window = 10) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("compare_variants: cannot open " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<double> rewards;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // iter
    std::getline(ss, cell, ',');  // variant
    std::getline(ss, cell, ',');  // reward_mean
    rewards.push_back(std::stod(cell));
  }
  if (rewards.empty()) throw std::runtime_error("compare_variants: empty log");
  const int w = std::min<int>(window, static_cast<int>(rewards.size()));
  double acc = 0.0;
  for (int i = 0; i < w; ++i)
    acc += rewards[rewards.size() - 1 - static_cast<std::size_t>(i)];
  return acc / w;
}

// runs[variant] = metrics CSV paths, one per seed, seed-aligned across
// variants.
inline ComparisonReport compare_variants(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& runs) {
  if (runs.empty()) throw std::invalid_argument("compare_variants: empty table");
  ComparisonReport rep;
  std::size_t n_seeds = runs.front().second.size();
  for (const auto& [variant, paths] : runs) {
    if (paths.size() != n_seeds)
      throw std::invalid_argument("compare_variants: mismatched seed counts");
    VariantSummary vs;
    vs.variant = variant;
    for (const auto& p : paths) vs.final_rewards.push_back(final_reward_of_csv(p));
    for (double r : vs.final_rewards) vs.mean += r;
    vs.mean /= static_cast<double>(vs.final_rewards.size());
    for (double r : vs.final_rewards)
      vs.stddev += (r - vs.mean) * (r - vs.mean);
    vs.stddev = std::sqrt(vs.stddev / static_cast<double>(vs.final_rewards.size()));
    rep.variants.push_back(std::move(vs));
  }
  if (rep.variants.size() >= 2)
    for (std::size_t s = 0; s < n_seeds; ++s)
      rep.paired_diffs.push_back(rep.variants[0].final_rewards[s] -
                                 rep.variants[1].final_rewards[s]);
  return rep;
}

// ---- report serialization ----

inline void write_eval_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_eval_csv: cannot open " + path);
  os << "index,reward,nfe,ets,gamma\n";
  for (const auto& r : rep.rows)
    os << r.index << ',' << r.reward << ',' << r.nfe << ',' << r.ets << ','
       << r.gamma << '\n';
}

inline void write_eval_json(const std::string& path, const EvalReport& rep) {
  nlohmann::json j;
  j["task"] = rep.task;
  j["strategy"] = strategy_name(rep.sampler.strategy);
  j["gamma"] = rep.sampler.gamma;
  j["k"] = rep.sampler.k;
  j["n_instances"] = rep.n_instances;
  j["accuracy"] = rep.accuracy;
  j["nfe_mean"] = rep.nfe_mean;
  j["nfe_std"] = rep.nfe_std;
  j["ets_mean"] = rep.ets_mean;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_eval_json: cannot open " + path);
  os << j.dump(2) << "\n";
}

inline void write_frontier_csv(const std::string& path,
                               const std::vector<FrontierPoint>& pts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_frontier_csv: cannot open " + path);
  os << "gamma,accuracy,nfe_mean,adaptive\n";
  for (const auto& p : pts)
    os << p.gamma << ',' << p.accuracy << ',' << p.nfe_mean << ','
       << (p.adaptive ? 1 : 0) << '\n';
}

// Accuracy-vs-NFE scatter; adaptive point drawn as a diamond.
inline void write_frontier_svg(const std::string& path,
                               const std::vector<FrontierPoint>& pts) {
  double nfe_max = 1.0;
  for (const auto& p : pts) nfe_max = std::max(nfe_max, p.nfe_mean);
  const double W = 480, H = 360, m = 48;
  auto sx = [&](double nfe) { return m + (W - 2 * m) * nfe / nfe_max; };
  auto sy = [&](double acc) { return H - m - (H - 2 * m) * acc; };
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_frontier_svg: cannot open " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='"
     << H - m << "' stroke='black'/>\n";
  os << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='"
     << H - m << "' stroke='black'/>\n";
  os << "<text x='" << W / 2 << "' y='" << H - 12
     << "' font-size='12' text-anchor='middle'>mean NFE</text>\n";
  os << "<text x='14' y='" << H / 2
     << "' font-size='12' text-anchor='middle' transform='rotate(-90 14 "
     << H / 2 << ")'>accuracy</text>\n";
  for (const auto& p : pts) {
    if (p.adaptive) {
      const double x = sx(p.nfe_mean), y = sy(p.accuracy);
      os << "<polygon points='" << x << ',' << y - 6 << ' ' << x + 6 << ',' << y
         << ' ' << x << ',' << y + 6 << ' ' << x - 6 << ',' << y
         << "' fill='crimson'/>\n";
    } else {
      os << "<circle cx='" << sx(p.nfe_mean) << "' cy='" << sy(p.accuracy)
         << "' r='4' fill='steelblue'/>\n";
    }
  }
  os << "</svg>\n";
}

inline void write_kl_csv(const std::string& path, const KlByStep& kl) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_kl_csv: cannot open " + path);
  os << "step_index,mean_kl,n_samples\n";
  for (std::size_t i = 0; i < kl.mean_kl.size(); ++i)
    os << (i + 1) << ',' << kl.mean_kl[i] << ',' << kl.n_samples[i] << '\n';
}

}  // namespace mdpo
