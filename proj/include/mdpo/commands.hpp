#pragma once

// Command implementations behind the CLI: pretrain -> rl-train -> eval /
// frontier / diag. Kept in the library so tests can drive the exact same
// code paths the binary runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mdpo/checkpoint.hpp"
#include "mdpo/config.hpp"
#include "mdpo/eval.hpp"
#include "mdpo/likelihood.hpp"
#include "mdpo/pretrain.hpp"
#include "mdpo/rl.hpp"

namespace mdpo {

// Output directory: MDPO_OUT_ROOT (if set) prefixes relative out_dir paths.
inline std::filesystem::path resolve_out_dir(const RunConfig& cfg) {
  std::filesystem::path p = cfg.out_dir;
  if (p.is_relative()) {
    if (const char* root = std::getenv("MDPO_OUT_ROOT")) p = std::filesystem::path(root) / p;
  }
  std::filesystem::create_directories(p);
  return p;
}

inline std::vector<PretrainExample> build_pretrain_dataset(const TaskSpec& task,
                                                           int n,
                                                           std::uint64_t seed) {
  auto insts = generate(task, n, seed);
  std::vector<PretrainExample> out;
  out.reserve(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    Rng rng(derive_seed(seed, "reference", i));
    out.push_back({insts[i].prompt, reference_completion(task, insts[i], rng)});
  }
  return out;
}

inline DenoiserParams run_pretrain(const RunConfig& cfg,
                                   const std::filesystem::path& out) {
  auto train_set = build_pretrain_dataset(cfg.task, cfg.pretrain.dataset_size,
                                          cfg.task.train_seed);
  auto heldout = build_pretrain_dataset(
      cfg.task, std::max(64, cfg.pretrain.dataset_size / 8),
      derive_seed(cfg.task.train_seed, "heldout"));
  DenoiserParams params = init_params(cfg.denoiser);
  AdamState opt(params.size());
  NoiseSchedule sched = build_schedule("linear", cfg.pretrain.diffusion_steps);
  Rng rng(derive_seed(cfg.seed, "pretrain"));
  Rng heldout_rng(derive_seed(cfg.seed, "pretrain-heldout"));

  std::ofstream curve(out / "pretrain_ce.csv");
  if (!curve) throw std::runtime_error("pretrain: cannot write CE curve");
  curve << "step,train_loss,heldout_ce\n";
  const int eval_every = std::max(1, cfg.pretrain.steps / 20);
  for (int step = 0; step < cfg.pretrain.steps; ++step) {
    std::vector<PretrainExample> batch;
    for (int b = 0; b < cfg.pretrain.batch; ++b)
      batch.push_back(train_set[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(train_set.size()) - 1))]);
    PretrainResult res = pretrain_step(params, batch, sched, rng);
    for (auto& g : res.grad) g = -g;  // descend on the CE loss
    adam_step(params, res.grad, opt, cfg.pretrain.lr);
    if (step % eval_every == 0 || step + 1 == cfg.pretrain.steps) {
      Rng hr(derive_seed(cfg.seed, "pretrain-heldout",
                         static_cast<std::uint64_t>(step)));
      (void)heldout_rng;
      curve << step << ',' << res.loss << ','
            << heldout_masked_ce(params, heldout, sched, hr) << '\n';
    }
  }
  save_checkpoint((out / "pretrain.ckpt").string(), params, &opt);
  return params;
}

inline int cmd_pretrain(const std::string& config_path) {
  RunConfig cfg = load_config(config_path);
  auto out = resolve_out_dir(cfg);
  run_pretrain(cfg, out);
  return 0;
}

inline int cmd_rl_train(const std::string& config_path,
                        const std::optional<std::string>& variant,
                        const std::string& resume_ckpt) {
  RunConfig cfg = load_config(config_path);
  if (variant) cfg.rl.variant = parse_variant(*variant);
  auto out = resolve_out_dir(cfg);
  DenoiserParams params = load_checkpoint(resume_ckpt);
  const std::string tag = variant_name(cfg.rl.variant);
  TrainOptions opts;
  opts.metrics_path = (out / ("metrics_" + tag + ".csv")).string();
  opts.checkpoint_path = (out / ("rl_" + tag + ".ckpt")).string();
  opts.threads = cfg.threads;
  train(params, cfg.task, cfg.rl, cfg.sampler, opts);
  return 0;
}

inline int cmd_eval(const std::string& config_path, const std::string& ckpt,
                    bool use_threshold_head = false) {
  RunConfig cfg = load_config(config_path);
  auto out = resolve_out_dir(cfg);
  DenoiserParams params = load_checkpoint(ckpt);
  EvalReport rep =
      evaluate(params, cfg.task, cfg.sampler, cfg.eval.n, cfg.task.eval_seed,
               use_threshold_head ? &cfg.rl : nullptr);
  write_eval_csv((out / "eval_report.csv").string(), rep);
  write_eval_json((out / "eval_report.json").string(), rep);
  return 0;
}

inline int cmd_frontier(const std::string& config_path, const std::string& ckpt,
                        const std::vector<double>& gammas_override = {},
                        bool use_threshold_head = false) {
  RunConfig cfg = load_config(config_path);
  auto out = resolve_out_dir(cfg);
  DenoiserParams params = load_checkpoint(ckpt);
  const auto& gammas =
      gammas_override.empty() ? cfg.eval.gammas : gammas_override;
  auto pts = frontier(params, cfg.task, cfg.sampler, gammas, cfg.eval.n,
                      cfg.task.eval_seed, use_threshold_head ? &cfg.rl : nullptr);
  write_frontier_csv((out / "frontier.csv").string(), pts);
  write_frontier_svg((out / "frontier.svg").string(), pts);
  return 0;
}

inline int cmd_diag(const std::string& config_path, const std::string& ckpt,
                    const std::string& mode, int n_prompts = 100) {
  RunConfig cfg = load_config(config_path);
  auto out = resolve_out_dir(cfg);
  DenoiserParams params = load_checkpoint(ckpt);
  LikelihoodMode lm;
  if (mode == "true_step") lm.variant = LikelihoodVariant::true_step;
  else if (mode == "mean_field") lm.variant = LikelihoodVariant::mean_field;
  else if (mode == "two_mf") lm.variant = LikelihoodVariant::two_mf;
  else throw std::invalid_argument("diag: unknown mode '" + mode + "'");
  auto insts = generate(cfg.task, n_prompts, cfg.task.eval_seed);
  std::vector<TokenSeq> prompts;
  for (const auto& i : insts) prompts.push_back(i.prompt);
  Rng rng(derive_seed(cfg.seed, "diag"));
  KlByStep kl = kl_by_timestep(params, prompts, cfg.sampler, lm, rng);
  write_kl_csv((out / ("kl_" + mode + ".csv")).string(), kl);
  return 0;
}

}  // namespace mdpo
