#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdpo/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"masked-diffusion sequence lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string ckpt;
  std::string variant_str;
  std::string diag_mode = "mean_field";
  std::vector<double> gammas;
  int diag_prompts = 100;
  int threads = 0;
  bool use_head = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file")
        ->required();
    sub->add_option("--threads", threads, "worker threads (overrides config)");
  };

  auto* pre = app.add_subcommand("pretrain", "train a base denoiser");
  add_common(pre);

  auto* rl = app.add_subcommand("rl-train", "post-train with group-relative PPO");
  add_common(rl);
  rl->add_option("--variant", variant_str, "d1|2mf|2mf_is|joint");
  rl->add_option("--resume", ckpt, "checkpoint to start from")->required();

  auto* ev = app.add_subcommand("eval", "score a checkpoint on held-out prompts");
  add_common(ev);
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_flag("--adaptive-gamma", use_head, "use the learned threshold head");

  auto* fr = app.add_subcommand("frontier", "accuracy/NFE sweep over thresholds");
  add_common(fr);
  fr->add_option("--checkpoint", ckpt)->required();
  fr->add_option("--gammas", gammas, "threshold values to sweep");
  fr->add_flag("--adaptive-gamma", use_head, "also plot the learned head");

  auto* dg = app.add_subcommand("diag", "per-step KL of a factorized surrogate");
  add_common(dg);
  dg->add_option("--checkpoint", ckpt)->required();
  dg->add_option("--mode", diag_mode, "true_step|mean_field|two_mf");
  dg->add_option("--prompts", diag_prompts, "number of held-out prompts");

  CLI11_PARSE(app, argc, argv);

  try {
    auto override_threads = [&](mdpo::RunConfig& cfg) {
      if (threads > 0) cfg.threads = threads;
    };
    if (pre->parsed()) {
      mdpo::RunConfig cfg = mdpo::load_config(config_path);
      override_threads(cfg);
      mdpo::run_pretrain(cfg, mdpo::resolve_out_dir(cfg));
      return 0;
    }
    if (rl->parsed()) {
      mdpo::RunConfig cfg = mdpo::load_config(config_path);
      override_threads(cfg);
      if (!variant_str.empty()) cfg.rl.variant = mdpo::parse_variant(variant_str);
      auto out = mdpo::resolve_out_dir(cfg);
      mdpo::DenoiserParams params = mdpo::load_checkpoint(ckpt);
      const std::string tag = mdpo::variant_name(cfg.rl.variant);
      mdpo::TrainOptions opts;
      opts.metrics_path = (out / ("metrics_" + tag + ".csv")).string();
      opts.checkpoint_path = (out / ("rl_" + tag + ".ckpt")).string();
      opts.threads = cfg.threads;
      mdpo::train(params, cfg.task, cfg.rl, cfg.sampler, opts);
      return 0;
    }
    if (ev->parsed()) return mdpo::cmd_eval(config_path, ckpt, use_head);
    if (fr->parsed()) return mdpo::cmd_frontier(config_path, ckpt, gammas, use_head);
    if (dg->parsed()) return mdpo::cmd_diag(config_path, ckpt, diag_mode, diag_prompts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
