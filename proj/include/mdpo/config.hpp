#pragma once

// Flat key=value run configuration with section-prefixed keys
// (e.g. "sampler.gamma=0.1"). Unknown keys are rejected by name; the file
// round-trips losslessly through parse/serialize.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdpo/denoiser.hpp"
#include "mdpo/rl.hpp"
#include "mdpo/sampler.hpp"
#include "mdpo/tasks.hpp"

namespace mdpo {

struct PretrainConfig {
  int steps = 600;
  int batch = 16;
  double lr = 1e-3;
  int diffusion_steps = 16;  // grid T
  int dataset_size = 2048;
};

struct EvalConfig {
  int n = 200;
  std::vector<double> gammas = {0.05, 0.1, 0.2, 0.5, 1.0};
};

struct RunConfig {
  TaskSpec task = make_task(TaskName::mini_countdown);
  DenoiserConfig denoiser;
  SamplerConfig sampler;
  RLConfig rl;
  PretrainConfig pretrain;
  EvalConfig eval;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
};

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace detail

inline void apply_config_key(RunConfig& c, const std::string& key,
                             const std::string& val) {
  auto as_int = [&] { return std::stoi(val); };
  auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(val)); };
  auto as_dbl = [&] { return std::stod(val); };
  auto as_bool = [&] {
    if (val == "true" || val == "1") return true;
    if (val == "false" || val == "0") return false;
    throw std::invalid_argument("config: bad boolean '" + val + "'");
  };
  if (key == "task.name") {
    auto knobs = c.task;  // keep explicit knobs when name changes defaults
    c.task = make_task(parse_task_name(val));
    c.task.train_seed = knobs.train_seed;
    c.task.eval_seed = knobs.eval_seed;
  }
  else if (key == "task.prompt_len") c.task.prompt_len = as_int();
  else if (key == "task.completion_len") c.task.completion_len = as_int();
  else if (key == "task.operand_min") c.task.operand_min = as_int();
  else if (key == "task.operand_max") c.task.operand_max = as_int();
  else if (key == "task.n_operands") c.task.n_operands = as_int();
  else if (key == "task.min_digits") c.task.min_digits = as_int();
  else if (key == "task.max_digits") c.task.max_digits = as_int();
  else if (key == "task.max_mod") c.task.max_mod = as_int();
  else if (key == "task.train_seed") c.task.train_seed = as_u64();
  else if (key == "task.eval_seed") c.task.eval_seed = as_u64();
  else if (key == "denoiser.max_len") c.denoiser.max_len = as_int();
  else if (key == "denoiser.embed_dim") c.denoiser.embed_dim = as_int();
  else if (key == "denoiser.num_layers") c.denoiser.num_layers = as_int();
  else if (key == "denoiser.num_heads") c.denoiser.num_heads = as_int();
  else if (key == "sampler.strategy") c.sampler.strategy = parse_strategy(val);
  else if (key == "sampler.k") c.sampler.k = as_int();
  else if (key == "sampler.gamma") c.sampler.gamma = as_dbl();
  else if (key == "sampler.block_size") c.sampler.block_size = as_int();
  else if (key == "sampler.max_len") c.sampler.max_len = as_int();
  else if (key == "sampler.temperature") c.sampler.temperature = as_dbl();
  else if (key == "sampler.greedy_tokens") c.sampler.greedy_tokens = as_bool();
  else if (key == "rl.variant") c.rl.variant = parse_variant(val);
  else if (key == "rl.group_size") c.rl.group_size = as_int();
  else if (key == "rl.clip_eps") c.rl.clip_eps = as_dbl();
  else if (key == "rl.is_cap") c.rl.is_cap = as_dbl();
  else if (key == "rl.sigma_explore") c.rl.sigma_explore = as_dbl();
  else if (key == "rl.gamma_max") c.rl.gamma_max = as_dbl();
  else if (key == "rl.gamma_init") c.rl.gamma_init = as_dbl();
  else if (key == "rl.lr") c.rl.lr = as_dbl();
  else if (key == "rl.steps") c.rl.steps = as_int();
  else if (key == "rl.adv_eps") c.rl.adv_eps = as_dbl();
  else if (key == "rl.prompts_per_iter") c.rl.prompts_per_iter = as_int();
  else if (key == "rl.ckpt_every") c.rl.ckpt_every = as_int();
  else if (key == "pretrain.steps") c.pretrain.steps = as_int();
  else if (key == "pretrain.batch") c.pretrain.batch = as_int();
  else if (key == "pretrain.lr") c.pretrain.lr = as_dbl();
  else if (key == "pretrain.diffusion_steps") c.pretrain.diffusion_steps = as_int();
  else if (key == "pretrain.dataset_size") c.pretrain.dataset_size = as_int();
  else if (key == "eval.n") c.eval.n = as_int();
  else if (key == "eval.gammas") c.eval.gammas = detail::parse_double_list(val);
  else if (key == "out_dir") c.out_dir = val;
  else if (key == "seed") c.seed = as_u64();
  else if (key == "threads") c.threads = as_int();
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline RunConfig parse_config_text(std::istream& is) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key=value");
    apply_config_key(c, line.substr(0, eq), line.substr(eq + 1));
  }
  // derived defaults
  c.task.vocab.validate();
  c.denoiser.vocab = c.task.vocab;
  if (c.denoiser.seed == 0) c.denoiser.seed = derive_seed(c.seed, "init");
  if (c.rl.seed == 0) c.rl.seed = derive_seed(c.seed, "rl");
  if (c.sampler.max_len == 16 && c.task.completion_len != 16)
    c.sampler.max_len = c.task.completion_len;
  if (c.denoiser.max_len < c.task.prompt_len + c.sampler.max_len)
    c.denoiser.max_len = c.task.prompt_len + c.sampler.max_len;
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  return parse_config_text(is);
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "task.name=" << task_name_str(c.task.name) << "\n"
     << "task.prompt_len=" << c.task.prompt_len << "\n"
     << "task.completion_len=" << c.task.completion_len << "\n"
     << "task.operand_min=" << c.task.operand_min << "\n"
     << "task.operand_max=" << c.task.operand_max << "\n"
     << "task.n_operands=" << c.task.n_operands << "\n"
     << "task.min_digits=" << c.task.min_digits << "\n"
     << "task.max_digits=" << c.task.max_digits << "\n"
     << "task.max_mod=" << c.task.max_mod << "\n"
     << "task.train_seed=" << c.task.train_seed << "\n"
     << "task.eval_seed=" << c.task.eval_seed << "\n"
     << "denoiser.max_len=" << c.denoiser.max_len << "\n"
     << "denoiser.embed_dim=" << c.denoiser.embed_dim << "\n"
     << "denoiser.num_layers=" << c.denoiser.num_layers << "\n"
     << "denoiser.num_heads=" << c.denoiser.num_heads << "\n"
     << "sampler.strategy=" << strategy_name(c.sampler.strategy) << "\n"
     << "sampler.k=" << c.sampler.k << "\n"
     << "sampler.gamma=" << c.sampler.gamma << "\n"
     << "sampler.block_size=" << c.sampler.block_size << "\n"
     << "sampler.max_len=" << c.sampler.max_len << "\n"
     << "sampler.temperature=" << c.sampler.temperature << "\n"
     << "sampler.greedy_tokens=" << (c.sampler.greedy_tokens ? "true" : "false")
     << "\n"
     << "rl.variant=" << variant_name(c.rl.variant) << "\n"
     << "rl.group_size=" << c.rl.group_size << "\n"
     << "rl.clip_eps=" << c.rl.clip_eps << "\n"
     << "rl.is_cap=" << c.rl.is_cap << "\n"
     << "rl.sigma_explore=" << c.rl.sigma_explore << "\n"
     << "rl.gamma_max=" << c.rl.gamma_max << "\n"
     << "rl.gamma_init=" << c.rl.gamma_init << "\n"
     << "rl.lr=" << c.rl.lr << "\n"
     << "rl.steps=" << c.rl.steps << "\n"
     << "rl.adv_eps=" << c.rl.adv_eps << "\n"
     << "rl.prompts_per_iter=" << c.rl.prompts_per_iter << "\n"
     << "rl.ckpt_every=" << c.rl.ckpt_every << "\n"
     << "pretrain.steps=" << c.pretrain.steps << "\n"
     << "pretrain.batch=" << c.pretrain.batch << "\n"
     << "pretrain.lr=" << c.pretrain.lr << "\n"
     << "pretrain.diffusion_steps=" << c.pretrain.diffusion_steps << "\n"
     << "pretrain.dataset_size=" << c.pretrain.dataset_size << "\n"
     << "eval.n=" << c.eval.n << "\n"
     << "eval.gammas=" << detail::join_doubles(c.eval.gammas) << "\n"
     << "out_dir=" << c.out_dir << "\n"
     << "seed=" << c.seed << "\n"
     << "threads=" << c.threads << "\n";
  return os.str();
}

}  // namespace mdpo
