#pragma once

// Synthetic verifiable-reward tasks: expression search (mini_countdown),
// digit sorting, and modular arithmetic. Rewards are exact {0,1} verifiers
// that never throw on garbage completions.

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdpo/mdm.hpp"
#include "mdpo/rng.hpp"

namespace mdpo {

enum class TaskName { mini_countdown, digit_sort, mod_arith };

inline std::string task_name_str(TaskName t) {
  switch (t) {
    case TaskName::mini_countdown: return "mini_countdown";
    case TaskName::digit_sort: return "digit_sort";
    case TaskName::mod_arith: return "mod_arith";
  }
  return "?";
}

inline TaskName parse_task_name(const std::string& s) {
  if (s == "mini_countdown") return TaskName::mini_countdown;
  if (s == "digit_sort") return TaskName::digit_sort;
  if (s == "mod_arith") return TaskName::mod_arith;
  throw std::invalid_argument("unknown task '" + s + "'");
}

// Shared symbol table: digits 0-9, '+', '-', '*', '%', '=', eos, pad.
namespace sym {
inline constexpr int kPlus = 10;
inline constexpr int kMinus = 11;
inline constexpr int kTimes = 12;
inline constexpr int kMod = 13;
inline constexpr int kEq = 14;
inline constexpr int kEos = 15;
inline constexpr int kPad = 16;
inline constexpr int kVocabSize = 17;
}  // namespace sym

inline Vocab task_vocab() {
  Vocab v;
  v.size = sym::kVocabSize;
  v.mask_id = sym::kVocabSize;
  v.eos_id = sym::kEos;
  v.pad_id = sym::kPad;
  return v;
}

struct TaskSpec {
  TaskName name = TaskName::mini_countdown;
  Vocab vocab = task_vocab();
  int prompt_len = 8;
  int completion_len = 8;
  // difficulty knobs
  int operand_min = 1, operand_max = 9;  // mini_countdown
  int n_operands = 3;
  int min_digits = 3, max_digits = 6;    // digit_sort
  int max_mod = 13;                      // mod_arith
  std::uint64_t train_seed = 1;
  std::uint64_t eval_seed = 2;
};

inline TaskSpec make_task(TaskName name) {
  TaskSpec s;
  s.name = name;
  switch (name) {
    case TaskName::mini_countdown:
      s.prompt_len = 8;       // a b c = t t t pad
      s.completion_len = 8;   // expression + eos + pads
      break;
    case TaskName::digit_sort:
      s.prompt_len = 8;       // up to max_digits digits, '=', pads
      s.completion_len = 8;
      break;
    case TaskName::mod_arith:
      s.prompt_len = 8;       // a + b % m m =
      s.completion_len = 4;   // residue digits + eos + pads
      break;
  }
  return s;
}

struct Instance {
  TokenSeq prompt;
  // verifier payload
  std::vector<int> operands;  // mini_countdown
  long target = 0;            // mini_countdown
  std::vector<int> digits;    // digit_sort
  int a = 0, b = 0, m = 1;    // mod_arith
};

namespace detail {

inline std::vector<int> digits_of(long v) {
  if (v == 0) return {0};
  std::vector<int> d;
  for (long x = v; x > 0; x /= 10) d.push_back(static_cast<int>(x % 10));
  std::reverse(d.begin(), d.end());
  return d;
}

// All values reachable from a non-empty sub-multiset of the operands under
// +, -, * evaluated left to right.
inline std::vector<long> reachable_values(const std::vector<int>& ops) {
  std::vector<long> out;
  const int n = static_cast<int>(ops.size());
  std::vector<int> perm;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::array<int, 3> opset = {sym::kPlus, sym::kMinus, sym::kTimes};
  // enumerate ordered selections, then operator choices
  std::function<void(long, int)> extend = [&](long value, int depth) {
    out.push_back(value);
    if (depth == n) return;
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      for (int op : opset) {
        long v2 = value;
        if (op == sym::kPlus) v2 += ops[static_cast<std::size_t>(i)];
        else if (op == sym::kMinus) v2 -= ops[static_cast<std::size_t>(i)];
        else v2 *= ops[static_cast<std::size_t>(i)];
        extend(v2, depth + 1);
      }
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  for (int i = 0; i < n; ++i) {
    used[static_cast<std::size_t>(i)] = true;
    extend(ops[static_cast<std::size_t>(i)], 1);
    used[static_cast<std::size_t>(i)] = false;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void pad_to(TokenSeq& seq, int len) {
  if (static_cast<int>(seq.size()) > len)
    throw std::logic_error("task: rendered sequence exceeds fixed length");
  seq.resize(static_cast<std::size_t>(len), sym::kPad);
}

}  // namespace detail

inline Instance make_instance(const TaskSpec& spec, Rng& rng) {
  Instance inst;
  switch (spec.name) {
    case TaskName::mini_countdown: {
      for (int tries = 0; tries < 100; ++tries) {
        inst.operands.clear();
        for (int i = 0; i < spec.n_operands; ++i)
          inst.operands.push_back(rng.uniform_int(spec.operand_min, spec.operand_max));
        auto vals = detail::reachable_values(inst.operands);
        std::vector<long> pos;
        for (long v : vals)
          if (v >= 1 && v <= 999) pos.push_back(v);
        if (pos.empty()) continue;
        inst.target = pos[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(pos.size()) - 1))];
        inst.prompt = TokenSeq(inst.operands.begin(), inst.operands.end());
        inst.prompt.push_back(sym::kEq);
        for (int d : detail::digits_of(inst.target)) inst.prompt.push_back(d);
        detail::pad_to(inst.prompt, spec.prompt_len);
        return inst;
      }
      throw std::runtime_error("mini_countdown: reachable-target retries exhausted");
    }
    case TaskName::digit_sort: {
      const int n = rng.uniform_int(spec.min_digits, spec.max_digits);
      for (int i = 0; i < n; ++i) inst.digits.push_back(rng.uniform_int(0, 9));
      inst.prompt = TokenSeq(inst.digits.begin(), inst.digits.end());
      inst.prompt.push_back(sym::kEq);
      detail::pad_to(inst.prompt, spec.prompt_len);
      return inst;
    }
    case TaskName::mod_arith: {
      inst.a = rng.uniform_int(0, 9);
      inst.b = rng.uniform_int(0, 9);
      inst.m = rng.uniform_int(2, spec.max_mod);
      inst.prompt = {inst.a, sym::kPlus, inst.b, sym::kMod};
      for (int d : detail::digits_of(inst.m)) inst.prompt.push_back(d);
      inst.prompt.push_back(sym::kEq);
      detail::pad_to(inst.prompt, spec.prompt_len);
      return inst;
    }
  }
  throw std::logic_error("make_instance: unreachable");
}

inline std::vector<Instance> generate(const TaskSpec& spec, int n,
                                      std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate: n must be >= 1");
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "instance", static_cast<std::uint64_t>(i)));
    out.push_back(make_instance(spec, rng));
  }
  return out;
}

// Tokens strictly before the first eos (whole length if none).
inline int effective_tokens(const TokenSeq& completion, const Vocab& vocab) {
  for (std::size_t i = 0; i < completion.size(); ++i)
    if (completion[i] == vocab.eos_id) return static_cast<int>(i);
  return static_cast<int>(completion.size());
}

namespace detail {

inline std::optional<long> parse_number(const TokenSeq& toks, std::size_t begin,
                                        std::size_t end) {
  if (begin >= end) return std::nullopt;
  if (end - begin > 1 && toks[begin] == 0) return std::nullopt;  // leading zero
  long v = 0;
  for (std::size_t i = begin; i < end; ++i) {
    if (toks[i] < 0 || toks[i] > 9) return std::nullopt;
    v = v * 10 + toks[i];
    if (v > 1000000) return std::nullopt;
  }
  return v;
}

// Parse "d (op d)*" with single-digit operands, evaluate left to right, and
// check the operand multiset against the instance's.
inline std::optional<long> eval_expression(const TokenSeq& toks,
                                           std::vector<int> available) {
  if (toks.empty() || toks.size() % 2 == 0) return std::nullopt;
  auto take = [&available](int d) {
    auto it = std::find(available.begin(), available.end(), d);
    if (it == available.end()) return false;
    available.erase(it);
    return true;
  };
  if (toks[0] < 0 || toks[0] > 9 || !take(toks[0])) return std::nullopt;
  long value = toks[0];
  for (std::size_t i = 1; i < toks.size(); i += 2) {
    const int op = toks[i];
    const int d = toks[i + 1];
    if (d < 0 || d > 9 || !take(d)) return std::nullopt;
    if (op == sym::kPlus) value += d;
    else if (op == sym::kMinus) value -= d;
    else if (op == sym::kTimes) value *= d;
    else return std::nullopt;
  }
  return value;
}

}  // namespace detail

inline double reward(const TaskSpec& spec, const Instance& inst,
                     const TokenSeq& completion) {
  const int n = effective_tokens(completion, spec.vocab);
  TokenSeq body(completion.begin(), completion.begin() + n);
  switch (spec.name) {
    case TaskName::mini_countdown: {
      auto v = detail::eval_expression(body, inst.operands);
      return (v && *v == inst.target) ? 1.0 : 0.0;
    }
    case TaskName::digit_sort: {
      std::vector<int> sorted = inst.digits;
      std::sort(sorted.begin(), sorted.end());
      if (body.size() != sorted.size()) return 0.0;
      for (std::size_t i = 0; i < body.size(); ++i)
        if (body[i] != sorted[i]) return 0.0;
      return 1.0;
    }
    case TaskName::mod_arith: {
      auto v = detail::parse_number(body, 0, body.size());
      return (v && *v == (inst.a + inst.b) % inst.m) ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

// A reference completion: the exact answer followed by eos and padding.
// mini_countdown instead renders a RANDOM well-formed expression over the
// operands, so a pretrained base model learns the format, not the answer.
inline TokenSeq reference_completion(const TaskSpec& spec, const Instance& inst,
                                     Rng& rng) {
  TokenSeq body;
  switch (spec.name) {
    case TaskName::mini_countdown: {
      std::vector<int> pool = inst.operands;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        int j = rng.uniform_int(static_cast<int>(i),
                                static_cast<int>(pool.size()) - 1);
        std::swap(pool[i], pool[static_cast<std::size_t>(j)]);
      }
      const int used = rng.uniform_int(1, static_cast<int>(pool.size()));
      const std::array<int, 3> opset = {sym::kPlus, sym::kMinus, sym::kTimes};
      body.push_back(pool[0]);
      for (int i = 1; i < used; ++i) {
        body.push_back(opset[static_cast<std::size_t>(rng.uniform_int(0, 2))]);
        body.push_back(pool[static_cast<std::size_t>(i)]);
      }
      break;
    }
    case TaskName::digit_sort: {
      body.assign(inst.digits.begin(), inst.digits.end());
      std::sort(body.begin(), body.end());
      break;
    }
    case TaskName::mod_arith: {
      for (int d : detail::digits_of((inst.a + inst.b) % inst.m))
        body.push_back(d);
      break;
    }
  }
  body.push_back(sym::kEos);
  detail::pad_to(body, spec.completion_len);
  return body;
}

// ---- dataset persistence (JSON lines) ----

inline void dump_instances(const std::string& path, const TaskSpec& spec,
                           const std::vector<Instance>& insts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("dump_instances: cannot open " + path);
  for (const auto& inst : insts) {
    nlohmann::json j;
    j["task"] = task_name_str(spec.name);
    j["prompt"] = inst.prompt;
    switch (spec.name) {
      case TaskName::mini_countdown:
        j["operands"] = inst.operands;
        j["target"] = inst.target;
        break;
      case TaskName::digit_sort:
        j["digits"] = inst.digits;
        break;
      case TaskName::mod_arith:
        j["a"] = inst.a;
        j["b"] = inst.b;
        j["m"] = inst.m;
        break;
    }
    os << j.dump() << "\n";
  }
}

inline std::vector<Instance> load_instances(const std::string& path,
                                            const TaskSpec& spec) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_instances: cannot open " + path);
  std::vector<Instance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    Instance inst;
    inst.prompt = j.at("prompt").get<TokenSeq>();
    switch (spec.name) {
      case TaskName::mini_countdown:
        inst.operands = j.at("operands").get<std::vector<int>>();
        inst.target = j.at("target").get<long>();
        break;
      case TaskName::digit_sort:
        inst.digits = j.at("digits").get<std::vector<int>>();
        break;
      case TaskName::mod_arith:
        inst.a = j.at("a").get<int>();
        inst.b = j.at("b").get<int>();
        inst.m = j.at("m").get<int>();
        break;
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace mdpo
