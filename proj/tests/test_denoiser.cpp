#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fd_check.hpp"
#include "mdpo/checkpoint.hpp"
#include "mdpo/denoiser.hpp"
#include "mdpo/optimizer.hpp"
#include "mdpo/pretrain.hpp"

using namespace mdpo;

static DenoiserConfig small_cfg() {
  DenoiserConfig cfg;
  cfg.vocab.size = 7;
  cfg.vocab.mask_id = cfg.vocab.size;
  cfg.vocab.eos_id = 5;
  cfg.vocab.pad_id = 6;
  cfg.max_len = 10;
  cfg.embed_dim = 16;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.seed = 42;
  return cfg;
}

TEST_CASE("init: threshold row starts at zero, layernorm gains at one") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  for (int i = 0; i < cfg.embed_dim; ++i)
    CHECK(p.values[p.layout.thresh_w + std::size_t(i)] == 0.0);
  CHECK(p.values[p.layout.blocks[0].ln1_g] == 1.0);
}

TEST_CASE("config validation rejects bad head splits") {
  auto cfg = small_cfg();
  cfg.num_heads = 3;  // 16 % 3 != 0
  CHECK_THROWS(init_params(cfg));
}

TEST_CASE("forward is deterministic and shape-correct") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  TokenSeq toks = {1, 2, int(cfg.vocab.mask_id), 4};
  std::vector<std::uint8_t> is_prompt = {1, 1, 0, 0};
  auto a = forward(p, toks, is_prompt);
  auto b = forward(p, toks, is_prompt);
  REQUIRE(a.logits.size() == toks.size() * cfg.vocab.size);
  REQUIRE(a.pooled.size() == std::size_t(cfg.embed_dim));
  for (std::size_t i = 0; i < a.logits.size(); ++i)
    CHECK(a.logits[i] == b.logits[i]);
  for (double v : a.logits) CHECK(std::isfinite(v));
}

TEST_CASE("backward matches finite differences through the full stack") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  TokenSeq toks = {1, 2, int(cfg.vocab.mask_id), 4, int(cfg.vocab.mask_id)};
  std::vector<std::uint8_t> is_prompt = {1, 1, 0, 0, 0};
  const std::size_t L = toks.size(), V = cfg.vocab.size;

  // loss = sum_i c_i * logits_i with fixed pseudo-random coefficients
  std::vector<double> coef(L * V);
  for (std::size_t i = 0; i < coef.size(); ++i)
    coef[i] = std::sin(0.7 * double(i + 1));
  auto loss_fn = [&]() {
    auto outp = forward(p, toks, is_prompt);
    double s = 0;
    for (std::size_t i = 0; i < coef.size(); ++i) s += coef[i] * outp.logits[i];
    return s;
  };
  ForwardCache cache;
  forward(p, toks, is_prompt, &cache);
  std::vector<double> grad(p.size(), 0.0);
  backward(p, cache, coef, grad);

  auto idx = mdpo_test::spread_indices(p.size(), 300);
  auto rep = mdpo_test::fd_check(p, grad, loss_fn, idx);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("pooled path carries no gradient through backward") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  // give thresh_w nonzero values: they must still receive zero gradient
  for (int i = 0; i < cfg.embed_dim; ++i)
    p.values[p.layout.thresh_w + std::size_t(i)] = 0.3;
  TokenSeq toks = {1, int(cfg.vocab.mask_id)};
  std::vector<std::uint8_t> is_prompt = {1, 0};
  ForwardCache cache;
  auto outp = forward(p, toks, is_prompt, &cache);
  std::vector<double> dlogits(toks.size() * cfg.vocab.size, 1.0);
  std::vector<double> grad(p.size(), 0.0);
  backward(p, cache, dlogits, grad);
  for (int i = 0; i < cfg.embed_dim; ++i)
    CHECK(grad[p.layout.thresh_w + std::size_t(i)] == 0.0);
  (void)outp;
}

TEST_CASE("adam ascends the objective it is given") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  AdamState st(p.size());
  std::vector<double> g(p.size(), 0.0);
  g[5] = 1.0;
  double before = p.values[5];
  adam_step(p, g, st, 0.01);
  CHECK(p.values[5] > before);
  g[5] = std::nan("");
  CHECK_THROWS(adam_step(p, g, st, 0.01));
}

TEST_CASE("checkpoint round-trips parameters and optimizer state") {
  auto cfg = small_cfg();
  DenoiserParams p = init_params(cfg);
  AdamState st(p.size());
  std::vector<double> g(p.size(), 0.25);
  adam_step(p, g, st, 0.01);
  auto path = std::filesystem::temp_directory_path() / "mdpo_ckpt_test.bin";
  save_checkpoint(path.string(), p, &st);
  AdamState st2(1);
  DenoiserParams q = load_checkpoint(path.string(), &st2);
  REQUIRE(q.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(q.values[i] == doctest::Approx(p.values[i]).epsilon(1e-6));
  CHECK(st2.step == st.step);
  CHECK(st2.m.size() == st.m.size());

  // truncation must be detected
  auto bad = std::filesystem::temp_directory_path() / "mdpo_ckpt_trunc.bin";
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(bad.string(), &st2));
  std::filesystem::remove(path);
  std::filesystem::remove(bad);
}

TEST_CASE("masked-denoising training reduces held-out cross entropy by half") {
  DenoiserConfig cfg;
  cfg.vocab.size = 7;
  cfg.vocab.mask_id = cfg.vocab.size;
  cfg.vocab.eos_id = 5;
  cfg.vocab.pad_id = 6;
  cfg.max_len = 8;
  cfg.embed_dim = 24;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.seed = 3;
  DenoiserParams p = init_params(cfg);
  AdamState st(p.size());
  NoiseSchedule sched = build_schedule("linear", 8);

  // toy structure: completion is the prompt reversed
  auto make_example = [&](Rng& r) {
    TokenSeq prompt(4), comp(4);
    for (int i = 0; i < 4; ++i) prompt[i] = r.uniform_int(0, 4);
    for (int i = 0; i < 4; ++i) comp[i] = prompt[3 - i];
    return PretrainExample{prompt, comp};
  };
  Rng dr(derive_seed(99, "data"));
  std::vector<PretrainExample> train, held;
  for (int i = 0; i < 256; ++i) train.push_back(make_example(dr));
  for (int i = 0; i < 64; ++i) held.push_back(make_example(dr));

  Rng er(derive_seed(99, "eval"));
  double ce0 = heldout_masked_ce(p, held, sched, er);
  Rng tr(derive_seed(99, "train"));
  for (int step = 0; step < 300; ++step) {
    std::vector<PretrainExample> batch;
    for (int b = 0; b < 16; ++b)
      batch.push_back(train[std::size_t(tr.uniform_int(0, 255))]);
    auto res = pretrain_step(p, batch, sched, tr);
    for (auto& gg : res.grad) gg = -gg;
    adam_step(p, res.grad, st, 1e-3);
  }
  Rng er2(derive_seed(99, "eval"));
  double ce1 = heldout_masked_ce(p, held, sched, er2);
  CHECK(ce1 < 0.5 * ce0);
}
