#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "mdpo/eval.hpp"

using namespace mdpo;

static DenoiserParams task_model(std::uint64_t seed = 61) {
  DenoiserConfig cfg;
  cfg.vocab = task_vocab();
  cfg.max_len = 16;
  cfg.embed_dim = 16;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.seed = seed;
  return init_params(cfg);
}

TEST_CASE("evaluation is deterministic and accuracy is the mean reward") {
  DenoiserParams p = task_model();
  TaskSpec task = make_task(TaskName::digit_sort);
  SamplerConfig cfg;
  cfg.strategy = Strategy::topk_confidence;
  cfg.k = 2;
  cfg.max_len = task.completion_len;
  cfg.block_size = 4;
  EvalReport a = evaluate(p, task, cfg, 20, 7);
  EvalReport b = evaluate(p, task, cfg, 20, 7);
  REQUIRE(a.rows.size() == 20);
  double mean = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].reward == b.rows[i].reward);
    CHECK(a.rows[i].nfe == b.rows[i].nfe);
    mean += a.rows[i].reward;
  }
  CHECK(a.accuracy == doctest::Approx(mean / 20));
  CHECK_THROWS(evaluate(p, task, cfg, 0, 7));
}

TEST_CASE("frontier: one point per threshold plus the adaptive one") {
  DenoiserParams p = task_model(67);
  TaskSpec task = make_task(TaskName::digit_sort);
  SamplerConfig cfg;
  cfg.strategy = Strategy::eb;
  cfg.max_len = task.completion_len;
  cfg.block_size = 4;
  std::vector<double> gammas = {0.1, 0.5, 2.0};
  auto pts = frontier(p, task, cfg, gammas, 10, 7);
  REQUIRE(pts.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(pts[i].gamma == gammas[i]);
    CHECK(!pts[i].adaptive);
    CHECK(pts[i].nfe_mean >= 1.0);
  }
  // looser budgets can only need fewer or equal forwards
  CHECK(pts[2].nfe_mean <= pts[0].nfe_mean);
  RLConfig head;
  auto pts2 = frontier(p, task, cfg, gammas, 10, 7, &head);
  REQUIRE(pts2.size() == 4);
  CHECK(pts2[3].adaptive);
  CHECK_THROWS(frontier(p, task, cfg, {}, 10, 7));
}

TEST_CASE("exact enumeration: both trajectory distributions have unit mass") {
  DenoiserConfig cfg;
  cfg.vocab.size = 5;  // digits 0-2, eos, pad: parseable by mod_arith
  cfg.vocab.mask_id = cfg.vocab.size;
  cfg.vocab.eos_id = 3;
  cfg.vocab.pad_id = 4;
  cfg.max_len = 10;
  cfg.embed_dim = 16;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.seed = 71;
  DenoiserParams p = init_params(cfg);
  TaskSpec task = make_task(TaskName::mod_arith);
  task.vocab = cfg.vocab;
  Instance inst;
  inst.a = 1;
  inst.b = 1;
  inst.m = 2;
  inst.prompt = {1, 2, 1, 0};
  PinskerReport rep = pinsker_check(p, task, inst, 4);
  CHECK(rep.mass_true == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.mass_surrogate == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.kl >= 0.0);
  CHECK(rep.holds);
  CHECK_THROWS(pinsker_check(p, task, inst, 7));
}

TEST_CASE("variant comparison reads tail-window rewards and pairs seeds") {
  auto dir = std::filesystem::temp_directory_path();
  auto write_metrics = [&](const std::string& name, std::vector<double> rewards) {
    auto path = dir / name;
    std::ofstream os(path);
    os << "iter,variant,reward_mean,reward_std,accuracy,nfe_mean,ets_mean,"
          "gamma_mean,loss\n";
    for (std::size_t i = 0; i < rewards.size(); ++i)
      os << i << ",x," << rewards[i] << ",0,0,0,0,0,0\n";
    return path.string();
  };
  auto a0 = write_metrics("mdpo_cmp_a0.csv", {0.0, 0.6, 0.8});
  auto a1 = write_metrics("mdpo_cmp_a1.csv", {0.0, 0.5, 0.7});
  auto b0 = write_metrics("mdpo_cmp_b0.csv", {0.0, 0.3, 0.5});
  auto b1 = write_metrics("mdpo_cmp_b1.csv", {0.0, 0.2, 0.4});
  CHECK(final_reward_of_csv(a0, 2) == doctest::Approx(0.7));
  auto rep = compare_variants({{"a", {a0, a1}}, {"b", {b0, b1}}});
  REQUIRE(rep.variants.size() == 2);
  REQUIRE(rep.paired_diffs.size() == 2);
  CHECK(rep.variants[0].mean > rep.variants[1].mean);
  for (double d : rep.paired_diffs) CHECK(d > 0.0);
  CHECK_THROWS(compare_variants({}));
  for (const auto& f : {a0, a1, b0, b1}) std::filesystem::remove(f);
}

TEST_CASE("report files are written with the documented headers") {
  DenoiserParams p = task_model(73);
  TaskSpec task = make_task(TaskName::digit_sort);
  SamplerConfig cfg;
  cfg.strategy = Strategy::eb;
  cfg.gamma = 0.5;
  cfg.max_len = task.completion_len;
  cfg.block_size = 4;
  EvalReport rep = evaluate(p, task, cfg, 5, 7);
  auto dir = std::filesystem::temp_directory_path();
  auto csv = dir / "mdpo_eval.csv";
  auto json_path = dir / "mdpo_eval.json";
  write_eval_csv(csv.string(), rep);
  write_eval_json(json_path.string(), rep);
  std::ifstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header == "index,reward,nfe,ets,gamma");
  std::ifstream js(json_path);
  nlohmann::json j;
  js >> j;
  CHECK(j.at("accuracy").get<double>() == doctest::Approx(rep.accuracy));
  auto pts = frontier(p, task, cfg, {0.2, 1.0}, 5, 7);
  auto fcsv = dir / "mdpo_frontier.csv";
  auto fsvg = dir / "mdpo_frontier.svg";
  write_frontier_csv(fcsv.string(), pts);
  write_frontier_svg(fsvg.string(), pts);
  std::ifstream fs(fcsv);
  std::getline(fs, header);
  CHECK(header == "gamma,accuracy,nfe_mean,adaptive");
  std::ifstream svg(fsvg);
  std::string all((std::istreambuf_iterator<char>(svg)),
                  std::istreambuf_iterator<char>());
  CHECK(all.find("<svg") != std::string::npos);
  CHECK(all.find("circle") != std::string::npos);
  for (const auto& f : {csv, json_path, fcsv, fsvg}) std::filesystem::remove(f);
}
