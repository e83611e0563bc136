#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "rankcf/checkpoint.hpp"
#include "rankcf/error.hpp"
#include "rankcf/trainer.hpp"

using namespace rankcf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("rankcf_test_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path.string() : (path / leaf).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 40 users x 25 items, 6..12 distinct items per user, written as
// tab-separated pairs (no rating column)
std::string write_synthetic(const TempDir& dir) {
  Rng rng(99);
  std::ofstream out(dir.str("pairs.tsv"));
  for (int u = 0; u < 40; ++u) {
    std::vector<std::int32_t> items;
    for (std::int32_t i = 0; i < 25; ++i) items.push_back(i);
    rng.shuffle(items);
    const int n = 6 + rng.next_int(7);
    for (int k = 0; k < n; ++k) out << u << '\t' << items[static_cast<std::size_t>(k)] << '\n';
  }
  out.close();
  return dir.str("pairs.tsv");
}

RunConfig synthetic_config(const std::string& data_path, const std::string& out_dir) {
  RunConfig c;
  c.interactions_path = data_path;
  c.rating_threshold.reset();
  c.min_interactions = 3;
  c.protocol = Mode::kInductive;
  c.mu = 0.7;
  c.eta = 0.7;
  c.model.dim = 8;
  c.model.layers = 2;
  c.model.pooling = Pooling::kMean;
  c.model.mode = c.protocol;
  c.loss.variant = LossVariant::kNdcg;
  c.loss.tau = 1.0;
  c.loss.tau_star = 1.0;
  c.sampling.num_pos = 2;
  c.sampling.num_neg = 10;
  c.lr = 0.05;
  c.l2 = 1e-4;
  c.batch_users = 16;
  c.max_epochs = 6;
  c.eval_every = 2;
  c.patience = 10;
  c.eval_k = {5};
  c.seed = 7;
  c.threads = 1;
  c.out_dir = out_dir;
  c.verbose = false;
  return c;
}

Dataset tiny_dataset(const std::vector<std::pair<std::int32_t, std::int32_t>>& edges,
                     std::int32_t num_users, std::int32_t num_items) {
  Dataset d;
  d.num_users = num_users;
  d.num_items = num_items;
  for (std::int32_t u = 0; u < num_users; ++u) d.user_orig.push_back(u);
  for (std::int32_t i = 0; i < num_items; ++i) d.item_orig.push_back(i);
  for (auto [u, i] : edges) d.interactions.push_back({u, i});
  return d;
}

}  // namespace

TEST_CASE("run config survives a json round trip") {
  RunConfig c;
  c.interactions_path = "x.csv";
  c.rating_threshold = 3.5;
  c.protocol = Mode::kTransductive;
  c.model.mode = c.protocol;
  c.model.pooling = Pooling::kSum;
  c.loss.variant = LossVariant::kRecallAtK;
  c.loss.recall_k = {5, 50};
  c.sampling.mode = SamplingMode::kPpr;
  c.sampling.cache_path = "cache.bin";
  c.seed = 123;
  auto j = run_config_to_json(c);
  RunConfig back = run_config_from_json(j);
  CHECK(run_config_to_json(back) == j);
  CHECK(back.protocol == Mode::kTransductive);
  CHECK(back.model.mode == Mode::kTransductive);
  CHECK(back.loss.recall_k == std::vector<int>{5, 50});
  CHECK(back.sampling.mode == SamplingMode::kPpr);
}

TEST_CASE("null rating threshold disables filtering, tau_star follows tau") {
  nlohmann::json j;
  j["data"]["rating_threshold"] = nullptr;
  j["loss"]["tau"] = 0.5;
  RunConfig c = run_config_from_json(j);
  CHECK(!c.rating_threshold.has_value());
  CHECK(c.loss.tau_star == 0.5);

  j["loss"]["tau_star"] = 2.0;
  c = run_config_from_json(j);
  CHECK(c.loss.tau == 0.5);
  CHECK(c.loss.tau_star == 2.0);
}

TEST_CASE("unknown config keys are rejected everywhere") {
  CHECK_THROWS_AS(run_config_from_json({{"learning_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"optim", {{"momentum", 0.9}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"model", {{"width", 3}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"loss", {{"variant", "hinge"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"protocol", "semi"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"seed", "abc"}}), ConfigError);
}

TEST_CASE("config value validation") {
  CHECK_THROWS_AS(run_config_from_json({{"optim", {{"batch_users", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"optim", {{"init_std", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"eval", {{"every", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"sampling", {{"num_pos", 0}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"model", {{"dim", -2}}}}), ConfigError);
}

TEST_CASE("config file loading reports io and parse failures") {
  TempDir dir("cfg");
  CHECK_THROWS_AS(load_run_config(dir.str("absent.json")), IoError);
  {
    std::ofstream bad(dir.str("bad.json"));
    bad << "{ not json";
  }
  CHECK_THROWS_AS(load_run_config(dir.str("bad.json")), ParseError);
  {
    std::ofstream ok(dir.str("ok.json"));
    ok << R"({"seed": 9, "optim": {"lr": 0.01}})";
  }
  RunConfig c = load_run_config(dir.str("ok.json"));
  CHECK(c.seed == 9);
  CHECK(c.lr == 0.01);
}

TEST_CASE("batches sample positives from the user's row without replacement") {
  auto d = tiny_dataset({{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 4}, {2, 0}, {2, 4}}, 3, 5);
  auto g = build_graph(d);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto b = build_batch({0, 1, 2}, g, nullptr, 2, 3, rng);
    REQUIRE(b.users.size() == 3);
    for (const auto& us : b.users) {
      REQUIRE(us.pos.size() == 2);
      REQUIRE(us.neg.size() == 3);
      CHECK(us.pos[0] != us.pos[1]);  // degree >= 2 everywhere
      for (auto p : us.pos) CHECK(g.user_has_item(us.user, p));
      for (auto n : us.neg) {
        CHECK(!g.user_has_item(us.user, n));
        CHECK(n >= 0);
        CHECK(n < 5);
      }
    }
  }
}

TEST_CASE("a user with fewer items than requested repeats positives") {
  auto d = tiny_dataset({{0, 3}, {1, 0}, {1, 1}}, 2, 4);
  auto g = build_graph(d);
  Rng rng(6);
  auto b = build_batch({0}, g, nullptr, 3, 0, rng);
  REQUIRE(b.users[0].pos.size() == 3);
  for (auto p : b.users[0].pos) CHECK(p == 3);
  CHECK(b.users[0].neg.empty());
}

TEST_CASE("batch construction rejects degenerate requests") {
  auto d = tiny_dataset({{0, 0}, {0, 1}, {1, 0}}, 2, 2);
  auto g = build_graph(d);
  Rng rng(7);
  CHECK_THROWS_AS(build_batch({}, g, nullptr, 1, 1, rng), ConfigError);
  CHECK_THROWS_AS(build_batch({0}, g, nullptr, 0, 1, rng), ConfigError);
  CHECK_THROWS_AS(build_batch({5}, g, nullptr, 1, 1, rng), ShapeError);
  // user 0 holds every item, so no uniform negative exists
  CHECK_THROWS_AS(build_batch({0}, g, nullptr, 1, 1, rng), ConfigError);
  // user 1 still has item 1 free
  auto b = build_batch({1}, g, nullptr, 1, 2, rng);
  CHECK(b.users[0].neg == std::vector<std::int32_t>{1, 1});
}

TEST_CASE("sampler-driven negatives come from the sampler's support") {
  auto d = tiny_dataset({{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 3}}, 3, 5);
  auto g = build_graph(d);
  std::unordered_map<std::int32_t, NegativeSampler> samplers;
  for (std::int32_t u = 0; u < 3; ++u) {
    auto p = compute_ppr(g, u, {});
    std::vector<std::int32_t> positives(g.user_nbr.begin() + g.user_ptr[u],
                                        g.user_nbr.begin() + g.user_ptr[u + 1]);
    samplers.emplace(u, build_sampler(p.vec, positives, 1.0));
  }
  Rng rng(8);
  auto b = build_batch({0, 2}, g, &samplers, 1, 50, rng);
  for (const auto& us : b.users)
    for (auto n : us.neg) {
      CHECK(!g.user_has_item(us.user, n));
      CHECK(samplers.at(us.user).prob(n) > 0.0);
    }

  samplers.erase(1);
  CHECK_THROWS_AS(build_batch({1}, g, &samplers, 1, 5, rng), ConfigError);
}

TEST_CASE("early stopping waits out exactly `patience` flat measurements") {
  CHECK(!early_stop({}, 2));
  CHECK(!early_stop({0.1, 0.2, 0.3}, 2));       // still improving
  CHECK(!early_stop({0.3, 0.2}, 2));            // one stale point
  CHECK(early_stop({0.3, 0.2, 0.1}, 2));        // two stale points
  CHECK(early_stop({0.2, 0.3, 0.1, 0.1}, 2));   // best in the middle
  CHECK(!early_stop({0.2, 0.3, 0.1, 0.4}, 2));  // late recovery resets
  CHECK(early_stop({0.5, 0.5, 0.5}, 2));        // ties never count as a beat
  CHECK_THROWS_AS(early_stop({0.1}, 0), ConfigError);
}

TEST_CASE("workspace preparation is deterministic and respects the protocol") {
  TempDir dir("ws");
  auto data_path = write_synthetic(dir);
  RunConfig cfg = synthetic_config(data_path, dir.str("out"));

  Workspace a = prepare_workspace(cfg);
  Workspace b = prepare_workspace(cfg);
  CHECK(a.graph.structure_hash() == b.graph.structure_hash());
  CHECK(a.train_users == b.train_users);
  CHECK(a.train_users.size() == a.inductive.train_users.size());

  cfg.protocol = Mode::kTransductive;
  cfg.model.mode = cfg.protocol;
  Workspace t = prepare_workspace(cfg);
  CHECK(t.graph.num_users == t.data.num_users);
  for (auto u : t.train_users) CHECK(t.graph.user_degree(u) > 0);
}

TEST_CASE("an inductive run trains, checkpoints, and reproduces its test metrics") {
  TempDir dir("e2e");
  auto data_path = write_synthetic(dir);
  RunConfig cfg = synthetic_config(data_path, dir.str("run_a"));

  TrainResult res = train(cfg);
  CHECK(res.epochs_run == cfg.max_epochs);
  CHECK(res.history.size() == static_cast<std::size_t>(res.epochs_run));
  CHECK(res.best_epoch >= 1);
  for (const auto& h : res.history)
    if (h.epoch == res.best_epoch) CHECK(h.evaluated);
  for (const auto& name :
       {"config.json", "split_summary.json", "checkpoint.bin", "history.json", "metrics_val.json",
        "metrics_test.json", "run.log"})
    CHECK(fs::exists(fs::path(cfg.out_dir) / name));

  // metric cutoffs always cover 20 on top of the configured list
  CHECK(res.test.ndcg.count(5) == 1);
  CHECK(res.test.ndcg.count(20) == 1);

  // reloading the checkpoint and re-running the forward pass must land on
  // the recorded test metrics bit for bit
  Checkpoint ck = load_checkpoint(res.checkpoint_path);
  CHECK(ck.meta.model.mode == Mode::kInductive);
  CHECK(ck.meta.seed == cfg.seed);
  CHECK(ck.meta.extra.at("epoch").get<int>() == res.best_epoch);
  Workspace w = prepare_workspace(cfg);
  Forward f = forward(w.graph, ck.e0, cfg.model);
  MetricReport test = evaluate(w.inductive, w.graph, f.layers, f.final, cfg.model, Part::kTest,
                               {5, 20}, 1);
  CHECK(test.to_json() == res.test.to_json());
  CHECK(nlohmann::json::parse(slurp(dir.str("run_a/metrics_test.json"))) == res.test.to_json());

  // identical config, fresh directory: byte-identical artifacts
  RunConfig cfg_b = cfg;
  cfg_b.out_dir = dir.str("run_b");
  TrainResult res_b = train(cfg_b);
  CHECK(slurp(dir.str("run_a/checkpoint.bin")) == slurp(dir.str("run_b/checkpoint.bin")));
  CHECK(slurp(dir.str("run_a/metrics_test.json")) == slurp(dir.str("run_b/metrics_test.json")));
  CHECK(slurp(dir.str("run_a/history.json")) == slurp(dir.str("run_b/history.json")));

  // a different seed changes the weights
  RunConfig cfg_c = cfg;
  cfg_c.out_dir = dir.str("run_c");
  cfg_c.seed = 8;
  TrainResult res_c = train(cfg_c);
  CHECK(slurp(dir.str("run_a/checkpoint.bin")) != slurp(dir.str("run_c/checkpoint.bin")));
}

TEST_CASE("a transductive run reproduces its test metrics from the checkpoint") {
  TempDir dir("e2et");
  auto data_path = write_synthetic(dir);
  RunConfig cfg = synthetic_config(data_path, dir.str("out"));
  cfg.protocol = Mode::kTransductive;
  cfg.model.mode = cfg.protocol;
  cfg.rho = 0.8;
  cfg.max_epochs = 4;
  cfg.loss.variant = LossVariant::kBpr;

  TrainResult res = train(cfg);
  Checkpoint ck = load_checkpoint(res.checkpoint_path);
  CHECK(ck.meta.model.mode == Mode::kTransductive);
  CHECK(ck.e0.user_emb.rows == ck.meta.num_users);

  Workspace w = prepare_workspace(cfg);
  Forward f = forward(w.graph, ck.e0, cfg.model);
  MetricReport test =
      evaluate(w.transductive, w.graph, f.final, cfg.model, Part::kTest, {5, 20}, 1);
  CHECK(test.to_json() == res.test.to_json());
}

TEST_CASE("a run with precomputed walk-mass sampling goes end to end") {
  TempDir dir("e2ep");
  auto data_path = write_synthetic(dir);
  RunConfig cfg = synthetic_config(data_path, dir.str("out"));
  cfg.max_epochs = 2;
  cfg.eval_every = 1;
  cfg.sampling.mode = SamplingMode::kPpr;
  cfg.sampling.cache_path = dir.str("ppr.bin");
  cfg.sampling.top_t = 10;

  // cache missing: the trainer refuses rather than silently recomputing
  CHECK_THROWS_AS(train(cfg), ConfigError);

  Workspace w = prepare_workspace(cfg);
  precompute_and_store(w.graph, w.train_users, cfg.sampling.ppr, cfg.sampling.top_t,
                       cfg.sampling.scale, cfg.sampling.cache_path, 1);
  TrainResult res = train(cfg);
  CHECK(res.epochs_run == 2);
  CHECK(fs::exists(res.checkpoint_path));

  // cache built for a different graph is rejected
  RunConfig other = cfg;
  other.out_dir = dir.str("out2");
  other.seed = 99;  // different split, different training graph
  Workspace w2 = prepare_workspace(other);
  REQUIRE(w2.graph.structure_hash() != w.graph.structure_hash());
  CHECK_THROWS_AS(train(other), ConfigError);
}
