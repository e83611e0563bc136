// Command-line front end: split / ppr / train / eval / topk, all driven by
// one JSON config file with flag overrides for seed, out_dir, and threads.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rankcf/checkpoint.hpp"
#include "rankcf/error.hpp"
#include "rankcf/evaluate.hpp"
#include "rankcf/trainer.hpp"

namespace fs = std::filesystem;
using namespace rankcf;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON config file")->required();
  app->add_option("--seed", c.seed, "override the config seed");
  app->add_option("--out-dir", c.out_dir, "override the config output directory");
  app->add_option("--threads", c.threads, "override the config thread count");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = load_run_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out_dir) cfg.out_dir = *c.out_dir;
  if (c.threads) cfg.threads = *c.threads;
  if (cfg.out_dir.empty()) throw ConfigError("out_dir missing (config or --out-dir)");
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

int cmd_split(const Common& c) {
  RunConfig cfg = resolve(c);
  Workspace w = prepare_workspace(cfg);
  fs::create_directories(cfg.out_dir);
  const fs::path manifest = fs::path(cfg.out_dir) / "split_manifest.tsv";
  std::string summary;
  if (cfg.protocol == Mode::kInductive) {
    write_inductive_manifest(w.inductive, manifest.string());
    summary = inductive_summary_json(w.inductive);
  } else {
    write_transductive_manifest(w.transductive, manifest.string());
    summary = transductive_summary_json(w.transductive);
  }
  write_text(fs::path(cfg.out_dir) / "split_summary.json", summary + "\n");
  std::cout << summary << "\n";
  std::cerr << "wrote " << manifest.string() << "\n";
  return 0;
}

int cmd_ppr(const Common& c) {
  RunConfig cfg = resolve(c);
  std::string cache = cfg.sampling.cache_path;
  if (cache.empty()) cache = (fs::path(cfg.out_dir) / "ppr_cache.bin").string();
  Workspace w = prepare_workspace(cfg);
  fs::create_directories(fs::path(cache).parent_path());
  PprCache out = precompute_and_store(w.graph, w.train_users, cfg.sampling.ppr,
                                      cfg.sampling.top_t, cfg.sampling.scale, cache, cfg.threads);
  nlohmann::json j{{"cache", cache},
                   {"users", out.users.size()},
                   {"alpha", out.cfg.alpha},
                   {"top_t", out.top_t},
                   {"graph_hash", out.graph_hash}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  RunConfig cfg = resolve(c);
  TrainResult res = train(cfg);
  nlohmann::json j{{"best_epoch", res.best_epoch},
                   {"epochs_run", res.epochs_run},
                   {"checkpoint", res.checkpoint_path},
                   {"val", res.best_val.to_json(false)},
                   {"test", res.test.to_json(false)}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

// Rebuilds the deterministic split, loads the checkpointed embeddings, and
// scores the requested part.
int cmd_eval(const Common& c, const std::string& part_name, const std::string& checkpoint,
             bool per_user) {
  RunConfig cfg = resolve(c);
  const Part part = part_name == "val" ? Part::kValidation : Part::kTest;
  std::string ck_path = checkpoint;
  if (ck_path.empty()) ck_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();

  Checkpoint ck = load_checkpoint(ck_path);
  if (ck.meta.model.mode != cfg.protocol)
    throw ConfigError("checkpoint protocol does not match the config");
  Workspace w = prepare_workspace(cfg);
  if (ck.meta.num_users != w.graph.num_users || ck.meta.num_items != w.graph.num_items)
    throw ConfigError("checkpoint shape does not match the split");

  std::vector<int> klist = cfg.eval_k;
  klist.push_back(20);
  std::sort(klist.begin(), klist.end());
  klist.erase(std::unique(klist.begin(), klist.end()), klist.end());

  Forward f = forward(w.graph, ck.e0, ck.meta.model);
  MetricReport rep =
      cfg.protocol == Mode::kInductive
          ? evaluate(w.inductive, w.graph, f.layers, f.final, ck.meta.model, part, klist,
                     cfg.threads)
          : evaluate(w.transductive, w.graph, f.final, ck.meta.model, part, klist, cfg.threads);
  std::cout << rep.to_json(per_user).dump(2) << "\n";
  return 0;
}

// Per-user ranked lists with original ids, for qualitative inspection.
int cmd_topk(const Common& c, const std::string& checkpoint, int k, int max_users,
             const std::string& out_path) {
  RunConfig cfg = resolve(c);
  std::string ck_path = checkpoint;
  if (ck_path.empty()) ck_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
  Checkpoint ck = load_checkpoint(ck_path);
  Workspace w = prepare_workspace(cfg);
  Forward f = forward(w.graph, ck.e0, ck.meta.model);
  auto candidates = covered_items(w.graph);

  struct Row {
    std::int32_t user;
    std::vector<std::int32_t> seen;
  };
  std::vector<Row> rows;
  if (cfg.protocol == Mode::kInductive) {
    for (auto u : w.inductive.test_users) rows.push_back({u, w.inductive.fold_in[u]});
  } else {
    auto train_items = w.transductive.train.items_by_user();
    for (std::int32_t u = 0; u < w.graph.num_users; ++u)
      if (w.graph.user_degree(u) > 0) rows.push_back({u, train_items[u]});
  }
  if (max_users > 0 && static_cast<int>(rows.size()) > max_users)
    rows.resize(static_cast<std::size_t>(max_users));

  const Dataset& d = w.data;
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : rows) {
    std::vector<double> scores(static_cast<std::size_t>(w.graph.num_items), 0.0);
    if (cfg.protocol == Mode::kInductive) {
      auto uv = infer_user(row.seen, f.layers, w.graph, ck.meta.model.pooling);
      for (std::int32_t i = 0; i < w.graph.num_items; ++i)
        scores[static_cast<std::size_t>(i)] =
            dot(uv, {f.final.item_emb.row(i), static_cast<std::size_t>(f.final.dim)});
    } else {
      const double* uv = f.final.user_emb.row(row.user);
      for (std::int32_t i = 0; i < w.graph.num_items; ++i)
        scores[static_cast<std::size_t>(i)] =
            dot({uv, static_cast<std::size_t>(f.final.dim)},
                {f.final.item_emb.row(i), static_cast<std::size_t>(f.final.dim)});
    }
    auto ranking = rank_all_items(row.user, scores,  candidates,
                                  {row.seen.begin(), row.seen.end()});
    nlohmann::json items = nlohmann::json::array();
    const int n = std::min<int>(k, static_cast<int>(ranking.ranked_items.size()));
    for (int r = 0; r < n; ++r) {
      const auto item = ranking.ranked_items[static_cast<std::size_t>(r)];
      items.push_back({{"item", d.item_orig[static_cast<std::size_t>(item)]},
                       {"score", scores[static_cast<std::size_t>(item)]}});
    }
    out.push_back({{"user", d.user_orig[static_cast<std::size_t>(row.user)]}, {"items", items}});
  }

  const std::string text = out.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph collaborative filtering trainer"};
  app.require_subcommand(1);

  Common c_split, c_ppr, c_train, c_eval, c_topk;
  auto* split = app.add_subcommand("split", "materialize the train/eval split and its manifest");
  add_common(split, c_split);
  auto* ppr = app.add_subcommand("ppr", "precompute the negative-sampling walk masses");
  add_common(ppr, c_ppr);
  auto* tr = app.add_subcommand("train", "train a model and keep the best checkpoint");
  add_common(tr, c_train);

  auto* ev = app.add_subcommand("eval", "score a checkpoint on the validation or test part");
  add_common(ev, c_eval);
  std::string part = "test", ck_eval, ck_topk, topk_out;
  bool per_user = false;
  ev->add_option("--part", part, "val|test")->check(CLI::IsMember({"val", "test"}));
  ev->add_option("--checkpoint", ck_eval, "checkpoint path (default <out_dir>/checkpoint.bin)");
  ev->add_flag("--per-user", per_user, "include per-user rows in the report");

  auto* tk = app.add_subcommand("topk", "emit ranked top-k lists per user as JSON");
  add_common(tk, c_topk);
  int k = 20, max_users = 20;
  tk->add_option("--checkpoint", ck_topk, "checkpoint path (default <out_dir>/checkpoint.bin)");
  tk->add_option("-k", k, "list length")->check(CLI::PositiveNumber);
  tk->add_option("--users", max_users, "number of users to emit (0 = all)");
  tk->add_option("--out", topk_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);
  try {
    if (split->parsed()) return cmd_split(c_split);
    if (ppr->parsed()) return cmd_ppr(c_ppr);
    if (tr->parsed()) return cmd_train(c_train);
    if (ev->parsed()) return cmd_eval(c_eval, part, ck_eval, per_user);
    if (tk->parsed()) return cmd_topk(c_topk, ck_topk, k, max_users, topk_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
