#include "rankcf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rankcf/checkpoint.hpp"
#include "rankcf/error.hpp"

namespace rankcf {

SamplingMode sampling_from_string(const std::string& s) {
  if (s == "uniform") return SamplingMode::kUniform;
  if (s == "ppr") return SamplingMode::kPpr;
  throw ConfigError("unknown sampling mode '" + s + "' (expected uniform|ppr)");
}

std::string to_string(SamplingMode m) { return m == SamplingMode::kUniform ? "uniform" : "ppr"; }

namespace {

void check_keys(const nlohmann::json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(std::string("unknown config key '") + key + "' in " + where);
  }
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_keys(j, "config root",
             {"data", "protocol", "split", "model", "loss", "sampling", "optim", "eval", "seed",
              "threads", "out_dir", "verbose"});
  RunConfig c;

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"path", "rating_threshold", "min_interactions"});
    read_into(d, "path", c.interactions_path);
    if (d.contains("rating_threshold")) {
      if (d.at("rating_threshold").is_null())
        c.rating_threshold.reset();
      else {
        double t = 0;
        read_into(d, "rating_threshold", t);
        c.rating_threshold = t;
      }
    }
    read_into(d, "min_interactions", c.min_interactions);
  }

  if (j.contains("protocol")) c.protocol = mode_from_string(j.at("protocol").get<std::string>());
  c.model.mode = c.protocol;

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"rho", "mu", "eta"});
    read_into(s, "rho", c.rho);
    read_into(s, "mu", c.mu);
    read_into(s, "eta", c.eta);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"dim", "layers", "pooling"});
    read_into(m, "dim", c.model.dim);
    read_into(m, "layers", c.model.layers);
    if (m.contains("pooling"))
      c.model.pooling = pooling_from_string(m.at("pooling").get<std::string>());
  }

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    check_keys(l, "loss", {"variant", "tau", "tau_star", "recall_k", "negatives_only_rank"});
    if (l.contains("variant")) c.loss.variant = loss_from_string(l.at("variant").get<std::string>());
    read_into(l, "tau", c.loss.tau);
    c.loss.tau_star = c.loss.tau;  // follows tau unless overridden
    read_into(l, "tau_star", c.loss.tau_star);
    read_into(l, "recall_k", c.loss.recall_k);
    read_into(l, "negatives_only_rank", c.loss.negatives_only_rank);
  }

  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    check_keys(s, "sampling",
               {"mode", "num_pos", "num_neg", "alpha", "tol", "max_iter", "top_t", "scale",
                "cache_path"});
    if (s.contains("mode")) c.sampling.mode = sampling_from_string(s.at("mode").get<std::string>());
    read_into(s, "num_pos", c.sampling.num_pos);
    read_into(s, "num_neg", c.sampling.num_neg);
    read_into(s, "alpha", c.sampling.ppr.alpha);
    read_into(s, "tol", c.sampling.ppr.tol);
    read_into(s, "max_iter", c.sampling.ppr.max_iter);
    read_into(s, "top_t", c.sampling.top_t);
    read_into(s, "scale", c.sampling.scale);
    read_into(s, "cache_path", c.sampling.cache_path);
  }

  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    check_keys(o, "optim",
               {"lr", "l2", "init_std", "batch_users", "max_epochs"});
    read_into(o, "lr", c.lr);
    read_into(o, "l2", c.l2);
    read_into(o, "init_std", c.init_std);
    read_into(o, "batch_users", c.batch_users);
    read_into(o, "max_epochs", c.max_epochs);
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_keys(e, "eval", {"every", "patience", "k"});
    read_into(e, "every", c.eval_every);
    read_into(e, "patience", c.patience);
    read_into(e, "k", c.eval_k);
  }

  read_into(j, "seed", c.seed);
  read_into(j, "threads", c.threads);
  read_into(j, "out_dir", c.out_dir);
  read_into(j, "verbose", c.verbose);

  if (c.batch_users <= 0) throw ConfigError("batch_users must be positive");
  if (c.max_epochs <= 0) throw ConfigError("max_epochs must be positive");
  if (c.eval_every <= 0) throw ConfigError("eval.every must be positive");
  if (c.patience <= 0) throw ConfigError("eval.patience must be positive");
  if (c.sampling.num_pos <= 0) throw ConfigError("sampling.num_pos must be positive");
  if (c.sampling.num_neg < 0) throw ConfigError("sampling.num_neg must be non-negative");
  if (c.model.layers < 0) throw ConfigError("model.layers must be >= 0");
  if (c.model.dim <= 0) throw ConfigError("model.dim must be positive");
  if (!(c.init_std > 0.0)) throw ConfigError("optim.init_std must be positive");
  if (c.l2 < 0.0) throw ConfigError("optim.l2 must be non-negative");
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["data"]["path"] = c.interactions_path;
  if (c.rating_threshold)
    j["data"]["rating_threshold"] = *c.rating_threshold;
  else
    j["data"]["rating_threshold"] = nullptr;
  j["data"]["min_interactions"] = c.min_interactions;
  j["protocol"] = to_string(c.protocol);
  j["split"]["rho"] = c.rho;
  j["split"]["mu"] = c.mu;
  j["split"]["eta"] = c.eta;
  j["model"]["dim"] = c.model.dim;
  j["model"]["layers"] = c.model.layers;
  j["model"]["pooling"] = to_string(c.model.pooling);
  j["loss"]["variant"] = to_string(c.loss.variant);
  j["loss"]["tau"] = c.loss.tau;
  j["loss"]["tau_star"] = c.loss.tau_star;
  j["loss"]["recall_k"] = c.loss.recall_k;
  j["loss"]["negatives_only_rank"] = c.loss.negatives_only_rank;
  j["sampling"]["mode"] = to_string(c.sampling.mode);
  j["sampling"]["num_pos"] = c.sampling.num_pos;
  j["sampling"]["num_neg"] = c.sampling.num_neg;
  j["sampling"]["alpha"] = c.sampling.ppr.alpha;
  j["sampling"]["tol"] = c.sampling.ppr.tol;
  j["sampling"]["max_iter"] = c.sampling.ppr.max_iter;
  j["sampling"]["top_t"] = c.sampling.top_t;
  j["sampling"]["scale"] = c.sampling.scale;
  j["sampling"]["cache_path"] = c.sampling.cache_path;
  j["optim"]["lr"] = c.lr;
  j["optim"]["l2"] = c.l2;
  j["optim"]["init_std"] = c.init_std;
  j["optim"]["batch_users"] = c.batch_users;
  j["optim"]["max_epochs"] = c.max_epochs;
  j["eval"]["every"] = c.eval_every;
  j["eval"]["patience"] = c.patience;
  j["eval"]["k"] = c.eval_k;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out_dir"] = c.out_dir;
  j["verbose"] = c.verbose;
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad config json in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

TrainingBatch build_batch(const std::vector<std::int32_t>& users, const BipartiteGraph& g,
                          const std::unordered_map<std::int32_t, NegativeSampler>* samplers,
                          int num_pos, int num_neg, Rng& rng) {
  if (users.empty()) throw ConfigError("cannot build a batch from an empty user list");
  if (num_pos <= 0) throw ConfigError("batch needs at least one positive per user");
  if (num_neg < 0) throw ConfigError("negative count must be non-negative");

  TrainingBatch batch;
  batch.users.reserve(users.size());
  std::vector<std::int32_t> scratch;
  for (auto u : users) {
    if (u < 0 || u >= g.num_users) throw ShapeError("batch user id out of range");
    const auto deg = g.user_degree(u);
    if (deg == 0)
      throw ConfigError("user " + std::to_string(u) + " has no training interactions");

    TrainingBatch::UserSample us;
    us.user = u;
    const auto* row = g.user_nbr.data() + g.user_ptr[u];
    if (deg >= num_pos) {
      scratch.assign(row, row + deg);
      for (int k = 0; k < num_pos; ++k) {
        const auto j = static_cast<std::size_t>(k) +
                       static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(deg - k)));
        std::swap(scratch[static_cast<std::size_t>(k)], scratch[j]);
        us.pos.push_back(scratch[static_cast<std::size_t>(k)]);
      }
    } else {
      for (int k = 0; k < num_pos; ++k)
        us.pos.push_back(row[rng.next_below(static_cast<std::uint64_t>(deg))]);
    }

    if (samplers) {
      auto it = samplers->find(u);
      if (it == samplers->end())
        throw ConfigError("no negative sampler for user " + std::to_string(u));
      for (int k = 0; k < num_neg; ++k) us.neg.push_back(it->second.draw(rng));
    } else {
      if (deg >= g.num_items)
        throw ConfigError("user " + std::to_string(u) + " interacted with every item");
      for (int k = 0; k < num_neg; ++k) {
        for (;;) {
          const auto cand = static_cast<std::int32_t>(
              rng.next_below(static_cast<std::uint64_t>(g.num_items)));
          if (!std::binary_search(row, row + deg, cand)) {
            us.neg.push_back(cand);
            break;
          }
        }
      }
    }
    batch.users.push_back(std::move(us));
  }
  return batch;
}

bool early_stop(const std::vector<double>& val_history, int patience) {
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (val_history.empty()) return false;
  std::size_t best = 0;
  for (std::size_t k = 1; k < val_history.size(); ++k)
    if (val_history[k] > val_history[best]) best = k;
  return val_history.size() - 1 - best >= static_cast<std::size_t>(patience);
}

namespace {

class RunLog {
 public:
  RunLog(const std::string& path, bool verbose) : verbose_(verbose) {
    if (!path.empty()) file_.open(path);
  }
  void line(const std::string& s) {
    if (verbose_) {
      std::fputs(s.c_str(), stdout);
      std::fputc('\n', stdout);
      std::fflush(stdout);
    }
    if (file_.is_open()) file_ << s << '\n' << std::flush;
  }

 private:
  bool verbose_;
  std::ofstream file_;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

MetricReport macro_only(MetricReport r) {
  r.per_user.clear();
  return r;
}

}  // namespace

Workspace prepare_workspace(const RunConfig& cfg) {
  if (cfg.interactions_path.empty()) throw ConfigError("data.path is empty");
  Workspace w;
  w.data = load_interactions(cfg.interactions_path, cfg.rating_threshold);
  if (cfg.min_interactions > 0) w.data = filter_min_interactions(w.data, cfg.min_interactions);

  const std::uint64_t split_seed = Rng::mix(cfg.seed, 1);
  if (cfg.protocol == Mode::kTransductive) {
    w.transductive = split_transductive(w.data, cfg.rho, split_seed);
    w.graph = build_graph(w.transductive.train);
    for (std::int32_t u = 0; u < w.graph.num_users; ++u)
      if (w.graph.user_degree(u) > 0) w.train_users.push_back(u);
  } else {
    w.inductive = split_inductive(w.data, cfg.mu, cfg.eta, split_seed);
    w.graph = build_graph(w.inductive.train);
    w.train_users = w.inductive.train_users;
  }
  if (w.train_users.empty()) throw EmptyDatasetError("no trainable users after splitting");
  return w;
}

TrainResult train(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.out_dir.empty()) throw ConfigError("out_dir is empty");
  fs::create_directories(cfg.out_dir);
  const std::string checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
  RunLog log((fs::path(cfg.out_dir) / "run.log").string(), cfg.verbose);

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&]() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t_start)
        .count();
  };

  Workspace w = prepare_workspace(cfg);
  const bool inductive = cfg.protocol == Mode::kInductive;
  log.line(fmt("[setup %lldms] users=%d items=%d train_edges=%lld train_users=%zu", elapsed_ms(),
               w.graph.num_users, w.graph.num_items, static_cast<long long>(w.graph.num_edges),
               w.train_users.size()));

  {
    std::ofstream cj(fs::path(cfg.out_dir) / "config.json");
    cj << run_config_to_json(cfg).dump(2) << '\n';
    std::ofstream sj(fs::path(cfg.out_dir) / "split_summary.json");
    sj << (inductive ? inductive_summary_json(w.inductive)
                     : transductive_summary_json(w.transductive))
       << '\n';
  }

  // negative samplers (precomputed walk masses) when requested
  std::unordered_map<std::int32_t, NegativeSampler> samplers;
  if (cfg.sampling.mode == SamplingMode::kPpr) {
    if (cfg.sampling.cache_path.empty())
      throw ConfigError("sampling.mode=ppr needs sampling.cache_path (run the ppr command first)");
    if (!fs::exists(cfg.sampling.cache_path))
      throw ConfigError("ppr cache not found at " + cfg.sampling.cache_path +
                        " (run the ppr command first)");
    PprCache cache = load_cache(cfg.sampling.cache_path);
    cache.check_graph(w.graph);
    if (cache.scale != cfg.sampling.scale)
      log.line(fmt("[warn] sampler scale %.6g overrides the %.6g recorded in the cache",
                   cfg.sampling.scale, cache.scale));
    for (auto u : w.train_users) {
      const TruncatedPpr* t = cache.find(u);
      if (!t) throw ConfigError("ppr cache has no entry for user " + std::to_string(u));
      std::vector<std::int32_t> positives(
          w.graph.user_nbr.begin() + w.graph.user_ptr[u],
          w.graph.user_nbr.begin() + w.graph.user_ptr[u + 1]);
      samplers.emplace(u, build_sampler(*t, w.graph.num_items, positives, cfg.sampling.scale));
    }
    log.line(fmt("[setup %lldms] negative samplers ready for %zu users", elapsed_ms(),
                 samplers.size()));
  }

  EmbeddingTable params = init_embeddings(w.graph.num_users, w.graph.num_items, cfg.model.dim,
                                          cfg.init_std, Rng::mix(cfg.seed, 2), inductive);
  AdamState adam = make_adam(params, cfg.model.mode, cfg.lr);
  Rng rng(Rng::mix(cfg.seed, 3));

  std::vector<int> klist = cfg.eval_k;
  klist.push_back(20);
  std::sort(klist.begin(), klist.end());
  klist.erase(std::unique(klist.begin(), klist.end()), klist.end());

  auto validate = [&](const EmbeddingTable& q) {
    Forward f = forward(w.graph, q, cfg.model);
    return inductive ? evaluate(w.inductive, w.graph, f.layers, f.final, cfg.model,
                                Part::kValidation, klist, cfg.threads)
                     : evaluate(w.transductive, w.graph, f.final, cfg.model, Part::kValidation,
                                klist, cfg.threads);
  };

  TrainResult result;
  std::vector<double> val_curve;
  EmbeddingTable best_q;
  double best_metric = -1.0;
  std::vector<std::int32_t> order = w.train_users;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_weighted = 0.0;
    std::size_t users_done = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_users)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_users));
      std::vector<std::int32_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(stop));
      TrainingBatch batch =
          build_batch(ids, w.graph, samplers.empty() ? nullptr : &samplers, cfg.sampling.num_pos,
                      cfg.sampling.num_neg, rng);

      Forward fwd = forward(w.graph, params, cfg.model);
      EmbeddingTable grad_final = make_table(w.graph.num_users, w.graph.num_items, cfg.model.dim);
      const double invB = 1.0 / static_cast<double>(batch.users.size());
      double batch_loss = 0.0;
      std::vector<std::int32_t> touched_items;

      try {
        for (const auto& us : batch.users) {
          const double* uvec = fwd.final.user_emb.row(us.user);
          std::span<const double> uspan(uvec, static_cast<std::size_t>(cfg.model.dim));
          BatchScores bs;
          bs.pos = score(uspan, fwd.final.item_emb, us.pos);
          bs.neg = score(uspan, fwd.final.item_emb, us.neg);
          ScoreGrad gr = loss_grad(cfg.loss, bs);
          batch_loss += gr.value;

          double* gu = grad_final.user_emb.row(us.user);
          auto scatter = [&](const std::vector<std::int32_t>& items,
                             const std::vector<double>& gs) {
            for (std::size_t k = 0; k < items.size(); ++k) {
              const double gk = gs[k] * invB;
              const double* iv = fwd.final.item_emb.row(items[k]);
              double* gi = grad_final.item_emb.row(items[k]);
              for (std::int32_t t = 0; t < cfg.model.dim; ++t) {
                gu[t] += gk * iv[t];
                gi[t] += gk * uvec[t];
              }
              touched_items.push_back(items[k]);
            }
          };
          scatter(us.pos, gr.pos);
          scatter(us.neg, gr.neg);
        }

        EmbeddingTable grad_e0 = backward(w.graph, fwd, grad_final, cfg.model);

        double reg = 0.0;
        if (cfg.l2 > 0.0) {
          std::sort(touched_items.begin(), touched_items.end());
          touched_items.erase(std::unique(touched_items.begin(), touched_items.end()),
                              touched_items.end());
          const double c = 2.0 * cfg.l2 * invB;
          if (!inductive) {
            for (const auto& us : batch.users) {
              const double* row = params.user_emb.row(us.user);
              double* gr_row = grad_e0.user_emb.row(us.user);
              for (std::int32_t t = 0; t < cfg.model.dim; ++t) {
                reg += cfg.l2 * invB * row[t] * row[t];
                gr_row[t] += c * row[t];
              }
            }
          }
          for (auto i : touched_items) {
            const double* row = params.item_emb.row(i);
            double* gr_row = grad_e0.item_emb.row(i);
            for (std::int32_t t = 0; t < cfg.model.dim; ++t) {
              reg += cfg.l2 * invB * row[t] * row[t];
              gr_row[t] += c * row[t];
            }
          }
        }

        adam_step(params, grad_e0, adam);
        loss_weighted += batch_loss + reg * static_cast<double>(batch.users.size());
        users_done += batch.users.size();
      } catch (const NumericError& e) {
        throw NumericError(fmt("epoch %d, batch starting at user index %zu: %s", epoch, start,
                               e.what()));
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_weighted / static_cast<double>(users_done);
    if (!std::isfinite(stats.loss))
      throw NumericError(fmt("epoch %d produced a non-finite training loss", epoch));

    const bool do_eval = (epoch % cfg.eval_every == 0) || epoch == cfg.max_epochs;
    if (do_eval) {
      EmbeddingTable q = quantize_f32(params);
      MetricReport val = validate(q);
      const double metric = val.ndcg.at(20);
      val_curve.push_back(metric);
      stats.evaluated = true;
      stats.val = macro_only(val);

      if (metric > best_metric) {
        best_metric = metric;
        best_q = q;
        result.best_epoch = epoch;
        result.best_val = val;
        CheckpointMeta meta;
        meta.model = cfg.model;
        meta.num_users = w.graph.num_users;
        meta.num_items = w.graph.num_items;
        meta.seed = cfg.seed;
        meta.extra = {{"epoch", epoch}, {"val", val.to_json(false)}};
        save_checkpoint(checkpoint_path, meta, q);
      }
      log.line(fmt("[epoch %d %lldms] loss=%.6f val_ndcg@20=%.6f best=%.6f@%d", epoch,
                   elapsed_ms(), stats.loss, metric, best_metric, result.best_epoch));
    } else {
      log.line(fmt("[epoch %d %lldms] loss=%.6f", epoch, elapsed_ms(), stats.loss));
    }
    result.history.push_back(std::move(stats));
    result.epochs_run = epoch;

    if (do_eval && early_stop(val_curve, cfg.patience)) {
      log.line(fmt("[stop] no validation improvement for %d evaluations", cfg.patience));
      break;
    }
  }

  if (best_q.dim == 0) throw StateError("training finished without a validation measurement");

  // test metrics come from the checkpointed weights, so a later reload
  // reproduces them exactly
  Forward f = forward(w.graph, best_q, cfg.model);
  result.test = inductive ? evaluate(w.inductive, w.graph, f.layers, f.final, cfg.model,
                                     Part::kTest, klist, cfg.threads)
                          : evaluate(w.transductive, w.graph, f.final, cfg.model, Part::kTest,
                                     klist, cfg.threads);
  result.checkpoint_path = checkpoint_path;
  log.line(fmt("[done %lldms] best_epoch=%d val_ndcg@20=%.6f test_ndcg@20=%.6f test_recall@20=%.6f",
               elapsed_ms(), result.best_epoch, best_metric, result.test.ndcg.at(20),
               result.test.recall.at(20)));

  {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : result.history) {
      nlohmann::json e = {{"epoch", h.epoch}, {"loss", h.loss}};
      if (h.evaluated) e["val"] = h.val.to_json(false);
      hist.push_back(e);
    }
    std::ofstream hj(fs::path(cfg.out_dir) / "history.json");
    hj << hist.dump(2) << '\n';
    std::ofstream vj(fs::path(cfg.out_dir) / "metrics_val.json");
    vj << result.best_val.to_json().dump(2) << '\n';
    std::ofstream tj(fs::path(cfg.out_dir) / "metrics_test.json");
    tj << result.test.to_json().dump(2) << '\n';
  }
  return result;
}

}  // namespace rankcf
