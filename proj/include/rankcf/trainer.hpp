#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rankcf/adam.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/evaluate.hpp"
#include "rankcf/graph.hpp"
#include "rankcf/losses.hpp"
#include "rankcf/model.hpp"
#include "rankcf/ppr.hpp"

namespace rankcf {

enum class SamplingMode { kUniform, kPpr };

SamplingMode sampling_from_string(const std::string& s);
std::string to_string(SamplingMode m);

struct SamplingConfig {
  SamplingMode mode = SamplingMode::kUniform;
  int num_pos = 5;
  int num_neg = 200;
  PPRConfig ppr;
  int top_t = 1000;
  double scale = 1.0;
  std::string cache_path;  // required when mode == kPpr
};

struct RunConfig {
  std::string interactions_path;
  std::optional<double> rating_threshold = 3.0;  // null in the config file disables it
  int min_interactions = 10;
  Mode protocol = Mode::kInductive;
  double rho = 0.8;
  double mu = 0.8;
  double eta = 0.8;
  ModelConfig model;  // model.mode always mirrors protocol
  LossConfig loss;
  SamplingConfig sampling;
  double lr = 0.001;
  double l2 = 1e-4;
  double init_std = 0.1;
  int batch_users = 512;
  int max_epochs = 300;
  int eval_every = 5;
  int patience = 10;
  std::vector<int> eval_k = {10, 20};
  std::uint64_t seed = 42;
  int threads = 1;
  std::string out_dir;
  bool verbose = true;  // epoch lines on stdout (run.log always written)
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::string& path);

struct TrainingBatch {
  struct UserSample {
    std::int32_t user = 0;
    std::vector<std::int32_t> pos;
    std::vector<std::int32_t> neg;
  };
  std::vector<UserSample> users;
};

// Samples num_pos positives per user (without replacement when the degree
// allows, with replacement otherwise) and num_neg negatives, uniformly
// over the user's non-positives or from the user's sampler when given.
TrainingBatch build_batch(const std::vector<std::int32_t>& users, const BipartiteGraph& g,
                          const std::unordered_map<std::int32_t, NegativeSampler>* samplers,
                          int num_pos, int num_neg, Rng& rng);

// Decision after each validation measurement; true once the latest
// `patience` measurements all failed to beat the running best.
bool early_stop(const std::vector<double>& val_history, int patience);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  bool evaluated = false;
  MetricReport val;  // macro only (per-user rows dropped)
};

struct TrainResult {
  std::vector<EpochStats> history;
  int epochs_run = 0;
  int best_epoch = 0;
  MetricReport best_val;
  MetricReport test;
  std::string checkpoint_path;
};

// Deterministic derivation of everything a run needs from its config:
// filtered dataset, split, training graph and trainable user list.
struct Workspace {
  Dataset data;
  TransductiveSplit transductive;  // active when protocol == transductive
  InductiveSplit inductive;        // active when protocol == inductive
  BipartiteGraph graph;
  std::vector<std::int32_t> train_users;
};

Workspace prepare_workspace(const RunConfig& cfg);

// Full training run: split, propagate, optimize, validate on a cadence,
// keep the best-validation checkpoint, report test metrics for it. All
// artifacts land in cfg.out_dir.
TrainResult train(const RunConfig& cfg);

}  // namespace rankcf
