#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "json.hpp"
#include "rankcf/dataset.hpp"
#include "rankcf/graph.hpp"
#include "rankcf/metrics.hpp"
#include "rankcf/model.hpp"

namespace rankcf {

struct UserMetrics {
  std::int32_t user = 0;
  int num_positives = 0;
  int num_candidates = 0;
  double ap = 0.0;
  double ndcg_full = 0.0;  // untruncated, over the whole candidate ranking
  std::map<int, double> ndcg;
  std::map<int, double> recall;
};

struct MetricReport {
  std::vector<int> k_list;
  int users_evaluated = 0;
  int users_skipped = 0;  // users with no held-out positives
  double ap = 0.0;
  double ndcg_full = 0.0;
  std::map<int, double> ndcg;
  std::map<int, double> recall;
  std::vector<UserMetrics> per_user;

  nlohmann::json to_json(bool include_per_user = true) const;
};

struct EvalUser {
  std::int32_t user = 0;
  std::vector<std::int32_t> exclusions;  // seen items, never ranked
  std::vector<std::int32_t> positives;   // held-out ground truth
};

// scorer(user) returns scores indexed by item id (size num_items).
using ItemScorer = std::function<std::vector<double>(std::int32_t)>;

// Candidates are shared by all users: every item the training graph has an
// edge for. Macro averages weight each evaluated user equally.
MetricReport evaluate_users(const std::vector<EvalUser>& users, const ItemScorer& scorer,
                            const std::vector<std::int32_t>& candidates,
                            const std::vector<int>& k_list, int threads = 1);

std::vector<std::int32_t> covered_items(const BipartiteGraph& g);

MetricReport evaluate(const TransductiveSplit& split, const BipartiteGraph& g,
                      const EmbeddingTable& final_emb, const ModelConfig& cfg, Part part,
                      const std::vector<int>& k_list, int threads = 1);

MetricReport evaluate(const InductiveSplit& split, const BipartiteGraph& g,
                      const std::vector<EmbeddingTable>& layers, const EmbeddingTable& final_emb,
                      const ModelConfig& cfg, Part part, const std::vector<int>& k_list,
                      int threads = 1);

}  // namespace rankcf
