#include "rankcf/evaluate.hpp"

#include <algorithm>

#include "rankcf/error.hpp"
#include "rankcf/parallel.hpp"

namespace rankcf {

nlohmann::json MetricReport::to_json(bool include_per_user) const {
  nlohmann::json j;
  j["k_list"] = k_list;
  j["users_evaluated"] = users_evaluated;
  j["users_skipped"] = users_skipped;
  nlohmann::json macro;
  macro["ap"] = ap;
  macro["ndcg_full"] = ndcg_full;
  for (const auto& [k, v] : ndcg) macro["ndcg"][std::to_string(k)] = v;
  for (const auto& [k, v] : recall) macro["recall"][std::to_string(k)] = v;
  j["macro"] = macro;
  if (include_per_user) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& u : per_user) {
      nlohmann::json row;
      row["user"] = u.user;
      row["num_positives"] = u.num_positives;
      row["num_candidates"] = u.num_candidates;
      row["ap"] = u.ap;
      row["ndcg_full"] = u.ndcg_full;
      for (const auto& [k, v] : u.ndcg) row["ndcg"][std::to_string(k)] = v;
      for (const auto& [k, v] : u.recall) row["recall"][std::to_string(k)] = v;
      rows.push_back(row);
    }
    j["per_user"] = rows;
  }
  return j;
}

std::vector<std::int32_t> covered_items(const BipartiteGraph& g) {
  std::vector<std::int32_t> out;
  out.reserve(static_cast<std::size_t>(g.num_items));
  for (std::int32_t i = 0; i < g.num_items; ++i)
    if (g.item_degree(i) > 0) out.push_back(i);
  return out;
}

MetricReport evaluate_users(const std::vector<EvalUser>& users, const ItemScorer& scorer,
                            const std::vector<std::int32_t>& candidates,
                            const std::vector<int>& k_list, int threads) {
  if (k_list.empty()) throw ConfigError("evaluation needs at least one cutoff");
  for (int k : k_list)
    if (k <= 0) throw ConfigError("evaluation cutoff must be positive");

  MetricReport rep;
  rep.k_list = k_list;

  struct Slot {
    UserMetrics m;
    bool skipped = true;
  };
  std::vector<Slot> slots(users.size());

  parallel_for(static_cast<std::int64_t>(users.size()), threads, [&](std::int64_t idx) {
    const auto& eu = users[static_cast<std::size_t>(idx)];
    auto& slot = slots[static_cast<std::size_t>(idx)];
    slot.m.user = eu.user;
    if (eu.positives.empty()) return;

    auto scores = scorer(eu.user);
    std::unordered_set<std::int32_t> excl(eu.exclusions.begin(), eu.exclusions.end());
    auto ranking = rank_all_items(eu.user, scores, candidates, excl);
    if (ranking.ranked_items.empty()) return;
    std::unordered_set<std::int32_t> pos(eu.positives.begin(), eu.positives.end());
    mark_relevance(ranking, pos);

    slot.m.num_positives = static_cast<int>(eu.positives.size());
    slot.m.num_candidates = static_cast<int>(ranking.ranked_items.size());
    slot.m.ap = average_precision(ranking);
    slot.m.ndcg_full = ndcg_at_k(ranking, static_cast<int>(ranking.ranked_items.size()));
    for (int k : k_list) {
      slot.m.ndcg[k] = ndcg_at_k(ranking, k);
      slot.m.recall[k] = recall_at_k(ranking, k);
    }
    slot.skipped = false;
  });

  for (auto& slot : slots) {
    if (slot.skipped) {
      ++rep.users_skipped;
      continue;
    }
    ++rep.users_evaluated;
    rep.per_user.push_back(slot.m);
    rep.ap += slot.m.ap;
    rep.ndcg_full += slot.m.ndcg_full;
    for (int k : k_list) {
      rep.ndcg[k] += slot.m.ndcg[k];
      rep.recall[k] += slot.m.recall[k];
    }
  }
  if (rep.users_evaluated > 0) {
    const auto n = static_cast<double>(rep.users_evaluated);
    rep.ap /= n;
    rep.ndcg_full /= n;
    for (int k : k_list) {
      rep.ndcg[k] /= n;
      rep.recall[k] /= n;
    }
  } else {
    for (int k : k_list) {
      rep.ndcg[k] = 0.0;
      rep.recall[k] = 0.0;
    }
  }
  return rep;
}

MetricReport evaluate(const TransductiveSplit& split, const BipartiteGraph& g,
                      const EmbeddingTable& final_emb, const ModelConfig& cfg, Part part,
                      const std::vector<int>& k_list, int threads) {
  if (cfg.mode != Mode::kTransductive)
    throw ConfigError("model is not transductive but the split is");
  if (part == Part::kTrain) throw ConfigError("evaluation runs on validation or test only");
  const Dataset& d = part == Part::kValidation ? split.validation : split.test;

  auto train_items = split.train.items_by_user();
  auto held_items = d.items_by_user();
  std::vector<EvalUser> users;
  users.reserve(static_cast<std::size_t>(d.num_users));
  for (std::int32_t u = 0; u < d.num_users; ++u)
    users.push_back({u, train_items[u], held_items[u]});

  ItemScorer scorer = [&](std::int32_t u) {
    std::vector<double> s(static_cast<std::size_t>(g.num_items), 0.0);
    const double* uv = final_emb.user_emb.row(u);
    for (std::int32_t i = 0; i < g.num_items; ++i)
      s[static_cast<std::size_t>(i)] =
          dot({uv, static_cast<std::size_t>(final_emb.dim)},
              {final_emb.item_emb.row(i), static_cast<std::size_t>(final_emb.dim)});
    return s;
  };
  return evaluate_users(users, scorer, covered_items(g), k_list, threads);
}

MetricReport evaluate(const InductiveSplit& split, const BipartiteGraph& g,
                      const std::vector<EmbeddingTable>& layers, const EmbeddingTable& final_emb,
                      const ModelConfig& cfg, Part part, const std::vector<int>& k_list,
                      int threads) {
  if (cfg.mode != Mode::kInductive) throw ConfigError("model is not inductive but the split is");
  if (part == Part::kTrain) throw ConfigError("evaluation runs on validation or test only");
  const auto& ids = part == Part::kValidation ? split.val_users : split.test_users;

  std::vector<EvalUser> users;
  users.reserve(ids.size());
  for (auto u : ids) users.push_back({u, split.fold_in[u], split.fold_out[u]});

  // item side pools on the training graph; the user vector exists only
  // through the fold-in aggregation
  ItemScorer scorer = [&](std::int32_t u) {
    auto uv = infer_user(split.fold_in[u], layers, g, cfg.pooling);
    std::vector<double> s(static_cast<std::size_t>(g.num_items), 0.0);
    for (std::int32_t i = 0; i < g.num_items; ++i)
      s[static_cast<std::size_t>(i)] =
          dot(uv, {final_emb.item_emb.row(i), static_cast<std::size_t>(final_emb.dim)});
    return s;
  };
  return evaluate_users(users, scorer, covered_items(g), k_list, threads);
}

}  // namespace rankcf
