#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

namespace rankcf {

// Full ordering of a user's candidate items, best first. relevance[r] is 1
// when the item at rank r is a held-out positive.
struct RankingResult {
  std::int32_t user = 0;
  std::vector<std::int32_t> ranked_items;
  std::vector<std::uint8_t> relevance;
};

// Sorts the candidates by score (descending; ties broken by ascending item
// id) after removing the excluded items. scores_by_item is indexed by item
// id. relevance is left zeroed; positives are not consulted here so the
// ordering provably cannot depend on the ground truth.
RankingResult rank_all_items(std::int32_t user, std::span<const double> scores_by_item,
                             const std::vector<std::int32_t>& candidates,
                             const std::unordered_set<std::int32_t>& exclusions);

void mark_relevance(RankingResult& r, const std::unordered_set<std::int32_t>& positives);

// Exact metrics over a marked ranking. Each returns 0 when the ranking
// holds no relevant item.
double ndcg_at_k(const RankingResult& r, int k);
double recall_at_k(const RankingResult& r, int k);
double average_precision(const RankingResult& r);

}  // namespace rankcf
