#include "rankcf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rankcf/error.hpp"

namespace rankcf {

RankingResult rank_all_items(std::int32_t user, std::span<const double> scores_by_item,
                             const std::vector<std::int32_t>& candidates,
                             const std::unordered_set<std::int32_t>& exclusions) {
  RankingResult r;
  r.user = user;
  r.ranked_items.reserve(candidates.size());
  for (auto i : candidates) {
    if (i < 0 || static_cast<std::size_t>(i) >= scores_by_item.size())
      throw ShapeError("ranking: candidate item out of score range");
    if (exclusions.count(i)) continue;
    r.ranked_items.push_back(i);
  }
  std::sort(r.ranked_items.begin(), r.ranked_items.end(), [&](std::int32_t a, std::int32_t b) {
    const double sa = scores_by_item[static_cast<std::size_t>(a)];
    const double sb = scores_by_item[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  r.relevance.assign(r.ranked_items.size(), 0);
  return r;
}

void mark_relevance(RankingResult& r, const std::unordered_set<std::int32_t>& positives) {
  for (std::size_t k = 0; k < r.ranked_items.size(); ++k)
    r.relevance[k] = positives.count(r.ranked_items[k]) ? 1 : 0;
}

namespace {

std::size_t count_relevant(const RankingResult& r) {
  std::size_t n = 0;
  for (auto v : r.relevance) n += v;
  return n;
}

double log2_inv(std::size_t rank) {  // 1 / log2(rank + 1), rank is 1-based
  return 1.0 / std::log2(static_cast<double>(rank + 1));
}

}  // namespace

double ndcg_at_k(const RankingResult& r, int k) {
  if (k <= 0) throw ConfigError("ndcg cutoff must be positive");
  const std::size_t rel = count_relevant(r);
  if (rel == 0) return 0.0;
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), r.relevance.size());
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < kk; ++pos)
    if (r.relevance[pos]) dcg += log2_inv(pos + 1);
  double idcg = 0.0;
  const auto ideal = std::min<std::size_t>(rel, static_cast<std::size_t>(k));
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += log2_inv(pos + 1);
  return dcg / idcg;
}

double recall_at_k(const RankingResult& r, int k) {
  if (k <= 0) throw ConfigError("recall cutoff must be positive");
  const std::size_t rel = count_relevant(r);
  if (rel == 0) return 0.0;
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), r.relevance.size());
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < kk; ++pos) hits += r.relevance[pos];
  return static_cast<double>(hits) /
         static_cast<double>(std::min<std::size_t>(rel, static_cast<std::size_t>(k)));
}

double average_precision(const RankingResult& r) {
  const std::size_t rel = count_relevant(r);
  if (rel == 0) return 0.0;
  double acc = 0.0;
  std::size_t seen = 0;
  for (std::size_t pos = 0; pos < r.relevance.size(); ++pos) {
    if (r.relevance[pos]) {
      ++seen;
      acc += static_cast<double>(seen) / static_cast<double>(pos + 1);
    }
  }
  return acc / static_cast<double>(rel);
}

}  // namespace rankcf
