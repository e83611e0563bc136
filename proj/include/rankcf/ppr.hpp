#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankcf/graph.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

struct PPRConfig {
  double alpha = 0.15;   // restart probability
  double tol = 1e-10;    // max-norm change between iterations
  int max_iter = 1000;
};

// Dense personalized-PageRank mass over the joint node space:
// users occupy [0, num_users), items [num_users, num_users + num_items).
struct PPRVector {
  std::int32_t user = 0;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<double> mass;

  double user_mass(std::int32_t u) const { return mass[static_cast<std::size_t>(u)]; }
  double item_mass(std::int32_t i) const {
    return mass[static_cast<std::size_t>(num_users) + static_cast<std::size_t>(i)];
  }
};

struct PprResult {
  PPRVector vec;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> mass_per_iteration;  // total mass after each sweep
};

// Power iteration for p = alpha * e_u + (1 - alpha) * W p with W the
// column-stochastic walk matrix of the bipartite graph.
PprResult compute_ppr(const BipartiteGraph& g, std::int32_t user, const PPRConfig& cfg);

// Item mass list kept for one user after truncation to the top entries
// (largest mass first; ties resolved toward the smaller item id) and
// quantization to float, which fixes the exact values samplers ever see.
struct TruncatedPpr {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;
  std::vector<float> masses;
};

TruncatedPpr truncate_ppr(const PPRVector& p, int top_t);

// Draws negatives with probability proportional to exp(scale * mass),
// where items outside the kept mass list weigh exp(0) and the user's
// positives weigh exactly zero.
class NegativeSampler {
 public:
  NegativeSampler(std::int32_t user, std::int32_t num_items,
                  const std::vector<std::int32_t>& mass_items, const std::vector<double>& masses,
                  const std::vector<std::int32_t>& positives, double scale);

  std::int32_t user() const { return user_; }
  std::int32_t num_items() const { return num_items_; }
  double prob(std::int32_t item) const;
  std::int32_t draw(Rng& rng) const;

 private:
  std::int32_t user_ = 0;
  std::int32_t num_items_ = 0;
  std::vector<double> cdf_;  // inclusive prefix weights; flat step = excluded item
};

NegativeSampler build_sampler(const PPRVector& p, const std::vector<std::int32_t>& positives,
                              double scale);
NegativeSampler build_sampler(const TruncatedPpr& t, std::int32_t num_items,
                              const std::vector<std::int32_t>& positives, double scale);

std::vector<std::int32_t> sample_negatives(const NegativeSampler& s, int n, Rng& rng);

// Precomputed per-user mass lists, bound to one exact graph.
struct PprCache {
  PPRConfig cfg;
  int top_t = 1000;
  double scale = 1.0;
  std::uint64_t graph_hash = 0;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<TruncatedPpr> users;

  const TruncatedPpr* find(std::int32_t user) const;
  // throws when the cache was built from a different graph
  void check_graph(const BipartiteGraph& g) const;
};

// Runs compute_ppr for every listed user, truncates, writes the cache file
// and returns the identical in-memory cache. threads > 1 parallelizes over
// users without changing any value.
PprCache precompute_and_store(const BipartiteGraph& g, const std::vector<std::int32_t>& users,
                              const PPRConfig& cfg, int top_t, double scale,
                              const std::string& path, int threads = 1);

PprCache load_cache(const std::string& path);

}  // namespace rankcf
