#pragma once

#include <cstdint>
#include <vector>

#include "rankcf/dataset.hpp"

namespace rankcf {

// Bipartite interaction graph in CSR form, stored in both directions.
// coeff holds the symmetric normalization 1/sqrt(deg(u) * deg(i)) per edge.
struct BipartiteGraph {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::int64_t num_edges = 0;

  std::vector<std::int64_t> user_ptr;   // size num_users + 1
  std::vector<std::int32_t> user_nbr;   // items, ascending within each user
  std::vector<double> user_coeff;

  std::vector<std::int64_t> item_ptr;   // size num_items + 1
  std::vector<std::int32_t> item_nbr;   // users, ascending within each item
  std::vector<double> item_coeff;

  std::int64_t user_degree(std::int32_t u) const { return user_ptr[u + 1] - user_ptr[u]; }
  std::int64_t item_degree(std::int32_t i) const { return item_ptr[i + 1] - item_ptr[i]; }
  bool user_has_item(std::int32_t u, std::int32_t i) const;

  // FNV-1a over the edge list; used to pair precomputed artifacts with the
  // exact graph they were built from
  std::uint64_t structure_hash() const;
};

// Builds the graph from training interactions. Duplicate pairs and
// out-of-range ids are construction errors.
BipartiteGraph build_graph(const Dataset& train);

}  // namespace rankcf
