#include "rankcf/graph.hpp"

#include <algorithm>
#include <cmath>

#include "rankcf/error.hpp"

namespace rankcf {

bool BipartiteGraph::user_has_item(std::int32_t u, std::int32_t i) const {
  auto b = user_nbr.begin() + user_ptr[u];
  auto e = user_nbr.begin() + user_ptr[u + 1];
  return std::binary_search(b, e, i);
}

std::uint64_t BipartiteGraph::structure_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffull;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(num_users));
  mix(static_cast<std::uint64_t>(num_items));
  for (std::int32_t u = 0; u < num_users; ++u)
    for (std::int64_t e = user_ptr[u]; e < user_ptr[u + 1]; ++e) {
      mix(static_cast<std::uint64_t>(u));
      mix(static_cast<std::uint64_t>(user_nbr[e]));
    }
  return h;
}

BipartiteGraph build_graph(const Dataset& train) {
  BipartiteGraph g;
  g.num_users = train.num_users;
  g.num_items = train.num_items;

  std::vector<std::int64_t> udeg(g.num_users, 0), ideg(g.num_items, 0);
  for (const auto& x : train.interactions) {
    if (x.user < 0 || x.user >= g.num_users || x.item < 0 || x.item >= g.num_items)
      throw ShapeError("interaction id out of range while building graph");
    ++udeg[x.user];
    ++ideg[x.item];
  }

  g.num_edges = static_cast<std::int64_t>(train.interactions.size());
  g.user_ptr.assign(g.num_users + 1, 0);
  for (std::int32_t u = 0; u < g.num_users; ++u) g.user_ptr[u + 1] = g.user_ptr[u] + udeg[u];
  g.item_ptr.assign(g.num_items + 1, 0);
  for (std::int32_t i = 0; i < g.num_items; ++i) g.item_ptr[i + 1] = g.item_ptr[i] + ideg[i];

  g.user_nbr.assign(g.num_edges, 0);
  g.user_coeff.assign(g.num_edges, 0.0);
  g.item_nbr.assign(g.num_edges, 0);
  g.item_coeff.assign(g.num_edges, 0.0);

  std::vector<std::int64_t> ucur(g.user_ptr.begin(), g.user_ptr.end() - 1);
  std::vector<std::int64_t> icur(g.item_ptr.begin(), g.item_ptr.end() - 1);
  for (const auto& x : train.interactions) {
    double c = 1.0 / std::sqrt(static_cast<double>(udeg[x.user]) *
                               static_cast<double>(ideg[x.item]));
    g.user_nbr[ucur[x.user]] = x.item;
    g.user_coeff[ucur[x.user]] = c;
    ++ucur[x.user];
    g.item_nbr[icur[x.item]] = x.user;
    g.item_coeff[icur[x.item]] = c;
    ++icur[x.item];
  }

  for (std::int32_t u = 0; u < g.num_users; ++u) {
    auto b = g.user_nbr.begin() + g.user_ptr[u];
    auto e = g.user_nbr.begin() + g.user_ptr[u + 1];
    if (!std::is_sorted(b, e)) {
      // interactions may arrive in any order; re-sort this row with coeffs
      std::vector<std::pair<std::int32_t, double>> row;
      for (std::int64_t k = g.user_ptr[u]; k < g.user_ptr[u + 1]; ++k)
        row.emplace_back(g.user_nbr[k], g.user_coeff[k]);
      std::sort(row.begin(), row.end());
      for (std::size_t k = 0; k < row.size(); ++k) {
        g.user_nbr[g.user_ptr[u] + static_cast<std::int64_t>(k)] = row[k].first;
        g.user_coeff[g.user_ptr[u] + static_cast<std::int64_t>(k)] = row[k].second;
      }
    }
    for (std::int64_t k = g.user_ptr[u] + 1; k < g.user_ptr[u + 1]; ++k)
      if (g.user_nbr[k] == g.user_nbr[k - 1])
        throw ShapeError("duplicate interaction for user " + std::to_string(u) +
                         ", item " + std::to_string(g.user_nbr[k]));
  }
  for (std::int32_t i = 0; i < g.num_items; ++i) {
    auto b = g.item_nbr.begin() + g.item_ptr[i];
    auto e = g.item_nbr.begin() + g.item_ptr[i + 1];
    if (!std::is_sorted(b, e)) {
      std::vector<std::pair<std::int32_t, double>> row;
      for (std::int64_t k = g.item_ptr[i]; k < g.item_ptr[i + 1]; ++k)
        row.emplace_back(g.item_nbr[k], g.item_coeff[k]);
      std::sort(row.begin(), row.end());
      for (std::size_t k = 0; k < row.size(); ++k) {
        g.item_nbr[g.item_ptr[i] + static_cast<std::int64_t>(k)] = row[k].first;
        g.item_coeff[g.item_ptr[i] + static_cast<std::int64_t>(k)] = row[k].second;
      }
    }
  }
  return g;
}

}  // namespace rankcf
