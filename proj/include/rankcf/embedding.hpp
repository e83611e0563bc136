#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace rankcf {

// Row-major dense matrix of doubles.
struct Matrix {
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::int32_t r, std::int32_t c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(std::int32_t r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(std::int32_t r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
  double& at(std::int32_t r, std::int32_t c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(std::int32_t r, std::int32_t c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
  bool empty() const { return a.empty(); }
};

struct EmbeddingTable {
  Matrix user_emb;  // num_users x dim
  Matrix item_emb;  // num_items x dim
  std::int32_t dim = 0;
};

EmbeddingTable make_table(std::int32_t num_users, std::int32_t num_items, std::int32_t dim);

// Gaussian N(0, std^2) init. When zero_users is set the user block stays
// zero (user vectors then exist only through propagation).
EmbeddingTable init_embeddings(std::int32_t num_users, std::int32_t num_items, std::int32_t dim,
                               double std_dev, std::uint64_t seed, bool zero_users);

}  // namespace rankcf
