#pragma once

// Reference implementations kept deliberately naive and independent of the
// library internals. Tests compare library output against these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

// ---- dense linear algebra -------------------------------------------------

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row major

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// Gaussian elimination with partial pivoting; solves A x = b.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// ---- graph propagation ----------------------------------------------------

struct Edge {
  std::int32_t user;
  std::int32_t item;
};

// Normalized adjacency over the concatenated (user, item) node space.
inline Mat normalized_adjacency(const std::vector<Edge>& edges, std::int32_t num_users,
                                std::int32_t num_items) {
  std::vector<std::int64_t> udeg(num_users, 0), ideg(num_items, 0);
  for (const auto& e : edges) {
    ++udeg[e.user];
    ++ideg[e.item];
  }
  const std::size_t n = static_cast<std::size_t>(num_users) + static_cast<std::size_t>(num_items);
  Mat a = zeros(n, n);
  for (const auto& e : edges) {
    const double c = 1.0 / std::sqrt(static_cast<double>(udeg[e.user]) *
                                     static_cast<double>(ideg[e.item]));
    a[static_cast<std::size_t>(e.user)][static_cast<std::size_t>(num_users) + e.item] = c;
    a[static_cast<std::size_t>(num_users) + e.item][static_cast<std::size_t>(e.user)] = c;
  }
  return a;
}

// Layer-by-layer propagation by explicit dense multiplication.
inline std::vector<Mat> dense_layers(const std::vector<Edge>& edges, std::int32_t num_users,
                                     std::int32_t num_items, const Mat& e0, int L) {
  Mat a = normalized_adjacency(edges, num_users, num_items);
  std::vector<Mat> layers{e0};
  for (int k = 0; k < L; ++k) layers.push_back(matmul(a, layers.back()));
  return layers;
}

// ---- smooth ranking -------------------------------------------------------

inline double sigmoid(double x, double tau) { return 1.0 / (1.0 + std::exp(-x / tau)); }

// Exact rank of positive p when scores are all distinct: 1 + count above.
// Ties contribute 1/2, matching the sigmoid at 0.
inline double exact_rank(double s_p, const Vec& others) {
  double r = 1.0;
  for (double s : others) {
    if (s > s_p)
      r += 1.0;
    else if (s == s_p)
      r += 0.5;
  }
  return r;
}

// ---- retrieval metrics on explicit rankings -------------------------------

// relevance[r] says whether the item at 0-based rank r is a hit
inline double dcg(const std::vector<int>& relevance, std::size_t k) {
  double s = 0.0;
  for (std::size_t r = 0; r < std::min(k, relevance.size()); ++r)
    if (relevance[r]) s += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return s;
}

inline double ndcg(const std::vector<int>& relevance, std::size_t k) {
  const auto total = static_cast<std::size_t>(
      std::count(relevance.begin(), relevance.end(), 1));
  if (total == 0) return 0.0;
  std::vector<int> ideal(relevance.size(), 0);
  for (std::size_t r = 0; r < total; ++r) ideal[r] = 1;
  return dcg(relevance, k) / dcg(ideal, k);
}

inline double recall(const std::vector<int>& relevance, std::size_t k) {
  const auto total = static_cast<std::size_t>(
      std::count(relevance.begin(), relevance.end(), 1));
  if (total == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, relevance.size()); ++r)
    hits += static_cast<std::size_t>(relevance[r]);
  return static_cast<double>(hits) / static_cast<double>(std::min(total, k));
}

inline double average_precision(const std::vector<int>& relevance) {
  const auto total = static_cast<std::size_t>(
      std::count(relevance.begin(), relevance.end(), 1));
  if (total == 0) return 0.0;
  double acc = 0.0;
  std::size_t seen = 0;
  for (std::size_t r = 0; r < relevance.size(); ++r)
    if (relevance[r]) {
      ++seen;
      acc += static_cast<double>(seen) / static_cast<double>(r + 1);
    }
  return acc / static_cast<double>(total);
}

// ---- finite differences ---------------------------------------------------

// Central difference d f / d x[i] at the given coordinates.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, Vec x, double h) {
  Vec g(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double dn = f(x);
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// relative error with an absolute floor, so vanishing components compare
// on an absolute scale
inline double grad_error(const Vec& got, const Vec& want, double floor_ = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(got[i] - want[i]) / std::max(floor_, std::abs(want[i])));
  return worst;
}

// ---- personalized pagerank ------------------------------------------------

// Direct solve of p = alpha e_u + (1 - alpha) W p with W column-stochastic.
inline Vec ppr_fixed_point(const std::vector<Edge>& edges, std::int32_t num_users,
                           std::int32_t num_items, std::int32_t user, double alpha) {
  std::vector<std::int64_t> udeg(num_users, 0), ideg(num_items, 0);
  for (const auto& e : edges) {
    ++udeg[e.user];
    ++ideg[e.item];
  }
  const std::size_t n = static_cast<std::size_t>(num_users) + static_cast<std::size_t>(num_items);
  Mat w = zeros(n, n);  // w[to][from]
  for (const auto& e : edges) {
    const auto u = static_cast<std::size_t>(e.user);
    const auto i = static_cast<std::size_t>(num_users) + static_cast<std::size_t>(e.item);
    w[u][i] = 1.0 / static_cast<double>(ideg[e.item]);
    w[i][u] = 1.0 / static_cast<double>(udeg[e.user]);
  }
  Mat a = zeros(n, n);  // I - (1 - alpha) W
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) a[r][c] = (r == c ? 1.0 : 0.0) - (1.0 - alpha) * w[r][c];
  Vec b(n, 0.0);
  b[static_cast<std::size_t>(user)] = alpha;
  return solve(a, b);
}

}  // namespace oracle
