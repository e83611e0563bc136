#include "rankcf/model.hpp"

#include <cmath>

#include "rankcf/error.hpp"
#include "rankcf/rng.hpp"

namespace rankcf {

Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::kMean;
  if (s == "sum") return Pooling::kSum;
  throw ConfigError("unknown pooling '" + s + "' (expected mean|sum)");
}

std::string to_string(Pooling p) { return p == Pooling::kMean ? "mean" : "sum"; }

Mode mode_from_string(const std::string& s) {
  if (s == "transductive") return Mode::kTransductive;
  if (s == "inductive") return Mode::kInductive;
  throw ConfigError("unknown protocol '" + s + "' (expected transductive|inductive)");
}

std::string to_string(Mode m) { return m == Mode::kTransductive ? "transductive" : "inductive"; }

EmbeddingTable make_table(std::int32_t num_users, std::int32_t num_items, std::int32_t dim) {
  EmbeddingTable t;
  t.dim = dim;
  t.user_emb = Matrix(num_users, dim);
  t.item_emb = Matrix(num_items, dim);
  return t;
}

EmbeddingTable init_embeddings(std::int32_t num_users, std::int32_t num_items, std::int32_t dim,
                               double std_dev, std::uint64_t seed, bool zero_users) {
  if (dim <= 0) throw ConfigError("embedding dim must be positive");
  EmbeddingTable t = make_table(num_users, num_items, dim);
  Rng rng(seed);
  if (!zero_users)
    for (auto& v : t.user_emb.a) v = std_dev * rng.next_normal();
  for (auto& v : t.item_emb.a) v = std_dev * rng.next_normal();
  return t;
}

namespace {

void check_shapes(const BipartiteGraph& g, const EmbeddingTable& e) {
  if (e.user_emb.rows != g.num_users || e.item_emb.rows != g.num_items ||
      e.user_emb.cols != e.dim || e.item_emb.cols != e.dim)
    throw ShapeError("embedding table does not match graph dimensions");
}

// One application of the normalized adjacency in concatenated (user, item)
// space. Symmetric: the same coefficients feed both directions.
void adjacency_apply(const BipartiteGraph& g, const EmbeddingTable& in, EmbeddingTable& out) {
  const std::int32_t d = in.dim;
  out.user_emb.zero();
  out.item_emb.zero();
  for (std::int32_t u = 0; u < g.num_users; ++u) {
    double* dst = out.user_emb.row(u);
    for (std::int64_t e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      const double c = g.user_coeff[e];
      const double* src = in.item_emb.row(g.user_nbr[e]);
      for (std::int32_t k = 0; k < d; ++k) dst[k] += c * src[k];
    }
  }
  for (std::int32_t i = 0; i < g.num_items; ++i) {
    double* dst = out.item_emb.row(i);
    for (std::int64_t e = g.item_ptr[i]; e < g.item_ptr[i + 1]; ++e) {
      const double c = g.item_coeff[e];
      const double* src = in.user_emb.row(g.item_nbr[e]);
      for (std::int32_t k = 0; k < d; ++k) dst[k] += c * src[k];
    }
  }
}

void axpy_table(EmbeddingTable& acc, const EmbeddingTable& x, double wu, double wi) {
  for (std::size_t k = 0; k < acc.user_emb.a.size(); ++k) acc.user_emb.a[k] += wu * x.user_emb.a[k];
  for (std::size_t k = 0; k < acc.item_emb.a.size(); ++k) acc.item_emb.a[k] += wi * x.item_emb.a[k];
}

}  // namespace

std::vector<EmbeddingTable> propagate(const BipartiteGraph& g, const EmbeddingTable& e0, int L) {
  if (L < 0) throw ConfigError("layer count must be >= 0");
  check_shapes(g, e0);
  std::vector<EmbeddingTable> layers;
  layers.reserve(static_cast<std::size_t>(L) + 1);
  layers.push_back(e0);
  for (int k = 0; k < L; ++k) {
    EmbeddingTable next = make_table(g.num_users, g.num_items, e0.dim);
    adjacency_apply(g, layers.back(), next);
    layers.push_back(std::move(next));
  }
  return layers;
}

std::vector<double> pooling_weights_user(int L, Pooling pooling, Mode mode) {
  std::vector<double> w(static_cast<std::size_t>(L) + 1, 0.0);
  if (pooling == Pooling::kSum) {
    for (auto& v : w) v = 1.0;
    if (mode == Mode::kInductive) w[0] = 0.0;  // layer 0 is identically zero
    return w;
  }
  if (mode == Mode::kInductive) {
    if (L == 0) throw ConfigError("inductive mean pooling needs at least one layer");
    for (int k = 1; k <= L; ++k) w[k] = 1.0 / static_cast<double>(L);
  } else {
    for (int k = 0; k <= L; ++k) w[k] = 1.0 / static_cast<double>(L + 1);
  }
  return w;
}

std::vector<double> pooling_weights_item(int L, Pooling pooling, Mode /*mode*/) {
  std::vector<double> w(static_cast<std::size_t>(L) + 1, 0.0);
  if (pooling == Pooling::kSum) {
    for (auto& v : w) v = 1.0;
    return w;
  }
  for (int k = 0; k <= L; ++k) w[k] = 1.0 / static_cast<double>(L + 1);
  return w;
}

EmbeddingTable pool(const std::vector<EmbeddingTable>& layers, Pooling pooling, Mode mode) {
  if (layers.empty()) throw StateError("pool called without propagated layers");
  const int L = static_cast<int>(layers.size()) - 1;
  auto wu = pooling_weights_user(L, pooling, mode);
  auto wi = pooling_weights_item(L, pooling, mode);
  EmbeddingTable out = make_table(layers[0].user_emb.rows, layers[0].item_emb.rows, layers[0].dim);
  for (int k = 0; k <= L; ++k) axpy_table(out, layers[k], wu[k], wi[k]);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot product on vectors of different length");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

std::vector<double> score(std::span<const double> user_vec, const Matrix& item_emb,
                          std::span<const std::int32_t> items) {
  std::vector<double> out;
  out.reserve(items.size());
  for (auto i : items) {
    if (i < 0 || i >= item_emb.rows) throw ShapeError("score: item id out of range");
    out.push_back(dot(user_vec, std::span<const double>(item_emb.row(i), user_vec.size())));
  }
  return out;
}

std::vector<double> infer_user(const std::vector<std::int32_t>& fold_in,
                               const std::vector<EmbeddingTable>& layers,
                               const BipartiteGraph& g, Pooling pooling) {
  if (fold_in.empty()) throw StateError("cannot infer a user from an empty fold-in");
  if (layers.empty()) throw StateError("infer_user called without propagated layers");
  const int L = static_cast<int>(layers.size()) - 1;
  const std::int32_t d = layers[0].dim;

  std::vector<double> coeff;
  coeff.reserve(fold_in.size());
  const double fi = static_cast<double>(fold_in.size());
  for (auto i : fold_in) {
    if (i < 0 || i >= g.num_items) throw ShapeError("fold-in item id out of range");
    auto deg = g.item_degree(i);
    if (deg == 0)
      throw StateError("fold-in item " + std::to_string(i) + " has no training interactions");
    coeff.push_back(1.0 / std::sqrt(fi * static_cast<double>(deg)));
  }

  auto w = pooling_weights_user(L, pooling, Mode::kInductive);
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int k = 1; k <= L; ++k) {
    if (w[k] == 0.0) continue;
    for (std::size_t j = 0; j < fold_in.size(); ++j) {
      const double c = w[k] * coeff[j];
      const double* src = layers[static_cast<std::size_t>(k) - 1].item_emb.row(fold_in[j]);
      for (std::int32_t t = 0; t < d; ++t) out[t] += c * src[t];
    }
  }
  return out;
}

Forward forward(const BipartiteGraph& g, const EmbeddingTable& e0, const ModelConfig& cfg) {
  Forward f;
  f.layers = propagate(g, e0, cfg.layers);
  f.final = pool(f.layers, cfg.pooling, cfg.mode);
  return f;
}

EmbeddingTable backward(const BipartiteGraph& g, const Forward& fwd,
                        const EmbeddingTable& grad_final, const ModelConfig& cfg) {
  if (fwd.layers.empty()) throw StateError("backward called before forward");
  const int L = static_cast<int>(fwd.layers.size()) - 1;
  check_shapes(g, grad_final);
  auto wu = pooling_weights_user(L, cfg.pooling, cfg.mode);
  auto wi = pooling_weights_item(L, cfg.pooling, cfg.mode);

  // grad_e0 = sum_k A^k (W_k grad_final); evaluated Horner-style so the
  // cost matches one forward sweep
  EmbeddingTable acc = make_table(g.num_users, g.num_items, grad_final.dim);
  axpy_table(acc, grad_final, wu[L], wi[L]);
  EmbeddingTable tmp = make_table(g.num_users, g.num_items, grad_final.dim);
  for (int k = L - 1; k >= 0; --k) {
    adjacency_apply(g, acc, tmp);
    std::swap(acc, tmp);
    axpy_table(acc, grad_final, wu[k], wi[k]);
  }
  return acc;
}

}  // namespace rankcf
