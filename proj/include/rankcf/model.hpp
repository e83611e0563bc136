#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rankcf/embedding.hpp"
#include "rankcf/graph.hpp"

namespace rankcf {

enum class Pooling { kMean, kSum };
enum class Mode { kTransductive, kInductive };

Pooling pooling_from_string(const std::string& s);
std::string to_string(Pooling p);
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct ModelConfig {
  std::int32_t dim = 64;
  int layers = 3;
  Pooling pooling = Pooling::kMean;
  Mode mode = Mode::kTransductive;
};

// One normalized propagation sweep: every layer-(k+1) vector is the
// coefficient-weighted sum of the other side's layer-k vectors.
// Returns layers 0..L (L+1 tables).
std::vector<EmbeddingTable> propagate(const BipartiteGraph& g, const EmbeddingTable& e0, int L);

// Combines layers into final representations. Inductive mode averages the
// user side over layers 1..L only (layer 0 carries no signal there); sum
// pooling adds all layers on both sides in either mode.
EmbeddingTable pool(const std::vector<EmbeddingTable>& layers, Pooling pooling, Mode mode);

// Per-layer pooling weights implied by pool(); index k = weight of layer k.
std::vector<double> pooling_weights_user(int L, Pooling pooling, Mode mode);
std::vector<double> pooling_weights_item(int L, Pooling pooling, Mode mode);

double dot(std::span<const double> a, std::span<const double> b);

// Scores of one user vector against each listed item row.
std::vector<double> score(std::span<const double> user_vec, const Matrix& item_emb,
                          std::span<const std::int32_t> items);

// Final vector for a user outside the graph, described only by fold_in
// items. Aggregation coefficient per item is 1/sqrt(|fold_in| * deg(i))
// with deg(i) taken from the training graph as-is.
std::vector<double> infer_user(const std::vector<std::int32_t>& fold_in,
                               const std::vector<EmbeddingTable>& layers,
                               const BipartiteGraph& g, Pooling pooling);

struct Forward {
  std::vector<EmbeddingTable> layers;
  EmbeddingTable final;
};

Forward forward(const BipartiteGraph& g, const EmbeddingTable& e0, const ModelConfig& cfg);

// Gradient of the loss w.r.t. layer-0 embeddings given the gradient w.r.t.
// the pooled output. The propagation operator is linear and symmetric, so
// the pullback is the same sweep applied in reverse layer order.
EmbeddingTable backward(const BipartiteGraph& g, const Forward& fwd,
                        const EmbeddingTable& grad_final, const ModelConfig& cfg);

}  // namespace rankcf
