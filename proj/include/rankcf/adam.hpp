#pragma once

#include "rankcf/embedding.hpp"
#include "rankcf/model.hpp"

namespace rankcf {

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  bool update_users = true;  // false when user embeddings are not trainable
  Matrix m_user, v_user;
  Matrix m_item, v_item;
};

AdamState make_adam(const EmbeddingTable& params, Mode mode, double lr, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);

// One bias-corrected update over the trainable blocks. Any non-finite
// gradient entry aborts with a numerical error naming the block.
void adam_step(EmbeddingTable& params, const EmbeddingTable& grads, AdamState& s);

}  // namespace rankcf
