#include "rankcf/adam.hpp"

#include <cmath>

#include "rankcf/error.hpp"

namespace rankcf {

AdamState make_adam(const EmbeddingTable& params, Mode mode, double lr, double beta1, double beta2,
                    double eps) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.update_users = (mode == Mode::kTransductive);
  if (s.update_users) {
    s.m_user = Matrix(params.user_emb.rows, params.user_emb.cols);
    s.v_user = Matrix(params.user_emb.rows, params.user_emb.cols);
  }
  s.m_item = Matrix(params.item_emb.rows, params.item_emb.cols);
  s.v_item = Matrix(params.item_emb.rows, params.item_emb.cols);
  return s;
}

namespace {

void update_block(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, const AdamState& s,
                  double bc1, double bc2, const char* block) {
  if (p.rows != g.rows || p.cols != g.cols)
    throw ShapeError(std::string("adam: gradient shape mismatch on ") + block);
  for (std::size_t k = 0; k < p.a.size(); ++k) {
    const double gk = g.a[k];
    if (!std::isfinite(gk))
      throw NumericError(std::string("non-finite gradient in ") + block + " block");
    m.a[k] = s.beta1 * m.a[k] + (1.0 - s.beta1) * gk;
    v.a[k] = s.beta2 * v.a[k] + (1.0 - s.beta2) * gk * gk;
    const double mhat = m.a[k] / bc1;
    const double vhat = v.a[k] / bc2;
    p.a[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

void adam_step(EmbeddingTable& params, const EmbeddingTable& grads, AdamState& s) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  if (s.update_users)
    update_block(params.user_emb, grads.user_emb, s.m_user, s.v_user, s, bc1, bc2, "user_emb");
  update_block(params.item_emb, grads.item_emb, s.m_item, s.v_item, s, bc1, bc2, "item_emb");
}

}  // namespace rankcf
