#include "rankcf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankcf/error.hpp"

namespace rankcf {

LossVariant loss_from_string(const std::string& s) {
  if (s == "ndcg") return LossVariant::kNdcg;
  if (s == "ap") return LossVariant::kAp;
  if (s == "recall_at_k") return LossVariant::kRecallAtK;
  if (s == "bpr") return LossVariant::kBpr;
  throw ConfigError("unknown loss '" + s + "' (expected ndcg|ap|recall_at_k|bpr)");
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kNdcg: return "ndcg";
    case LossVariant::kAp: return "ap";
    case LossVariant::kRecallAtK: return "recall_at_k";
    case LossVariant::kBpr: return "bpr";
  }
  return "?";
}

double sigmoid_temp(double x, double tau) {
  if (!(tau > 0.0)) throw ConfigError("sigmoid temperature must be positive");
  const double z = x / tau;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

constexpr double kLn2 = 0.69314718055994530941723212145818;

void check_batch(const BatchScores& b, bool need_neg) {
  if (b.pos.empty()) throw ConfigError("ranking batch has no positive scores");
  if (need_neg && b.neg.empty()) throw ConfigError("ranking batch has no negative scores");
  for (double s : b.pos)
    if (!std::isfinite(s)) throw NumericError("non-finite positive score in batch");
  for (double s : b.neg)
    if (!std::isfinite(s)) throw NumericError("non-finite negative score in batch");
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// 1/log2(1 + r) and its derivative in r
double dcg_gain(double r) { return kLn2 / std::log1p(r); }
double dcg_gain_deriv(double r) {
  const double l = std::log1p(r);
  return -kLn2 / ((1.0 + r) * l * l);
}

double ideal_dcg(std::size_t num_pos) {
  double s = 0.0;
  for (std::size_t i = 1; i <= num_pos; ++i) s += dcg_gain(static_cast<double>(i));
  return s;
}

// Competitor scores of positive p: other positives (unless restricted),
// then every negative.
struct Competitors {
  const BatchScores& b;
  bool neg_only;
  std::size_t p;
  template <typename F>
  void each(F&& f) const {
    if (!neg_only)
      for (std::size_t q = 0; q < b.pos.size(); ++q) {
        if (q == p) continue;
        f(b.pos[q], /*is_pos=*/true, q);
      }
    for (std::size_t n = 0; n < b.neg.size(); ++n) f(b.neg[n], false, n);
  }
};

}  // namespace

double smooth_rank(std::size_t p, const BatchScores& batch, double tau, bool negatives_only) {
  check_batch(batch, false);
  if (p >= batch.pos.size()) throw ShapeError("smooth_rank: positive index out of range");
  double r = 1.0;
  Competitors c{batch, negatives_only, p};
  c.each([&](double s, bool, std::size_t) { r += sigmoid_temp(s - batch.pos[p], tau); });
  return r;
}

double smooth_rank_pos(std::size_t p, const BatchScores& batch, double tau) {
  check_batch(batch, false);
  if (p >= batch.pos.size()) throw ShapeError("smooth_rank_pos: positive index out of range");
  double r = 1.0;
  for (std::size_t q = 0; q < batch.pos.size(); ++q) {
    if (q == p) continue;
    r += sigmoid_temp(batch.pos[q] - batch.pos[p], tau);
  }
  return r;
}

double loss_ndcg(const BatchScores& batch, double tau, bool negatives_only) {
  check_batch(batch, false);
  const double idcg = ideal_dcg(batch.pos.size());
  double dcg = 0.0;
  for (std::size_t p = 0; p < batch.pos.size(); ++p)
    dcg += dcg_gain(smooth_rank(p, batch, tau, negatives_only));
  return 1.0 - dcg / idcg;
}

double loss_ap(const BatchScores& batch, double tau, bool negatives_only) {
  check_batch(batch, false);
  const auto P = static_cast<double>(batch.pos.size());
  double acc = 0.0;
  for (std::size_t p = 0; p < batch.pos.size(); ++p)
    acc += smooth_rank_pos(p, batch, tau) / smooth_rank(p, batch, tau, negatives_only);
  return 1.0 - acc / P;
}

double loss_recall_at_k(const BatchScores& batch, double tau, double tau_star,
                        const std::vector<int>& k_list, bool negatives_only) {
  check_batch(batch, false);
  if (k_list.empty()) throw ConfigError("recall loss needs at least one cutoff");
  const auto P = batch.pos.size();
  double acc = 0.0;
  for (int k : k_list) {
    if (k <= 0) throw ConfigError("recall cutoff must be positive");
    const double denom = static_cast<double>(std::min<std::size_t>(P, static_cast<std::size_t>(k)));
    double hit = 0.0;
    for (std::size_t p = 0; p < P; ++p)
      hit += sigmoid_temp(static_cast<double>(k) - smooth_rank(p, batch, tau, negatives_only),
                          tau_star);
    acc += hit / denom;
  }
  return 1.0 - acc / static_cast<double>(k_list.size());
}

double loss_bpr(const BatchScores& batch) {
  check_batch(batch, true);
  double acc = 0.0;
  for (double sp : batch.pos)
    for (double sn : batch.neg) acc += softplus(sn - sp);
  return acc / (static_cast<double>(batch.pos.size()) * static_cast<double>(batch.neg.size()));
}

double loss_value(const LossConfig& cfg, const BatchScores& batch) {
  switch (cfg.variant) {
    case LossVariant::kNdcg: return loss_ndcg(batch, cfg.tau, cfg.negatives_only_rank);
    case LossVariant::kAp: return loss_ap(batch, cfg.tau, cfg.negatives_only_rank);
    case LossVariant::kRecallAtK:
      return loss_recall_at_k(batch, cfg.tau, cfg.tau_star, cfg.recall_k, cfg.negatives_only_rank);
    case LossVariant::kBpr: return loss_bpr(batch);
  }
  throw ConfigError("unknown loss variant");
}

namespace {

// sigma(s_j - s_p; tau) and its x-derivative for every competitor of every
// positive, plus the resulting smooth ranks
struct RankTableau {
  std::vector<double> rank;       // smooth_rank per positive
  std::vector<double> rank_pos;   // smooth_rank_pos per positive
  // per positive p: derivative sums and per-competitor derivatives
  std::vector<std::vector<double>> dpos;  // vs other positives (0 when restricted or q==p)
  std::vector<std::vector<double>> dneg;  // vs negatives
  std::vector<std::vector<double>> dpp;   // positives-only rank derivatives
};

RankTableau build_tableau(const BatchScores& b, double tau, bool neg_only) {
  const std::size_t P = b.pos.size(), N = b.neg.size();
  RankTableau t;
  t.rank.assign(P, 1.0);
  t.rank_pos.assign(P, 1.0);
  t.dpos.assign(P, std::vector<double>(P, 0.0));
  t.dneg.assign(P, std::vector<double>(N, 0.0));
  t.dpp.assign(P, std::vector<double>(P, 0.0));
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t q = 0; q < P; ++q) {
      if (q == p) continue;
      const double sig = sigmoid_temp(b.pos[q] - b.pos[p], tau);
      const double der = sig * (1.0 - sig) / tau;
      t.rank_pos[p] += sig;
      t.dpp[p][q] = der;
      if (!neg_only) {
        t.rank[p] += sig;
        t.dpos[p][q] = der;
      }
    }
    for (std::size_t n = 0; n < N; ++n) {
      const double sig = sigmoid_temp(b.neg[n] - b.pos[p], tau);
      t.rank[p] += sig;
      t.dneg[p][n] = sig * (1.0 - sig) / tau;
    }
  }
  return t;
}

// Adds c * d(rank_p)/d(score) for every score.
void add_rank_grad(const RankTableau& t, std::size_t p, double c, ScoreGrad& g) {
  double self = 0.0;
  for (std::size_t q = 0; q < g.pos.size(); ++q) {
    self += t.dpos[p][q];
    g.pos[q] += c * t.dpos[p][q];
  }
  for (std::size_t n = 0; n < g.neg.size(); ++n) {
    self += t.dneg[p][n];
    g.neg[n] += c * t.dneg[p][n];
  }
  g.pos[p] -= c * self;
}

void add_rank_pos_grad(const RankTableau& t, std::size_t p, double c, ScoreGrad& g) {
  double self = 0.0;
  for (std::size_t q = 0; q < g.pos.size(); ++q) {
    self += t.dpp[p][q];
    g.pos[q] += c * t.dpp[p][q];
  }
  g.pos[p] -= c * self;
}

ScoreGrad grad_ndcg(const BatchScores& b, double tau, bool neg_only) {
  const std::size_t P = b.pos.size();
  auto t = build_tableau(b, tau, neg_only);
  ScoreGrad g;
  g.pos.assign(P, 0.0);
  g.neg.assign(b.neg.size(), 0.0);
  const double idcg = ideal_dcg(P);
  double dcg = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    dcg += dcg_gain(t.rank[p]);
    add_rank_grad(t, p, -dcg_gain_deriv(t.rank[p]) / idcg, g);
  }
  g.value = 1.0 - dcg / idcg;
  return g;
}

ScoreGrad grad_ap(const BatchScores& b, double tau, bool neg_only) {
  const std::size_t P = b.pos.size();
  auto t = build_tableau(b, tau, neg_only);
  ScoreGrad g;
  g.pos.assign(P, 0.0);
  g.neg.assign(b.neg.size(), 0.0);
  double acc = 0.0;
  const auto Pf = static_cast<double>(P);
  for (std::size_t p = 0; p < P; ++p) {
    const double r = t.rank[p], rp = t.rank_pos[p];
    acc += rp / r;
    // d(1 - rp/r)/ds = -(rp' r - rp r') / (P r^2)
    add_rank_pos_grad(t, p, -1.0 / (Pf * r), g);
    add_rank_grad(t, p, rp / (Pf * r * r), g);
  }
  g.value = 1.0 - acc / Pf;
  return g;
}

ScoreGrad grad_recall(const BatchScores& b, double tau, double tau_star,
                      const std::vector<int>& k_list, bool neg_only) {
  if (k_list.empty()) throw ConfigError("recall loss needs at least one cutoff");
  const std::size_t P = b.pos.size();
  auto t = build_tableau(b, tau, neg_only);
  ScoreGrad g;
  g.pos.assign(P, 0.0);
  g.neg.assign(b.neg.size(), 0.0);
  double acc = 0.0;
  const auto Kf = static_cast<double>(k_list.size());
  for (std::size_t p = 0; p < P; ++p) {
    double c = 0.0;
    for (int k : k_list) {
      if (k <= 0) throw ConfigError("recall cutoff must be positive");
      const double denom =
          static_cast<double>(std::min<std::size_t>(P, static_cast<std::size_t>(k)));
      const double sig = sigmoid_temp(static_cast<double>(k) - t.rank[p], tau_star);
      acc += sig / (denom * Kf);
      c += sig * (1.0 - sig) / (tau_star * denom * Kf);
    }
    add_rank_grad(t, p, c, g);
  }
  g.value = 1.0 - acc;
  return g;
}

ScoreGrad grad_bpr(const BatchScores& b) {
  check_batch(b, true);
  const std::size_t P = b.pos.size(), N = b.neg.size();
  ScoreGrad g;
  g.pos.assign(P, 0.0);
  g.neg.assign(N, 0.0);
  const double w = 1.0 / (static_cast<double>(P) * static_cast<double>(N));
  double acc = 0.0;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t n = 0; n < N; ++n) {
      const double x = b.neg[n] - b.pos[p];
      acc += softplus(x);
      const double sig = sigmoid_temp(x, 1.0);
      g.neg[n] += w * sig;
      g.pos[p] -= w * sig;
    }
  g.value = acc * w;
  return g;
}

}  // namespace

ScoreGrad loss_grad(const LossConfig& cfg, const BatchScores& batch) {
  check_batch(batch, cfg.variant == LossVariant::kBpr);
  switch (cfg.variant) {
    case LossVariant::kNdcg: return grad_ndcg(batch, cfg.tau, cfg.negatives_only_rank);
    case LossVariant::kAp: return grad_ap(batch, cfg.tau, cfg.negatives_only_rank);
    case LossVariant::kRecallAtK:
      return grad_recall(batch, cfg.tau, cfg.tau_star, cfg.recall_k, cfg.negatives_only_rank);
    case LossVariant::kBpr: return grad_bpr(batch);
  }
  throw ConfigError("unknown loss variant");
}

}  // namespace rankcf
