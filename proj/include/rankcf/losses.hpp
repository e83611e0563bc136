#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rankcf {

enum class LossVariant { kNdcg, kAp, kRecallAtK, kBpr };

LossVariant loss_from_string(const std::string& s);
std::string to_string(LossVariant v);

struct LossConfig {
  LossVariant variant = LossVariant::kNdcg;
  double tau = 1.0;        // temperature of the rank sigmoids
  double tau_star = 1.0;   // temperature of the cutoff sigmoid in the recall loss
  std::vector<int> recall_k = {10, 20};
  // rank competitors restricted to negatives; by default other positives
  // also push a positive's rank down
  bool negatives_only_rank = false;
};

// Scores of one ranking batch: sampled positives and negatives of one user.
struct BatchScores {
  std::vector<double> pos;
  std::vector<double> neg;
};

double sigmoid_temp(double x, double tau);

// 1 + sum of sigmoid((s_j - s_p) / tau) over competitors j != p.
// p indexes batch.pos. Lies in [1, P + N].
double smooth_rank(std::size_t p, const BatchScores& batch, double tau,
                   bool negatives_only = false);

// Rank of positive p among the positives only (self excluded). In [1, P].
double smooth_rank_pos(std::size_t p, const BatchScores& batch, double tau);

double loss_ndcg(const BatchScores& batch, double tau, bool negatives_only = false);
double loss_ap(const BatchScores& batch, double tau, bool negatives_only = false);
double loss_recall_at_k(const BatchScores& batch, double tau, double tau_star,
                        const std::vector<int>& k_list, bool negatives_only = false);
// mean softplus(s_n - s_p) over all positive/negative pairs
double loss_bpr(const BatchScores& batch);

double loss_value(const LossConfig& cfg, const BatchScores& batch);

struct ScoreGrad {
  double value = 0.0;
  std::vector<double> pos;
  std::vector<double> neg;
};

// Loss value and its exact derivative w.r.t. every batch score.
ScoreGrad loss_grad(const LossConfig& cfg, const BatchScores& batch);

}  // namespace rankcf
