#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "serlab/rng.hpp"
#include "serlab/world.hpp"

namespace serlab {

// Feed-forward scorer: concat(question, answer) -> tanh hidden layer ->
// scalar logit -> sigmoid probability.
class RewardNet {
 public:
  static constexpr std::uint32_t kVersion = 1;

  RewardNet(int feature_dim, int hidden);  // zero-initialized
  static RewardNet random_init(int feature_dim, int hidden, Rng& rng);

  int feature_dim() const { return d_; }   // per-vector dim d; input is 2d
  int input_dim() const { return 2 * d_; }
  int hidden() const { return h_; }

  std::span<double> flat() { return weights_; }
  std::span<const double> flat() const { return weights_; }
  static std::size_t weight_count(int feature_dim, int hidden) {
    const std::size_t h = static_cast<std::size_t>(hidden);
    return h * 2 * static_cast<std::size_t>(feature_dim) + 2 * h + 1;
  }

  // Pre-sigmoid network output.
  double logit(std::span<const double> q_feat,
               std::span<const double> a_feat) const;
  // Probability in (0, 1), strictly, for finite inputs.
  double score(std::span<const double> q_feat,
               std::span<const double> a_feat) const;

  // Flat layout: W1 (h x 2d, row-major), b1 (h), w2 (h), b2.
  double* w1() { return weights_.data(); }
  const double* w1() const { return weights_.data(); }
  double* b1() { return weights_.data() + static_cast<std::size_t>(h_) * 2 * d_; }
  const double* b1() const { return weights_.data() + static_cast<std::size_t>(h_) * 2 * d_; }
  double* w2() { return b1() + h_; }
  const double* w2() const { return b1() + h_; }
  double& b2() { return weights_[weights_.size() - 1]; }
  double b2() const { return weights_[weights_.size() - 1]; }

 private:
  int d_;
  int h_;
  std::vector<double> weights_;
};

struct TrainHyper {
  double learning_rate = 2e-3;
  int epochs = 2;
  int batch_size = 32;
  double margin = 0.1;
  double weight_decay = 0.0;
  std::uint64_t rng_seed = 0;
};

void validate(const TrainHyper& hyper);

// Hinge on a scored pair: max(0, margin - (p_chosen - p_rejected)).
double pair_hinge(double p_chosen, double p_rejected, double margin);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean hinge over a chosen-first batch plus its exact gradient. Pairs at or
// beyond the margin contribute zero to both.
LossGrad pairwise_loss_and_grad(const RewardNet& net, const FeatureStore& store,
                                std::span<const PreferencePair> chosen_first,
                                double margin);

double pairwise_loss(const RewardNet& net, const FeatureStore& store,
                     std::span<const PreferencePair> chosen_first,
                     double margin);

struct TrainResult {
  RewardNet params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool loss_increased = false;
};

// Seeded mini-batch gradient descent over chosen-first pairs. The input net
// is left untouched.
TrainResult train(const RewardNet& net, const FeatureStore& store,
                  std::span<const PreferencePair> chosen_first,
                  const TrainHyper& hyper);

// Fraction of labeled pairs whose chosen answer outscores the rejected one;
// exact ties count as incorrect.
double evaluate_accuracy(const RewardNet& net, const FeatureStore& store,
                         std::span<const PreferencePair> labeled);

// Copy of `pairs` with every pair reoriented so the chosen answer is first.
std::vector<PreferencePair> orient_chosen_first(
    std::span<const PreferencePair> pairs);

}  // namespace serlab
