#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "serlab/config.hpp"
#include "serlab/policy.hpp"
#include "serlab/reward_model.hpp"
#include "serlab/self_evolve.hpp"
#include "serlab/world.hpp"

namespace serlab {

struct AssumptionReport {
  double acc0 = 0.0;       // pairwise accuracy on the labeled eval set
  double delta_p = 0.05;   // confidence margin around 0.5
  std::optional<double> alpha_hat;  // accuracy among confident predictions
  std::int64_t n_confident = 0;
  std::int64_t n_total = 0;
  double lipschitz_hat = 0.0;  // lower-bound probe, diagnostic only
};

using AnswerScoreFn =
    std::function<double(std::int64_t qid, std::int64_t aid)>;

// Accuracy of confident per-answer good/bad calls, where "good" means the
// answer's true quality exceeds its question's median candidate quality.
// Evaluated over every candidate of the eval pairs' questions.
AssumptionReport measure_alpha(const AnswerScoreFn& score, const World& world,
                               std::span<const PreferencePair> labeled_eval,
                               double delta_p);

AssumptionReport check_assumptions(const RewardNet& net, const World& world,
                                   std::span<const PreferencePair> labeled_eval,
                                   double delta_p, Rng& probe_rng,
                                   int lipschitz_probes = 200);

enum class Verdict { Pass, Fail, AssumptionsUnmet };

const char* to_string(Verdict v);

struct Theorem1Report {
  Verdict verdict = Verdict::Fail;
  std::vector<double> accuracy;            // per loop
  std::vector<double> alpha_hat;           // per loop; NaN when undefined
  std::vector<bool> alpha_above_half;      // per loop
  std::vector<LearningStatus> statuses;    // per loop
  double eps_stat = 0.0;  // 2 * sqrt(acc0 (1 - acc0) / n_test)
  std::int64_t n_test = 0;
  double worst_drop = 0.0;  // most negative consecutive accuracy change
};

// Runs the self-evolution loop under one config/seed and checks the
// monotone-accuracy claim with a statistical tolerance.
Theorem1Report validate_theorem1(const ExperimentConfig& cfg);

struct Theorem2Report {
  Verdict verdict = Verdict::Fail;
  std::vector<double> eps_levels;
  std::vector<std::vector<double>> regret;  // [seed][level]
  std::vector<double> mean_regret;          // per level, seeds averaged
  double mean_optimal_value = 0.0;
  double regret_at_zero = 0.0;
  double spearman = 0.0;
  double k_hat = 0.0;  // least-squares slope of mean regret vs eps
};

// For each sup-error level, trains PPO against the true scorer plus bounded
// deterministic noise and measures exact regret against the enumerated
// optimal policy. Pass: regret at 0 within 5% of the optimum and Spearman
// rank correlation of mean regret vs level >= 0.8.
Theorem2Report validate_theorem2(std::span<const double> eps_levels,
                                 const ExperimentConfig& cfg, int n_seeds);

// Deterministic bounded perturbation of the true scorer: for every
// (question, answer), quality + eps * u with u in [-1, 1] fixed per entry.
RewardFn perturbed_oracle(const World& world, double eps,
                          std::uint64_t noise_seed);

double spearman_correlation(std::span<const double> x,
                            std::span<const double> y);

double least_squares_slope(std::span<const double> x,
                           std::span<const double> y);

}  // namespace serlab
