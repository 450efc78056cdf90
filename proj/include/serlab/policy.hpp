#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "serlab/reward_model.hpp"
#include "serlab/rng.hpp"
#include "serlab/world.hpp"

namespace serlab {

// Linear scorer over concat(context, answer); softmax across a question's
// candidates defines the action distribution.
struct PolicyParams {
  int feature_dim = 0;
  std::vector<double> weights;  // size 2 * feature_dim, zero = uniform policy

  static PolicyParams zeros(int feature_dim);
};

struct PpoHyper {
  double clip_epsilon = 0.2;
  double learning_rate = 1e-3;
  int ppo_epochs = 4;
  int batch_size = 8;
  double target_kl = 0.1;
  double init_kl_coeff = 0.2;
  double grad_clip = 1.0;  // per-update gradient norm bound
  double t_clip = 0.0;     // reward-scaling clip point
  double new_min = -1.0;
  double new_max = 1.0;
  int steps = 1000;
  std::uint64_t rng_seed = 0;
};

void validate(const PpoHyper& hyper);

struct Rollout {
  std::int64_t question_id = 0;
  std::int64_t answer_id = 0;
  double behavior_prob = 0.0;  // pi_old(answer | question), in (0, 1]
  double raw_reward = 0.0;
  double scaled_reward = 0.0;
  double advantage = 0.0;
};

// ((sigmoid(raw) - t_clip) * (new_max - new_min) / (1 - t_clip)) + new_min,
// clamped into [new_min, new_max].
double scale_reward(double raw, double t_clip, double new_min, double new_max);

// Per-sample clipped surrogate: min(ratio * adv, clip(ratio) * adv).
double clipped_objective(double ratio, double advantage, double clip_epsilon);

std::vector<double> action_probabilities(const PolicyParams& policy,
                                         const FeatureStore& store,
                                         std::int64_t qid);

struct SampledAction {
  std::int64_t answer_id = 0;
  double probability = 0.0;
};

SampledAction sample_action(const PolicyParams& policy,
                            const FeatureStore& store, std::int64_t qid,
                            Rng& rng);

struct PpoDiagnostics {
  double mean_ratio = 1.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double kl_coeff_next = 0.0;
};

struct PpoStepResult {
  PolicyParams policy;
  PpoDiagnostics diag;
};

// ppo_epochs ascent passes on the clipped surrogate minus kl_coeff times an
// approximate KL to the behavior policy; gradient norm clipped to grad_clip.
// Diagnostics reflect the returned policy; kl_coeff_next doubles when
// approx_kl > 2 * target_kl and halves when below target_kl / 2.
PpoStepResult ppo_step(const PolicyParams& policy, const FeatureStore& store,
                       std::span<const Rollout> rollouts, const PpoHyper& hyper,
                       double kl_coeff);

using RewardFn =
    std::function<double(std::int64_t question_id, std::int64_t answer_id)>;

struct PpoCurvePoint {
  int step = 0;
  double mean_scaled_reward = 0.0;
  double approx_kl = 0.0;
  double clip_frac = 0.0;
  double kl_coeff = 0.0;
};

struct PpoRun {
  PolicyParams policy;
  std::vector<PpoCurvePoint> curve;
};

// Bandit PPO: sample a batch of prompts, draw one answer each, reward,
// scale, baseline by the batch mean, step. Deterministic given the seed.
PpoRun train_ppo(const PolicyParams& policy, const FeatureStore& store,
                 const RewardFn& reward, std::span<const std::int64_t> prompts,
                 const PpoHyper& hyper);

// Convenience overload scoring with the reward net's raw logit (the scaling
// formula applies its own sigmoid).
PpoRun train_ppo(const PolicyParams& policy, const FeatureStore& store,
                 const RewardNet& reward_net,
                 std::span<const std::int64_t> prompts, const PpoHyper& hyper);

using AnswerSampler = std::function<std::int64_t(std::int64_t qid, Rng& rng)>;

struct WinRate {
  std::int64_t win = 0;
  std::int64_t tie = 0;
  std::int64_t lose = 0;
};

// Samples one answer per side per prompt from identically derived streams
// and compares true qualities; |q_a - q_b| <= tie_eps is a tie. Swapping the
// sides swaps win and lose exactly.
WinRate judge_win_rate(const AnswerSampler& policy_a,
                       const AnswerSampler& policy_b, const World& world,
                       std::span<const std::int64_t> prompts, Rng& rng,
                       double tie_eps = 1e-9);

WinRate judge_win_rate(const PolicyParams& policy_a,
                       const PolicyParams& policy_b, const World& world,
                       std::span<const std::int64_t> prompts, Rng& rng,
                       double tie_eps = 1e-9);

AnswerSampler make_sampler(const PolicyParams& policy,
                           const FeatureStore& store);

// Exact expectations under the true qualities (no sampling).
double expected_true_reward(const PolicyParams& policy, const World& world,
                            std::span<const std::int64_t> prompts);
double optimal_expected_true_reward(const World& world,
                                    std::span<const std::int64_t> prompts);
double worst_expected_true_reward(const World& world,
                                  std::span<const std::int64_t> prompts);

}  // namespace serlab
