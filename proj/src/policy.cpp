#include "serlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

constexpr std::uint64_t kPromptTag = 0xB00C;
constexpr std::uint64_t kActionTag = 0xAC7;

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot_concat(std::span<const double> w, std::span<const double> q,
                  std::span<const double> a) {
  const std::size_t d = q.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += w[i] * q[i];
  for (std::size_t i = 0; i < d; ++i) s += w[d + i] * a[i];
  return s;
}

// d log pi(answer_ids[pick]) / d w, written into grad_out (size 2d).
void logpi_gradient(const FeatureStore& store, std::int64_t qid,
                    const std::vector<std::int64_t>& cands,
                    const std::vector<double>& probs, std::size_t pick,
                    std::vector<double>& grad_out) {
  const auto q = store.question_features(qid);
  const std::size_t d = q.size();
  grad_out.assign(2 * d, 0.0);
  const auto picked = store.answer_features(qid, cands[pick]);
  for (std::size_t i = 0; i < d; ++i) grad_out[d + i] += picked[i];
  // The context part of every candidate embedding is identical, so it
  // cancels against the softmax mean exactly; only answer features remain.
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const auto a = store.answer_features(qid, cands[k]);
    for (std::size_t i = 0; i < d; ++i) grad_out[d + i] -= probs[k] * a[i];
  }
}

}  // namespace

PolicyParams PolicyParams::zeros(int feature_dim) {
  PolicyParams p;
  p.feature_dim = feature_dim;
  p.weights.assign(static_cast<std::size_t>(2 * feature_dim), 0.0);
  return p;
}

void validate(const PpoHyper& h) {
  if (!(h.clip_epsilon > 0.0 && h.clip_epsilon < 1.0)) {
    throw ConfigError("ppo.clip_epsilon must lie in (0, 1)");
  }
  if (!(h.learning_rate >= 0.0) || !std::isfinite(h.learning_rate)) {
    throw ConfigError("ppo.learning_rate must be >= 0");
  }
  if (h.ppo_epochs < 1) throw ConfigError("ppo.ppo_epochs must be >= 1");
  if (h.batch_size < 1) throw ConfigError("ppo.batch_size must be >= 1");
  if (!(h.target_kl > 0.0)) throw ConfigError("ppo.target_kl must be > 0");
  if (!(h.init_kl_coeff >= 0.0)) {
    throw ConfigError("ppo.init_kl_coeff must be >= 0");
  }
  if (!(h.grad_clip > 0.0)) throw ConfigError("ppo.grad_clip must be > 0");
  if (!(h.t_clip >= 0.0 && h.t_clip < 1.0)) {
    throw ConfigError("ppo.t_clip must lie in [0, 1)");
  }
  if (!(h.new_min < h.new_max)) {
    throw ConfigError("ppo.new_min must be below ppo.new_max");
  }
  if (h.steps < 0) throw ConfigError("ppo.steps must be >= 0");
}

double scale_reward(double raw, double t_clip, double new_min,
                    double new_max) {
  if (!(t_clip >= 0.0 && t_clip < 1.0)) {
    throw ArgumentError("t_clip must lie in [0, 1)");
  }
  if (!(new_min < new_max)) {
    throw ArgumentError("reward bounds need new_min < new_max");
  }
  const double scaled =
      (sigmoid(raw) - t_clip) * (new_max - new_min) / (1.0 - t_clip) + new_min;
  return std::clamp(scaled, new_min, new_max);
}

double clipped_objective(double ratio, double advantage, double clip_epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

std::vector<double> action_probabilities(const PolicyParams& policy,
                                         const FeatureStore& store,
                                         std::int64_t qid) {
  if (policy.feature_dim != store.dim()) {
    throw ShapeError("policy expects d=" + std::to_string(policy.feature_dim) +
                     ", store has d=" + std::to_string(store.dim()));
  }
  const auto& cands = store.answer_ids(qid);
  if (cands.empty()) throw LookupError("question " + std::to_string(qid) +
                                       " has no candidates");
  const auto q = store.question_features(qid);
  std::vector<double> logits(cands.size());
  double max_logit = -1e300;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    logits[k] = dot_concat(policy.weights, q,
                           store.answer_features(qid, cands[k]));
    max_logit = std::max(max_logit, logits[k]);
  }
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

SampledAction sample_action(const PolicyParams& policy,
                            const FeatureStore& store, std::int64_t qid,
                            Rng& rng) {
  const auto probs = action_probabilities(policy, store, qid);
  const auto& cands = store.answer_ids(qid);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc || k + 1 == probs.size()) {
      return {cands[k], probs[k]};
    }
  }
  return {cands.back(), probs.back()};
}

PpoStepResult ppo_step(const PolicyParams& policy, const FeatureStore& store,
                       std::span<const Rollout> rollouts, const PpoHyper& hyper,
                       double kl_coeff) {
  if (rollouts.empty()) throw ArgumentError("empty rollout batch");
  validate(hyper);
  for (const Rollout& r : rollouts) {
    if (!(r.behavior_prob > 0.0 && r.behavior_prob <= 1.0)) {
      throw ArgumentError("rollout behavior probability outside (0, 1]");
    }
  }

  PpoStepResult out{policy, {}};
  const std::size_t n = rollouts.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(out.policy.weights.size());
  std::vector<double> logpi_grad;

  auto measure_and_grad = [&](bool with_grad) -> PpoDiagnostics {
    PpoDiagnostics diag;
    diag.mean_ratio = 0.0;
    if (with_grad) std::fill(grad.begin(), grad.end(), 0.0);
    double objective = 0.0;
    for (const Rollout& r : rollouts) {
      const auto& cands = store.answer_ids(r.question_id);
      const auto probs = action_probabilities(out.policy, store, r.question_id);
      std::size_t pick = cands.size();
      for (std::size_t k = 0; k < cands.size(); ++k) {
        if (cands[k] == r.answer_id) {
          pick = k;
          break;
        }
      }
      if (pick == cands.size()) {
        throw LookupError("rollout answer " + std::to_string(r.answer_id) +
                          " not among candidates of question " +
                          std::to_string(r.question_id));
      }
      const double ratio = probs[pick] / r.behavior_prob;
      const double kl3 = (ratio - 1.0) - std::log(ratio);
      diag.mean_ratio += ratio * inv_n;
      diag.approx_kl += kl3 * inv_n;
      if (std::abs(ratio - 1.0) > hyper.clip_epsilon) diag.clip_frac += inv_n;
      objective += clipped_objective(ratio, r.advantage, hyper.clip_epsilon) -
                   kl_coeff * kl3;
      if (!with_grad) continue;

      const bool outside = ratio < 1.0 - hyper.clip_epsilon ||
                           ratio > 1.0 + hyper.clip_epsilon;
      const double clipped = std::clamp(ratio, 1.0 - hyper.clip_epsilon,
                                        1.0 + hyper.clip_epsilon);
      const bool clipped_branch = clipped * r.advantage < ratio * r.advantage;
      double coeff = (clipped_branch && outside) ? 0.0 : r.advantage * ratio;
      coeff -= kl_coeff * (ratio - 1.0);  // d kl3 / d w = (ratio-1) dlogpi
      if (coeff == 0.0) continue;
      logpi_gradient(store, r.question_id, cands, probs, pick, logpi_grad);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] += coeff * inv_n * logpi_grad[i];
      }
    }
    if (!std::isfinite(objective)) {
      throw DivergenceError("non-finite PPO objective");
    }
    return diag;
  };

  for (int epoch = 0; epoch < hyper.ppo_epochs; ++epoch) {
    measure_and_grad(true);
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    const double scale =
        norm > hyper.grad_clip ? hyper.grad_clip / norm : 1.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.policy.weights[i] += hyper.learning_rate * scale * grad[i];
    }
  }

  out.diag = measure_and_grad(false);
  out.diag.kl_coeff_next = kl_coeff;
  if (out.diag.approx_kl > 2.0 * hyper.target_kl) {
    out.diag.kl_coeff_next = kl_coeff * 2.0;
  } else if (out.diag.approx_kl < hyper.target_kl / 2.0) {
    out.diag.kl_coeff_next = kl_coeff * 0.5;
  }
  return out;
}

PpoRun train_ppo(const PolicyParams& policy, const FeatureStore& store,
                 const RewardFn& reward, std::span<const std::int64_t> prompts,
                 const PpoHyper& hyper) {
  validate(hyper);
  if (prompts.empty()) throw ArgumentError("empty prompt list");
  for (std::int64_t qid : prompts) {
    if (store.answer_ids(qid).size() < 2) {
      throw ConfigError("prompt " + std::to_string(qid) +
                        " has fewer than 2 candidates");
    }
  }

  PpoRun run{policy, {}};
  run.curve.reserve(static_cast<std::size_t>(hyper.steps));
  const Rng root(hyper.rng_seed);
  double kl_coeff = hyper.init_kl_coeff;
  std::vector<Rollout> batch(static_cast<std::size_t>(hyper.batch_size));

  for (int step = 0; step < hyper.steps; ++step) {
    const Rng srng = root.split(static_cast<std::uint64_t>(step));
    double reward_sum = 0.0;
    for (int j = 0; j < hyper.batch_size; ++j) {
      Rng jrng = srng.split(static_cast<std::uint64_t>(j));
      const std::int64_t qid = prompts[static_cast<std::size_t>(
          jrng.split(kPromptTag).below(prompts.size()))];
      Rng arng = jrng.split(kActionTag);
      const SampledAction act = sample_action(run.policy, store, qid, arng);
      Rollout& r = batch[static_cast<std::size_t>(j)];
      r.question_id = qid;
      r.answer_id = act.answer_id;
      r.behavior_prob = act.probability;
      r.raw_reward = reward(qid, act.answer_id);
      r.scaled_reward =
          scale_reward(r.raw_reward, hyper.t_clip, hyper.new_min, hyper.new_max);
      reward_sum += r.scaled_reward;
    }
    const double baseline = reward_sum / static_cast<double>(hyper.batch_size);
    for (Rollout& r : batch) r.advantage = r.scaled_reward - baseline;

    try {
      PpoStepResult res = ppo_step(run.policy, store, batch, hyper, kl_coeff);
      run.curve.push_back({step, baseline, res.diag.approx_kl,
                           res.diag.clip_frac, kl_coeff});
      run.policy = std::move(res.policy);
      kl_coeff = res.diag.kl_coeff_next;
    } catch (const DivergenceError& e) {
      throw DivergenceError("step " + std::to_string(step) + ": " + e.what());
    }
  }
  return run;
}

PpoRun train_ppo(const PolicyParams& policy, const FeatureStore& store,
                 const RewardNet& reward_net,
                 std::span<const std::int64_t> prompts, const PpoHyper& hyper) {
  RewardFn fn = [&store, &reward_net](std::int64_t qid, std::int64_t aid) {
    return reward_net.logit(store.question_features(qid),
                            store.answer_features(qid, aid));
  };
  return train_ppo(policy, store, fn, prompts, hyper);
}

WinRate judge_win_rate(const AnswerSampler& policy_a,
                       const AnswerSampler& policy_b, const World& world,
                       std::span<const std::int64_t> prompts, Rng& rng,
                       double tie_eps) {
  WinRate out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::int64_t qid = prompts[i];
    // Both sides draw from clones of one per-prompt stream: identical
    // policies tie, and swapping sides swaps win/lose exactly.
    const Rng base = rng.split(static_cast<std::uint64_t>(i));
    Rng ra = base;
    Rng rb = base;
    const double qa = world.true_quality(qid, policy_a(qid, ra));
    const double qb = world.true_quality(qid, policy_b(qid, rb));
    if (std::abs(qa - qb) <= tie_eps) {
      ++out.tie;
    } else if (qa > qb) {
      ++out.win;
    } else {
      ++out.lose;
    }
  }
  return out;
}

AnswerSampler make_sampler(const PolicyParams& policy,
                           const FeatureStore& store) {
  return [&policy, &store](std::int64_t qid, Rng& rng) {
    return sample_action(policy, store, qid, rng).answer_id;
  };
}

WinRate judge_win_rate(const PolicyParams& policy_a,
                       const PolicyParams& policy_b, const World& world,
                       std::span<const std::int64_t> prompts, Rng& rng,
                       double tie_eps) {
  return judge_win_rate(make_sampler(policy_a, world),
                        make_sampler(policy_b, world), world, prompts, rng,
                        tie_eps);
}

double expected_true_reward(const PolicyParams& policy, const World& world,
                            std::span<const std::int64_t> prompts) {
  if (prompts.empty()) throw ArgumentError("empty prompt list");
  double total = 0.0;
  for (std::int64_t qid : prompts) {
    const auto probs = action_probabilities(policy, world, qid);
    const auto& cands = world.answer_ids(qid);
    double v = 0.0;
    for (std::size_t k = 0; k < cands.size(); ++k) {
      v += probs[k] * world.true_quality(qid, cands[k]);
    }
    total += v;
  }
  return total / static_cast<double>(prompts.size());
}

double optimal_expected_true_reward(const World& world,
                                    std::span<const std::int64_t> prompts) {
  if (prompts.empty()) throw ArgumentError("empty prompt list");
  double total = 0.0;
  for (std::int64_t qid : prompts) {
    const Question& q = world.question(qid);
    double best = q.answers.front().true_quality;
    for (const Answer& a : q.answers) best = std::max(best, a.true_quality);
    total += best;
  }
  return total / static_cast<double>(prompts.size());
}

double worst_expected_true_reward(const World& world,
                                  std::span<const std::int64_t> prompts) {
  if (prompts.empty()) throw ArgumentError("empty prompt list");
  double total = 0.0;
  for (std::int64_t qid : prompts) {
    const Question& q = world.question(qid);
    double worst = q.answers.front().true_quality;
    for (const Answer& a : q.answers) worst = std::min(worst, a.true_quality);
    total += worst;
  }
  return total / static_cast<double>(prompts.size());
}

}  // namespace serlab
