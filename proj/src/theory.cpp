#include "serlab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

constexpr std::uint64_t kNoiseTag = 0x9015E;

double question_median_quality(const Question& q) {
  std::vector<double> quals;
  quals.reserve(q.answers.size());
  for (const Answer& a : q.answers) quals.push_back(a.true_quality);
  std::sort(quals.begin(), quals.end());
  const std::size_t n = quals.size();
  if (n % 2 == 1) return quals[n / 2];
  return 0.5 * (quals[n / 2 - 1] + quals[n / 2]);
}

std::vector<std::int64_t> distinct_questions(
    std::span<const PreferencePair> pairs) {
  std::vector<std::int64_t> out;
  std::unordered_set<std::int64_t> seen;
  for (const PreferencePair& p : pairs) {
    if (seen.insert(p.question_id).second) out.push_back(p.question_id);
  }
  return out;
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::AssumptionsUnmet: return "ASSUMPTIONS_UNMET";
  }
  return "?";
}

AssumptionReport measure_alpha(const AnswerScoreFn& score, const World& world,
                               std::span<const PreferencePair> labeled_eval,
                               double delta_p) {
  if (!(delta_p > 0.0 && delta_p < 0.5)) {
    throw ArgumentError("delta_p must lie in (0, 0.5)");
  }
  AssumptionReport report;
  report.delta_p = delta_p;
  std::int64_t correct = 0;
  for (std::int64_t qid : distinct_questions(labeled_eval)) {
    const Question& q = world.question(qid);
    const double median = question_median_quality(q);
    for (const Answer& a : q.answers) {
      ++report.n_total;
      const double p = score(qid, a.id);
      if (std::abs(p - 0.5) < delta_p) continue;
      ++report.n_confident;
      const bool predicted_good = p > 0.5;
      const bool truly_good = a.true_quality > median;
      if (predicted_good == truly_good) ++correct;
    }
  }
  if (report.n_confident > 0) {
    report.alpha_hat =
        static_cast<double>(correct) / static_cast<double>(report.n_confident);
  }
  return report;
}

AssumptionReport check_assumptions(const RewardNet& net, const World& world,
                                   std::span<const PreferencePair> labeled_eval,
                                   double delta_p, Rng& probe_rng,
                                   int lipschitz_probes) {
  AnswerScoreFn score = [&](std::int64_t qid, std::int64_t aid) {
    return net.score(world.question_features(qid),
                     world.answer_features(qid, aid));
  };
  AssumptionReport report = measure_alpha(score, world, labeled_eval, delta_p);
  report.acc0 = evaluate_accuracy(net, world, labeled_eval);

  const auto questions = distinct_questions(labeled_eval);
  constexpr double kStep = 1e-3;  // l1 perturbation size
  double max_slope = 0.0;
  for (int t = 0; t < lipschitz_probes && !questions.empty(); ++t) {
    Rng rng = probe_rng.split(static_cast<std::uint64_t>(t));
    const std::int64_t qid =
        questions[static_cast<std::size_t>(rng.below(questions.size()))];
    const Question& q = world.question(qid);
    const Answer& a =
        q.answers[static_cast<std::size_t>(rng.below(q.answers.size()))];
    const std::size_t coord =
        static_cast<std::size_t>(rng.below(a.features.size()));
    std::vector<double> bumped = a.features;
    bumped[coord] += kStep;
    const double base = net.score(q.context, a.features);
    const double moved = net.score(q.context, bumped);
    max_slope = std::max(max_slope, std::abs(moved - base) / kStep);
  }
  report.lipschitz_hat = max_slope;
  return report;
}

Theorem1Report validate_theorem1(const ExperimentConfig& cfg) {
  validate(cfg);
  WorldConfig wc = cfg.world;
  wc.rng_seed = stage_rng(cfg, stage::kWorld).state();
  const World world = generate_world(wc);
  SplitConfig sc = cfg.split;
  sc.rng_seed = stage_rng(cfg, stage::kSplits).state();
  const Splits splits = make_splits(world, sc);

  Theorem1Report report;
  report.n_test = static_cast<std::int64_t>(splits.test.size());
  const double delta_p = (cfg.ser.thresholds.tau_high - 0.5) > 0.0
                             ? cfg.ser.thresholds.tau_high - 0.5
                             : 0.05;

  LoopObserver observer = [&](int loop, const RewardNet& params) {
    Rng probe = stage_rng(cfg, stage::kTheory)
                    .split(static_cast<std::uint64_t>(loop));
    const AssumptionReport ar =
        check_assumptions(params, world, splits.test, delta_p, probe, 64);
    report.alpha_hat.push_back(
        ar.alpha_hat.value_or(std::numeric_limits<double>::quiet_NaN()));
    report.alpha_above_half.push_back(ar.alpha_hat.has_value() &&
                                      *ar.alpha_hat > 0.5);
  };

  const SerRun run =
      run_ser(world, splits.seed_labeled, splits.unlabeled, splits.test,
              cfg.ser, cfg.train, stage_rng(cfg, stage::kSerLoop).state(),
              observer, cfg.threads);
  for (const LoopRecord& rec : run.history) {
    report.accuracy.push_back(rec.test_accuracy);
    report.statuses.push_back(rec.status);
  }

  const double acc0 = report.accuracy.front();
  report.eps_stat =
      2.0 * std::sqrt(acc0 * (1.0 - acc0) /
                      static_cast<double>(std::max<std::int64_t>(1, report.n_test)));

  const bool alpha0_ok = report.alpha_above_half.empty()
                             ? false
                             : report.alpha_above_half.front();
  if (!(acc0 > 0.5) || !alpha0_ok) {
    report.verdict = Verdict::AssumptionsUnmet;
    return report;
  }

  double worst = 0.0;
  for (std::size_t t = 0; t + 1 < report.accuracy.size(); ++t) {
    worst = std::min(worst, report.accuracy[t + 1] - report.accuracy[t]);
  }
  report.worst_drop = worst;
  const bool monotone_ok = worst >= -report.eps_stat;
  const bool final_ok = report.accuracy.back() >= acc0;
  report.verdict = monotone_ok && final_ok ? Verdict::Pass : Verdict::Fail;
  return report;
}

RewardFn perturbed_oracle(const World& world, double eps,
                          std::uint64_t noise_seed) {
  if (eps < 0.0) throw ArgumentError("perturbation level must be >= 0");
  // One fixed noise value per (question, answer): the perturbed scorer is a
  // function, not a noise process.
  auto table = std::make_shared<
      std::unordered_map<std::int64_t, std::vector<double>>>();
  const Rng root = Rng(noise_seed).split(kNoiseTag);
  for (const Question& q : world.questions()) {
    Rng qrng = root.split(static_cast<std::uint64_t>(q.id));
    std::vector<double> noise(q.answers.size());
    for (std::size_t k = 0; k < q.answers.size(); ++k) {
      noise[k] = eps * (2.0 * qrng.split(k).uniform() - 1.0);
    }
    table->emplace(q.id, std::move(noise));
  }
  return [&world, table](std::int64_t qid, std::int64_t aid) {
    const Question& q = world.question(qid);
    const auto& noise = table->at(qid);
    for (std::size_t k = 0; k < q.answers.size(); ++k) {
      if (q.answers[k].id == aid) return q.answers[k].true_quality + noise[k];
    }
    throw LookupError("unknown answer " + std::to_string(aid));
  };
}

Theorem2Report validate_theorem2(std::span<const double> eps_levels,
                                 const ExperimentConfig& cfg, int n_seeds) {
  if (eps_levels.empty()) throw ArgumentError("need at least one eps level");
  bool has_zero = false;
  for (double e : eps_levels) {
    if (e < 0.0) throw ArgumentError("eps levels must be >= 0");
    if (e == 0.0) has_zero = true;
  }
  if (!has_zero) throw ArgumentError("eps levels must include 0");
  if (n_seeds < 1) throw ArgumentError("need at least one seed");
  validate(cfg);

  Theorem2Report report;
  report.eps_levels.assign(eps_levels.begin(), eps_levels.end());
  report.regret.resize(static_cast<std::size_t>(n_seeds));
  double optimal_sum = 0.0;

  for (int s = 0; s < n_seeds; ++s) {
    const Rng seed_root = stage_rng(cfg, stage::kTheory)
                              .split(static_cast<std::uint64_t>(s));
    WorldConfig wc = cfg.world;
    wc.rng_seed = seed_root.split(stage::kWorld).state();
    const World world = generate_world(wc);
    const std::vector<std::int64_t> prompts = world.question_ids();
    const double optimal = optimal_expected_true_reward(world, prompts);
    optimal_sum += optimal;

    for (std::size_t li = 0; li < report.eps_levels.size(); ++li) {
      const double eps = report.eps_levels[li];
      const RewardFn rm =
          perturbed_oracle(world, eps, seed_root.split(li).state());
      PpoHyper hyper = cfg.ppo;
      hyper.rng_seed = seed_root.split(stage::kPpo).split(li).state();
      const PpoRun run = train_ppo(PolicyParams::zeros(world.dim()), world, rm,
                                   prompts, hyper);
      const double value = expected_true_reward(run.policy, world, prompts);
      report.regret[static_cast<std::size_t>(s)].push_back(optimal - value);
    }
  }

  report.mean_optimal_value = optimal_sum / n_seeds;
  report.mean_regret.assign(report.eps_levels.size(), 0.0);
  for (const auto& row : report.regret) {
    for (std::size_t li = 0; li < row.size(); ++li) {
      report.mean_regret[li] += row[li] / n_seeds;
    }
  }
  for (std::size_t li = 0; li < report.eps_levels.size(); ++li) {
    if (report.eps_levels[li] == 0.0) {
      report.regret_at_zero = report.mean_regret[li];
    }
  }
  report.spearman =
      report.eps_levels.size() > 1
          ? spearman_correlation(report.eps_levels, report.mean_regret)
          : 1.0;
  report.k_hat = report.eps_levels.size() > 1
                     ? least_squares_slope(report.eps_levels, report.mean_regret)
                     : 0.0;

  const bool zero_ok =
      report.regret_at_zero <= 0.05 * report.mean_optimal_value;
  const bool monotone_ok =
      report.eps_levels.size() <= 1 || report.spearman >= 0.8;
  report.verdict = zero_ok && monotone_ok ? Verdict::Pass : Verdict::Fail;
  return report;
}

double spearman_correlation(std::span<const double> x,
                            std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ArgumentError("spearman needs two same-length series");
  }
  auto ranks = [](std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;  // average ties
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double least_squares_slope(std::span<const double> x,
                           std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ArgumentError("slope needs two same-length series");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ArgumentError("slope undefined for constant x");
  return sxy / sxx;
}

}  // namespace serlab
