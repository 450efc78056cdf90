#include "serlab/self_evolve.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

constexpr std::uint64_t kInitTag = 0x11A7;
constexpr std::uint64_t kLoopTag = 0x100F;

bool status1_hit(const ScoredPair& s, const SerThresholds& th) {
  return (s.p1 > th.tau_high && s.p2 < th.tau_low) ||
         (s.p1 < th.tau_low && s.p2 > th.tau_high);
}

}  // namespace

const char* to_string(LearningStatus status) {
  switch (status) {
    case LearningStatus::Status1: return "status1";
    case LearningStatus::Status2: return "status2";
    case LearningStatus::Stop: return "stop";
  }
  return "?";
}

SerThresholds SerThresholds::resolved(std::size_t pool_size) const {
  SerThresholds out = *this;
  if (n_min_frac > 0.0) {
    out.n_min = std::max<int>(
        1, static_cast<int>(std::llround(n_min_frac * static_cast<double>(pool_size))));
    out.n_min_frac = 0.0;
  }
  return out;
}

void validate(const SerThresholds& th) {
  if (!(th.tau_low >= 0.0 && th.tau_low < th.tau_high && th.tau_high <= 1.0)) {
    throw ConfigError("ser thresholds need 0 <= tau_low < tau_high <= 1");
  }
  if (!(th.tau_delta > 0.0 && th.tau_delta < 1.0)) {
    throw ConfigError("ser.tau_delta must lie in (0, 1)");
  }
  if (!(th.delta_filter > 0.0 && th.delta_filter < 1.0)) {
    throw ConfigError("ser.delta_filter must lie in (0, 1)");
  }
  if (th.n_min < 1) throw ConfigError("ser.n_min must be >= 1");
  if (th.n_min_frac < 0.0 || th.n_min_frac > 1.0) {
    throw ConfigError("ser.n_min_frac must lie in [0, 1]");
  }
  if (th.max_loops < 0) throw ConfigError("ser.max_loops must be >= 0");
}

ScoredPool self_label(const RewardNet& net, const FeatureStore& store,
                      std::span<const PreferencePair> pool, int threads) {
  ScoredPool out(pool.size());
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PreferencePair& p = pool[i];
      const auto q = store.question_features(p.question_id);
      ScoredPair s;
      s.pair = p;
      s.p1 = net.score(q, store.answer_features(p.question_id, p.answer_1_id));
      s.p2 = net.score(q, store.answer_features(p.question_id, p.answer_2_id));
      s.gap = std::abs(s.p1 - s.p2);
      out[i] = std::move(s);
    }
  };
  if (threads <= 1 || pool.size() < 64) {
    score_range(0, pool.size());
    return out;
  }
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(threads), pool.size());
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  const std::size_t chunk = (pool.size() + n_threads - 1) / n_threads;
  for (std::size_t t = 0; t < n_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(pool.size(), begin + chunk);
    if (begin >= end) break;
    workers.emplace_back(score_range, begin, end);
  }
  for (auto& w : workers) w.join();
  return out;
}

StatusCounts identify_status(const ScoredPool& scored, const SerThresholds& th,
                             const PairKeySet& exclude) {
  validate(th);
  StatusCounts out;
  for (const ScoredPair& s : scored) {
    if (!exclude.empty() && exclude.contains(pair_key(s.pair))) continue;
    if (status1_hit(s, th)) {
      ++out.status1_count;
    } else if (s.gap >= th.tau_delta) {
      ++out.status2_count;
    }
  }
  if (out.status1_count >= th.n_min) {
    out.status = LearningStatus::Status1;
  } else if (out.status2_count >= th.n_min) {
    out.status = LearningStatus::Status2;
  } else {
    out.status = LearningStatus::Stop;
  }
  return out;
}

std::vector<PreferencePair> filter_data(const ScoredPool& scored,
                                        LearningStatus status,
                                        const SerThresholds& th,
                                        const PairKeySet& exclude) {
  validate(th);
  std::vector<PreferencePair> out;
  if (status == LearningStatus::Stop) return out;
  for (const ScoredPair& s : scored) {
    if (!exclude.empty() && exclude.contains(pair_key(s.pair))) continue;
    bool selected = false;
    if (status == LearningStatus::Status1) {
      selected = status1_hit(s, th);
    } else {
      selected = !status1_hit(s, th) && s.gap > th.delta_filter;
    }
    if (!selected) continue;
    PreferencePair p = s.pair;
    if (s.p1 >= s.p2) {
      p.scores = {{s.p1, s.p2}};
    } else {
      std::swap(p.answer_1_id, p.answer_2_id);
      p.scores = {{s.p2, s.p1}};
    }
    p.label = PrefLabel::Chosen1;
    p.source = LabelSource::SelfLabel;
    out.push_back(std::move(p));
  }
  return out;
}

SerRun run_ser(const FeatureStore& store,
               std::span<const PreferencePair> seed_labeled,
               std::span<const PreferencePair> unlabeled,
               std::span<const PreferencePair> test, const SerConfig& config,
               const TrainHyper& hyper, std::uint64_t rng_seed,
               const LoopObserver& observer, int threads) {
  if (seed_labeled.empty()) throw ConfigError("seed-labeled set is empty");
  validate(config.thresholds);
  validate(hyper);
  const SerThresholds th = config.thresholds.resolved(unlabeled.size());

  const Rng root(rng_seed);
  Rng init_rng = root.split(kInitTag);
  const RewardNet init =
      RewardNet::random_init(store.dim(), config.hidden, init_rng);

  const std::vector<PreferencePair> seed_oriented =
      orient_chosen_first(seed_labeled);
  std::vector<PreferencePair> pool(unlabeled.begin(), unlabeled.end());

  auto train_loop = [&](const RewardNet& from,
                        std::span<const PreferencePair> data,
                        int loop) -> TrainResult {
    TrainHyper h = hyper;
    h.rng_seed = root.split(kLoopTag).split(static_cast<std::uint64_t>(loop)).state();
    try {
      return train(from, store, data, h);
    } catch (const DivergenceError& e) {
      throw DivergenceError("loop " + std::to_string(loop) + ": " + e.what());
    }
  };

  SerRun run{init, {}, LearningStatus::Stop, {}, {}};
  PairKeySet selected_keys;

  TrainResult tr = train_loop(init, seed_oriented, 0);
  run.final_params = tr.params;

  ScoredPool scored = self_label(run.final_params, store, pool, threads);
  StatusCounts sc = identify_status(scored, th);

  LoopRecord rec;
  rec.loop = 0;
  rec.status = sc.status;
  rec.status1_count = sc.status1_count;
  rec.status2_count = sc.status2_count;
  rec.new_filtered = 0;
  rec.cumulative_filtered = 0;
  rec.train_loss = tr.final_loss;
  rec.test_accuracy =
      test.empty() ? 0.0 : evaluate_accuracy(run.final_params, store, test);
  run.history.push_back(rec);
  if (observer) observer(0, run.final_params);

  int loop = 0;
  while (run.history.back().status != LearningStatus::Stop &&
         loop < th.max_loops) {
    const LearningStatus drive = run.history.back().status;
    std::vector<PreferencePair> selected = filter_data(scored, drive, th);
    ++loop;

    // Consume the selected pairs: they leave the candidate pool for good.
    for (const PreferencePair& p : selected) {
      selected_keys.insert(pair_key(p));
      run.selections.push_back({loop, drive, p});
      run.cumulative_filtered.push_back(p);
    }
    std::erase_if(pool, [&](const PreferencePair& p) {
      return selected_keys.contains(pair_key(p));
    });

    std::vector<PreferencePair> train_data;
    if (config.retain_seed) {
      train_data.insert(train_data.end(), seed_oriented.begin(),
                        seed_oriented.end());
    }
    train_data.insert(train_data.end(), run.cumulative_filtered.begin(),
                      run.cumulative_filtered.end());
    if (!train_data.empty()) {
      tr = train_loop(config.reinit_each_loop ? init : run.final_params,
                      train_data, loop);
      run.final_params = tr.params;
    }

    scored = self_label(run.final_params, store, pool, threads);
    sc = identify_status(scored, th);

    rec = LoopRecord{};
    rec.loop = loop;
    rec.status = sc.status;
    rec.status1_count = sc.status1_count;
    rec.status2_count = sc.status2_count;
    rec.new_filtered = static_cast<std::int64_t>(selected.size());
    rec.cumulative_filtered =
        static_cast<std::int64_t>(run.cumulative_filtered.size());
    rec.train_loss = tr.final_loss;
    rec.test_accuracy =
        test.empty() ? 0.0 : evaluate_accuracy(run.final_params, store, test);
    run.history.push_back(rec);
    if (observer) observer(loop, run.final_params);
  }
  run.terminal_status = run.history.back().status;
  return run;
}

}  // namespace serlab
