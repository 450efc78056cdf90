#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "serlab/errors.hpp"
#include "serlab/self_evolve.hpp"
#include "serlab/world.hpp"

using namespace serlab;

namespace {

ScoredPair scored(std::int64_t qid, double p1, double p2) {
  ScoredPair s;
  s.pair.question_id = qid;
  s.pair.answer_1_id = 0;
  s.pair.answer_2_id = 1;
  s.p1 = p1;
  s.p2 = p2;
  s.gap = std::abs(p1 - p2);
  return s;
}

// Naive re-implementation of the status/filter rules, scanned pair by pair.
struct NaiveResult {
  LearningStatus status;
  std::int64_t c1 = 0;
  std::int64_t c2 = 0;
  std::vector<PairKey> selected;
};

NaiveResult naive_scan(const ScoredPool& pool, const SerThresholds& th,
                       const PairKeySet& exclude) {
  NaiveResult out{LearningStatus::Stop, 0, 0, {}};
  for (const ScoredPair& s : pool) {
    if (exclude.contains(pair_key(s.pair))) continue;
    const bool s1 = (s.p1 > th.tau_high && s.p2 < th.tau_low) ||
                    (s.p2 > th.tau_high && s.p1 < th.tau_low);
    if (s1) {
      ++out.c1;
    } else if (std::abs(s.p1 - s.p2) >= th.tau_delta) {
      ++out.c2;
    }
  }
  if (out.c1 >= th.n_min) {
    out.status = LearningStatus::Status1;
  } else if (out.c2 >= th.n_min) {
    out.status = LearningStatus::Status2;
  }
  for (const ScoredPair& s : pool) {
    if (exclude.contains(pair_key(s.pair))) continue;
    const bool s1 = (s.p1 > th.tau_high && s.p2 < th.tau_low) ||
                    (s.p2 > th.tau_high && s.p1 < th.tau_low);
    if (out.status == LearningStatus::Status1 && s1) {
      out.selected.push_back(pair_key(s.pair));
    } else if (out.status == LearningStatus::Status2 && !s1 &&
               std::abs(s.p1 - s.p2) > th.delta_filter) {
      out.selected.push_back(pair_key(s.pair));
    }
  }
  return out;
}

World small_world(int d, int n, int k, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.dimension = d;
  cfg.n_questions = n;
  cfg.answers_per_question = k;
  cfg.rng_seed = seed;
  return generate_world(cfg);
}

Splits small_splits(const World& w, double noise, std::uint64_t seed) {
  SplitConfig sc;
  sc.noise_eta = noise;
  sc.rng_seed = seed;
  return make_splits(w, sc);
}

}  // namespace

TEST_CASE("self-labeling matches direct re-scoring") {
  const World w = small_world(4, 120, 2, 3);
  Rng rng(1);
  const RewardNet net = RewardNet::random_init(4, 8, rng);
  std::vector<PreferencePair> pool;
  for (const Question& q : w.questions()) {
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = 0;
    p.answer_2_id = 1;
    pool.push_back(p);
  }
  const ScoredPool sp = self_label(net, w, pool);
  REQUIRE(sp.size() == pool.size());
  for (std::size_t i = 0; i < sp.size(); ++i) {
    CHECK(sp[i].pair.question_id == pool[i].question_id);  // order kept
    const auto qf = w.question_features(pool[i].question_id);
    CHECK(sp[i].p1 == net.score(qf, w.answer_features(pool[i].question_id, 0)));
    CHECK(sp[i].p2 == net.score(qf, w.answer_features(pool[i].question_id, 1)));
    CHECK(sp[i].gap == std::abs(sp[i].p1 - sp[i].p2));
  }
}

TEST_CASE("self-labeling an empty pool is empty") {
  const World w = small_world(2, 4, 2, 3);
  RewardNet net(2, 2);
  CHECK(self_label(net, w, {}).empty());
}

TEST_CASE("a constant model produces zero gaps") {
  const World w = small_world(3, 30, 2, 5);
  RewardNet net(3, 2);  // zero weights score 0.5 everywhere
  std::vector<PreferencePair> pool;
  for (const Question& q : w.questions()) {
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = 0;
    p.answer_2_id = 1;
    pool.push_back(p);
  }
  for (const ScoredPair& s : self_label(net, w, pool)) {
    CHECK(s.gap == 0.0);
    CHECK(s.p1 == 0.5);
  }
}

TEST_CASE("thread count does not change self-labeling") {
  const World w = small_world(4, 500, 2, 9);
  Rng rng(2);
  const RewardNet net = RewardNet::random_init(4, 8, rng);
  std::vector<PreferencePair> pool;
  for (const Question& q : w.questions()) {
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = 0;
    p.answer_2_id = 1;
    pool.push_back(p);
  }
  const ScoredPool one = self_label(net, w, pool, 1);
  const ScoredPool four = self_label(net, w, pool, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].p1 == four[i].p1);
    CHECK(one[i].p2 == four[i].p2);
  }
}

TEST_CASE("status classification follows the threshold rules") {
  SerThresholds th;
  th.n_min = 1;

  ScoredPool clear{scored(0, 0.9, 0.1)};
  StatusCounts sc = identify_status(clear, th);
  CHECK(sc.status == LearningStatus::Status1);
  CHECK(sc.status1_count == 1);
  CHECK(sc.status2_count == 0);

  ScoredPool both_high{scored(0, 0.90, 0.58)};  // gap 0.32, p2 above tau_low
  sc = identify_status(both_high, th);
  CHECK(sc.status == LearningStatus::Status2);
  CHECK(sc.status1_count == 0);
  CHECK(sc.status2_count == 1);

  ScoredPool narrow{scored(0, 0.52, 0.48)};
  sc = identify_status(narrow, th);
  CHECK(sc.status == LearningStatus::Stop);
}

TEST_CASE("threshold equality does not qualify") {
  SerThresholds th;
  th.n_min = 1;
  // p1 exactly tau_high: the strict > fails the status-1 branch, and the
  // gap 0.55 - 0.10 = 0.45 >= tau_delta counts for status 2 instead.
  ScoredPool at_tau{scored(0, 0.55, 0.10)};
  StatusCounts sc = identify_status(at_tau, th);
  CHECK(sc.status1_count == 0);
  CHECK(sc.status2_count == 1);

  // Gap exactly tau_delta (0.25 is exact in binary): inclusive for the
  // status count...
  th.tau_delta = 0.25;
  th.delta_filter = 0.25;
  ScoredPool at_delta{scored(0, 0.50, 0.25)};
  sc = identify_status(at_delta, th);
  CHECK(sc.status2_count == 1);
  CHECK(sc.status == LearningStatus::Status2);
  // ...but the filter bound is strict, so nothing is selected.
  CHECK(filter_data(at_delta, LearningStatus::Status2, th).empty());
}

TEST_CASE("status-2 filtering reorders the higher score first") {
  SerThresholds th;
  th.n_min = 1;
  ScoredPool pool{scored(7, 0.5, 0.9)};
  const auto out = filter_data(pool, LearningStatus::Status2, th);
  REQUIRE(out.size() == 1);
  CHECK(out[0].answer_1_id == 1);  // answer 2 first now
  CHECK(out[0].answer_2_id == 0);
  CHECK(out[0].label == PrefLabel::Chosen1);
  CHECK(out[0].source == LabelSource::SelfLabel);
  REQUIRE(out[0].scores.has_value());
  CHECK(out[0].scores->first == 0.9);
  CHECK(out[0].scores->second == 0.5);
}

TEST_CASE("status-1 filtering keeps qualifying pairs only") {
  SerThresholds th;
  th.n_min = 1;
  ScoredPool pool{scored(1, 0.56, 0.44), scored(2, 0.56, 0.50)};
  const auto out = filter_data(pool, LearningStatus::Status1, th);
  REQUIRE(out.size() == 1);
  CHECK(out[0].question_id == 1);
  CHECK(out[0].answer_1_id == 0);
}

TEST_CASE("stop filters nothing and excluded pairs never return") {
  SerThresholds th;
  th.n_min = 1;
  ScoredPool pool{scored(1, 0.9, 0.1), scored(2, 0.95, 0.05)};
  CHECK(filter_data(pool, LearningStatus::Stop, th).empty());

  PairKeySet exclude;
  exclude.insert(pair_key(pool[0].pair));
  const auto out = filter_data(pool, LearningStatus::Status1, th, exclude);
  REQUIRE(out.size() == 1);
  CHECK(out[0].question_id == 2);
  const StatusCounts sc = identify_status(pool, th, exclude);
  CHECK(sc.status1_count == 1);
}

TEST_CASE("status and filter match a naive scan on random pools") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    Rng trng = rng.split(static_cast<std::uint64_t>(trial));
    const std::size_t n = 1 + trng.below(2000);
    ScoredPool pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng prng = trng.split(i);
      pool.push_back(scored(static_cast<std::int64_t>(i), prng.uniform(),
                            prng.uniform()));
    }
    SerThresholds th;
    Rng hrng = trng.split(0xFFFF);
    th.tau_low = 0.05 + 0.4 * hrng.uniform();
    th.tau_high = th.tau_low + 0.05 + (0.95 - th.tau_low) * hrng.uniform() * 0.9;
    th.tau_delta = 0.05 + 0.9 * hrng.uniform();
    th.delta_filter = 0.05 + 0.9 * hrng.uniform();
    th.n_min = 1 + static_cast<int>(hrng.below(64));
    PairKeySet exclude;
    for (const ScoredPair& s : pool) {
      if (hrng.uniform() < 0.1) exclude.insert(pair_key(s.pair));
    }

    const NaiveResult expect = naive_scan(pool, th, exclude);
    const StatusCounts got = identify_status(pool, th, exclude);
    CHECK(got.status == expect.status);
    CHECK(got.status1_count == expect.c1);
    CHECK(got.status2_count == expect.c2);

    const auto selected = filter_data(pool, got.status, th, exclude);
    REQUIRE(selected.size() == expect.selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
      CHECK(pair_key(selected[i]) == expect.selected[i]);
    }
  }
}

TEST_CASE("run_ser with an empty pool stops at loop zero") {
  const World w = small_world(3, 100, 2, 21);
  SplitConfig sc;
  sc.seed_label_frac = 1.0;  // nothing left unlabeled
  sc.rng_seed = 4;
  const Splits s = make_splits(w, sc);
  REQUIRE(s.unlabeled.empty());
  SerConfig cfg;
  cfg.hidden = 8;
  TrainHyper hyper;
  hyper.epochs = 3;
  hyper.learning_rate = 0.05;
  const SerRun run = run_ser(w, s.seed_labeled, s.unlabeled, s.test, cfg, hyper, 7);
  REQUIRE(run.history.size() == 1);
  CHECK(run.history[0].loop == 0);
  CHECK(run.terminal_status == LearningStatus::Stop);
  CHECK(run.cumulative_filtered.empty());
}

TEST_CASE("run_ser stops immediately when n_min exceeds the pool") {
  const World w = small_world(3, 120, 2, 22);
  const Splits s = small_splits(w, 0.0, 5);
  SerConfig cfg;
  cfg.hidden = 8;
  cfg.thresholds.n_min = static_cast<int>(s.unlabeled.size()) + 1;
  TrainHyper hyper;
  hyper.epochs = 2;
  const SerRun run = run_ser(w, s.seed_labeled, s.unlabeled, s.test, cfg, hyper, 7);
  REQUIRE(run.history.size() == 1);
  CHECK(run.terminal_status == LearningStatus::Stop);
}

TEST_CASE("run_ser rejects an empty seed set") {
  const World w = small_world(3, 40, 2, 23);
  const Splits s = small_splits(w, 0.0, 6);
  SerConfig cfg;
  TrainHyper hyper;
  CHECK_THROWS_AS(run_ser(w, {}, s.unlabeled, s.test, cfg, hyper, 7),
                  ConfigError);
}

TEST_CASE("run_ser bookkeeping stays consistent") {
  const World w = small_world(6, 700, 2, 24);
  const Splits s = small_splits(w, 0.1, 8);
  SerConfig cfg;
  cfg.hidden = 16;
  cfg.thresholds.n_min = 10;
  cfg.thresholds.max_loops = 6;
  TrainHyper hyper;
  hyper.learning_rate = 0.15;
  hyper.epochs = 30;
  const SerRun run = run_ser(w, s.seed_labeled, s.unlabeled, s.test, cfg, hyper, 7);

  REQUIRE(run.history.size() >= 1);
  // Records strictly ordered by loop index.
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    CHECK(run.history[i].loop == static_cast<int>(i));
  }
  // Cumulative counts are monotone and match the stored set.
  std::int64_t prev = 0;
  for (const LoopRecord& rec : run.history) {
    CHECK(rec.cumulative_filtered >= prev);
    prev = rec.cumulative_filtered;
  }
  CHECK(prev == static_cast<std::int64_t>(run.cumulative_filtered.size()));

  // No duplicate selections, and none from outside the unlabeled pool.
  PairKeySet pool_keys;
  for (const PreferencePair& p : s.unlabeled) pool_keys.insert(pair_key(p));
  PairKeySet seen;
  for (const PreferencePair& p : run.cumulative_filtered) {
    CHECK(pool_keys.contains(pair_key(p)));
    CHECK(seen.insert(pair_key(p)).second);
  }

  // Every selection satisfies the condition of the status it was added
  // under, at its stored selection-time scores.
  const SerThresholds th = cfg.thresholds;
  for (const SelectionRecord& sel : run.selections) {
    REQUIRE(sel.pair.scores.has_value());
    const double pc = sel.pair.scores->first;
    const double pr = sel.pair.scores->second;
    CHECK(pc >= pr);
    if (sel.status == LearningStatus::Status1) {
      CHECK(pc > th.tau_high);
      CHECK(pr < th.tau_low);
    } else {
      REQUIRE(sel.status == LearningStatus::Status2);
      CHECK(std::abs(pc - pr) > th.delta_filter);
      CHECK_FALSE((pc > th.tau_high && pr < th.tau_low));
    }
  }

  // Terminal decision is the last record's status.
  CHECK(run.terminal_status == run.history.back().status);
}

TEST_CASE("run_ser is deterministic") {
  const World w = small_world(4, 400, 2, 25);
  const Splits s = small_splits(w, 0.1, 9);
  SerConfig cfg;
  cfg.hidden = 8;
  cfg.thresholds.n_min = 10;
  cfg.thresholds.max_loops = 3;
  TrainHyper hyper;
  hyper.learning_rate = 0.1;
  hyper.epochs = 10;
  const SerRun a = run_ser(w, s.seed_labeled, s.unlabeled, s.test, cfg, hyper, 7);
  const SerRun b = run_ser(w, s.seed_labeled, s.unlabeled, s.test, cfg, hyper, 7);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].status == b.history[i].status);
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].test_accuracy == b.history[i].test_accuracy);
  }
  for (std::size_t i = 0; i < a.final_params.flat().size(); ++i) {
    CHECK(a.final_params.flat()[i] == b.final_params.flat()[i]);
  }
}

TEST_CASE("threshold invariants are enforced") {
  SerThresholds th;
  th.tau_low = 0.6;  // above tau_high
  CHECK_THROWS_AS(validate(th), ConfigError);
  th = SerThresholds{};
  th.n_min = 0;
  CHECK_THROWS_AS(validate(th), ConfigError);
  th = SerThresholds{};
  th.tau_delta = 0.0;
  CHECK_THROWS_AS(validate(th), ConfigError);
}

TEST_CASE("n_min_frac resolves against the pool size") {
  SerThresholds th;
  th.n_min = 600;
  th.n_min_frac = 600.0 / 43000.0;
  const SerThresholds resolved = th.resolved(1700);
  CHECK(resolved.n_min == 24);  // round(0.013953.. * 1700)
  CHECK(resolved.n_min_frac == 0.0);
  th.n_min_frac = 0.0;
  CHECK(th.resolved(1700).n_min == 600);
}
