#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "serlab/reward_model.hpp"
#include "serlab/world.hpp"

namespace serlab {

struct SerThresholds {
  double tau_high = 0.55;
  double tau_low = 0.45;
  double tau_delta = 0.3;    // status-2 qualification bound (inclusive)
  double delta_filter = 0.3; // status-2 selection bound (strict)
  int n_min = 600;           // minimum qualifying count to declare a status
  double n_min_frac = 0.0;   // > 0: n_min = round(frac * unlabeled pool size)
  int max_loops = 8;

  // Absolute-n_min copy, resolving n_min_frac against a pool size.
  SerThresholds resolved(std::size_t pool_size) const;
};

void validate(const SerThresholds& th);

struct SerConfig {
  SerThresholds thresholds;
  int hidden = 32;               // reward net width
  bool retain_seed = true;       // keep human seed pairs in every retrain
  bool reinit_each_loop = false; // fresh weights instead of continuing
};

enum class LearningStatus { Status1, Status2, Stop };

const char* to_string(LearningStatus status);

struct ScoredPair {
  PreferencePair pair;
  double p1 = 0.0;   // score of answer_1
  double p2 = 0.0;   // score of answer_2
  double gap = 0.0;  // |p1 - p2|
};

using ScoredPool = std::vector<ScoredPair>;

// Scores every pair with the current net; order preserved, input untouched.
// threads > 1 partitions the pool statically, so results are identical for
// any thread count.
ScoredPool self_label(const RewardNet& net, const FeatureStore& store,
                      std::span<const PreferencePair> pool, int threads = 1);

struct StatusCounts {
  LearningStatus status = LearningStatus::Stop;
  std::int64_t status1_count = 0;
  std::int64_t status2_count = 0;
};

// Status-1 pairs: one score above tau_high and the other below tau_low.
// Status-2 pairs: gap >= tau_delta without meeting the status-1 condition.
// Checked in that order against n_min; neither -> Stop.
StatusCounts identify_status(const ScoredPool& scored, const SerThresholds& th,
                             const PairKeySet& exclude = {});

// Pairs qualifying under `status`, reordered chosen-first (higher score
// first) with SelfLabel provenance and scores attached. Stop yields the
// empty set.
std::vector<PreferencePair> filter_data(const ScoredPool& scored,
                                        LearningStatus status,
                                        const SerThresholds& th,
                                        const PairKeySet& exclude = {});

struct LoopRecord {
  int loop = 0;
  // Status decided by this loop's params on the remaining pool; a Stop here
  // is the terminal decision.
  LearningStatus status = LearningStatus::Stop;
  std::int64_t status1_count = 0;
  std::int64_t status2_count = 0;
  std::int64_t new_filtered = 0;        // pairs added to reach this loop
  std::int64_t cumulative_filtered = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct SelectionRecord {
  int loop = 0;  // loop whose retrain consumed the pair
  LearningStatus status = LearningStatus::Stop;
  PreferencePair pair;  // chosen-first with scores from selection time
};

struct SerRun {
  RewardNet final_params;
  std::vector<LoopRecord> history;  // one record per executed loop
  LearningStatus terminal_status = LearningStatus::Stop;
  std::vector<PreferencePair> cumulative_filtered;
  std::vector<SelectionRecord> selections;
};

using LoopObserver = std::function<void(int loop, const RewardNet& params)>;

// The full self-evolution loop: loop 0 trains the seed net on seed_labeled
// only; each later loop filters the pool under the previous decision,
// retrains on seed + cumulative filtered data, and re-decides. Terminates on
// Stop or after thresholds.max_loops loops.
SerRun run_ser(const FeatureStore& store,
               std::span<const PreferencePair> seed_labeled,
               std::span<const PreferencePair> unlabeled,
               std::span<const PreferencePair> test, const SerConfig& config,
               const TrainHyper& hyper, std::uint64_t rng_seed,
               const LoopObserver& observer = {}, int threads = 1);

}  // namespace serlab
