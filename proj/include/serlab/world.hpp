#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "serlab/rng.hpp"

namespace serlab {

enum class PrefLabel { Unlabeled, Chosen1, Chosen2 };
enum class LabelSource { None, HumanSim, SelfLabel, Oracle };

const char* to_string(PrefLabel label);
const char* to_string(LabelSource source);

struct PreferencePair {
  std::int64_t question_id = 0;
  std::int64_t answer_1_id = 0;
  std::int64_t answer_2_id = 0;
  PrefLabel label = PrefLabel::Unlabeled;
  LabelSource source = LabelSource::None;
  // Probabilities (chosen, rejected) attached when a pair was self-labeled.
  std::optional<std::pair<double, double>> scores;
};

// Orientation-insensitive identity of a pair.
struct PairKey {
  std::int64_t question = 0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool operator==(const PairKey&) const = default;
};

inline PairKey pair_key(const PreferencePair& p) {
  return {p.question_id, std::min(p.answer_1_id, p.answer_2_id),
          std::max(p.answer_1_id, p.answer_2_id)};
}

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const {
    std::uint64_t h = Rng::mix(static_cast<std::uint64_t>(k.question));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(k.lo));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(k.hi));
    return static_cast<std::size_t>(h);
  }
};

using PairKeySet = std::unordered_set<PairKey, PairKeyHash>;

// Read access to feature vectors. Implemented by World (synthetic data) and
// by ImportedDataset (external JSONL data).
class FeatureStore {
 public:
  virtual ~FeatureStore() = default;
  virtual int dim() const = 0;
  virtual std::span<const double> question_features(std::int64_t qid) const = 0;
  virtual std::span<const double> answer_features(std::int64_t qid,
                                                  std::int64_t aid) const = 0;
  virtual const std::vector<std::int64_t>& answer_ids(std::int64_t qid) const = 0;
  virtual std::vector<std::int64_t> question_ids() const = 0;
};

struct WorldConfig {
  int dimension = 16;
  int n_questions = 1;
  int answers_per_question = 2;
  std::uint64_t rng_seed = 0;
  // Hidden true-quality scorer: a fixed random two-layer net over
  // concat(context, answer) with zero hidden biases. A bump_frac share of
  // the hidden units uses exp(-z^2) (even, no linear shortcut, so ranking
  // it takes real data), the rest tanh (odd, linearly rankable). Zero
  // hidden biases keep the mean in closed form: tanh units average to
  // zero under centered features and each bump unit to 1/sqrt(1+2*var).
  int oracle_hidden = 16;
  double oracle_input_scale = 0.4;   // pre-activation std for unit features
  double oracle_output_scale = 2.0;
  double oracle_bias_scale = 0.1;
  double oracle_bump_frac = 0.0;
};

struct Answer {
  std::int64_t id = 0;
  std::vector<double> features;
  double true_quality = 0.0;  // hidden from learners
};

struct Question {
  std::int64_t id = 0;
  std::vector<double> context;
  std::vector<Answer> answers;
};

// The hidden true-quality function.
struct QualityOracle {
  int input_dim = 0;  // 2 * d
  int hidden = 0;
  int bump_units = 0;      // units [0, bump_units) use exp(-z^2), rest tanh
  std::vector<double> w1;  // hidden x input_dim, row-major
  std::vector<double> w2;  // hidden
  double bias = 0.0;

  double value(std::span<const double> context,
               std::span<const double> answer) const;
  // E[value] under i.i.d. standard-normal features.
  double analytic_mean() const;
};

class World final : public FeatureStore {
 public:
  World(WorldConfig config, std::vector<Question> questions,
        QualityOracle oracle);

  int dim() const override { return config_.dimension; }
  std::span<const double> question_features(std::int64_t qid) const override;
  std::span<const double> answer_features(std::int64_t qid,
                                          std::int64_t aid) const override;
  const std::vector<std::int64_t>& answer_ids(std::int64_t qid) const override;
  std::vector<std::int64_t> question_ids() const override;

  const std::vector<Question>& questions() const { return questions_; }
  const Question& question(std::int64_t qid) const;
  const Answer& answer(std::int64_t qid, std::int64_t aid) const;
  double true_quality(std::int64_t qid, std::int64_t aid) const;

  const QualityOracle& oracle() const { return oracle_; }
  // Closed-form mean of true_quality under the feature distribution.
  double oracle_analytic_mean() const { return oracle_.analytic_mean(); }
  const std::string& oracle_spec() const { return oracle_spec_; }
  std::uint64_t oracle_hash() const { return oracle_hash_; }
  const WorldConfig& config() const { return config_; }

 private:
  WorldConfig config_;
  std::vector<Question> questions_;
  QualityOracle oracle_;
  std::string oracle_spec_;
  std::uint64_t oracle_hash_ = 0;
  std::unordered_map<std::int64_t, std::size_t> question_index_;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> answer_id_cache_;
};

// Deterministic given config.rng_seed. Regenerates any question whose
// answers all share one true_quality value.
World generate_world(const WorldConfig& config);

// Labels a pair from true qualities: Chosen1 iff quality(answer_1) >=
// quality(answer_2) (ties toward answer 1), then flipped with probability
// noise_eta. Oracle source forces noise_eta to 0.
PreferencePair oracle_label(const World& world, PreferencePair pair,
                            double noise_eta, Rng& rng,
                            LabelSource source = LabelSource::HumanSim);

struct SplitConfig {
  double sft_frac = 0.30;
  double rm_frac = 0.65;
  double ppo_frac = 0.05;
  double seed_label_frac = 0.15;
  double noise_eta = 0.0;  // probability a simulated human label is flipped
  std::uint64_t rng_seed = 0;
};

void validate(const WorldConfig& config);
void validate(const SplitConfig& config);

struct Splits {
  std::vector<PreferencePair> seed_labeled;  // HumanSim labels at noise_eta
  std::vector<PreferencePair> unlabeled;
  std::vector<PreferencePair> test;  // noiseless Oracle labels
  std::vector<std::int64_t> ppo_prompts;
};

// Partitions questions into SFT/RM/PPO blocks; the RM block yields the
// seed-labeled + unlabeled pair pools, the SFT block the held-out test
// pairs, the PPO block the prompt ids. Deterministic given split.rng_seed.
Splits make_splits(const World& world, const SplitConfig& split);

}  // namespace serlab
