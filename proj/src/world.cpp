#include "serlab/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

constexpr std::uint64_t kOracleTag = 0xA11CE;
constexpr std::uint64_t kQuestionTag = 0x9B1D;
constexpr std::uint64_t kShuffleTag = 0x5F17;
constexpr std::uint64_t kSeedPickTag = 0x5EED;
constexpr std::uint64_t kSeedLabelTag = 0x1ABE1;
constexpr std::uint64_t kTestLabelTag = 0x7E57;

std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> draw_vector(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

const char* to_string(PrefLabel label) {
  switch (label) {
    case PrefLabel::Unlabeled: return "unlabeled";
    case PrefLabel::Chosen1: return "chosen1";
    case PrefLabel::Chosen2: return "chosen2";
  }
  return "?";
}

const char* to_string(LabelSource source) {
  switch (source) {
    case LabelSource::None: return "none";
    case LabelSource::HumanSim: return "human";
    case LabelSource::SelfLabel: return "self";
    case LabelSource::Oracle: return "oracle";
  }
  return "?";
}

double QualityOracle::value(std::span<const double> context,
                            std::span<const double> answer) const {
  const int d = input_dim / 2;
  double out = bias;
  for (int j = 0; j < hidden; ++j) {
    const double* row = &w1[static_cast<std::size_t>(j) * input_dim];
    double pre = 0.0;
    for (int i = 0; i < d; ++i) pre += row[i] * context[static_cast<std::size_t>(i)];
    for (int i = 0; i < d; ++i) pre += row[d + i] * answer[static_cast<std::size_t>(i)];
    const double act = j < bump_units ? std::exp(-pre * pre) : std::tanh(pre);
    out += w2[static_cast<std::size_t>(j)] * act;
  }
  return out;
}

double QualityOracle::analytic_mean() const {
  // Odd tanh units vanish in expectation; a bump unit with pre-activation
  // variance v averages to 1/sqrt(1+2v).
  double mean = bias;
  for (int j = 0; j < bump_units; ++j) {
    const double* row = &w1[static_cast<std::size_t>(j) * input_dim];
    double v = 0.0;
    for (int i = 0; i < input_dim; ++i) v += row[i] * row[i];
    mean += w2[static_cast<std::size_t>(j)] / std::sqrt(1.0 + 2.0 * v);
  }
  return mean;
}

World::World(WorldConfig config, std::vector<Question> questions,
             QualityOracle oracle)
    : config_(config),
      questions_(std::move(questions)),
      oracle_(std::move(oracle)) {
  char spec[192];
  std::snprintf(spec, sizeof(spec),
                "mix2(h=%d,bump=%d,in_scale=%g,out_scale=%g,bias=%.12g,seed=%llu)",
                oracle_.hidden, oracle_.bump_units, config_.oracle_input_scale,
                config_.oracle_output_scale, oracle_.bias,
                static_cast<unsigned long long>(config_.rng_seed));
  oracle_spec_ = spec;
  std::uint64_t h = fnv1a(oracle_.w1.data(), oracle_.w1.size() * sizeof(double));
  h = fnv1a(oracle_.w2.data(), oracle_.w2.size() * sizeof(double), h);
  oracle_hash_ = fnv1a(&oracle_.bias, sizeof(double), h);

  question_index_.reserve(questions_.size());
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    question_index_.emplace(questions_[i].id, i);
    std::vector<std::int64_t> ids;
    ids.reserve(questions_[i].answers.size());
    for (const Answer& a : questions_[i].answers) ids.push_back(a.id);
    answer_id_cache_.emplace(questions_[i].id, std::move(ids));
  }
}

const Question& World::question(std::int64_t qid) const {
  auto it = question_index_.find(qid);
  if (it == question_index_.end()) {
    throw LookupError("unknown question id " + std::to_string(qid));
  }
  return questions_[it->second];
}

const Answer& World::answer(std::int64_t qid, std::int64_t aid) const {
  const Question& q = question(qid);
  for (const Answer& a : q.answers) {
    if (a.id == aid) return a;
  }
  throw LookupError("unknown answer id " + std::to_string(aid) +
                    " for question " + std::to_string(qid));
}

double World::true_quality(std::int64_t qid, std::int64_t aid) const {
  return answer(qid, aid).true_quality;
}

std::span<const double> World::question_features(std::int64_t qid) const {
  return question(qid).context;
}

std::span<const double> World::answer_features(std::int64_t qid,
                                               std::int64_t aid) const {
  return answer(qid, aid).features;
}

const std::vector<std::int64_t>& World::answer_ids(std::int64_t qid) const {
  auto it = answer_id_cache_.find(qid);
  if (it == answer_id_cache_.end()) {
    throw LookupError("unknown question id " + std::to_string(qid));
  }
  return it->second;
}

std::vector<std::int64_t> World::question_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(questions_.size());
  for (const Question& q : questions_) ids.push_back(q.id);
  return ids;
}

void validate(const WorldConfig& c) {
  if (c.dimension < 1) throw ConfigError("world.dimension must be >= 1");
  if (c.n_questions < 1) throw ConfigError("world.questions must be >= 1");
  if (c.answers_per_question < 2) {
    throw ConfigError("world.answers_per_question must be >= 2");
  }
  if (c.oracle_hidden < 1) throw ConfigError("world.oracle_hidden must be >= 1");
  if (!(c.oracle_input_scale > 0.0) || !std::isfinite(c.oracle_input_scale) ||
      !(c.oracle_output_scale > 0.0) || !std::isfinite(c.oracle_output_scale) ||
      !(c.oracle_bias_scale >= 0.0) || !std::isfinite(c.oracle_bias_scale)) {
    throw ConfigError("world oracle scales must be finite and positive");
  }
  if (!(c.oracle_bump_frac >= 0.0 && c.oracle_bump_frac <= 1.0)) {
    throw ConfigError("world.oracle_bump_frac must lie in [0, 1]");
  }
}

World generate_world(const WorldConfig& config) {
  validate(config);
  const int d = config.dimension;
  const int input_dim = 2 * d;
  const Rng root(config.rng_seed);

  QualityOracle oracle;
  oracle.input_dim = input_dim;
  oracle.hidden = config.oracle_hidden;
  oracle.bump_units = static_cast<int>(
      std::llround(config.oracle_bump_frac * config.oracle_hidden));
  {
    Rng orng = root.split(kOracleTag);
    const double w1_scale = config.oracle_input_scale / std::sqrt(input_dim);
    oracle.w1 = draw_vector(orng, oracle.hidden * input_dim);
    for (double& w : oracle.w1) w *= w1_scale;
    const double w2_scale =
        config.oracle_output_scale / std::sqrt(oracle.hidden);
    oracle.w2 = draw_vector(orng, oracle.hidden);
    for (double& w : oracle.w2) w *= w2_scale;
    oracle.bias = config.oracle_bias_scale * orng.normal();
  }

  std::vector<Question> questions(
      static_cast<std::size_t>(config.n_questions));
  for (int qi = 0; qi < config.n_questions; ++qi) {
    Question& q = questions[static_cast<std::size_t>(qi)];
    q.id = qi;
    Rng qrng = root.split(kQuestionTag).split(static_cast<std::uint64_t>(qi));
    q.context = draw_vector(qrng, d);
    // Redraw the answer set if every candidate lands on one quality value.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100) {
        throw ConfigError("degenerate question " + std::to_string(qi) +
                          ": answer qualities never separated");
      }
      Rng arng = qrng.split(static_cast<std::uint64_t>(attempt));
      q.answers.clear();
      double lo = 0.0, hi = 0.0;
      for (int k = 0; k < config.answers_per_question; ++k) {
        Answer a;
        a.id = k;
        a.features = draw_vector(arng, d);
        a.true_quality = oracle.value(q.context, a.features);
        lo = (k == 0) ? a.true_quality : std::min(lo, a.true_quality);
        hi = (k == 0) ? a.true_quality : std::max(hi, a.true_quality);
        q.answers.push_back(std::move(a));
      }
      if (hi - lo > 1e-12) break;
    }
  }
  return World(config, std::move(questions), std::move(oracle));
}

PreferencePair oracle_label(const World& world, PreferencePair pair,
                            double noise_eta, Rng& rng, LabelSource source) {
  if (source == LabelSource::Oracle) noise_eta = 0.0;
  if (!(noise_eta >= 0.0 && noise_eta < 0.5)) {
    throw ArgumentError("noise_eta must lie in [0, 0.5)");
  }
  const double q1 = world.true_quality(pair.question_id, pair.answer_1_id);
  const double q2 = world.true_quality(pair.question_id, pair.answer_2_id);
  bool first = q1 >= q2;  // ties toward answer 1
  if (noise_eta > 0.0 && rng.uniform() < noise_eta) first = !first;
  pair.label = first ? PrefLabel::Chosen1 : PrefLabel::Chosen2;
  pair.source = source;
  return pair;
}

void validate(const SplitConfig& c) {
  const double fr[] = {c.sft_frac, c.rm_frac, c.ppo_frac};
  for (double f : fr) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw ConfigError("split fractions must lie in [0, 1]");
    }
  }
  if (std::abs(c.sft_frac + c.rm_frac + c.ppo_frac - 1.0) > 1e-12) {
    throw ConfigError("split fractions must sum to 1 within 1e-12");
  }
  if (!(c.seed_label_frac > 0.0 && c.seed_label_frac <= 1.0)) {
    throw ConfigError("split.seed_label_frac must lie in (0, 1]");
  }
  if (!(c.noise_eta >= 0.0 && c.noise_eta < 0.5)) {
    throw ConfigError("split.noise_eta must lie in [0, 0.5)");
  }
}

Splits make_splits(const World& world, const SplitConfig& split) {
  validate(split);
  const auto n = static_cast<std::int64_t>(world.questions().size());
  if (n == 0) throw ConfigError("world has no questions");

  const Rng root(split.rng_seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = world.questions()[i].id;
  }
  {
    Rng srng = root.split(kShuffleTag);
    shuffle(order, srng);
  }

  const auto n_rm = static_cast<std::int64_t>(std::llround(split.rm_frac * n));
  const auto n_ppo =
      static_cast<std::int64_t>(std::llround(split.ppo_frac * n));
  const std::int64_t n_sft = n - n_rm - n_ppo;
  if (split.rm_frac > 0.0 && n_rm == 0) {
    throw ConfigError("RM pool empty after rounding");
  }
  if (split.ppo_frac > 0.0 && n_ppo == 0) {
    throw ConfigError("PPO pool empty after rounding");
  }
  if (split.sft_frac > 0.0 && n_sft <= 0) {
    throw ConfigError("SFT/test pool empty after rounding");
  }
  if (n_sft < 0) throw ConfigError("split fractions overflow the question set");

  Splits out;
  auto make_pair = [&](std::int64_t qid) {
    const Question& q = world.question(qid);
    PreferencePair p;
    p.question_id = qid;
    p.answer_1_id = q.answers[0].id;
    p.answer_2_id = q.answers[1].id;
    return p;
  };

  // SFT block doubles as the held-out test pool (no SFT stage here).
  {
    Rng trng = root.split(kTestLabelTag);
    for (std::int64_t i = 0; i < n_sft; ++i) {
      out.test.push_back(oracle_label(world, make_pair(order[static_cast<std::size_t>(i)]),
                                      0.0, trng, LabelSource::Oracle));
    }
  }

  std::vector<PreferencePair> rm_pairs;
  rm_pairs.reserve(static_cast<std::size_t>(n_rm));
  for (std::int64_t i = n_sft; i < n_sft + n_rm; ++i) {
    rm_pairs.push_back(make_pair(order[static_cast<std::size_t>(i)]));
  }
  const auto n_seed = static_cast<std::int64_t>(
      std::llround(split.seed_label_frac * static_cast<double>(n_rm)));
  if (n_seed == 0) throw ConfigError("seed-labeled pool empty after rounding");

  std::vector<std::size_t> pick(rm_pairs.size());
  std::iota(pick.begin(), pick.end(), 0);
  {
    Rng prng = root.split(kSeedPickTag);
    shuffle(pick, prng);
  }
  const Rng lroot = root.split(kSeedLabelTag);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(pick.size()); ++i) {
    const PreferencePair& p = rm_pairs[pick[static_cast<std::size_t>(i)]];
    if (i < n_seed) {
      Rng lrng = lroot.split(static_cast<std::uint64_t>(i));
      out.seed_labeled.push_back(
          oracle_label(world, p, split.noise_eta, lrng, LabelSource::HumanSim));
    } else {
      out.unlabeled.push_back(p);
    }
  }

  for (std::int64_t i = n_sft + n_rm; i < n; ++i) {
    out.ppo_prompts.push_back(order[static_cast<std::size_t>(i)]);
  }
  std::sort(out.ppo_prompts.begin(), out.ppo_prompts.end());
  return out;
}

}  // namespace serlab
