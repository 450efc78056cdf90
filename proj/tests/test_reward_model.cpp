#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "serlab/errors.hpp"
#include "serlab/reward_model.hpp"
#include "serlab/world.hpp"

using namespace serlab;

namespace {

// Independent central-difference gradient of the batch hinge loss.
std::vector<double> numeric_grad(RewardNet net, const FeatureStore& store,
                                 std::span<const PreferencePair> pairs,
                                 double margin, double step = 1e-5) {
  std::vector<double> g(net.flat().size());
  auto w = net.flat();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + step;
    const double up = pairwise_loss(net, store, pairs, margin);
    w[i] = keep - step;
    const double down = pairwise_loss(net, store, pairs, margin);
    w[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

World random_world(int d, int n_questions, int k, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.dimension = d;
  cfg.n_questions = n_questions;
  cfg.answers_per_question = k;
  cfg.rng_seed = seed;
  return generate_world(cfg);
}

std::vector<PreferencePair> first_pairs(const World& w, std::size_t n) {
  std::vector<PreferencePair> out;
  for (const Question& q : w.questions()) {
    if (out.size() == n) break;
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = q.answers[0].id;
    p.answer_2_id = q.answers[1].id;
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("zero final layer scores one half everywhere") {
  Rng rng(1);
  RewardNet net = RewardNet::random_init(3, 4, rng);
  for (int j = 0; j < net.hidden(); ++j) net.w2()[j] = 0.0;
  net.b2() = 0.0;
  const std::vector<double> q{0.3, -1.0, 2.5};
  const std::vector<double> a{1.1, 0.0, -0.7};
  CHECK(net.score(q, a) == 0.5);
}

TEST_CASE("single-unit score matches hand arithmetic") {
  RewardNet net(2, 1);
  // W1 row, b1, w2, b2
  net.w1()[0] = 0.3;
  net.w1()[1] = -0.2;
  net.w1()[2] = 0.7;
  net.w1()[3] = 0.1;
  net.b1()[0] = 0.05;
  net.w2()[0] = 1.4;
  net.b2() = -0.3;
  const std::vector<double> q{0.5, -1.5};
  const std::vector<double> a{2.0, 0.25};
  const double pre = 0.3 * 0.5 + (-0.2) * (-1.5) + 0.7 * 2.0 + 0.1 * 0.25 + 0.05;
  const double z = 1.4 * std::tanh(pre) - 0.3;
  const double expected = 1.0 / (1.0 + std::exp(-z));
  CHECK(std::abs(net.score(q, a) - expected) < 1e-12);
  CHECK(std::abs(net.logit(q, a) - z) < 1e-12);
}

TEST_CASE("zero inputs leave only the bias path") {
  RewardNet net(2, 3);
  net.b1()[0] = 0.2;
  net.b1()[1] = -0.4;
  net.b1()[2] = 1.0;
  net.w2()[0] = 0.5;
  net.w2()[1] = 1.5;
  net.w2()[2] = -0.25;
  net.b2() = 0.1;
  const std::vector<double> zeros{0.0, 0.0};
  double z = 0.1;
  z += 0.5 * std::tanh(0.2) + 1.5 * std::tanh(-0.4) - 0.25 * std::tanh(1.0);
  CHECK(std::abs(net.logit(zeros, zeros) - z) < 1e-12);
}

TEST_CASE("score rejects bad inputs") {
  RewardNet net(2, 2);
  const std::vector<double> ok{0.0, 1.0};
  const std::vector<double> wrong{0.0, 1.0, 2.0};
  const std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(net.score(wrong, ok), ShapeError);
  CHECK_THROWS_AS(net.score(ok, bad), ArgumentError);
}

TEST_CASE("score stays strictly inside (0,1) even for huge weights") {
  RewardNet net(2, 1);
  net.w1()[0] = 500.0;
  net.w1()[2] = 500.0;
  net.w2()[0] = 1e6;
  net.b2() = 1e5;
  const std::vector<double> q{1.0, 0.0};
  const std::vector<double> a{1.0, 0.0};
  const double p = net.score(q, a);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  net.w2()[0] = -1e6;
  net.b2() = -1e5;
  const double p2 = net.score(q, a);
  CHECK(p2 > 0.0);
  CHECK(p2 < 1.0);
}

TEST_CASE("hinge values match the stated cases") {
  CHECK(pair_hinge(0.8, 0.3, 0.1) == 0.0);
  CHECK(pair_hinge(0.5, 0.5, 0.1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pair_hinge(0.4, 0.6, 0.1) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("hinge is monotone in both scores") {
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const double margin = 0.05 + 0.9 * rng.uniform();
    const double pc = rng.uniform();
    const double pr = rng.uniform();
    const double bump = 0.2 * rng.uniform();
    CHECK(pair_hinge(std::min(1.0, pc + bump), pr, margin) <=
          pair_hinge(pc, pr, margin));
    CHECK(pair_hinge(pc, std::max(0.0, pr - bump), margin) <=
          pair_hinge(pc, pr, margin));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  const World w = random_world(3, 64, 2, 11);
  Rng rng(17);
  int tested = 0;
  for (int attempt = 0; attempt < 500 && tested < 60; ++attempt) {
    Rng nrng = rng.split(static_cast<std::uint64_t>(attempt));
    RewardNet net = RewardNet::random_init(3, 4, nrng);
    for (double& x : net.flat()) x *= 2.0;  // spread the scores out
    const double margin = 0.05 + 0.4 * nrng.uniform();

    std::vector<PreferencePair> batch;
    for (int j = 0; j < 5; ++j) {
      const auto& q = w.questions()[nrng.below(w.questions().size())];
      PreferencePair p;
      p.question_id = q.id;
      p.answer_1_id = 0;
      p.answer_2_id = 1;
      batch.push_back(p);
    }
    // Stay away from the hinge kink so the finite-difference step cannot
    // cross it.
    bool near_kink = false;
    for (const PreferencePair& p : batch) {
      const auto qf = w.question_features(p.question_id);
      const double gap = net.score(qf, w.answer_features(p.question_id, 0)) -
                         net.score(qf, w.answer_features(p.question_id, 1));
      if (std::abs(margin - gap) < 1e-3) near_kink = true;
    }
    if (near_kink) continue;

    const LossGrad lg = pairwise_loss_and_grad(net, w, batch, margin);
    const std::vector<double> ng = numeric_grad(net, w, batch, margin);
    for (std::size_t i = 0; i < ng.size(); ++i) {
      const double scale = std::max({std::abs(lg.grad[i]), std::abs(ng[i]), 1e-6});
      CHECK(std::abs(lg.grad[i] - ng[i]) / scale < 1e-4);
    }
    ++tested;
  }
  CHECK(tested >= 50);
}

TEST_CASE("a satisfied pair leaves training params untouched") {
  const World w = random_world(2, 4, 2, 3);
  Rng rng(5);
  RewardNet net = RewardNet::random_init(2, 4, rng);
  std::vector<PreferencePair> data = first_pairs(w, 1);
  const auto qf = w.question_features(data[0].question_id);
  double gap = net.score(qf, w.answer_features(data[0].question_id, 0)) -
               net.score(qf, w.answer_features(data[0].question_id, 1));
  if (gap < 0) {
    std::swap(data[0].answer_1_id, data[0].answer_2_id);
    gap = -gap;
  }
  TrainHyper hyper;
  hyper.margin = std::min(0.5, gap * 0.5);
  hyper.epochs = 5;
  const TrainResult res = train(net, w, data, hyper);
  CHECK(res.initial_loss == 0.0);
  CHECK(res.final_loss == 0.0);
  for (std::size_t i = 0; i < net.flat().size(); ++i) {
    CHECK(res.params.flat()[i] == net.flat()[i]);
  }
}

TEST_CASE("training separates a linearly labeled set perfectly") {
  const World w = random_world(4, 200, 2, 31);
  // Preferences follow a fixed linear functional of the answer features.
  const std::vector<double> v{1.0, -2.0, 0.5, 1.5};
  std::vector<PreferencePair> data;
  for (const Question& q : w.questions()) {
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      s1 += v[static_cast<std::size_t>(i)] * q.answers[0].features[static_cast<std::size_t>(i)];
      s2 += v[static_cast<std::size_t>(i)] * q.answers[1].features[static_cast<std::size_t>(i)];
    }
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = s1 > s2 ? 0 : 1;
    p.answer_2_id = s1 > s2 ? 1 : 0;
    p.label = PrefLabel::Chosen1;
    p.source = LabelSource::Oracle;
    data.push_back(p);
  }
  Rng rng(8);
  const RewardNet net = RewardNet::random_init(4, 16, rng);
  TrainHyper hyper;
  hyper.learning_rate = 0.5;
  hyper.epochs = 300;
  hyper.batch_size = 32;
  hyper.margin = 0.1;
  hyper.rng_seed = 2;
  const TrainResult res = train(net, w, data, hyper);
  CHECK(res.final_loss < res.initial_loss);
  CHECK(evaluate_accuracy(res.params, w, data) == 1.0);
}

TEST_CASE("training is deterministic under one seed") {
  const World w = random_world(3, 50, 2, 41);
  std::vector<PreferencePair> data = first_pairs(w, 50);
  for (auto& p : data) p.label = PrefLabel::Chosen1;
  Rng rng(9);
  const RewardNet net = RewardNet::random_init(3, 8, rng);
  TrainHyper hyper;
  hyper.learning_rate = 0.1;
  hyper.epochs = 7;
  hyper.rng_seed = 123;
  const TrainResult a = train(net, w, data, hyper);
  const TrainResult b = train(net, w, data, hyper);
  for (std::size_t i = 0; i < a.params.flat().size(); ++i) {
    CHECK(a.params.flat()[i] == b.params.flat()[i]);
  }
}

TEST_CASE("empty batches are rejected") {
  const World w = random_world(2, 4, 2, 3);
  RewardNet net(2, 2);
  const std::vector<PreferencePair> empty;
  CHECK_THROWS_AS(pairwise_loss_and_grad(net, w, empty, 0.1), ArgumentError);
  TrainHyper hyper;
  CHECK_THROWS_AS(train(net, w, empty, hyper), ArgumentError);
  CHECK_THROWS_AS(evaluate_accuracy(net, w, empty), ArgumentError);
}

TEST_CASE("evaluation counts strict wins only") {
  const World w = random_world(2, 8, 2, 13);
  Rng rng(2);
  const RewardNet net = RewardNet::random_init(2, 4, rng);
  std::vector<PreferencePair> pairs = first_pairs(w, 2);
  for (auto& p : pairs) {
    const auto qf = w.question_features(p.question_id);
    const double p1 = net.score(qf, w.answer_features(p.question_id, 0));
    const double p2 = net.score(qf, w.answer_features(p.question_id, 1));
    p.label = p1 > p2 ? PrefLabel::Chosen1 : PrefLabel::Chosen2;
    p.source = LabelSource::Oracle;
  }
  CHECK(evaluate_accuracy(net, w, pairs) == 1.0);

  // A constant scorer ties every pair: all incorrect by convention.
  RewardNet constant(2, 2);
  CHECK(evaluate_accuracy(constant, w, pairs) == 0.0);

  std::vector<PreferencePair> unlabeled = first_pairs(w, 1);
  CHECK_THROWS_AS(evaluate_accuracy(net, w, unlabeled), ArgumentError);
}

TEST_CASE("random scorers sit at chance on oracle labels") {
  const World w = random_world(16, 10000, 2, 77);
  Rng label_rng(0);
  std::vector<PreferencePair> pairs;
  for (const Question& q : w.questions()) {
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = 0;
    p.answer_2_id = 1;
    pairs.push_back(oracle_label(w, p, 0.0, label_rng, LabelSource::Oracle));
  }
  // A single random scorer carries a chance correlation with the hidden
  // quality function, so the symmetry argument is checked on the average
  // over independent scorers.
  Rng rng(31337);
  double acc_sum = 0.0;
  const int n_nets = 50;
  for (int t = 0; t < n_nets; ++t) {
    Rng nrng = rng.split(static_cast<std::uint64_t>(t));
    const RewardNet net = RewardNet::random_init(16, 16, nrng);
    acc_sum += evaluate_accuracy(net, w, pairs);
  }
  CHECK(acc_sum / n_nets == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("evaluation is antisymmetric under pair reversal") {
  const World w = random_world(3, 300, 2, 55);
  Rng label_rng(1);
  std::vector<PreferencePair> pairs;
  for (const Question& q : w.questions()) {
    PreferencePair p;
    p.question_id = q.id;
    p.answer_1_id = 0;
    p.answer_2_id = 1;
    pairs.push_back(oracle_label(w, p, 0.0, label_rng, LabelSource::Oracle));
  }
  Rng rng(6);
  const RewardNet net = RewardNet::random_init(3, 8, rng);
  const double acc = evaluate_accuracy(net, w, pairs);
  std::vector<PreferencePair> swapped = pairs;
  for (auto& p : swapped) {
    std::swap(p.answer_1_id, p.answer_2_id);
    p.label = p.label == PrefLabel::Chosen1 ? PrefLabel::Chosen2
                                            : PrefLabel::Chosen1;
  }
  CHECK(evaluate_accuracy(net, w, swapped) == acc);
}

TEST_CASE("orientation helper puts the chosen answer first") {
  PreferencePair p;
  p.question_id = 1;
  p.answer_1_id = 10;
  p.answer_2_id = 20;
  p.label = PrefLabel::Chosen2;
  p.source = LabelSource::HumanSim;
  p.scores = {{0.3, 0.7}};
  const auto out = orient_chosen_first(std::vector<PreferencePair>{p});
  CHECK(out[0].answer_1_id == 20);
  CHECK(out[0].answer_2_id == 10);
  CHECK(out[0].label == PrefLabel::Chosen1);
  CHECK(out[0].scores->first == 0.7);

  PreferencePair unlabeled;
  unlabeled.answer_2_id = 1;
  CHECK_THROWS_AS(orient_chosen_first(std::vector<PreferencePair>{unlabeled}),
                  ArgumentError);
}

TEST_CASE("hyperparameter invariants are enforced") {
  TrainHyper h;
  h.learning_rate = 0.0;
  CHECK_THROWS_AS(validate(h), ConfigError);
  h = TrainHyper{};
  h.margin = 1.0;
  CHECK_THROWS_AS(validate(h), ConfigError);
  h = TrainHyper{};
  h.epochs = 0;
  CHECK_THROWS_AS(validate(h), ConfigError);
}
