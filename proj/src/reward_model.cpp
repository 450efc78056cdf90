#include "serlab/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

// Keeps sigmoid strictly inside (0, 1) even for absurd weight scales:
// sigmoid(36) is still below 1 in double precision, sigmoid(37) is not.
constexpr double kLogitClamp = 36.0;

double sigmoid(double z) {
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

void check_features(const RewardNet& net, std::span<const double> q,
                    std::span<const double> a) {
  if (static_cast<int>(q.size()) != net.feature_dim() ||
      static_cast<int>(a.size()) != net.feature_dim()) {
    throw ShapeError("feature dim mismatch: params expect d=" +
                     std::to_string(net.feature_dim()) + ", got q=" +
                     std::to_string(q.size()) + " a=" + std::to_string(a.size()));
  }
  for (double x : q) {
    if (!std::isfinite(x)) throw ArgumentError("non-finite question feature");
  }
  for (double x : a) {
    if (!std::isfinite(x)) throw ArgumentError("non-finite answer feature");
  }
}

struct Forward {
  std::vector<double> h;  // tanh activations
  double z = 0.0;         // logit
  double p = 0.5;
};

Forward forward(const RewardNet& net, std::span<const double> q,
                std::span<const double> a) {
  const int d = net.feature_dim();
  const int hd = net.hidden();
  Forward f;
  f.h.resize(static_cast<std::size_t>(hd));
  double z = net.b2();
  for (int j = 0; j < hd; ++j) {
    const double* row = net.w1() + static_cast<std::size_t>(j) * 2 * d;
    double pre = net.b1()[j];
    for (int i = 0; i < d; ++i) pre += row[i] * q[static_cast<std::size_t>(i)];
    for (int i = 0; i < d; ++i) pre += row[d + i] * a[static_cast<std::size_t>(i)];
    f.h[static_cast<std::size_t>(j)] = std::tanh(pre);
    z += net.w2()[j] * f.h[static_cast<std::size_t>(j)];
  }
  f.z = z;
  f.p = sigmoid(z);
  return f;
}

// Accumulates coeff * d p / d theta into grad.
void backprop(const RewardNet& net, std::span<const double> q,
              std::span<const double> a, const Forward& f, double coeff,
              std::vector<double>& grad) {
  const int d = net.feature_dim();
  const int hd = net.hidden();
  const double dz = coeff * f.p * (1.0 - f.p);
  double* gw1 = grad.data();
  double* gb1 = grad.data() + static_cast<std::size_t>(hd) * 2 * d;
  double* gw2 = gb1 + hd;
  double& gb2 = grad[grad.size() - 1];
  gb2 += dz;
  for (int j = 0; j < hd; ++j) {
    const double hj = f.h[static_cast<std::size_t>(j)];
    gw2[j] += dz * hj;
    const double dpre = dz * net.w2()[j] * (1.0 - hj * hj);
    if (dpre == 0.0) continue;
    gb1[j] += dpre;
    double* row = gw1 + static_cast<std::size_t>(j) * 2 * d;
    for (int i = 0; i < d; ++i) row[i] += dpre * q[static_cast<std::size_t>(i)];
    for (int i = 0; i < d; ++i) row[d + i] += dpre * a[static_cast<std::size_t>(i)];
  }
}

}  // namespace

RewardNet::RewardNet(int feature_dim, int hidden) : d_(feature_dim), h_(hidden) {
  if (feature_dim < 1 || hidden < 1) {
    throw ConfigError("reward net needs feature_dim >= 1 and hidden >= 1");
  }
  weights_.assign(weight_count(feature_dim, hidden), 0.0);
}

RewardNet RewardNet::random_init(int feature_dim, int hidden, Rng& rng) {
  RewardNet net(feature_dim, hidden);
  const double s1 = 1.0 / std::sqrt(2.0 * feature_dim);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  double* w1 = net.w1();
  for (std::size_t i = 0; i < static_cast<std::size_t>(hidden) * 2 * feature_dim; ++i) {
    w1[i] = s1 * rng.normal();
  }
  double* w2 = net.w2();
  for (int j = 0; j < hidden; ++j) w2[j] = s2 * rng.normal();
  return net;
}

double RewardNet::logit(std::span<const double> q_feat,
                        std::span<const double> a_feat) const {
  check_features(*this, q_feat, a_feat);
  return forward(*this, q_feat, a_feat).z;
}

double RewardNet::score(std::span<const double> q_feat,
                        std::span<const double> a_feat) const {
  check_features(*this, q_feat, a_feat);
  return forward(*this, q_feat, a_feat).p;
}

void validate(const TrainHyper& h) {
  if (!(h.learning_rate > 0.0) || !std::isfinite(h.learning_rate)) {
    throw ConfigError("train.learning_rate must be positive");
  }
  if (h.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (h.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(h.margin > 0.0 && h.margin < 1.0)) {
    throw ConfigError("train.margin must lie in (0, 1)");
  }
  if (!(h.weight_decay >= 0.0) || !std::isfinite(h.weight_decay)) {
    throw ConfigError("train.weight_decay must be >= 0");
  }
}

double pair_hinge(double p_chosen, double p_rejected, double margin) {
  return std::max(0.0, margin - (p_chosen - p_rejected));
}

LossGrad pairwise_loss_and_grad(const RewardNet& net, const FeatureStore& store,
                                std::span<const PreferencePair> chosen_first,
                                double margin) {
  if (chosen_first.empty()) throw ArgumentError("empty pair batch");
  LossGrad out;
  out.grad.assign(net.flat().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(chosen_first.size());
  for (const PreferencePair& pr : chosen_first) {
    const auto q = store.question_features(pr.question_id);
    const auto ac = store.answer_features(pr.question_id, pr.answer_1_id);
    const auto ar = store.answer_features(pr.question_id, pr.answer_2_id);
    check_features(net, q, ac);
    check_features(net, q, ar);
    const Forward fc = forward(net, q, ac);
    const Forward fr = forward(net, q, ar);
    const double gap = fc.p - fr.p;
    if (gap >= margin) continue;  // satisfied: zero loss, zero gradient
    out.loss += (margin - gap) * inv_n;
    backprop(net, q, ac, fc, -inv_n, out.grad);
    backprop(net, q, ar, fr, +inv_n, out.grad);
  }
  return out;
}

double pairwise_loss(const RewardNet& net, const FeatureStore& store,
                     std::span<const PreferencePair> chosen_first,
                     double margin) {
  if (chosen_first.empty()) throw ArgumentError("empty pair batch");
  double loss = 0.0;
  for (const PreferencePair& pr : chosen_first) {
    const auto q = store.question_features(pr.question_id);
    const double pc = net.score(q, store.answer_features(pr.question_id, pr.answer_1_id));
    const double rj = net.score(q, store.answer_features(pr.question_id, pr.answer_2_id));
    loss += pair_hinge(pc, rj, margin);
  }
  return loss / static_cast<double>(chosen_first.size());
}

TrainResult train(const RewardNet& net, const FeatureStore& store,
                  std::span<const PreferencePair> chosen_first,
                  const TrainHyper& hyper) {
  if (chosen_first.empty()) throw ArgumentError("empty training set");
  validate(hyper);

  TrainResult result{net, 0.0, 0.0, false};
  result.initial_loss = pairwise_loss(net, store, chosen_first, hyper.margin);

  RewardNet& params = result.params;
  const std::size_t n = chosen_first.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<PreferencePair> batch;
  batch.reserve(static_cast<std::size_t>(hyper.batch_size));
  const Rng root(hyper.rng_seed);
  const std::size_t n_bias = static_cast<std::size_t>(params.hidden()) * 2 *
                             params.feature_dim();  // biases start here

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng erng = root.split(static_cast<std::uint64_t>(epoch));
    shuffle(order, erng);
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(hyper.batch_size)) {
      batch.clear();
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(hyper.batch_size));
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(chosen_first[order[i]]);
      }
      const LossGrad lg =
          pairwise_loss_and_grad(params, store, batch, hyper.margin);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError(
            "non-finite pairwise loss at epoch " + std::to_string(epoch) +
            ", batch starting at " + std::to_string(start));
      }
      auto w = params.flat();
      if (hyper.weight_decay > 0.0) {
        const double decay = 1.0 - hyper.learning_rate * hyper.weight_decay;
        for (std::size_t i = 0; i < n_bias; ++i) w[i] *= decay;  // weights only
        for (int j = 0; j < params.hidden(); ++j) {
          params.w2()[j] *= decay;
        }
      }
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= hyper.learning_rate * lg.grad[i];
      }
    }
  }
  result.final_loss = pairwise_loss(params, store, chosen_first, hyper.margin);
  result.loss_increased = result.final_loss > result.initial_loss + 1e-12;
  return result;
}

double evaluate_accuracy(const RewardNet& net, const FeatureStore& store,
                         std::span<const PreferencePair> labeled) {
  if (labeled.empty()) throw ArgumentError("empty evaluation set");
  std::int64_t correct = 0;
  for (const PreferencePair& pr : labeled) {
    if (pr.label == PrefLabel::Unlabeled) {
      throw ArgumentError("unlabeled pair in evaluation set (question " +
                          std::to_string(pr.question_id) + ")");
    }
    const auto q = store.question_features(pr.question_id);
    const double p1 = net.score(q, store.answer_features(pr.question_id, pr.answer_1_id));
    const double p2 = net.score(q, store.answer_features(pr.question_id, pr.answer_2_id));
    const double chosen = pr.label == PrefLabel::Chosen1 ? p1 : p2;
    const double rejected = pr.label == PrefLabel::Chosen1 ? p2 : p1;
    if (chosen > rejected) ++correct;  // ties are incorrect
  }
  return static_cast<double>(correct) / static_cast<double>(labeled.size());
}

std::vector<PreferencePair> orient_chosen_first(
    std::span<const PreferencePair> pairs) {
  std::vector<PreferencePair> out;
  out.reserve(pairs.size());
  for (PreferencePair p : pairs) {
    if (p.label == PrefLabel::Unlabeled) {
      throw ArgumentError("cannot orient an unlabeled pair (question " +
                          std::to_string(p.question_id) + ")");
    }
    if (p.label == PrefLabel::Chosen2) {
      std::swap(p.answer_1_id, p.answer_2_id);
      if (p.scores) std::swap(p.scores->first, p.scores->second);
      p.label = PrefLabel::Chosen1;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace serlab
