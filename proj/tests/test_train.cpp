#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "shiftguard/errors.hpp"
#include "shiftguard/train.hpp"

using namespace shiftguard;

namespace {

// transitions from s' = A s + B a + c (+ noise), inputs spread over [-1,1]
TransitionDataset linear_dataset(int count, double noise_std, Rng& rng) {
  Mat a(2, 2);
  a << 0.9, 0.1, -0.2, 0.8;
  Mat b(2, 1);
  b << 0.5, 1.0;
  Vec c(2);
  c << 0.1, -0.3;
  TransitionDataset data;
  for (int i = 0; i < count; ++i) {
    Transition t;
    t.s = Vec(2);
    t.a = Vec(1);
    t.s << rng.uniform(-1, 1), rng.uniform(-1, 1);
    t.a << rng.uniform(-1, 1);
    t.sp = a * t.s + b * t.a + c;
    for (int k = 0; k < 2; ++k) t.sp[k] += noise_std * rng.normal();
    data.push_back(t);
  }
  return data;
}

double fit_rmse(const ReluNetwork& net, const TransitionDataset& data) {
  double total = 0.0;
  for (const Transition& t : data) {
    Vec in(t.s.size() + t.a.size());
    in << t.s, t.a;
    total += (net.forward(in) - t.sp).squaredNorm();
  }
  return std::sqrt(total / (data.size() * data.front().sp.size()));
}

bool grad_check(const Vec& analytic, const std::function<double(const Vec&)>& loss, Vec params,
                double step = 1e-5, double rel_tol = 1e-4) {
  double ref_scale = std::max(analytic.norm(), 1e-8);
  for (int k = 0; k < params.size(); ++k) {
    Vec p = params;
    p[k] += step;
    double up = loss(p);
    p[k] -= 2.0 * step;
    double down = loss(p);
    double fd = (up - down) / (2.0 * step);
    if (std::fabs(fd - analytic[k]) > rel_tol * std::max({1.0, std::fabs(fd), ref_scale}))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("train_mean fits an exact linear map to below 1e-3 RMSE") {
  Rng rng(42);
  TransitionDataset data = linear_dataset(2000, 0.0, rng);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.learning_rate = 3e-3;
  cfg.seed = 1;
  ReluNetwork net = train_mean(data, {3, 16, 2}, cfg);
  CHECK(fit_rmse(net, data) <= 1e-3);
}

TEST_CASE("train_mean rejects empty data") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train_mean({}, {3, 4, 2}, cfg), TrainingError);
}

TEST_CASE("train_mean is deterministic per seed") {
  Rng rng(7);
  TransitionDataset data = linear_dataset(200, 0.01, rng);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 99;
  ReluNetwork n1 = train_mean(data, {3, 8, 2}, cfg);
  ReluNetwork n2 = train_mean(data, {3, 8, 2}, cfg);
  CHECK(n1 == n2);
}

TEST_CASE("train_cov recovers iid noise variance within a factor of two") {
  Rng rng(11);
  double noise_std = 1e-2;  // variance 1e-4 per coordinate
  TransitionDataset data = linear_dataset(4000, noise_std, rng);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 3e-3;
  cfg.seed = 5;
  ReluNetwork mean_net = train_mean(data, {3, 16, 2}, cfg);
  ReluNetwork cov_net = train_cov(data, mean_net, {3, 8, 2}, cfg);

  Vec probe(3);
  probe << 0.2, -0.1, 0.3;
  Vec vars = cov_net.forward(probe).array().exp();
  for (int k = 0; k < 2; ++k) {
    CHECK(vars[k] > 0.5e-4);
    CHECK(vars[k] < 2.0e-4);
  }
}

TEST_CASE("train_cov on zero-noise data collapses the variances") {
  Rng rng(13);
  TransitionDataset data = linear_dataset(2000, 0.0, rng);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.learning_rate = 3e-3;
  cfg.seed = 6;
  ReluNetwork mean_net = train_mean(data, {3, 16, 2}, cfg);
  ReluNetwork cov_net = train_cov(data, mean_net, {3, 8, 2}, cfg);
  Vec probe(3);
  probe << 0.0, 0.1, -0.2;
  Vec vars = cov_net.forward(probe).array().exp();
  for (int k = 0; k < 2; ++k) CHECK(vars[k] <= 1e-6);
}

TEST_CASE("joint embedded training works and degenerates gracefully") {
  Rng rng(21);
  TransitionDataset data = linear_dataset(2000, 0.0, rng);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 3e-3;
  cfg.seed = 3;

  // identity-capacity embedder on linear data behaves like a direct fit
  auto [embedder, mean_net] = train_joint_embedded(data, {2, 2}, {3, 16, 2}, cfg);
  double total = 0.0;
  for (const Transition& t : data) {
    Vec se = embedder.forward(t.s);
    Vec in(se.size() + 1);
    in << se, t.a;
    total += (mean_net.forward(in) - t.sp).squaredNorm();
  }
  CHECK(std::sqrt(total / (2 * data.size())) < 5e-3);

  // deterministic per seed
  auto [e2, m2] = train_joint_embedded(data, {2, 2}, {3, 16, 2}, cfg);
  CHECK(e2 == embedder);
  CHECK(m2 == mean_net);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(31);
  TransitionDataset data = linear_dataset(20, 0.05, rng);

  ReluNetwork mean_net = ReluNetwork::random({3, 5, 2}, Activation::relu, rng);
  CHECK(grad_check(mean_loss_gradient(mean_net, data),
                   [&](const Vec& p) {
                     ReluNetwork n = mean_net;
                     set_params(n, p);
                     return mean_loss(n, data);
                   },
                   flatten_params(mean_net)));

  ReluNetwork cov_net = ReluNetwork::random({3, 4, 2}, Activation::relu, rng);
  CHECK(grad_check(cov_loss_gradient(cov_net, mean_net, data),
                   [&](const Vec& p) {
                     ReluNetwork n = cov_net;
                     set_params(n, p);
                     return cov_loss(n, mean_net, data);
                   },
                   flatten_params(cov_net)));

  ReluNetwork embedder = ReluNetwork::random({2, 3, 2}, Activation::tanh, rng);
  ReluNetwork joint_mean = ReluNetwork::random({3, 5, 2}, Activation::relu, rng);
  Vec pe = flatten_params(embedder);
  Vec pm = flatten_params(joint_mean);
  Vec both(pe.size() + pm.size());
  both << pe, pm;
  CHECK(grad_check(joint_loss_gradient(embedder, joint_mean, data),
                   [&](const Vec& p) {
                     ReluNetwork e = embedder, m = joint_mean;
                     set_params(e, p.head(pe.size()));
                     set_params(m, p.tail(pm.size()));
                     return joint_loss(e, m, data);
                   },
                   both));
}

TEST_CASE("invalid training configs are rejected") {
  TrainConfig cfg;
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = TrainConfig{};
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
