#include "shiftguard/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shiftguard/errors.hpp"
#include "shiftguard/rng.hpp"

namespace shiftguard {

namespace {

struct GradientBuffer {
  std::vector<Mat> dw;
  std::vector<Vec> db;

  explicit GradientBuffer(const ReluNetwork& net) {
    for (int l = 0; l < net.num_layers(); ++l) {
      dw.push_back(Mat::Zero(net.weight(l).rows(), net.weight(l).cols()));
      db.push_back(Vec::Zero(net.bias(l).size()));
    }
  }

  void set_zero() {
    for (auto& m : dw) m.setZero();
    for (auto& v : db) v.setZero();
  }

  void scale(double factor) {
    for (auto& m : dw) m *= factor;
    for (auto& v : db) v *= factor;
  }
};

double act(Activation a, double v) { return a == Activation::relu ? std::max(0.0, v) : std::tanh(v); }

double act_deriv(Activation a, double v) {
  if (a == Activation::relu) return v > 0.0 ? 1.0 : 0.0;
  double t = std::tanh(v);
  return 1.0 - t * t;
}

// Accumulates d loss / d params into grads; returns d loss / d input.
Vec backprop(const ReluNetwork& net, const Vec& input, const Vec& dloss_dout,
             GradientBuffer& grads) {
  int layers = net.num_layers();
  std::vector<Vec> zs;  // post-activations, zs[0] = input
  std::vector<Vec> vs;  // pre-activations of hidden layers
  zs.reserve(layers);
  zs.push_back(input);
  Vec z = input;
  for (int l = 0; l < layers - 1; ++l) {
    Vec v = net.weight(l) * z + net.bias(l);
    vs.push_back(v);
    z = v.unaryExpr([&](double x) { return act(net.hidden_activation(), x); });
    zs.push_back(z);
  }

  Vec delta = dloss_dout;
  for (int l = layers - 1; l >= 0; --l) {
    grads.dw[l].noalias() += delta * zs[l].transpose();
    grads.db[l] += delta;
    if (l > 0) {
      Vec back = net.weight(l).transpose() * delta;
      const Vec& v = vs[l - 1];
      delta = back.cwiseProduct(
          v.unaryExpr([&](double x) { return act_deriv(net.hidden_activation(), x); }));
    } else {
      return net.weight(0).transpose() * delta;
    }
  }
  return Vec();
}

class AdamState {
 public:
  explicit AdamState(const ReluNetwork& net) : m_(net), v_(net) {}

  void step(ReluNetwork& net, const GradientBuffer& g, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (int l = 0; l < net.num_layers(); ++l) {
      m_.dw[l] = beta1_ * m_.dw[l] + (1.0 - beta1_) * g.dw[l];
      v_.dw[l] = beta2_ * v_.dw[l] + (1.0 - beta2_) * g.dw[l].cwiseProduct(g.dw[l]);
      Mat denom = (v_.dw[l] / bc2).cwiseSqrt() +
                  Mat::Constant(v_.dw[l].rows(), v_.dw[l].cols(), eps_);
      net.weight(l) -= (lr / bc1) * m_.dw[l].cwiseQuotient(denom);
      m_.db[l] = beta1_ * m_.db[l] + (1.0 - beta1_) * g.db[l];
      v_.db[l] = beta2_ * v_.db[l] + (1.0 - beta2_) * g.db[l].cwiseProduct(g.db[l]);
      net.bias(l) -= (lr / bc1) * m_.db[l].cwiseQuotient((v_.db[l] / bc2).cwiseSqrt() +
                                                         Vec::Constant(v_.db[l].size(), eps_));
    }
  }

 private:
  GradientBuffer m_;
  GradientBuffer v_;
  int t_ = 0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
};

void sgd_step(ReluNetwork& net, const GradientBuffer& g, double lr) {
  for (int l = 0; l < net.num_layers(); ++l) {
    net.weight(l) -= lr * g.dw[l];
    net.bias(l) -= lr * g.db[l];
  }
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

// Abstracts the three losses so the mini-batch loop is shared.
struct Problem {
  // loss on one sample; adds parameter gradients (scaled by `weight`)
  virtual double sample_loss(const Transition& t, double weight,
                             std::vector<GradientBuffer>* grads) = 0;
  virtual std::vector<ReluNetwork*> nets() = 0;
  virtual ~Problem() = default;
};

struct MeanProblem : Problem {
  ReluNetwork* net;
  explicit MeanProblem(ReluNetwork* n) : net(n) {}

  double sample_loss(const Transition& t, double weight,
                     std::vector<GradientBuffer>* grads) override {
    Vec x = concat(t.s, t.a);
    Vec out = net->forward(x);
    Vec r = out - t.sp;
    if (grads) backprop(*net, x, (2.0 * weight) * r, (*grads)[0]);
    return r.squaredNorm();
  }
  std::vector<ReluNetwork*> nets() override { return {net}; }
};

struct CovProblem : Problem {
  ReluNetwork* net;
  const ReluNetwork* mean_net;
  CovProblem(ReluNetwork* n, const ReluNetwork* m) : net(n), mean_net(m) {}

  double sample_loss(const Transition& t, double weight,
                     std::vector<GradientBuffer>* grads) override {
    Vec x = concat(t.s, t.a);
    Vec res = t.sp - mean_net->forward(x);
    Vec target = res.cwiseProduct(res);
    Vec out = net->forward(x);
    Vec ex = out.array().exp();
    Vec diff = ex - target;
    if (grads) {
      Vec dl = (2.0 * weight) * diff.cwiseProduct(ex);
      backprop(*net, x, dl, (*grads)[0]);
    }
    return diff.squaredNorm();
  }
  std::vector<ReluNetwork*> nets() override { return {net}; }
};

struct JointProblem : Problem {
  ReluNetwork* embedder;
  ReluNetwork* mean_net;
  JointProblem(ReluNetwork* e, ReluNetwork* m) : embedder(e), mean_net(m) {}

  double sample_loss(const Transition& t, double weight,
                     std::vector<GradientBuffer>* grads) override {
    Vec se = embedder->forward(t.s);
    Vec x = concat(se, t.a);
    Vec r = mean_net->forward(x) - t.sp;
    if (grads) {
      Vec dinput = backprop(*mean_net, x, (2.0 * weight) * r, (*grads)[1]);
      backprop(*embedder, t.s, dinput.head(se.size()), (*grads)[0]);
    }
    return r.squaredNorm();
  }
  std::vector<ReluNetwork*> nets() override { return {embedder, mean_net}; }
};

double dataset_loss(Problem& prob, const TransitionDataset& data, std::size_t begin,
                    std::size_t end) {
  if (end <= begin) return 0.0;
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) total += prob.sample_loss(data[i], 0.0, nullptr);
  return total / static_cast<double>(end - begin);
}

void run_training(Problem& prob, const TransitionDataset& data, const TrainConfig& cfg,
                  TrainingHistory* history) {
  cfg.validate();
  if (data.empty()) throw TrainingError("training data is empty");

  // Deterministic split: the shuffled tail is held out for validation.
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  TransitionDataset shuffled;
  shuffled.reserve(data.size());
  for (std::size_t i : order) shuffled.push_back(data[i]);
  std::size_t val_count = static_cast<std::size_t>(cfg.validation_fraction * data.size());
  if (val_count >= data.size()) val_count = data.size() - 1;
  std::size_t train_count = data.size() - val_count;

  std::vector<ReluNetwork*> nets = prob.nets();
  std::vector<GradientBuffer> grads;
  std::vector<AdamState> adam;
  for (ReluNetwork* n : nets) {
    grads.emplace_back(*n);
    adam.emplace_back(*n);
  }

  double initial_loss = dataset_loss(prob, shuffled, 0, train_count);
  std::vector<std::size_t> idx(train_count);
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // step decay: half rate after 60% of the epochs, a tenth after 85%
    double lr = cfg.learning_rate;
    if (epoch >= (cfg.epochs * 17) / 20)
      lr *= 0.1;
    else if (epoch >= (cfg.epochs * 3) / 5)
      lr *= 0.5;
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    for (std::size_t at = 0; at < train_count; at += cfg.batch_size) {
      std::size_t bsz = std::min<std::size_t>(cfg.batch_size, train_count - at);
      for (auto& g : grads) g.set_zero();
      double w = 1.0 / static_cast<double>(bsz);
      for (std::size_t b = 0; b < bsz; ++b) prob.sample_loss(shuffled[idx[at + b]], w, &grads);
      for (std::size_t k = 0; k < nets.size(); ++k) {
        if (cfg.optimizer == Optimizer::adam)
          adam[k].step(*nets[k], grads[k], lr);
        else
          sgd_step(*nets[k], grads[k], lr);
      }
    }
    double train_loss = dataset_loss(prob, shuffled, 0, train_count);
    double val_loss = val_count > 0 ? dataset_loss(prob, shuffled, train_count, data.size())
                                    : train_loss;
    if (!std::isfinite(train_loss))
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                          " (loss=" + std::to_string(train_loss) + ")");
    if (history) history->push_back({epoch, train_loss, val_loss});
  }

  double final_loss = dataset_loss(prob, shuffled, 0, train_count);
  if (!std::isfinite(final_loss) || (cfg.epochs > 0 && final_loss > initial_loss * 1.5 + 1e-12))
    throw TrainingError("training failed to reduce the loss (initial " +
                        std::to_string(initial_loss) + ", final " + std::to_string(final_loss) +
                        ")");
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw DomainError("TrainConfig: learning_rate must be positive");
  if (batch_size <= 0) throw DomainError("TrainConfig: batch_size must be positive");
  if (epochs < 0) throw DomainError("TrainConfig: epochs must be nonnegative");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    throw DomainError("TrainConfig: validation_fraction must be in [0,1)");
}

ReluNetwork train_mean(const TransitionDataset& data, const std::vector<int>& dims,
                       const TrainConfig& cfg, TrainingHistory* history) {
  if (data.empty()) throw TrainingError("train_mean: empty dataset");
  if (dims.front() != data.front().s.size() + data.front().a.size())
    throw DimensionError("train_mean: input dim must equal state dim + action dim");
  if (dims.back() != data.front().sp.size())
    throw DimensionError("train_mean: output dim must equal next-state dim");
  Rng init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  ReluNetwork net = ReluNetwork::random(dims, Activation::relu, init_rng);
  MeanProblem prob(&net);
  run_training(prob, data, cfg, history);
  return net;
}

ReluNetwork train_cov(const TransitionDataset& data, const ReluNetwork& mean_net,
                      const std::vector<int>& dims, const TrainConfig& cfg,
                      TrainingHistory* history) {
  if (data.empty()) throw TrainingError("train_cov: empty dataset");
  if (dims.back() != data.front().sp.size())
    throw DimensionError("train_cov: output dim must equal state dim (diagonal log-variances)");
  Rng init_rng(cfg.seed ^ 0xda3e39cb94b95bdbull);
  ReluNetwork net = ReluNetwork::random(dims, Activation::relu, init_rng);

  // Head initialization at the empirical log mean squared residual; gradient
  // descent then refines the state dependence.
  Vec mean_sq = Vec::Zero(dims.back());
  for (const Transition& t : data) {
    Vec in(t.s.size() + t.a.size());
    in << t.s, t.a;
    Vec r = t.sp - mean_net.forward(in);
    mean_sq += r.cwiseProduct(r);
  }
  mean_sq /= static_cast<double>(data.size());
  int last = net.num_layers() - 1;
  net.weight(last) *= 0.1;
  for (int k = 0; k < dims.back(); ++k)
    net.bias(last)[k] = std::clamp(std::log(std::max(mean_sq[k], 1e-300)), -30.0, 5.0);

  CovProblem prob(&net, &mean_net);
  run_training(prob, data, cfg, history);
  return net;
}

std::pair<ReluNetwork, ReluNetwork> train_joint_embedded(const TransitionDataset& data,
                                                         const std::vector<int>& dims_embedder,
                                                         const std::vector<int>& dims_mean,
                                                         const TrainConfig& cfg,
                                                         TrainingHistory* history) {
  if (data.empty()) throw TrainingError("train_joint_embedded: empty dataset");
  if (dims_embedder.front() != data.front().s.size())
    throw DimensionError("train_joint_embedded: embedder input dim must equal state dim");
  if (dims_mean.front() != dims_embedder.back() + data.front().a.size())
    throw DimensionError(
        "train_joint_embedded: mean net input dim must equal embedded dim + action dim");
  Rng init_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4full);
  ReluNetwork embedder = ReluNetwork::random(dims_embedder, Activation::tanh, init_rng);
  ReluNetwork mean_net = ReluNetwork::random(dims_mean, Activation::relu, init_rng);
  JointProblem prob(&embedder, &mean_net);
  run_training(prob, data, cfg, history);
  return {std::move(embedder), std::move(mean_net)};
}

Vec SurrogatePair::predict_mean(const Vec& s, const Vec& a) const {
  Vec x = embedder ? embedder->forward(s) : s;
  Vec in(x.size() + a.size());
  in << x, a;
  return mean_net.forward(in);
}

Vec SurrogatePair::predict_variances(const Vec& s, const Vec& a) const {
  Vec in(s.size() + a.size());
  in << s, a;
  return cov_net.forward(in).array().exp();
}

Vec SurrogatePair::predict_comparison(const Vec& s, const Vec& a) const {
  if (deep_net) {
    Vec in(s.size() + a.size());
    in << s, a;
    return deep_net->forward(in);
  }
  return predict_mean(s, a);
}

Vec flatten_params(const ReluNetwork& net) {
  int total = 0;
  for (int l = 0; l < net.num_layers(); ++l)
    total += static_cast<int>(net.weight(l).size() + net.bias(l).size());
  Vec out(total);
  int at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Mat& w = net.weight(l);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) out[at++] = w(i, j);
    for (int i = 0; i < net.bias(l).size(); ++i) out[at++] = net.bias(l)[i];
  }
  return out;
}

void set_params(ReluNetwork& net, const Vec& params) {
  int at = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    Mat& w = net.weight(l);
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = params[at++];
    for (int i = 0; i < net.bias(l).size(); ++i) net.bias(l)[i] = params[at++];
  }
  if (at != params.size()) throw DimensionError("set_params: parameter count mismatch");
}

namespace {
Vec flatten_grads(const GradientBuffer& g) {
  int total = 0;
  for (std::size_t l = 0; l < g.dw.size(); ++l)
    total += static_cast<int>(g.dw[l].size() + g.db[l].size());
  Vec out(total);
  int at = 0;
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    const Mat& w = g.dw[l];
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) out[at++] = w(i, j);
    for (int i = 0; i < g.db[l].size(); ++i) out[at++] = g.db[l][i];
  }
  return out;
}
}  // namespace

double mean_loss(const ReluNetwork& net, const TransitionDataset& data) {
  MeanProblem prob(const_cast<ReluNetwork*>(&net));
  return dataset_loss(prob, data, 0, data.size());
}

Vec mean_loss_gradient(const ReluNetwork& net, const TransitionDataset& data) {
  MeanProblem prob(const_cast<ReluNetwork*>(&net));
  std::vector<GradientBuffer> grads;
  grads.emplace_back(net);
  double w = 1.0 / static_cast<double>(data.size());
  for (const Transition& t : data) prob.sample_loss(t, w, &grads);
  return flatten_grads(grads[0]);
}

double cov_loss(const ReluNetwork& cov_net, const ReluNetwork& mean_net,
                const TransitionDataset& data) {
  CovProblem prob(const_cast<ReluNetwork*>(&cov_net), &mean_net);
  return dataset_loss(prob, data, 0, data.size());
}

Vec cov_loss_gradient(const ReluNetwork& cov_net, const ReluNetwork& mean_net,
                      const TransitionDataset& data) {
  CovProblem prob(const_cast<ReluNetwork*>(&cov_net), &mean_net);
  std::vector<GradientBuffer> grads;
  grads.emplace_back(cov_net);
  double w = 1.0 / static_cast<double>(data.size());
  for (const Transition& t : data) prob.sample_loss(t, w, &grads);
  return flatten_grads(grads[0]);
}

double joint_loss(const ReluNetwork& embedder, const ReluNetwork& mean_net,
                  const TransitionDataset& data) {
  JointProblem prob(const_cast<ReluNetwork*>(&embedder), const_cast<ReluNetwork*>(&mean_net));
  return dataset_loss(prob, data, 0, data.size());
}

Vec joint_loss_gradient(const ReluNetwork& embedder, const ReluNetwork& mean_net,
                        const TransitionDataset& data) {
  JointProblem prob(const_cast<ReluNetwork*>(&embedder), const_cast<ReluNetwork*>(&mean_net));
  std::vector<GradientBuffer> grads;
  grads.emplace_back(embedder);
  grads.emplace_back(mean_net);
  double w = 1.0 / static_cast<double>(data.size());
  for (const Transition& t : data) prob.sample_loss(t, w, &grads);
  Vec ge = flatten_grads(grads[0]);
  Vec gm = flatten_grads(grads[1]);
  Vec out(ge.size() + gm.size());
  out << ge, gm;
  return out;
}

}  // namespace shiftguard
