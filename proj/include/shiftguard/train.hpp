#pragma once

#include <optional>
#include <vector>

#include "shiftguard/linalg.hpp"
#include "shiftguard/relu_net.hpp"

namespace shiftguard {

struct Transition {
  Vec s;
  Vec a;
  Vec sp;
};
using TransitionDataset = std::vector<Transition>;

enum class Optimizer { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 200;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double validation_fraction = 0.1;

  void validate() const;
};

struct EpochStats {
  int epoch;
  double train_loss;
  double val_loss;
};
using TrainingHistory = std::vector<EpochStats>;

// Mean surrogate: minimizes the empirical mean of ||net(s,a) - s'||^2.
ReluNetwork train_mean(const TransitionDataset& data, const std::vector<int>& dims,
                       const TrainConfig& cfg, TrainingHistory* history = nullptr);

// Diagonal covariance surrogate: the network predicts per-coordinate
// log-variances; loss is the MSE between exp(outputs) and the squared
// residuals of mean_net.
ReluNetwork train_cov(const TransitionDataset& data, const ReluNetwork& mean_net,
                      const std::vector<int>& dims, const TrainConfig& cfg,
                      TrainingHistory* history = nullptr);

// Joint training of a state embedder (tanh) feeding a shallow ReLU mean net:
// minimizes ||mean_net(embedder(s), a) - s'||^2 through both networks.
std::pair<ReluNetwork, ReluNetwork> train_joint_embedded(const TransitionDataset& data,
                                                         const std::vector<int>& dims_embedder,
                                                         const std::vector<int>& dims_mean,
                                                         const TrainConfig& cfg,
                                                         TrainingHistory* history = nullptr);

// The trained surrogate bundle for one deployment environment.
struct SurrogatePair {
  ReluNetwork mean_net;                 // used in the convex programs (ReLU)
  ReluNetwork cov_net;                  // diagonal log-variance head
  std::optional<ReluNetwork> embedder;  // tanh state embedder, when configured
  std::optional<ReluNetwork> deep_net;  // deep comparison surrogate, when configured

  int state_dim() const { return cov_net.output_dim(); }

  Vec embed(const Vec& s) const { return embedder ? embedder->forward(s) : s; }

  // Mean prediction from the raw state (embeds first when an embedder exists).
  Vec predict_mean(const Vec& s, const Vec& a) const;

  // Per-coordinate variances exp(cov_net(s,a)) from the raw state.
  Vec predict_variances(const Vec& s, const Vec& a) const;

  // Prediction through the comparison surrogate (deep_net if trained).
  Vec predict_comparison(const Vec& s, const Vec& a) const;
};

// --- loss/gradient surface for finite-difference verification ---

Vec flatten_params(const ReluNetwork& net);
void set_params(ReluNetwork& net, const Vec& params);

double mean_loss(const ReluNetwork& net, const TransitionDataset& data);
Vec mean_loss_gradient(const ReluNetwork& net, const TransitionDataset& data);

double cov_loss(const ReluNetwork& cov_net, const ReluNetwork& mean_net,
                const TransitionDataset& data);
Vec cov_loss_gradient(const ReluNetwork& cov_net, const ReluNetwork& mean_net,
                      const TransitionDataset& data);

double joint_loss(const ReluNetwork& embedder, const ReluNetwork& mean_net,
                  const TransitionDataset& data);
// Gradient ordered [embedder params; mean params].
Vec joint_loss_gradient(const ReluNetwork& embedder, const ReluNetwork& mean_net,
                        const TransitionDataset& data);

}  // namespace shiftguard
