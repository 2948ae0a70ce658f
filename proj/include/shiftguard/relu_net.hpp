#pragma once

#include <string>
#include <vector>

#include "shiftguard/linalg.hpp"
#include "shiftguard/rng.hpp"

namespace shiftguard {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Layered affine map with ReLU or tanh hidden activations and an affine output.
// layer_dims [5,8,4] means input 5, one hidden layer of 8, output 4.
class ReluNetwork {
 public:
  ReluNetwork() = default;
  ReluNetwork(std::vector<int> layer_dims, Activation hidden_activation);

  static ReluNetwork random(const std::vector<int>& layer_dims, Activation act, Rng& rng);

  const std::vector<int>& layer_dims() const { return dims_; }
  Activation hidden_activation() const { return act_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }  // affine layers
  int num_hidden_layers() const { return num_layers() - 1; }
  int hidden_neuron_count() const;

  const Mat& weight(int layer) const { return weights_[layer]; }
  const Vec& bias(int layer) const { return biases_[layer]; }
  Mat& weight(int layer) { return weights_[layer]; }
  Vec& bias(int layer) { return biases_[layer]; }

  Vec forward(const Vec& input) const;

  // Per-hidden-layer pre-activations v and post-activations z, layer-major.
  struct Capture {
    std::vector<Vec> pre;   // v_i
    std::vector<Vec> post;  // z_i
    Vec stacked_pre() const;
    Vec stacked_post() const;
  };
  Vec forward(const Vec& input, Capture& capture) const;

  // d output / d input at `input` (chain rule through the activations).
  Mat input_jacobian(const Vec& input) const;

  bool operator==(const ReluNetwork& other) const;

 private:
  std::vector<int> dims_;
  Activation act_ = Activation::relu;
  std::vector<Mat> weights_;  // weights_[i]: dims_[i+1] x dims_[i]
  std::vector<Vec> biases_;
};

// Versioned JSON model format (format_version, layer_dims, hidden_activation,
// row-major weights, biases). load(save(x)) == x bit-exact.
void save_network(const ReluNetwork& net, const std::string& path);
ReluNetwork load_network(const std::string& path);

std::string network_to_json(const ReluNetwork& net);
ReluNetwork network_from_json(const std::string& text);

}  // namespace shiftguard
