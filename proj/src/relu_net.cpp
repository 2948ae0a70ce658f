#include "shiftguard/relu_net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shiftguard/errors.hpp"

namespace shiftguard {

namespace {
constexpr int kFormatVersion = 1;

double apply_act(Activation a, double v) {
  return a == Activation::relu ? std::max(0.0, v) : std::tanh(v);
}

double act_derivative(Activation a, double v) {
  if (a == Activation::relu) return v > 0.0 ? 1.0 : 0.0;
  double t = std::tanh(v);
  return 1.0 - t * t;
}
}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ParseError("unknown activation: " + s);
}

ReluNetwork::ReluNetwork(std::vector<int> layer_dims, Activation hidden_activation)
    : dims_(std::move(layer_dims)), act_(hidden_activation) {
  if (dims_.size() < 2) throw DimensionError("ReluNetwork: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw DimensionError("ReluNetwork: layer dims must be positive");
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    weights_.push_back(Mat::Zero(dims_[i + 1], dims_[i]));
    biases_.push_back(Vec::Zero(dims_[i + 1]));
  }
}

ReluNetwork ReluNetwork::random(const std::vector<int>& layer_dims, Activation act, Rng& rng) {
  ReluNetwork net(layer_dims, act);
  for (int l = 0; l < net.num_layers(); ++l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(net.dims_[l]));
    for (int i = 0; i < net.weights_[l].rows(); ++i)
      for (int j = 0; j < net.weights_[l].cols(); ++j) net.weights_[l](i, j) = scale * rng.normal();
    for (int i = 0; i < net.biases_[l].size(); ++i) net.biases_[l][i] = 0.1 * scale * rng.normal();
  }
  return net;
}

int ReluNetwork::hidden_neuron_count() const {
  int total = 0;
  for (std::size_t i = 1; i + 1 < dims_.size(); ++i) total += dims_[i];
  return total;
}

Vec ReluNetwork::forward(const Vec& input) const {
  Capture unused;
  return forward(input, unused);
}

Vec ReluNetwork::forward(const Vec& input, Capture& capture) const {
  if (input.size() != dims_.front())
    throw DimensionError("ReluNetwork::forward: input dimension mismatch");
  capture.pre.clear();
  capture.post.clear();
  Vec z = input;
  for (int l = 0; l < num_layers() - 1; ++l) {
    Vec v = weights_[l] * z + biases_[l];
    capture.pre.push_back(v);
    z = v.unaryExpr([this](double x) { return apply_act(act_, x); });
    capture.post.push_back(z);
  }
  return weights_.back() * z + biases_.back();
}

Mat ReluNetwork::input_jacobian(const Vec& input) const {
  if (input.size() != dims_.front())
    throw DimensionError("ReluNetwork::input_jacobian: input dimension mismatch");
  Mat jac = Mat::Identity(dims_.front(), dims_.front());
  Vec z = input;
  for (int l = 0; l < num_layers() - 1; ++l) {
    Vec v = weights_[l] * z + biases_[l];
    Vec d = v.unaryExpr([this](double x) { return act_derivative(act_, x); });
    jac = d.asDiagonal() * (weights_[l] * jac);
    z = v.unaryExpr([this](double x) { return apply_act(act_, x); });
  }
  return weights_.back() * jac;
}

Vec ReluNetwork::Capture::stacked_pre() const {
  int total = 0;
  for (const Vec& v : pre) total += static_cast<int>(v.size());
  Vec out(total);
  int at = 0;
  for (const Vec& v : pre) {
    out.segment(at, v.size()) = v;
    at += static_cast<int>(v.size());
  }
  return out;
}

Vec ReluNetwork::Capture::stacked_post() const {
  int total = 0;
  for (const Vec& v : post) total += static_cast<int>(v.size());
  Vec out(total);
  int at = 0;
  for (const Vec& v : post) {
    out.segment(at, v.size()) = v;
    at += static_cast<int>(v.size());
  }
  return out;
}

bool ReluNetwork::operator==(const ReluNetwork& other) const {
  if (dims_ != other.dims_ || act_ != other.act_) return false;
  for (int l = 0; l < num_layers(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

std::string network_to_json(const ReluNetwork& net) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["layer_dims"] = net.layer_dims();
  j["hidden_activation"] = to_string(net.hidden_activation());
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    const Mat& w = net.weight(l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (int i = 0; i < w.rows(); ++i)
      for (int k = 0; k < w.cols(); ++k) row_major.push_back(w(i, k));
    weights.push_back(row_major);
    biases.push_back(std::vector<double>(net.bias(l).data(), net.bias(l).data() + net.bias(l).size()));
  }
  j["weights"] = weights;
  j["biases"] = biases;
  return j.dump(2);
}

ReluNetwork network_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model parse error: ") + e.what());
  }
  try {
    if (!j.contains("format_version")) throw ParseError("model file missing format_version");
    int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw VersionError("unsupported model format_version " + std::to_string(version) +
                         " (expected " + std::to_string(kFormatVersion) + ")");
    std::vector<int> dims = j.at("layer_dims").get<std::vector<int>>();
    Activation act = activation_from_string(j.at("hidden_activation").get<std::string>());
    ReluNetwork net(dims, act);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (static_cast<int>(weights.size()) != net.num_layers() ||
        static_cast<int>(biases.size()) != net.num_layers())
      throw ParseError("model layer count does not match layer_dims");
    for (int l = 0; l < net.num_layers(); ++l) {
      std::vector<double> row_major = weights.at(l).get<std::vector<double>>();
      Mat& w = net.weight(l);
      if (static_cast<int>(row_major.size()) != w.size())
        throw ParseError("weight size mismatch in layer " + std::to_string(l));
      int at = 0;
      for (int i = 0; i < w.rows(); ++i)
        for (int k = 0; k < w.cols(); ++k) w(i, k) = row_major[at++];
      std::vector<double> b = biases.at(l).get<std::vector<double>>();
      if (static_cast<int>(b.size()) != net.bias(l).size())
        throw ParseError("bias size mismatch in layer " + std::to_string(l));
      net.bias(l) = Eigen::Map<const Vec>(b.data(), static_cast<int>(b.size()));
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model parse error: ") + e.what());
  }
}

void save_network(const ReluNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << network_to_json(net) << "\n";
}

ReluNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return network_from_json(ss.str());
}

}  // namespace shiftguard
