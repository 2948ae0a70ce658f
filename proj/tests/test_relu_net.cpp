#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "shiftguard/errors.hpp"
#include "shiftguard/relu_net.hpp"

using namespace shiftguard;

TEST_CASE("affine identity layer") {
  ReluNetwork net({3, 3}, Activation::relu);
  net.weight(0) = Mat::Identity(3, 3);
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  CHECK((net.forward(x) - x).norm() == 0.0);
}

TEST_CASE("single relu neuron kills negatives") {
  ReluNetwork net({1, 1, 1}, Activation::relu);
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  Vec x(1);
  x << -2.0;
  CHECK(net.forward(x)[0] == 0.0);
  x << 3.0;
  CHECK(net.forward(x)[0] == 3.0);
}

TEST_CASE("5-8-4 network produces a 4-vector") {
  Rng rng(3);
  ReluNetwork net = ReluNetwork::random({5, 8, 4}, Activation::relu, rng);
  Vec x = Vec::Ones(5);
  CHECK(net.forward(x).size() == 4);
  CHECK_THROWS_AS(net.forward(Vec::Ones(4)), DimensionError);
}

TEST_CASE("capture satisfies z = max(0, v) on every relu layer") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    ReluNetwork net = ReluNetwork::random({4, 6, 5, 3}, Activation::relu, rng);
    Vec x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    ReluNetwork::Capture cap;
    net.forward(x, cap);
    REQUIRE(cap.pre.size() == 2);
    for (std::size_t l = 0; l < cap.pre.size(); ++l)
      for (int i = 0; i < cap.pre[l].size(); ++i)
        CHECK(cap.post[l][i] == std::max(0.0, cap.pre[l][i]));
  }
}

TEST_CASE("input jacobian matches finite differences") {
  Rng rng(23);
  ReluNetwork net = ReluNetwork::random({3, 7, 2}, Activation::tanh, rng);
  Vec x(3);
  x << 0.3, -0.2, 0.9;
  Mat jac = net.input_jacobian(x);
  double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec fd = (net.forward(xp) - net.forward(xm)) / (2.0 * h);
    for (int i = 0; i < 2; ++i) CHECK(jac(i, j) == doctest::Approx(fd[i]).epsilon(1e-5));
  }
}

TEST_CASE("json round trip is exact") {
  Rng rng(9);
  ReluNetwork net = ReluNetwork::random({3, 4, 2}, Activation::relu, rng);
  std::string path = "roundtrip_net.json";
  save_network(net, path);
  ReluNetwork loaded = load_network(path);
  CHECK(loaded == net);
  for (int i = 0; i < 100; ++i) {
    Vec x(3);
    for (int k = 0; k < 3; ++k) x[k] = rng.normal();
    Vec a = net.forward(x);
    Vec b = loaded.forward(x);
    CHECK((a - b).norm() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("truncated model file fails to parse") {
  Rng rng(1);
  ReluNetwork net = ReluNetwork::random({2, 3, 1}, Activation::relu, rng);
  std::string text = network_to_json(net);
  CHECK_THROWS_AS(network_from_json(text.substr(0, text.size() / 2)), ParseError);
}

TEST_CASE("unknown format version is rejected explicitly") {
  Rng rng(2);
  ReluNetwork net = ReluNetwork::random({2, 3, 1}, Activation::relu, rng);
  std::string text = network_to_json(net);
  auto pos = text.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("\"format_version\": 1").size(), "\"format_version\": 99");
  CHECK_THROWS_AS(network_from_json(text), VersionError);
}
