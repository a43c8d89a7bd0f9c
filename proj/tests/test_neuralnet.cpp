#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ttrl/neuralnet.hpp"
#include "ttrl/random.hpp"

using namespace ttrl;
using namespace ttrl::nn;

namespace {

MlpNet tiny_linear(Scalar w, Scalar b) {
  MlpNet net;
  net.weights.push_back(MatX::Constant(1, 1, w));
  net.biases.push_back(VecX::Constant(1, b));
  net.activations.push_back(Activation::Linear);
  return net;
}

}  // namespace

TEST_CASE("forward: zero net maps everything to zero") {
  MlpNet net;
  net.weights = {MatX::Zero(4, 3), MatX::Zero(2, 4)};
  net.biases = {VecX::Zero(4), VecX::Zero(2)};
  net.activations = {Activation::Linear, Activation::Linear};
  const VecX out = forward(net, VecX::Constant(3, 1.5));
  CHECK(out.size() == 2);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: scalar affine by hand") {
  const MlpNet net = tiny_linear(2.0, 1.0);
  const VecX out = forward(net, VecX::Constant(1, 3.0));
  CHECK(out(0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("forward: random 9-64-64-3 net has finite 3-D output") {
  Rng rng = make_rng(1, 0);
  const MlpNet net = MlpNet::xavier({9, 64, 64, 3},
                                    {Activation::Relu, Activation::Relu, Activation::Linear}, rng);
  VecX in(9);
  for (int i = 0; i < 9; ++i) in(i) = uniform(rng, -1, 1);
  const VecX out = forward(net, in);
  CHECK(out.size() == 3);
  CHECK(out.allFinite());
}

TEST_CASE("forward: rejects mismatched input size") {
  const MlpNet net = tiny_linear(2.0, 1.0);
  CHECK_THROWS_AS((void)forward(net, VecX::Zero(4)), std::invalid_argument);
}

TEST_CASE("forward: batched equals per-column") {
  Rng rng = make_rng(5, 0);
  const MlpNet net = MlpNet::xavier({4, 8, 2},
                                    {Activation::Tanh, Activation::Linear}, rng);
  MatX batch(4, 7);
  for (int i = 0; i < batch.size(); ++i) batch.data()[i] = uniform(rng, -2, 2);
  const MatX out = forward(net, batch);
  for (int c = 0; c < batch.cols(); ++c) {
    const VecX single = forward(net, MatX(batch.col(c)));
    CHECK((out.col(c) - single).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("backward: scalar chain rule") {
  const MlpNet net = tiny_linear(2.0, 1.0);
  Tape tape;
  forward(net, VecX::Constant(1, 3.0), &tape);
  const MatX input_grad = backward(net, tape, MatX::Constant(1, 1, 1.0));
  CHECK(input_grad(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("backward: tanh derivative at zero is one") {
  MlpNet net = tiny_linear(1.0, 0.0);
  net.activations[0] = Activation::Tanh;
  Tape tape;
  forward(net, VecX::Zero(1), &tape);
  const MatX input_grad = backward(net, tape, MatX::Constant(1, 1, 1.0));
  CHECK(input_grad(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("backward: rejects a tape from another network") {
  Rng rng = make_rng(2, 0);
  const MlpNet a = MlpNet::xavier({3, 5, 2}, {Activation::Relu, Activation::Linear}, rng);
  const MlpNet b = MlpNet::xavier({3, 4, 4, 2},
                                  {Activation::Relu, Activation::Relu, Activation::Linear}, rng);
  Tape tape;
  forward(a, VecX::Zero(3), &tape);
  CHECK_THROWS_AS((void)backward(b, tape, MatX::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("gradient_check: backprop matches finite differences on all layer types") {
  Rng rng = make_rng(9, 0);
  const std::vector<std::vector<Activation>> stacks = {
      {Activation::Tanh, Activation::Linear},
      {Activation::Relu, Activation::Linear},
      {Activation::Relu, Activation::Tanh},
  };
  for (const auto& acts : stacks) {
    const MlpNet net = MlpNet::xavier({6, 16, 3}, acts, rng);
    CHECK(gradient_check(net, 7, rng) <= 1e-6);
  }
}

TEST_CASE("adam_step: zero gradient leaves parameters untouched") {
  Rng rng = make_rng(4, 0);
  MlpNet net = MlpNet::xavier({3, 5, 2}, {Activation::Relu, Activation::Linear}, rng);
  const MlpNet before = net;
  AdamState opt = AdamState::for_net(net, 1e-2);
  const GradBuffer zeros = GradBuffer::zeros_like(net);
  for (int i = 0; i < 5; ++i) adam_step(net, zeros, opt);
  CHECK(opt.step_count == 5);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK((net.weights[l] - before.weights[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((net.biases[l] - before.biases[l]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("adam_step: constant gradient approaches the signed asymptotic step") {
  // Scalar oracle: with a constant gradient g, the bias-corrected moments
  // converge to g and g^2, so each update tends to -lr * sign(g).
  MlpNet net = tiny_linear(0.0, 0.0);
  AdamState opt = AdamState::for_net(net, 1e-2);
  GradBuffer grads = GradBuffer::zeros_like(net);
  grads.weights[0](0, 0) = 0.5;

  Scalar prev = net.weights[0](0, 0);
  Scalar last_delta = 0.0;
  for (int i = 0; i < 500; ++i) {
    adam_step(net, grads, opt);
    last_delta = net.weights[0](0, 0) - prev;
    prev = net.weights[0](0, 0);
  }
  CHECK(last_delta == doctest::Approx(-1e-2).epsilon(1e-3));
  CHECK(net.weights[0](0, 0) < 0.0);
}

TEST_CASE("adam_step: identical nets and gradients stay identical") {
  Rng rng = make_rng(6, 0);
  MlpNet a = MlpNet::xavier({4, 8, 2}, {Activation::Tanh, Activation::Linear}, rng);
  MlpNet b = a;
  AdamState opt_a = AdamState::for_net(a, 3e-3);
  AdamState opt_b = AdamState::for_net(b, 3e-3);
  Rng grad_rng = make_rng(7, 0);
  for (int step = 0; step < 20; ++step) {
    GradBuffer g = GradBuffer::zeros_like(a);
    for (auto& w : g.weights) {
      for (int i = 0; i < w.size(); ++i) w.data()[i] = uniform(grad_rng, -1, 1);
    }
    GradBuffer g2 = g;
    adam_step(a, g, opt_a);
    adam_step(b, g2, opt_b);
  }
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("xavier: every weight within the fan bound, biases zero") {
  Rng rng = make_rng(8, 0);
  const std::vector<int> sizes = {9, 64, 64, 3};
  const MlpNet net = MlpNet::xavier(sizes,
                                    {Activation::Relu, Activation::Relu, Activation::Linear},
                                    rng);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Scalar limit = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
    CHECK(net.weights[l].cwiseAbs().maxCoeff() <= limit);
    CHECK(net.biases[l].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("checkpoint: bit-exact round trip") {
  Rng rng = make_rng(10, 0);
  const MlpNet net = MlpNet::xavier({12, 64, 64, 3},
                                    {Activation::Relu, Activation::Relu, Activation::Linear},
                                    rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ttrl_test_net.ckpt").string();
  save_checkpoint(net, path);
  const MlpNet loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  REQUIRE(loaded.layer_sizes() == net.layer_sizes());
  REQUIRE(loaded.activations == net.activations);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(std::memcmp(loaded.weights[l].data(), net.weights[l].data(),
                      sizeof(Scalar) * static_cast<std::size_t>(net.weights[l].size())) == 0);
    CHECK(std::memcmp(loaded.biases[l].data(), net.biases[l].data(),
                      sizeof(Scalar) * static_cast<std::size_t>(net.biases[l].size())) == 0);
  }
}

TEST_CASE("checkpoint: corrupt file is rejected") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ttrl_test_bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS((void)load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}
