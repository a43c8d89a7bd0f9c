#include "ttrl/neuralnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ttrl/random.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

namespace ttrl::nn {

namespace {

void apply_activation(Activation act, MatX& x) {
  switch (act) {
    case Activation::Tanh:
      x = x.array().tanh();
      break;
    case Activation::Relu:
      x = x.cwiseMax(0.0);
      break;
    case Activation::Linear:
      break;
  }
}

/// Derivative from the cached pre/post activations of the layer.
MatX activation_grad(Activation act, const MatX& pre, const MatX& post) {
  switch (act) {
    case Activation::Tanh:
      return 1.0 - post.array().square();
    case Activation::Relu:
      return (pre.array() > 0.0).cast<Scalar>();
    case Activation::Linear:
      return MatX::Ones(pre.rows(), pre.cols());
  }
  return MatX();
}

void check_shapes(const MlpNet& net) {
  if (net.weights.empty() || net.weights.size() != net.biases.size() ||
      net.weights.size() != net.activations.size()) {
    throw std::invalid_argument("MlpNet: inconsistent layer counts");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (net.weights[l].rows() != net.biases[l].size()) {
      throw std::invalid_argument("MlpNet: weight/bias shape mismatch");
    }
    if (l + 1 < net.weights.size() && net.weights[l + 1].cols() != net.weights[l].rows()) {
      throw std::invalid_argument("MlpNet: consecutive layer dimensions incompatible");
    }
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

std::vector<int> MlpNet::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

std::size_t MlpNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

MlpNet MlpNet::xavier(const std::vector<int>& sizes, const std::vector<Activation>& acts,
                      Rng& rng) {
  if (sizes.size() < 2 || acts.size() != sizes.size() - 1) {
    throw std::invalid_argument("MlpNet::xavier: need n layer sizes and n-1 activations");
  }
  MlpNet net;
  net.activations = acts;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const Scalar limit = std::sqrt(6.0 / (fan_in + fan_out));
    MatX w(fan_out, fan_in);
    for (int c = 0; c < fan_in; ++c) {
      for (int r = 0; r < fan_out; ++r) {
        w(r, c) = uniform(rng, -limit, limit);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(VecX::Zero(fan_out));
  }
  check_shapes(net);
  return net;
}

GradBuffer GradBuffer::zeros_like(const MlpNet& net) {
  GradBuffer g;
  for (const auto& w : net.weights) g.weights.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases) g.biases.push_back(VecX::Zero(b.size()));
  return g;
}

void GradBuffer::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

MatX forward(const MlpNet& net, const MatX& input, Tape* tape) {
  check_shapes(net);
  if (input.rows() != net.input_size()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  if (tape) {
    tape->input = input;
    tape->pre.clear();
    tape->post.clear();
  }
  MatX x = input;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    MatX z = (net.weights[l] * x).colwise() + net.biases[l];
    if (tape) tape->pre.push_back(z);
    apply_activation(net.activations[l], z);
    if (tape) tape->post.push_back(z);
    x = std::move(z);
  }
  return x;
}

MatX backward(const MlpNet& net, const Tape& tape, const MatX& output_grad, GradBuffer* grads) {
  const std::size_t layers = net.weights.size();
  if (tape.pre.size() != layers || tape.post.size() != layers) {
    throw std::invalid_argument("backward: tape does not match the network");
  }
  if (output_grad.rows() != net.output_size() || output_grad.cols() != tape.input.cols()) {
    throw std::invalid_argument("backward: output gradient shape mismatch");
  }
  MatX delta = output_grad;
  for (std::size_t li = layers; li-- > 0;) {
    delta = delta.cwiseProduct(activation_grad(net.activations[li], tape.pre[li], tape.post[li]));
    if (grads) {
      const MatX& below = li == 0 ? tape.input : tape.post[li - 1];
      grads->weights[li].noalias() += delta * below.transpose();
      grads->biases[li] += delta.rowwise().sum();
    }
    delta = net.weights[li].transpose() * delta;
  }
  return delta;
}

AdamState AdamState::for_net(const MlpNet& net, Scalar learning_rate, Scalar beta1, Scalar beta2,
                             Scalar epsilon) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  for (const auto& w : net.weights) {
    s.m_weights.push_back(MatX::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(MatX::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    s.m_biases.push_back(VecX::Zero(b.size()));
    s.v_biases.push_back(VecX::Zero(b.size()));
  }
  return s;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, const AdamState& s) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const Scalar bc1 = 1.0 - std::pow(s.beta1, static_cast<Scalar>(s.step_count));
  const Scalar bc2 = 1.0 - std::pow(s.beta2, static_cast<Scalar>(s.step_count));
  param.array() -=
      s.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(MlpNet& net, const GradBuffer& grads, AdamState& state) {
  if (grads.weights.size() != net.weights.size() || grads.biases.size() != net.biases.size()) {
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  }
  ++state.step_count;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l], state);
    adam_update(net.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l], state);
  }
}

namespace {

/// Scalar probe loss c . f(x) used by the finite-difference check.
Scalar probe_loss(const MlpNet& net, const VecX& input, const VecX& cotangent) {
  return cotangent.dot(forward(net, input).col(0));
}

Scalar rel_error(Scalar a, Scalar b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

bool near_relu_kink(const MlpNet& net, const VecX& input, Scalar margin) {
  Tape tape;
  forward(net, input, &tape);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (net.activations[l] != Activation::Relu) continue;
    if (tape.pre[l].array().abs().minCoeff() < margin) return true;
  }
  return false;
}

}  // namespace

Scalar gradient_check(const MlpNet& net, int probes, Rng& rng) {
  constexpr Scalar kStep = 1e-5;
  MlpNet work = net;
  Scalar worst = 0.0;

  for (int p = 0; p < probes; ++p) {
    VecX input(work.input_size());
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (int i = 0; i < input.size(); ++i) input(i) = uniform(rng, -1.0, 1.0);
      if (!near_relu_kink(work, input, 10.0 * kStep)) break;
    }
    VecX cotangent(work.output_size());
    for (int i = 0; i < cotangent.size(); ++i) cotangent(i) = uniform(rng, -1.0, 1.0);

    Tape tape;
    forward(work, input, &tape);
    GradBuffer grads = GradBuffer::zeros_like(work);
    const MatX input_grad = backward(work, tape, MatX(cotangent), &grads);

    for (std::size_t l = 0; l < work.weights.size(); ++l) {
      MatX& w = work.weights[l];
      for (int idx = 0; idx < w.size(); ++idx) {
        const Scalar saved = w.data()[idx];
        const Scalar h = kStep * std::max(1.0, std::abs(saved));
        w.data()[idx] = saved + h;
        const Scalar up = probe_loss(work, input, cotangent);
        w.data()[idx] = saved - h;
        const Scalar down = probe_loss(work, input, cotangent);
        w.data()[idx] = saved;
        worst = std::max(worst, rel_error(grads.weights[l].data()[idx], (up - down) / (2 * h)));
      }
      VecX& b = work.biases[l];
      for (int idx = 0; idx < b.size(); ++idx) {
        const Scalar saved = b(idx);
        const Scalar h = kStep * std::max(1.0, std::abs(saved));
        b(idx) = saved + h;
        const Scalar up = probe_loss(work, input, cotangent);
        b(idx) = saved - h;
        const Scalar down = probe_loss(work, input, cotangent);
        b(idx) = saved;
        worst = std::max(worst, rel_error(grads.biases[l](idx), (up - down) / (2 * h)));
      }
    }

    VecX probe_input = input;
    for (int idx = 0; idx < probe_input.size(); ++idx) {
      const Scalar saved = probe_input(idx);
      const Scalar h = kStep * std::max(1.0, std::abs(saved));
      probe_input(idx) = saved + h;
      const Scalar up = probe_loss(work, probe_input, cotangent);
      probe_input(idx) = saved - h;
      const Scalar down = probe_loss(work, probe_input, cotangent);
      probe_input(idx) = saved;
      worst = std::max(worst, rel_error(input_grad(idx, 0), (up - down) / (2 * h)));
    }
  }
  return worst;
}

namespace {

constexpr char kMagic[8] = {'T', 'T', 'R', 'L', 'N', 'E', 'T', '1'};

}  // namespace

void save_checkpoint(const MlpNet& net, const std::string& path) {
  check_shapes(net);
  nlohmann::json header;
  header["layer_sizes"] = net.layer_sizes();
  std::vector<std::string> acts;
  for (auto a : net.activations) acts.emplace_back(to_string(a));
  header["activations"] = acts;
  header["parameter_count"] = net.parameter_count();
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    out.write(reinterpret_cast<const char*>(net.weights[l].data()),
              static_cast<std::streamsize>(sizeof(Scalar) * net.weights[l].size()));
    out.write(reinterpret_cast<const char*>(net.biases[l].data()),
              static_cast<std::streamsize>(sizeof(Scalar) * net.biases[l].size()));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

MlpNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path);

  const auto header = nlohmann::json::parse(header_text);
  const auto sizes = header.at("layer_sizes").get<std::vector<int>>();
  std::vector<Activation> acts;
  for (const auto& name : header.at("activations")) {
    acts.push_back(activation_from_string(name.get<std::string>()));
  }

  MlpNet net;
  net.activations = acts;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    MatX w(sizes[l + 1], sizes[l]);
    VecX b(sizes[l + 1]);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * w.size()));
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * b.size()));
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated blob in " + path);
  check_shapes(net);
  return net;
}

}  // namespace ttrl::nn
