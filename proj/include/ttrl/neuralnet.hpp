#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ttrl/types.hpp"

namespace ttrl::nn {

enum class Activation { Tanh, Relu, Linear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Small dense feed-forward network. weights[l] maps layer l to layer l+1
/// (rows = fan_out, cols = fan_in); activations[l] is applied after the
/// affine map of layer l. All parameters are 64-bit.
struct MlpNet {
  std::vector<MatX> weights;
  std::vector<VecX> biases;
  std::vector<Activation> activations;

  int input_size() const { return static_cast<int>(weights.front().cols()); }
  int output_size() const { return static_cast<int>(weights.back().rows()); }
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  /// Xavier-uniform weights (|w| <= sqrt(6 / (fan_in + fan_out))), zero biases.
  static MlpNet xavier(const std::vector<int>& sizes, const std::vector<Activation>& acts,
                       Rng& rng);
};

/// Activation cache of one forward pass, batch in columns.
struct Tape {
  MatX input;             // d0 x B
  std::vector<MatX> pre;  // pre-activations per layer
  std::vector<MatX> post; // post-activations per layer; post.back() is the output
};

/// Parameter-shaped gradient accumulator.
struct GradBuffer {
  std::vector<MatX> weights;
  std::vector<VecX> biases;

  static GradBuffer zeros_like(const MlpNet& net);
  void set_zero();
};

/// Forward pass on a batch (columns are samples; a single vector is a
/// one-column batch). Fills `tape` when given; the tape is required for
/// backward().
MatX forward(const MlpNet& net, const MatX& input, Tape* tape = nullptr);

/// Reverse-mode gradients from `output_grad` (same shape as the output).
/// Returns the gradient w.r.t. the input; parameter gradients, summed over
/// the batch, are accumulated into `grads` when non-null.
MatX backward(const MlpNet& net, const Tape& tape, const MatX& output_grad,
              GradBuffer* grads = nullptr);

struct AdamState {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  long step_count = 0;
  std::vector<MatX> m_weights, v_weights;
  std::vector<VecX> m_biases, v_biases;

  static AdamState for_net(const MlpNet& net, Scalar learning_rate, Scalar beta1 = 0.9,
                           Scalar beta2 = 0.999, Scalar epsilon = 1e-8);
};

/// Standard Adam update in place; increments the step count.
void adam_step(MlpNet& net, const GradBuffer& grads, AdamState& state);

/// Compares backward() against central finite differences on random probes
/// (parameters and inputs) and returns the worst relative error, with
/// |a - b| / max(|a|, |b|, 1e-3) as the metric. Probes whose ReLU
/// pre-activations sit within the finite-difference window of the kink are
/// redrawn, since the difference quotient is meaningless there.
Scalar gradient_check(const MlpNet& net, int probes, Rng& rng);

/// Checkpoint: magic + JSON header (sizes, activations) + little-endian
/// float64 parameter blob. Round-trips bit-exactly.
void save_checkpoint(const MlpNet& net, const std::string& path);
MlpNet load_checkpoint(const std::string& path);

}  // namespace ttrl::nn
