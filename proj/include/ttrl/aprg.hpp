#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "ttrl/env.hpp"
#include "ttrl/neuralnet.hpp"
#include "ttrl/types.hpp"

namespace ttrl::aprg {

/// Algorithm variants: the full method (parametrized-reward critic plus
/// gradient post-optimization of actions), the same without
/// post-optimization, and a scalar-reward critic ablation.
enum class Mode { Aprg, Prg, ScalarCritic };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

/// One stored episode of the one-step MDP.
struct EpisodeRecord {
  Vec9 observed_state = Vec9::Zero();  // raw units
  env::Goal goal;
  env::Action action;
  env::RewardParams reward_params;
  Scalar reward = 0.0;
};

/// Unbounded insertion-ordered store with uniform sampling (with
/// replacement).
class ReplayBuffer {
 public:
  void add(EpisodeRecord record) { records_.push_back(std::move(record)); }
  int size() const { return static_cast<int>(records_.size()); }
  const EpisodeRecord& operator[](int i) const { return records_[static_cast<std::size_t>(i)]; }
  std::vector<int> sample_indices(Rng& rng, int count) const;

 private:
  std::vector<EpisodeRecord> records_;
};

struct AprgConfig {
  int warmup_episodes = 30;
  int total_episodes = 200;
  int steps_per_episode = 32;  // training iterations per episode
  int minibatch = 64;

  env::Action base_action{10.0, 0.0, 1.0};    // pretested warm-up action
  Vec3 warmup_noise_std{6.0, 6.0, 0.4};       // [deg, deg, m/s]
  Vec3 explore_noise_std{1.0, 1.0, 0.05};     // [deg, deg, m/s]
  Scalar explore_noise_decay = 0.99;          // per episode past warm-up

  int post_opt_steps = 2;       // gradient-ascent steps on the action
  Scalar post_opt_step = 0.05;  // step size in normalized action units

  Mode mode = Mode::Aprg;

  Scalar critic_lr = 1e-3;
  Scalar actor_lr = 1e-4;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  std::vector<int> hidden_sizes{64, 64};
};

/// Actor, critic and their optimizers. The critic maps the normalized
/// (state, action) pair to the reward parameters (or to the scalar reward
/// in ScalarCritic mode); the actor maps the normalized (state, goal) pair
/// to a normalized action through a tanh head.
struct Agent {
  nn::MlpNet actor;
  nn::MlpNet critic;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
  Mode mode = Mode::Aprg;

  static Agent init(const AprgConfig& config, Rng& init_rng);

  /// Deterministic policy output (no exploration noise).
  env::Action act(const Vec9& observed_state, const env::Goal& goal,
                  const env::EnvConfig& env_config) const;
};

/// Reward recomputed from a critic prediction, with its gradient w.r.t.
/// the prediction. Matches env::reward_from_params on 3-D predictions; in
/// ScalarCritic mode the prediction is the reward itself.
Scalar reward_from_prediction(const VecX& prediction, const env::Goal& goal,
                              Scalar height_weight, Mode mode, VecX* grad = nullptr);

/// Deterministic actor output for a raw observed state and goal.
env::Action policy_action(const nn::MlpNet& actor, const Vec9& observed_state,
                          const env::Goal& goal, const env::EnvConfig& env_config);

/// Warm-up: base action plus large Gaussian noise. Afterwards: actor output
/// plus decaying Gaussian noise. Always inside the action box.
env::Action select_action(const Agent& agent, const Vec9& observed_state, const env::Goal& goal,
                          int episode_index, const AprgConfig& config,
                          const env::EnvConfig& env_config, Rng& rng);

/// Objective for box-constrained ascent: value and gradient at a point of
/// [-1, 1]^n.
using BoxObjective = std::function<Scalar(const VecX& point, VecX* grad)>;

/// Projected gradient ascent on [-1, 1]^n with backtracking halving; the
/// returned point never scores below the start.
VecX ascend_box(const BoxObjective& objective, const VecX& start, int steps, Scalar step_size);

/// Gradient ascent of the critic-estimated reward over the action, through
/// the composed reward function. No-op when steps == 0.
env::Action post_optimize_action(const Agent& agent, const Vec9& observed_state,
                                 const env::Action& action, const env::Goal& goal,
                                 const AprgConfig& config, const env::EnvConfig& env_config);

/// One optimizer step on the mean squared error between critic predictions
/// and stored targets. Returns the batch loss.
Scalar train_critic_batch(Agent& agent, const ReplayBuffer& buffer, const std::vector<int>& batch,
                          const env::EnvConfig& env_config);

/// Mean critic-estimated reward of the actor's actions on a batch; when
/// `grads` is non-null, its gradient w.r.t. the actor parameters (the full
/// actor -> critic -> reward composition) is accumulated there. The critic
/// is read-only.
Scalar actor_objective(const Agent& agent, const ReplayBuffer& buffer,
                       const std::vector<int>& batch, const env::EnvConfig& env_config,
                       nn::GradBuffer* grads = nullptr);

/// One ascent step on the mean critic-estimated reward of the actor's
/// actions; gradients flow through the frozen critic into the actor only.
/// Returns the mean estimated reward.
Scalar train_actor_batch(Agent& agent, const ReplayBuffer& buffer, const std::vector<int>& batch,
                         const env::EnvConfig& env_config);

struct EpisodeLogEntry {
  int episode = 0;
  Vec9 observed_state = Vec9::Zero();
  env::Goal goal;
  env::Action action;
  env::RewardParams reward_params;
  Scalar reward = 0.0;
  Scalar goal_error = 0.0;  // |g_d - g_a|_2 [m]
  physics::EventKind terminal_event = physics::EventKind::Timeout;
};

struct TrainResult {
  Agent agent;
  std::vector<EpisodeLogEntry> log;
  ReplayBuffer buffer;
};

/// The full training loop: one serve/observe/act/step/store cycle per
/// episode, then steps_per_episode critic+actor updates on shared
/// minibatches once the warm-up is over. Fully determined by the seed.
TrainResult run_training(const env::EnvConfig& env_config, const std::vector<env::Goal>& goals,
                         const AprgConfig& config, std::uint64_t seed);

}  // namespace ttrl::aprg
