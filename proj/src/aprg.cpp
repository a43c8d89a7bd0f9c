#include "ttrl/aprg.hpp"

#include <cmath>
#include <stdexcept>

#include "ttrl/random.hpp"

namespace ttrl::aprg {

namespace {

constexpr int kStateDim = 9;
constexpr int kGoalDim = 2;
constexpr int kActionDim = 3;

int critic_output_dim(Mode mode) { return mode == Mode::ScalarCritic ? 1 : 3; }

std::vector<int> with_hidden(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes;
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::vector<nn::Activation> relu_stack(std::size_t hidden_layers, nn::Activation head) {
  std::vector<nn::Activation> acts(hidden_layers, nn::Activation::Relu);
  acts.push_back(head);
  return acts;
}

/// Stacked normalized inputs for a batch of records.
void batch_inputs(const ReplayBuffer& buffer, const std::vector<int>& batch,
                  const env::EnvConfig& env_config, MatX& critic_in, MatX& actor_in,
                  MatX& targets, Mode mode) {
  const int n = static_cast<int>(batch.size());
  critic_in.resize(kStateDim + kActionDim, n);
  actor_in.resize(kStateDim + kGoalDim, n);
  targets.resize(critic_output_dim(mode), n);
  for (int c = 0; c < n; ++c) {
    const EpisodeRecord& rec = buffer[batch[static_cast<std::size_t>(c)]];
    const Vec9 s = env::normalize_state(rec.observed_state, env_config);
    critic_in.col(c).head<kStateDim>() = s;
    critic_in.col(c).tail<kActionDim>() = rec.action.normalized();
    actor_in.col(c).head<kStateDim>() = s;
    actor_in.col(c).tail<kGoalDim>() = env::normalize_goal(rec.goal, env_config);
    if (mode == Mode::ScalarCritic) {
      targets(0, c) = rec.reward;
    } else {
      targets.col(c) = Vec3(rec.reward_params.achieved_x, rec.reward_params.achieved_y,
                            rec.reward_params.height);
    }
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Aprg: return "aprg";
    case Mode::Prg: return "prg";
    case Mode::ScalarCritic: return "scalar";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view name) {
  if (name == "aprg") return Mode::Aprg;
  if (name == "prg") return Mode::Prg;
  if (name == "scalar") return Mode::ScalarCritic;
  throw std::invalid_argument("unknown mode: " + std::string(name));
}

std::vector<int> ReplayBuffer::sample_indices(Rng& rng, int count) const {
  if (records_.empty()) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
  std::vector<int> out(static_cast<std::size_t>(count));
  for (auto& idx : out) {
    idx = static_cast<int>(uniform01(rng) * static_cast<Scalar>(records_.size()));
    idx = std::min(idx, size() - 1);
  }
  return out;
}

Agent Agent::init(const AprgConfig& config, Rng& init_rng) {
  Agent agent;
  agent.mode = config.mode;
  agent.actor = nn::MlpNet::xavier(
      with_hidden(kStateDim + kGoalDim, config.hidden_sizes, kActionDim),
      relu_stack(config.hidden_sizes.size(), nn::Activation::Tanh), init_rng);
  agent.critic = nn::MlpNet::xavier(
      with_hidden(kStateDim + kActionDim, config.hidden_sizes, critic_output_dim(config.mode)),
      relu_stack(config.hidden_sizes.size(), nn::Activation::Linear), init_rng);
  agent.actor_opt = nn::AdamState::for_net(agent.actor, config.actor_lr, config.adam_beta1,
                                           config.adam_beta2);
  agent.critic_opt = nn::AdamState::for_net(agent.critic, config.critic_lr, config.adam_beta1,
                                            config.adam_beta2);
  return agent;
}

env::Action policy_action(const nn::MlpNet& actor, const Vec9& observed_state,
                          const env::Goal& goal, const env::EnvConfig& env_config) {
  VecX in(kStateDim + kGoalDim);
  in.head<kStateDim>() = env::normalize_state(observed_state, env_config);
  in.tail<kGoalDim>() = env::normalize_goal(goal, env_config);
  const VecX out = nn::forward(actor, in);
  return env::Action::from_normalized(out);
}

env::Action Agent::act(const Vec9& observed_state, const env::Goal& goal,
                       const env::EnvConfig& env_config) const {
  return policy_action(actor, observed_state, goal, env_config);
}

Scalar reward_from_prediction(const VecX& prediction, const env::Goal& goal,
                              Scalar height_weight, Mode mode, VecX* grad) {
  if (mode == Mode::ScalarCritic) {
    if (grad) {
      grad->resize(1);
      (*grad)(0) = 1.0;
    }
    return prediction(0);
  }
  const Scalar dx = prediction(0) - goal.x;
  const Scalar dy = prediction(1) - goal.y;
  const Scalar dist = std::hypot(dx, dy);
  if (grad) {
    grad->resize(3);
    if (dist > 1e-9) {
      (*grad)(0) = -dx / dist;
      (*grad)(1) = -dy / dist;
    } else {
      (*grad)(0) = 0.0;
      (*grad)(1) = 0.0;
    }
    (*grad)(2) = -height_weight;
  }
  return -dist - height_weight * prediction(2);
}

env::Action select_action(const Agent& agent, const Vec9& observed_state, const env::Goal& goal,
                          int episode_index, const AprgConfig& config,
                          const env::EnvConfig& env_config, Rng& rng) {
  const Vec3 noise(gaussian(rng), gaussian(rng), gaussian(rng));
  if (episode_index < config.warmup_episodes) {
    const Vec3 std = config.warmup_noise_std;
    return env::Action(config.base_action.alpha_deg + noise.x() * std.x(),
                       config.base_action.beta_deg + noise.y() * std.y(),
                       config.base_action.racket_vx + noise.z() * std.z());
  }
  const Scalar decay =
      std::pow(config.explore_noise_decay, episode_index - config.warmup_episodes);
  const Vec3 std = config.explore_noise_std * decay;
  const env::Action base = agent.act(observed_state, goal, env_config);
  return env::Action(base.alpha_deg + noise.x() * std.x(), base.beta_deg + noise.y() * std.y(),
                     base.racket_vx + noise.z() * std.z());
}

VecX ascend_box(const BoxObjective& objective, const VecX& start, int steps, Scalar step_size) {
  VecX point = start.cwiseMax(-1.0).cwiseMin(1.0);
  VecX grad(point.size());
  for (int k = 0; k < steps; ++k) {
    const Scalar value = objective(point, &grad);
    Scalar step = step_size;
    bool improved = false;
    for (int halving = 0; halving < 12; ++halving) {
      const VecX candidate = (point + step * grad).cwiseMax(-1.0).cwiseMin(1.0);
      if (objective(candidate, nullptr) >= value) {
        point = candidate;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // the critic surface offers no ascent here
  }
  return point;
}

env::Action post_optimize_action(const Agent& agent, const Vec9& observed_state,
                                 const env::Action& action, const env::Goal& goal,
                                 const AprgConfig& config, const env::EnvConfig& env_config) {
  if (config.post_opt_steps == 0) return action;
  const Vec9 s = env::normalize_state(observed_state, env_config);

  const BoxObjective objective = [&](const VecX& a, VecX* grad) -> Scalar {
    VecX in(kStateDim + kActionDim);
    in.head<kStateDim>() = s;
    in.tail<kActionDim>() = a;
    nn::Tape tape;
    const VecX q = nn::forward(agent.critic, in, &tape);
    VecX dq;
    const Scalar value = reward_from_prediction(q, goal, env_config.height_weight, agent.mode,
                                                grad ? &dq : nullptr);
    if (grad) {
      const MatX din = nn::backward(agent.critic, tape, MatX(dq), nullptr);
      *grad = din.col(0).tail<kActionDim>();
    }
    return value;
  };

  const VecX optimized =
      ascend_box(objective, action.normalized(), config.post_opt_steps, config.post_opt_step);
  return env::Action::from_normalized(optimized);
}

Scalar train_critic_batch(Agent& agent, const ReplayBuffer& buffer, const std::vector<int>& batch,
                          const env::EnvConfig& env_config) {
  if (batch.empty()) throw std::invalid_argument("train_critic_batch: empty batch");
  MatX critic_in, actor_in, targets;
  batch_inputs(buffer, batch, env_config, critic_in, actor_in, targets, agent.mode);
  const Scalar n = static_cast<Scalar>(batch.size());

  nn::Tape tape;
  const MatX predictions = nn::forward(agent.critic, critic_in, &tape);
  const MatX diff = predictions - targets;
  nn::GradBuffer grads = nn::GradBuffer::zeros_like(agent.critic);
  nn::backward(agent.critic, tape, (2.0 / n) * diff, &grads);
  nn::adam_step(agent.critic, grads, agent.critic_opt);
  return diff.squaredNorm() / n;
}

Scalar actor_objective(const Agent& agent, const ReplayBuffer& buffer,
                       const std::vector<int>& batch, const env::EnvConfig& env_config,
                       nn::GradBuffer* grads) {
  if (batch.empty()) throw std::invalid_argument("actor_objective: empty batch");
  MatX critic_in, actor_in, targets;
  batch_inputs(buffer, batch, env_config, critic_in, actor_in, targets, agent.mode);
  const int n = static_cast<int>(batch.size());

  nn::Tape actor_tape;
  const MatX actions = nn::forward(agent.actor, actor_in, &actor_tape);

  MatX composed_in(kStateDim + kActionDim, n);
  composed_in.topRows<kStateDim>() = actor_in.topRows<kStateDim>();
  composed_in.bottomRows<kActionDim>() = actions;

  nn::Tape critic_tape;
  const MatX predictions = nn::forward(agent.critic, composed_in, &critic_tape);

  // d(mean reward)/d(prediction), column per sample.
  MatX dpred(predictions.rows(), n);
  Scalar mean_reward = 0.0;
  for (int c = 0; c < n; ++c) {
    const EpisodeRecord& rec = buffer[batch[static_cast<std::size_t>(c)]];
    VecX grad;
    mean_reward += reward_from_prediction(predictions.col(c), rec.goal,
                                          env_config.height_weight, agent.mode,
                                          grads ? &grad : nullptr);
    if (grads) dpred.col(c) = grad / static_cast<Scalar>(n);
  }
  mean_reward /= static_cast<Scalar>(n);

  if (grads) {
    // Input gradients only; the critic stays frozen.
    const MatX dcomposed = nn::backward(agent.critic, critic_tape, dpred, nullptr);
    nn::backward(agent.actor, actor_tape, dcomposed.bottomRows<kActionDim>(), grads);
  }
  return mean_reward;
}

Scalar train_actor_batch(Agent& agent, const ReplayBuffer& buffer, const std::vector<int>& batch,
                         const env::EnvConfig& env_config) {
  nn::GradBuffer ascent = nn::GradBuffer::zeros_like(agent.actor);
  const Scalar mean_reward = actor_objective(agent, buffer, batch, env_config, &ascent);
  for (auto& w : ascent.weights) w = -w;  // Adam minimizes; flip for ascent
  for (auto& b : ascent.biases) b = -b;
  nn::adam_step(agent.actor, ascent, agent.actor_opt);
  return mean_reward;
}

TrainResult run_training(const env::EnvConfig& env_config, const std::vector<env::Goal>& goals,
                         const AprgConfig& config, std::uint64_t seed) {
  if (goals.empty()) throw std::invalid_argument("run_training: need at least one goal");
  if (config.warmup_episodes > config.total_episodes) {
    throw std::invalid_argument("run_training: warmup exceeds total episodes");
  }

  // Separate streams so that structural differences between modes (e.g.
  // critic head width) cannot shift the serve or exploration sequences.
  Rng init_rng = make_rng(seed, 0);
  Rng env_rng = make_rng(seed, 1);
  Rng sample_rng = make_rng(seed, 2);

  TrainResult result;
  result.agent = Agent::init(config, init_rng);
  result.log.reserve(static_cast<std::size_t>(config.total_episodes));

  for (int episode = 0; episode < config.total_episodes; ++episode) {
    const env::Goal goal = goals[static_cast<std::size_t>(episode) % goals.size()];
    const env::BallState serve = env::sample_serve(env_rng, env_config);
    const env::BallState observed = env::observe(serve, env_config, env_rng);
    const Vec9 observed_state = env::state_vector(observed);

    env::Action action = select_action(result.agent, observed_state, goal, episode, config,
                                       env_config, env_rng);
    if (config.mode == Mode::Aprg && episode >= config.warmup_episodes) {
      action = post_optimize_action(result.agent, observed_state, action, goal, config,
                                    env_config);
    }

    const env::Outcome outcome = env::step(serve, action, goal, env_config, env_rng);
    result.buffer.add(EpisodeRecord{observed_state, goal, action, outcome.reward_params,
                                    outcome.reward});

    EpisodeLogEntry entry;
    entry.episode = episode;
    entry.observed_state = observed_state;
    entry.goal = goal;
    entry.action = action;
    entry.reward_params = outcome.reward_params;
    entry.reward = outcome.reward;
    entry.goal_error = std::hypot(goal.x - outcome.reward_params.achieved_x,
                                  goal.y - outcome.reward_params.achieved_y);
    entry.terminal_event = outcome.terminal_event;
    result.log.push_back(entry);

    if (episode >= config.warmup_episodes) {
      for (int s = 0; s < config.steps_per_episode; ++s) {
        const std::vector<int> batch =
            result.buffer.sample_indices(sample_rng, config.minibatch);
        train_critic_batch(result.agent, result.buffer, batch, env_config);
        train_actor_batch(result.agent, result.buffer, batch, env_config);
      }
    }
  }
  return result;
}

}  // namespace ttrl::aprg
