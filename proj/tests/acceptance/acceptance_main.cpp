// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria with long runs share the worker pool, so this
// binary expects to own the machine while it runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ttrl/config_io.hpp"
#include "ttrl/harness.hpp"
#include "ttrl/random.hpp"

using namespace ttrl;

namespace {

namespace fs = std::filesystem;

struct CriterionResult {
  bool pass = false;
  std::string details;
};

using Criterion = std::function<CriterionResult()>;

std::string mm(Scalar meters) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f mm", 1000.0 * meters);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Physics correctness (property-based)
// ---------------------------------------------------------------------------

CriterionResult physics_correctness() {
  std::ostringstream details;
  bool pass = true;

  // RK4 self-convergence order >= 3.9 on 10 random drag+Magnus trajectories.
  {
    physics::PhysicsParams p;
    Rng rng = make_rng(1001, 0);
    Scalar min_order = 1e9;
    for (int trial = 0; trial < 10; ++trial) {
      physics::BallState s;
      s.position = Vec3(uniform(rng, 0.5, 2.0), uniform(rng, -0.5, 0.5), uniform(rng, 0.1, 0.6));
      s.velocity = Vec3(uniform(rng, -6, -2), uniform(rng, -1, 1), uniform(rng, 1, 4));
      s.spin = Vec3(uniform(rng, -40, 40), uniform(rng, -60, 60), uniform(rng, -40, 40));

      const Scalar horizon = 0.4;
      const auto at = [&](int steps) {
        physics::BallState x = s;
        for (int i = 0; i < steps; ++i) x = physics::rk4_step(x, horizon / steps, p);
        return x.position;
      };
      const Vec3 ref = at(4000);
      const Scalar e1 = (at(200) - ref).norm();
      const Scalar e2 = (at(100) - ref).norm();
      const Scalar e4 = (at(50) - ref).norm();
      min_order = std::min({min_order, std::log2(e2 / e1), std::log2(e4 / e2)});
    }
    pass &= min_order >= 3.9;
    details << "RK4 order >= " << min_order;
  }

  // Drag-free flight matches the analytic parabola to 1e-9 m over 1 s.
  {
    physics::PhysicsParams p;
    p.k_drag = 0.0;
    p.k_magnus = 0.0;
    physics::BallState s;
    s.position = Vec3(0.4, -0.1, 0.3);
    s.velocity = Vec3(1.5, 0.4, 3.0);
    physics::BallState x = s;
    for (int i = 0; i < 1000; ++i) x = physics::rk4_step(x, 1e-3, p);
    const Vec3 expected = s.position + s.velocity - Vec3(0, 0, 0.5 * p.gravity);
    const Scalar err = (x.position - expected).norm();
    pass &= err <= 1e-9;
    details << "; parabola err " << err << " m";
  }

  // Racket bounce vs the transform-T oracle on 100 random oblique cases,
  // and T-invariance over 10 aligning rotations each.
  {
    Rng rng = make_rng(1002, 0);
    Scalar worst_formula = 0.0;
    Scalar worst_invariance = 0.0;
    int cases = 0;
    while (cases < 100) {
      physics::RacketPose racket;
      racket.normal = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
      if (racket.normal.norm() < 1e-3) continue;
      racket.normal.normalize();
      racket.velocity = Vec3(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5),
                             uniform(rng, -1.5, 1.5));
      Vec3 vb(uniform(rng, -6, 6), uniform(rng, -6, 6), uniform(rng, -6, 6));
      if ((vb - racket.velocity).dot(racket.normal) >= 0.0) {
        vb -= 2.0 * (vb - racket.velocity).dot(racket.normal) * racket.normal;
      }
      if ((vb - racket.velocity).dot(racket.normal) >= -1e-6) continue;
      ++cases;

      const Vec3 direct = physics::racket_bounce(vb, racket);
      const Eigen::Quaterniond align =
          Eigen::Quaterniond::FromTwoVectors(racket.normal, Vec3::UnitZ());
      Vec3 first_result = Vec3::Zero();
      for (int k = 0; k < 10; ++k) {
        const Eigen::Quaterniond T =
            Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng, 0, 2 * M_PI), Vec3::UnitZ())) *
            align;
        Vec3 tv_b = T * vb;
        const Vec3 tv_r = T * racket.velocity;
        tv_b.z() = 2.0 * tv_r.z() - tv_b.z();
        const Vec3 via_T = T.inverse() * tv_b;
        worst_formula = std::max(worst_formula, (via_T - direct).norm());
        if (k == 0) {
          first_result = via_T;
        } else {
          worst_invariance = std::max(worst_invariance, (via_T - first_result).norm());
        }
      }
    }
    pass &= worst_formula <= 1e-12;
    pass &= worst_invariance <= 1e-9;
    details << "; bounce vs T-oracle " << worst_formula << " m/s, T-invariance "
            << worst_invariance << " m/s";
  }

  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 2. Gradient integrity
// ---------------------------------------------------------------------------

CriterionResult gradient_integrity() {
  std::ostringstream details;
  bool pass = true;

  // Backprop parameter + input gradients on 20 random networks.
  {
    Rng rng = make_rng(2001, 0);
    Scalar worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
      const std::vector<nn::Activation> acts = {nn::Activation::Relu,
                                                probe % 2 == 0 ? nn::Activation::Tanh
                                                               : nn::Activation::Relu,
                                                nn::Activation::Linear};
      const nn::MlpNet net = nn::MlpNet::xavier({7, 12, 10, 3}, acts, rng);
      worst = std::max(worst, nn::gradient_check(net, 1, rng));
    }
    pass &= worst <= 1e-5;
    details << "backprop worst rel err " << worst;
  }

  env::EnvConfig env_cfg;
  aprg::AprgConfig cfg;
  cfg.hidden_sizes = {12, 10};

  const auto make_buffer = [&](Rng& rng, int n) {
    aprg::ReplayBuffer buffer;
    for (int i = 0; i < n; ++i) {
      aprg::EpisodeRecord rec;
      for (int d = 0; d < 9; ++d) rec.observed_state(d) = uniform(rng, -0.4, 0.4);
      rec.observed_state(0) = 0.3;
      rec.goal = env::Goal{uniform(rng, 1.5, 2.5), uniform(rng, -0.3, 0.3)};
      rec.action = env::Action(uniform(rng, -20, 20), uniform(rng, -30, 30), uniform(rng, 0, 2));
      rec.reward_params = env::RewardParams{uniform(rng, 0.5, 2.7), uniform(rng, -0.6, 0.6),
                                            uniform(rng, 0.0, 0.8)};
      rec.reward = env::reward_from_params(rec.reward_params, rec.goal, env_cfg.height_weight);
      buffer.add(rec);
    }
    return buffer;
  };

  // Critic-loss gradient vs finite differences over 20 probes.
  {
    Rng rng = make_rng(2002, 0);
    Scalar worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
      aprg::Agent agent = aprg::Agent::init(cfg, rng);
      const auto buffer = make_buffer(rng, 4);
      const std::vector<int> batch{0, 1, 2, 3};

      MatX critic_in(12, 4), targets(3, 4);
      for (int c = 0; c < 4; ++c) {
        critic_in.col(c).head<9>() = env::normalize_state(buffer[c].observed_state, env_cfg);
        critic_in.col(c).tail<3>() = buffer[c].action.normalized();
        targets.col(c) = Vec3(buffer[c].reward_params.achieved_x,
                              buffer[c].reward_params.achieved_y, buffer[c].reward_params.height);
      }
      nn::Tape tape;
      const MatX pred = nn::forward(agent.critic, critic_in, &tape);
      nn::GradBuffer grads = nn::GradBuffer::zeros_like(agent.critic);
      nn::backward(agent.critic, tape, MatX((2.0 / 4) * (pred - targets)), &grads);

      const auto loss_at = [&] {
        return (nn::forward(agent.critic, critic_in) - targets).squaredNorm() / 4.0;
      };
      for (std::size_t l = 0; l < agent.critic.weights.size(); ++l) {
        MatX& w = agent.critic.weights[l];
        for (int i = 0; i < w.size(); i += 7) {  // stride keeps the runtime bounded
          const Scalar saved = w.data()[i];
          w.data()[i] = saved + 1e-6;
          const Scalar up = loss_at();
          w.data()[i] = saved - 1e-6;
          const Scalar down = loss_at();
          w.data()[i] = saved;
          const Scalar fd = (up - down) / 2e-6;
          const Scalar got = grads.weights[l].data()[i];
          worst = std::max(worst,
                           std::abs(fd - got) / std::max({std::abs(fd), std::abs(got), 1e-3}));
        }
      }
    }
    pass &= worst <= 1e-5;
    details << "; critic-loss worst " << worst;
  }

  // Full actor-through-critic composed gradient over 20 probes.
  {
    Rng rng = make_rng(2003, 0);
    Scalar worst = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
      aprg::Agent agent = aprg::Agent::init(cfg, rng);
      const auto buffer = make_buffer(rng, 3);
      const std::vector<int> batch{0, 1, 2};

      nn::GradBuffer grads = nn::GradBuffer::zeros_like(agent.actor);
      aprg::actor_objective(agent, buffer, batch, env_cfg, &grads);

      for (std::size_t l = 0; l < agent.actor.weights.size(); ++l) {
        MatX& w = agent.actor.weights[l];
        for (int i = 0; i < w.size(); i += 7) {
          const Scalar saved = w.data()[i];
          w.data()[i] = saved + 1e-6;
          const Scalar up = aprg::actor_objective(agent, buffer, batch, env_cfg);
          w.data()[i] = saved - 1e-6;
          const Scalar down = aprg::actor_objective(agent, buffer, batch, env_cfg);
          w.data()[i] = saved;
          const Scalar fd = (up - down) / 2e-6;
          const Scalar got = grads.weights[l].data()[i];
          worst = std::max(worst,
                           std::abs(fd - got) / std::max({std::abs(fd), std::abs(got), 1e-3}));
        }
      }
    }
    pass &= worst <= 1e-5;
    details << "; composed actor worst " << worst;
  }

  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 3. Reward-ambiguity reproduction
// ---------------------------------------------------------------------------

CriterionResult reward_ambiguity() {
  const env::EnvConfig cfg = env::make_scenario("ballmachine-fixed").env;
  Rng serve_rng = make_rng(1, 1);
  const env::BallState serve = env::sample_serve(serve_rng, cfg);

  const auto landing = [&](Scalar alpha, Scalar* height = nullptr) {
    Rng rng = make_rng(2, 1);
    const env::Outcome out =
        env::step(serve, env::Action(alpha, 0.0, 1.0), env::Goal{2.0, 0.0}, cfg, rng);
    if (height) *height = out.reward_params.height;
    return out.reward_params.achieved_x;
  };

  Scalar peak_alpha = 0.0, peak_x = -1.0;
  for (Scalar a = -6.0; a <= 20.0; a += 0.25) {
    const Scalar x = landing(a);
    if (x > peak_x) {
      peak_x = x;
      peak_alpha = a;
    }
  }
  const Scalar target = peak_x - 0.15;

  const auto bisect = [&](Scalar lo, Scalar hi, bool rising) {
    for (int i = 0; i < 50; ++i) {
      const Scalar mid = 0.5 * (lo + hi);
      if ((landing(mid) < target) == rising) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  const Scalar alpha_low = bisect(-6.0, peak_alpha, true);
  const Scalar alpha_high = bisect(peak_alpha, 20.0, false);

  Scalar h_low = 0.0, h_high = 0.0;
  const Scalar x_low = landing(alpha_low, &h_low);
  const Scalar x_high = landing(alpha_high, &h_high);

  const env::Goal goal{target, 0.0};
  const Scalar r_low =
      env::reward_from_params(env::RewardParams{x_low, 0.0, h_low}, goal, 0.07);
  const Scalar r_high =
      env::reward_from_params(env::RewardParams{x_high, 0.0, h_high}, goal, 0.07);

  const bool pass = std::abs(x_low - x_high) < 0.010 && (h_high - h_low) > 0.1 &&
                    r_low > r_high;
  std::ostringstream details;
  details << "alpha " << alpha_low << " vs " << alpha_high << ": dx "
          << mm(std::abs(x_low - x_high)) << ", dh " << mm(h_high - h_low) << ", reward "
          << r_low << " > " << r_high;
  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 4. Learning at desk scale
// ---------------------------------------------------------------------------

CriterionResult learning_desk_scale() {
  std::ostringstream details;
  bool pass = true;

  harness::ExperimentConfig cfg = harness::scenario_defaults("serve");
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.jobs = 0;  // all cores

  const harness::TrialSummary defaults = harness::run_experiment(cfg);
  pass &= defaults.median_goal_error <= 0.120;
  details << "defaults median " << mm(defaults.median_goal_error) << " (<= 120)";

  int improved = 0;
  for (const auto& s : defaults.per_seed) {
    if (s.mean_goal_error < s.early_mean_goal_error) ++improved;
  }
  pass &= improved >= 4;
  details << "; improved on " << improved << "/5 seeds";

  harness::SearchSpace space;
  space.trials = 50;
  space.seeds_per_trial = 3;  // fits the runtime budget on two cores
  const auto ranked = harness::run_search(space, cfg, 2024, "");
  pass &= ranked.front().score <= 0.060;
  details << "; best of 50-trial search " << mm(ranked.front().score) << " (<= 60)";

  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 5. Ablation ordering
// ---------------------------------------------------------------------------

CriterionResult ablation_ordering() {
  harness::ExperimentConfig cfg = harness::scenario_defaults("serve");
  cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  cfg.jobs = 0;

  const auto results = harness::compare_modes(
      cfg, {aprg::Mode::Aprg, aprg::Mode::Prg, aprg::Mode::ScalarCritic});
  const Scalar aprg_err = results[0].summary.mean_goal_error;
  const Scalar prg_err = results[1].summary.mean_goal_error;
  const Scalar scalar_err = results[2].summary.mean_goal_error;

  const bool pass = aprg_err <= prg_err && prg_err <= scalar_err;
  std::ostringstream details;
  details << "APRG " << mm(aprg_err) << " <= PRG " << mm(prg_err) << " <= scalar "
          << mm(scalar_err);
  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 6. Noise robustness
// ---------------------------------------------------------------------------

/// Noise profile of the system-noise experiment, scaled by one factor:
/// machine-repeatability spread on the serve, execution noise on the action,
/// and observation noise on what the agent sees.
harness::ExperimentConfig noisy_experiment(Scalar scale) {
  harness::ExperimentConfig cfg = harness::scenario_defaults("ballmachine-fixed");
  auto widen = [&](env::Interval& iv, Scalar half) {
    const Scalar mid = 0.5 * (iv.lo + iv.hi);
    iv = env::Interval{mid - scale * half, mid + scale * half};
  };
  widen(cfg.env.serve.pos_x, 0.047);
  widen(cfg.env.serve.pos_y, 0.047);
  widen(cfg.env.serve.pos_z, 0.047);
  widen(cfg.env.serve.vel_x, 0.30);
  widen(cfg.env.serve.vel_y, 0.10);
  widen(cfg.env.serve.vel_z, 0.15);
  cfg.env.action_noise_std = scale * Vec3(0.5, 0.5, 0.05);
  Vec9 obs;
  obs << 0.015, 0.015, 0.015, 0.15, 0.15, 0.15, 1.5, 1.5, 1.5;
  cfg.env.observation_noise_std = scale * obs;
  return cfg;
}

CriterionResult noise_robustness() {
  // Calibrate the scale so a fixed action lands with ~120 mm RMS scatter.
  const env::Action probe_action(4.0, 0.0, 0.7);
  Scalar lo = 0.2, hi = 4.0;
  Scalar scale = 1.0, floor_rms = 0.0;
  for (int i = 0; i < 12; ++i) {
    scale = 0.5 * (lo + hi);
    floor_rms =
        harness::fixed_action_scatter_rms(noisy_experiment(scale).env, probe_action, 160, 7);
    if (std::abs(floor_rms - 0.120) < 0.004) break;
    (floor_rms < 0.120 ? lo : hi) = scale;
  }

  harness::ExperimentConfig cfg = noisy_experiment(scale);
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.jobs = 0;
  const harness::TrialSummary summary = harness::run_experiment(cfg);

  int converged = 0;
  for (const auto& s : summary.per_seed) {
    if (s.mean_goal_error <= 2.5 * floor_rms) ++converged;
  }
  const bool pass = converged >= 3 && std::abs(floor_rms - 0.120) < 0.015;
  std::ostringstream details;
  details << "noise floor " << mm(floor_rms) << " (scale " << scale << "); last-50 <= "
          << mm(2.5 * floor_rms) << " on " << converged << "/5 seeds";
  return {pass, details.str()};
}

// ---------------------------------------------------------------------------
// 7. Determinism and round-trip
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

CriterionResult determinism_roundtrip() {
  std::ostringstream details;
  bool pass = true;

  harness::ExperimentConfig cfg = harness::scenario_defaults("serve");
  cfg.aprg.total_episodes = 60;
  cfg.aprg.warmup_episodes = 10;
  cfg.aprg.steps_per_episode = 8;
  cfg.aprg.minibatch = 16;
  cfg.seeds = {11, 12};
  cfg.jobs = 0;

  const fs::path dir_a = fs::temp_directory_path() / "ttrl_accept_a";
  const fs::path dir_b = fs::temp_directory_path() / "ttrl_accept_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  cfg.out_dir = dir_a.string();
  harness::run_experiment(cfg);
  cfg.out_dir = dir_b.string();
  harness::run_experiment(cfg);

  bool identical = true;
  for (const auto seed : cfg.seeds) {
    const std::string name = "/episodes_seed" + std::to_string(seed) + ".csv";
    identical &= read_file(dir_a.string() + name) == read_file(dir_b.string() + name);
  }
  pass &= identical;
  details << (identical ? "episode logs byte-identical" : "EPISODE LOGS DIFFER");

  // Checkpoint round trip is bit-exact.
  const std::string actor_path = dir_a.string() + "/actor_seed11.ckpt";
  const nn::MlpNet reloaded = nn::load_checkpoint(actor_path);
  {
    const fs::path copy = dir_a / "actor_resaved.ckpt";
    nn::save_checkpoint(reloaded, copy.string());
    const bool bit_exact = read_file(actor_path) == read_file(copy.string());
    pass &= bit_exact;
    details << (bit_exact ? "; checkpoint round-trip bit-exact" : "; CHECKPOINT DIFFERS");
  }

  // A reloaded actor reproduces its recorded evaluation actions.
  {
    const auto recorded =
        harness::read_eval_records(dir_a.string() + "/eval_seed11.csv");
    Scalar worst = 0.0;
    for (const auto& rec : recorded) {
      const env::Action replayed =
          aprg::policy_action(reloaded, rec.observed_state, rec.goal, cfg.env);
      worst = std::max({worst, std::abs(replayed.alpha_deg - rec.action.alpha_deg),
                        std::abs(replayed.beta_deg - rec.action.beta_deg),
                        std::abs(replayed.racket_vx - rec.action.racket_vx)});
    }
    pass &= worst <= 1e-12;
    details << "; replayed-action max dev " << worst;
  }

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  return {pass, details.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Criterion>> criteria = {
      {"physics correctness", physics_correctness},
      {"gradient integrity", gradient_integrity},
      {"reward-ambiguity reproduction", reward_ambiguity},
      {"learning at desk scale", learning_desk_scale},
      {"ablation ordering", ablation_ordering},
      {"noise robustness", noise_robustness},
      {"determinism & round-trip", determinism_roundtrip},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    try {
      result = criteria[i].second();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    const Scalar seconds =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %zu. %s: %s (%.1f s)\n", result.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), result.details.c_str(), seconds);
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
