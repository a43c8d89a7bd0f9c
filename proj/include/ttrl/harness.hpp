#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ttrl/aprg.hpp"
#include "ttrl/env.hpp"
#include "ttrl/types.hpp"

namespace ttrl::harness {

/// One experiment: a scenario, its environment and algorithm settings, and
/// the seeds to run. When out_dir is non-empty, per-episode logs, summary,
/// checkpoints and evaluation records are written there.
struct ExperimentConfig {
  std::string scenario = "serve";
  env::EnvConfig env;
  std::vector<env::Goal> goals{env::Goal{2.0, 0.0}};
  aprg::AprgConfig aprg;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir;
  int short_window = 30;  // running-average window for plot data
  int long_window = 50;   // summary window over the final episodes
  int jobs = 0;           // worker threads; 0 = hardware concurrency
};

/// Scenario preset expanded into a full experiment configuration.
ExperimentConfig scenario_defaults(std::string_view scenario);

struct SeedSummary {
  std::uint64_t seed = 0;
  Scalar mean_goal_error = 0.0;    // mean over the last long_window episodes [m]
  Scalar median_goal_error = 0.0;  // median over the same window [m]
  Scalar mean_x_error = 0.0;       // mean |achieved_x - goal_x| [m]
  Scalar mean_y_error = 0.0;
  Scalar mean_reward = 0.0;
  Scalar early_mean_goal_error = 0.0;  // first long_window episodes after warm-up [m]
};

struct TrialSummary {
  std::vector<SeedSummary> per_seed;
  Scalar mean_goal_error = 0.0;    // mean of per-seed means [m]
  Scalar median_goal_error = 0.0;  // median of per-seed means [m]
  Scalar mean_x_error = 0.0;
  Scalar mean_y_error = 0.0;
};

SeedSummary summarize_seed(std::uint64_t seed, const std::vector<aprg::EpisodeLogEntry>& log,
                           int long_window, int warmup_episodes);
TrialSummary aggregate(std::vector<SeedSummary> per_seed);

/// Runs run_training once per seed (in parallel up to config.jobs) and
/// aggregates. Deterministic per seed.
TrialSummary run_experiment(const ExperimentConfig& config);

/// Uniform random hyperparameter search space. Scalars are sampled
/// uniformly (learning rates in log10 space), integer ranges uniformly on
/// the closed range, and hidden_width from the listed choices.
struct SearchSpace {
  int trials = 50;
  int seeds_per_trial = 5;
  env::Interval critic_lr_log10{-3.5, -2.0};
  env::Interval actor_lr_log10{-4.5, -3.0};
  std::pair<int, int> steps_per_episode{8, 32};
  std::pair<int, int> minibatch{16, 64};
  env::Interval warmup_noise_scale{0.6, 2.0};
  env::Interval explore_noise_scale{0.4, 2.0};
  env::Interval explore_decay{0.95, 0.999};
  std::pair<int, int> post_opt_steps{5, 20};
  env::Interval post_opt_step{0.01, 0.1};
  std::vector<int> hidden_width{32, 64};
};

struct SearchTrial {
  int index = 0;
  aprg::AprgConfig config;
  TrialSummary summary;
  Scalar score = 0.0;  // mean over seeds of the last-window mean goal error [m]
};

/// Draws trial configurations from the space, evaluates each over its
/// seeds, and returns the trials ranked by score (best first). Fully
/// reproducible from master_seed; every trial configuration is persisted
/// under <out_dir>/trial_NNN when out_dir is non-empty.
std::vector<SearchTrial> run_search(const SearchSpace& space, const ExperimentConfig& base,
                                    std::uint64_t master_seed, const std::string& out_dir);

struct ModeResult {
  aprg::Mode mode;
  TrialSummary summary;
  std::vector<std::vector<Scalar>> last_window_errors;  // per seed, per episode [m]
};

/// Runs the same experiment (same seeds, hence the same serve streams)
/// under each mode.
std::vector<ModeResult> compare_modes(const ExperimentConfig& config,
                                      const std::vector<aprg::Mode>& modes);

/// Per-episode goal error plus the trailing running average over `window`
/// episodes, written as CSV. Throws if window exceeds the log length.
void emit_plot_data(const std::vector<aprg::EpisodeLogEntry>& log, int window,
                    const std::string& path);
std::vector<std::pair<Scalar, Scalar>> running_average_series(
    const std::vector<aprg::EpisodeLogEntry>& log, int window);

void write_episode_log(const std::vector<aprg::EpisodeLogEntry>& log, const std::string& path);
std::vector<aprg::EpisodeLogEntry> read_episode_log(const std::string& path);

/// Deterministic policy evaluation: fresh zero-noise serves, actor actions
/// with no exploration or post-optimization.
struct EvalRecord {
  Vec9 observed_state = Vec9::Zero();
  env::Goal goal;
  env::Action action;
  Scalar goal_error = 0.0;
};

std::vector<EvalRecord> evaluate_actor(const nn::MlpNet& actor, const env::EnvConfig& env_config,
                                       const std::vector<env::Goal>& goals, int episodes,
                                       std::uint64_t seed);
void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path);
std::vector<EvalRecord> read_eval_records(const std::string& path);

/// RMS spread of the landing point around its mean for a fixed action under
/// the configured serve distribution and noise. Used to calibrate noise
/// levels against a target scatter.
Scalar fixed_action_scatter_rms(const env::EnvConfig& env_config, const env::Action& action,
                                int samples, std::uint64_t seed);

}  // namespace ttrl::harness
