#include "ttrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ttrl/config_io.hpp"
#include "ttrl/random.hpp"

namespace ttrl::harness {

namespace fs = std::filesystem;

namespace {

/// Shortest representation that round-trips a double through text.
std::string fmt(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Scalar mean_of(const std::vector<Scalar>& xs) {
  if (xs.empty()) return 0.0;
  Scalar sum = 0.0;
  for (Scalar x : xs) sum += x;
  return sum / static_cast<Scalar>(xs.size());
}

Scalar median_of(std::vector<Scalar> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Runs fn(0..n-1) on up to `jobs` worker threads; rethrows the first
/// worker exception. Tasks must be independent.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

}  // namespace

ExperimentConfig scenario_defaults(std::string_view scenario) {
  const env::Scenario sc = env::make_scenario(scenario);
  ExperimentConfig config;
  config.scenario = sc.name;
  config.env = sc.env;
  config.goals = sc.goals;
  return config;
}

SeedSummary summarize_seed(std::uint64_t seed, const std::vector<aprg::EpisodeLogEntry>& log,
                           int long_window, int warmup_episodes) {
  SeedSummary s;
  s.seed = seed;
  if (log.empty()) return s;

  const int n = static_cast<int>(log.size());
  const int window = std::min(long_window, n);
  std::vector<Scalar> errors, x_errors, y_errors, rewards;
  for (int i = n - window; i < n; ++i) {
    const auto& e = log[static_cast<std::size_t>(i)];
    errors.push_back(e.goal_error);
    x_errors.push_back(std::abs(e.reward_params.achieved_x - e.goal.x));
    y_errors.push_back(std::abs(e.reward_params.achieved_y - e.goal.y));
    rewards.push_back(e.reward);
  }
  s.mean_goal_error = mean_of(errors);
  s.median_goal_error = median_of(errors);
  s.mean_x_error = mean_of(x_errors);
  s.mean_y_error = mean_of(y_errors);
  s.mean_reward = mean_of(rewards);

  std::vector<Scalar> early;
  for (int i = warmup_episodes; i < std::min(warmup_episodes + long_window, n); ++i) {
    early.push_back(log[static_cast<std::size_t>(i)].goal_error);
  }
  s.early_mean_goal_error = mean_of(early);
  return s;
}

TrialSummary aggregate(std::vector<SeedSummary> per_seed) {
  TrialSummary t;
  std::vector<Scalar> means, xs, ys;
  for (const auto& s : per_seed) {
    means.push_back(s.mean_goal_error);
    xs.push_back(s.mean_x_error);
    ys.push_back(s.mean_y_error);
  }
  t.mean_goal_error = mean_of(means);
  t.median_goal_error = median_of(means);
  t.mean_x_error = mean_of(xs);
  t.mean_y_error = mean_of(ys);
  t.per_seed = std::move(per_seed);
  return t;
}

namespace {

nlohmann::json seed_summary_json(const SeedSummary& s) {
  return nlohmann::json{{"seed", s.seed},
                        {"mean_goal_error_m", s.mean_goal_error},
                        {"mean_goal_error_mm", 1000.0 * s.mean_goal_error},
                        {"median_goal_error_m", s.median_goal_error},
                        {"median_goal_error_mm", 1000.0 * s.median_goal_error},
                        {"mean_x_error_m", s.mean_x_error},
                        {"mean_y_error_m", s.mean_y_error},
                        {"mean_reward_m", s.mean_reward},
                        {"early_mean_goal_error_m", s.early_mean_goal_error}};
}

void write_summary_json(const TrialSummary& t, int window, const std::string& path) {
  nlohmann::json j;
  j["window"] = window;
  j["per_seed"] = nlohmann::json::array();
  for (const auto& s : t.per_seed) j["per_seed"].push_back(seed_summary_json(s));
  j["aggregate"] = {{"mean_goal_error_m", t.mean_goal_error},
                    {"mean_goal_error_mm", 1000.0 * t.mean_goal_error},
                    {"median_goal_error_m", t.median_goal_error},
                    {"median_goal_error_mm", 1000.0 * t.median_goal_error},
                    {"mean_x_error_m", t.mean_x_error},
                    {"mean_y_error_m", t.mean_y_error}};
  open_out(path) << j.dump(2) << "\n";
}

}  // namespace

TrialSummary run_experiment(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("run_experiment: need at least one seed");

  const int n = static_cast<int>(config.seeds.size());
  std::vector<aprg::TrainResult> results(static_cast<std::size_t>(n));
  parallel_for(n, config.jobs, [&](int i) {
    results[static_cast<std::size_t>(i)] =
        aprg::run_training(config.env, config.goals, config.aprg,
                           config.seeds[static_cast<std::size_t>(i)]);
  });

  std::vector<SeedSummary> per_seed;
  for (int i = 0; i < n; ++i) {
    per_seed.push_back(summarize_seed(config.seeds[static_cast<std::size_t>(i)],
                                      results[static_cast<std::size_t>(i)].log,
                                      config.long_window, config.aprg.warmup_episodes));
  }
  TrialSummary summary = aggregate(std::move(per_seed));

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    config_io::save_experiment_file(config, config.out_dir + "/config.json");
    for (int i = 0; i < n; ++i) {
      const auto seed = config.seeds[static_cast<std::size_t>(i)];
      const auto& result = results[static_cast<std::size_t>(i)];
      const std::string tag = "_seed" + std::to_string(seed);
      write_episode_log(result.log, config.out_dir + "/episodes" + tag + ".csv");
      emit_plot_data(result.log, std::min<int>(config.short_window,
                                               static_cast<int>(result.log.size())),
                     config.out_dir + "/curve" + tag + ".csv");
      nn::save_checkpoint(result.agent.actor, config.out_dir + "/actor" + tag + ".ckpt");
      nn::save_checkpoint(result.agent.critic, config.out_dir + "/critic" + tag + ".ckpt");
      const auto eval = evaluate_actor(result.agent.actor, config.env, config.goals, 20, seed);
      write_eval_records(eval, config.out_dir + "/eval" + tag + ".csv");
    }
    write_summary_json(summary, config.long_window, config.out_dir + "/summary.json");
  }
  return summary;
}

namespace {

aprg::AprgConfig sample_trial_config(const SearchSpace& space, const aprg::AprgConfig& base,
                                     Rng& rng) {
  aprg::AprgConfig c = base;
  c.critic_lr = std::pow(10.0, uniform(rng, space.critic_lr_log10.lo, space.critic_lr_log10.hi));
  c.actor_lr = std::pow(10.0, uniform(rng, space.actor_lr_log10.lo, space.actor_lr_log10.hi));
  c.steps_per_episode = static_cast<int>(
      uniform(rng, space.steps_per_episode.first, space.steps_per_episode.second + 1));
  c.minibatch = static_cast<int>(uniform(rng, space.minibatch.first, space.minibatch.second + 1));
  c.warmup_noise_std =
      base.warmup_noise_std * uniform(rng, space.warmup_noise_scale.lo, space.warmup_noise_scale.hi);
  c.explore_noise_std = base.explore_noise_std *
                        uniform(rng, space.explore_noise_scale.lo, space.explore_noise_scale.hi);
  c.explore_noise_decay = uniform(rng, space.explore_decay.lo, space.explore_decay.hi);
  c.post_opt_steps =
      static_cast<int>(uniform(rng, space.post_opt_steps.first, space.post_opt_steps.second + 1));
  c.post_opt_step = uniform(rng, space.post_opt_step.lo, space.post_opt_step.hi);
  const auto& widths = space.hidden_width;
  const int width = widths[static_cast<std::size_t>(
      uniform01(rng) * static_cast<Scalar>(widths.size()))];
  c.hidden_sizes = {width, width};
  return c;
}

nlohmann::json trial_config_json(const aprg::AprgConfig& c) {
  return nlohmann::json{{"critic_lr", c.critic_lr},
                        {"actor_lr", c.actor_lr},
                        {"steps_per_episode", c.steps_per_episode},
                        {"minibatch", c.minibatch},
                        {"warmup_noise_std", {c.warmup_noise_std.x(), c.warmup_noise_std.y(),
                                              c.warmup_noise_std.z()}},
                        {"explore_noise_std", {c.explore_noise_std.x(), c.explore_noise_std.y(),
                                               c.explore_noise_std.z()}},
                        {"explore_noise_decay", c.explore_noise_decay},
                        {"post_opt_steps", c.post_opt_steps},
                        {"post_opt_step", c.post_opt_step},
                        {"hidden_sizes", c.hidden_sizes},
                        {"mode", std::string(aprg::to_string(c.mode))}};
}

}  // namespace

std::vector<SearchTrial> run_search(const SearchSpace& space, const ExperimentConfig& base,
                                    std::uint64_t master_seed, const std::string& out_dir) {
  if (space.trials < 1) throw std::invalid_argument("run_search: need at least one trial");

  Rng config_rng = make_rng(master_seed, 100);
  std::vector<SearchTrial> trials(static_cast<std::size_t>(space.trials));
  for (int t = 0; t < space.trials; ++t) {
    trials[static_cast<std::size_t>(t)].index = t;
    trials[static_cast<std::size_t>(t)].config =
        sample_trial_config(space, base.aprg, config_rng);
  }

  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < space.seeds_per_trial; ++s) {
    seeds.push_back(master_seed * 1000 + static_cast<std::uint64_t>(s) + 1);
  }

  // Flat (trial, seed) task list, so all cores stay busy.
  const int tasks = space.trials * space.seeds_per_trial;
  std::vector<std::vector<aprg::EpisodeLogEntry>> logs(static_cast<std::size_t>(tasks));
  parallel_for(tasks, base.jobs, [&](int i) {
    const int trial = i / space.seeds_per_trial;
    const int seed_idx = i % space.seeds_per_trial;
    const auto result =
        aprg::run_training(base.env, base.goals, trials[static_cast<std::size_t>(trial)].config,
                           seeds[static_cast<std::size_t>(seed_idx)]);
    logs[static_cast<std::size_t>(i)] = result.log;
  });

  for (int t = 0; t < space.trials; ++t) {
    auto& trial = trials[static_cast<std::size_t>(t)];
    std::vector<SeedSummary> per_seed;
    for (int s = 0; s < space.seeds_per_trial; ++s) {
      per_seed.push_back(summarize_seed(
          seeds[static_cast<std::size_t>(s)],
          logs[static_cast<std::size_t>(t * space.seeds_per_trial + s)], base.long_window,
          trial.config.warmup_episodes));
    }
    trial.summary = aggregate(std::move(per_seed));
    trial.score = trial.summary.mean_goal_error;
  }

  std::sort(trials.begin(), trials.end(),
            [](const SearchTrial& a, const SearchTrial& b) { return a.score < b.score; });

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& trial : trials) {
      char name[32];
      std::snprintf(name, sizeof(name), "trial_%03d", trial.index);
      const std::string dir = out_dir + "/" + name;
      fs::create_directories(dir);
      nlohmann::json j = trial_config_json(trial.config);
      j["seeds"] = seeds;
      open_out(dir + "/config.json") << j.dump(2) << "\n";
      write_summary_json(trial.summary, base.long_window, dir + "/summary.json");
    }
    auto out = open_out(out_dir + "/ranking.csv");
    out << "rank,trial,score_m,score_mm,critic_lr,actor_lr,steps_per_episode,minibatch,"
           "explore_noise_decay,post_opt_steps,post_opt_step,hidden_width\n";
    for (std::size_t r = 0; r < trials.size(); ++r) {
      const auto& t = trials[r];
      out << r + 1 << ',' << t.index << ',' << fmt(t.score) << ',' << fmt(1000.0 * t.score) << ','
          << fmt(t.config.critic_lr) << ',' << fmt(t.config.actor_lr) << ','
          << t.config.steps_per_episode << ',' << t.config.minibatch << ','
          << fmt(t.config.explore_noise_decay) << ',' << t.config.post_opt_steps << ','
          << fmt(t.config.post_opt_step) << ',' << t.config.hidden_sizes.front() << '\n';
    }
  }
  return trials;
}

std::vector<ModeResult> compare_modes(const ExperimentConfig& config,
                                      const std::vector<aprg::Mode>& modes) {
  if (modes.empty()) throw std::invalid_argument("compare_modes: need at least one mode");

  const int seeds = static_cast<int>(config.seeds.size());
  const int tasks = static_cast<int>(modes.size()) * seeds;
  std::vector<std::vector<aprg::EpisodeLogEntry>> logs(static_cast<std::size_t>(tasks));
  parallel_for(tasks, config.jobs, [&](int i) {
    const int mode_idx = i / seeds;
    const int seed_idx = i % seeds;
    aprg::AprgConfig c = config.aprg;
    c.mode = modes[static_cast<std::size_t>(mode_idx)];
    logs[static_cast<std::size_t>(i)] =
        aprg::run_training(config.env, config.goals, c,
                           config.seeds[static_cast<std::size_t>(seed_idx)])
            .log;
  });

  std::vector<ModeResult> results;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    ModeResult r;
    r.mode = modes[m];
    std::vector<SeedSummary> per_seed;
    for (int s = 0; s < seeds; ++s) {
      const auto& log = logs[m * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(s)];
      per_seed.push_back(summarize_seed(config.seeds[static_cast<std::size_t>(s)], log,
                                        config.long_window, config.aprg.warmup_episodes));
      std::vector<Scalar> errors;
      const int n = static_cast<int>(log.size());
      for (int i = std::max(0, n - config.long_window); i < n; ++i) {
        errors.push_back(log[static_cast<std::size_t>(i)].goal_error);
      }
      r.last_window_errors.push_back(std::move(errors));
    }
    r.summary = aggregate(std::move(per_seed));
    results.push_back(std::move(r));
  }

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    auto out = open_out(config.out_dir + "/mode_comparison.csv");
    out << "mode,mean_goal_error_m,mean_goal_error_mm,median_goal_error_m,mean_x_error_m,"
           "mean_y_error_m\n";
    for (const auto& r : results) {
      out << aprg::to_string(r.mode) << ',' << fmt(r.summary.mean_goal_error) << ','
          << fmt(1000.0 * r.summary.mean_goal_error) << ',' << fmt(r.summary.median_goal_error)
          << ',' << fmt(r.summary.mean_x_error) << ',' << fmt(r.summary.mean_y_error) << '\n';
    }
  }
  return results;
}

std::vector<std::pair<Scalar, Scalar>> running_average_series(
    const std::vector<aprg::EpisodeLogEntry>& log, int window) {
  if (window < 1 || static_cast<std::size_t>(window) > log.size()) {
    throw std::invalid_argument("running_average_series: window must be in [1, log length]");
  }
  std::vector<std::pair<Scalar, Scalar>> series;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const std::size_t begin = i + 1 >= static_cast<std::size_t>(window)
                                  ? i + 1 - static_cast<std::size_t>(window)
                                  : 0;
    Scalar sum = 0.0;
    for (std::size_t k = begin; k <= i; ++k) sum += log[k].goal_error;
    series.emplace_back(log[i].goal_error, sum / static_cast<Scalar>(i - begin + 1));
  }
  return series;
}

void emit_plot_data(const std::vector<aprg::EpisodeLogEntry>& log, int window,
                    const std::string& path) {
  const auto series = running_average_series(log, window);
  auto out = open_out(path);
  out << "episode,goal_error_m,running_avg_m\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << log[i].episode << ',' << fmt(series[i].first) << ',' << fmt(series[i].second) << '\n';
  }
}

void write_episode_log(const std::vector<aprg::EpisodeLogEntry>& log, const std::string& path) {
  auto out = open_out(path);
  out << "episode,obs_px,obs_py,obs_pz,obs_vx,obs_vy,obs_vz,obs_sx,obs_sy,obs_sz,"
         "goal_x,goal_y,alpha_deg,beta_deg,racket_vx,achieved_x,achieved_y,height,"
         "reward,goal_error,event\n";
  for (const auto& e : log) {
    out << e.episode;
    for (int i = 0; i < 9; ++i) out << ',' << fmt(e.observed_state(i));
    out << ',' << fmt(e.goal.x) << ',' << fmt(e.goal.y) << ',' << fmt(e.action.alpha_deg) << ','
        << fmt(e.action.beta_deg) << ',' << fmt(e.action.racket_vx) << ','
        << fmt(e.reward_params.achieved_x) << ',' << fmt(e.reward_params.achieved_y) << ','
        << fmt(e.reward_params.height) << ',' << fmt(e.reward) << ',' << fmt(e.goal_error) << ','
        << physics::to_string(e.terminal_event) << '\n';
  }
}

std::vector<aprg::EpisodeLogEntry> read_episode_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open episode log: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<aprg::EpisodeLogEntry> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 21) throw std::runtime_error("malformed episode log line: " + line);
    aprg::EpisodeLogEntry e;
    e.episode = std::stoi(f[0]);
    for (int i = 0; i < 9; ++i) e.observed_state(i) = std::stod(f[static_cast<std::size_t>(1 + i)]);
    e.goal = env::Goal{std::stod(f[10]), std::stod(f[11])};
    e.action = env::Action(std::stod(f[12]), std::stod(f[13]), std::stod(f[14]));
    e.reward_params = env::RewardParams{std::stod(f[15]), std::stod(f[16]), std::stod(f[17])};
    e.reward = std::stod(f[18]);
    e.goal_error = std::stod(f[19]);
    e.terminal_event = physics::event_from_string(f[20]);
    log.push_back(e);
  }
  return log;
}

std::vector<EvalRecord> evaluate_actor(const nn::MlpNet& actor, const env::EnvConfig& env_config,
                                       const std::vector<env::Goal>& goals, int episodes,
                                       std::uint64_t seed) {
  if (goals.empty()) throw std::invalid_argument("evaluate_actor: need at least one goal");
  env::EnvConfig quiet = env_config;
  quiet.observation_noise_std.setZero();
  quiet.action_noise_std.setZero();

  Rng rng = make_rng(seed, 10);
  std::vector<EvalRecord> records;
  for (int i = 0; i < episodes; ++i) {
    EvalRecord rec;
    rec.goal = goals[static_cast<std::size_t>(i) % goals.size()];
    const auto serve = env::sample_serve(rng, quiet);
    rec.observed_state = env::state_vector(serve);
    rec.action = aprg::policy_action(actor, rec.observed_state, rec.goal, quiet);
    const auto outcome = env::step(serve, rec.action, rec.goal, quiet, rng);
    rec.goal_error = std::hypot(rec.goal.x - outcome.reward_params.achieved_x,
                                rec.goal.y - outcome.reward_params.achieved_y);
    records.push_back(rec);
  }
  return records;
}

void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path) {
  auto out = open_out(path);
  out << "obs_px,obs_py,obs_pz,obs_vx,obs_vy,obs_vz,obs_sx,obs_sy,obs_sz,goal_x,goal_y,"
         "alpha_deg,beta_deg,racket_vx,goal_error\n";
  for (const auto& r : records) {
    for (int i = 0; i < 9; ++i) out << fmt(r.observed_state(i)) << ',';
    out << fmt(r.goal.x) << ',' << fmt(r.goal.y) << ',' << fmt(r.action.alpha_deg) << ','
        << fmt(r.action.beta_deg) << ',' << fmt(r.action.racket_vx) << ',' << fmt(r.goal_error)
        << '\n';
  }
}

std::vector<EvalRecord> read_eval_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval records: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<EvalRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 15) throw std::runtime_error("malformed eval record line: " + line);
    EvalRecord r;
    for (int i = 0; i < 9; ++i) r.observed_state(i) = std::stod(f[static_cast<std::size_t>(i)]);
    r.goal = env::Goal{std::stod(f[9]), std::stod(f[10])};
    r.action = env::Action(std::stod(f[11]), std::stod(f[12]), std::stod(f[13]));
    r.goal_error = std::stod(f[14]);
    records.push_back(r);
  }
  return records;
}

Scalar fixed_action_scatter_rms(const env::EnvConfig& env_config, const env::Action& action,
                                int samples, std::uint64_t seed) {
  Rng rng = make_rng(seed, 20);
  std::vector<Vec2> landings;
  for (int i = 0; i < samples; ++i) {
    const auto serve = env::sample_serve(rng, env_config);
    const auto outcome = env::step(serve, action, env::Goal{0.0, 0.0}, env_config, rng);
    landings.emplace_back(outcome.reward_params.achieved_x, outcome.reward_params.achieved_y);
  }
  Vec2 mean = Vec2::Zero();
  for (const auto& p : landings) mean += p;
  mean /= static_cast<Scalar>(landings.size());
  Scalar sq = 0.0;
  for (const auto& p : landings) sq += (p - mean).squaredNorm();
  return std::sqrt(sq / static_cast<Scalar>(landings.size()));
}

}  // namespace ttrl::harness
