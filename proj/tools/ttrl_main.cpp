// Command-line experiment runner: training, hyperparameter search, mode
// comparison, checkpoint evaluation and config inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ttrl/config_io.hpp"
#include "ttrl/harness.hpp"

namespace {

using ttrl::Scalar;

struct CommonOpts {
  std::string config_path;
  std::string scenario;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string mode;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file (overrides scenario defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--scenario", opts.scenario, "scenario preset name");
  cmd->add_option("--seeds", opts.seeds, "seeds to run")->delimiter(',');
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--mode", opts.mode, "algorithm mode: aprg | prg | scalar");
  cmd->add_option("--jobs", opts.jobs, "worker threads (0 = all cores)");
}

ttrl::harness::ExperimentConfig resolve_config(const CommonOpts& opts) {
  nlohmann::json file_json;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    file_json = nlohmann::json::parse(in);
  }
  const std::string scenario = !opts.scenario.empty()
                                   ? opts.scenario
                                   : file_json.value("scenario", std::string("serve"));
  auto config = ttrl::harness::scenario_defaults(scenario);
  if (!file_json.is_null()) ttrl::config_io::merge_experiment_json(file_json, config);
  config.scenario = scenario;
  if (!opts.seeds.empty()) config.seeds = opts.seeds;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (!opts.mode.empty()) config.aprg.mode = ttrl::aprg::mode_from_string(opts.mode);
  if (opts.jobs > 0) config.jobs = opts.jobs;
  ttrl::config_io::validate_experiment(config);
  return config;
}

void print_summary(const ttrl::harness::TrialSummary& summary, int window) {
  std::printf("last-%d-episode goal error, per seed:\n", window);
  for (const auto& s : summary.per_seed) {
    std::printf("  seed %llu: mean %7.1f mm  median %7.1f mm  (x %6.1f mm, y %6.1f mm)\n",
                static_cast<unsigned long long>(s.seed), 1000.0 * s.mean_goal_error,
                1000.0 * s.median_goal_error, 1000.0 * s.mean_x_error, 1000.0 * s.mean_y_error);
  }
  std::printf("aggregate: mean %.1f mm, median %.1f mm (x %.1f mm, y %.1f mm)\n",
              1000.0 * summary.mean_goal_error, 1000.0 * summary.median_goal_error,
              1000.0 * summary.mean_x_error, 1000.0 * summary.mean_y_error);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"table-tennis return learning: simulation, training and experiment harness"};
  app.require_subcommand(1);

  CommonOpts train_opts, search_opts, compare_opts, eval_opts, print_opts;

  auto* train = app.add_subcommand("train", "run one experiment (all seeds) and summarize");
  add_common(train, train_opts);

  auto* search = app.add_subcommand("search", "uniform random hyperparameter search");
  add_common(search, search_opts);
  int trials = 50;
  int seeds_per_trial = 5;
  std::uint64_t master_seed = 1;
  search->add_option("--trials", trials, "number of sampled configurations");
  search->add_option("--seeds-per-trial", seeds_per_trial, "seeds averaged per trial");
  search->add_option("--master-seed", master_seed, "seed for the search itself");

  auto* compare = app.add_subcommand("compare", "run the same seeds under several modes");
  add_common(compare, compare_opts);
  std::vector<std::string> mode_names{"aprg", "prg", "scalar"};
  compare->add_option("--modes", mode_names, "modes to compare")->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "run a saved actor on fresh zero-noise serves");
  add_common(evaluate, eval_opts);
  std::string actor_path;
  int eval_episodes = 50;
  std::uint64_t eval_seed = 1;
  evaluate->add_option("--actor", actor_path, "actor checkpoint")->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--episodes", eval_episodes, "evaluation serves");
  evaluate->add_option("--seed", eval_seed, "serve stream seed");

  auto* print_config = app.add_subcommand("print-config", "dump the resolved config as JSON");
  add_common(print_config, print_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = resolve_config(train_opts);
      const auto summary = ttrl::harness::run_experiment(config);
      print_summary(summary, config.long_window);
      if (!config.out_dir.empty()) {
        std::printf("logs, checkpoints and summary written to %s\n", config.out_dir.c_str());
      }
    } else if (*search) {
      auto config = resolve_config(search_opts);
      ttrl::harness::SearchSpace space;
      space.trials = trials;
      space.seeds_per_trial = seeds_per_trial;
      const auto ranked = ttrl::harness::run_search(space, config, master_seed, config.out_dir);
      std::printf("rank  trial  last-%d mean goal error\n", config.long_window);
      for (std::size_t i = 0; i < std::min<std::size_t>(ranked.size(), 10); ++i) {
        std::printf("%4zu  %5d  %7.1f mm\n", i + 1, ranked[i].index, 1000.0 * ranked[i].score);
      }
    } else if (*compare) {
      const auto config = resolve_config(compare_opts);
      std::vector<ttrl::aprg::Mode> modes;
      for (const auto& name : mode_names) modes.push_back(ttrl::aprg::mode_from_string(name));
      const auto results = ttrl::harness::compare_modes(config, modes);
      for (const auto& r : results) {
        std::printf("%-7s mean %7.1f mm  median %7.1f mm\n",
                    std::string(ttrl::aprg::to_string(r.mode)).c_str(),
                    1000.0 * r.summary.mean_goal_error, 1000.0 * r.summary.median_goal_error);
      }
    } else if (*evaluate) {
      const auto config = resolve_config(eval_opts);
      const auto actor = ttrl::nn::load_checkpoint(actor_path);
      const auto records = ttrl::harness::evaluate_actor(actor, config.env, config.goals,
                                                         eval_episodes, eval_seed);
      Scalar sum = 0.0;
      for (const auto& r : records) sum += r.goal_error;
      std::printf("%d serves: mean goal error %.1f mm\n", eval_episodes,
                  1000.0 * sum / static_cast<Scalar>(records.size()));
      if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        ttrl::harness::write_eval_records(records, config.out_dir + "/eval.csv");
      }
    } else if (*print_config) {
      const auto config = resolve_config(print_opts);
      std::cout << ttrl::config_io::experiment_to_json(config).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
