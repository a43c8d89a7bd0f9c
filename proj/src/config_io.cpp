#include "ttrl/config_io.hpp"

#include <fstream>
#include <stdexcept>

namespace ttrl::config_io {

using nlohmann::json;

namespace {

json interval_json(const env::Interval& iv) { return json::array({iv.lo, iv.hi}); }

env::Interval interval_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("interval must be [lo, hi]");
  return env::Interval{j[0].get<Scalar>(), j[1].get<Scalar>()};
}

template <typename Vec>
json vec_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <typename Vec>
void vec_from(const json& j, Vec& v) {
  if (!j.is_array() || static_cast<int>(j.size()) != v.size()) {
    throw std::invalid_argument("vector field has wrong length");
  }
  for (int i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<Scalar>();
}

template <typename T>
void maybe(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

void maybe_interval(const json& j, const char* key, env::Interval& value) {
  if (j.contains(key)) value = interval_from(j.at(key));
}

template <typename Vec>
void maybe_vec(const json& j, const char* key, Vec& value) {
  if (j.contains(key)) vec_from(j.at(key), value);
}

json serve_json(const env::ServeDistribution& sd) {
  return json{{"pos_x", interval_json(sd.pos_x)}, {"pos_y", interval_json(sd.pos_y)},
              {"pos_z", interval_json(sd.pos_z)}, {"vel_x", interval_json(sd.vel_x)},
              {"vel_y", interval_json(sd.vel_y)}, {"vel_z", interval_json(sd.vel_z)},
              {"spin_x", interval_json(sd.spin_x)}, {"spin_y", interval_json(sd.spin_y)},
              {"spin_z", interval_json(sd.spin_z)}};
}

void merge_serve(const json& j, env::ServeDistribution& sd) {
  maybe_interval(j, "pos_x", sd.pos_x);
  maybe_interval(j, "pos_y", sd.pos_y);
  maybe_interval(j, "pos_z", sd.pos_z);
  maybe_interval(j, "vel_x", sd.vel_x);
  maybe_interval(j, "vel_y", sd.vel_y);
  maybe_interval(j, "vel_z", sd.vel_z);
  maybe_interval(j, "spin_x", sd.spin_x);
  maybe_interval(j, "spin_y", sd.spin_y);
  maybe_interval(j, "spin_z", sd.spin_z);
}

json env_json(const env::EnvConfig& c) {
  return json{
      {"serve", serve_json(c.serve)},
      {"height_weight", c.height_weight},
      {"observation_noise_std", vec_json(c.observation_noise_std)},
      {"action_noise_std", vec_json(c.action_noise_std)},
      {"physics",
       {{"k_drag", c.physics.k_drag}, {"k_magnus", c.physics.k_magnus},
        {"gravity", c.physics.gravity}}},
      {"geometry",
       {{"length", c.geometry.length}, {"half_width", c.geometry.half_width},
        {"net_x", c.geometry.net_x}, {"net_height", c.geometry.net_height},
        {"floor_z", c.geometry.floor_z}, {"hit_plane_x", c.geometry.hit_plane_x}}},
      {"state_lo", vec_json(c.state_lo)},
      {"state_hi", vec_json(c.state_hi)},
      {"goal_lo", vec_json(c.goal_lo)},
      {"goal_hi", vec_json(c.goal_hi)},
      {"sim_dt", c.sim_dt},
      {"max_flight_time", c.max_flight_time}};
}

void merge_env(const json& j, env::EnvConfig& c) {
  if (j.contains("serve")) merge_serve(j.at("serve"), c.serve);
  maybe(j, "height_weight", c.height_weight);
  maybe_vec(j, "observation_noise_std", c.observation_noise_std);
  maybe_vec(j, "action_noise_std", c.action_noise_std);
  if (j.contains("physics")) {
    const auto& p = j.at("physics");
    maybe(p, "k_drag", c.physics.k_drag);
    maybe(p, "k_magnus", c.physics.k_magnus);
    maybe(p, "gravity", c.physics.gravity);
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    maybe(g, "length", c.geometry.length);
    maybe(g, "half_width", c.geometry.half_width);
    maybe(g, "net_x", c.geometry.net_x);
    maybe(g, "net_height", c.geometry.net_height);
    maybe(g, "floor_z", c.geometry.floor_z);
    maybe(g, "hit_plane_x", c.geometry.hit_plane_x);
  }
  maybe_vec(j, "state_lo", c.state_lo);
  maybe_vec(j, "state_hi", c.state_hi);
  maybe_vec(j, "goal_lo", c.goal_lo);
  maybe_vec(j, "goal_hi", c.goal_hi);
  maybe(j, "sim_dt", c.sim_dt);
  maybe(j, "max_flight_time", c.max_flight_time);
}

json aprg_json(const aprg::AprgConfig& c) {
  return json{{"warmup_episodes", c.warmup_episodes},
              {"total_episodes", c.total_episodes},
              {"steps_per_episode", c.steps_per_episode},
              {"minibatch", c.minibatch},
              {"base_action", {c.base_action.alpha_deg, c.base_action.beta_deg,
                               c.base_action.racket_vx}},
              {"warmup_noise_std", vec_json(c.warmup_noise_std)},
              {"explore_noise_std", vec_json(c.explore_noise_std)},
              {"explore_noise_decay", c.explore_noise_decay},
              {"post_opt_steps", c.post_opt_steps},
              {"post_opt_step", c.post_opt_step},
              {"mode", std::string(aprg::to_string(c.mode))},
              {"critic_lr", c.critic_lr},
              {"actor_lr", c.actor_lr},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"hidden_sizes", c.hidden_sizes}};
}

void merge_aprg(const json& j, aprg::AprgConfig& c) {
  maybe(j, "warmup_episodes", c.warmup_episodes);
  maybe(j, "total_episodes", c.total_episodes);
  maybe(j, "steps_per_episode", c.steps_per_episode);
  maybe(j, "minibatch", c.minibatch);
  if (j.contains("base_action")) {
    const auto& a = j.at("base_action");
    if (!a.is_array() || a.size() != 3) {
      throw std::invalid_argument("base_action must be [alpha_deg, beta_deg, racket_vx]");
    }
    c.base_action = env::Action(a[0].get<Scalar>(), a[1].get<Scalar>(), a[2].get<Scalar>());
  }
  maybe_vec(j, "warmup_noise_std", c.warmup_noise_std);
  maybe_vec(j, "explore_noise_std", c.explore_noise_std);
  maybe(j, "explore_noise_decay", c.explore_noise_decay);
  maybe(j, "post_opt_steps", c.post_opt_steps);
  maybe(j, "post_opt_step", c.post_opt_step);
  if (j.contains("mode")) c.mode = aprg::mode_from_string(j.at("mode").get<std::string>());
  maybe(j, "critic_lr", c.critic_lr);
  maybe(j, "actor_lr", c.actor_lr);
  maybe(j, "adam_beta1", c.adam_beta1);
  maybe(j, "adam_beta2", c.adam_beta2);
  maybe(j, "hidden_sizes", c.hidden_sizes);
}

}  // namespace

json experiment_to_json(const harness::ExperimentConfig& config) {
  json goals = json::array();
  for (const auto& g : config.goals) goals.push_back(json::array({g.x, g.y}));
  return json{{"scenario", config.scenario},
              {"env", env_json(config.env)},
              {"goals", goals},
              {"aprg", aprg_json(config.aprg)},
              {"seeds", config.seeds},
              {"out_dir", config.out_dir},
              {"short_window", config.short_window},
              {"long_window", config.long_window},
              {"jobs", config.jobs}};
}

void merge_experiment_json(const json& j, harness::ExperimentConfig& config) {
  maybe(j, "scenario", config.scenario);
  if (j.contains("env")) merge_env(j.at("env"), config.env);
  if (j.contains("goals")) {
    config.goals.clear();
    for (const auto& g : j.at("goals")) {
      if (!g.is_array() || g.size() != 2) throw std::invalid_argument("goal must be [x, y]");
      config.goals.push_back(env::Goal{g[0].get<Scalar>(), g[1].get<Scalar>()});
    }
    if (config.goals.empty()) throw std::invalid_argument("goals must not be empty");
  }
  if (j.contains("aprg")) merge_aprg(j.at("aprg"), config.aprg);
  maybe(j, "seeds", config.seeds);
  maybe(j, "out_dir", config.out_dir);
  maybe(j, "short_window", config.short_window);
  maybe(j, "long_window", config.long_window);
  maybe(j, "jobs", config.jobs);
}

void validate_experiment(const harness::ExperimentConfig& config) {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + what);
  };
  require((config.env.observation_noise_std.array() >= 0.0).all(),
          "observation noise std devs must be >= 0");
  require((config.env.action_noise_std.array() >= 0.0).all(),
          "action noise std devs must be >= 0");
  require(config.env.height_weight >= 0.0, "height_weight must be >= 0");
  require(config.env.physics.k_drag >= 0.0, "k_drag must be >= 0");
  require(config.env.physics.k_magnus >= 0.0, "k_magnus must be >= 0");
  require(config.env.physics.gravity > 0.0, "gravity must be > 0");
  require(config.env.sim_dt > 0.0, "sim_dt must be > 0");
  require(config.env.max_flight_time > 0.0, "max_flight_time must be > 0");
  require((config.env.state_hi - config.env.state_lo).minCoeff() > 0.0,
          "state bounds must have positive extent");
  require(config.aprg.warmup_episodes >= 0, "warmup_episodes must be >= 0");
  require(config.aprg.warmup_episodes <= config.aprg.total_episodes,
          "warmup_episodes must not exceed total_episodes");
  require(config.aprg.steps_per_episode >= 0, "steps_per_episode must be >= 0");
  require(config.aprg.minibatch >= 1, "minibatch must be >= 1");
  require(config.aprg.post_opt_steps >= 0, "post_opt_steps must be >= 0");
  require(config.aprg.post_opt_step > 0.0, "post_opt_step must be > 0");
  require((config.aprg.warmup_noise_std.array() >= 0.0).all(),
          "warmup noise std devs must be >= 0");
  require((config.aprg.explore_noise_std.array() >= 0.0).all(),
          "exploration noise std devs must be >= 0");
  require(!config.aprg.hidden_sizes.empty(), "hidden_sizes must not be empty");
  require(!config.goals.empty(), "goals must not be empty");
  require(!config.seeds.empty(), "seeds must not be empty");
  require(config.short_window >= 1 && config.long_window >= 1, "windows must be >= 1");
}

harness::ExperimentConfig load_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);
  harness::ExperimentConfig config =
      harness::scenario_defaults(j.value("scenario", std::string("serve")));
  merge_experiment_json(j, config);
  validate_experiment(config);
  return config;
}

void save_experiment_file(const harness::ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << experiment_to_json(config).dump(2) << "\n";
}

}  // namespace ttrl::config_io
