#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "optocool/presets.hpp"

namespace optocool {

// Run-shaping knobs that can come from a config file or from CLI flags.
// CLI values win over file values; anything unset falls back to the preset.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<int> steps;
  std::optional<int> n_traj;
  std::optional<std::string> mode;  // sample | argmax
  std::optional<double> eta;
  std::optional<double> dt;
  std::optional<double> reward_scale;
  std::optional<double> nbar;        // applied to every mode
  std::optional<double> action_max;  // rebuilds the uniform level grid
  std::optional<double> kappa;
  std::optional<std::string> regime;
  std::optional<int> checkpoint_every;
  std::optional<int> thermalize_trajectories;
  std::optional<double> thermalize_horizon;  // in units of 1/gamma
  std::optional<int> action_traces;          // trajectories whose actions are dumped
  std::optional<int> record_stride;          // energy-series row spacing, in steps
};

// Load overrides from a JSON config file. Keys mirror the CLI flags plus the
// physics knobs listed above; unknown keys are rejected so typos cannot pass
// silently.
inline RunOverrides load_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config parse error in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object: " + path.string());

  RunOverrides o;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") o.seed = value.get<std::uint64_t>();
      else if (key == "epochs") o.epochs = value.get<int>();
      else if (key == "batch") o.batch = value.get<int>();
      else if (key == "steps") o.steps = value.get<int>();
      else if (key == "n_traj") o.n_traj = value.get<int>();
      else if (key == "mode") o.mode = value.get<std::string>();
      else if (key == "eta") o.eta = value.get<double>();
      else if (key == "dt") o.dt = value.get<double>();
      else if (key == "reward_scale") o.reward_scale = value.get<double>();
      else if (key == "nbar") o.nbar = value.get<double>();
      else if (key == "action_max") o.action_max = value.get<double>();
      else if (key == "kappa") o.kappa = value.get<double>();
      else if (key == "regime") o.regime = value.get<std::string>();
      else if (key == "checkpoint_every") o.checkpoint_every = value.get<int>();
      else if (key == "thermalize_trajectories") o.thermalize_trajectories = value.get<int>();
      else if (key == "thermalize_horizon") o.thermalize_horizon = value.get<double>();
      else if (key == "action_traces") o.action_traces = value.get<int>();
      else if (key == "record_stride") o.record_stride = value.get<int>();
      else throw std::runtime_error("unknown config key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("config key '" + key + "' in " + path.string() + ": " + e.what());
    }
  }
  return o;
}

// file values first, CLI on top.
inline RunOverrides merge_overrides(RunOverrides file, const RunOverrides& cli) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(file.seed, cli.seed);
  take(file.epochs, cli.epochs);
  take(file.batch, cli.batch);
  take(file.steps, cli.steps);
  take(file.n_traj, cli.n_traj);
  take(file.mode, cli.mode);
  take(file.eta, cli.eta);
  take(file.dt, cli.dt);
  take(file.reward_scale, cli.reward_scale);
  take(file.nbar, cli.nbar);
  take(file.action_max, cli.action_max);
  take(file.kappa, cli.kappa);
  take(file.regime, cli.regime);
  take(file.checkpoint_every, cli.checkpoint_every);
  take(file.thermalize_trajectories, cli.thermalize_trajectories);
  take(file.thermalize_horizon, cli.thermalize_horizon);
  take(file.action_traces, cli.action_traces);
  take(file.record_stride, cli.record_stride);
  return file;
}

inline ExperimentPreset apply_overrides(ExperimentPreset preset, const RunOverrides& o) {
  if (o.epochs) preset.training.epochs = *o.epochs;
  if (o.batch) preset.training.batch_size = *o.batch;
  if (o.steps) preset.training.steps = *o.steps;
  if (o.eta) preset.training.eta = *o.eta;
  if (o.dt) preset.training.env.dt = *o.dt;
  if (o.reward_scale) preset.training.reward_scale = *o.reward_scale;
  if (o.kappa) preset.training.env.kappa = *o.kappa;
  if (o.nbar)
    for (auto& mode : preset.training.env.modes) mode.nbar = *o.nbar;
  if (o.regime) preset.training.env.actions.regime = regime_from_name(*o.regime);
  if (o.action_max)
    preset.training.env.actions = uniform_action_set(
        preset.training.env.actions.regime, *o.action_max,
        static_cast<int>(preset.training.env.actions.levels.size()));
  if (o.n_traj) preset.eval_trajectories = *o.n_traj;
  if (o.thermalize_trajectories) preset.thermalize_trajectories = *o.thermalize_trajectories;
  if (o.thermalize_horizon) preset.thermalize_horizon_gammas = *o.thermalize_horizon;
  return preset;
}

}  // namespace optocool
