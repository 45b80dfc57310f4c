#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "optocool/reinforce.hpp"

namespace optocool {

// A full experiment bundle: physics, action menu, network and training
// parameters, plus the default shapes of the thermalization and evaluation
// runs that belong to it.
struct ExperimentPreset {
  std::string name;
  TrainingConfig training;
  int eval_trajectories = 4000;
  int eval_steps = 20000;
  int thermalize_trajectories = 1000;
  double thermalize_horizon_gammas = 5.0;  // run length in units of 1/gamma of mode 1
};

// Free thermalization of a single initially cold mode: no coupling, the
// bath drives the mode up to its equilibrium occupancy.
inline ExperimentPreset preset_thermalize() {
  ExperimentPreset p;
  p.name = "thermalize";
  p.training.env.modes = {ModeParams{1.0, 4e-5, 100.0, 0.0}};
  p.training.env.actions = uniform_action_set(Regime::direct_force, 1.0, 11);
  p.training.env.dt = 0.05;
  p.training.layer_sizes = {2, 60, 60, 11};
  p.training.eta = 8e-5;
  p.thermalize_trajectories = 1000;
  p.thermalize_horizon_gammas = 5.0;
  return p;
}

// Single-mode parametric cooling: the action modulates the spring constant
// through the intensity, with the level grid spanning intensities up to
// 0.5e7 so the largest frequency shift is 2 g u_max = 0.1. The intensity is
// applied directly by default; switch the regime to quadratic_cavity to
// route it through the cavity field instead.
inline ExperimentPreset preset_single_quadratic() {
  ExperimentPreset p;
  p.name = "single_quadratic";
  p.training.env.modes = {ModeParams{1.0, 4e-5, 100.0, 1e-8}};
  p.training.env.actions = uniform_action_set(Regime::direct_quadratic, 0.5e7, 11);
  p.training.env.kappa = 10.0;
  p.training.env.dt = 0.05;
  p.training.layer_sizes = {2, 60, 60, 11};
  p.training.batch_size = 80;
  p.training.epochs = 400;
  p.training.steps = 4000;
  p.training.eta = 8e-5;
  p.training.reward_scale = 1.0;
  return p;
}

// Simultaneous cooling of four modes by one shared force: the modes differ
// in frequency, damping and force multiplication factor, but all kicks are
// derived from the same action amplitude. The policy only sees the
// collective coordinate, so the problem is partially observable.
inline ExperimentPreset preset_four_linear() {
  ExperimentPreset p;
  p.name = "four_linear";
  p.training.env.modes = {
      ModeParams{1.0, 4e-5, 100.0, 0.3},
      ModeParams{0.8, 3e-5, 100.0, 0.2},
      ModeParams{1.2, 5e-5, 100.0, 0.4},
      ModeParams{0.6, 2e-5, 100.0, 0.3},
  };
  p.training.env.actions = uniform_action_set(Regime::direct_force, 1.0, 11);
  p.training.env.kappa = 10.0;
  p.training.env.dt = 0.05;
  p.training.layer_sizes = {2, 100, 100, 11};
  p.training.batch_size = 80;
  p.training.epochs = 400;
  p.training.steps = 4000;
  p.training.eta = 6e-4;
  p.training.reward_scale = 1.0;
  return p;
}

inline std::vector<std::string> preset_names() {
  return {"thermalize", "single_quadratic", "four_linear"};
}

inline ExperimentPreset preset_by_name(std::string_view name) {
  if (name == "thermalize") return preset_thermalize();
  if (name == "single_quadratic") return preset_single_quadratic();
  if (name == "four_linear") return preset_four_linear();
  throw std::invalid_argument("unknown preset: " + std::string(name) +
                              " (expected thermalize|single_quadratic|four_linear)");
}

}  // namespace optocool
