#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "optocool/actuation.hpp"
#include "optocool/dynamics.hpp"

namespace optocool {

// Everything the control loop needs about the physical system: the modes,
// the action menu, the cavity loss rate (for the cavity-filtered regimes)
// and the control time step.
struct Environment {
  std::vector<ModeParams> modes;
  ActionSet actions;
  double kappa = 10.0;
  double dt = 0.05;
};

inline void validate_environment(const Environment& env) {
  validate_modes(env.modes);
  validate_action_set(env.actions);
  if (regime_uses_cavity(env.actions.regime) && !(env.kappa > 0.0))
    throw std::invalid_argument("environment: kappa must be > 0 for cavity regimes");
  if (!(env.dt > 0.0)) throw std::invalid_argument("environment: dt must be > 0");
}

inline CavityState initial_cavity(const Environment& env) {
  return CavityState{0.0, env.kappa, 0.0};
}

struct EnvWorkspace {
  Rk4Scratch rk4;
  std::vector<double> forces;
  std::vector<double> shifts;

  void resize(std::size_t n) {
    forces.resize(n);
    shifts.resize(n);
  }
};

// One control step over [t, t + dt]. The chosen level is held constant
// (zero-order hold). In the cavity regimes the field is updated first --
// in the bad-cavity limit it settles much faster than the mechanics -- and
// its intensity drives the mechanical step; in the direct regimes the level
// is the intensity itself and the cavity is untouched.
template <class Rng>
void environment_step(const Environment& env, ResonatorState& state, CavityState& cavity,
                      int action_index, Rng& rng, EnvWorkspace& ws) {
  const double level = action_to_drive(action_index, env.actions);
  double intensity = level;
  if (regime_uses_cavity(env.actions.regime)) {
    cavity = cavity_step(cavity, level, env.dt);
    intensity = cavity.alpha * cavity.alpha;
  }

  const std::size_t n = state.mode_count();
  ws.resize(n);
  if (regime_is_quadratic(env.actions.regime)) {
    std::fill(ws.forces.begin(), ws.forces.end(), 0.0);
    quadratic_shifts(intensity, env.modes, ws.shifts);
  } else {
    linear_forces(intensity, env.modes, ws.forces);
    std::fill(ws.shifts.begin(), ws.shifts.end(), 0.0);
  }
  evolve_step_inplace(state, env.modes, ws.forces, ws.shifts, env.dt, rng, ws.rk4);
}

}  // namespace optocool
