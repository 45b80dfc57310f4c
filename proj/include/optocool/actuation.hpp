#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optocool/dynamics.hpp"

namespace optocool {

// How an action level turns into a physical drive:
//   linear_cavity     level is a drive amplitude; the cavity field follows it
//                     and its intensity pushes every mode (radiation pressure).
//   quadratic_cavity  level is a drive amplitude; the cavity intensity shifts
//                     every mode frequency (spring-constant modulation).
//   direct_force      level is the intensity itself; forces bypass the cavity
//                     (free-space kicking).
//   direct_quadratic  level is the intensity itself; frequency shifts bypass
//                     the cavity.
enum class Regime { linear_cavity, quadratic_cavity, direct_force, direct_quadratic };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::linear_cavity: return "linear_cavity";
    case Regime::quadratic_cavity: return "quadratic_cavity";
    case Regime::direct_force: return "direct_force";
    case Regime::direct_quadratic: return "direct_quadratic";
  }
  return "unknown";
}

inline Regime regime_from_name(const std::string& name) {
  if (name == "linear_cavity") return Regime::linear_cavity;
  if (name == "quadratic_cavity") return Regime::quadratic_cavity;
  if (name == "direct_force") return Regime::direct_force;
  if (name == "direct_quadratic") return Regime::direct_quadratic;
  throw std::invalid_argument("unknown regime name: " + name);
}

inline bool regime_uses_cavity(Regime r) {
  return r == Regime::linear_cavity || r == Regime::quadratic_cavity;
}

inline bool regime_is_quadratic(Regime r) {
  return r == Regime::quadratic_cavity || r == Regime::direct_quadratic;
}

// The finite action menu available to the policy. levels[0] is always the
// inert action; the remaining entries grow strictly.
struct ActionSet {
  std::vector<double> levels;
  Regime regime = Regime::direct_force;
};

inline void validate_action_set(const ActionSet& set) {
  if (set.levels.empty()) throw std::invalid_argument("action set must have at least one level");
  if (set.levels.front() != 0.0) throw std::invalid_argument("levels[0] must be 0");
  for (std::size_t k = 1; k < set.levels.size(); ++k)
    if (!(set.levels[k] > set.levels[k - 1]))
      throw std::invalid_argument("action levels must be strictly increasing");
}

// Uniform grid levels[k] = k/(count-1) * max_level, k = 0..count-1.
inline ActionSet uniform_action_set(Regime regime, double max_level, int count = 11) {
  if (count < 2) throw std::invalid_argument("action set needs at least two levels");
  if (!(max_level > 0.0)) throw std::invalid_argument("max_level must be > 0");
  ActionSet set;
  set.regime = regime;
  set.levels.resize(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    set.levels[static_cast<std::size_t>(k)] = max_level * static_cast<double>(k) / (count - 1);
  return set;
}

inline double action_to_drive(int action_index, const ActionSet& set) {
  if (action_index < 0 || static_cast<std::size_t>(action_index) >= set.levels.size())
    throw std::out_of_range("action index " + std::to_string(action_index) +
                            " outside action set of size " + std::to_string(set.levels.size()));
  return set.levels[static_cast<std::size_t>(action_index)];
}

// Classical intracavity amplitude. Resonant real drive keeps alpha real, so
// the intensity is alpha^2.
struct CavityState {
  double alpha = 0.0;
  double kappa = 1.0;
  double drive = 0.0;
};

inline void validate_cavity(const CavityState& c) {
  if (!(c.kappa > 0.0)) throw std::invalid_argument("cavity kappa must be > 0");
  if (!std::isfinite(c.alpha)) throw std::invalid_argument("cavity alpha must be finite");
}

// alpha' = -kappa alpha + drive is linear, so the step uses the exact
// solution instead of a numerical integrator:
//   alpha <- alpha e^{-kappa dt} + (drive/kappa)(1 - e^{-kappa dt}).
inline CavityState cavity_step(CavityState cavity, double drive, double dt) {
  validate_cavity(cavity);
  if (!(dt > 0.0)) throw std::invalid_argument("cavity_step: dt must be > 0");
  const double decay = std::exp(-cavity.kappa * dt);
  cavity.alpha = cavity.alpha * decay + (drive / cavity.kappa) * (1.0 - decay);
  cavity.drive = drive;
  return cavity;
}

// Drive amplitude produced by an input laser power through the left mirror:
// eps = sqrt(2 P0 kappa_L / (hbar omega_c)). Unit conversion only; the
// default hbar = 1 matches the dimensionless convention used elsewhere.
inline double power_to_drive(double power, double kappa_left, double omega_cavity,
                             double hbar = 1.0) {
  if (power < 0.0 || kappa_left < 0.0)
    throw std::invalid_argument("power_to_drive: power and kappa_left must be >= 0");
  if (!(omega_cavity > 0.0) || !(hbar > 0.0))
    throw std::invalid_argument("power_to_drive: omega_cavity and hbar must be > 0");
  return std::sqrt(2.0 * power * kappa_left / (hbar * omega_cavity));
}

// Radiation-pressure forces F_j = -g_j * intensity. One-sided kicking: all
// forces point in -q for any non-negative intensity.
inline void linear_forces(double intensity, std::span<const ModeParams> modes,
                          std::span<double> out) {
  if (!(intensity >= 0.0)) throw std::invalid_argument("linear_forces: intensity must be >= 0");
  if (out.size() != modes.size()) throw std::invalid_argument("linear_forces: length mismatch");
  for (std::size_t j = 0; j < modes.size(); ++j) out[j] = -modes[j].g * intensity;
}

// Spring-constant modulation dw_j = 2 g_j * intensity.
inline void quadratic_shifts(double intensity, std::span<const ModeParams> modes,
                             std::span<double> out) {
  if (!(intensity >= 0.0)) throw std::invalid_argument("quadratic_shifts: intensity must be >= 0");
  if (out.size() != modes.size()) throw std::invalid_argument("quadratic_shifts: length mismatch");
  for (std::size_t j = 0; j < modes.size(); ++j) out[j] = 2.0 * modes[j].g * intensity;
}

// What the policy sees. A single detected optical quadrature carries only the
// collective coordinate, so for several modes the observation is the
// projection (Q, Qdot) = (sum_j q_j, sum_j w_j p_j); for one mode this
// reduces to (q, qdot).
struct Observation {
  std::array<double, 2> values{};
};

inline Observation observe(const ResonatorState& state, std::span<const ModeParams> modes) {
  if (modes.size() != state.mode_count()) throw std::invalid_argument("observe: length mismatch");
  Observation obs;
  for (std::size_t j = 0; j < modes.size(); ++j) {
    obs.values[0] += state.q[j];
    obs.values[1] += modes[j].omega * state.p[j];
  }
  return obs;
}

}  // namespace optocool
