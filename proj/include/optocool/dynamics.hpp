#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optocool/rng.hpp"

namespace optocool {

// Per-mode physical constants, all in units of the reference frequency.
// The meaning of g depends on the actuation regime: per-photon force factor
// (linear coupling), per-photon frequency factor (quadratic coupling), or
// the multiplication factor of a directly applied force.
struct ModeParams {
  double omega = 1.0;
  double gamma = 0.0;
  double nbar = 0.0;
  double g = 0.0;
};

inline void validate_modes(std::span<const ModeParams> modes) {
  if (modes.empty()) throw std::invalid_argument("mode list must not be empty");
  for (const auto& m : modes) {
    if (!(m.omega > 0.0)) throw std::invalid_argument("mode omega must be > 0");
    if (!(m.gamma >= 0.0)) throw std::invalid_argument("mode gamma must be >= 0");
    if (!(m.nbar >= 0.0)) throw std::invalid_argument("mode nbar must be >= 0");
  }
}

// Dimensionless quadratures (q_j, p_j) for all modes at one instant, with
// elapsed time in units of the inverse reference frequency.
struct ResonatorState {
  std::vector<double> q;
  std::vector<double> p;
  double t = 0.0;

  std::size_t mode_count() const { return q.size(); }
};

inline ResonatorState make_state(std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("resonator needs at least one mode");
  return ResonatorState{std::vector<double>(n_modes, 0.0), std::vector<double>(n_modes, 0.0), 0.0};
}

inline bool state_is_finite(const ResonatorState& s) {
  for (double v : s.q)
    if (!std::isfinite(v)) return false;
  for (double v : s.p)
    if (!std::isfinite(v)) return false;
  return std::isfinite(s.t);
}

struct Energies {
  std::vector<double> per_mode;
  double total = 0.0;
};

// Occupation-number normalized energy E_j = (q_j^2 + p_j^2) / 2.
inline double total_energy(const ResonatorState& s) {
  double total = 0.0;
  for (std::size_t j = 0; j < s.q.size(); ++j) total += 0.5 * (s.q[j] * s.q[j] + s.p[j] * s.p[j]);
  return total;
}

inline Energies energy(const ResonatorState& s) {
  Energies e;
  e.per_mode.resize(s.mode_count());
  for (std::size_t j = 0; j < s.q.size(); ++j) {
    e.per_mode[j] = 0.5 * (s.q[j] * s.q[j] + s.p[j] * s.p[j]);
    e.total += e.per_mode[j];
  }
  return e;
}

// Thermal initial conditions: per mode, the energy is drawn by inverting the
// Boltzmann CDF, E_j = -nbar_j ln(1 - b_j) with b_j uniform on [0,1), and the
// phase is uniform on the energy shell,
//   q_j = sqrt(2 E_j) cos(2 pi phi_j),  p_j = sqrt(2 E_j) sin(2 pi phi_j).
// Energies are occupation numbers, so the draw uses nbar directly.
// Consumes exactly two uniforms per mode, in (b_j, phi_j) order.
template <class Rng>
ResonatorState sample_initial_state(std::span<const ModeParams> modes, Rng& rng) {
  validate_modes(modes);
  ResonatorState s = make_state(modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double b = rng.uniform();
    const double phi = rng.uniform();
    const double e = -modes[j].nbar * std::log1p(-b);
    const double amplitude = std::sqrt(2.0 * e);
    s.q[j] = amplitude * std::cos(2.0 * std::numbers::pi * phi);
    s.p[j] = amplitude * std::sin(2.0 * std::numbers::pi * phi);
  }
  return s;
}

namespace detail {

// dq_j/dt = w_j p_j
// dp_j/dt = -(w_j + dw_j) q_j - gamma_j p_j + F_j
inline void drift_kernel(const double* q, const double* p, const ModeParams* modes,
                         const double* forces, const double* freq_shifts, std::size_t n,
                         double* dq, double* dp) {
  for (std::size_t j = 0; j < n; ++j) {
    dq[j] = modes[j].omega * p[j];
    dp[j] = -(modes[j].omega + freq_shifts[j]) * q[j] - modes[j].gamma * p[j] + forces[j];
  }
}

inline void check_lengths(const ResonatorState& s, std::span<const ModeParams> modes,
                          std::span<const double> forces, std::span<const double> freq_shifts,
                          const char* where) {
  const std::size_t n = s.mode_count();
  if (n == 0 || s.p.size() != n || modes.size() != n || forces.size() != n ||
      freq_shifts.size() != n)
    throw std::invalid_argument(std::string(where) + ": length mismatch across state and parameters");
}

}  // namespace detail

// Drift of the damped-oscillator equations under a zero-order-hold action:
// F_j is the linear-regime force, dw_j the quadratic-regime frequency shift.
inline void deterministic_drift(const ResonatorState& state, std::span<const ModeParams> modes,
                                std::span<const double> forces, std::span<const double> freq_shifts,
                                std::span<double> dq, std::span<double> dp) {
  detail::check_lengths(state, modes, forces, freq_shifts, "deterministic_drift");
  if (dq.size() != state.mode_count() || dp.size() != state.mode_count())
    throw std::invalid_argument("deterministic_drift: output length mismatch");
  detail::drift_kernel(state.q.data(), state.p.data(), modes.data(), forces.data(),
                       freq_shifts.data(), state.mode_count(), dq.data(), dp.data());
}

// Reusable stage buffers so stepping never allocates in hot loops.
struct Rk4Scratch {
  std::vector<double> k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p, tq, tp;

  void resize(std::size_t n) {
    if (k1q.size() == n) return;
    for (auto* v : {&k1q, &k1p, &k2q, &k2p, &k3q, &k3p, &k4q, &k4p, &tq, &tp}) v->resize(n);
  }
};

// Classical fourth-order Runge-Kutta step of the deterministic drift with the
// action held constant across the substeps. No noise is applied here.
inline void rk4_step_inplace(ResonatorState& s, std::span<const ModeParams> modes,
                             std::span<const double> forces, std::span<const double> freq_shifts,
                             double dt, Rk4Scratch& ws) {
  detail::check_lengths(s, modes, forces, freq_shifts, "rk4_step");
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");
  const std::size_t n = s.mode_count();
  ws.resize(n);

  double* q = s.q.data();
  double* p = s.p.data();
  const ModeParams* m = modes.data();
  const double* f = forces.data();
  const double* w = freq_shifts.data();

  detail::drift_kernel(q, p, m, f, w, n, ws.k1q.data(), ws.k1p.data());
  for (std::size_t j = 0; j < n; ++j) {
    ws.tq[j] = q[j] + 0.5 * dt * ws.k1q[j];
    ws.tp[j] = p[j] + 0.5 * dt * ws.k1p[j];
  }
  detail::drift_kernel(ws.tq.data(), ws.tp.data(), m, f, w, n, ws.k2q.data(), ws.k2p.data());
  for (std::size_t j = 0; j < n; ++j) {
    ws.tq[j] = q[j] + 0.5 * dt * ws.k2q[j];
    ws.tp[j] = p[j] + 0.5 * dt * ws.k2p[j];
  }
  detail::drift_kernel(ws.tq.data(), ws.tp.data(), m, f, w, n, ws.k3q.data(), ws.k3p.data());
  for (std::size_t j = 0; j < n; ++j) {
    ws.tq[j] = q[j] + dt * ws.k3q[j];
    ws.tp[j] = p[j] + dt * ws.k3p[j];
  }
  detail::drift_kernel(ws.tq.data(), ws.tp.data(), m, f, w, n, ws.k4q.data(), ws.k4p.data());

  const double sixth = dt / 6.0;
  for (std::size_t j = 0; j < n; ++j) {
    q[j] += sixth * (ws.k1q[j] + 2.0 * (ws.k2q[j] + ws.k3q[j]) + ws.k4q[j]);
    p[j] += sixth * (ws.k1p[j] + 2.0 * (ws.k2p[j] + ws.k3p[j]) + ws.k4p[j]);
    if (!std::isfinite(q[j]) || !std::isfinite(p[j]))
      throw std::runtime_error("rk4_step: non-finite state at t=" + std::to_string(s.t) +
                               ", mode " + std::to_string(j));
  }
  s.t += dt;
}

inline ResonatorState rk4_step(const ResonatorState& s, std::span<const ModeParams> modes,
                               std::span<const double> forces, std::span<const double> freq_shifts,
                               double dt) {
  ResonatorState out = s;
  Rk4Scratch ws;
  rk4_step_inplace(out, modes, forces, freq_shifts, dt, ws);
  return out;
}

// Euler-Maruyama thermal noise increment: one Wiener kick per mode on the
// momentum only,
//   p_j += sqrt((2 nbar_j + 1) gamma_j) * sqrt(dt) * N_j(0,1).
// Exactly one normal deviate is consumed per mode, in mode order, so the
// stream layout does not depend on parameter values.
template <class Rng>
void thermal_kick_inplace(ResonatorState& s, std::span<const ModeParams> modes, double dt,
                          Rng& rng) {
  const std::size_t n = s.mode_count();
  if (modes.size() != n) throw std::invalid_argument("thermal_kick: length mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("thermal_kick: dt must be > 0");
  const double sqrt_dt = std::sqrt(dt);
  for (std::size_t j = 0; j < n; ++j) {
    const double sigma = std::sqrt((2.0 * modes[j].nbar + 1.0) * modes[j].gamma);
    s.p[j] += sigma * sqrt_dt * rng.normal();
  }
}

template <class Rng>
ResonatorState thermal_kick(const ResonatorState& s, std::span<const ModeParams> modes, double dt,
                            Rng& rng) {
  ResonatorState out = s;
  thermal_kick_inplace(out, modes, dt, rng);
  return out;
}

// Single-step transition used by every rollout: deterministic RK4 drift under
// the held action, then the thermal Wiener increment on p.
template <class Rng>
void evolve_step_inplace(ResonatorState& s, std::span<const ModeParams> modes,
                         std::span<const double> forces, std::span<const double> freq_shifts,
                         double dt, Rng& rng, Rk4Scratch& ws) {
  rk4_step_inplace(s, modes, forces, freq_shifts, dt, ws);
  thermal_kick_inplace(s, modes, dt, rng);
}

template <class Rng>
ResonatorState evolve_step(const ResonatorState& s, std::span<const ModeParams> modes,
                           std::span<const double> forces, std::span<const double> freq_shifts,
                           double dt, Rng& rng) {
  ResonatorState out = s;
  Rk4Scratch ws;
  evolve_step_inplace(out, modes, forces, freq_shifts, dt, rng, ws);
  return out;
}

}  // namespace optocool
