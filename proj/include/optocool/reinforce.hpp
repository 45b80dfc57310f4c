#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "optocool/environment.hpp"
#include "optocool/parallel.hpp"
#include "optocool/policy.hpp"
#include "optocool/rng.hpp"

namespace optocool {

// Reward for one transition: the gap to the starting energy, paid only on
// steps that lowered the energy. The step function is taken as 0 at 0, so an
// unchanged energy earns nothing.
inline double step_reward(double initial_energy, double energy_before, double energy_after) {
  return energy_after < energy_before ? initial_energy - energy_after : 0.0;
}

// Everything recorded along one rollout.
struct TrajectoryRecord {
  std::vector<Observation> observations;
  std::vector<int> actions;
  std::vector<double> logprobs;
  std::vector<double> rewards;
  double total_reward = 0.0;
  ResonatorState final_state;
  double initial_energy = 0.0;
};

enum class ActionChoice { sample, argmax };

inline const char* action_choice_name(ActionChoice c) {
  return c == ActionChoice::sample ? "sample" : "argmax";
}

inline ActionChoice action_choice_from_name(const std::string& name) {
  if (name == "sample") return ActionChoice::sample;
  if (name == "argmax") return ActionChoice::argmax;
  throw std::invalid_argument("unknown action choice: " + name + " (expected sample|argmax)");
}

// Per-step view handed to trajectory observers.
struct StepInfo {
  int step = 0;
  Observation obs;
  int action = 0;
  double log_prob = 0.0;
  double drive = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double reward = 0.0;
  const ResonatorState* state = nullptr;
  const CavityState* cavity = nullptr;
};

struct TrajectorySummary {
  ResonatorState initial_state;
  ResonatorState final_state;
  double initial_energy = 0.0;
  double total_reward = 0.0;
  double max_energy = 0.0;
};

// Core control loop shared by training rollouts and streaming evaluation:
// draw a thermal initial state, then per step observe -> forward -> choose
// action -> apply it through the environment -> score the energy change.
// The observer receives every step; it may be a no-op.
template <class Rng, class StepObserver>
TrajectorySummary run_policy_trajectory(const PolicyParams& params, const Environment& env,
                                        int steps, Rng& rng, ActionChoice choice,
                                        StepObserver&& observer) {
  validate_environment(env);
  if (steps < 1) throw std::invalid_argument("trajectory needs at least one step");
  if (static_cast<std::size_t>(params.layer_sizes.back()) != env.actions.levels.size())
    throw std::invalid_argument("policy output size does not match the action set");

  TrajectorySummary summary;
  ResonatorState state = sample_initial_state<Rng>(env.modes, rng);
  CavityState cavity = initial_cavity(env);
  summary.initial_state = state;
  summary.initial_energy = total_energy(state);
  summary.max_energy = summary.initial_energy;

  PolicyWorkspace ws;
  EnvWorkspace env_ws;
  ActionDistribution dist;
  double energy_before = summary.initial_energy;

  for (int step = 0; step < steps; ++step) {
    const Observation obs = observe(state, env.modes);
    forward_into(params, obs, ws);
    dist.probs = ws.probs;  // reuse allocation of dist across steps
    const int action =
        choice == ActionChoice::sample ? sample_action(dist, rng) : argmax_action(dist);
    const double logp = log_prob(ws, action);

    try {
      environment_step(env, state, cavity, action, rng, env_ws);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("trajectory aborted at step " + std::to_string(step) + ": " +
                               e.what());
    }

    const double energy_after = total_energy(state);
    const double reward = step_reward(summary.initial_energy, energy_before, energy_after);
    summary.total_reward += reward;
    summary.max_energy = std::max(summary.max_energy, energy_after);

    StepInfo info;
    info.step = step;
    info.obs = obs;
    info.action = action;
    info.log_prob = logp;
    info.drive = env.actions.levels[static_cast<std::size_t>(action)];
    info.energy_before = energy_before;
    info.energy_after = energy_after;
    info.reward = reward;
    info.state = &state;
    info.cavity = &cavity;
    observer(info);

    energy_before = energy_after;
  }
  summary.final_state = std::move(state);
  return summary;
}

// Full-record rollout used for training batches.
template <class Rng>
TrajectoryRecord rollout(const PolicyParams& params, const Environment& env, int steps, Rng& rng,
                         ActionChoice choice) {
  TrajectoryRecord record;
  record.observations.reserve(static_cast<std::size_t>(steps));
  record.actions.reserve(static_cast<std::size_t>(steps));
  record.logprobs.reserve(static_cast<std::size_t>(steps));
  record.rewards.reserve(static_cast<std::size_t>(steps));
  auto summary = run_policy_trajectory(params, env, steps, rng, choice, [&](const StepInfo& s) {
    record.observations.push_back(s.obs);
    record.actions.push_back(s.action);
    record.logprobs.push_back(s.log_prob);
    record.rewards.push_back(s.reward);
  });
  record.total_reward = summary.total_reward;
  record.final_state = std::move(summary.final_state);
  record.initial_energy = summary.initial_energy;
  return record;
}

// Batch policy-gradient estimate
//   (1/B) sum_i (R_i - b) sum_t d/dtheta ln pi(a_t | s_t)
// as an ascent direction; the learning rate is applied by the optimizer.
// Per-trajectory sums are computed in parallel and reduced in trajectory
// order, so the result does not depend on the worker count.
inline LayerStack batch_gradient(std::span<const TrajectoryRecord> batch,
                                 const PolicyParams& params, double baseline) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  if (!std::isfinite(baseline)) throw std::invalid_argument("batch_gradient: baseline not finite");

  std::vector<LayerStack> per_trajectory(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const TrajectoryRecord& record = batch[i];
    LayerStack grad = zero_stack(params.layer_sizes);
    PolicyWorkspace ws;
    for (std::size_t t = 0; t < record.actions.size(); ++t)
      accumulate_logprob_grad(params, record.observations[t], record.actions[t], 1.0, ws, grad);
    stack_scale(grad, record.total_reward - baseline);
    per_trajectory[i] = std::move(grad);
  });

  LayerStack total = zero_stack(params.layer_sizes);
  for (const auto& grad : per_trajectory) stack_axpy(total, 1.0, grad);
  stack_scale(total, 1.0 / static_cast<double>(batch.size()));
  return total;
}

// Running-average baseline: the value used in epoch n is the mean of the
// epoch-mean rewards of all completed epochs, and 0 for the first epoch.
struct BaselineState {
  std::vector<double> epoch_mean_rewards;
};

inline double baseline_value(const BaselineState& state) {
  if (state.epoch_mean_rewards.empty()) return 0.0;
  double sum = 0.0;
  for (double r : state.epoch_mean_rewards) sum += r;
  return sum / static_cast<double>(state.epoch_mean_rewards.size());
}

// Returns the baseline for the epoch whose mean reward is being recorded,
// then appends that mean to the history.
inline double update_baseline(BaselineState& state, double epoch_mean_reward) {
  const double b = baseline_value(state);
  state.epoch_mean_rewards.push_back(epoch_mean_reward);
  return b;
}

struct TrainingConfig {
  Environment env;
  std::vector<int> layer_sizes{2, 60, 60, 11};
  int batch_size = 80;
  int epochs = 400;
  int steps = 4000;
  double eta = 8e-5;
  double reward_scale = 1.0;
};

inline void validate_training(const TrainingConfig& cfg) {
  validate_environment(cfg.env);
  validate_layer_sizes(cfg.layer_sizes);
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (static_cast<std::size_t>(cfg.layer_sizes.back()) != cfg.env.actions.levels.size())
    throw std::invalid_argument("output layer size must match the action set");
}

// Stream layout under one master seed: stream 0 initializes the parameters,
// stream 1 + epoch * batch_size + i drives trajectory i of that epoch.
// Resumed runs therefore regenerate exactly the trajectories the
// uninterrupted run would have seen.
constexpr std::uint64_t kParamInitStream = 0;

inline std::uint64_t trajectory_stream(int epoch, int batch_size, int index) {
  return 1ull + static_cast<std::uint64_t>(epoch) * static_cast<std::uint64_t>(batch_size) +
         static_cast<std::uint64_t>(index);
}

struct EpochStats {
  int epoch = 0;
  double mean_total_reward = 0.0;
  double baseline = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochStats> curve;
  BaselineState baseline;
};

// Raised when a parameter update produces non-finite entries.
struct TrainingDiverged : std::runtime_error {
  int epoch;
  explicit TrainingDiverged(int at_epoch)
      : std::runtime_error("training diverged: non-finite parameters after epoch " +
                           std::to_string(at_epoch)),
        epoch(at_epoch) {}
};

using EpochCallback =
    std::function<void(const EpochStats&, const PolicyParams&, const BaselineState&)>;

// Epoch loop: one parameter update per batch of sampled rollouts, with the
// running-average baseline. start_epoch/params/baseline allow resuming from
// a checkpoint; the result is identical to an uninterrupted run because all
// randomness is derived from (master_seed, absolute epoch index).
inline TrainResult train_from(const TrainingConfig& cfg, std::uint64_t master_seed,
                              PolicyParams params, BaselineState baseline, int start_epoch,
                              const EpochCallback& on_epoch = {}) {
  validate_training(cfg);
  if (start_epoch < 0 || start_epoch > cfg.epochs)
    throw std::invalid_argument("start_epoch out of range");

  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(cfg.epochs - start_epoch));

  std::vector<TrajectoryRecord> records(static_cast<std::size_t>(cfg.batch_size));
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double b = baseline_value(baseline);

    parallel_for(records.size(), [&](std::size_t i) {
      Rng rng(master_seed, trajectory_stream(epoch, cfg.batch_size, static_cast<int>(i)));
      records[i] = rollout(params, cfg.env, cfg.steps, rng, ActionChoice::sample);
    });

    double mean_reward = 0.0;
    for (const auto& record : records) mean_reward += record.total_reward;
    mean_reward /= static_cast<double>(cfg.batch_size);

    LayerStack ascent = batch_gradient(records, params, b);
    if (cfg.reward_scale != 1.0) stack_scale(ascent, cfg.reward_scale);
    adam_update_inplace(params, ascent, cfg.eta);
    if (!stack_is_finite(params.layers)) throw TrainingDiverged(epoch);

    update_baseline(baseline, mean_reward);
    result.curve.push_back(EpochStats{epoch, mean_reward, b});
    if (on_epoch) on_epoch(result.curve.back(), params, baseline);
  }
  result.params = std::move(params);
  result.baseline = std::move(baseline);
  return result;
}

inline TrainResult train(const TrainingConfig& cfg, std::uint64_t master_seed,
                         const EpochCallback& on_epoch = {}) {
  validate_training(cfg);
  Rng init_rng(master_seed, kParamInitStream);
  return train_from(cfg, master_seed, init_params(cfg.layer_sizes, init_rng), BaselineState{}, 0,
                    on_epoch);
}

}  // namespace optocool
