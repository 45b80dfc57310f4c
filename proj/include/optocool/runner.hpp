#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optocool/checkpoint.hpp"
#include "optocool/csv.hpp"
#include "optocool/parallel.hpp"
#include "optocool/presets.hpp"
#include "optocool/reinforce.hpp"

namespace optocool {

// Trajectories are processed in fixed groups of this size. Groups run in
// parallel, trajectories inside a group sequentially, and group accumulators
// are reduced in group order -- so ensemble sums do not depend on the number
// of worker threads.
inline constexpr std::size_t kEnsembleGroup = 16;

namespace detail {

inline std::string run_comment(const std::string& command, const std::string& preset,
                               std::uint64_t seed) {
  return "command=" + command + " preset=" + preset + " seed=" + std::to_string(seed);
}

inline void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           const ExperimentPreset& preset, std::uint64_t seed,
                           const nlohmann::json& extra, const std::vector<std::string>& files) {
  nlohmann::json j;
  j["command"] = command;
  j["preset"] = preset.name;
  j["seed"] = seed;
  j["dt"] = preset.training.env.dt;
  j["regime"] = regime_name(preset.training.env.actions.regime);
  j["action_levels"] = preset.training.env.actions.levels;
  j["kappa"] = preset.training.env.kappa;
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : preset.training.env.modes)
    modes.push_back({{"omega", m.omega}, {"gamma", m.gamma}, {"nbar", m.nbar}, {"g", m.g}});
  j["modes"] = modes;
  j["files"] = files;
  for (const auto& [key, value] : extra.items()) j[key] = value;

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

inline std::string zero_padded(int value, int width) {
  std::ostringstream oss;
  oss << std::setw(width) << std::setfill('0') << value;
  return oss.str();
}

}  // namespace detail

struct ThermalizeSummary {
  std::vector<double> times;
  std::vector<double> mean_energy;
  std::vector<double> final_energies;
  double final_mean_energy = 0.0;
  int trajectories = 0;
  int steps = 0;
};

// Free thermalization ensemble: every trajectory starts at the phase-space
// origin and evolves under damping and thermal noise only. Writes the
// ensemble-mean energy series, the final phase-space scatter and the final
// energy histogram.
inline ThermalizeSummary run_thermalize(const ExperimentPreset& preset, std::uint64_t seed,
                                        const std::filesystem::path& out_dir,
                                        int record_stride = 0) {
  const auto& env = preset.training.env;
  validate_modes(env.modes);
  const std::size_t n_modes = env.modes.size();
  const int n_traj = preset.thermalize_trajectories;
  if (n_traj < 1) throw std::invalid_argument("thermalize needs at least one trajectory");

  // horizon is given in units of 1/gamma of the first mode; without damping
  // there is no relaxation scale, so fall back to a fixed step count
  const double gamma0 = env.modes[0].gamma;
  const int steps =
      gamma0 > 0.0 ? static_cast<int>(std::llround(preset.thermalize_horizon_gammas /
                                                   (gamma0 * env.dt)))
                   : 20000;
  const int stride = record_stride > 0 ? record_stride : std::max(1, steps / 2000);
  const std::size_t slots = static_cast<std::size_t>(steps / stride) + 1;

  std::filesystem::create_directories(out_dir);

  const std::size_t n_groups =
      (static_cast<std::size_t>(n_traj) + kEnsembleGroup - 1) / kEnsembleGroup;
  std::vector<std::vector<double>> group_sums(n_groups);
  std::vector<double> final_energies(static_cast<std::size_t>(n_traj));
  std::vector<double> final_q(static_cast<std::size_t>(n_traj) * n_modes);
  std::vector<double> final_p(static_cast<std::size_t>(n_traj) * n_modes);

  parallel_for(n_groups, [&](std::size_t g) {
    auto& sums = group_sums[g];
    sums.assign(slots, 0.0);
    const std::size_t begin = g * kEnsembleGroup;
    const std::size_t end =
        std::min<std::size_t>(begin + kEnsembleGroup, static_cast<std::size_t>(n_traj));
    std::vector<double> zeros(n_modes, 0.0);
    Rk4Scratch scratch;
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(seed, 1 + i);
      ResonatorState state = make_state(n_modes);
      sums[0] += total_energy(state);
      for (int s = 1; s <= steps; ++s) {
        evolve_step_inplace(state, env.modes, zeros, zeros, env.dt, rng, scratch);
        if (s % stride == 0) sums[static_cast<std::size_t>(s / stride)] += total_energy(state);
      }
      final_energies[i] = total_energy(state);
      for (std::size_t j = 0; j < n_modes; ++j) {
        final_q[i * n_modes + j] = state.q[j];
        final_p[i * n_modes + j] = state.p[j];
      }
    }
  });

  ThermalizeSummary summary;
  summary.trajectories = n_traj;
  summary.steps = steps;
  summary.times.resize(slots);
  summary.mean_energy.assign(slots, 0.0);
  for (std::size_t r = 0; r < slots; ++r)
    summary.times[r] = static_cast<double>(r) * stride * env.dt;
  for (const auto& sums : group_sums)
    for (std::size_t r = 0; r < slots; ++r) summary.mean_energy[r] += sums[r];
  for (double& e : summary.mean_energy) e /= static_cast<double>(n_traj);
  summary.final_energies = final_energies;
  summary.final_mean_energy = summary.mean_energy.back();

  const std::string comment = detail::run_comment("thermalize", preset.name, seed);
  {
    CsvWriter csv(out_dir / "energy_vs_time.csv", comment, {"t", "mean_total_energy"});
    for (std::size_t r = 0; r < slots; ++r) csv.row({summary.times[r], summary.mean_energy[r]});
    csv.close();
  }
  {
    CsvWriter csv(out_dir / "phase_space_final.csv", comment, {"traj_id", "mode", "q", "p"});
    for (int i = 0; i < n_traj; ++i)
      for (std::size_t j = 0; j < n_modes; ++j)
        csv.row({static_cast<double>(i), static_cast<double>(j + 1),
                 final_q[static_cast<std::size_t>(i) * n_modes + j],
                 final_p[static_cast<std::size_t>(i) * n_modes + j]});
    csv.close();
  }
  {
    CsvWriter csv(out_dir / "energy_hist_final.csv", comment, {"traj_id", "total_energy"});
    for (int i = 0; i < n_traj; ++i)
      csv.row({static_cast<double>(i), final_energies[static_cast<std::size_t>(i)]});
    csv.close();
  }
  detail::write_manifest(out_dir, "thermalize", preset, seed,
                         {{"trajectories", n_traj},
                          {"steps", steps},
                          {"record_stride", stride},
                          {"horizon_gammas", preset.thermalize_horizon_gammas}},
                         {"energy_vs_time.csv", "phase_space_final.csv", "energy_hist_final.csv",
                          "manifest.json"});
  return summary;
}

struct TrainingSummary {
  int epochs_completed = 0;
  std::vector<EpochStats> curve;
  std::filesystem::path checkpoint_path;
  std::filesystem::path curve_path;
};

// Full training run with periodic checkpointing and a learning-curve file.
// When resuming, the master seed comes from the checkpoint; a conflicting
// --seed is an error rather than a silent override. On divergence the last
// periodic checkpoint stays on disk and the exception propagates.
inline TrainingSummary run_training(const ExperimentPreset& preset,
                                    std::optional<std::uint64_t> seed_flag,
                                    const std::filesystem::path& out_dir,
                                    const std::optional<std::filesystem::path>& resume_from = {},
                                    int checkpoint_every = 50) {
  const TrainingConfig& cfg = preset.training;
  validate_training(cfg);
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
  std::filesystem::create_directories(out_dir);

  PolicyParams params;
  BaselineState baseline;
  int start_epoch = 0;
  std::uint64_t master_seed = seed_flag.value_or(42);

  if (resume_from) {
    Checkpoint ckpt = load_checkpoint(*resume_from);
    if (ckpt.params.layer_sizes != cfg.layer_sizes)
      throw std::runtime_error("checkpoint layer sizes do not match the preset");
    if (seed_flag && *seed_flag != ckpt.master_seed)
      throw std::runtime_error("--seed conflicts with the master seed stored in the checkpoint");
    master_seed = ckpt.master_seed;
    params = std::move(ckpt.params);
    baseline = std::move(ckpt.baseline);
    start_epoch = static_cast<int>(ckpt.epoch);
    if (start_epoch > cfg.epochs)
      throw std::runtime_error("checkpoint is already past the requested epoch count");
  } else {
    Rng init_rng(master_seed, kParamInitStream);
    params = init_params(cfg.layer_sizes, init_rng);
  }

  detail::write_manifest(
      out_dir, "train", preset, master_seed,
      {{"epochs", cfg.epochs},
       {"batch_size", cfg.batch_size},
       {"steps", cfg.steps},
       {"eta", cfg.eta},
       {"reward_scale", cfg.reward_scale},
       {"layer_sizes", cfg.layer_sizes},
       {"start_epoch", start_epoch},
       {"checkpoint_every", checkpoint_every}},
      {"learning_curve.csv", "checkpoint.ckpt", "manifest.json"});

  TrainingSummary summary;
  summary.curve_path = out_dir / "learning_curve.csv";
  summary.checkpoint_path = out_dir / "checkpoint.ckpt";

  CsvWriter curve_csv(summary.curve_path, detail::run_comment("train", preset.name, master_seed),
                      {"epoch", "mean_total_reward", "baseline"});

  auto on_epoch = [&](const EpochStats& stats, const PolicyParams& p, const BaselineState& bl) {
    curve_csv.row({static_cast<double>(stats.epoch), stats.mean_total_reward, stats.baseline});
    if ((stats.epoch + 1) % checkpoint_every == 0 && stats.epoch + 1 < cfg.epochs) {
      Checkpoint ckpt{1, master_seed, static_cast<std::int64_t>(stats.epoch + 1), p, bl};
      save_checkpoint(out_dir / ("checkpoint_epoch" + detail::zero_padded(stats.epoch + 1, 6) +
                                 ".ckpt"),
                      ckpt);
    }
  };

  TrainResult result = train_from(cfg, master_seed, std::move(params), std::move(baseline),
                                  start_epoch, on_epoch);
  curve_csv.close();

  Checkpoint final_ckpt{1, master_seed, static_cast<std::int64_t>(cfg.epochs), result.params,
                        result.baseline};
  save_checkpoint(summary.checkpoint_path, final_ckpt);

  summary.epochs_completed = cfg.epochs;
  summary.curve = std::move(result.curve);
  return summary;
}

struct EvaluationSummary {
  int trajectories = 0;
  int steps = 0;
  double initial_mean_energy = 0.0;
  double final_mean_energy = 0.0;
  std::vector<double> per_mode_initial_mean;
  std::vector<double> per_mode_final_mean;
  std::vector<double> initial_energies;
  std::vector<double> final_energies;
  double initial_batch_max = 0.0;
  int exceeding_twice_initial_max = 0;
};

// Deploys a policy on an ensemble of fresh thermal trajectories and streams
// the statistics to disk: initial/final phase-space scatters and energy
// histograms, the mean-energy time series (total and per mode) and the
// action sequences of the first few trajectories.
inline EvaluationSummary run_evaluation(const Checkpoint& ckpt, const ExperimentPreset& preset,
                                        int n_traj, int steps, ActionChoice choice,
                                        std::uint64_t seed,
                                        const std::filesystem::path& out_dir,
                                        int record_stride = 0, int action_traces = 2) {
  const Environment& env = preset.training.env;
  validate_environment(env);
  if (n_traj < 1 || steps < 1) throw std::invalid_argument("evaluation needs n_traj, steps >= 1");
  if (static_cast<std::size_t>(ckpt.params.layer_sizes.back()) != env.actions.levels.size())
    throw std::runtime_error("checkpoint output size does not match the preset action set");
  action_traces = std::min(action_traces, n_traj);

  const std::size_t n_modes = env.modes.size();
  const int stride = record_stride > 0 ? record_stride : std::max(1, steps / 2000);
  const std::size_t slots = static_cast<std::size_t>(steps / stride) + 1;

  std::filesystem::create_directories(out_dir);

  const std::size_t nt = static_cast<std::size_t>(n_traj);
  const std::size_t n_groups = (nt + kEnsembleGroup - 1) / kEnsembleGroup;
  // per group: total-energy sums then per-mode sums, all over record slots
  std::vector<std::vector<double>> group_sums(n_groups);
  std::vector<double> initial_q(nt * n_modes), initial_p(nt * n_modes);
  std::vector<double> final_q(nt * n_modes), final_p(nt * n_modes);
  std::vector<double> initial_energies(nt), final_energies(nt), max_energies(nt);
  std::vector<std::vector<int>> traced_actions(static_cast<std::size_t>(action_traces));

  parallel_for(n_groups, [&](std::size_t g) {
    auto& sums = group_sums[g];
    sums.assign(slots * (1 + n_modes), 0.0);
    const std::size_t begin = g * kEnsembleGroup;
    const std::size_t end = std::min(begin + kEnsembleGroup, nt);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(seed, 1 + i);
      std::vector<int>* trace =
          i < static_cast<std::size_t>(action_traces) ? &traced_actions[i] : nullptr;
      if (trace) trace->reserve(static_cast<std::size_t>(steps));

      auto record_slot = [&](std::size_t slot, const ResonatorState& state) {
        double total = 0.0;
        for (std::size_t j = 0; j < n_modes; ++j) {
          const double ej = 0.5 * (state.q[j] * state.q[j] + state.p[j] * state.p[j]);
          sums[slots * (1 + j) + slot] += ej;
          total += ej;
        }
        sums[slot] += total;
      };

      TrajectorySummary traj = run_policy_trajectory(
          ckpt.params, env, steps, rng, choice, [&](const StepInfo& info) {
            if ((info.step + 1) % stride == 0)
              record_slot(static_cast<std::size_t>((info.step + 1) / stride), *info.state);
            if (trace) trace->push_back(info.action);
          });
      record_slot(0, traj.initial_state);

      initial_energies[i] = traj.initial_energy;
      final_energies[i] = total_energy(traj.final_state);
      max_energies[i] = traj.max_energy;
      for (std::size_t j = 0; j < n_modes; ++j) {
        initial_q[i * n_modes + j] = traj.initial_state.q[j];
        initial_p[i * n_modes + j] = traj.initial_state.p[j];
        final_q[i * n_modes + j] = traj.final_state.q[j];
        final_p[i * n_modes + j] = traj.final_state.p[j];
      }
    }
  });

  EvaluationSummary summary;
  summary.trajectories = n_traj;
  summary.steps = steps;

  std::vector<double> series(slots * (1 + n_modes), 0.0);
  for (const auto& sums : group_sums)
    for (std::size_t k = 0; k < series.size(); ++k) series[k] += sums[k];
  for (double& v : series) v /= static_cast<double>(n_traj);

  summary.initial_energies = initial_energies;
  summary.final_energies = final_energies;
  for (double e : initial_energies) summary.initial_mean_energy += e;
  for (double e : final_energies) summary.final_mean_energy += e;
  summary.initial_mean_energy /= static_cast<double>(n_traj);
  summary.final_mean_energy /= static_cast<double>(n_traj);
  summary.per_mode_initial_mean.assign(n_modes, 0.0);
  summary.per_mode_final_mean.assign(n_modes, 0.0);
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t j = 0; j < n_modes; ++j) {
      summary.per_mode_initial_mean[j] +=
          0.5 * (initial_q[i * n_modes + j] * initial_q[i * n_modes + j] +
                 initial_p[i * n_modes + j] * initial_p[i * n_modes + j]);
      summary.per_mode_final_mean[j] +=
          0.5 * (final_q[i * n_modes + j] * final_q[i * n_modes + j] +
                 final_p[i * n_modes + j] * final_p[i * n_modes + j]);
    }
  for (double& v : summary.per_mode_initial_mean) v /= static_cast<double>(n_traj);
  for (double& v : summary.per_mode_final_mean) v /= static_cast<double>(n_traj);

  summary.initial_batch_max = *std::max_element(initial_energies.begin(), initial_energies.end());
  for (double m : max_energies)
    if (m > 2.0 * summary.initial_batch_max) ++summary.exceeding_twice_initial_max;

  const std::string comment = detail::run_comment("evaluate", preset.name, seed);
  std::vector<std::string> files;
  {
    std::vector<std::string> col_names{"t", "mean_total_energy"};
    for (std::size_t j = 0; j < n_modes; ++j)
      col_names.push_back("mean_energy_mode" + std::to_string(j + 1));
    std::vector<std::string_view> cols(col_names.begin(), col_names.end());
    CsvWriter csv(out_dir / "energy_vs_time.csv", comment, cols);
    std::vector<double> row(2 + n_modes);
    for (std::size_t r = 0; r < slots; ++r) {
      row[0] = static_cast<double>(r) * stride * env.dt;
      row[1] = series[r];
      for (std::size_t j = 0; j < n_modes; ++j) row[2 + j] = series[slots * (1 + j) + r];
      csv.row(row);
    }
    csv.close();
    files.push_back("energy_vs_time.csv");
  }
  auto write_scatter = [&](const std::string& name, const std::vector<double>& qv,
                           const std::vector<double>& pv) {
    CsvWriter csv(out_dir / name, comment, {"traj_id", "mode", "q", "p"});
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < n_modes; ++j)
        csv.row({static_cast<double>(i), static_cast<double>(j + 1), qv[i * n_modes + j],
                 pv[i * n_modes + j]});
    csv.close();
    files.push_back(name);
  };
  write_scatter("phase_space_initial.csv", initial_q, initial_p);
  write_scatter("phase_space_final.csv", final_q, final_p);
  auto write_hist = [&](const std::string& name, const std::vector<double>& energies) {
    CsvWriter csv(out_dir / name, comment, {"traj_id", "total_energy"});
    for (std::size_t i = 0; i < nt; ++i) csv.row({static_cast<double>(i), energies[i]});
    csv.close();
    files.push_back(name);
  };
  write_hist("energy_hist_initial.csv", initial_energies);
  write_hist("energy_hist_final.csv", final_energies);
  for (int k = 0; k < action_traces; ++k) {
    const std::string name = "actions_traj" + std::to_string(k) + ".csv";
    CsvWriter csv(out_dir / name, comment, {"t", "action_index", "drive"});
    const auto& actions = traced_actions[static_cast<std::size_t>(k)];
    for (std::size_t s = 0; s < actions.size(); ++s)
      csv.row({static_cast<double>(s) * env.dt, static_cast<double>(actions[s]),
               env.actions.levels[static_cast<std::size_t>(actions[s])]});
    csv.close();
    files.push_back(name);
  }
  files.push_back("manifest.json");
  detail::write_manifest(out_dir, "evaluate", preset, seed,
                         {{"trajectories", n_traj},
                          {"steps", steps},
                          {"mode", action_choice_name(choice)},
                          {"record_stride", stride},
                          {"initial_mean_energy", summary.initial_mean_energy},
                          {"final_mean_energy", summary.final_mean_energy}},
                         files);
  return summary;
}

// Derives the default evaluation seed from a training master seed, so
// evaluation draws fresh initial conditions (trajectory streams of training
// epoch e>=0 never reuse these ids).
inline std::uint64_t default_eval_seed(std::uint64_t master_seed) {
  return master_seed ^ 0x632be59bd9b4e019ull;
}

inline void inspect_checkpoint(std::ostream& out, const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  double l2 = 0.0;
  for (const auto& layer : ckpt.params.layers) {
    for (double w : layer.w) l2 += w * w;
    for (double b : layer.b) l2 += b * b;
  }
  out << "checkpoint: " << path.string() << "\n"
      << "  format version : " << ckpt.version << "\n"
      << "  master seed    : " << ckpt.master_seed << "\n"
      << "  epochs complete: " << ckpt.epoch << "\n"
      << "  layer sizes    : ";
  for (std::size_t i = 0; i < ckpt.params.layer_sizes.size(); ++i)
    out << (i ? ", " : "(") << ckpt.params.layer_sizes[i];
  out << ")\n"
      << "  parameters     : " << ckpt.params.parameter_count() << "\n"
      << "  adam updates   : " << ckpt.params.adam_t << "\n"
      << "  baseline epochs: " << ckpt.baseline.epoch_mean_rewards.size() << "\n"
      << "  weight L2 norm : " << std::sqrt(l2) << "\n";
}

}  // namespace optocool
