// Command-line front end: thermalization, training, evaluation and
// checkpoint inspection over the experiment presets, with optional JSON
// config files and flag overrides (flags win).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "optocool/config.hpp"
#include "optocool/runner.hpp"

namespace {

struct CliArgs {
  std::string preset = "single_quadratic";
  std::string config_path;
  std::string out_dir;
  std::string checkpoint_path;
  optocool::RunOverrides overrides;
};

void add_common_flags(CLI::App* cmd, CliArgs& args, optocool::RunOverrides& cli) {
  cmd->add_option("--preset", args.preset, "experiment preset name");
  cmd->add_option("--config", args.config_path, "JSON config file with overrides");
  cmd->add_option("--seed", cli.seed, "master seed (u64)");
  cmd->add_option("--out", args.out_dir, "output directory");
}

optocool::ExperimentPreset resolve(const CliArgs& args, const optocool::RunOverrides& cli,
                                   optocool::RunOverrides& merged) {
  optocool::RunOverrides from_file;
  if (!args.config_path.empty()) from_file = optocool::load_overrides(args.config_path);
  merged = optocool::merge_overrides(from_file, cli);
  return optocool::apply_overrides(optocool::preset_by_name(args.preset), merged);
}

std::filesystem::path out_or_default(const CliArgs& args, const std::string& command) {
  if (!args.out_dir.empty()) return args.out_dir;
  return std::filesystem::path("runs") / (command + "-" + args.preset);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learned feedback cooling of mechanical resonator modes"};
  app.require_subcommand(1);

  CliArgs args;
  optocool::RunOverrides cli;

  auto* thermalize = app.add_subcommand("thermalize", "free thermalization ensemble");
  add_common_flags(thermalize, args, cli);
  thermalize->add_option("--n-traj", cli.thermalize_trajectories, "number of trajectories");

  auto* train = app.add_subcommand("train", "train a cooling policy");
  add_common_flags(train, args, cli);
  train->add_option("--epochs", cli.epochs, "training epochs (parameter updates)");
  train->add_option("--batch", cli.batch, "trajectories per epoch");
  train->add_option("--steps", cli.steps, "time steps per trajectory");
  train->add_option("--checkpoint", args.checkpoint_path, "resume from this checkpoint");

  auto* evaluate = app.add_subcommand("evaluate", "run a trained policy on fresh trajectories");
  add_common_flags(evaluate, args, cli);
  evaluate->add_option("--checkpoint", args.checkpoint_path, "trained policy checkpoint")
      ->required();
  evaluate->add_option("--n-traj", cli.n_traj, "number of evaluation trajectories");
  evaluate->add_option("--steps", cli.steps, "time steps per trajectory");
  evaluate->add_option("--mode", cli.mode, "action choice: sample|argmax");

  auto* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint metadata");
  inspect->add_option("--checkpoint", args.checkpoint_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(inspect)) {
      optocool::inspect_checkpoint(std::cout, args.checkpoint_path);
      return 0;
    }

    optocool::RunOverrides merged;
    if (app.got_subcommand(thermalize)) {
      if (thermalize->count("--preset") == 0) args.preset = "thermalize";
      const auto preset = resolve(args, cli, merged);
      const std::uint64_t seed = merged.seed.value_or(42);
      const auto out = out_or_default(args, "thermalize");
      const auto summary =
          optocool::run_thermalize(preset, seed, out, merged.record_stride.value_or(0));
      std::cout << "thermalize: " << summary.trajectories << " trajectories, " << summary.steps
                << " steps\n"
                << "final mean energy: " << summary.final_mean_energy << "\n"
                << "output: " << out.string() << "\n";
      return 0;
    }

    if (app.got_subcommand(train)) {
      const auto preset = resolve(args, cli, merged);
      const auto out = out_or_default(args, "train");
      std::optional<std::filesystem::path> resume;
      if (!args.checkpoint_path.empty()) resume = args.checkpoint_path;
      const auto summary = optocool::run_training(preset, merged.seed, out, resume,
                                                  merged.checkpoint_every.value_or(50));
      std::cout << "train: " << summary.epochs_completed << " epochs complete\n";
      if (!summary.curve.empty())
        std::cout << "last epoch mean reward: " << summary.curve.back().mean_total_reward << "\n";
      std::cout << "checkpoint: " << summary.checkpoint_path.string() << "\n"
                << "output: " << out.string() << "\n";
      return 0;
    }

    if (app.got_subcommand(evaluate)) {
      const auto preset = resolve(args, cli, merged);
      const auto ckpt = optocool::load_checkpoint(args.checkpoint_path);
      const std::uint64_t seed =
          merged.seed ? *merged.seed : optocool::default_eval_seed(ckpt.master_seed);
      const int n_traj = merged.n_traj.value_or(preset.eval_trajectories);
      const int steps = merged.steps.value_or(preset.eval_steps);
      const auto choice = optocool::action_choice_from_name(merged.mode.value_or("argmax"));
      const auto out = out_or_default(args, "evaluate");
      const auto summary = optocool::run_evaluation(ckpt, preset, n_traj, steps, choice, seed,
                                                    out, merged.record_stride.value_or(0),
                                                    merged.action_traces.value_or(2));
      std::cout << "evaluate: " << summary.trajectories << " trajectories, " << summary.steps
                << " steps (" << optocool::action_choice_name(choice) << ")\n"
                << "mean energy: " << summary.initial_mean_energy << " -> "
                << summary.final_mean_energy << "\n";
      for (std::size_t j = 0; j < summary.per_mode_final_mean.size(); ++j)
        std::cout << "  mode " << j + 1 << ": " << summary.per_mode_initial_mean[j] << " -> "
                  << summary.per_mode_final_mean[j] << "\n";
      std::cout << "output: " << out.string() << "\n";
      return 0;
    }
  } catch (const optocool::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << " (last periodic checkpoint kept)\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
