// Acceptance suite: every criterion below runs end to end and prints one
// PASS/FAIL line. The cooling experiments train at a desk scale by default
// (>= 100 epochs, 500 evaluation trajectories); set OPTOCOOL_ACCEPT_SCALE=paper
// to run the published experiment sizes instead (400 epochs, 4000
// trajectories -- takes hours). Artifacts land in ./acceptance_out.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "optocool/checkpoint.hpp"
#include "optocool/presets.hpp"
#include "optocool/runner.hpp"
#include "support.hpp"

using namespace optocool;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
bool g_paper_scale = false;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path kOutRoot = "acceptance_out";

// ---------------------------------------------------------------------------
// 1. Thermalization at the published parameters: 1000 trajectories from the
//    origin, gamma = 4e-5, nbar = 100, dt = 0.05; the ensemble mean at
//    t = 3/gamma must sit within 10% of nbar and the final energies must be
//    exponential with mean 100 (KS at the 1% level). The run extends to
//    5/gamma so the final histogram is taken at equilibrium.
void criterion_thermalization() {
  auto preset = preset_thermalize();
  const auto summary = run_thermalize(preset, 20240811, kOutRoot / "thermalize");

  const double t_target = 3.0 / preset.training.env.modes[0].gamma;
  std::size_t idx = 0;
  for (std::size_t r = 0; r < summary.times.size(); ++r)
    if (std::abs(summary.times[r] - t_target) < std::abs(summary.times[idx] - t_target)) idx = r;
  const double mean3g = summary.mean_energy[idx];

  const bool mean_ok = mean3g >= 90.0 && mean3g <= 110.0;
  const bool ks_ok = testsupport::ks_exponential_passes(summary.final_energies, 100.0, 0.01);
  report(1, mean_ok && ks_ok, "thermalization reaches nbar with a Boltzmann spectrum",
         "mean(t=3/gamma)=" + fmt(mean3g) + " in [90,110]: " + (mean_ok ? "yes" : "no") +
             ", KS(final vs Exp(100), 1%): " + (ks_ok ? "pass" : "fail"));
}

// ---------------------------------------------------------------------------
// 2. Boltzmann sampler: 1e5 single-mode draws at nbar = 100.
void criterion_boltzmann_sampler() {
  std::vector<ModeParams> modes{{1.0, 4e-5, 100.0, 0.0}};
  Rng rng(7701, 0);
  std::vector<double> energies(100000);
  for (auto& e : energies) e = total_energy(sample_initial_state(modes, rng));
  const double mean = testsupport::mean_of(energies);
  const bool mean_ok = mean >= 98.0 && mean <= 102.0;
  const bool ks_ok = testsupport::ks_exponential_passes(energies, 100.0, 0.01);
  report(2, mean_ok && ks_ok, "initial-state energies are Boltzmann distributed",
         "mean=" + fmt(mean) + " in [98,102]: " + (mean_ok ? "yes" : "no") +
             ", KS(1%): " + (ks_ok ? "pass" : "fail"));
}

// ---------------------------------------------------------------------------
// 3. Integrator order: halving dt at a fixed horizon of t = 20 pi shrinks the
//    global position error by 8x-32x, and the undamped energy drift over
//    1000 steps at dt = 0.05 stays below 1e-6 relative.
void criterion_integrator() {
  std::vector<ModeParams> modes{{1.0, 0.0, 0.0, 0.0}};
  const std::vector<double> zeros{0.0};
  auto run_free = [&](double dt, int steps) {
    ResonatorState s = make_state(1);
    s.q[0] = 1.0;
    Rk4Scratch ws;
    for (int i = 0; i < steps; ++i) rk4_step_inplace(s, modes, zeros, zeros, dt, ws);
    return s;
  };

  const double horizon = 20.0 * std::numbers::pi;
  const int n1 = 1257;  // dt = 20pi/1257 ~= 0.05, halved exactly below
  auto error_of = [&](int steps) {
    const auto s = run_free(horizon / steps, steps);
    return std::hypot(s.q[0] - 1.0, s.p[0]);
  };
  const double ratio = error_of(n1) / error_of(2 * n1);
  const bool order_ok = ratio >= 8.0 && ratio <= 32.0;

  const auto after = run_free(0.05, 1000);
  const double drift = std::abs(total_energy(after) - 0.5) / 0.5;
  const bool drift_ok = drift < 1e-6;

  report(3, order_ok && drift_ok, "RK4 is fourth order and conserves energy",
         "halving ratio=" + fmt(ratio) + " in [8,32]: " + (order_ok ? "yes" : "no") +
             ", relative drift over 1000 steps=" + fmt(drift) + " < 1e-6: " +
             (drift_ok ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 4. Gradient correctness on a (2,4,4,3) network: central differences with
//    h = 1e-5 over 100 randomized (params, obs, action) triples, and the
//    score-function identity sum_a pi(a) dlog pi(a) = 0.
void criterion_gradients() {
  Rng rng(1234, 99);
  auto random_params = [&] {
    auto params = init_params({2, 4, 4, 3}, rng);
    // randomized biases keep pre-activations off the relu kinks, where
    // central differences are undefined
    for (auto& layer : params.layers)
      for (double& b : layer.b) b = 0.1 * rng.normal();
    return params;
  };

  double worst = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    auto params = random_params();
    const Observation obs{{rng.normal(), rng.normal()}};
    const int action = static_cast<int>(rng.uniform() * 3.0);
    const auto analytic = logprob_grad(params, obs, action);

    auto logp = [&](const PolicyParams& p) {
      PolicyWorkspace ws;
      forward_into(p, obs, ws);
      return log_prob(ws, action);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto probe = [&](std::vector<double>& theta, const std::vector<double>& a_grad) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
          const double saved = theta[i];
          theta[i] = saved + h;
          const double up = logp(params);
          theta[i] = saved - h;
          const double down = logp(params);
          theta[i] = saved;
          const double numeric = (up - down) / (2.0 * h);
          const double scale = std::max(std::abs(a_grad[i]) + std::abs(numeric), 1e-8);
          worst = std::max(worst, std::abs(a_grad[i] - numeric) / scale);
        }
      };
      probe(params.layers[l].w, analytic[l].w);
      probe(params.layers[l].b, analytic[l].b);
    }
  }
  const bool fd_ok = worst < 1e-4;

  double score_worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    auto params = random_params();
    const Observation obs{{rng.normal(), rng.normal()}};
    const auto dist = forward(params, obs);
    LayerStack sum = zero_stack(params.layer_sizes);
    PolicyWorkspace ws;
    for (int a = 0; a < 3; ++a) accumulate_logprob_grad(params, obs, a, dist.probs[a], ws, sum);
    for (const auto& layer : sum) {
      for (double v : layer.w) score_worst = std::max(score_worst, std::abs(v));
      for (double v : layer.b) score_worst = std::max(score_worst, std::abs(v));
    }
  }
  const bool score_ok = score_worst < 1e-8;

  report(4, fd_ok && score_ok, "log-prob gradients match finite differences",
         "max relative error=" + fmt(worst) + " < 1e-4: " + (fd_ok ? "yes" : "no") +
             ", score identity residual=" + fmt(score_worst) + " < 1e-8: " +
             (score_ok ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 5. Estimator sanity on a two-armed bandit (arm 0 pays 1, arm 1 pays 0):
//    200 epochs must drive pi(arm 0) above 0.95 with b = 0 and with the
//    running-mean baseline.
void criterion_bandit() {
  const Observation obs{{1.0, 0.0}};
  auto make_record = [&](int arm) {
    TrajectoryRecord r;
    r.observations = {obs};
    r.actions = {arm};
    r.logprobs = {0.0};
    r.rewards = {arm == 0 ? 1.0 : 0.0};
    r.total_reward = r.rewards[0];
    r.final_state = make_state(1);
    return r;
  };

  std::string detail;
  bool all_ok = true;
  for (const bool use_running_mean : {false, true}) {
    Rng init(555, 0);
    auto params = init_params({2, 4, 4, 2}, init);
    BaselineState baseline;
    Rng rng(556, use_running_mean ? 1 : 0);
    std::vector<TrajectoryRecord> batch;
    for (int epoch = 0; epoch < 200; ++epoch) {
      const double b = use_running_mean ? baseline_value(baseline) : 0.0;
      batch.clear();
      double mean_r = 0.0;
      const auto dist = forward(params, obs);
      for (int k = 0; k < 32; ++k) {
        const int arm = sample_action(dist, rng);
        batch.push_back(make_record(arm));
        mean_r += batch.back().total_reward;
      }
      adam_update_inplace(params, batch_gradient(batch, params, b), 0.02);
      update_baseline(baseline, mean_r / 32.0);
    }
    const double p_best = forward(params, obs).probs[0];
    if (!detail.empty()) detail += ", ";
    detail += std::string(use_running_mean ? "running-mean" : "b=0") + ": pi(best)=" + fmt(p_best);
    all_ok = all_ok && p_best > 0.95;
  }
  report(5, all_ok, "policy gradient solves the bandit for both baselines", detail);
}

// ---------------------------------------------------------------------------
// 6/7/8: the cooling experiments. Training happens through the harness so
// the checkpoints and learning curves on disk are the checked artifacts.
struct CoolingResult {
  TrainingSummary training;
  EvaluationSummary eval;
};

CoolingResult run_cooling(const ExperimentPreset& preset, std::uint64_t seed, const fs::path& out,
                          int eval_traj, int eval_steps) {
  CoolingResult r;
  r.training = run_training(preset, seed, out / "train", {}, 100);
  const auto ckpt = load_checkpoint(r.training.checkpoint_path);
  r.eval = run_evaluation(ckpt, preset, eval_traj, eval_steps, ActionChoice::argmax,
                          default_eval_seed(seed), out / "eval");
  return r;
}

bool curve_rises(const std::vector<EpochStats>& curve, double* first_out, double* last_out) {
  const std::size_t d = std::max<std::size_t>(1, curve.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    first += curve[i].mean_total_reward;
    last += curve[curve.size() - 1 - i].mean_total_reward;
  }
  first /= static_cast<double>(d);
  last /= static_cast<double>(d);
  *first_out = first;
  *last_out = last;
  return last > first;
}

void criteria_cooling() {
  const int eval_traj = g_paper_scale ? 4000 : 500;
  const int eval_steps = 20000;

  // single-mode parametric cooling
  auto single = preset_single_quadratic();
  if (!g_paper_scale) single.training.epochs = 150;
  const auto sq = run_cooling(single, 42, kOutRoot / "single_quadratic", eval_traj, eval_steps);
  const bool cold = sq.eval.final_mean_energy < 10.0;
  const bool stable = sq.eval.exceeding_twice_initial_max == 0;
  report(6, cold && stable, "single-mode policy cools 10x and stays bounded",
         "final mean=" + fmt(sq.eval.final_mean_energy) + " < 10: " + (cold ? "yes" : "no") +
             ", trajectories above 2x initial max: " +
             std::to_string(sq.eval.exceeding_twice_initial_max) + " (initial mean=" +
             fmt(sq.eval.initial_mean_energy) + ", " + std::to_string(single.training.epochs) +
             " epochs)");

  // four-mode simultaneous cooling
  auto four = preset_four_linear();
  if (!g_paper_scale) four.training.epochs = 150;
  const auto fl = run_cooling(four, 42, kOutRoot / "four_linear", eval_traj, eval_steps);
  const double ratio = fl.eval.initial_mean_energy / fl.eval.final_mean_energy;
  const bool total_ok = ratio >= 5.0;
  bool each_ok = true;
  std::string modes_detail;
  for (std::size_t j = 0; j < fl.eval.per_mode_final_mean.size(); ++j) {
    const bool below = fl.eval.per_mode_final_mean[j] < fl.eval.per_mode_initial_mean[j];
    each_ok = each_ok && below;
    if (!modes_detail.empty()) modes_detail += " ";
    modes_detail += "m" + std::to_string(j + 1) + "=" + fmt(fl.eval.per_mode_final_mean[j]);
  }
  report(7, total_ok && each_ok, "four modes cool together, none heats on average",
         "total " + fmt(fl.eval.initial_mean_energy) + " -> " + fmt(fl.eval.final_mean_energy) +
             " (" + fmt(ratio) + "x >= 5: " + (total_ok ? "yes" : "no") +
             "), per-mode finals: " + modes_detail + ", all below initial: " +
             (each_ok ? "yes" : "no"));

  // learning curves rise in both presets
  double sf, sl, ff, fl_last;
  const bool s_rise = curve_rises(sq.training.curve, &sf, &sl);
  const bool f_rise = curve_rises(fl.training.curve, &ff, &fl_last);
  report(8, s_rise && f_rise, "per-epoch mean reward rises decile over decile",
         "single " + fmt(sf) + " -> " + fmt(sl) + ": " + (s_rise ? "up" : "down") + ", four " +
             fmt(ff) + " -> " + fmt(fl_last) + ": " + (f_rise ? "up" : "down"));
}

// ---------------------------------------------------------------------------
// 9. Determinism: repeated runs are byte-identical, and resuming from a
//    mid-run checkpoint lands on the same final checkpoint.
void criterion_determinism() {
  auto preset = preset_single_quadratic();
  preset.training.layer_sizes = {2, 8, 8, 11};
  preset.training.batch_size = 6;
  preset.training.epochs = 6;
  preset.training.steps = 80;
  preset.thermalize_trajectories = 32;
  preset.training.env.modes[0].gamma = 0.01;  // short thermalize horizon
  preset.thermalize_horizon_gammas = 2.0;

  const fs::path root = kOutRoot / "determinism";
  bool ok = true;
  std::string detail;

  run_training(preset, 7, root / "t1", {}, 3);
  run_training(preset, 7, root / "t2", {}, 3);
  const bool curves_eq =
      slurp(root / "t1" / "learning_curve.csv") == slurp(root / "t2" / "learning_curve.csv");
  const bool ckpt_eq =
      slurp(root / "t1" / "checkpoint.ckpt") == slurp(root / "t2" / "checkpoint.ckpt");
  ok = ok && curves_eq && ckpt_eq;
  detail += std::string("repeat train: curve ") + (curves_eq ? "==" : "!=") + " ckpt " +
            (ckpt_eq ? "==" : "!=");

  auto half = preset;
  half.training.epochs = 3;
  run_training(half, 7, root / "half", {}, 50);
  run_training(preset, {}, root / "resumed", root / "half" / "checkpoint.ckpt", 50);
  const bool resume_eq =
      slurp(root / "resumed" / "checkpoint.ckpt") == slurp(root / "t1" / "checkpoint.ckpt");
  ok = ok && resume_eq;
  detail += std::string(", resumed ckpt ") + (resume_eq ? "==" : "!=") + " straight-through";

  run_thermalize(preset, 7, root / "th1");
  run_thermalize(preset, 7, root / "th2");
  const bool thermo_eq = slurp(root / "th1" / "energy_vs_time.csv") ==
                             slurp(root / "th2" / "energy_vs_time.csv") &&
                         slurp(root / "th1" / "energy_hist_final.csv") ==
                             slurp(root / "th2" / "energy_hist_final.csv");
  ok = ok && thermo_eq;
  detail += std::string(", thermalize CSVs ") + (thermo_eq ? "==" : "!=");

  const auto ckpt = load_checkpoint(root / "t1" / "checkpoint.ckpt");
  run_evaluation(ckpt, preset, 16, 50, ActionChoice::argmax, 99, root / "e1");
  run_evaluation(ckpt, preset, 16, 50, ActionChoice::argmax, 99, root / "e2");
  bool eval_eq = true;
  for (const char* name :
       {"energy_vs_time.csv", "phase_space_initial.csv", "phase_space_final.csv",
        "energy_hist_initial.csv", "energy_hist_final.csv", "actions_traj0.csv"})
    eval_eq = eval_eq && slurp(root / "e1" / name) == slurp(root / "e2" / name);
  ok = ok && eval_eq;
  detail += std::string(", evaluate CSVs ") + (eval_eq ? "==" : "!=");

  report(9, ok, "fixed master seed reproduces every artifact byte for byte", detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* scale = std::getenv("OPTOCOOL_ACCEPT_SCALE"))
    g_paper_scale = std::strcmp(scale, "paper") == 0;
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  fs::remove_all(kOutRoot);
  fs::create_directories(kOutRoot);

  std::printf("acceptance suite, %s scale\n", g_paper_scale ? "paper" : "desk");
  if (!only || only == 1) criterion_thermalization();
  if (!only || only == 2) criterion_boltzmann_sampler();
  if (!only || only == 3) criterion_integrator();
  if (!only || only == 4) criterion_gradients();
  if (!only || only == 5) criterion_bandit();
  if (!only || only == 6 || only == 7 || only == 8) criteria_cooling();
  if (!only || only == 9) criterion_determinism();

  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
