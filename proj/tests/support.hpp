#pragma once

// Test-side oracles and stub generators. Everything here is deliberately
// independent of the library code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace testsupport {

// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::abs(static_cast<double>(i) / n - f));
  }
  return d;
}

// Critical value at significance alpha with Stephens' finite-n correction:
// reject when D > c(alpha) / (sqrt(n) + 0.12 + 0.11/sqrt(n)),
// c(alpha) = sqrt(-ln(alpha/2)/2); c(0.01) ~= 1.6276.
inline double ks_critical(std::size_t n, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double sn = std::sqrt(static_cast<double>(n));
  return c / (sn + 0.12 + 0.11 / sn);
}

inline bool ks_exponential_passes(const std::vector<double>& samples, double mean, double alpha) {
  const double d = ks_statistic(samples, [mean](double x) {
    return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x / mean);
  });
  return d < ks_critical(samples.size(), alpha);
}

// Generator stub whose uniform/normal outputs come from fixed queues; used
// to pin down operations at exact input values.
struct ScriptedRng {
  std::vector<double> uniforms;
  std::vector<double> normals;
  std::size_t ui = 0;
  std::size_t ni = 0;

  double uniform() { return ui < uniforms.size() ? uniforms[ui++] : 0.0; }
  double normal() { return ni < normals.size() ? normals[ni++] : 0.0; }
  std::uint64_t next_u64() { return 0; }
};

// All-zero noise; uniforms return 0 (first action / b=0 / phi=0).
struct ZeroRng {
  double uniform() { return 0.0; }
  double normal() { return 0.0; }
  std::uint64_t next_u64() { return 0; }
};

// Records every deviate another generator produced, for replay.
template <class Inner>
struct RecordingRng {
  Inner* inner;
  std::vector<double>* uniform_log;
  std::vector<double>* normal_log;

  double uniform() {
    const double u = inner->uniform();
    uniform_log->push_back(u);
    return u;
  }
  double normal() {
    const double z = inner->normal();
    normal_log->push_back(z);
    return z;
  }
  std::uint64_t next_u64() { return inner->next_u64(); }
};

// Replays a recorded deviate sequence, optionally with a stride to pick one
// mode's draws out of an interleaved multi-mode log.
struct ReplayRng {
  const std::vector<double>* normals;
  std::size_t offset = 0;
  std::size_t stride = 1;
  std::size_t count = 0;

  double uniform() { return 0.0; }
  double normal() { return (*normals)[offset + stride * count++]; }
  std::uint64_t next_u64() { return 0; }
};

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double variance_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

}  // namespace testsupport
