#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optocool/actuation.hpp"
#include "optocool/rng.hpp"

namespace optocool {

// One dense layer: weights row-major (rows = output neurons) plus biases.
struct Layer {
  std::vector<double> w;
  std::vector<double> b;
};

// Shapes mirror a parameter set; also used for gradients and Adam moments.
using LayerStack = std::vector<Layer>;

inline void validate_layer_sizes(std::span<const int> sizes) {
  if (sizes.size() != 4)
    throw std::invalid_argument("layer_sizes must be (input, hidden1, hidden2, output)");
  if (sizes[0] != 2) throw std::invalid_argument("input layer must have 2 neurons");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
}

inline LayerStack zero_stack(std::span<const int> sizes) {
  validate_layer_sizes(sizes);
  LayerStack stack(sizes.size() - 1);
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const std::size_t fan_in = static_cast<std::size_t>(sizes[l]);
    const std::size_t fan_out = static_cast<std::size_t>(sizes[l + 1]);
    stack[l].w.assign(fan_in * fan_out, 0.0);
    stack[l].b.assign(fan_out, 0.0);
  }
  return stack;
}

inline std::size_t stack_parameter_count(const LayerStack& stack) {
  std::size_t n = 0;
  for (const auto& layer : stack) n += layer.w.size() + layer.b.size();
  return n;
}

inline void stack_scale(LayerStack& stack, double factor) {
  for (auto& layer : stack) {
    for (double& v : layer.w) v *= factor;
    for (double& v : layer.b) v *= factor;
  }
}

// dst += factor * src, shape-checked.
inline void stack_axpy(LayerStack& dst, double factor, const LayerStack& src) {
  if (dst.size() != src.size()) throw std::invalid_argument("stack_axpy: layer count mismatch");
  for (std::size_t l = 0; l < dst.size(); ++l) {
    if (dst[l].w.size() != src[l].w.size() || dst[l].b.size() != src[l].b.size())
      throw std::invalid_argument("stack_axpy: shape mismatch");
    for (std::size_t i = 0; i < src[l].w.size(); ++i) dst[l].w[i] += factor * src[l].w[i];
    for (std::size_t i = 0; i < src[l].b.size(); ++i) dst[l].b[i] += factor * src[l].b[i];
  }
}

inline bool stack_is_finite(const LayerStack& stack) {
  for (const auto& layer : stack) {
    for (double v : layer.w)
      if (!std::isfinite(v)) return false;
    for (double v : layer.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

// All weights and biases of the policy network together with the Adam
// moment accumulators and update counter.
struct PolicyParams {
  std::vector<int> layer_sizes;
  LayerStack layers;
  LayerStack adam_m;
  LayerStack adam_v;
  std::int64_t adam_t = 0;

  std::size_t parameter_count() const { return stack_parameter_count(layers); }
};

// Weights ~ N(0, 1/fan_in), biases zero: with near-unit inputs the initial
// policy stays close to uniform over the action set. Adam moments start at
// zero. Consumes one normal per weight, in layer-major row-major order.
template <class Rng>
PolicyParams init_params(std::vector<int> layer_sizes, Rng& rng) {
  validate_layer_sizes(layer_sizes);
  PolicyParams params;
  params.layer_sizes = std::move(layer_sizes);
  params.layers = zero_stack(params.layer_sizes);
  params.adam_m = zero_stack(params.layer_sizes);
  params.adam_v = zero_stack(params.layer_sizes);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(params.layer_sizes[l]));
    for (double& w : params.layers[l].w) w = scale * rng.normal();
  }
  return params;
}

inline PolicyParams zero_params(std::vector<int> layer_sizes) {
  validate_layer_sizes(layer_sizes);
  PolicyParams params;
  params.layer_sizes = std::move(layer_sizes);
  params.layers = zero_stack(params.layer_sizes);
  params.adam_m = zero_stack(params.layer_sizes);
  params.adam_v = zero_stack(params.layer_sizes);
  return params;
}

struct ActionDistribution {
  std::vector<double> probs;
};

namespace detail {

// Dot product with four independent partial sums. The fixed reassociation
// keeps results deterministic while letting the compiler pipeline the FMAs.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// out = relu(W x + b), W row-major (rows x cols).
inline void dense_relu(const Layer& layer, const double* x, std::size_t cols, std::size_t rows,
                       double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double z = dot(layer.w.data() + r * cols, x, cols) + layer.b[r];
    out[r] = z > 0.0 ? z : 0.0;
  }
}

inline void dense(const Layer& layer, const double* x, std::size_t cols, std::size_t rows,
                  double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    out[r] = dot(layer.w.data() + r * cols, x, cols) + layer.b[r];
}

}  // namespace detail

// Per-thread buffers for the forward pass and backpropagation. Reused across
// steps so the hot loops never allocate.
struct PolicyWorkspace {
  std::vector<double> h1, h2, logits, probs;
  std::vector<double> dlogits, dh2, dh1;
  double log_norm = 0.0;

  void resize(std::span<const int> sizes) {
    h1.resize(static_cast<std::size_t>(sizes[1]));
    h2.resize(static_cast<std::size_t>(sizes[2]));
    logits.resize(static_cast<std::size_t>(sizes[3]));
    probs.resize(static_cast<std::size_t>(sizes[3]));
    dlogits.resize(static_cast<std::size_t>(sizes[3]));
    dh2.resize(static_cast<std::size_t>(sizes[2]));
    dh1.resize(static_cast<std::size_t>(sizes[1]));
  }
};

// relu -> relu -> softmax. The softmax subtracts the max logit before
// exponentiating so large logits cannot overflow; log_norm holds the
// log-normalizer, so ln probs[a] = logits[a] - log_norm.
inline void forward_into(const PolicyParams& params, const Observation& obs,
                         PolicyWorkspace& ws) {
  const auto& sizes = params.layer_sizes;
  ws.resize(sizes);
  const std::size_t n1 = ws.h1.size(), n2 = ws.h2.size(), n3 = ws.logits.size();
  detail::dense_relu(params.layers[0], obs.values.data(), 2, n1, ws.h1.data());
  detail::dense_relu(params.layers[1], ws.h1.data(), n1, n2, ws.h2.data());
  detail::dense(params.layers[2], ws.h2.data(), n2, n3, ws.logits.data());

  double max_logit = ws.logits[0];
  for (std::size_t k = 1; k < n3; ++k) max_logit = std::max(max_logit, ws.logits[k]);
  double norm = 0.0;
  for (std::size_t k = 0; k < n3; ++k) {
    ws.probs[k] = std::exp(ws.logits[k] - max_logit);
    norm += ws.probs[k];
  }
  const double inv_norm = 1.0 / norm;
  for (std::size_t k = 0; k < n3; ++k) ws.probs[k] *= inv_norm;
  ws.log_norm = max_logit + std::log(norm);
}

inline ActionDistribution forward(const PolicyParams& params, const Observation& obs) {
  PolicyWorkspace ws;
  forward_into(params, obs, ws);
  return ActionDistribution{std::move(ws.probs)};
}

inline double log_prob(const PolicyWorkspace& ws, int action) {
  return ws.logits[static_cast<std::size_t>(action)] - ws.log_norm;
}

// Inverse-CDF categorical draw; consumes exactly one uniform.
template <class Rng>
int sample_action(const ActionDistribution& dist, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  const int last = static_cast<int>(dist.probs.size()) - 1;
  for (int k = 0; k < last; ++k) {
    cumulative += dist.probs[static_cast<std::size_t>(k)];
    if (u < cumulative) return k;
  }
  return last;
}

// Smallest index attaining the maximum probability.
inline int argmax_action(const ActionDistribution& dist) {
  if (dist.probs.empty()) throw std::invalid_argument("argmax_action: empty distribution");
  int best = 0;
  for (int k = 1; k < static_cast<int>(dist.probs.size()); ++k)
    if (dist.probs[static_cast<std::size_t>(k)] > dist.probs[static_cast<std::size_t>(best)])
      best = k;
  return best;
}

// Backpropagates scale * d/dtheta ln pi(action | obs) into acc. The output
// error signal is onehot(action) - probs; the relu subgradient at exactly
// zero is taken as zero. ws is refilled with the forward pass as a side
// effect, so callers can reuse its probs and log_norm.
inline void accumulate_logprob_grad(const PolicyParams& params, const Observation& obs,
                                    int action, double scale, PolicyWorkspace& ws,
                                    LayerStack& acc) {
  if (acc.size() != params.layers.size())
    throw std::invalid_argument("accumulate_logprob_grad: gradient shape mismatch");
  forward_into(params, obs, ws);
  const std::size_t n1 = ws.h1.size(), n2 = ws.h2.size(), n3 = ws.logits.size();
  if (action < 0 || static_cast<std::size_t>(action) >= n3)
    throw std::out_of_range("accumulate_logprob_grad: action index out of range");

  for (std::size_t k = 0; k < n3; ++k) ws.dlogits[k] = -ws.probs[k];
  ws.dlogits[static_cast<std::size_t>(action)] += 1.0;

  // output layer: dW3 = dlogits x h2, and dh2 = W3^T dlogits
  {
    Layer& g = acc[2];
    const Layer& w = params.layers[2];
    std::fill(ws.dh2.begin(), ws.dh2.end(), 0.0);
    for (std::size_t r = 0; r < n3; ++r) {
      const double d = ws.dlogits[r];
      const double sd = scale * d;
      double* grow = g.w.data() + r * n2;
      const double* wrow = w.w.data() + r * n2;
      for (std::size_t k = 0; k < n2; ++k) {
        grow[k] += sd * ws.h2[k];
        ws.dh2[k] += d * wrow[k];
      }
      g.b[r] += sd;
    }
  }
  // hidden layer 2: relu gate, dW2 = dz2 x h1, dh1 = W2^T dz2
  {
    Layer& g = acc[1];
    const Layer& w = params.layers[1];
    std::fill(ws.dh1.begin(), ws.dh1.end(), 0.0);
    for (std::size_t r = 0; r < n2; ++r) {
      const double d = ws.h2[r] > 0.0 ? ws.dh2[r] : 0.0;
      if (d == 0.0) continue;
      const double sd = scale * d;
      double* grow = g.w.data() + r * n1;
      const double* wrow = w.w.data() + r * n1;
      for (std::size_t k = 0; k < n1; ++k) {
        grow[k] += sd * ws.h1[k];
        ws.dh1[k] += d * wrow[k];
      }
      g.b[r] += sd;
    }
  }
  // hidden layer 1: relu gate, dW1 = dz1 x obs
  {
    Layer& g = acc[0];
    for (std::size_t r = 0; r < n1; ++r) {
      const double d = ws.h1[r] > 0.0 ? ws.dh1[r] : 0.0;
      if (d == 0.0) continue;
      const double sd = scale * d;
      g.w[r * 2] += sd * obs.values[0];
      g.w[r * 2 + 1] += sd * obs.values[1];
      g.b[r] += sd;
    }
  }
}

inline LayerStack logprob_grad(const PolicyParams& params, const Observation& obs, int action) {
  LayerStack grad = zero_stack(params.layer_sizes);
  PolicyWorkspace ws;
  accumulate_logprob_grad(params, obs, action, 1.0, ws, grad);
  return grad;
}

// Standard Adam with bias correction, applied as gradient ascent on the
// reward objective. beta1/beta2/eps are the published defaults.
inline void adam_update_inplace(PolicyParams& params, const LayerStack& ascent_direction,
                                double eta, double beta1 = 0.9, double beta2 = 0.999,
                                double eps = 1e-8) {
  if (!(eta > 0.0)) throw std::invalid_argument("adam_update: eta must be > 0");
  if (ascent_direction.size() != params.layers.size())
    throw std::invalid_argument("adam_update: gradient shape mismatch");
  if (!stack_is_finite(ascent_direction))
    throw std::invalid_argument("adam_update: non-finite gradient entries");

  params.adam_t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(params.adam_t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(params.adam_t));

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& gl = ascent_direction[l];
    if (gl.w.size() != params.layers[l].w.size() || gl.b.size() != params.layers[l].b.size())
      throw std::invalid_argument("adam_update: gradient shape mismatch");
    auto apply = [&](std::vector<double>& theta, std::vector<double>& m, std::vector<double>& v,
                     const std::vector<double>& g) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        theta[i] += eta * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    };
    apply(params.layers[l].w, params.adam_m[l].w, params.adam_v[l].w, gl.w);
    apply(params.layers[l].b, params.adam_m[l].b, params.adam_v[l].b, gl.b);
  }
}

inline PolicyParams adam_update(PolicyParams params, const LayerStack& ascent_direction,
                                double eta) {
  adam_update_inplace(params, ascent_direction, eta);
  return params;
}

}  // namespace optocool
