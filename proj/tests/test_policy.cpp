#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "optocool/policy.hpp"
#include "optocool/rng.hpp"
#include "support.hpp"

using namespace optocool;

namespace {

// Central finite differences of ln pi(action|obs) with respect to every
// parameter; the oracle only uses the forward pass.
LayerStack finite_difference_grad(PolicyParams params, const Observation& obs, int action,
                                  double h) {
  LayerStack grad = zero_stack(params.layer_sizes);
  auto logp = [&](const PolicyParams& p) {
    PolicyWorkspace ws;
    forward_into(p, obs, ws);
    return log_prob(ws, action);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto probe = [&](std::vector<double>& theta, std::vector<double>& out) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double up = logp(params);
        theta[i] = saved - h;
        const double down = logp(params);
        theta[i] = saved;
        out[i] = (up - down) / (2.0 * h);
      }
    };
    probe(params.layers[l].w, grad[l].w);
    probe(params.layers[l].b, grad[l].b);
  }
  return grad;
}

double max_relative_error(const LayerStack& a, const LayerStack& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    auto scan = [&](const std::vector<double>& x, const std::vector<double>& y) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double scale = std::max(std::abs(x[i]) + std::abs(y[i]), 1e-8);
        worst = std::max(worst, std::abs(x[i] - y[i]) / scale);
      }
    };
    scan(a[l].w, b[l].w);
    scan(a[l].b, b[l].b);
  }
  return worst;
}

Observation random_obs(Rng& rng, double scale) {
  return Observation{{scale * rng.normal(), scale * rng.normal()}};
}

// Fully randomized parameters for derivative checks. Unlike the training
// initializer this also randomizes the biases: with zero biases a dead first
// hidden layer parks the next layer's pre-activations exactly on the relu
// kink, where central differences are meaningless.
PolicyParams random_params(std::vector<int> sizes, Rng& rng) {
  auto params = init_params(std::move(sizes), rng);
  for (auto& layer : params.layers)
    for (double& b : layer.b) b = 0.1 * rng.normal();
  return params;
}

}  // namespace

TEST_CASE("parameter counts follow the layer sizes") {
  Rng rng(1, 0);
  REQUIRE(init_params({2, 60, 60, 11}, rng).parameter_count() == 4511);
  REQUIRE(init_params({2, 100, 100, 11}, rng).parameter_count() == 11511);
  REQUIRE_THROWS_AS(init_params({2, 60, 60}, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(init_params({3, 60, 60, 11}, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(init_params({2, 0, 60, 11}, rng), std::invalid_argument);
}

TEST_CASE("zero parameters give the uniform distribution") {
  const auto params = zero_params({2, 60, 60, 11});
  const auto dist = forward(params, Observation{{0.4, -1.7}});
  for (double p : dist.probs) REQUIRE(p == Catch::Approx(1.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and normalized") {
  Rng rng(12, 0);
  auto params = init_params({2, 8, 8, 5}, rng);
  const Observation obs{{1.3, -0.4}};
  const auto before = forward(params, obs);

  double sum = 0.0;
  for (double p : before.probs) {
    REQUIRE(p >= 0.0);
    sum += p;
  }
  REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));

  for (double& b : params.layers[2].b) b += 3.25;
  const auto after = forward(params, obs);
  for (std::size_t k = 0; k < before.probs.size(); ++k)
    REQUIRE(after.probs[k] == Catch::Approx(before.probs[k]).epsilon(1e-12));

  // forward is pure: same inputs, bit-identical outputs
  const auto again = forward(params, obs);
  REQUIRE(again.probs == after.probs);
}

TEST_CASE("softmax survives huge logits") {
  auto params = zero_params({2, 4, 4, 3});
  params.layers[2].b = {900.0, 850.0, -900.0};
  const auto dist = forward(params, Observation{{0.0, 0.0}});
  double sum = 0.0;
  for (double p : dist.probs) {
    REQUIRE(std::isfinite(p));
    sum += p;
  }
  REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(dist.probs[0] > dist.probs[1]);
}

TEST_CASE("sampling follows the distribution") {
  SECTION("one-hot always returns its index") {
    ActionDistribution dist{{0.0, 0.0, 1.0, 0.0}};
    Rng rng(3, 3);
    for (int i = 0; i < 100; ++i) REQUIRE(sample_action(dist, rng) == 2);
  }

  SECTION("uniform over 11: frequencies within 3 sigma") {
    ActionDistribution dist{std::vector<double>(11, 1.0 / 11.0)};
    Rng rng(42, 0);
    const int n = 100000;
    std::vector<int> counts(11, 0);
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(sample_action(dist, rng))]++;
    const double expect = n / 11.0;
    const double sigma = std::sqrt(n * (1.0 / 11.0) * (10.0 / 11.0));
    for (int c : counts) REQUIRE(std::abs(c - expect) < 3.0 * sigma);
  }

  SECTION("fixed seed reproduces the index sequence") {
    ActionDistribution dist{{0.2, 0.5, 0.3}};
    Rng a(7, 7), b(7, 7);
    for (int i = 0; i < 200; ++i) REQUIRE(sample_action(dist, a) == sample_action(dist, b));
  }
}

TEST_CASE("argmax takes the smallest index attaining the maximum") {
  REQUIRE(argmax_action(ActionDistribution{{0.1, 0.8, 0.1}}) == 1);
  REQUIRE(argmax_action(ActionDistribution{{0.1, 0.2, 0.25, 0.1, 0.05, 0.05, 0.0, 0.25}}) == 2);
  REQUIRE(argmax_action(ActionDistribution{{0.0, 0.0, 0.0, 1.0}}) == 3);

  // invariant under a common logit shift
  Rng rng(21, 1);
  auto params = init_params({2, 6, 6, 7}, rng);
  const Observation obs{{0.3, 0.9}};
  const int before = argmax_action(forward(params, obs));
  for (double& b : params.layers[2].b) b += 11.0;
  REQUIRE(argmax_action(forward(params, obs)) == before);
}

TEST_CASE("analytic log-prob gradient matches central differences") {
  Rng rng(1234, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto params = random_params({2, 4, 4, 3}, rng);
    const Observation obs = random_obs(rng, 1.0);
    const int action = static_cast<int>(rng.uniform() * 3.0);
    const auto analytic = logprob_grad(params, obs, action);
    const auto numeric = finite_difference_grad(params, obs, action, 1e-5);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  INFO("max relative error " << worst);
  REQUIRE(worst < 1e-4);
}

TEST_CASE("score-function identity: probability-weighted gradients vanish") {
  Rng rng(777, 2);
  for (int trial = 0; trial < 20; ++trial) {
    auto params = random_params({2, 4, 4, 3}, rng);
    const Observation obs = random_obs(rng, 1.0);
    const auto dist = forward(params, obs);

    LayerStack sum = zero_stack(params.layer_sizes);
    PolicyWorkspace ws;
    for (int a = 0; a < 3; ++a) accumulate_logprob_grad(params, obs, a, dist.probs[a], ws, sum);

    for (const auto& layer : sum) {
      for (double v : layer.w) REQUIRE(std::abs(v) < 1e-8);
      for (double v : layer.b) REQUIRE(std::abs(v) < 1e-8);
    }
  }
}

TEST_CASE("saturated action has a vanishing gradient") {
  auto params = zero_params({2, 4, 4, 3});
  params.layers[2].b = {500.0, 0.0, 0.0};  // probs ~ (1, 0, 0)
  const auto grad = logprob_grad(params, Observation{{0.5, 0.5}}, 0);
  for (const auto& layer : grad) {
    for (double v : layer.w) REQUIRE(std::abs(v) < 1e-12);
    for (double v : layer.b) REQUIRE(std::abs(v) < 1e-12);
  }
}

TEST_CASE("adam update behaviour") {
  Rng rng(5, 5);

  SECTION("zero gradient leaves parameters, increments the counter") {
    auto params = init_params({2, 4, 4, 3}, rng);
    const auto before = params.layers;
    const auto zero = zero_stack(params.layer_sizes);
    const auto after = adam_update(params, zero, 0.01);
    REQUIRE(after.adam_t == 1);
    for (std::size_t l = 0; l < before.size(); ++l) {
      REQUIRE(after.layers[l].w == before[l].w);
      REQUIRE(after.layers[l].b == before[l].b);
    }
  }

  SECTION("first step with constant gradient has magnitude ~ eta") {
    // closed form: mhat = g, vhat = g^2, step = eta * g / (|g| + eps)
    auto params = zero_params({2, 4, 4, 3});
    LayerStack grad = zero_stack(params.layer_sizes);
    for (auto& layer : grad) {
      for (double& v : layer.w) v = 2.5;
      for (double& v : layer.b) v = -2.5;
    }
    const double eta = 0.01;
    const auto after = adam_update(params, grad, eta);
    const double expected = eta * 2.5 / (2.5 + 1e-8);
    for (const auto& layer : after.layers) {
      for (double v : layer.w) REQUIRE(v == Catch::Approx(expected).epsilon(1e-9));
      for (double v : layer.b) REQUIRE(v == Catch::Approx(-expected).epsilon(1e-9));
    }
  }

  SECTION("identical calls from identical state agree bit-exactly") {
    auto params = init_params({2, 4, 4, 3}, rng);
    LayerStack grad = zero_stack(params.layer_sizes);
    Rng grng(6, 6);
    for (auto& layer : grad)
      for (double& v : layer.w) v = grng.normal();
    const auto a = adam_update(params, grad, 3e-4);
    const auto b = adam_update(params, grad, 3e-4);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      REQUIRE(a.layers[l].w == b.layers[l].w);
      REQUIRE(a.layers[l].b == b.layers[l].b);
    }
  }

  SECTION("non-finite gradients are rejected") {
    auto params = zero_params({2, 4, 4, 3});
    LayerStack grad = zero_stack(params.layer_sizes);
    grad[1].w[3] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(adam_update_inplace(params, grad, 0.01), std::invalid_argument);
  }
}

TEST_CASE("initialization keeps the starting policy spread over actions") {
  Rng rng(31, 4);
  const auto params = init_params({2, 60, 60, 11}, rng);
  // with order-one observations no action should start out negligible
  const auto dist = forward(params, Observation{{1.0, -1.0}});
  for (double p : dist.probs) REQUIRE(p > 1e-4);
}
