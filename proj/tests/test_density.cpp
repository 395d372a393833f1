#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "susd/density.hpp"
#include "test_util.hpp"

using namespace susd;

namespace {

// Zero-weight model whose outputs are exactly its bias: mu = bias[0..dim),
// logvar = bias[dim..2dim). Lets tests dictate the predicted Gaussian.
GaussianCondModel<double> bias_model(const std::vector<double>& mu,
                                     const std::vector<double>& logvar) {
  const int dim = static_cast<int>(mu.size());
  GaussianCondModel<double> m;
  m.net = Mlp<double>({dim, 2 * dim}, Activation::relu);
  for (int d = 0; d < dim; ++d) {
    m.net.biases[0](0, d) = mu[d];
    m.net.biases[0](0, dim + d) = logvar[d];
  }
  m.fitted = true;
  return m;
}

FactorSpec two_factor_spec(int d0, int d1) {
  return FactorSpec({{"agent0", 0, d0}, {"agent1", d0, d0 + d1}}, d0 + d1);
}

// Test oracle: independent diagonal-Gaussian NLL written directly from the
// density formula, using variances rather than log-variances.
double marginal_nll_oracle(const std::vector<double>& x, const std::vector<double>& mu,
                           const std::vector<double>& var) {
  double nll = 0.0;
  for (size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - mu[d];
    nll += diff * diff / var[d] + std::log(var[d]) + std::log(2.0 * M_PI);
  }
  return 0.5 * nll;
}

}  // namespace

TEST_CASE("factor_nll: closed-form values") {
  auto spec = FactorSpec::single(2);
  auto model = bias_model({0.0, 0.0}, {0.0, 0.0});  // N(0, I)

  SUBCASE("unit Gaussian at s' = (1,1) -> 1 + log(2*pi)") {
    const double nll = factor_nll(model, spec, {0.0, 0.0}, {1.0, 1.0}, 0);
    CHECK(nll == doctest::Approx(1.0 + kLog2Pi).epsilon(1e-12));
    CHECK(nll == doctest::Approx(2.8378770664093455).epsilon(1e-12));
  }
  SUBCASE("evaluated at the mode -> dim/2 * log(2*pi)") {
    CHECK(factor_nll(model, spec, {0.5, -2.0}, {0.0, 0.0}, 0) ==
          doctest::Approx(0.5 * 2 * kLog2Pi).epsilon(1e-12));
  }
}

TEST_CASE("factor_nll: factor NLLs sum exactly to the full-state NLL") {
  Rng rng(11);
  auto spec = two_factor_spec(3, 2);
  auto model = make_density_model<double>(5, 16, 2, rng);
  model.fitted = true;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(5), sn(5);
    for (auto& v : s) v = rng.normal();
    for (auto& v : sn) v = rng.normal();
    const double total = factor_nll(model, spec, s, sn, 0) +
                         factor_nll(model, spec, s, sn, 1);
    const double full = full_nll(model, s, sn);
    CHECK(total == doctest::Approx(full).epsilon(1e-12));
  }
}

TEST_CASE("factor_nll: partitioned parameters equal the directly constructed marginal") {
  Rng rng(12);
  auto spec = two_factor_spec(4, 3);
  auto model = make_density_model<double>(7, 24, 2, rng);
  model.fitted = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(7), sn(7);
    for (auto& v : s) v = rng.normal();
    for (auto& v : sn) v = rng.normal();
    std::vector<double> mu, logvar;
    predict_gaussian(model, s, mu, logvar);
    for (int i = 0; i < 2; ++i) {
      const auto& f = spec.factor(i);
      // directly constructed marginal Gaussian over the factor's dims
      std::vector<double> mx(sn.begin() + f.begin, sn.begin() + f.end);
      std::vector<double> mmu(mu.begin() + f.begin, mu.begin() + f.end);
      std::vector<double> mvar;
      for (int d = f.begin; d < f.end; ++d) mvar.push_back(std::exp(logvar[d]));
      const double want = marginal_nll_oracle(mx, mmu, mvar);
      const double got = factor_nll(model, spec, s, sn, i);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("fit: NLL decreases monotonically over the first 10 steps on a fixed batch") {
  Rng rng(13);
  const int dim = 3;
  auto model = make_density_model<double>(dim, 32, 2, rng);
  AdamState<double> opt(1e-3);
  auto params = model.net.param_map("density");

  const int n = 32;
  Mat<double> s(n, dim), sn(n, dim);
  for (int r = 0; r < n; ++r) {
    s(r, 0) = rng.uniform(-1, 1);
    s(r, 1) = rng.uniform(-1, 1);
    s(r, 2) = rng.uniform(-1, 1);
    sn(r, 0) = 0.5 * s(r, 0);       // deterministic transition map
    sn(r, 1) = s(r, 1) + 0.1;
    sn(r, 2) = -s(r, 2);
  }
  double prev = 1e300;
  for (int step = 0; step < 10; ++step) {
    Graph<double> g;
    auto loss = density_nll_objective(g, model, s, sn);
    const double value = g.value(loss).scalar();
    CHECK(value < prev);
    prev = value;
    adam_step(opt, params, g.backward(loss));
  }
}

TEST_CASE("fit: constant target drives mu to the constant and variance down") {
  Rng rng(14);
  const int dim = 2;
  auto model = make_density_model<double>(dim, 32, 2, rng);
  AdamState<double> opt(1e-2);
  std::vector<Transition> data(64);
  Rng drng(15);
  for (auto& tr : data) {
    tr.s = {drng.uniform(-1, 1), drng.uniform(-1, 1)};
    tr.s_next = {0.7, -0.3};  // constant regardless of s
  }
  std::vector<const Transition*> ptrs;
  for (auto& tr : data) ptrs.push_back(&tr);
  Rng fit_rng(16);
  fit_density(model, opt, ptrs, 2000, 64, fit_rng);

  std::vector<double> mu, logvar;
  predict_gaussian(model, data[0].s, mu, logvar);
  CHECK(std::abs(mu[0] - 0.7) < 0.05);
  CHECK(std::abs(mu[1] + 0.3) < 0.05);
  for (double lv : logvar) CHECK(lv < -4.0);  // heading to the lower clamp
}

TEST_CASE("fit: identical data and seed give identical parameters") {
  auto run = [] {
    Rng rng(17);
    auto model = make_density_model<double>(2, 8, 1, rng);
    AdamState<double> opt(1e-3);
    std::vector<Transition> data(16);
    Rng drng(18);
    for (auto& tr : data) {
      tr.s = {drng.normal(), drng.normal()};
      tr.s_next = {tr.s[0] + 0.1, tr.s[1]};
    }
    std::vector<const Transition*> ptrs;
    for (auto& tr : data) ptrs.push_back(&tr);
    Rng fit_rng(19);
    fit_density(model, opt, ptrs, 40, 8, fit_rng);
    return model;
  };
  auto a = run();
  auto b = run();
  for (size_t l = 0; l < a.net.layer_count(); ++l) {
    CHECK(a.net.weights[l].v == b.net.weights[l].v);
    CHECK(a.net.biases[l].v == b.net.biases[l].v);
  }
  CHECK_THROWS_AS(
      [] {
        Rng rng(1);
        auto m = make_density_model<double>(2, 8, 1, rng);
        AdamState<double> opt;
        Rng r2(2);
        fit_density(m, opt, {}, 1, 8, r2);
      }(),
      ContractError);
}

TEST_CASE("curiosity_weights: floor, values and monotonicity") {
  SUBCASE("factor NLL of 4 gives weight 2") {
    // dim 2, mu = 0, logvar = 0: NLL = (||x||^2 + 2 log 2pi) / 2 = 4
    const double x0 = std::sqrt(8.0 - 2.0 * kLog2Pi);
    auto spec = FactorSpec::single(2);
    auto model = bias_model({0.0, 0.0}, {0.0, 0.0});
    auto w = curiosity_weights(model, spec, {0.0, 0.0}, {x0, 0.0});
    CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("negative NLL (high-density transition) floors to weight 0") {
    // tight variance at the clamp, evaluated at the mode: NLL = dim*(-10+log2pi)/2 < 0
    auto spec = FactorSpec::single(2);
    auto model = bias_model({0.0, 0.0}, {-10.0, -10.0});
    auto w = curiosity_weights(model, spec, {0.0, 0.0}, {0.0, 0.0});
    CHECK(w[0] == 0.0);
  }
  SUBCASE("well-predicted factor weighs strictly less than a poorly predicted one") {
    auto spec = two_factor_spec(2, 2);
    auto model = bias_model({0, 0, 0, 0}, {0, 0, 0, 0});
    // factor 0 lands on the mode; factor 1 is far out in the tails
    auto w = curiosity_weights(model, spec, {0, 0, 0, 0}, {0.0, 0.0, 3.0, -3.0});
    CHECK(w[0] < w[1]);
  }
  SUBCASE("before the first fit all weights are 1") {
    Rng rng(20);
    auto spec = two_factor_spec(2, 2);
    auto model = make_density_model<double>(4, 8, 1, rng);
    auto w = curiosity_weights(model, spec, {1, 2, 3, 4}, {4, 3, 2, 1});
    CHECK(w == std::vector<double>{1.0, 1.0});
  }
}

TEST_CASE("curiosity_weights: permuting factor blocks permutes the weights") {
  // State layout A: [u (2 dims), v (3 dims)]; layout B: [v, u]. The bias model
  // is permuted the same way, so the per-factor weights must swap exactly.
  std::vector<double> mu_u = {0.1, -0.2}, mu_v = {0.4, 0.0, -0.7};
  std::vector<double> lv_u = {0.3, -0.5}, lv_v = {-1.0, 0.2, 0.9};
  std::vector<double> xu = {1.0, 0.5}, xv = {-0.3, 2.0, 0.8};

  auto model_a = bias_model({mu_u[0], mu_u[1], mu_v[0], mu_v[1], mu_v[2]},
                            {lv_u[0], lv_u[1], lv_v[0], lv_v[1], lv_v[2]});
  auto spec_a = two_factor_spec(2, 3);
  auto wa = curiosity_weights(model_a, spec_a, {0, 0, 0, 0, 0},
                              {xu[0], xu[1], xv[0], xv[1], xv[2]});

  auto model_b = bias_model({mu_v[0], mu_v[1], mu_v[2], mu_u[0], mu_u[1]},
                            {lv_v[0], lv_v[1], lv_v[2], lv_u[0], lv_u[1]});
  auto spec_b = two_factor_spec(3, 2);
  auto wb = curiosity_weights(model_b, spec_b, {0, 0, 0, 0, 0},
                              {xv[0], xv[1], xv[2], xu[0], xu[1]});

  CHECK(wa[0] == doctest::Approx(wb[1]).epsilon(1e-12));
  CHECK(wa[1] == doctest::Approx(wb[0]).epsilon(1e-12));
}

TEST_CASE("gradients: density NLL matches finite differences") {
  Rng rng(21);
  auto model = make_density_model<double>(3, 6, 2, rng);
  const int n = 5;
  Mat<double> s(n, 3), sn(n, 3);
  for (auto& v : s.v) v = rng.normal();
  for (auto& v : sn.v) v = rng.normal();

  Graph<double> g;
  auto loss = density_nll_objective(g, model, s, sn);
  auto ad = g.backward(loss);
  auto fd = testutil::finite_diff_grads(
      model.net.param_map("density"),
      [&]() {
        Graph<double> gg;
        return gg.value(density_nll_objective(gg, model, s, sn)).scalar();
      },
      1e-5);
  CHECK(testutil::max_grad_mismatch(ad, fd) < 1e-6);
}
