#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "robkmr/error.hpp"
#include "robkmr/inference.hpp"
#include "robkmr/simulation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace robkmr;

namespace {

Eigen::MatrixXd design(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::MatrixXd x(n, 3);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) << 1.0, z(rng), z(rng);
  return x;
}

ComponentSet seven_components(Eigen::Index n, std::mt19937_64& rng) {
  std::array<GramMatrix, 3> k;
  for (auto& m : k) m = classical_center(fixture::gaussian_kernel(n, 3, rng));
  return assemble_components(k[0], k[1], k[2]);
}

/// Columns of sqrt(Sigma) for drawing N(0, Sigma).
Eigen::MatrixXd matrix_root(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

MixedModelFit null_fit_for(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const ComponentSet& comps) {
  return reml_fit(y, x, comps.without_last());
}

}  // namespace

TEST_CASE("satterthwaite reference values") {
  const auto a = satterthwaite(5.0, 10.0);
  CHECK(a.gamma == 1.0);
  CHECK(a.nu == 5.0);
  const auto b = satterthwaite(2.0, 16.0);
  CHECK(b.gamma == 4.0);
  CHECK(b.nu == 0.5);
  CHECK_THROWS_AS(satterthwaite(0.0, 1.0), Error);
  CHECK_THROWS_AS(satterthwaite(1.0, -1.0), Error);
}

TEST_CASE("satterthwaite moments round-trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> logu(-6.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = std::pow(10.0, logu(rng));
    const double v = std::pow(10.0, logu(rng));
    const auto s = satterthwaite(e, v);
    CHECK(std::abs(s.gamma * s.nu - e) <= 1e-12 * e);
    CHECK(std::abs(2.0 * s.gamma * s.gamma * s.nu - v) <= 1e-12 * v);
  }
}

TEST_CASE("scaled chi-square p-value") {
  CHECK(scaled_chisq_pvalue(0.0, 1.0, 3.0) == 1.0);
  CHECK(scaled_chisq_pvalue(2.0 * std::log(20.0), 1.0, 2.0) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(scaled_chisq_pvalue(3000.0, 1.0, 2.0) == doctest::Approx(std::exp(-1500.0)).epsilon(1e-12));
  CHECK_THROWS_AS(scaled_chisq_pvalue(1.0, 0.0, 1.0), Error);
  CHECK_THROWS_AS(scaled_chisq_pvalue(1.0, 1.0, -2.0), Error);
}

TEST_CASE("p-values match the quadrature oracle") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lognu(-1.0, 2.5);
  std::uniform_real_distribution<double> loggamma(-3.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int deep = 0;
  for (int i = 0; i < 40; ++i) {
    const double nu = std::pow(10.0, lognu(rng));
    const double gamma = std::pow(10.0, loggamma(rng));
    // Spread targets from the bulk to p = 1e-30.
    const double target_log10p = -30.0 * u(rng);
    const double x = boost::math::gamma_q_inv(0.5 * nu, std::pow(10.0, target_log10p)) * 2.0;
    const double s = x * gamma;
    const double p = scaled_chisq_pvalue(s, gamma, nu);
    const double expected = oracle::scaled_chisq_tail(s, gamma, nu);
    CAPTURE(nu);
    CAPTURE(s);
    CHECK(std::abs(p - expected) <= 1e-10 * expected);
    if (expected < 1e-20) ++deep;
  }
  CHECK(deep >= 5);
}

TEST_CASE("p-value decreases strictly in the statistic") {
  for (double nu : {0.3, 1.0, 4.5, 60.0}) {
    double prev = 1.0;
    for (int k = 1; k <= 400; ++k) {
      const double p = scaled_chisq_pvalue(0.25 * k, 1.3, nu);
      // Strict where both values are distinguishable from 1 and from 0.
      if (prev < 1.0 - 1e-12 && p > 1e-300) {
        CHECK(p < prev);
      } else {
        CHECK(p <= prev);
      }
      prev = p;
    }
  }
}

TEST_CASE("overall statistic ignores shifts in the covariate span") {
  std::mt19937_64 rng(3);
  const Eigen::Index n = 60;
  const auto comps = seven_components(n, rng);
  const auto x = design(n, rng);
  const Eigen::VectorXd y = fixture::normal_matrix(n, 1, rng);
  const auto base = overall_score_test(y, x, comps);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd c = 10.0 * fixture::normal_matrix(3, 1, rng);
    const auto shifted = overall_score_test(y + x * c, x, comps);
    CHECK(std::abs(shifted.statistic - base.statistic) <= 1e-8 * base.statistic);
    CHECK(shifted.p_value == doctest::Approx(base.p_value).epsilon(1e-8));
  }
  CHECK(base.statistic >= 0.0);
  CHECK(base.gamma > 0.0);
  CHECK(base.nu > 0.0);
  CHECK(base.gamma * base.nu == doctest::Approx(base.mean).epsilon(1e-12));
}

TEST_CASE("overall moments for a fixed kernel") {
  std::mt19937_64 rng(4);
  const Eigen::Index n = 50;
  const auto comps = seven_components(n, rng);
  const auto x = design(n, rng);
  const Eigen::MatrixXd k = comps.sum();
  const Eigen::MatrixXd p0 =
      Eigen::MatrixXd::Identity(n, n) - x * (x.transpose() * x).inverse() * x.transpose();
  const Eigen::VectorXd y0 = fixture::normal_matrix(n, 1, rng);
  const auto plugin = overall_score_test(y0, x, comps, OverallOptions{true});
  const auto exact = overall_score_test(y0, x, comps);
  const Eigen::MatrixXd a = p0 * k;
  const double d = static_cast<double>(n - 3);
  CHECK(plugin.mean == doctest::Approx(0.5 * a.trace()).epsilon(1e-10));
  CHECK(plugin.variance == doctest::Approx(0.5 * (a * a).trace()).epsilon(1e-10));
  CHECK(exact.mean == plugin.mean);
  CHECK(exact.variance ==
        doctest::Approx((d * (a * a).trace() - a.trace() * a.trace()) / (2.0 * (d + 2.0))).epsilon(1e-10));
  CHECK(exact.statistic == plugin.statistic);

  // Monte Carlo under the null with this design.
  const int reps = 4000;
  double sum = 0.0;
  double sum_sq = 0.0;
  std::normal_distribution<double> z(0.0, 1.0);
  for (int r = 0; r < reps; ++r) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = 2.0 + x(i, 1) + 3.0 * z(rng);
    const double s = overall_score_test(y, x, k).statistic;
    sum += s;
    sum_sq += s * s;
  }
  const double mean = sum / reps;
  const double var = sum_sq / reps - mean * mean;
  const double se_mean = std::sqrt(var / reps);
  // SE of a sample variance from the fourth moment, approximated via the
  // chi-square shape of S.
  const double se_var = var * std::sqrt(2.0 / reps + 12.0 / (exact.nu * reps));
  CHECK(std::abs(mean - exact.mean) <= 3.0 * se_mean);
  CHECK(std::abs(var - exact.variance) <= 3.0 * se_var);
}

TEST_CASE("overall test edge cases") {
  std::mt19937_64 rng(5);
  const Eigen::Index n = 30;
  const auto x = design(n, rng);
  const Eigen::VectorXd y = fixture::normal_matrix(n, 1, rng);
  SUBCASE("kernel inside the covariate span") {
    const Eigen::MatrixXd k = x * x.transpose();
    const auto r = overall_score_test(y, x, k);
    CHECK(r.degenerate);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("zero kernel") {
    try {
      overall_score_test(y, x, Eigen::MatrixXd::Zero(n, n));
      FAIL("expected DegenerateTest");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateTest);
    }
  }
  SUBCASE("perfect fit") {
    try {
      overall_score_test(x * Eigen::Vector3d(1.0, 2.0, 3.0), x, Eigen::MatrixXd::Identity(n, n));
      FAIL("expected PerfectFit");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PerfectFit);
    }
  }
}

TEST_CASE("composite statistic") {
  std::mt19937_64 rng(6);
  const Eigen::Index n = 60;
  const auto comps = seven_components(n, rng);
  const auto x = design(n, rng);
  const Eigen::VectorXd y = x * Eigen::Vector3d(1.0, 0.5, -0.5) + fixture::normal_matrix(n, 1, rng);
  const auto null_fit = null_fit_for(y, x, comps);

  SUBCASE("shift invariance") {
    const auto base = composite_score_test(y, x, comps, null_fit);
    CHECK(base.statistic >= 0.0);
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::VectorXd c = 10.0 * fixture::normal_matrix(3, 1, rng);
      const auto shifted = composite_score_test(y + x * c, x, comps, null_fit);
      CHECK(std::abs(shifted.statistic - base.statistic) <= 1e-8 * base.statistic);
    }
  }
  SUBCASE("y in the covariate span") {
    const auto r = composite_score_test(x * Eigen::Vector3d(2.0, -1.0, 4.0), x, comps, null_fit);
    CHECK(std::abs(r.statistic) <= 1e-20 * r.mean + 1e-18);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("legacy prefactor changes the scale only") {
    const auto a = composite_score_test(y, x, comps, null_fit);
    const auto b = composite_score_test(y, x, comps, null_fit, CompositeOptions{true});
    CHECK(b.statistic == doctest::Approx(a.statistic / null_fit.sigma2).epsilon(1e-12));
    CHECK(b.p_value == doctest::Approx(a.p_value).epsilon(1e-12));
    CHECK(b.nu == doctest::Approx(a.nu).epsilon(1e-12));
  }
  SUBCASE("null fit must drop exactly the last component") {
    CHECK_THROWS_AS(composite_score_test(y, x, comps.without_last(), null_fit), Error);
    auto unconverged = null_fit;
    unconverged.converged = false;
    CHECK_THROWS_AS(composite_score_test(y, x, comps, unconverged), Error);
  }
}

TEST_CASE("composite null mean matches Monte Carlo with the true covariance") {
  std::mt19937_64 rng(7);
  const Eigen::Index n = 50;
  const auto comps = seven_components(n, rng);
  const auto x = design(n, rng);
  MixedModelFit truth;
  truth.converged = true;
  truth.sigma2 = 1.0;
  truth.tau = Eigen::VectorXd::Zero(6);
  truth.tau(0) = 2.0;
  truth.tau(4) = 1.0;
  truth.sigma = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index m = 0; m < 6; ++m) truth.sigma += truth.tau(m) * comps.kernels[static_cast<std::size_t>(m)].values();
  const Eigen::MatrixXd root = matrix_root(truth.sigma);
  const Eigen::Vector3d beta(1.0, -2.0, 0.5);

  const Eigen::VectorXd probe = x * beta;
  const auto reference = composite_score_test(probe + root * fixture::normal_matrix(n, 1, rng), x, comps, truth);

  const int reps = 2000;
  std::vector<double> s(reps);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = probe + root * fixture::normal_matrix(n, 1, rng);
    s[static_cast<std::size_t>(r)] = composite_score_test(y, x, comps, truth).statistic;
  }
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= reps - 1;
  CHECK(std::abs(mean - reference.mean) <= 3.0 * std::sqrt(var / reps));
  // Gaussian quadratic forms have exactly these moments.
  CHECK(var == doctest::Approx(reference.variance).epsilon(0.15));
}

TEST_CASE("composite power smoke test" * doctest::description("slow")) {
  SimConfig cfg;
  cfg.n = 300;
  cfg.alphas = {0.0, 0.0, 1.0};
  cfg.seed = 20240611;
  std::vector<double> p;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const auto data = simulate_dataset(cfg, rep);
    const auto out = run_replicate(cfg, data, TestKind::Composite);
    if (out.ok) p.push_back(out.p_value);
  }
  REQUIRE(p.size() >= 48);
  std::sort(p.begin(), p.end());
  const double median = p[(p.size() - 1) / 2];
  MESSAGE("median composite p at alpha3 = 1: " << median);
  CHECK(median < 0.05);
}
