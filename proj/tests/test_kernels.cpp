#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "robkmr/error.hpp"
#include "robkmr/kernels.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace robkmr;

namespace {

DataView view_from(const Eigen::MatrixXd& m, ViewKind kind = ViewKind::Continuous) {
  DataView v;
  v.kind = kind;
  v.values = m;
  for (Eigen::Index j = 0; j < m.cols(); ++j) v.feature_ids.push_back("f" + std::to_string(j));
  return v;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("median bandwidth small cases") {
  Eigen::MatrixXd two(2, 1);
  two << 0.0, 2.0;
  DataView v2;
  v2.values = two;
  v2.feature_ids = {"a"};
  CHECK(median_bandwidth(v2) == 2.0);

  Eigen::MatrixXd three(3, 1);
  three << 0.0, 1.0, 3.0;
  CHECK(median_bandwidth(view_from(three)) == 2.0);

  Eigen::MatrixXd four(4, 1);
  four << 0.0, 1.0, 3.0, 7.0;  // distances 1,2,3,4,6,7 -> lower median 3
  CHECK(median_bandwidth(view_from(four)) == 3.0);
}

TEST_CASE("median bandwidth matches brute force") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto v = fixture::continuous_view(50, 4, rng);
    const double expected = oracle::lower_median(oracle::pairwise_distances(v.values));
    CHECK(median_bandwidth(v) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("identical rows give a zero bandwidth error") {
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 2, 1.5);
  CHECK_THROWS_AS(median_bandwidth(view_from(same)), Error);
}

TEST_CASE("gaussian gram") {
  std::mt19937_64 rng(4);
  SUBCASE("exponent minus one") {
    const double bw = 1.7;
    Eigen::MatrixXd x(2, 1);
    x << 0.0, bw * std::sqrt(2.0);
    const auto k = gaussian_gram(view_from(x), bw);
    CHECK(k(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(k(0, 0) == 1.0);
    CHECK(k(1, 1) == 1.0);
  }
  SUBCASE("brute force") {
    const auto v = fixture::continuous_view(10, 3, rng);
    const auto k = gaussian_gram(v, 0.9);
    CHECK(max_abs(k.values() - oracle::gaussian(v.values, 0.9)) <= 1e-14);
    CHECK(k.values() == k.values().transpose());
    for (Eigen::Index i = 0; i < 10; ++i) CHECK(k(i, i) == 1.0);
    CHECK(k.values().minCoeff() > 0.0);
    CHECK(k.values().maxCoeff() <= 1.0);
  }
  SUBCASE("nonpositive bandwidth") {
    const auto v = fixture::continuous_view(6, 2, rng);
    CHECK_THROWS_AS(gaussian_gram(v, 0.0), Error);
    CHECK_THROWS_AS(gaussian_gram(v, -1.0), Error);
  }
}

TEST_CASE("ibs gram") {
  SUBCASE("hand examples") {
    Eigen::MatrixXd g1(3, 1);
    g1 << 0, 2, 0;
    const auto k1 = ibs_gram(view_from(g1, ViewKind::Genotype));
    CHECK(k1(0, 1) == 0.0);
    CHECK(k1(0, 2) == 1.0);

    Eigen::MatrixXd g2(3, 2);
    g2 << 0, 1, 2, 1, 1, 1;
    const auto k2 = ibs_gram(view_from(g2, ViewKind::Genotype));
    CHECK(k2(0, 1) == 0.5);
    CHECK(k2(0, 2) == 0.75);
  }
  SUBCASE("brute force") {
    std::mt19937_64 rng(8);
    const auto v = fixture::genotype_view(25, 12, rng);
    const auto k = ibs_gram(v);
    CHECK(max_abs(k.values() - oracle::ibs(v.values)) <= 1e-15);
    CHECK(k.values() == k.values().transpose());
    CHECK(k.values().minCoeff() >= 0.0);
    CHECK(k.values().maxCoeff() <= 1.0);
  }
  SUBCASE("invalid coding") {
    Eigen::MatrixXd g(3, 1);
    g << 0, 3, 1;
    CHECK_THROWS_AS(ibs_gram(view_from(g, ViewKind::Genotype)), Error);
    g << 0, 0.5, 1;
    CHECK_THROWS_AS(ibs_gram(view_from(g, ViewKind::Genotype)), Error);
  }
}

TEST_CASE("hadamard") {
  std::mt19937_64 rng(12);
  const auto k = fixture::random_psd(20, rng);
  SUBCASE("identities") {
    CHECK(max_abs(hadamard(k, GramMatrix::ones(20)).values() - k.values()) == 0.0);
    const Eigen::MatrixXd diag = k.values().diagonal().asDiagonal();
    CHECK(max_abs(hadamard(k, GramMatrix::identity(20)).values() - diag) == 0.0);
  }
  SUBCASE("schur product stays PSD") {
    for (int rep = 0; rep < 10; ++rep) {
      const auto a = fixture::random_psd(20, rng, 5);
      const auto b = fixture::random_psd(20, rng, 5);
      const auto h = hadamard(a, b);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.values());
      CHECK(es.eigenvalues().minCoeff() >= -1e-8 * es.eigenvalues().maxCoeff());
    }
  }
  SUBCASE("commutative and associative") {
    const auto a = fixture::random_psd(20, rng);
    const auto b = fixture::random_psd(20, rng);
    CHECK(max_abs(hadamard(a, b).values() - hadamard(b, a).values()) <= 1e-12);
    CHECK(max_abs(hadamard(hadamard(a, b), k).values() - hadamard(a, hadamard(b, k)).values()) <= 1e-12);
  }
  SUBCASE("order mismatch") {
    CHECK_THROWS_AS(hadamard(k, GramMatrix::identity(19)), Error);
  }
}

TEST_CASE("classical centering") {
  std::mt19937_64 rng(21);
  const auto k = fixture::random_psd(30, rng);
  const auto c = classical_center(k);
  CHECK(c.values().rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(c.values().colwise().sum().cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(max_abs(classical_center(c).values() - c.values()) <= 1e-12);
  CHECK(max_abs(classical_center(GramMatrix::ones(9)).values()) <= 1e-15);
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(30, 30) - Eigen::MatrixXd::Constant(30, 30, 1.0 / 30.0);
  CHECK(max_abs(c.values() - h * k.values() * h) <= 1e-12);
}

TEST_CASE("gram matrix validation") {
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(GramMatrix{asym}, Error);
  CHECK_THROWS_AS(GramMatrix(Eigen::MatrixXd::Zero(2, 3)), Error);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(3, 3);
  nan(1, 1) = NAN;
  CHECK_THROWS_AS(GramMatrix{nan}, Error);
}

TEST_CASE("trace of product") {
  std::mt19937_64 rng(30);
  const Eigen::MatrixXd a = fixture::normal_matrix(15, 15, rng);
  const Eigen::MatrixXd b = fixture::normal_matrix(15, 15, rng);
  CHECK(trace_of_product(a, b) == doctest::Approx((a * b).trace()).epsilon(1e-12));
}

TEST_CASE("build gram dispatch") {
  std::mt19937_64 rng(31);
  const auto v = fixture::continuous_view(12, 3, rng);
  const auto k = build_gram(v, KernelKind::Gaussian, 0.0);
  CHECK(max_abs(k.values() - gaussian_gram(v, median_bandwidth(v)).values()) == 0.0);
  const auto lin = build_gram(v, KernelKind::Linear);
  CHECK(max_abs(lin.values() - v.values * v.values.transpose()) <= 1e-12);
  CHECK(parse_kernel_kind(to_string(KernelKind::Ibs)) == KernelKind::Ibs);
  CHECK(parse_view_kind(to_string(ViewKind::Genotype)) == ViewKind::Genotype);
}
