#include <doctest.h>

#include <omp.h>

#include <random>

#include "robkmr/robust_center.hpp"
#include "robkmr/scan.hpp"
#include "robkmr/serial_reference.hpp"
#include "robkmr/simulation.hpp"
#include "support/fixtures.hpp"

using namespace robkmr;

namespace {

template <class F>
auto with_threads(int t, F f) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(t);
  auto out = f();
  omp_set_num_threads(saved);
  return out;
}

const int kThreadCounts[] = {1, 4};

}  // namespace

TEST_CASE("distance and Gram kernels match the serial reference exactly") {
  std::mt19937_64 rng(2024);
  for (Eigen::Index n : {3, 7, 64, 131}) {
    CAPTURE(n);
    const auto cont = fixture::continuous_view(n, 5, rng);
    const auto geno = fixture::genotype_view(n, 9, rng);
    const double bw = 1.7;
    const auto ref_d = serial::pairwise_sq_distances(cont.values);
    const auto ref_g = serial::gaussian_gram(cont, bw);
    const auto ref_i = serial::ibs_gram(geno);
    const auto ref_h = serial::hadamard(ref_g, ref_i);
    for (int t : kThreadCounts) {
      CAPTURE(t);
      CHECK(with_threads(t, [&] { return pairwise_sq_distances(cont.values); }) == ref_d);
      CHECK(with_threads(t, [&] { return gaussian_gram(cont, bw); }).values() == ref_g.values());
      CHECK(with_threads(t, [&] { return ibs_gram(geno); }).values() == ref_i.values());
      CHECK(with_threads(t, [&] { return hadamard(ref_g, ref_i); }).values() == ref_h.values());
    }
  }
}

TEST_CASE("centering and trace match the serial reference exactly") {
  std::mt19937_64 rng(11);
  for (Eigen::Index n : {3, 50, 120}) {
    CAPTURE(n);
    const auto k = fixture::random_psd(n, rng);
    const auto m = fixture::random_psd(n, rng);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Eigen::VectorXd w(n);
    for (auto& v : w) v = u(rng);
    w /= w.sum();
    const auto ref_c = serial::robust_center(k, w);
    const double ref_t = serial::trace_of_product(k.values(), m.values());
    for (int t : kThreadCounts) {
      CAPTURE(t);
      CHECK(with_threads(t, [&] { return robust_center(k, w); }).values() == ref_c.values());
      CHECK(with_threads(t, [&] { return trace_of_product(k.values(), m.values()); }) == ref_t);
    }
  }
}

TEST_CASE("KIRWLS weights do not depend on the thread count") {
  std::mt19937_64 rng(5);
  const auto k = fixture::gaussian_kernel(90, 4, rng);
  const auto loss = RobustLoss::tuned(LossKind::Hampel);
  const auto a = with_threads(1, [&] { return kirwls_weights(k, loss, {}); });
  const auto b = with_threads(4, [&] { return kirwls_weights(k, loss, {}); });
  CHECK(a.weights == b.weights);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("simulation replicates do not depend on the thread count") {
  SimConfig cfg;
  cfg.n = 50;
  cfg.reps = 8;
  cfg.test = TestKind::Overall;
  cfg.alphas = {0.5, 0.0, 0.0};
  const auto a = with_threads(1, [&] { return estimate_power(cfg); });
  const auto b = with_threads(4, [&] { return estimate_power(cfg); });
  CHECK(a.rejection_rate == b.rejection_rate);
  CHECK(a.mean_statistic == b.mean_statistic);
  CHECK(a.excluded == b.excluded);
}

TEST_CASE("scan output does not depend on the thread count") {
  const auto dir = fixture::temp_dir("threads_scan");
  fixture::ToyOptions opt;
  opt.genes = {3, 2, 2};
  opt.samples = 30;
  const auto bundle = load_bundle(fixture::write_toy_bundle(dir, opt),
                                  {ViewKind::Genotype, ViewKind::Continuous, ViewKind::Continuous}, NaPolicy::Fail);
  RunConfig cfg;
  cfg.checkpoint_every = 5;
  const auto text = [&](int t) {
    return with_threads(t, [&] { return format_outputs(triplet_scan(bundle, cfg), nlohmann::json::object()).scan_tsv; });
  };
  CHECK(text(1) == text(4));
}
