#include <doctest.h>

#include <cmath>
#include <numeric>

#include "avalanche/rng.hpp"
#include "avalanche/stats.hpp"

using namespace avalanche;

TEST_CASE("pairwise sum is exact on representable data and order-fixed") {
  std::vector<double> xs(1000);
  std::iota(xs.begin(), xs.end(), 1.0);
  CHECK(pairwise_sum(xs) == 500500.0);
  std::vector<double> tiny(100000, 0.1);
  CHECK(std::abs(pairwise_sum(tiny) - 10000.0) < 1e-9);
}

TEST_CASE("estimate with confidence interval") {
  std::vector<double> xs{1, 2, 3, 4, 5};
  const auto e = EstimateWithCI::from_samples(xs);
  CHECK(e.estimate == doctest::Approx(3.0));
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(2.5 / 5.0)));
  CHECK(e.count == 5);
  CHECK(e.z() == doctest::Approx(2.5758293035).epsilon(1e-9));
  CHECK(e.ci_low() < 3.0);
  CHECK(e.ci_high() > 3.0);
  const auto p = EstimateWithCI::proportion(25, 100);
  CHECK(p.estimate == doctest::Approx(0.25));
  CHECK(p.stderr_ == doctest::Approx(std::sqrt(0.25 * 0.75 / 100)));
}

TEST_CASE("chi-square goodness of fit") {
  // Fair die: 60 throws with exact counts gives statistic 0.
  std::vector<std::int64_t> obs(6, 10);
  std::vector<double> pr(6, 1.0 / 6);
  auto r = chi_square_gof(obs, pr);
  CHECK(r.statistic == doctest::Approx(0.0));
  CHECK(r.dof == 5);
  CHECK(r.p_value == doctest::Approx(1.0));
  // Textbook value: counts (5, 15) against (0.5, 0.5) give 5 with 1 dof.
  std::vector<std::int64_t> o2{5, 15};
  std::vector<double> p2{0.5, 0.5};
  r = chi_square_gof(o2, p2);
  CHECK(r.statistic == doctest::Approx(5.0));
  CHECK(r.p_value == doctest::Approx(0.0253473).epsilon(1e-5));
}

TEST_CASE("ks distance against the normal") {
  CHECK(ks_normal({0.0}, 0.0, 1.0) == doctest::Approx(0.5));
  Rng rng = make_stream(3, 0);
  std::vector<double> xs(20000);
  for (double& x : xs) x = normal(rng, 1.0, 2.0);
  CHECK(ks_normal(xs, 1.0, 2.0) < 0.015);
  CHECK(ks_normal(xs, 0.0, 2.0) > 0.15);
  // Ties: a point mass at 0 is half below the normal median.
  std::vector<double> zeros(100, 0.0);
  CHECK(ks_normal(zeros, 0.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("total variation") {
  std::vector<double> a{0.5, 0.5}, b{0.25, 0.25, 0.5};
  CHECK(total_variation(a, b) == doctest::Approx(0.5));
  CHECK(total_variation(a, a) == 0.0);
}
