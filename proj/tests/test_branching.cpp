#include <doctest.h>

#include <cmath>

#include "avalanche/branching.hpp"
#include "avalanche/stats.hpp"
#include "oracles.hpp"

using namespace avalanche;

namespace {

// Independent Borel-Tanner pmf: (i0/j) e^{-lj} (lj)^{j-i0} / (j-i0)!.
double bt(double lambda, int i0, int j) {
  if (j < i0) return 0.0;
  return std::exp(std::log(static_cast<double>(i0) / j) - lambda * j +
                  (j - i0) * std::log(lambda * j) - std::lgamma(j - i0 + 1.0));
}

// Iterates F(s) = exp(l (s - 1)) m times from 0.
double extinct_oracle(double lambda, int i0, int m) {
  long double s = 0.0L;
  for (int k = 0; k < m; ++k) s = std::exp(static_cast<long double>(lambda) * (s - 1.0L));
  return static_cast<double>(std::pow(s, i0));
}

}  // namespace

TEST_CASE("regime classification") {
  CHECK(classify(0.5) == Regime::subcritical);
  CHECK(classify(1.0) == Regime::critical);
  CHECK(classify(1.5) == Regime::supercritical);
  CHECK(std::string(regime_name(Regime::critical)) == "critical");
}

TEST_CASE("extinction probability") {
  CHECK(extinction_prob(2.0) == doctest::Approx(0.20318786998).epsilon(1e-10));
  double prev = 1.0;
  for (double mu = 1.05; mu < 6.0; mu += 0.05) {
    const double a = extinction_prob(mu);
    CHECK(std::abs(a - std::exp(-(1 - a) * mu)) < 1e-12);
    CHECK(a < prev);
    prev = a;
  }
  // Dual root above one for mu < 1: x e^{-x} = mu e^{-mu}.
  const double a = extinction_prob(0.5);
  CHECK(a > 1.0);
  CHECK(std::abs(a - std::exp(-(1 - a) * 0.5)) < 1e-12);
  CHECK_THROWS(extinction_prob(1.0));
  CHECK_THROWS(extinction_prob(0.0));
}

TEST_CASE("borel tanner pmf and mass") {
  for (int j = 1; j < 40; ++j) CHECK(borel_tanner_pmf(0.8, 1, j) == doctest::Approx(bt(0.8, 1, j)));
  for (int j = 3; j < 40; ++j) CHECK(borel_tanner_pmf(1.5, 3, j) == doctest::Approx(bt(1.5, 3, j)));
  CHECK(borel_tanner_pmf(0.8, 2, 1) == 0.0);
  CHECK(std::abs(borel_tanner_mass(0.5, 1).mass - 1.0) < 1e-6);
  CHECK(std::abs(borel_tanner_mass(0.9, 3).mass - 1.0) < 1e-6);
  CHECK(std::abs(borel_tanner_mass(1.0, 1).mass - 1.0) < 1e-6);
  CHECK(std::abs(borel_tanner_mass(2.0, 1).mass - extinction_prob(2.0)) < 1e-6);
  CHECK(std::abs(borel_tanner_mass(1.5, 2).mass - std::pow(extinction_prob(1.5), 2)) < 1e-6);
}

TEST_CASE("extinction by generation m") {
  CHECK(gw_extinct_by(1.0, 1, 0) == 0.0);
  CHECK(gw_extinct_by(1.0, 1, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(gw_extinct_by(1.0, 1, 2) == doctest::Approx(0.53146360539).epsilon(1e-10));
  for (double l : {0.5, 1.0, 2.0})
    for (int i0 : {1, 3})
      for (int m = 0; m < 60; ++m) {
        CHECK(gw_extinct_by(l, i0, m) == doctest::Approx(extinct_oracle(l, i0, m)).epsilon(1e-12));
        CHECK(gw_extinct_by(l, i0, m + 1) >= gw_extinct_by(l, i0, m));
      }
  CHECK(gw_extinct_by(0.5, 2, 200) == doctest::Approx(1.0));
  CHECK(gw_extinct_by(2.0, 2, 200) == doctest::Approx(std::pow(extinction_prob(2.0), 2)));
}

TEST_CASE("agresti bounds") {
  CHECK(agresti_s(1.0) == doctest::Approx(1.0));
  CHECK(agresti_r(1.0) == doctest::Approx(1.0));
  const auto b = agresti_duration_bounds(1.0, 1, 2);
  CHECK(b.lower == doctest::Approx(0.5));
  CHECK(b.upper == doctest::Approx(2.0 / (1.0 + std::exp(1.0))));
  for (double c : {0.3, 0.5, 0.9, 1.0, 1.1, 1.5, 2.0})
    for (int i0 : {1, 2, 5})
      for (int m = 1; m <= 50; ++m) {
        const auto iv = agresti_duration_bounds(c, i0, m);
        const double v = extinct_oracle(c, i0, m);
        CHECK(iv.lower <= v + 1e-12);
        CHECK(v <= iv.upper + 1e-12);
      }
  CHECK_THROWS(agresti_duration_bounds(0.5, 1, 0));
  // Continuity at c = 1 from both sides.
  const auto lo = agresti_duration_bounds(1.0 - 1e-6, 2, 7);
  const auto at = agresti_duration_bounds(1.0, 2, 7);
  const auto hi = agresti_duration_bounds(1.0 + 1e-6, 2, 7);
  CHECK(lo.lower == doctest::Approx(at.lower).epsilon(1e-4));
  CHECK(lo.upper == doctest::Approx(at.upper).epsilon(1e-4));
  CHECK(hi.lower == doctest::Approx(at.lower).epsilon(1e-4));
  CHECK(hi.upper == doctest::Approx(at.upper).epsilon(1e-4));
}

TEST_CASE("lindvall maximum bound") {
  CHECK(lindvall_max_bound(1.0, 3, 30) == doctest::Approx(0.1));
  CHECK(lindvall_max_bound(1.0 - 1e-7, 3, 30) == doctest::Approx(0.1).epsilon(1e-4));
  CHECK_THROWS(lindvall_max_bound(1.5, 1, 10));
  CHECK_THROWS(lindvall_max_bound(0.5, 5, 5));
  const double bound = lindvall_max_bound(0.5, 1, 10);
  const std::int64_t reps = 1000000;
  std::int64_t hits = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    Rng rng = make_stream(51, static_cast<std::uint64_t>(r));
    const auto t = gw_simulate(BranchingParams(0.5, 1), rng);
    if (t.max >= 10) ++hits;
  }
  const auto est = EstimateWithCI::proportion(hits, reps);
  CHECK(est.estimate <= bound);
}

TEST_CASE("galton watson simulation") {
  CHECK_THROWS(BranchingParams(1.0, 0));
  CHECK_THROWS(BranchingParams(0.0, 1));

  SUBCASE("supercritical extinction frequency") {
    GwOptions opts;
    opts.population_cap = 10000;
    opts.record_states = false;
    const std::int64_t reps = 1000000;
    std::int64_t extinct = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
      Rng rng = make_stream(52, static_cast<std::uint64_t>(r));
      const auto t = gw_simulate(BranchingParams(2.0, 1), rng, opts);
      if (!t.truncated()) ++extinct;
    }
    const auto est = EstimateWithCI::proportion(extinct, reps);
    CHECK(std::abs(est.estimate - extinction_prob(2.0)) < 4 * est.stderr_);
  }

  SUBCASE("subcritical total progeny mean") {
    const std::int64_t reps = 200000;
    std::vector<double> s(reps);
    for (std::int64_t r = 0; r < reps; ++r) {
      Rng rng = make_stream(53, static_cast<std::uint64_t>(r));
      s[r] = static_cast<double>(gw_simulate(BranchingParams(0.5, 3), rng).size);
    }
    const auto est = EstimateWithCI::from_samples(s);
    CHECK(std::abs(est.estimate - 6.0) < 4 * est.stderr_);
  }

  SUBCASE("total progeny follows borel tanner") {
    const std::int64_t reps = 1000000;
    std::vector<double> hist(200, 0.0);
    GwOptions opts;
    opts.record_states = false;
    for (std::int64_t r = 0; r < reps; ++r) {
      Rng rng = make_stream(54, static_cast<std::uint64_t>(r));
      const auto t = gw_simulate(BranchingParams(0.8, 1), rng, opts);
      if (t.size < 200) hist[t.size] += 1.0 / reps;
    }
    std::vector<double> pmf(200, 0.0);
    for (int j = 1; j < 200; ++j) pmf[j] = bt(0.8, 1, j);
    CHECK(total_variation(hist, pmf) < 0.01);
  }

  SUBCASE("both samplers agree in distribution") {
    const std::int64_t reps = 100000;
    std::vector<std::int64_t> a(60, 0), b(60, 0);
    GwOptions per;
    per.sampler = GwSampler::per_individual;
    for (std::int64_t r = 0; r < reps; ++r) {
      Rng r1 = make_stream(55, static_cast<std::uint64_t>(r), 1);
      Rng r2 = make_stream(55, static_cast<std::uint64_t>(r), 2);
      ++a[std::min<std::int64_t>(59, gw_simulate(BranchingParams(0.9, 2), r1).size)];
      ++b[std::min<std::int64_t>(59, gw_simulate(BranchingParams(0.9, 2), r2, per).size)];
    }
    CHECK(chi_square_two_sample(a, b).p_value > 0.001);
  }
}
