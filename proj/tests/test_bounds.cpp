#include <doctest.h>

#include <cmath>

#include "avalanche/bounds.hpp"
#include "avalanche/branching.hpp"
#include "avalanche/exact_solver.hpp"
#include "avalanche/stats.hpp"
#include "oracles.hpp"

using namespace avalanche;

namespace {

// Exact xi_k(x) for A_0 = {1}: the pair (X_k, 1{x excited}) is a Markov chain.
// Returns xi_k for node 1 (seeded) and for any other node.
std::pair<double, double> node_excitation_exact(int n, double p, int k) {
  auto binom = [](int t, double r, int j) {
    return std::exp(std::lgamma(t + 1.0) - std::lgamma(j + 1.0) - std::lgamma(t - j + 1.0) +
                    (j ? j * std::log(r) : 0.0) + (t - j ? (t - j) * std::log1p(-r) : 0.0));
  };
  auto run = [&](bool seeded) {
    // prob[i][e]
    std::vector<std::array<double, 2>> cur(n + 1, {0.0, 0.0});
    cur[1][seeded ? 1 : 0] = 1.0;
    for (int step = 0; step < k; ++step) {
      std::vector<std::array<double, 2>> next(n + 1, {0.0, 0.0});
      for (int i = 1; i <= n; ++i)
        for (int e = 0; e < 2; ++e) {
          const double pr = cur[i][e];
          if (pr == 0.0) continue;
          const double r = -std::expm1(i * std::log1p(-p));
          const int others = n - i - (e ? 0 : 1);  // resting nodes other than x
          for (int j = 0; j <= others; ++j) {
            const double b = binom(others, r, j) * pr;
            if (e) {
              next[j][0] += b;
            } else {
              next[j + 1][1] += b * r;
              next[j][0] += b * (1 - r);
            }
          }
        }
      next[0] = {next[0][0] + next[0][1], 0.0};
      cur.swap(next);
    }
    double xi = 0.0;
    for (int i = 1; i <= n; ++i) xi += cur[i][1];
    return xi;
  };
  return {run(true), run(false)};
}

double exact_size(int n, double c, int i0, int digits = 60) {
  const SubstochasticSystem sys(ModelParams::from_c(n, c), PrecisionConfig{digits});
  return expected_size(sys).value(i0);
}

}  // namespace

TEST_CASE("bound report verdicts") {
  BoundReport r;
  r.name = "x";
  r.lower = 0.2;
  r.upper = 0.5;
  r.reference = 0.3;
  r.judge();
  CHECK(r.satisfied == Verdict::holds);
  r.reference = 0.51;
  r.reference_error = 0.02;
  r.judge();
  CHECK(r.satisfied == Verdict::holds);
  r.reference_error = 0.0;
  r.judge();
  CHECK(r.satisfied == Verdict::violated);
  r.judge(true);
  CHECK(r.satisfied == Verdict::inconclusive);
  r.partial = true;
  r.judge();
  CHECK(r.satisfied == Verdict::inconclusive);
  r.reference = 0.1;
  r.judge();
  CHECK(r.satisfied == Verdict::violated);
  r.reference.reset();
  r.judge();
  CHECK(r.satisfied == Verdict::inconclusive);
  r.lower = 0.9;
  CHECK_THROWS_AS(r.judge(), std::logic_error);
  CHECK(parse_verdict("holds") == Verdict::holds);
  CHECK_THROWS(parse_verdict("maybe"));
}

TEST_CASE("bound report json round trip") {
  BoundReport r;
  r.name = "reach_single";
  r.inputs = {{"n", 1000}, {"c", 1.5}};
  r.lower = 0.25;
  r.reference = 0.3;
  r.reference_error = 1e-9;
  r.satisfied = Verdict::holds;
  r.partial = true;
  r.note = "n";
  const nlohmann::json j = r;
  CHECK(j.at("upper").is_null());
  CHECK(j.at("satisfied") == "holds");
  const auto back = nlohmann::json::parse(j.dump()).get<BoundReport>();
  CHECK(back.name == r.name);
  CHECK(back.inputs == r.inputs);
  CHECK(back.lower == r.lower);
  CHECK_FALSE(back.upper);
  CHECK(back.reference == r.reference);
  CHECK(back.satisfied == r.satisfied);
  CHECK(back.partial);
  CHECK(back.note == "n");
}

TEST_CASE("intensity condition") {
  CHECK_THROWS(ConditionCD(0.5, 0.6));
  CHECK_THROWS(ConditionCD(0.5, 0.0));
  const auto params = ModelParams::from_c(100, 0.7);
  CHECK(ConditionCD(0.8, 0.6).admits(params));
  CHECK_FALSE(ConditionCD(0.65, 0.6).admits(params));
  CHECK(ConditionCD::exact(params).admits(params));
}

TEST_CASE("mean decay and survival") {
  const auto params = ModelParams::from_c(50, 0.5);
  CHECK(mean_decay_bound(params, 3.0 * 47, 1) == doctest::Approx(0.5 * 3 * 47 / 50.0));
  const auto mean = expected_state(params, 3, 4);
  CHECK(mean[4] <= mean_decay_bound(params, 3.0 * 47, 4));
  for (int k = 1; k < 10; ++k) {
    CHECK(mean_decay_bound(params, 100, k + 1) < mean_decay_bound(params, 100, k));
    const auto sup = ModelParams::from_c(50, 1.5);
    CHECK(mean_decay_bound(sup, 100, k + 1) > mean_decay_bound(sup, 100, k));
  }
  CHECK_THROWS(mean_decay_bound(params, 1, 0));

  const auto p20 = ModelParams::from_c(20, 0.5);
  const SubstochasticSystem sys(p20, PrecisionConfig{60});
  const double surv = duration_survival(sys, 6)[0].convert_to<double>();
  const auto sb = survival_bounds(p20, 19.0, 6);
  CHECK(surv <= sb.naive);
  CHECK(surv <= sb.refined);
  // The naive bound tends to 1 as q tends to 0 and to 0 as q tends to 1.
  CHECK(survival_bounds(ModelParams(20, 0.999), 19.0, 3).naive == doctest::Approx(1.0));
  CHECK(survival_bounds(ModelParams(20, 1e-9), 19.0, 3).naive < 1e-6);
}

TEST_CASE("node excitation bound") {
  CHECK(node_excitation_bound(ModelParams::from_c(40, 0.5), 39.0, 3) ==
        doctest::Approx(mean_decay_bound(ModelParams::from_c(40, 0.5), 39.0, 3) / 40));

  const int n = 20;
  const double p = 0.05;
  const ModelParams params(n, p);
  const double eh0 = 1.0 * (n - 1);

  // A seeded start is not exchangeable: at k = 1 every other node is excited
  // with probability p = c/n, above c (n - 1)/n^2.
  const auto [seed1, other1] = node_excitation_exact(n, p, 1);
  CHECK(seed1 == 0.0);
  CHECK(other1 == doctest::Approx(p));
  CHECK(other1 > node_excitation_bound(params, eh0, 1));

  for (int k = 2; k <= 6; ++k) {
    const auto [s, o] = node_excitation_exact(n, p, k);
    CHECK(s <= node_excitation_bound(params, eh0, k));
    CHECK(o <= node_excitation_bound(params, eh0, k));
  }

  // Set-level Monte Carlo at k = 2 against the bound and the exact values.
  const std::int64_t reps = 1000000;
  std::vector<std::int64_t> hits(n + 1, 0);
  for (std::int64_t r = 0; r < reps; ++r) {
    Rng rng = make_stream(81, static_cast<std::uint64_t>(r));
    const auto path = simulate_set(params, SetState(n, {1}), 2, rng);
    if (path.size() > 2)
      for (int v : path[2].labels()) ++hits[v];
  }
  const auto [s2, o2] = node_excitation_exact(n, p, 2);
  for (int x = 1; x <= n; ++x) {
    const auto est = EstimateWithCI::proportion(hits[x], reps);
    CHECK(est.estimate <= node_excitation_bound(params, eh0, 2) + 3 * est.stderr_);
    CHECK(std::abs(est.estimate - (x == 1 ? s2 : o2)) < 4 * est.stderr_);
  }
}

TEST_CASE("size bounds") {
  const auto params = ModelParams::from_c(200, 0.5);
  const auto b = size_bounds_single(params, ConditionCD(0.5, 0.5), 1.0, 1.0);
  CHECK(b.lower == doctest::Approx(1.88));
  CHECK(b.upper == doctest::Approx(2.0));
  const double s = exact_size(200, 0.5, 1);
  CHECK(s >= b.lower);
  CHECK(s <= b.upper);
  const auto big = size_bounds_single(ModelParams::from_c(1000000, 0.5), ConditionCD(0.5, 0.5), 3, 9);
  CHECK(big.lower == doctest::Approx(6.0).epsilon(1e-4));
  CHECK(big.upper == doctest::Approx(6.0));
  CHECK_THROWS(size_bounds_single(ModelParams::from_c(100, 1.0), ConditionCD(1.0, 1.0), 1, 1));
  CHECK_THROWS(size_bounds_single(params, ConditionCD(0.4, 0.3), 1, 1));

  CHECK(size_limit_correction(0.5, 1) == doctest::Approx(2.0));
  CHECK(size_limit_correction(1e-6, 2) < 1e-5);
  CHECK_THROWS(size_limit_correction(1.0, 1));

  // n (2 - E(S_n)) converges monotonically, but to 17/6 rather than to the
  // value of size_limit_correction.
  const double limit = oracle::size_correction_second_order(0.5, 1);
  CHECK(limit == doctest::Approx(17.0 / 6.0));
  double prev_gap = 1e300, scaled = 0.0;
  for (int n : {50, 100, 200, 400}) {
    scaled = n * (2.0 - exact_size(n, 0.5, 1));
    const double gap = std::abs(scaled - limit);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(std::abs(scaled - limit) < 0.03);
  CHECK(std::abs(scaled - size_limit_correction(0.5, 1)) > 0.8);
  // Same with i0 = 2 and another lambda.
  const double s2 = 400 * (2 * 1.0 / 0.7 - exact_size(400, 0.3, 2));
  CHECK(s2 == doctest::Approx(oracle::size_correction_second_order(0.3, 2)).epsilon(0.01));
}

TEST_CASE("epsilon limit and rho") {
  CHECK_THROWS(epsilon_limit(1.0));
  CHECK_THROWS(rho_epsilon(1.0, 0.1));
  const double mu = -std::expm1(-0.4) / 0.2 * 0.8;
  CHECK(mu == doctest::Approx(1.31871981586).epsilon(1e-10));
  CHECK(rho_epsilon(2.0, 0.2) == doctest::Approx(0.55910715991).epsilon(1e-9));
  CHECK(rho_epsilon(2.0, 0.2) == doctest::Approx(extinction_prob(mu)).epsilon(1e-12));
  CHECK(rho_epsilon(2.0, 1e-7) == doctest::Approx(extinction_prob(2.0)).epsilon(1e-5));
  for (double d : {1.2, 1.5, 2.0, 3.0}) {
    const double lim = epsilon_limit(d);
    CHECK(lim > 0.0);
    CHECK(lim < 1.0);
    CHECK_THROWS(rho_epsilon(d, lim * 1.01));
    CHECK(rho_epsilon(d, lim * (1 - 1e-9)) > 0.99);
    for (double f : {0.01, 0.2, 0.5, 0.9}) {
      const double r = rho_epsilon(d, f * lim);
      CHECK(r > extinction_prob(d));
      CHECK(r < 1.0);
    }
  }
}

TEST_CASE("reach bounds") {
  const auto params = ModelParams::from_c(1000, 1.5);
  const ConditionCD cd(1.5, 1.5);
  CHECK_THROWS(reach_bounds_single(params, cd, 0.1, 100));
  CHECK_THROWS(reach_bounds_single(ModelParams::from_c(1000, 0.9), ConditionCD(0.9, 0.9), 0.1, 1));
  CHECK(reach_bounds_single(params, cd, 0.1, 99).upper > 0.999999);
  const SubstochasticSystem sys(params, PrecisionConfig{60});
  const auto h = reach_probability(sys, 100);
  for (int i = 1; i <= 5; ++i) {
    const auto b = reach_bounds_single(params, cd, 0.1, i);
    CHECK(b.lower <= h.value(i));
    CHECK(h.value(i) <= b.upper);
  }
  // Large n: the upper end tends to 1 - alpha^i and the lower end sits below it.
  const auto far = ModelParams::from_c(10000000, 1.5);
  const double a = extinction_prob(1.5);
  for (int i = 1; i <= 5; ++i) {
    const auto b = reach_bounds_single(far, cd, 0.1, i);
    CHECK(b.upper == doctest::Approx(1 - std::pow(a, i)).epsilon(1e-9));
    CHECK(b.lower <= 1 - std::pow(a, i));
    CHECK(b.lower == doctest::Approx(1 - std::pow(rho_epsilon(1.5, 0.1), i)).epsilon(1e-9));
  }
}

TEST_CASE("duration bounds for one network") {
  const auto crit = duration_bounds_single(ModelParams::from_c(1000000, 1.0), 1, 2, 0.0);
  CHECK(crit.lower == doctest::Approx(0.5));
  CHECK(crit.agresti_upper == doctest::Approx(2.0 / (1 + std::exp(1.0))));
  CHECK(crit.error_term == doctest::Approx(1.5 * std::cbrt(6e-6)));
  CHECK(crit.error_term == doctest::Approx(0.02726).epsilon(1e-3));
  CHECK_FALSE(crit.partial);

  const auto params = ModelParams::from_c(200, 0.5);
  const SubstochasticSystem sys(params, PrecisionConfig{60});
  const double cdf = 1.0 - duration_survival(sys, 3)[0].convert_to<double>();
  const auto b = duration_bounds_single(params, 1, 3, 15);
  CHECK(b.lower <= cdf);
  CHECK(cdf <= b.upper);
  CHECK(duration_bounds_single(ModelParams::from_c(2000, 0.5), 1, 1999, 15).lower ==
        doctest::Approx(1.0));

  const auto sup = ModelParams::from_c(200, 1.5);
  const auto partial = duration_bounds_single(sup, 1, 3, 10);
  CHECK(partial.partial);
  const auto full = duration_bounds_single(sup, 1, 3, 10, SupercriticalConstants{0.5, 2.0});
  CHECK_FALSE(full.partial);
  CHECK(full.error_term == doctest::Approx(partial.error_term + 2.0 * std::exp(-5.0)));
  CHECK_THROWS(duration_bounds_single(sup, 1, 3, 100));
  CHECK_THROWS(duration_bounds_single(params, 1, 3, 1));
  CHECK_THROWS(duration_bounds_single(params, 1, 200, 15));
}

TEST_CASE("ensemble duration limits") {
  for (int m = 1; m < 20; ++m) {
    const auto a = duration_limits_ensemble(1.0, 2, m);
    const auto b = agresti_duration_bounds(1.0, 2, m);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
    const auto near = duration_limits_ensemble(1.0 - 1e-7, 2, m);
    CHECK(near.lower == doctest::Approx(b.lower).epsilon(1e-4));
    CHECK(near.upper == doctest::Approx(b.upper).epsilon(1e-4));
  }
  const SubstochasticSystem sys(ModelParams::from_c(500, 0.8), PrecisionConfig{50});
  const double cdf = 1.0 - duration_survival(sys, 5)[0].convert_to<double>();
  const auto b = duration_limits_ensemble(0.8, 1, 5);
  CHECK(cdf >= b.lower - 0.02);
  CHECK(cdf <= b.upper + 0.02);
}

TEST_CASE("duration scaling") {
  SUBCASE("critical") {
    const auto rep = duration_scaling_check(1.0, 1, {1000, 4000, 16000});
    CHECK(rep.statistic == "m P(T > m)");
    CHECK(rep.branching_shrinks);
    CHECK(rep.branching.back().value == doctest::Approx(2.0).epsilon(2e-3));
    CHECK_THROWS(duration_scaling_check(1.0, 3, {3}));
  }
  SUBCASE("supercritical") {
    const auto rep = duration_scaling_check(2.0, 1, {1000, 2000, 4000, 8000});
    CHECK(rep.exact.back().predicted == doctest::Approx(1 - extinction_prob(2.0)));
    CHECK(rep.exact.back().gap < 0.01);
    CHECK(rep.branching_shrinks);
    // Monte Carlo at n = 10^4.
    const int n = 10000;
    const auto m = scaling_horizon(2.0, n);
    const auto params = ModelParams::from_c(n, 2.0);
    const std::int64_t reps = 100000;
    std::int64_t alive = 0;
    for (std::int64_t r = 0; r < reps; ++r) {
      Rng rng = make_stream(82, static_cast<std::uint64_t>(r));
      SimulateOptions opts;
      opts.max_steps = m;
      opts.record_states = false;
      if (simulate_count(params, 1, rng, opts).truncated()) ++alive;
    }
    const auto est = EstimateWithCI::proportion(alive, reps);
    CHECK(std::abs(est.estimate - (1 - extinction_prob(2.0))) < 4 * est.stderr_ + 0.005);
  }
  SUBCASE("subcritical") {
    const auto rep = duration_scaling_check(0.5, 1, {100, 400, 1600});
    CHECK(rep.exact_shrinks);
    CHECK(rep.branching_shrinks);
    CHECK(rep.branching.back().value == doctest::Approx(std::log(0.5)).epsilon(0.05));
    // With two seeds the finite-n statistic crosses log(lambda) early, so
    // only the branching rows are monotone.
    const auto two = duration_scaling_check(0.5, 2, {100, 400, 1600});
    CHECK(two.branching_shrinks);
    CHECK(two.exact.back().gap < 0.02);
  }
}

TEST_CASE("maxima") {
  CHECK(maxima_tail_critical(2, 20) == doctest::Approx(0.11));
  CHECK_THROWS(maxima_tail_critical(5, 5));
  CHECK_THROWS(maxima_scaled_subcritical(1.0, 5, 0.1));
  const auto crit = ModelParams::from_c(100, 1.0);
  const SubstochasticSystem sys(crit, PrecisionConfig{60});
  const auto md = max_distribution(sys, 2);
  CHECK(md.tail_at(21) <= maxima_tail_critical(2, 20));

  const auto emax = expected_running_max(crit, 1, 50);
  CHECK(emax[50] / std::log(50.0) <= 1.2);
  CHECK(emax[50] <= maxima_mean_critical(50, MaximaSlack{0.2}));

  // m alpha^m P(max > m) over m = 5..25 stays bounded, with a bound that does
  // not move with n.
  std::vector<double> sups;
  for (int n : {100, 200}) {
    const SubstochasticSystem sub(ModelParams::from_c(n, 0.5), PrecisionConfig{60});
    const auto ms = max_distribution(sub, 1);
    std::vector<double> scaled;
    for (int m = 5; m <= 25; ++m)
      scaled.push_back(maxima_scaled_subcritical(0.5, m, ms.tail_at(m + 1)));
    CHECK(scaled.back() < scaled.front());
    sups.push_back(*std::max_element(scaled.begin(), scaled.end()));
  }
  CHECK(sups[0] == doctest::Approx(0.86158).epsilon(1e-4));
  CHECK(sups[1] < 2 * sups[0]);
  CHECK(sups[1] > 0.5 * sups[0]);
}

TEST_CASE("drift identities") {
  for (int n : {3, 10, 50, 200})
    for (double c : {0.1, 0.5, 1.0, 1.5, 2.0}) {
      const auto params = ModelParams::from_c(n, c);
      for (int i = 0; i <= n; ++i) {
        const auto d = drift_check(params, i);
        CHECK(d.count_drift <= d.count_bound * (1 + 1e-12) + 1e-300);
        CHECK(d.heterogeneity_drift <= d.heterogeneity_bound * (1 + 1e-12) + 1e-300);
      }
    }
}

TEST_CASE("verification grid") {
  GridConfig small;
  small.n = {50};
  small.c = {0.5, 1.0, 1.5};
  small.i0 = {1, 2};
  const auto reps = verify_grid(small);
  CHECK(reps.size() == 1 * 3 * 2 * grid_bound_names().size());
  for (const auto& r : reps) {
    CHECK(r.satisfied != Verdict::violated);
    if (r.lower && r.upper) CHECK(*r.lower <= *r.upper);
    if (r.name == "duration_single" && r.inputs.at("c") > 1.0) CHECK(r.partial);
    if (r.name == "maxima") CHECK(r.partial);
  }

  const GridConfig full;
  const auto all = verify_grid(full);
  CHECK(all.size() == 4 * 8 * 3 * 11);
  std::int64_t violated = 0, holds = 0;
  for (const auto& r : all) {
    if (r.satisfied == Verdict::violated) ++violated;
    if (r.satisfied == Verdict::holds) ++holds;
  }
  CHECK(violated == 0);
  CHECK(holds > 700);
}
