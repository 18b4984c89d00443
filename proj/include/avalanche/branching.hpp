#pragma once

#include <cstdint>

#include "avalanche/model.hpp"
#include "avalanche/rng.hpp"

namespace avalanche {

struct BranchingParams {
  BranchingParams(double lambda, std::int64_t i0);
  double lambda;
  std::int64_t i0;
};

enum class Regime { subcritical, critical, supercritical };
Regime classify(double lambda);
const char* regime_name(Regime r);

// Root of a = exp(-(1 - a) mu) other than 1: in (0,1) for mu > 1, in (1,inf) for mu < 1.
double extinction_prob(double mu);

double borel_tanner_log_pmf(double lambda, std::int64_t i0, std::int64_t j);
double borel_tanner_pmf(double lambda, std::int64_t i0, std::int64_t j);

struct TruncatedSum {
  double mass;
  std::int64_t last_j;
};
// Sum of the pmf over j >= i0 with the adaptive truncation rule.
TruncatedSum borel_tanner_mass(double lambda, std::int64_t i0);

enum class GwSampler { aggregated, per_individual };

struct GwOptions {
  std::int64_t max_steps = 1000000;
  std::int64_t population_cap = 1000000000;
  GwSampler sampler = GwSampler::aggregated;
  bool record_states = true;
};

Trajectory gw_simulate(const BranchingParams& params, Rng& rng, const GwOptions& opts = {});

// P(sigma <= m) where sigma is the extinction generation.
double gw_extinct_by(double lambda, std::int64_t i0, std::int64_t m);

struct Interval {
  double lower;
  double upper;
};

double agresti_s(double c);
double agresti_r(double c);
Interval agresti_duration_bounds(double c, std::int64_t i0, std::int64_t m);

// Upper bound on P(max generation size >= m), lambda <= 1.
double lindvall_max_bound(double lambda, std::int64_t i0, std::int64_t m);

}  // namespace avalanche
