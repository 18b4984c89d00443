#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "avalanche/model.hpp"
#include "avalanche/rng.hpp"

namespace avalanche {

struct CoupledPath {
  std::vector<std::int64_t> x_seq, q_seq, z_seq;
  std::optional<std::int64_t> tau;  // maximal-coupling divergence index
  PathStatus status = PathStatus::absorbed;
};

struct Triple {
  std::int64_t x, q, z;
};

// Thrown when the coupling constant does not dominate the network (np > c).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checks -log q <= c/(n-1), which makes every thinning probability valid.
void check_coupling_constant(const ModelParams& params, double c);

// One step of the monotone (X, Q, Z) construction from (x, z). Assumes
// check_coupling_constant has passed.
Triple coupled_step_monotone(const ModelParams& params, double c, std::int64_t x,
                             std::int64_t z, Rng& rng);

struct CoupledOptions {
  std::int64_t max_steps = 1000000;
  std::int64_t population_cap = 1000000000;
};

CoupledPath simulate_coupled(const ModelParams& params, double c, int i0, Rng& rng,
                             const CoupledOptions& opts = {});

// (p/2) min{1, np}. Not a valid bound for np < 1, where the true distance
// approaches n p^2; see tv_binomial_poisson_proven.
double tv_binomial_poisson(std::int64_t n_trials, double p);
// p (1 - e^{-np}), the Barbour-Hall bound.
double tv_binomial_poisson_proven(std::int64_t n_trials, double p);
double tv_poisson_poisson(double mu, double c);

// Poisson(mean) pmf on 0..K with K the first index past the mean where the
// cumulative mass exceeds 1 - 1e-12.
std::vector<double> poisson_pmf_truncated(double mean);

// Joint law attaining P(x != z) = TV(p1, p2).
class MaximalCoupling {
 public:
  MaximalCoupling(std::vector<double> p1, std::vector<double> p2);

  struct Draw {
    std::int64_t x, z;
    bool diverged;
  };

  double tv() const { return tv_; }
  Draw sample(Rng& rng) const;

 private:
  std::vector<double> overlap_cdf_, rest1_cdf_, rest2_cdf_;
  double tv_ = 0.0;
};

// Kernel row i against Poisson(c i), c = np.
MaximalCoupling maximal_coupling_at(const ModelParams& params, int i);

MaximalCoupling::Draw step_coupled_maximal(const ModelParams& params, int i, Rng& rng);

// Envelope on the per-step divergence probability.
double divergence_envelope(double c, double i, int n);

// Chains follow the maximal coupling while equal, then evolve independently.
CoupledPath simulate_maximal_coupled(const ModelParams& params, int i0, Rng& rng,
                                     const CoupledOptions& opts = {});

}  // namespace avalanche
