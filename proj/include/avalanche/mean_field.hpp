#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avalanche/model.hpp"
#include "avalanche/rng.hpp"
#include "avalanche/stats.hpp"

namespace avalanche {

// g_a(x) = (1 - x)(1 - e^{-a x}) and its first two derivatives.
double g_map(double alpha, double x);
double dg_map(double alpha, double x);
double d2g_map(double alpha, double x);

// Nontrivial fixed point of g_a, a > 1.
double fixed_point_zeta(double alpha);

struct ArgMax {
  double nu;
  double chi;
};
ArgMax argmax_nu(double alpha);

// The a at which argmax and fixed point coincide.
double transitional_alpha();

struct MapParams {
  double alpha;
  std::optional<double> zeta;  // only for alpha > 1
  double nu;
  double chi;
  static MapParams at(double alpha);
};

struct MeanFieldPath {
  std::vector<double> psi;               // psi_{k+1} = g(psi_k)
  std::vector<double> phi;               // phi_{k+1} = 1 - e^{-a phi_k}
  std::vector<double> branching_factor;  // g(psi_k) / psi_k
};
MeanFieldPath iterate_mean_field(double lambda, double psi0, int steps);

struct MeanFieldLimit {
  double value;
  std::int64_t steps;
  bool converged;
};
// Iterates until |psi_{k+1} - psi_k| < 1e-14 or 1e5 steps; the positive
// limit is polished by Newton.
MeanFieldLimit mean_field_limit(double lambda, double psi0);

struct MeanFieldEnvelopes {
  double alpha;
  std::vector<double> phi;
  std::optional<std::vector<double>> psi;
  std::string psi_note;
  double cap;  // max{phi_0, chi}
};
// alpha = -n log(1 - p); ex0_over_n = E(X_0)/n.
MeanFieldEnvelopes mean_field_upper_bounds(const ModelParams& params, double ex0_over_n,
                                           int steps);

struct FluctuationModel {
  double lambda;
  std::vector<double> psi;       // k = 0..steps
  std::vector<double> variance;  // v(psi_k) = g(psi_k) e^{-lambda psi_k}
  std::vector<double> slope;     // g'(psi_k)

  static FluctuationModel build(double lambda, double psi0, int steps);
  // Var(Y_k), k = 0..steps, from Var(Y_0) = var0.
  std::vector<double> variance_path(double var0) const;
};

struct Ar1Path {
  std::vector<double> y;
  std::vector<double> y_het;  // (1/2)(1 - 2 psi_k) Y_k
};
Ar1Path simulate_ar1(const FluctuationModel& model, double y0, Rng& rng);

struct LlnCltConfig {
  double lambda = 2.0;
  double psi0 = 0.1;
  int k = 5;
  std::vector<int> n_schedule{25000, 50000, 100000};
  int replicates = 10000;
  std::uint64_t seed = 1;
};

struct LlnCltReport {
  std::vector<int> n;
  std::vector<double> mean_abs_dev;  // E|x_{n,k} - psi_k| per n
  bool lln_shrinks = false;
  double psi_k = 0.0;
  double clt_variance = 0.0;  // Var(Y_k)
  double ks_count = 0.0;      // sqrt(n)(x - psi_k) vs N(0, Var Y_k) at the largest n
  double ks_heterogeneity = 0.0;
};
LlnCltReport lln_clt_check(const LlnCltConfig& cfg);

struct StabilityInterval {
  double lambda;
  double zeta, nu, chi;
  double x1;  // g'(x1) = 1
  double a, b, eps;
  double rho;    // sup |g'| on (a, 1)
  double gamma;  // (1 - b) / (2 (1 - rho)^2)
};
StabilityInterval stability_interval(double lambda);

enum class EnvelopeKind {
  supercritical_tracking,  // P(tau_n(delta) > m), lambda > 1
  hitting,                 // P(varsigma_n(delta) > m0), lambda <= 1
  subcritical_tracking,    // P(tau_n(delta) > m), lambda < 1
};

struct Envelope {
  EnvelopeKind kind;
  double bound;   // (1 - 2 e^{-gamma delta^2 n})^m
  double linear;  // 1 - 2 m e^{-gamma delta^2 n}
  std::int64_t m;
  double gamma;
  double rho;
  std::optional<double> a;   // root of g(a) = delta (critical case)
  bool deterministic_below;  // psi_m < delta: hitting claim is degenerate
  // Same product with gamma' = (1 - rho)^2 / 2 from a direct Hoeffding step.
  // Valid for every n under the ensemble parametrization used here.
  double conservative_gamma;
  double conservative_bound;
};
Envelope concentration_envelope(int n, double lambda, double psi0, double delta, std::int64_t m,
                                EnvelopeKind kind);

// Monte Carlo estimate of the probability the envelope bounds, with p = lambda/n
// and x_{n,0} = round(n psi0)/n.
EstimateWithCI stay_probability(int n, double lambda, double psi0, double delta,
                                std::int64_t m, EnvelopeKind kind, int replicates,
                                std::uint64_t seed);

}  // namespace avalanche
