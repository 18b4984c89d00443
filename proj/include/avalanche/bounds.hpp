#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avalanche/model.hpp"

namespace avalanche {

enum class Verdict { holds, violated, inconclusive };
const char* verdict_name(Verdict v);
Verdict parse_verdict(const std::string& s);

struct BoundReport {
  std::string name;
  std::map<std::string, double> inputs;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> reference;
  double reference_error = 0.0;
  Verdict satisfied = Verdict::inconclusive;
  bool partial = false;  // bound relies on configured slack for an existential constant
  std::string note;

  // Sets `satisfied` from the reference. A partial report cannot fail on its
  // upper side; an asymptotic one cannot fail at all.
  void judge(bool asymptotic = false);
};

void to_json(nlohmann::json& j, const BoundReport& r);
void from_json(const nlohmann::json& j, BoundReport& r);

// d <= np <= c.
struct ConditionCD {
  double c;
  double d;
  ConditionCD(double c, double d);
  static ConditionCD exact(const ModelParams& params) { return {params.c(), params.c()}; }
  bool admits(const ModelParams& params) const;
};

// E(X_k) <= c^k E(H_0) / n.
double mean_decay_bound(const ModelParams& params, double eh0, int k);

struct SurvivalBounds {
  double naive;    // (1 - q^{n^2/4})^k
  double refined;  // c^k E(H_0) / n
};
SurvivalBounds survival_bounds(const ModelParams& params, double eh0, int k);

// Probability that a fixed node is excited at step k, uniformly over nodes.
double node_excitation_bound(const ModelParams& params, double eh0, int k);

struct Bracket {
  double lower;
  double upper;
};

Bracket size_bounds_single(const ModelParams& params, const ConditionCD& cd, double ex0,
                           double ex0_sq);
double size_limit_correction(double lambda, std::int64_t i0);

// Largest eps with (1 - e^{-d eps})(1 - eps)/eps > 1 on (0, eps_d).
double epsilon_limit(double d);
double rho_epsilon(double d, double eps);

Bracket reach_bounds_single(const ModelParams& params, const ConditionCD& cd, double eps, int i);

struct DurationBounds {
  double lower;
  double upper;
  double agresti_upper;
  double error_term;
  bool partial;  // exponential term missing in the supercritical regime
};
struct SupercriticalConstants {
  double theta;
  double K;
};
// `j_or_x` is J for c < 1 and x for c > 1; ignored for c = 1.
DurationBounds duration_bounds_single(const ModelParams& params, std::int64_t i0, std::int64_t m,
                                      double j_or_x,
                                      std::optional<SupercriticalConstants> constants = {});
Bracket duration_limits_ensemble(double lambda, std::int64_t i0, std::int64_t m);

struct ScalingRow {
  int n;
  std::int64_t m;
  double value;
  double predicted;
  double gap;
};
struct ScalingReport {
  double lambda;
  std::int64_t i0;
  std::string statistic;
  std::vector<ScalingRow> exact;  // finite-n avalanche
  std::vector<ScalingRow> branching;  // limiting branching process, n = 0
  bool exact_shrinks = false;
  bool branching_shrinks = false;
};
// m_n schedule: beta log n for lambda > 1 (beta below 2/(3 log lambda)),
// n^{1/5} at lambda = 1 and 2 log n for lambda < 1.
std::int64_t scaling_horizon(double lambda, int n);
ScalingReport duration_scaling_check(double lambda, std::int64_t i0,
                                     const std::vector<int>& n_schedule);

struct MaximaSlack {
  double eps_m = 0.1;
};
// np = 1: P(max > m) <= (i0/m)(1 + eps_m).
double maxima_tail_critical(std::int64_t i0, std::int64_t m, const MaximaSlack& slack = {});
// np = 1: E(max_{j<=k} X_j) <= log k (1 + eps_k).
double maxima_mean_critical(std::int64_t k, const MaximaSlack& slack = {});
// np < 1: m alpha_c^m P(max > m), whose boundedness in m is the claim.
double maxima_scaled_subcritical(double c, std::int64_t m, double tail);

struct DriftCheck {
  double count_drift;         // sum_j K(i,j) j
  double count_bound;         // c i
  double heterogeneity_drift; // sum_j K(i,j) j (n - j)
  double heterogeneity_bound; // c i (n - i)
};
DriftCheck drift_check(const ModelParams& params, int i);

struct GridConfig {
  std::vector<int> n{50, 100, 200, 500};
  std::vector<double> c{0.3, 0.5, 0.8, 0.9, 1.0, 1.1, 1.5, 2.0};
  std::vector<std::int64_t> i0{1, 2, 5};
  int digits = 50;
  int k = 3;  // horizon for the step-k bounds
  MaximaSlack slack;
};
const std::vector<std::string>& grid_bound_names();
std::vector<BoundReport> verify_grid(const GridConfig& cfg);

}  // namespace avalanche
