#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/mpfr.hpp>

#include "avalanche/model.hpp"

namespace avalanche {

// Values carry their own precision; nothing here relies on the global
// default precision of mpfr_float, so independent solves may run in parallel.
using Real = boost::multiprecision::mpfr_float;

constexpr int kMaxExactN = 2000;

struct PrecisionConfig {
  int decimal_digits = 400;
  // Residual threshold is 10^-residual_digits; defaults to digits/2.
  std::optional<int> residual_digits;

  void validate() const;
  int tolerance_digits() const { return residual_digits.value_or(decimal_digits / 2); }
  unsigned bits() const;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transient block Q(i,j), i,j = 1..n-1, of the count kernel.
class SubstochasticSystem {
 public:
  SubstochasticSystem(const ModelParams& params, PrecisionConfig precision = {});

  const ModelParams& params() const { return params_; }
  const PrecisionConfig& precision() const { return precision_; }
  int n() const { return params_.n(); }
  int size() const { return params_.n() - 1; }

  // 1-based transient states.
  const Real& q(int i, int j) const { return q_[index(i, j)]; }
  // Mass sent to 0 from state i, including entries dropped below 10^-digits.
  const Real& absorb(int i) const { return absorb_[static_cast<std::size_t>(i - 1)]; }
  Real make() const;  // zero at the system's precision

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(size()) +
           static_cast<std::size_t>(j - 1);
  }
  ModelParams params_;
  PrecisionConfig precision_;
  std::vector<Real> q_;
  std::vector<Real> absorb_;
};

struct SolveResult {
  std::vector<Real> values;  // values[i-1] belongs to state i
  Real residual;             // sup-norm residual of the accepted solve
  int digits = 0;            // working digits of the accepted solve
  double value(int i) const { return values[static_cast<std::size_t>(i - 1)].convert_to<double>(); }
};

SolveResult expected_duration(const SubstochasticSystem& system);
SolveResult expected_size(const SubstochasticSystem& system);

// P(T > m | X_0 = i) for i = 1..n-1.
std::vector<Real> duration_survival(const SubstochasticSystem& system, std::int64_t m);
// Rows m = 0..m_max of the same quantity.
std::vector<std::vector<Real>> duration_survival_series(const SubstochasticSystem& system,
                                                        std::int64_t m_max);

// h_J(i) = P(max_k X_k >= J | X_0 = i) for i = 1..n-1.
SolveResult reach_probability(const SubstochasticSystem& system, double J);

struct MaxDistribution {
  int i0 = 1;
  std::vector<Real> tail;  // tail[J] = P(max >= J), J = 0..n
  std::vector<Real> pmf;   // pmf[v] = P(max = v), v = 0..n-1
  double tail_at(int J) const;
};
MaxDistribution max_distribution(const SubstochasticSystem& system, int i0);

// Double-precision propagation of the law of X_k, k = 0..steps.
std::vector<std::vector<double>> state_distribution(const ModelParams& params, int i0,
                                                    int steps);
std::vector<double> expected_state(const ModelParams& params, int i0, int steps);
// E(max_{j<=k} X_j) for k = 0..steps by dynamic programming over (state, max).
std::vector<double> expected_running_max(const ModelParams& params, int i0, int steps);

// Decimal string with `digits` significant digits.
std::string to_decimal(const Real& x, int digits);

}  // namespace avalanche
