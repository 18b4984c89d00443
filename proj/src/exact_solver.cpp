#include "avalanche/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <ios>

namespace avalanche {

namespace {

inline mpfr_ptr P(Real& x) { return x.backend().data(); }
inline mpfr_srcptr P(const Real& x) { return x.backend().data(); }

Real make_real(unsigned bits) {
  Real r;
  mpfr_set_prec(P(r), static_cast<mpfr_prec_t>(bits));
  mpfr_set_zero(P(r), 1);
  return r;
}

// Dense row-major square matrix of Reals at a fixed precision.
struct Matrix {
  int n = 0;
  std::vector<Real> a;
  Real& at(int r, int c) { return a[static_cast<std::size_t>(r) * n + c]; }
  const Real& at(int r, int c) const { return a[static_cast<std::size_t>(r) * n + c]; }
};

// I - Q restricted to states 1..s.
Matrix identity_minus_q(const SubstochasticSystem& sys, int s, unsigned bits) {
  Matrix m;
  m.n = s;
  m.a.reserve(static_cast<std::size_t>(s) * s);
  for (int r = 1; r <= s; ++r) {
    for (int c = 1; c <= s; ++c) {
      Real v = make_real(bits);
      mpfr_neg(P(v), P(sys.q(r, c)), MPFR_RNDN);
      if (r == c) mpfr_add_ui(P(v), P(v), 1, MPFR_RNDN);
      m.a.push_back(std::move(v));
    }
  }
  return m;
}

// LU factorization stored in place (unit lower part holds multipliers).
struct Lu {
  Matrix m;
  std::vector<int> swaps;  // row swapped with k at step k
};

Lu factor(Matrix m, bool pivot, unsigned bits) {
  const int n = m.n;
  Lu lu;
  lu.swaps.resize(static_cast<std::size_t>(n));
  Real l = make_real(bits);
  std::vector<int> nz;
  nz.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    int p = k;
    if (pivot) {
      for (int r = k + 1; r < n; ++r)
        if (mpfr_cmpabs(P(m.at(r, k)), P(m.at(p, k))) > 0) p = r;
      if (p != k)
        for (int c = 0; c < n; ++c) mpfr_swap(P(m.at(k, c)), P(m.at(p, c)));
    }
    lu.swaps[static_cast<std::size_t>(k)] = p;
    if (mpfr_zero_p(P(m.at(k, k)))) throw SolverError("singular matrix in elimination");
    nz.clear();
    for (int c = k + 1; c < n; ++c)
      if (!mpfr_zero_p(P(m.at(k, c)))) nz.push_back(c);
    for (int r = k + 1; r < n; ++r) {
      Real& rk = m.at(r, k);
      if (mpfr_zero_p(P(rk))) continue;
      mpfr_div(P(rk), P(rk), P(m.at(k, k)), MPFR_RNDN);
      mpfr_neg(P(l), P(rk), MPFR_RNDN);
      for (int c : nz) mpfr_fma(P(m.at(r, c)), P(l), P(m.at(k, c)), P(m.at(r, c)), MPFR_RNDN);
    }
  }
  lu.m = std::move(m);
  return lu;
}

void lu_solve(const Lu& lu, std::vector<Real>& b, unsigned bits) {
  const int n = lu.m.n;
  for (int k = 0; k < n; ++k) {
    int p = lu.swaps[static_cast<std::size_t>(k)];
    if (p != k) mpfr_swap(P(b[k]), P(b[p]));
  }
  Real t = make_real(bits);
  for (int r = 1; r < n; ++r)
    for (int k = 0; k < r; ++k) {
      const Real& lrk = lu.m.at(r, k);
      if (mpfr_zero_p(P(lrk))) continue;
      mpfr_mul(P(t), P(lrk), P(b[k]), MPFR_RNDN);
      mpfr_sub(P(b[r]), P(b[r]), P(t), MPFR_RNDN);
    }
  for (int r = n - 1; r >= 0; --r) {
    for (int c = r + 1; c < n; ++c) {
      const Real& urc = lu.m.at(r, c);
      if (mpfr_zero_p(P(urc))) continue;
      mpfr_mul(P(t), P(urc), P(b[c]), MPFR_RNDN);
      mpfr_sub(P(b[r]), P(b[r]), P(t), MPFR_RNDN);
    }
    mpfr_div(P(b[r]), P(b[r]), P(lu.m.at(r, r)), MPFR_RNDN);
  }
}

// sup_i |b_i - ((I - Q) x)_i| over states 1..s.
Real residual(const SubstochasticSystem& sys, int s, const std::vector<Real>& x,
              const std::vector<Real>& b, unsigned bits) {
  Real worst = make_real(bits), acc = make_real(bits);
  for (int i = 1; i <= s; ++i) {
    mpfr_sub(P(acc), P(b[i - 1]), P(x[i - 1]), MPFR_RNDN);
    for (int j = 1; j <= s; ++j) {
      const Real& qij = sys.q(i, j);
      if (mpfr_zero_p(P(qij))) continue;
      mpfr_fma(P(acc), P(qij), P(x[j - 1]), P(acc), MPFR_RNDN);
    }
    mpfr_abs(P(acc), P(acc), MPFR_RNDN);
    if (mpfr_cmp(P(acc), P(worst)) > 0) mpfr_set(P(worst), P(acc), MPFR_RNDN);
  }
  return worst;
}

bool residual_ok(const Real& res, int tol_digits) {
  // res < 10^-tol_digits  <=>  log10(res) < -tol_digits
  if (mpfr_zero_p(P(res))) return true;
  Real lg = make_real(64);
  mpfr_log10(P(lg), P(res), MPFR_RNDU);
  return mpfr_cmp_si(P(lg), -tol_digits) < 0;
}

using RhsBuilder = std::vector<Real> (*)(const SubstochasticSystem&, unsigned);

std::vector<Real> ones_rhs(const SubstochasticSystem& sys, unsigned bits) {
  std::vector<Real> b;
  b.reserve(static_cast<std::size_t>(sys.size()));
  for (int i = 1; i <= sys.size(); ++i) {
    Real v = make_real(bits);
    mpfr_set_ui(P(v), 1, MPFR_RNDN);
    b.push_back(std::move(v));
  }
  return b;
}

std::vector<Real> index_rhs(const SubstochasticSystem& sys, unsigned bits) {
  std::vector<Real> b;
  b.reserve(static_cast<std::size_t>(sys.size()));
  for (int i = 1; i <= sys.size(); ++i) {
    Real v = make_real(bits);
    mpfr_set_ui(P(v), static_cast<unsigned long>(i), MPFR_RNDN);
    b.push_back(std::move(v));
  }
  return b;
}

SolveResult solve_once(const SubstochasticSystem& sys, RhsBuilder rhs) {
  const unsigned bits = sys.precision().bits();
  Lu lu = factor(identity_minus_q(sys, sys.size(), bits), true, bits);
  std::vector<Real> b = rhs(sys, bits);
  std::vector<Real> x = b;
  lu_solve(lu, x, bits);
  SolveResult out;
  out.residual = residual(sys, sys.size(), x, b, bits);
  out.values = std::move(x);
  out.digits = sys.precision().decimal_digits;
  return out;
}

SolveResult solve_with_escalation(const SubstochasticSystem& sys, RhsBuilder rhs) {
  const int tol = sys.precision().tolerance_digits();
  SolveResult r = solve_once(sys, rhs);
  if (residual_ok(r.residual, tol)) return r;
  PrecisionConfig wider = sys.precision();
  wider.decimal_digits *= 2;
  wider.residual_digits = tol;
  SubstochasticSystem retry(sys.params(), wider);
  r = solve_once(retry, rhs);
  if (residual_ok(r.residual, tol)) return r;
  throw SolverError("solve residual above 1e-" + std::to_string(tol) + " even at " +
                    std::to_string(wider.decimal_digits) + " digits");
}

}  // namespace

void PrecisionConfig::validate() const {
  if (decimal_digits < 50) throw std::domain_error("PrecisionConfig: at least 50 digits required");
  if (residual_digits && *residual_digits < 1)
    throw std::domain_error("PrecisionConfig: residual digits must be positive");
}

unsigned PrecisionConfig::bits() const {
  return static_cast<unsigned>(std::ceil(decimal_digits * 3.3219280948873623)) + 8;
}

Real SubstochasticSystem::make() const { return make_real(precision_.bits()); }

SubstochasticSystem::SubstochasticSystem(const ModelParams& params, PrecisionConfig precision)
    : params_(params), precision_(precision) {
  precision_.validate();
  const int n = params_.n();
  if (n > kMaxExactN) throw std::domain_error("exact solver: n above the cap of 2000");
  const int s = n - 1;
  const unsigned bits = precision_.bits();

  std::vector<Real> log_fact;
  log_fact.reserve(static_cast<std::size_t>(n) + 1);
  log_fact.push_back(make_real(bits));
  for (int k = 1; k <= n; ++k) {
    Real v = make_real(bits);
    mpfr_set_ui(P(v), static_cast<unsigned long>(k), MPFR_RNDN);
    mpfr_log(P(v), P(v), MPFR_RNDN);
    mpfr_add(P(v), P(v), P(log_fact.back()), MPFR_RNDN);
    log_fact.push_back(std::move(v));
  }
  // Entries below 10^-digits are dropped; compare logs against this.
  const double cutoff = -precision_.decimal_digits * std::log(10.0);

  Real log_q = make_real(bits), log_stay = make_real(bits), log_go = make_real(bits);
  Real e = make_real(bits);
  mpfr_set_d(P(log_q), params_.p(), MPFR_RNDN);  // exact: p is a double
  mpfr_neg(P(log_q), P(log_q), MPFR_RNDN);
  mpfr_log1p(P(log_q), P(log_q), MPFR_RNDN);

  q_.reserve(static_cast<std::size_t>(s) * s);
  absorb_.reserve(static_cast<std::size_t>(s));
  for (int i = 1; i <= s; ++i) {
    const int trials = n - i;
    mpfr_mul_si(P(log_stay), P(log_q), i, MPFR_RNDN);  // log q^i
    mpfr_expm1(P(log_go), P(log_stay), MPFR_RNDN);
    mpfr_neg(P(log_go), P(log_go), MPFR_RNDN);
    mpfr_log(P(log_go), P(log_go), MPFR_RNDN);  // log(1 - q^i)
    double dropped = 0.0;
    auto entry = [&](int j, Real& out) {
      // log C(trials, j) + j log(1-q^i) + (trials-j) log q^i
      mpfr_sub(P(e), P(log_fact[trials]), P(log_fact[j]), MPFR_RNDN);
      mpfr_sub(P(e), P(e), P(log_fact[trials - j]), MPFR_RNDN);
      if (j > 0) {
        mpfr_mul_si(P(out), P(log_go), j, MPFR_RNDN);
        mpfr_add(P(e), P(e), P(out), MPFR_RNDN);
      }
      if (trials - j > 0) {
        mpfr_mul_si(P(out), P(log_stay), trials - j, MPFR_RNDN);
        mpfr_add(P(e), P(e), P(out), MPFR_RNDN);
      }
      const double approx = mpfr_get_d(P(e), MPFR_RNDN);
      if (approx < cutoff) {
        dropped += std::exp(approx);
        mpfr_set_zero(P(out), 1);
      } else {
        mpfr_exp(P(out), P(e), MPFR_RNDN);
      }
    };
    for (int j = 1; j <= s; ++j) {
      Real v = make_real(bits);
      if (j <= trials) entry(j, v);
      q_.push_back(std::move(v));
    }
    Real a = make_real(bits);
    entry(0, a);
    mpfr_add_d(P(a), P(a), dropped, MPFR_RNDN);
    absorb_.push_back(std::move(a));
  }
}

SolveResult expected_duration(const SubstochasticSystem& system) {
  return solve_with_escalation(system, ones_rhs);
}

SolveResult expected_size(const SubstochasticSystem& system) {
  return solve_with_escalation(system, index_rhs);
}

std::vector<std::vector<Real>> duration_survival_series(const SubstochasticSystem& system,
                                                        std::int64_t m_max) {
  if (m_max < 0) throw std::domain_error("duration_survival: m must be non-negative");
  const unsigned bits = system.precision().bits();
  const int s = system.size();
  std::vector<std::vector<Real>> rows;
  rows.reserve(static_cast<std::size_t>(m_max) + 1);
  rows.push_back(ones_rhs(system, bits));
  for (std::int64_t m = 1; m <= m_max; ++m) {
    const std::vector<Real>& prev = rows.back();
    std::vector<Real> next;
    next.reserve(static_cast<std::size_t>(s));
    for (int i = 1; i <= s; ++i) {
      Real acc = make_real(bits);
      for (int j = 1; j <= s; ++j) {
        const Real& qij = system.q(i, j);
        if (mpfr_zero_p(P(qij))) continue;
        mpfr_fma(P(acc), P(qij), P(prev[j - 1]), P(acc), MPFR_RNDN);
      }
      next.push_back(std::move(acc));
    }
    rows.push_back(std::move(next));
  }
  return rows;
}

std::vector<Real> duration_survival(const SubstochasticSystem& system, std::int64_t m) {
  return std::move(duration_survival_series(system, m).back());
}

SolveResult reach_probability(const SubstochasticSystem& system, double J) {
  const int n = system.n();
  if (J > n) throw std::domain_error("reach_probability: J above n");
  const unsigned bits = system.precision().bits();
  const int s_all = system.size();
  const int top = J <= 1.0 ? 1 : static_cast<int>(std::ceil(J));  // first state counted as reached
  const int s = top - 1;                                             // unresolved states 1..s
  SolveResult out;
  out.digits = system.precision().decimal_digits;
  out.residual = make_real(bits);
  out.values.reserve(static_cast<std::size_t>(s_all));
  if (s == 0) {
    out.values = ones_rhs(system, bits);
    return out;
  }
  std::vector<Real> b;
  b.reserve(static_cast<std::size_t>(s));
  for (int i = 1; i <= s; ++i) {
    Real acc = make_real(bits);
    for (int j = n - 1; j >= top; --j) mpfr_add(P(acc), P(acc), P(system.q(i, j)), MPFR_RNDN);
    b.push_back(std::move(acc));
  }
  Lu lu = factor(identity_minus_q(system, s, bits), true, bits);
  std::vector<Real> h = b;
  lu_solve(lu, h, bits);
  out.residual = residual(system, s, h, b, bits);
  const int tol = system.precision().tolerance_digits();
  if (!residual_ok(out.residual, tol))
    throw SolverError("reach_probability residual above tolerance");
  out.values = std::move(h);
  for (int i = s + 1; i <= s_all; ++i) {
    Real one = make_real(bits);
    mpfr_set_ui(P(one), 1, MPFR_RNDN);
    out.values.push_back(std::move(one));
  }
  return out;
}

double MaxDistribution::tail_at(int J) const {
  if (J <= 0) return 1.0;
  if (J >= static_cast<int>(tail.size())) return 0.0;
  return tail[static_cast<std::size_t>(J)].convert_to<double>();
}

MaxDistribution max_distribution(const SubstochasticSystem& system, int i0) {
  const int n = system.n();
  const int s_all = system.size();
  if (i0 < 1 || i0 > s_all) throw std::domain_error("max_distribution: i0 must lie in [1, n-1]");
  const unsigned bits = system.precision().bits();
  // I - Q is a nonsingular M-matrix, so elimination without pivoting is
  // stable and its leading blocks factor every truncated system at once.
  Lu lu = factor(identity_minus_q(system, s_all, bits), false, bits);

  MaxDistribution out;
  out.i0 = i0;
  out.tail.reserve(static_cast<std::size_t>(n) + 1);
  for (int J = 0; J <= n; ++J) {
    Real v = make_real(bits);
    if (J <= i0) mpfr_set_ui(P(v), 1, MPFR_RNDN);
    out.tail.push_back(std::move(v));
  }
  std::vector<Real> suffix;  // sum_{j >= J} Q(i, j)
  for (int i = 1; i <= s_all; ++i) suffix.push_back(make_real(bits));
  std::vector<Real> y;
  for (int i = 1; i <= s_all; ++i) y.push_back(make_real(bits));
  Real t = make_real(bits);
  for (int J = n; J > i0; --J) {
    if (J <= n - 1)
      for (int i = 1; i <= s_all; ++i)
        mpfr_add(P(suffix[i - 1]), P(suffix[i - 1]), P(system.q(i, J)), MPFR_RNDN);
    const int s = J - 1;
    for (int r = 0; r < s; ++r) {
      mpfr_set(P(y[r]), P(suffix[r]), MPFR_RNDN);
      for (int k = 0; k < r; ++k) {
        const Real& lrk = lu.m.at(r, k);
        if (mpfr_zero_p(P(lrk))) continue;
        mpfr_mul(P(t), P(lrk), P(y[k]), MPFR_RNDN);
        mpfr_sub(P(y[r]), P(y[r]), P(t), MPFR_RNDN);
      }
    }
    for (int r = s - 1; r >= i0 - 1; --r) {
      for (int c = r + 1; c < s; ++c) {
        const Real& urc = lu.m.at(r, c);
        if (mpfr_zero_p(P(urc))) continue;
        mpfr_mul(P(t), P(urc), P(y[c]), MPFR_RNDN);
        mpfr_sub(P(y[r]), P(y[r]), P(t), MPFR_RNDN);
      }
      mpfr_div(P(y[r]), P(y[r]), P(lu.m.at(r, r)), MPFR_RNDN);
    }
    mpfr_set(P(out.tail[J]), P(y[i0 - 1]), MPFR_RNDN);
  }
  out.pmf.reserve(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    Real d = make_real(bits);
    mpfr_sub(P(d), P(out.tail[v]), P(out.tail[v + 1]), MPFR_RNDN);
    out.pmf.push_back(std::move(d));
  }
  return out;
}

namespace {

std::vector<std::vector<double>> kernel_matrix(const ModelParams& params) {
  std::vector<std::vector<double>> k;
  for (int i = 0; i <= params.n(); ++i) k.push_back(kernel_row(params, i));
  return k;
}

}  // namespace

std::vector<std::vector<double>> state_distribution(const ModelParams& params, int i0,
                                                    int steps) {
  const int n = params.n();
  if (i0 < 0 || i0 > n) throw std::domain_error("state_distribution: bad i0");
  auto k = kernel_matrix(params);
  std::vector<std::vector<double>> out;
  std::vector<long double> cur(static_cast<std::size_t>(n) + 1, 0.0L);
  cur[i0] = 1.0L;
  auto push = [&] { out.emplace_back(cur.begin(), cur.end()); };
  push();
  for (int step = 0; step < steps; ++step) {
    std::vector<long double> next(cur.size(), 0.0L);
    for (int i = 0; i <= n; ++i) {
      if (cur[i] == 0.0L) continue;
      const auto& row = k[i];
      for (std::size_t j = 0; j < row.size(); ++j) next[j] += cur[i] * row[j];
    }
    cur.swap(next);
    push();
  }
  return out;
}

std::vector<double> expected_state(const ModelParams& params, int i0, int steps) {
  std::vector<double> m;
  for (const auto& d : state_distribution(params, i0, steps)) {
    long double s = 0.0L;
    for (std::size_t j = 0; j < d.size(); ++j) s += static_cast<long double>(j) * d[j];
    m.push_back(static_cast<double>(s));
  }
  return m;
}

std::vector<double> expected_running_max(const ModelParams& params, int i0, int steps) {
  const int n = params.n();
  if (i0 < 1 || i0 > n - 1) throw std::domain_error("expected_running_max: bad i0");
  auto k = kernel_matrix(params);
  const std::size_t w = static_cast<std::size_t>(n) + 1;
  // prob[x * w + M]
  std::vector<long double> cur(w * w, 0.0L), next(w * w);
  cur[static_cast<std::size_t>(i0) * w + i0] = 1.0L;
  std::vector<double> out{static_cast<double>(i0)};
  for (int step = 0; step < steps; ++step) {
    std::fill(next.begin(), next.end(), 0.0L);
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t mx = 0; mx < w; ++mx) {
        const long double pr = cur[x * w + mx];
        if (pr == 0.0L) continue;
        const auto& row = k[x];
        for (std::size_t j = 0; j < row.size(); ++j) {
          if (row[j] == 0.0) continue;
          next[j * w + std::max(mx, j)] += pr * row[j];
        }
      }
    cur.swap(next);
    long double e = 0.0L;
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t mx = 0; mx < w; ++mx) e += cur[x * w + mx] * static_cast<long double>(mx);
    out.push_back(static_cast<double>(e));
  }
  return out;
}

std::string to_decimal(const Real& x, int digits) {
  return x.str(static_cast<std::streamsize>(digits), std::ios_base::scientific);
}

}  // namespace avalanche
