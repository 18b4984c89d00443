#include "avalanche/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace avalanche {

double g_map(double alpha, double x) { return (1.0 - x) * -std::expm1(-alpha * x); }

double dg_map(double alpha, double x) {
  return std::expm1(-alpha * x) + alpha * (1.0 - x) * std::exp(-alpha * x);
}

double d2g_map(double alpha, double x) {
  return -alpha * std::exp(-alpha * x) * (2.0 + alpha - alpha * x);
}

namespace {

template <class F>
double bisect(F f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int it = 0; it < iters && hi - lo > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void require_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

double fixed_point_zeta(double alpha) {
  if (!(alpha > 1.0)) throw std::domain_error("fixed_point_zeta: alpha must exceed 1");
  // g(x)/x - 1 is decreasing, positive near 0 and negative at 1/2.
  auto f = [&](double x) { return g_map(alpha, x) / x - 1.0; };
  double lo = 1e-300, hi = 0.5;
  double x = bisect(f, lo, hi);
  for (int it = 0; it < 3; ++it) {
    double d = dg_map(alpha, x) - 1.0;
    if (d == 0.0) break;
    double nx = x - (g_map(alpha, x) - x) / d;
    if (!(nx > 0.0 && nx < 0.5)) break;
    x = nx;
  }
  return x;
}

ArgMax argmax_nu(double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("argmax_nu: alpha must be positive");
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = g_map(alpha, x1), f2 = g_map(alpha, x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = g_map(alpha, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = g_map(alpha, x1);
    }
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    double nx = x - dg_map(alpha, x) / d2g_map(alpha, x);
    if (!(nx > 0.0 && nx < 1.0)) break;
    x = nx;
  }
  return {x, g_map(alpha, x)};
}

double transitional_alpha() {
  auto f = [](double a) { return argmax_nu(a).nu - fixed_point_zeta(a); };
  return bisect(f, 1.5, 10.0, 100);
}

MapParams MapParams::at(double alpha) {
  ArgMax m = argmax_nu(alpha);
  MapParams p{alpha, std::nullopt, m.nu, m.chi};
  if (alpha > 1.0) p.zeta = fixed_point_zeta(alpha);
  return p;
}

MeanFieldPath iterate_mean_field(double lambda, double psi0, int steps) {
  require_unit(psi0, "psi0");
  if (steps < 0) throw std::domain_error("steps must be non-negative");
  MeanFieldPath path;
  path.psi.reserve(steps + 1);
  path.phi.reserve(steps + 1);
  double psi = psi0, phi = psi0;
  for (int k = 0; k <= steps; ++k) {
    path.psi.push_back(psi);
    path.phi.push_back(phi);
    path.branching_factor.push_back(psi > 0.0 ? g_map(lambda, psi) / psi : lambda);
    psi = g_map(lambda, psi);
    phi = -std::expm1(-lambda * phi);
  }
  return path;
}

MeanFieldLimit mean_field_limit(double lambda, double psi0) {
  require_unit(psi0, "psi0");
  double psi = psi0;
  std::int64_t k = 0;
  bool converged = false;
  for (; k < 100000; ++k) {
    double next = g_map(lambda, psi);
    double diff = std::abs(next - psi);
    psi = next;
    if (diff < 1e-14) {
      converged = true;
      break;
    }
  }
  if (lambda > 1.0 && psi > 1e-8) {
    double z = fixed_point_zeta(lambda);
    if (std::abs(psi - z) < 1e-6) psi = z;
  }
  return {psi, k, converged};
}

MeanFieldEnvelopes mean_field_upper_bounds(const ModelParams& params, double ex0_over_n,
                                           int steps) {
  require_unit(ex0_over_n, "E(X_0)/n");
  const double alpha = params.alpha();
  MeanFieldEnvelopes env;
  env.alpha = alpha;
  MeanFieldPath path = iterate_mean_field(alpha, ex0_over_n, steps);
  env.phi = path.phi;
  env.cap = std::max(ex0_over_n, argmax_nu(alpha).chi);
  if (alpha <= 1.0) {
    env.psi = path.psi;
  } else {
    static const double a_tr = transitional_alpha();
    double zeta = fixed_point_zeta(alpha);
    if (alpha > a_tr) {
      env.psi_note = "alpha exceeds the transitional value";
    } else if (ex0_over_n > zeta) {
      env.psi_note = "E(X_0)/n exceeds the fixed point zeta";
    } else {
      env.psi = path.psi;
    }
  }
  return env;
}

FluctuationModel FluctuationModel::build(double lambda, double psi0, int steps) {
  FluctuationModel m;
  m.lambda = lambda;
  m.psi = iterate_mean_field(lambda, psi0, steps).psi;
  for (double x : m.psi) {
    m.variance.push_back(g_map(lambda, x) * std::exp(-lambda * x));
    m.slope.push_back(dg_map(lambda, x));
  }
  return m;
}

std::vector<double> FluctuationModel::variance_path(double var0) const {
  std::vector<double> v{var0};
  for (std::size_t k = 0; k + 1 < psi.size(); ++k)
    v.push_back(slope[k] * slope[k] * v.back() + variance[k]);
  return v;
}

Ar1Path simulate_ar1(const FluctuationModel& model, double y0, Rng& rng) {
  Ar1Path out;
  double y = y0;
  for (std::size_t k = 0; k < model.psi.size(); ++k) {
    out.y.push_back(y);
    out.y_het.push_back(0.5 * (1.0 - 2.0 * model.psi[k]) * y);
    if (k + 1 < model.psi.size()) {
      double sd = std::sqrt(model.variance[k]);
      y = model.slope[k] * y + (sd > 0.0 ? normal(rng, 0.0, sd) : 0.0);
    }
  }
  return out;
}

namespace {

// Ensemble member with alpha = lambda exactly.
ModelParams ensemble_params(int n, double lambda) {
  return ModelParams(n, -std::expm1(-lambda / n));
}

int initial_count(int n, double psi0) {
  return static_cast<int>(std::lround(n * psi0));
}

}  // namespace

LlnCltReport lln_clt_check(const LlnCltConfig& cfg) {
  if (cfg.n_schedule.empty() || cfg.replicates < 2 || cfg.k < 0)
    throw std::domain_error("lln_clt_check: empty schedule or too few replicates");
  LlnCltReport rep;
  std::vector<double> count_dev, het_dev;
  for (std::size_t s = 0; s < cfg.n_schedule.size(); ++s) {
    const int n = cfg.n_schedule[s];
    const ModelParams params = ensemble_params(n, cfg.lambda);
    const int x0 = initial_count(n, cfg.psi0);
    const double psi_start = static_cast<double>(x0) / n;
    const FluctuationModel fm = FluctuationModel::build(cfg.lambda, psi_start, cfg.k);
    const double psi_k = fm.psi.back();
    const double r_k = 0.5 * psi_k * (1.0 - psi_k);
    std::vector<double> absdev(cfg.replicates);
    count_dev.assign(cfg.replicates, 0.0);
    het_dev.assign(cfg.replicates, 0.0);
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    for (int r = 0; r < cfg.replicates; ++r) {
      Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(r), s + 1);
      int x = x0;
      for (int k = 0; k < cfg.k; ++k) x = step_count(params, x, rng);
      double frac = static_cast<double>(x) / n;
      absdev[r] = std::abs(frac - psi_k);
      count_dev[r] = sqrt_n * (frac - psi_k);
      double h = static_cast<double>(x) * (n - x) / (2.0 * n * (n - 1.0));
      het_dev[r] = sqrt_n * (h - r_k);
    }
    rep.n.push_back(n);
    rep.mean_abs_dev.push_back(pairwise_sum(absdev) / cfg.replicates);
    if (s + 1 == cfg.n_schedule.size()) {
      rep.psi_k = psi_k;
      rep.clt_variance = fm.variance_path(0.0).back();
      const double sd = std::sqrt(rep.clt_variance);
      rep.ks_count = ks_normal(count_dev, 0.0, sd);
      rep.ks_heterogeneity = ks_normal(het_dev, 0.0, 0.5 * std::abs(1.0 - 2.0 * psi_k) * sd);
    }
  }
  rep.lln_shrinks = true;
  for (std::size_t s = 1; s < rep.mean_abs_dev.size(); ++s)
    if (!(rep.mean_abs_dev[s] < rep.mean_abs_dev[s - 1])) rep.lln_shrinks = false;
  return rep;
}

StabilityInterval stability_interval(double lambda) {
  if (!(lambda > 1.0)) throw std::domain_error("stability_interval: lambda must exceed 1");
  StabilityInterval s{};
  s.lambda = lambda;
  s.zeta = fixed_point_zeta(lambda);
  ArgMax m = argmax_nu(lambda);
  s.nu = m.nu;
  s.chi = m.chi;
  // g' decreases from lambda at 0 to e^{-lambda} - 1 at 1.
  s.x1 = bisect([&](double x) { return dg_map(lambda, x) - 1.0; }, 0.0, 1.0);
  const double top = std::max({s.nu, s.zeta, s.chi});
  double b = 0.5 * (top + 1.0);
  for (int it = 0; it < 60 && g_map(lambda, b) <= s.x1; ++it) b = 0.5 * (b + top);
  if (g_map(lambda, b) <= s.x1) throw std::runtime_error("stability_interval: no admissible b");
  s.b = b;
  s.a = 0.5 * (s.x1 + std::min({s.nu, s.zeta, g_map(lambda, b)}));
  const double h = std::min(g_map(lambda, s.a), g_map(lambda, s.b));
  s.eps = 0.99 * std::min({s.b - s.chi, h - s.a, s.zeta - s.a, s.b - s.zeta, 0.5 * (s.b - s.a)});
  if (!(s.eps > 0.0)) throw std::runtime_error("stability_interval: empty margin");
  s.rho = std::max(dg_map(lambda, s.a), -std::expm1(-lambda));
  if (!(s.rho < 1.0)) throw std::runtime_error("stability_interval: no contraction");
  s.gamma = (1.0 - s.b) / (2.0 * (1.0 - s.rho) * (1.0 - s.rho));
  return s;
}

Envelope concentration_envelope(int n, double lambda, double psi0, double delta, std::int64_t m,
                                EnvelopeKind kind) {
  if (n < 3) throw std::domain_error("n must be at least 3");
  require_unit(psi0, "psi0");
  if (!(delta > 0.0)) throw std::domain_error("delta must be positive");
  const double x0 = static_cast<double>(initial_count(n, psi0)) / n;
  Envelope e{};
  e.kind = kind;
  if (kind == EnvelopeKind::supercritical_tracking) {
    StabilityInterval s = stability_interval(lambda);
    if (!(delta < s.eps)) throw std::domain_error("delta must be below the stability margin");
    if (!(x0 > s.a + delta && x0 < s.b - delta))
      throw std::domain_error("x_{n,0} must lie in (a + delta, b - delta)");
    if (m < 0) throw std::domain_error("m must be non-negative");
    e.gamma = s.gamma;
    e.rho = s.rho;
    e.m = m;
  } else {
    if (kind == EnvelopeKind::hitting ? !(lambda > 0.0 && lambda <= 1.0)
                                      : !(lambda > 0.0 && lambda < 1.0))
      throw std::domain_error("lambda outside the regime of this envelope");
    const double psi1 = g_map(lambda, x0);
    if (!(delta < x0 - psi1)) throw std::domain_error("delta must be below psi_0 - psi_1");
    double lead = lambda;
    if (lambda == 1.0) {
      ArgMax mx = argmax_nu(lambda);
      if (!(delta < mx.chi)) throw std::domain_error("delta exceeds max g");
      double a = bisect([&](double x) { return g_map(lambda, x) - delta; }, 0.0, mx.nu);
      e.a = a;
      lead = dg_map(lambda, a);
    }
    e.rho = std::max(lead, std::abs(dg_map(lambda, x0)));
    e.gamma = (1.0 - x0) / (2.0 * (1.0 - e.rho) * (1.0 - e.rho));
    if (kind == EnvelopeKind::hitting) {
      e.m = static_cast<std::int64_t>(std::floor(std::log(x0 / delta))) + 1;
      const MeanFieldPath path = iterate_mean_field(lambda, x0, static_cast<int>(e.m));
      e.deterministic_below = path.psi.back() <= delta;
    } else {
      if (m < 0) throw std::domain_error("m must be non-negative");
      e.m = m;
    }
  }
  auto product = [&](double gamma) {
    const double tail = std::exp(-gamma * delta * delta * n);
    return std::pow(std::max(0.0, 1.0 - 2.0 * tail), static_cast<double>(e.m));
  };
  e.bound = product(e.gamma);
  e.linear = 1.0 - 2.0 * static_cast<double>(e.m) * std::exp(-e.gamma * delta * delta * n);
  e.conservative_gamma = 0.5 * (1.0 - e.rho) * (1.0 - e.rho);
  e.conservative_bound = product(e.conservative_gamma);
  return e;
}

EstimateWithCI stay_probability(int n, double lambda, double psi0, double delta,
                                std::int64_t m, EnvelopeKind kind, int replicates,
                                std::uint64_t seed) {
  if (replicates < 1) throw std::domain_error("replicates must be positive");
  const ModelParams params = ensemble_params(n, lambda);
  const int x0 = initial_count(n, psi0);
  const MeanFieldPath path =
      iterate_mean_field(lambda, static_cast<double>(x0) / n, static_cast<int>(m));
  std::int64_t hits = 0;
  for (int r = 0; r < replicates; ++r) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(r));
    int x = x0;
    bool stayed = true;
    for (std::int64_t k = 0; k <= m && stayed; ++k) {
      if (k > 0) x = step_count(params, x, rng);
      const double frac = static_cast<double>(x) / n;
      if (kind == EnvelopeKind::hitting)
        stayed = frac >= delta;
      else
        stayed = std::abs(frac - path.psi[k]) < delta;
    }
    hits += stayed;
  }
  return EstimateWithCI::proportion(hits, replicates);
}

}  // namespace avalanche
