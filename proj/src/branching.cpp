#include "avalanche/branching.hpp"

#include <cmath>
#include <stdexcept>

namespace avalanche {

BranchingParams::BranchingParams(double lambda_, std::int64_t i0_) : lambda(lambda_), i0(i0_) {
  if (!(lambda > 0.0)) throw std::domain_error("BranchingParams: lambda must be positive");
  if (i0 < 1) throw std::domain_error("BranchingParams: i0 must be at least 1");
}

Regime classify(double lambda) {
  if (lambda < 1.0) return Regime::subcritical;
  if (lambda > 1.0) return Regime::supercritical;
  return Regime::critical;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::subcritical: return "subcritical";
    case Regime::critical: return "critical";
    case Regime::supercritical: return "supercritical";
  }
  return "?";
}

double extinction_prob(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::domain_error("extinction_prob: mu must be positive");
  if (mu == 1.0) throw std::domain_error("extinction_prob: mu = 1 has only the root 1");
  if (mu > 1.0) {
    // f(a) = a - exp(-(1-a) mu) changes sign on [0, 1/mu].
    auto f = [mu](double a) { return a - std::exp(-(1.0 - a) * mu); };
    double lo = 0.0, hi = 1.0 / mu;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (f(mid) < 0.0 ? lo : hi) = mid;
    }
    double a = 0.5 * (lo + hi);
    double fp = 1.0 - mu * std::exp(-(1.0 - a) * mu);
    if (fp > 0.0) {
      double next = a - f(a) / fp;
      if (next > lo && next < hi) a = next;
    }
    return a;
  }
  // mu < 1: x e^{-x} = mu e^{-mu} with x > 1, and alpha = x / mu.
  const double target = std::log(mu) - mu;
  auto h = [target](double x) { return std::log(x) - x - target; };  // decreasing on x > 1
  double lo = 1.0, hi = 2.0;
  while (h(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  double hp = 1.0 / x - 1.0;
  if (hp < 0.0) {
    double next = x - h(x) / hp;
    if (next > lo && next < hi) x = next;
  }
  return x / mu;
}

double borel_tanner_log_pmf(double lambda, std::int64_t i0, std::int64_t j) {
  if (!(lambda > 0.0)) throw std::domain_error("borel_tanner: lambda must be positive");
  if (i0 < 1) throw std::domain_error("borel_tanner: i0 must be at least 1");
  if (j < i0) return -INFINITY;
  const double jd = static_cast<double>(j);
  const double k = static_cast<double>(j - i0);
  double out = std::log(static_cast<double>(i0) / jd) - std::lgamma(k + 1.0) - lambda * jd;
  if (k > 0) out += k * std::log(lambda * jd);
  return out;
}

double borel_tanner_pmf(double lambda, std::int64_t i0, std::int64_t j) {
  if (j < i0) return 0.0;
  return std::exp(borel_tanner_log_pmf(lambda, i0, j));
}

TruncatedSum borel_tanner_mass(double lambda, std::int64_t i0) {
  constexpr std::int64_t kCriticalCap = 1000000;
  double sum = 0.0;
  std::int64_t j = i0;
  if (lambda == 1.0) {
    // Kahan sum up to the cap, tail beyond it from the j^{-3/2} asymptote.
    double comp = 0.0;
    for (; j < i0 + kCriticalCap; ++j) {
      double y = borel_tanner_pmf(lambda, i0, j) - comp;
      double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    const double tail = 2.0 * static_cast<double>(i0) /
                        std::sqrt(2.0 * M_PI * (static_cast<double>(j) - 0.5));
    return {sum + tail, j - 1};
  }
  const double min_j = 10.0 / ((1.0 - lambda) * (1.0 - lambda));
  for (;; ++j) {
    double term = borel_tanner_pmf(lambda, i0, j);
    sum += term;
    if (static_cast<double>(j) > min_j && term < 1e-15 * sum) break;
  }
  return {sum, j};
}

Trajectory gw_simulate(const BranchingParams& params, Rng& rng, const GwOptions& opts) {
  Trajectory t;
  std::int64_t z = params.i0;
  if (opts.record_states) t.states.push_back(z);
  t.size = z;
  t.max = z;
  std::int64_t steps = 0;
  t.status = PathStatus::absorbed;
  while (z > 0) {
    if (steps >= opts.max_steps) {
      t.status = PathStatus::truncated;
      break;
    }
    if (z > opts.population_cap) {
      t.status = PathStatus::escaped;
      break;
    }
    std::int64_t next = 0;
    if (opts.sampler == GwSampler::aggregated) {
      next = poisson(rng, params.lambda * static_cast<double>(z));
    } else {
      for (std::int64_t u = 0; u < z; ++u) next += poisson(rng, params.lambda);
    }
    z = next;
    ++steps;
    if (opts.record_states) t.states.push_back(z);
    t.size += z;
    if (z > t.max) t.max = z;
  }
  t.duration = steps;
  return t;
}

double gw_extinct_by(double lambda, std::int64_t i0, std::int64_t m) {
  if (m < 0) throw std::domain_error("gw_extinct_by: m must be non-negative");
  double s = 0.0;
  for (std::int64_t k = 0; k < m; ++k) s = std::exp(lambda * (s - 1.0));
  return std::pow(s, static_cast<double>(i0));
}

double agresti_s(double c) {
  if (!(c > 0.0)) throw std::domain_error("s(c): c must be positive");
  return (2.0 - c) / c;
}

double agresti_r(double c) {
  if (!(c > 0.0)) throw std::domain_error("r(c): c must be positive");
  if (c == 1.0) return 1.0;
  return c * std::exp(-c) / (std::expm1(-c) + c);
}

namespace {

double agresti_form(double w, double x, std::int64_t i0, double scale) {
  return std::pow(scale * w * (1.0 - x) / (w - x), static_cast<double>(i0));
}

}  // namespace

Interval agresti_duration_bounds(double c, std::int64_t i0, std::int64_t m) {
  if (m < 1) throw std::domain_error("agresti bounds: m must be at least 1");
  if (i0 < 1) throw std::domain_error("agresti bounds: i0 must be at least 1");
  if (!(c > 0.0)) throw std::domain_error("agresti bounds: c must be positive");
  const double md = static_cast<double>(m);
  if (c == 1.0) {
    return {std::pow(md / (md + 2.0), static_cast<double>(i0)),
            std::pow(md / (md + M_E - 1.0), static_cast<double>(i0))};
  }
  if (c < 1.0) {
    const double x = std::pow(c, md);
    return {agresti_form(agresti_s(c), x, i0, 1.0), agresti_form(agresti_r(c), x, i0, 1.0)};
  }
  const double a = extinction_prob(c);
  const double mu = a * c;
  const double x = std::pow(mu, md);
  return {agresti_form(agresti_s(mu), x, i0, a), agresti_form(agresti_r(mu), x, i0, a)};
}

double lindvall_max_bound(double lambda, std::int64_t i0, std::int64_t m) {
  if (i0 < 1 || m <= i0) throw std::domain_error("lindvall bound: need m > i0 >= 1");
  if (lambda > 1.0) throw std::domain_error("lindvall bound: no bound for lambda > 1");
  if (!(lambda > 0.0)) throw std::domain_error("lindvall bound: lambda must be positive");
  if (lambda == 1.0) return static_cast<double>(i0) / static_cast<double>(m);
  const double la = std::log(extinction_prob(lambda));
  return std::expm1(static_cast<double>(i0) * la) / std::expm1(static_cast<double>(m) * la);
}

}  // namespace avalanche
