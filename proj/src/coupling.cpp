#include "avalanche/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace avalanche {

void check_coupling_constant(const ModelParams& params, double c) {
  if (!(c > 0.0)) throw ConfigurationError("coupling constant must be positive");
  if (-params.log_q() > c / (params.n() - 1) * (1.0 + 1e-12))
    throw ConfigurationError("coupling constant c is below the network intensity (np > c)");
}

Triple coupled_step_monotone(const ModelParams& params, double c, std::int64_t x,
                             std::int64_t z, Rng& rng) {
  if (x < 0 || x > z) throw std::domain_error("coupled step: need 0 <= x <= z");
  if (x >= params.n()) throw std::domain_error("coupled step: x must be below n");
  if (x == 0) return {0, 0, z == 0 ? 0 : poisson(rng, c * static_cast<double>(z))};
  const std::int64_t slots = params.n() - x;
  const double mean = c * static_cast<double>(x) / static_cast<double>(slots);
  const double denom = -std::expm1(-mean);
  double thin = params.excite_prob(static_cast<int>(x)) / denom;
  if (thin > 1.0) {
    if (thin > 1.0 + 1e-9) throw ConfigurationError("thinning probability exceeds 1 (np > c)");
    thin = 1.0;
  }
  std::int64_t xs = 0, qs = 0;
  for (std::int64_t j = 0; j < slots; ++j) {
    std::int64_t y = poisson(rng, mean);
    qs += y;
    if (y > 0 && bernoulli(rng, thin)) ++xs;
  }
  std::int64_t extra = z > x ? poisson(rng, c * static_cast<double>(z - x)) : 0;
  return {xs, qs, qs + extra};
}

CoupledPath simulate_coupled(const ModelParams& params, double c, int i0, Rng& rng,
                             const CoupledOptions& opts) {
  if (i0 < 1 || i0 >= params.n()) throw std::domain_error("simulate_coupled: i0 must lie in [1, n-1]");
  check_coupling_constant(params, c);
  CoupledPath path;
  std::int64_t x = i0, q = i0, z = i0;
  path.x_seq.push_back(x);
  path.q_seq.push_back(q);
  path.z_seq.push_back(z);
  std::int64_t steps = 0;
  while (z > 0) {
    if (steps >= opts.max_steps) {
      path.status = PathStatus::truncated;
      break;
    }
    if (z > opts.population_cap) {
      path.status = PathStatus::escaped;
      break;
    }
    Triple t = coupled_step_monotone(params, c, x, z, rng);
    x = t.x;
    q = t.q;
    z = t.z;
    ++steps;
    path.x_seq.push_back(x);
    path.q_seq.push_back(q);
    path.z_seq.push_back(z);
  }
  return path;
}

double tv_binomial_poisson(std::int64_t n_trials, double p) {
  if (n_trials < 0) throw std::domain_error("tv_binomial_poisson: negative trials");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("tv_binomial_poisson: p must lie in (0,1)");
  return 0.5 * p * std::min(1.0, static_cast<double>(n_trials) * p);
}

double tv_binomial_poisson_proven(std::int64_t n_trials, double p) {
  if (n_trials < 0) throw std::domain_error("tv_binomial_poisson: negative trials");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("tv_binomial_poisson: p must lie in (0,1)");
  return -p * std::expm1(-static_cast<double>(n_trials) * p);
}

double tv_poisson_poisson(double mu, double c) {
  if (!(mu > 0.0)) throw std::domain_error("tv_poisson_poisson: mu must be positive");
  if (mu >= c) throw std::domain_error("tv_poisson_poisson: need mu < c");
  return std::min(1.0, 1.0 / std::sqrt(c)) * (c - mu);
}

std::vector<double> poisson_pmf_truncated(double mean) {
  if (mean < 0.0) throw std::domain_error("poisson pmf: negative mean");
  std::vector<double> pmf;
  if (mean == 0.0) return {1.0};
  double cum = 0.0;
  for (std::int64_t k = 0;; ++k) {
    double kd = static_cast<double>(k);
    double v = std::exp(kd * std::log(mean) - mean - std::lgamma(kd + 1.0));
    pmf.push_back(v);
    cum += v;
    if (kd > mean && (cum > 1.0 - 1e-12 || v == 0.0)) break;
  }
  return pmf;
}

namespace {

std::vector<double> normalized_cdf(const std::vector<double>& w) {
  std::vector<double> cdf(w.size());
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    s += w[k];
    cdf[k] = s;
  }
  if (s > 0.0)
    for (auto& v : cdf) v /= s;
  return cdf;
}

std::int64_t draw_from(const std::vector<double>& cdf, Rng& rng) {
  double u = uniform01(rng);
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t k = static_cast<std::size_t>(it - cdf.begin());
  if (k == cdf.size()) {
    k = cdf.size() - 1;
    while (k > 0 && cdf[k] == cdf[k - 1]) --k;
  }
  return static_cast<std::int64_t>(k);
}

}  // namespace

MaximalCoupling::MaximalCoupling(std::vector<double> p1, std::vector<double> p2) {
  const std::size_t len = std::max(p1.size(), p2.size());
  p1.resize(len, 0.0);
  p2.resize(len, 0.0);
  std::vector<double> overlap(len), r1(len), r2(len);
  double common = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    overlap[k] = std::min(p1[k], p2[k]);
    r1[k] = p1[k] - overlap[k];
    r2[k] = p2[k] - overlap[k];
    common += overlap[k];
  }
  tv_ = std::max(0.0, 1.0 - common);
  overlap_cdf_ = normalized_cdf(overlap);
  rest1_cdf_ = normalized_cdf(r1);
  rest2_cdf_ = normalized_cdf(r2);
}

MaximalCoupling::Draw MaximalCoupling::sample(Rng& rng) const {
  if (uniform01(rng) >= tv_) {
    std::int64_t v = draw_from(overlap_cdf_, rng);
    return {v, v, false};
  }
  std::int64_t x = draw_from(rest1_cdf_, rng);
  std::int64_t z = draw_from(rest2_cdf_, rng);
  return {x, z, true};
}

MaximalCoupling maximal_coupling_at(const ModelParams& params, int i) {
  return MaximalCoupling(kernel_row(params, i), poisson_pmf_truncated(params.c() * i));
}

MaximalCoupling::Draw step_coupled_maximal(const ModelParams& params, int i, Rng& rng) {
  if (i == 0) return {0, 0, false};
  return maximal_coupling_at(params, i).sample(rng);
}

double divergence_envelope(double c, double i, int n) {
  if (c > 1.0) return 3.0 * std::pow(c, 1.5) * std::pow(i, 1.5) / (2.0 * n);
  return 3.0 * c * i * i / (2.0 * n);
}

CoupledPath simulate_maximal_coupled(const ModelParams& params, int i0, Rng& rng,
                                     const CoupledOptions& opts) {
  if (i0 < 1 || i0 >= params.n()) throw std::domain_error("simulate_maximal_coupled: bad i0");
  CoupledPath path;
  std::int64_t x = i0, z = i0;
  path.x_seq.push_back(x);
  path.z_seq.push_back(z);
  std::map<std::int64_t, MaximalCoupling> cache;
  std::int64_t steps = 0;
  while (x > 0 || z > 0) {
    if (steps >= opts.max_steps) {
      path.status = PathStatus::truncated;
      break;
    }
    if (z > opts.population_cap) {
      path.status = PathStatus::escaped;
      break;
    }
    ++steps;
    if (!path.tau && x == z) {
      auto it = cache.find(x);
      if (it == cache.end())
        it = cache.emplace(x, maximal_coupling_at(params, static_cast<int>(x))).first;
      auto d = it->second.sample(rng);
      x = d.x;
      z = d.z;
      if (d.diverged) path.tau = steps;
    } else {
      x = step_count(params, static_cast<int>(x), rng);
      z = poisson(rng, params.c() * static_cast<double>(z));
    }
    path.x_seq.push_back(x);
    path.z_seq.push_back(z);
  }
  return path;
}

}  // namespace avalanche
