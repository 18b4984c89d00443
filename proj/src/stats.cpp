#include "avalanche/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace avalanche {

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double EstimateWithCI::z() const {
  boost::math::normal_distribution<double> nd;
  return boost::math::quantile(nd, 0.5 + 0.5 * level);
}

EstimateWithCI EstimateWithCI::from_samples(std::span<const double> xs, double level) {
  EstimateWithCI e;
  e.level = level;
  e.count = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return e;
  const double n = static_cast<double>(xs.size());
  e.estimate = pairwise_sum(xs) / n;
  if (xs.size() > 1) {
    std::vector<double> dev(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) dev[k] = (xs[k] - e.estimate) * (xs[k] - e.estimate);
    const double var = pairwise_sum(dev) / (n - 1.0);
    e.stderr_ = std::sqrt(var / n);
  }
  return e;
}

EstimateWithCI EstimateWithCI::proportion(std::int64_t hits, std::int64_t count, double level) {
  EstimateWithCI e;
  e.level = level;
  e.count = count;
  if (count == 0) return e;
  const double n = static_cast<double>(count);
  e.estimate = static_cast<double>(hits) / n;
  e.stderr_ = std::sqrt(e.estimate * (1.0 - e.estimate) / n);
  return e;
}

namespace {

double chi_sq_sf(double stat, int dof) {
  if (dof <= 0) return 1.0;
  boost::math::chi_squared_distribution<double> d(dof);
  return boost::math::cdf(boost::math::complement(d, stat));
}

}  // namespace

ChiSquareResult chi_square_gof(std::span<const std::int64_t> observed,
                               std::span<const double> probs, double min_expected) {
  if (observed.size() != probs.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
  double total = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  // Probability mass not covered by `probs` joins the last cell.
  double covered = 0.0;
  for (double p : probs) covered += p;
  std::vector<double> exp_cells;
  std::vector<double> obs_cells;
  double e_acc = 0.0, o_acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    e_acc += probs[k] * total;
    o_acc += static_cast<double>(observed[k]);
    if (k + 1 == probs.size()) e_acc += std::max(0.0, 1.0 - covered) * total;
    if (e_acc >= min_expected) {
      exp_cells.push_back(e_acc);
      obs_cells.push_back(o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  if (!exp_cells.empty()) {
    exp_cells.back() += e_acc;
    obs_cells.back() += o_acc;
  }
  ChiSquareResult r;
  for (std::size_t k = 0; k < exp_cells.size(); ++k) {
    const double d = obs_cells[k] - exp_cells[k];
    r.statistic += d * d / exp_cells[k];
  }
  r.dof = static_cast<int>(exp_cells.size()) - 1;
  r.p_value = chi_sq_sf(r.statistic, r.dof);
  return r;
}

ChiSquareResult chi_square_two_sample(std::span<const std::int64_t> a,
                                      std::span<const std::int64_t> b, double min_expected) {
  if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
  double na = 0.0, nb = 0.0;
  for (auto v : a) na += static_cast<double>(v);
  for (auto v : b) nb += static_cast<double>(v);
  const double tot = na + nb;
  std::vector<double> ca, cb;
  double acc_a = 0.0, acc_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc_a += static_cast<double>(a[k]);
    acc_b += static_cast<double>(b[k]);
    const double row = acc_a + acc_b;
    if (row * std::min(na, nb) / tot >= min_expected) {
      ca.push_back(acc_a);
      cb.push_back(acc_b);
      acc_a = acc_b = 0.0;
    }
  }
  if (!ca.empty()) {
    ca.back() += acc_a;
    cb.back() += acc_b;
  }
  ChiSquareResult r;
  for (std::size_t k = 0; k < ca.size(); ++k) {
    const double row = ca[k] + cb[k];
    const double ea = row * na / tot, eb = row * nb / tot;
    r.statistic += (ca[k] - ea) * (ca[k] - ea) / ea + (cb[k] - eb) * (cb[k] - eb) / eb;
  }
  r.dof = static_cast<int>(ca.size()) - 1;
  r.p_value = chi_sq_sf(r.statistic, r.dof);
  return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_normal(std::vector<double> samples, double mean, double sd) {
  if (samples.empty()) throw std::invalid_argument("ks_normal: empty sample");
  if (!(sd > 0.0)) throw std::invalid_argument("ks_normal: sd must be positive");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  // Compare against the ECDF just before and just after each distinct value.
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size();) {
    std::size_t end = k;
    while (end < samples.size() && samples[end] == samples[k]) ++end;
    const double f = normal_cdf((samples[k] - mean) / sd);
    d = std::max({d, static_cast<double>(end) / n - f, f - static_cast<double>(k) / n});
    k = end;
  }
  return d;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  const std::size_t len = std::max(a.size(), b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    const double x = k < a.size() ? a[k] : 0.0;
    const double y = k < b.size() ? b[k] : 0.0;
    s += std::abs(x - y);
  }
  return 0.5 * s;
}

}  // namespace avalanche
