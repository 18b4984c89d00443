#include "avalanche/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace avalanche {

ModelParams::ModelParams(int n, double p) : ModelParams(n, p, n * p) {}

ModelParams::ModelParams(int n, double p, double c) : n_(n), p_(p), c_(c) {
  if (n < 3) throw std::domain_error("ModelParams: n must be at least 3");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("ModelParams: p must lie in (0,1)");
  q_ = 1.0 - p_;
  log_q_ = std::log1p(-p_);
  alpha_ = -static_cast<double>(n_) * log_q_;
}

ModelParams ModelParams::from_c(int n, double c) {
  if (n < 3) throw std::domain_error("ModelParams: n must be at least 3");
  return ModelParams(n, c / n, c);
}

double ModelParams::excite_prob(int i) const { return -std::expm1(i * log_q_); }

SetState::SetState(int n) : bits_(static_cast<std::size_t>(n), false) {}

SetState::SetState(int n, const std::vector<int>& labels) : SetState(n) {
  for (int l : labels) insert(l);
}

bool SetState::contains(int label) const {
  if (label < 1 || label > n()) throw std::out_of_range("SetState: label out of range");
  return bits_[label - 1];
}

void SetState::insert(int label) {
  if (label < 1 || label > n()) throw std::out_of_range("SetState: label out of range");
  if (!bits_[label - 1]) {
    bits_[label - 1] = true;
    ++count_;
  }
}

std::vector<int> SetState::labels() const {
  std::vector<int> out;
  out.reserve(count_);
  for (int l = 1; l <= n(); ++l)
    if (bits_[l - 1]) out.push_back(l);
  return out;
}

std::vector<std::int64_t> Trajectory::heterogeneity(int n) const {
  std::vector<std::int64_t> h;
  h.reserve(states.size());
  for (auto x : states) h.push_back(x * (n - x));
  return h;
}

namespace {

void check_state(const ModelParams& params, int i) {
  if (i < 0 || i > params.n())
    throw std::domain_error("state " + std::to_string(i) + " outside [0, n]");
}

}  // namespace

double kernel_log_pmf(const ModelParams& params, int i, int j) {
  check_state(params, i);
  const int trials = params.n() - i;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (j < 0 || j > trials) return kNegInf;
  if (i == 0 || trials == 0) return j == 0 ? 0.0 : kNegInf;
  const double log_stay = i * params.log_q();  // log q^i
  const double log_go = std::log(-std::expm1(log_stay));
  const double log_binom =
      std::lgamma(trials + 1.0) - std::lgamma(j + 1.0) - std::lgamma(trials - j + 1.0);
  double out = log_binom;
  if (j > 0) out += j * log_go;
  if (trials - j > 0) out += (trials - j) * log_stay;
  return out;
}

double kernel_pmf(const ModelParams& params, int i, int j) {
  return std::exp(kernel_log_pmf(params, i, j));
}

std::vector<double> kernel_row(const ModelParams& params, int i) {
  check_state(params, i);
  std::vector<double> row(static_cast<std::size_t>(params.n() - i + 1));
  for (int j = 0; j <= params.n() - i; ++j) row[j] = kernel_pmf(params, i, j);
  return row;
}

namespace {

Rational rational_pow(Rational base, int e) {
  Rational out(1);
  for (; e > 0; e >>= 1) {
    if (e & 1) out *= base;
    base *= base;
  }
  return out;
}

}  // namespace

Rational kernel_pmf_rational(int n, const Rational& p, int i, int j) {
  if (n < 3 || n > 64) throw std::domain_error("rational kernel supports 3 <= n <= 64");
  if (p <= 0 || p >= 1) throw std::domain_error("rational kernel: p must lie in (0,1)");
  if (i < 0 || i > n) throw std::domain_error("state outside [0, n]");
  const int trials = n - i;
  if (j < 0 || j > trials) return Rational(0);
  Rational stay = rational_pow(Rational(1) - p, i);
  Rational go = Rational(1) - stay;
  boost::multiprecision::cpp_int binom = 1;
  for (int t = 1; t <= j; ++t) binom = binom * (trials - j + t) / t;
  return Rational(binom) * rational_pow(go, j) * rational_pow(stay, trials - j);
}

int step_count(const ModelParams& params, int i, Rng& rng) {
  check_state(params, i);
  if (i == 0 || i == params.n()) return 0;
  return static_cast<int>(binomial(rng, params.n() - i, params.excite_prob(i)));
}

namespace {

template <class Step>
Trajectory run_count(int n, int i0, Rng& rng, const SimulateOptions& opts, Step step) {
  if (i0 < 1 || i0 > n - 1) throw std::domain_error("simulate_count: i0 must lie in [1, n-1]");
  Trajectory t;
  int x = i0;
  if (opts.record_states) t.states.push_back(x);
  t.size = x;
  t.max = x;
  std::int64_t steps = 0;
  while (x > 0 && steps < opts.max_steps) {
    x = step(x);
    ++steps;
    if (opts.record_states) t.states.push_back(x);
    t.size += x;
    if (x > t.max) t.max = x;
  }
  t.duration = steps;
  t.status = x == 0 ? PathStatus::absorbed : PathStatus::truncated;
  return t;
}

}  // namespace

Trajectory simulate_count(const ModelParams& params, int i0, Rng& rng,
                          const SimulateOptions& opts) {
  return run_count(params.n(), i0, rng, opts, [&](int x) { return step_count(params, x, rng); });
}

KernelSampler::KernelSampler(const ModelParams& params) : params_(params) {
  if (params.n() > kMaxN) throw std::domain_error("KernelSampler: n above 2000");
  cdf_.resize(static_cast<std::size_t>(params.n()) + 1);
  for (int i = 0; i <= params.n(); ++i) {
    std::vector<double> row = kernel_row(params, i);
    double acc = 0.0;
    for (double& v : row) {
      acc += v;
      v = acc;
    }
    for (double& v : row) v /= acc;
    cdf_[static_cast<std::size_t>(i)] = std::move(row);
  }
}

int KernelSampler::operator()(int i, Rng& rng) const {
  check_state(params_, i);
  const auto& row = cdf_[static_cast<std::size_t>(i)];
  const double u = uniform01(rng);
  const auto it = std::upper_bound(row.begin(), row.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - row.begin(),
                                                   static_cast<std::ptrdiff_t>(row.size()) - 1));
}

Trajectory simulate_count(const KernelSampler& sampler, int i0, Rng& rng,
                          const SimulateOptions& opts) {
  return run_count(sampler.params().n(), i0, rng, opts, [&](int x) { return sampler(x, rng); });
}

std::vector<SetState> simulate_set(const ModelParams& params, const SetState& a0,
                                   std::int64_t steps, Rng& rng) {
  if (a0.n() != params.n()) throw std::invalid_argument("simulate_set: size mismatch");
  if (a0.size() == 0 || a0.size() == params.n())
    throw std::domain_error("simulate_set: initial set must be neither empty nor full");
  std::vector<SetState> path{a0};
  for (std::int64_t k = 0; k < steps && path.back().size() > 0; ++k) {
    const SetState& cur = path.back();
    const double prob = params.excite_prob(cur.size());
    SetState next(params.n());
    for (int v = 1; v <= params.n(); ++v)
      if (!cur.contains(v) && bernoulli(rng, prob)) next.insert(v);
    path.push_back(std::move(next));
  }
  return path;
}

Moments conditional_moments(const ModelParams& params, int i) {
  check_state(params, i);
  const double m = params.n() - i;
  const double go = i == 0 ? 0.0 : params.excite_prob(i);
  const double stay = std::exp(i * params.log_q());
  return {m * go, m * go * stay + m * m * go * go};
}

}  // namespace avalanche
