#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "avalanche/rng.hpp"

namespace avalanche {

// One network: n nodes, excitation probability p per excited neighbour.
class ModelParams {
 public:
  ModelParams(int n, double p);
  // p = c / n, with c kept exactly as given.
  static ModelParams from_c(int n, double c);

  int n() const { return n_; }
  double p() const { return p_; }
  double q() const { return q_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }
  double log_q() const { return log_q_; }

  // 1 - q^i computed without cancellation.
  double excite_prob(int i) const;

 private:
  ModelParams(int n, double p, double c);
  int n_;
  double p_, q_, c_, alpha_, log_q_;
};

struct CountState {
  std::int64_t k = 0;
  int x = 0;
};

// Excited set over node labels 1..n.
class SetState {
 public:
  explicit SetState(int n);
  SetState(int n, const std::vector<int>& labels);

  int n() const { return static_cast<int>(bits_.size()); }
  bool contains(int label) const;
  void insert(int label);
  int size() const { return count_; }
  std::vector<int> labels() const;

 private:
  std::vector<bool> bits_;
  int count_ = 0;
};

enum class PathStatus { absorbed, truncated, escaped };

// Realized path. For absorbed paths the last state is 0 and
// duration = states.size() - 1.
struct Trajectory {
  std::vector<std::int64_t> states;
  PathStatus status = PathStatus::absorbed;
  std::int64_t duration = 0;  // T, a lower bound unless absorbed
  std::int64_t size = 0;      // S = sum of states
  std::int64_t max = 0;

  bool truncated() const { return status != PathStatus::absorbed; }
  // H_k = x_k (n - x_k).
  std::vector<std::int64_t> heterogeneity(int n) const;
};

double kernel_log_pmf(const ModelParams& params, int i, int j);
double kernel_pmf(const ModelParams& params, int i, int j);
// Row j = 0..n-i of the kernel.
std::vector<double> kernel_row(const ModelParams& params, int i);

using Rational = boost::multiprecision::cpp_rational;
// Exact kernel over the rationals for n <= 64.
Rational kernel_pmf_rational(int n, const Rational& p, int i, int j);

int step_count(const ModelParams& params, int i, Rng& rng);

struct SimulateOptions {
  std::int64_t max_steps = 1000000;
  bool record_states = true;
};

Trajectory simulate_count(const ModelParams& params, int i0, Rng& rng,
                          const SimulateOptions& opts = {});

// Inversion over precomputed cumulative kernel rows. Much faster than
// per-step binomial draws when many steps share one network.
class KernelSampler {
 public:
  static constexpr int kMaxN = 2000;
  explicit KernelSampler(const ModelParams& params);

  const ModelParams& params() const { return params_; }
  int operator()(int i, Rng& rng) const;

 private:
  ModelParams params_;
  std::vector<std::vector<double>> cdf_;  // cdf_[i][j] = P(X_{k+1} <= j | X_k = i)
};

Trajectory simulate_count(const KernelSampler& sampler, int i0, Rng& rng,
                          const SimulateOptions& opts = {});

// Path A_0, A_1, ... until the set is empty or `steps` transitions were made.
std::vector<SetState> simulate_set(const ModelParams& params, const SetState& a0,
                                   std::int64_t steps, Rng& rng);

struct Moments {
  double mean;
  double second;
};
Moments conditional_moments(const ModelParams& params, int i);

}  // namespace avalanche
