#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "avalanche/bounds.hpp"
#include "avalanche/model.hpp"
#include "avalanche/stats.hpp"

namespace avalanche {

constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  int n = 100;
  std::optional<double> p;
  std::optional<double> c;
  std::int64_t i0 = 1;
  double lambda = 2.0;
  std::int64_t reps = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  int digits = 400;
  std::string out;

  std::int64_t max_steps = 1000000;
  std::vector<std::int64_t> m_list;  // duration horizons for exact
  std::optional<double> J;           // reach level for exact
  std::vector<double> c_list{0.9, 1.0, 1.1, 1.3};
  int i0_max = 50;
  double psi0 = 0.1;
  int steps = 50;
  double delta = 0.02;
  std::int64_t m = 50;

  // Validates p/c and the model constraints.
  ModelParams params() const;
  void validate() const;
};

// Runs fn(index) for index = 0..count-1 on `workers` threads. Results are
// stored by index, so the output does not depend on the worker count.
template <class T, class F>
std::vector<T> run_replicates(std::int64_t count, int workers, F&& fn) {
  std::vector<T> out(static_cast<std::size_t>(count));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  constexpr std::int64_t kChunk = 64;
  auto body = [&] {
    for (;;) {
      const std::int64_t start = next.fetch_add(kChunk);
      if (start >= count) return;
      const std::int64_t stop = std::min(count, start + kChunk);
      try {
        for (std::int64_t r = start; r < stop; ++r) out[static_cast<std::size_t>(r)] = fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  const int w = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int t = 1; t < w; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

struct SimulateSummary {
  EstimateWithCI duration, size, max;
  std::int64_t truncated = 0;
  std::int64_t replicates = 0;
  double truncated_fraction() const {
    return replicates ? static_cast<double>(truncated) / static_cast<double>(replicates) : 0.0;
  }
};

// CSV: replicate,T,S,max,truncated, then rows "mean", "stderr", "ci_low" and
// "ci_high" over non-truncated replicates (truncated column: count).
SimulateSummary cmd_simulate(const ExperimentConfig& cfg, std::ostream& csv);

// Writes expected_duration.csv, expected_size.csv, reach.csv (when J is set)
// and duration_cdf.csv (when m_list is set) into directory cfg.out.
struct ExactOutcome {
  std::vector<std::string> files;
  double max_residual_log10;
};
ExactOutcome cmd_exact(const ExperimentConfig& cfg);

struct FigureCurve {
  double c;
  std::vector<double> expected_duration;  // i0 = 1..i0_max
  bool increasing;
  double relative_spread;  // (max - min)/min over i0 >= 2
};
// CSV header "c,i0,expected_duration".
std::vector<FigureCurve> cmd_figure(const ExperimentConfig& cfg, std::ostream& csv);

struct LimitCheck {
  BoundReport report;
  double truncated_fraction;
};
// Monte Carlo h_J(i) from i0 = i against 1 - alpha^i within `tolerance`.
LimitCheck reach_limit_check(int n, double lambda, int i, std::int64_t J, double tolerance,
                             std::int64_t reps, std::uint64_t seed, int workers,
                             bool asymptotic, std::int64_t max_steps = 100000);

struct VerifyOutcome {
  std::vector<BoundReport> reports;
  std::vector<LimitCheck> limit_checks;
  std::int64_t violated = 0;
  bool truncation_failure = false;
  bool failed() const { return violated > 0 || truncation_failure; }
};
VerifyOutcome cmd_verify(const ExperimentConfig& cfg, const GridConfig& grid, std::ostream& json);

// Mean-field table "k,psi,phi,b,v" to csv and stability/envelope JSON to json.
void cmd_deterministic(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& json);

struct CoupleSummary {
  std::int64_t steps = 0;
  std::int64_t order_violations = 0;
  std::int64_t divergences = 0;
};
// Per replicate: a monotone (X, Q, Z) path with the X <= Q <= Z check, using
// the smallest admissible constant c = -(n - 1) log q, and a maximal-coupling
// path. CSV "replicate,steps,ordered,x_duration,z_extinct,diverge_step";
// diverge_step is -1 when the chains never separated.
CoupleSummary cmd_couple(const ExperimentConfig& cfg, std::ostream& csv);

}  // namespace avalanche
