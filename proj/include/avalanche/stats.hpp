#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace avalanche {

// Pairwise (cascade) summation; the result depends only on the order of the input.
double pairwise_sum(std::span<const double> xs);

struct EstimateWithCI {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t count = 0;
  double level = 0.99;

  double z() const;
  double ci_low() const { return estimate - z() * stderr_; }
  double ci_high() const { return estimate + z() * stderr_; }

  static EstimateWithCI from_samples(std::span<const double> xs, double level = 0.99);
  // Proportion of successes with the binomial standard error.
  static EstimateWithCI proportion(std::int64_t hits, std::int64_t count, double level = 0.99);
};

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Goodness of fit of observed counts against probabilities. Cells with expected
// count below `min_expected` are pooled with their neighbours.
ChiSquareResult chi_square_gof(std::span<const std::int64_t> observed,
                               std::span<const double> probs, double min_expected = 5.0);

// Homogeneity test for two count vectors over the same cells.
ChiSquareResult chi_square_two_sample(std::span<const std::int64_t> a,
                                      std::span<const std::int64_t> b,
                                      double min_expected = 5.0);

// Kolmogorov-Smirnov distance between the sample and N(mean, sd^2).
double ks_normal(std::vector<double> samples, double mean, double sd);

// Half the L1 distance; shorter vectors are zero-padded.
double total_variation(std::span<const double> a, std::span<const double> b);

double normal_cdf(double x);

}  // namespace avalanche
