#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace parps::stats {

struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;  // 95%
};

// Batch-means confidence interval for weakly correlated series.
MeanCi batch_means_ci(std::span<const double> values, int batches = 20);

// Two-sample Kolmogorov-Smirnov distance between integer samples given as
// histograms (counts[k] = number of samples equal to k).
double ks_distance(std::span<const std::int64_t> hist_a, std::span<const std::int64_t> hist_b);

// Asymptotic two-sample KS p-value (Kolmogorov distribution with the
// small-sample correction). Conservative for integer-valued samples.
double ks_pvalue(double distance, double n_a, double n_b);

// Total variation distance between two pmfs given as histograms.
double tv_distance(std::span<const std::int64_t> hist_a, std::span<const std::int64_t> hist_b);

// Sup-norm distance between two cdf vectors (shorter one padded with 1).
double cdf_sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace parps::stats
