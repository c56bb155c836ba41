#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ipic/gmm.hpp"
#include "ipic/vec3.hpp"

namespace ipic {

/// A velocity histogram whose counts hold probability density (sum * bin volume = 1).
using VelocityPdf = VelocityHistogram;

struct DistributionMetrics {
  Vec3 mean;
  Mat3 covariance;
  Vec3 skewness;
  Vec3 kurtosis;  // excess
  double anisotropy = 1.0;
  double entropy = 0.0;
  std::optional<double> kl_from_previous;
};

double bin_volume(const VelocityHistogram& h);

/// Throws GmmError for zero total weight.
VelocityPdf normalize_pdf(const VelocityHistogram& h);

/// Mean, covariance, per-axis skewness and excess kurtosis by quadrature over bin centres.
DistributionMetrics pdf_moments(const VelocityPdf& p);

/// lambda_max / lambda_min of the covariance, with lambda_min floored at 1e-15 lambda_max.
double anisotropy_index(const Mat3& covariance);

double differential_entropy(const VelocityPdf& p);

/// sum p log(p / q) dV with q floored at 1e-300 where p > 0.
double kl_divergence(const VelocityPdf& p, const VelocityPdf& q);

/// Moments plus anisotropy, entropy and (when prev is given) KL from prev.
DistributionMetrics describe(const VelocityPdf& p, const VelocityPdf* prev = nullptr);

struct ChangePointResult {
  std::vector<std::size_t> indices;  // first index of each new segment
  std::vector<double> segment_costs;
  double penalty = 0.0;
};

/// 3 sigma^2 ln n with sigma from the median absolute deviation of first differences.
double default_penalty(const std::vector<double>& series);

/// Exact penalised segmentation with piecewise-constant L2 cost, pruned dynamic
/// programming, minimum segment length 2. Uses default_penalty when none is given.
ChangePointResult detect_change_points(const std::vector<double>& series, std::optional<double> penalty = {});

/// Sum of squared deviations from the mean over series[begin, end).
double segment_cost(const std::vector<double>& series, std::size_t begin, std::size_t end);

inline constexpr std::size_t kMinSegment = 2;

struct MetricsRow {
  std::uint32_t cycle = 0;
  std::uint32_t species = 0;
  std::uint32_t region = 0;
  DistributionMetrics metrics;
};

struct ChangePointReport {
  std::uint32_t species = 0;
  std::uint32_t region = 0;
  std::string metric;
  std::vector<std::size_t> indices;
  std::vector<std::uint32_t> cycles;
};

struct AnalysisResult {
  std::vector<MetricsRow> rows;
  std::vector<ChangePointReport> change_points;
};

/// Reconstructs every record on a per-series grid (union of mu +- 6 sigma boxes),
/// computes metrics, KL to the previous record of the same species and region, and
/// change points of each scalar metric series with at least four samples.
AnalysisResult analyze_records(const std::vector<GmmRecord>& records, int bins = 32,
                               std::optional<double> penalty = {});

}  // namespace ipic
