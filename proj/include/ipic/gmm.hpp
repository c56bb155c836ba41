#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/state.hpp"
#include "ipic/vec3.hpp"

namespace ipic {

class GmmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weighted counts on a regular 3D velocity grid, x fastest.
struct VelocityHistogram {
  int bins = 32;
  Vec3 lo;
  Vec3 hi;
  std::vector<double> counts;
  double total_weight = 0.0;
  std::size_t clipped = 0;  // particles outside the range, folded into edge bins

  double width(int a) const { return (hi[a] - lo[a]) / bins; }
  std::size_t index(int i, int j, int k) const { return std::size_t(i) + std::size_t(bins) * (std::size_t(j) + std::size_t(bins) * std::size_t(k)); }
  Vec3 centre(std::size_t n) const;
  bool same_geometry(const VelocityHistogram& o) const { return bins == o.bins && lo == o.lo && hi == o.hi; }
};

/// Auto range pads the data min/max by 5% per axis; Fixed uses [-v_max, v_max]^3.
VelocityHistogram bin_velocities(const ParticleList& particles, int bins, HistogramRange range, double v_max = 1.0);

/// Empty histogram with the same geometry.
VelocityHistogram empty_like(const VelocityHistogram& h);

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vec3> means;
  std::vector<Sym3> covariances;

  std::size_t size() const { return weights.size(); }
  bool operator==(const GaussianMixture&) const = default;
};

struct EmParams {
  double tolerance = 1e-6;  // relative log-likelihood change
  int max_iterations = 200;
  std::uint64_t seed = 1;
};

struct GmmFit {
  GaussianMixture mixture;
  std::vector<double> log_likelihood;  // after each EM iteration
  int iterations = 0;
  bool converged = false;
  double epsilon = 0.0;  // covariance eigenvalue floor
};

/// Histogram-weighted EM on bin centres. Covariance eigenvalues are floored at
/// 1e-6 (min bin width)^2.
GmmFit fit_gmm(const VelocityHistogram& hist, int components, const EmParams& params = {});

double evaluate_mixture(const GaussianMixture& gmm, const Vec3& v);

/// Mixture density at the bin centres, normalised to unit total.
VelocityHistogram reconstruct_pdf(const GaussianMixture& gmm, const VelocityHistogram& geometry);

/// Jensen-Shannon divergence in nats between two normalised histograms.
double js_divergence(const VelocityHistogram& p, const VelocityHistogram& q);

inline constexpr std::size_t kArchiveHeaderBytes = 12;  // magic, version, record count
inline constexpr std::size_t kRecordHeaderBytes = 16;   // species, region, cycle, M
inline constexpr std::size_t kComponentBytes = 10 * 8;  // alpha, mu, upper-triangle sigma

/// Raw particle bytes (6 doubles each) over the bytes of a one-record archive.
double compression_ratio(std::size_t n_particles, std::size_t components);

struct GmmRecord {
  std::uint32_t species = 0;
  std::uint32_t region = 0;
  std::uint32_t cycle = 0;
  GaussianMixture mixture;
  bool operator==(const GmmRecord&) const = default;
};

void write_archive(const std::vector<GmmRecord>& records, std::ostream& out);
std::vector<GmmRecord> read_archive(std::istream& in);

}  // namespace ipic
