#include "ipic/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ipic {

double bin_volume(const VelocityHistogram& h) { return h.width(0) * h.width(1) * h.width(2); }

VelocityPdf normalize_pdf(const VelocityHistogram& h) {
  double total = 0.0;
  for (double c : h.counts) total += c;
  if (!(total > 0.0)) throw GmmError("cannot normalise a histogram with zero weight");
  VelocityPdf p = h;
  const double scale = 1.0 / (total * bin_volume(h));
  for (double& c : p.counts) c *= scale;
  p.total_weight = 1.0;
  return p;
}

DistributionMetrics pdf_moments(const VelocityPdf& p) {
  DistributionMetrics m;
  const double dv = bin_volume(p);
  for (std::size_t n = 0; n < p.counts.size(); ++n) m.mean += p.centre(n) * (p.counts[n] * dv);
  double c3[3] = {}, c4[3] = {};
  for (std::size_t n = 0; n < p.counts.size(); ++n) {
    const double w = p.counts[n] * dv;
    if (w == 0.0) continue;
    const Vec3 d = p.centre(n) - m.mean;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m.covariance(a, b) += w * d[a] * d[b];
      c3[a] += w * d[a] * d[a] * d[a];
      c4[a] += w * d[a] * d[a] * d[a] * d[a];
    }
  }
  for (int a = 0; a < 3; ++a) {
    const double var = m.covariance(a, a);
    m.skewness[a] = var > 0.0 ? c3[a] / std::pow(var, 1.5) : 0.0;
    m.kurtosis[a] = var > 0.0 ? c4[a] / (var * var) - 3.0 : 0.0;
  }
  return m;
}

double anisotropy_index(const Mat3& covariance) {
  Eigen::Matrix3d m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m(a, b) = 0.5 * (covariance(a, b) + covariance(b, a));
  const Eigen::Vector3d lam = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m, Eigen::EigenvaluesOnly).eigenvalues();
  const double hi = lam.maxCoeff();
  if (!(hi > 0.0)) return 1.0;
  return hi / std::max(lam.minCoeff(), 1e-15 * hi);
}

double differential_entropy(const VelocityPdf& p) {
  const double dv = bin_volume(p);
  double h = 0.0;
  for (double c : p.counts)
    if (c > 0.0) h -= c * std::log(c) * dv;
  return h;
}

double kl_divergence(const VelocityPdf& p, const VelocityPdf& q) {
  if (!p.same_geometry(q) || p.counts.size() != q.counts.size()) throw GmmError("pdf geometry mismatch");
  const double dv = bin_volume(p);
  double kl = 0.0;
  for (std::size_t n = 0; n < p.counts.size(); ++n)
    if (p.counts[n] > 0.0) kl += p.counts[n] * std::log(p.counts[n] / std::max(q.counts[n], 1e-300)) * dv;
  return std::max(kl, 0.0);
}

DistributionMetrics describe(const VelocityPdf& p, const VelocityPdf* prev) {
  auto m = pdf_moments(p);
  m.anisotropy = anisotropy_index(m.covariance);
  m.entropy = differential_entropy(p);
  if (prev) m.kl_from_previous = kl_divergence(p, *prev);
  return m;
}

double segment_cost(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i) mean += x[i];
  mean /= double(end - begin);
  double c = 0.0;
  for (std::size_t i = begin; i < end; ++i) c += (x[i] - mean) * (x[i] - mean);
  return c;
}

double default_penalty(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 3) return 0.0;
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = x[i + 1] - x[i];
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  const double med = median(d);
  for (double& v : d) v = std::abs(v - med);
  // MAD -> Gaussian sigma, and differences carry twice the variance.
  const double sigma = 1.4826 * median(d) / std::sqrt(2.0);
  double scale = 0.0;
  for (double v : x) scale += v * v;
  scale /= double(n);
  // A tiny floor keeps noise-free series from splitting into zero-cost ties.
  return std::max(3.0 * sigma * sigma * std::log(double(n)), 1e-12 * std::max(scale, 1.0));
}

ChangePointResult detect_change_points(const std::vector<double>& x, std::optional<double> penalty) {
  ChangePointResult out;
  out.penalty = penalty ? *penalty : default_penalty(x);
  const std::size_t n = x.size();
  if (n == 0) return out;
  // Prefix sums give O(1) segment costs.
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s1[i + 1] = s1[i] + x[i];
    s2[i + 1] = s2[i] + x[i] * x[i];
  }
  auto cost = [&](std::size_t a, std::size_t b) {
    const double m = double(b - a);
    const double sum = s1[b] - s1[a];
    return std::max(0.0, (s2[b] - s2[a]) - sum * sum / m);
  };

  const double inf = std::numeric_limits<double>::infinity();
  const double beta = out.penalty;
  std::vector<double> F(n + 1, inf);
  std::vector<std::size_t> last(n + 1, 0);
  F[0] = -beta;
  // A candidate pruned at time t stays usable until t + kMinSegment, since the
  // pruning argument needs an admissible segment after t.
  struct Candidate {
    std::size_t s;
    std::size_t expires;
  };
  std::vector<Candidate> cands{{0, std::numeric_limits<std::size_t>::max()}};
  for (std::size_t t = kMinSegment; t <= n; ++t) {
    if (t - kMinSegment >= kMinSegment) cands.push_back({t - kMinSegment, std::numeric_limits<std::size_t>::max()});
    double best = inf;
    std::size_t arg = 0;
    for (const auto& c : cands) {
      if (t - c.s < kMinSegment || c.expires <= t || !std::isfinite(F[c.s])) continue;
      const double v = F[c.s] + cost(c.s, t) + beta;
      if (v < best) {
        best = v;
        arg = c.s;
      }
    }
    F[t] = best;
    last[t] = arg;
    for (auto& c : cands)
      if (t - c.s >= kMinSegment && std::isfinite(F[c.s]) && F[c.s] + cost(c.s, t) > F[t])
        c.expires = std::min(c.expires, t + kMinSegment);
    std::erase_if(cands, [&](const Candidate& c) { return c.expires <= t + 1; });
  }

  std::vector<std::size_t> bounds;
  for (std::size_t t = n; t > 0; t = last[t]) bounds.push_back(last[t]);
  std::reverse(bounds.begin(), bounds.end());
  for (std::size_t b : bounds)
    if (b > 0) out.indices.push_back(b);
  std::size_t a = 0;
  for (std::size_t b : out.indices) {
    out.segment_costs.push_back(cost(a, b));
    a = b;
  }
  out.segment_costs.push_back(cost(a, n));
  return out;
}

AnalysisResult analyze_records(const std::vector<GmmRecord>& records, int bins, std::optional<double> penalty) {
  AnalysisResult result;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<const GmmRecord*>> series;
  for (const auto& r : records) series[{r.species, r.region}].push_back(&r);

  for (auto& [key, recs] : series) {
    std::stable_sort(recs.begin(), recs.end(), [](const GmmRecord* a, const GmmRecord* b) { return a->cycle < b->cycle; });
    VelocityHistogram geo;
    geo.bins = bins;
    geo.lo = {1e300, 1e300, 1e300};
    geo.hi = {-1e300, -1e300, -1e300};
    for (const auto* r : recs)
      for (std::size_t i = 0; i < r->mixture.size(); ++i)
        for (int a = 0; a < 3; ++a) {
          const double sd = std::sqrt(std::max(r->mixture.covariances[i](a, a), 0.0));
          geo.lo[a] = std::min(geo.lo[a], r->mixture.means[i][a] - 6.0 * sd);
          geo.hi[a] = std::max(geo.hi[a], r->mixture.means[i][a] + 6.0 * sd);
        }
    for (int a = 0; a < 3; ++a)
      if (!(geo.hi[a] > geo.lo[a])) {
        geo.lo[a] -= 0.5;
        geo.hi[a] += 0.5;
      }
    geo.counts.assign(std::size_t(bins) * bins * bins, 0.0);

    std::optional<VelocityPdf> prev;
    std::vector<MetricsRow> rows;
    for (const auto* r : recs) {
      const auto pdf = normalize_pdf(reconstruct_pdf(r->mixture, geo));
      MetricsRow row{r->cycle, r->species, r->region, describe(pdf, prev ? &*prev : nullptr)};
      rows.push_back(row);
      prev = pdf;
    }

    if (rows.size() >= 4) {
      auto add = [&](const std::string& name, auto&& get) {
        std::vector<double> v;
        for (const auto& row : rows) v.push_back(get(row.metrics));
        ChangePointReport rep{key.first, key.second, name, detect_change_points(v, penalty).indices, {}};
        for (auto i : rep.indices) rep.cycles.push_back(rows[i].cycle);
        result.change_points.push_back(std::move(rep));
      };
      add("anisotropy", [](const DistributionMetrics& m) { return m.anisotropy; });
      add("entropy", [](const DistributionMetrics& m) { return m.entropy; });
      add("var_trace", [](const DistributionMetrics& m) { return m.covariance(0, 0) + m.covariance(1, 1) + m.covariance(2, 2); });
      add("kurt_mean", [](const DistributionMetrics& m) { return (m.kurtosis.x + m.kurtosis.y + m.kurtosis.z) / 3.0; });
    }
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

}  // namespace ipic
