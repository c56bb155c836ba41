#include "ipic/gmm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include "ipic/rng.hpp"

namespace ipic {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::Matrix3d to_matrix(const Sym3& s) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = s(r, c);
  return m;
}

Sym3 to_sym(const Eigen::Matrix3d& m) {
  Sym3 s;
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) s(r, c) = 0.5 * (m(r, c) + m(c, r));
  return s;
}

Eigen::Vector3d to_eigen(const Vec3& v) { return {v.x, v.y, v.z}; }

// Closest matrix with eigenvalues >= eps in the Frobenius sense; it is also the
// constrained likelihood maximiser for a fixed mean, which keeps EM monotone.
Eigen::Matrix3d floor_eigenvalues(const Eigen::Matrix3d& s, double eps) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
  const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(eps);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

struct Component {
  double log_alpha;
  Eigen::Vector3d mu;
  Eigen::LLT<Eigen::Matrix3d> llt;
  double log_norm;  // -0.5 (3 log 2 pi + log det)
};

std::vector<Component> prepare(const GaussianMixture& g) {
  std::vector<Component> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Component c;
    c.log_alpha = g.weights[i] > 0.0 ? std::log(g.weights[i]) : -std::numeric_limits<double>::infinity();
    c.mu = to_eigen(g.means[i]);
    c.llt.compute(to_matrix(g.covariances[i]));
    if (c.llt.info() != Eigen::Success) throw GmmError("covariance is not positive definite");
    const auto& L = c.llt.matrixL();
    double logdet = 0.0;
    for (int d = 0; d < 3; ++d) logdet += 2.0 * std::log(L(d, d));
    c.log_norm = -0.5 * (3.0 * kLog2Pi + logdet);
    out.push_back(std::move(c));
  }
  return out;
}

double log_component(const Component& c, const Eigen::Vector3d& x) {
  const Eigen::Vector3d z = c.llt.matrixL().solve(x - c.mu);
  return c.log_alpha + c.log_norm - 0.5 * z.squaredNorm();
}

// log sum_i exp(a_i), ignoring -inf entries.
double log_sum_exp(const std::vector<double>& a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

template <std::size_t N>
void get_bytes(std::istream& in, unsigned char (&b)[N]) {
  in.read(reinterpret_cast<char*>(b), N);
  if (in.gcount() != std::streamsize(N)) throw ArchiveError("truncated archive");
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

Vec3 VelocityHistogram::centre(std::size_t n) const {
  const std::size_t b = std::size_t(bins);
  const std::size_t idx[3] = {n % b, (n / b) % b, n / (b * b)};
  Vec3 c;
  for (int a = 0; a < 3; ++a) c[a] = lo[a] + (double(idx[a]) + 0.5) * width(a);
  return c;
}

VelocityHistogram bin_velocities(const ParticleList& particles, int bins, HistogramRange range, double v_max) {
  if (particles.empty()) throw GmmError("cannot bin an empty particle set");
  if (bins < 1) throw GmmError("bins must be positive");
  VelocityHistogram h;
  h.bins = bins;
  if (range == HistogramRange::Fixed) {
    h.lo = {-v_max, -v_max, -v_max};
    h.hi = {v_max, v_max, v_max};
  } else {
    Vec3 mn = particles[0].velocity, mx = particles[0].velocity;
    for (const auto& p : particles)
      for (int a = 0; a < 3; ++a) {
        mn[a] = std::min(mn[a], p.velocity[a]);
        mx[a] = std::max(mx[a], p.velocity[a]);
      }
    for (int a = 0; a < 3; ++a) {
      const double span = mx[a] - mn[a];
      const double pad = span > 0.0 ? 0.05 * span : 0.5;
      h.lo[a] = mn[a] - pad;
      h.hi[a] = mx[a] + pad;
    }
  }
  h.counts.assign(std::size_t(bins) * bins * bins, 0.0);
  for (const auto& p : particles) {
    int idx[3];
    bool clipped = false;
    for (int a = 0; a < 3; ++a) {
      const double t = (p.velocity[a] - h.lo[a]) / h.width(a);
      int i = t >= 0.0 ? int(std::min(t, double(bins))) : -1;
      if (i < 0 || i >= bins) {
        clipped = clipped || i < 0 || t > double(bins);
        i = std::clamp(i, 0, bins - 1);
      }
      idx[a] = i;
    }
    if (clipped) ++h.clipped;
    h.counts[h.index(idx[0], idx[1], idx[2])] += p.weight;
    h.total_weight += p.weight;
  }
  return h;
}

VelocityHistogram empty_like(const VelocityHistogram& h) {
  VelocityHistogram e;
  e.bins = h.bins;
  e.lo = h.lo;
  e.hi = h.hi;
  e.counts.assign(h.counts.size(), 0.0);
  return e;
}

GmmFit fit_gmm(const VelocityHistogram& hist, int M, const EmParams& params) {
  if (M < 1) throw GmmError("component count must be positive");
  if (!(hist.total_weight > 0.0)) throw GmmError("histogram has no weight");
  std::vector<Eigen::Vector3d> x;
  std::vector<double> w;
  double W = 0.0;
  for (std::size_t n = 0; n < hist.counts.size(); ++n)
    if (hist.counts[n] > 0.0) {
      x.push_back(to_eigen(hist.centre(n)));
      w.push_back(hist.counts[n]);
      W += hist.counts[n];
    }
  for (double& v : w) v /= W;
  const std::size_t B = x.size();
  if (std::size_t(M) > B) throw GmmError("more components than occupied bins");

  GmmFit fit;
  double min_width = hist.width(0);
  for (int a = 1; a < 3; ++a) min_width = std::min(min_width, hist.width(a));
  const double eps = 1e-6 * min_width * min_width;
  fit.epsilon = eps;

  // Weighted farthest-point seeding; the first centre is drawn by weight.
  Rng rng(params.seed);
  std::vector<std::size_t> seeds;
  {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t first = B - 1;
    for (std::size_t b = 0; b < B; ++b) {
      acc += w[b];
      if (u < acc) {
        first = b;
        break;
      }
    }
    seeds.push_back(first);
    std::vector<double> d2(B);
    for (std::size_t b = 0; b < B; ++b) d2[b] = (x[b] - x[first]).squaredNorm();
    while (seeds.size() < std::size_t(M)) {
      std::size_t best = 0;
      double score = -1.0;
      for (std::size_t b = 0; b < B; ++b)
        if (w[b] * d2[b] > score) {
          score = w[b] * d2[b];
          best = b;
        }
      seeds.push_back(best);
      for (std::size_t b = 0; b < B; ++b) d2[b] = std::min(d2[b], (x[b] - x[best]).squaredNorm());
    }
  }
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t b = 0; b < B; ++b) mean += w[b] * x[b];
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t b = 0; b < B; ++b) cov += w[b] * (x[b] - mean) * (x[b] - mean).transpose();
  cov = floor_eigenvalues(cov, eps);

  auto& g = fit.mixture;
  for (int i = 0; i < M; ++i) {
    g.weights.push_back(1.0 / M);
    g.means.push_back({x[seeds[i]](0), x[seeds[i]](1), x[seeds[i]](2)});
    g.covariances.push_back(to_sym(cov));
  }

  std::vector<double> resp(B * M), lp(M);
  auto e_step = [&] {
    const auto comps = prepare(g);
    double ll = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      for (int i = 0; i < M; ++i) lp[i] = log_component(comps[i], x[b]);
      const double l = log_sum_exp(lp);
      for (int i = 0; i < M; ++i) resp[b * M + i] = std::exp(lp[i] - l);
      ll += w[b] * l;
    }
    if (!std::isfinite(ll)) throw GmmError("non-finite log-likelihood");
    return ll;
  };

  double ll = e_step();
  fit.log_likelihood.push_back(ll);
  for (int it = 1; it <= params.max_iterations; ++it) {
    for (int i = 0; i < M; ++i) {
      double n = 0.0;
      Eigen::Vector3d mu = Eigen::Vector3d::Zero();
      for (std::size_t b = 0; b < B; ++b) {
        const double r = w[b] * resp[b * M + i];
        n += r;
        mu += r * x[b];
      }
      g.weights[i] = n;
      if (n <= 0.0) continue;  // a vanished component keeps its shape with zero weight
      mu /= n;
      Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
      for (std::size_t b = 0; b < B; ++b) {
        const Eigen::Vector3d d = x[b] - mu;
        s += (w[b] * resp[b * M + i]) * d * d.transpose();
      }
      g.means[i] = {mu(0), mu(1), mu(2)};
      g.covariances[i] = to_sym(floor_eigenvalues(s / n, eps));
    }
    double total = 0.0;
    for (double a : g.weights) total += a;
    for (double& a : g.weights) a /= total;

    const double next = e_step();
    fit.log_likelihood.push_back(next);
    fit.iterations = it;
    const bool done = std::abs(next - ll) <= params.tolerance * std::max(std::abs(ll), 1e-300);
    ll = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

double evaluate_mixture(const GaussianMixture& gmm, const Vec3& v) {
  const auto comps = prepare(gmm);
  const Eigen::Vector3d x = to_eigen(v);
  double s = 0.0;
  for (const auto& c : comps) s += std::exp(log_component(c, x));
  return s;
}

VelocityHistogram reconstruct_pdf(const GaussianMixture& gmm, const VelocityHistogram& geometry) {
  auto out = empty_like(geometry);
  const auto comps = prepare(gmm);
  double total = 0.0;
  for (std::size_t n = 0; n < out.counts.size(); ++n) {
    const Eigen::Vector3d x = to_eigen(out.centre(n));
    double s = 0.0;
    for (const auto& c : comps) s += std::exp(log_component(c, x));
    out.counts[n] = s;
    total += s;
  }
  if (total > 0.0)
    for (double& v : out.counts) v /= total;
  out.total_weight = total > 0.0 ? 1.0 : 0.0;
  return out;
}

double js_divergence(const VelocityHistogram& p, const VelocityHistogram& q) {
  if (!p.same_geometry(q) || p.counts.size() != q.counts.size()) throw GmmError("histogram geometry mismatch");
  double sp = 0.0, sq = 0.0;
  for (double v : p.counts) sp += v;
  for (double v : q.counts) sq += v;
  if (!(sp > 0.0) || !(sq > 0.0)) throw GmmError("histogram cannot be normalised");
  double kp = 0.0, kq = 0.0;
  for (std::size_t n = 0; n < p.counts.size(); ++n) {
    const double a = p.counts[n] / sp, b = q.counts[n] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) kp += a * std::log(a / m);
    if (b > 0.0) kq += b * std::log(b / m);
  }
  return 0.5 * kp + 0.5 * kq;
}

double compression_ratio(std::size_t n_particles, std::size_t components) {
  const double raw = double(n_particles) * 6.0 * 8.0;
  return raw / double(components * kComponentBytes + kRecordHeaderBytes + kArchiveHeaderBytes);
}

void write_archive(const std::vector<GmmRecord>& records, std::ostream& out) {
  out.write("GMMA", 4);
  put_u32(out, 1);
  put_u32(out, std::uint32_t(records.size()));
  for (const auto& r : records) {
    put_u32(out, r.species);
    put_u32(out, r.region);
    put_u32(out, r.cycle);
    put_u32(out, std::uint32_t(r.mixture.size()));
    for (std::size_t i = 0; i < r.mixture.size(); ++i) {
      put_f64(out, r.mixture.weights[i]);
      for (int a = 0; a < 3; ++a) put_f64(out, r.mixture.means[i][a]);
      for (double c : r.mixture.covariances[i].c) put_f64(out, c);
    }
  }
  if (!out) throw ArchiveError("failed to write archive");
}

std::vector<GmmRecord> read_archive(std::istream& in) {
  unsigned char magic[4];
  get_bytes(in, magic);
  if (std::string_view(reinterpret_cast<const char*>(magic), 4) != "GMMA") throw ArchiveError("bad archive magic");
  const auto version = get_u32(in);
  if (version != 1) throw ArchiveError("unsupported archive version " + std::to_string(version));
  const auto count = get_u32(in);
  std::vector<GmmRecord> out;
  for (std::uint32_t n = 0; n < count; ++n) {
    GmmRecord r;
    r.species = get_u32(in);
    r.region = get_u32(in);
    r.cycle = get_u32(in);
    const auto m = get_u32(in);
    for (std::uint32_t i = 0; i < m; ++i) {
      r.mixture.weights.push_back(get_f64(in));
      Vec3 mu;
      for (int a = 0; a < 3; ++a) mu[a] = get_f64(in);
      r.mixture.means.push_back(mu);
      Sym3 s;
      for (double& c : s.c) c = get_f64(in);
      r.mixture.covariances.push_back(s);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ipic
