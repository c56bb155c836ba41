#include "ipic/control.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

namespace ipic {
namespace {

int cell_on_axis(const GridGeometry& g, int a, double x) {
  return std::clamp(int(std::floor(x / g.spacing(a))), 0, g.cells(a) - 1);
}

long cell_index(const GridGeometry& g, const Vec3& x) {
  return cell_on_axis(g, 0, x.x) + long(g.cells(0)) * (cell_on_axis(g, 1, x.y) + long(g.cells(1)) * cell_on_axis(g, 2, x.z));
}

struct Totals {
  double charge = 0.0;
  Vec3 momentum;
  double momentum_scale = 0.0;
  double energy = 0.0;
};

// Per unit |q/m|: momentum w gamma v, kinetic energy w (gamma - 1) c^2.
Totals totals(const ParticleList& ps, double c) {
  Totals t;
  for (const auto& p : ps) {
    const double gamma = lorentz_gamma(p.velocity, c);
    t.charge += p.weight;
    t.momentum += p.velocity * (p.weight * gamma);
    t.momentum_scale += p.weight * gamma * norm(p.velocity);
    t.energy += p.weight * (gamma - 1.0) * c * c;
  }
  return t;
}

// Weighted mean of the proper velocity gamma v, so relativistic momentum is
// conserved and kinetic energy cannot grow.
Particle merge(const Particle& a, const Particle& b, double c) {
  const double w = a.weight + b.weight;
  const Vec3 u = (a.velocity * (a.weight * lorentz_gamma(a.velocity, c)) +
                  b.velocity * (b.weight * lorentz_gamma(b.velocity, c))) / w;
  return {(a.position * a.weight + b.position * b.weight) / w, u / std::sqrt(1.0 + norm2(u) / (c * c)), w};
}

// One sweep of disjoint pair merges. Groups are keyed by cell and, when bins > 0,
// by a velocity bin over the list's velocity range.
long merge_pass(ParticleList& ps, long wanted, const GridGeometry& g, int bins, double light) {
  Vec3 vmin{1e300, 1e300, 1e300}, vmax{-1e300, -1e300, -1e300};
  for (const auto& p : ps)
    for (int a = 0; a < 3; ++a) {
      vmin[a] = std::min(vmin[a], p.velocity[a]);
      vmax[a] = std::max(vmax[a], p.velocity[a]);
    }
  auto vbin = [&](const Vec3& v) {
    long key = 0;
    for (int a = 0; a < 3; ++a) {
      const double span = vmax[a] - vmin[a];
      const int b = span > 0.0 ? std::min(bins - 1, int((v[a] - vmin[a]) / span * bins)) : 0;
      key = key * bins + b;
    }
    return key;
  };

  std::map<std::pair<long, long>, std::vector<std::size_t>> groups;
  for (std::size_t n = 0; n < ps.size(); ++n)
    groups[{cell_index(g, ps[n].position), bins > 0 ? vbin(ps[n].velocity) : 0}].push_back(n);

  struct Candidate {
    std::size_t group_size;
    double distance;
    std::size_t a, b;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    std::vector<Candidate> local;
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        local.push_back({members.size(), norm2(ps[members[i]].velocity - ps[members[j]].velocity), members[i], members[j]});
    std::stable_sort(local.begin(), local.end(), [](const Candidate& x, const Candidate& y) { return x.distance < y.distance; });
    std::vector<char> taken(ps.size(), 0);
    for (const auto& c : local) {
      if (taken[c.a] || taken[c.b]) continue;
      taken[c.a] = taken[c.b] = 1;
      candidates.push_back(c);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.group_size != y.group_size) return x.group_size > y.group_size;
    return x.distance < y.distance;
  });

  std::vector<char> removed(ps.size(), 0);
  long merged = 0;
  for (const auto& c : candidates) {
    if (merged >= wanted) break;
    ps[c.a] = merge(ps[c.a], ps[c.b], light);
    removed[c.b] = 1;
    ++merged;
  }
  std::size_t kept = 0;
  for (std::size_t n = 0; n < ps.size(); ++n)
    if (!removed[n]) ps[kept++] = ps[n];
  ps.resize(kept);
  return merged;
}

}  // namespace

ControlPolicy make_policy(const SimConfig& config) {
  ControlPolicy p;
  p.theta = config.control_params.theta;
  p.c = config.c;
  p.velocity_bins = config.control_params.velocity_bins;
  p.region = config.control_params.trigger_region;
  const GridGeometry g(config);
  for (const auto& sp : config.species) {
    long t = config.control_params.target;
    if (t <= 0)
      t = p.region == RegionGranularity::WholeDomain ? long(sp.particles_per_cell) * long(g.cell_count())
                                                     : long(sp.particles_per_cell);
    p.targets.push_back(t);
  }
  return p;
}

long region_count(const GridGeometry& g, RegionGranularity r) {
  return r == RegionGranularity::WholeDomain ? 1 : long(g.cell_count());
}

long region_of(const GridGeometry& g, RegionGranularity r, const Vec3& x) {
  return r == RegionGranularity::WholeDomain ? 0 : cell_index(g, x);
}

RegionBox region_box(const GridGeometry& g, RegionGranularity r, long region) {
  if (r == RegionGranularity::WholeDomain) return {{}, g.length};
  const long i = region % g.cells(0), j = (region / g.cells(0)) % g.cells(1), k = region / (long(g.cells(0)) * g.cells(1));
  const Vec3 lo = g.node_position(int(i), int(j), int(k));
  return {lo, lo + g.spacing()};
}

std::vector<std::vector<std::size_t>> census(const std::vector<ParticleList>& species, const GridGeometry& g,
                                             RegionGranularity r) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& ps : species) {
    std::vector<std::size_t> counts(region_count(g, r), 0);
    for (const auto& p : ps) ++counts[region_of(g, r, p.position)];
    out.push_back(std::move(counts));
  }
  return out;
}

void split_particles(ParticleList& ps, long deficit, const GridGeometry& g, const RegionBox& box, Rng& rng) {
  if (deficit <= 0) return;
  if (ps.empty()) throw std::invalid_argument("cannot split particles of an empty region");
  // Max-heap on weight; ties go to the lower index.
  auto cmp = [](const std::pair<double, std::size_t>& x, const std::pair<double, std::size_t>& y) {
    return x.first != y.first ? x.first < y.first : x.second > y.second;
  };
  std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>, decltype(cmp)> heap(cmp);
  for (std::size_t n = 0; n < ps.size(); ++n) heap.push({ps[n].weight, n});

  for (long d = 0; d < deficit; ++d) {
    const auto [w, n] = heap.top();
    heap.pop();
    const int axis = int(rng.below(3));
    const double delta = 0.25 * g.spacing(axis);
    // Upper bound stays strictly inside the box so periodic positions never reach L.
    const double hi = std::nextafter(box.hi[axis], box.lo[axis]);
    Particle a = ps[n], b = ps[n];
    a.weight = b.weight = 0.5 * w;
    a.position[axis] = std::clamp(ps[n].position[axis] - delta, box.lo[axis], hi);
    b.position[axis] = std::clamp(ps[n].position[axis] + delta, box.lo[axis], hi);
    ps[n] = a;
    ps.push_back(b);
    heap.push({a.weight, n});
    heap.push({b.weight, ps.size() - 1});
  }
}

long coalesce_particles(ParticleList& ps, long excess, const GridGeometry& g, int velocity_bins, double c) {
  long removed = 0;
  while (removed < excess && ps.size() >= 2) {
    long merged = merge_pass(ps, excess - removed, g, std::max(1, velocity_bins), c);
    // Sparse velocity bins can stall; fall back to same-cell pairing.
    if (merged == 0) merged = merge_pass(ps, excess - removed, g, 0, c);
    if (merged == 0) break;
    removed += merged;
  }
  return removed;
}

std::vector<ControlReport> control_pass(SimState& state, const GridGeometry& g, const ControlPolicy& policy) {
  std::vector<ControlReport> reports;
  const long regions = region_count(g, policy.region);
  for (std::size_t s = 0; s < state.species.size(); ++s) {
    auto& ps = state.species[s];
    const long target = s < policy.targets.size() ? policy.targets[s] : long(ps.size());
    const double hi = double(target) * (1.0 + policy.theta), lo = double(target) * (1.0 - policy.theta);

    std::vector<ParticleList> buckets(regions);
    for (const auto& p : ps) buckets[region_of(g, policy.region, p.position)].push_back(p);
    bool changed = false;
    for (long r = 0; r < regions; ++r) {
      auto& b = buckets[r];
      const double count = double(b.size());
      if (count <= hi && count >= lo) continue;
      ControlReport rep;
      rep.species = s;
      rep.region = r;
      rep.before = b.size();
      const Totals before = totals(b, policy.c);
      if (count > hi) {
        rep.action = ControlAction::Coalesce;
        const long excess = long(b.size()) - target;
        rep.partial = coalesce_particles(b, excess, g, policy.velocity_bins, policy.c) < excess;
      } else {
        rep.action = ControlAction::Split;
        if (b.empty()) {
          rep.partial = true;
        } else {
          split_particles(b, target - long(b.size()), g, region_box(g, policy.region, r), state.rng);
        }
      }
      const Totals after = totals(b, policy.c);
      rep.after = b.size();
      rep.charge_delta = before.charge > 0 ? std::abs(after.charge - before.charge) / before.charge : 0.0;
      rep.momentum_delta =
          before.momentum_scale > 0 ? norm(after.momentum - before.momentum) / before.momentum_scale : 0.0;
      rep.energy_delta = after.energy - before.energy;
      reports.push_back(rep);
      changed = true;
    }
    if (changed) {
      ps.clear();
      for (auto& b : buckets) ps.insert(ps.end(), b.begin(), b.end());
    }
  }
  return reports;
}

}  // namespace ipic
