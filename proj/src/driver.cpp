#include "ipic/driver.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <future>
#include <istream>
#include <ostream>

#include "ipic/maxwell.hpp"
#include "ipic/moments.hpp"
#include "ipic/mover.hpp"

namespace ipic {
namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char(v >> (8 * i));
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char(v >> (8 * i));
  out.write(b, 8);
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), bytes);
  if (in.gcount() != bytes) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) { return std::uint32_t(get_le(in, 4)); }
std::uint64_t get_u64(std::istream& in) { return get_le(in, 8); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le(in, 8)); }

void put_field(std::ostream& out, const VectorField& f) {
  for (const auto& v : f.raw()) {
    put_f64(out, v.x);
    put_f64(out, v.y);
    put_f64(out, v.z);
  }
}

void get_field(std::istream& in, VectorField& f) {
  for (auto& v : f.raw()) {
    v.x = get_f64(in);
    v.y = get_f64(in);
    v.z = get_f64(in);
  }
}

}  // namespace

Simulation::Simulation(SimConfig config) : Simulation(config, init_scenario(config)) {}

Simulation::Simulation(SimConfig config, SimState state)
    : config_(std::move(config)), geometry_(config_), state_(std::move(state)) {
  validate(config_);
  if (!(state_.fields.geometry.nodes == geometry_.nodes)) throw CheckpointError("state grid does not match the config");
  if (state_.species.size() != config_.species.size()) throw CheckpointError("species count does not match the config");
  state_.fields.geometry = geometry_;
  if (geometry_.mode == BoundaryMode::OpenInflow) {
    external_b_ = external_b_field(config_);
    inflow_ = inflow_face(config_);
  }
  policy_ = make_policy(config_);
}

void Simulation::compress(std::vector<GmmRecord>& out) const {
  const auto& cp = config_.compress_params;
  for (std::size_t s = 0; s < state_.species.size(); ++s) {
    const auto& ps = state_.species[s];
    if (ps.empty()) continue;
    const auto hist = bin_velocities(ps, cp.bins, cp.range, cp.v_max);
    int occupied = 0;
    for (double c : hist.counts) occupied += c > 0.0;
    EmParams ep;
    ep.seed = config_.rng_seed + state_.cycle;
    const auto fit = fit_gmm(hist, std::min(cp.components, occupied), ep);
    out.push_back({std::uint32_t(s), 0u, std::uint32_t(state_.cycle), fit.mixture});
  }
}

const DiagnosticsRow& Simulation::run_cycle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& cfg = config_;
  auto& st = state_;

  // Phase 1: control, push, boundaries, injection.
  if (cfg.control_params.enabled) {
    auto reps = control_pass(st, geometry_, policy_);
    control_log_.insert(control_log_.end(), reps.begin(), reps.end());
  }
  for (std::size_t s = 0; s < st.species.size(); ++s) {
    push_species(st.species[s], st.fields, cfg.species[s], cfg.dt, cfg.c, cfg.mover_params, cfg.workers);
    apply_species_bc(st.species[s], geometry_, inflow_);
  }
  if (geometry_.mode == BoundaryMode::OpenInflow) inject_inflow(st, cfg);

  // Phase 2: moments and implicit sources.
  auto moments = gather_moments(st.species, cfg.species, geometry_, cfg.workers);
  if (cfg.solver_params.smooth_moments) smooth_moments(moments);
  DiagnosticsRow row;
  row.gauss_residual = gauss_residual(st.fields.E, moments.total.rho);
  const auto chi = build_susceptibility(moments, st.fields.B, cfg.dt, cfg.c, cfg.species);
  const auto hat = build_hat_moments(moments, st.fields.B, cfg.dt, cfg.c, cfg.species);

  // Phase 3: compression overlaps the field solve; it only reads particles.
  const bool compress_now = cfg.compress_params.every > 0 && (st.cycle + 1) % std::uint64_t(cfg.compress_params.every) == 0;
  std::vector<GmmRecord> records;
  std::future<void> pending;
  if (compress_now) {
    if (cfg.workers > 1)
      pending = std::async(std::launch::async, [this, &records] { compress(records); });
    else
      compress(records);
  }

  const auto rhs = build_rhs(st.fields.E, st.fields.B, hat, cfg.dt, cfg.c);
  const MaxwellOperator op(chi, cfg.dt, cfg.c);
  auto [x, report] = solve_fields(op, rhs, cfg.solver_params, pack_field(st.fields.E));
  last_solve_ = report;
  if (!report.converged) {
    ++solver_failures_;
    if (cfg.solver_params.abort_on_failure) {
      if (pending.valid()) pending.wait();
      throw SolverError("field solve did not converge: residual " + std::to_string(report.residual) + " after " +
                        std::to_string(report.iterations) + " iterations");
    }
  }
  unpack_field(x, st.fields.E);
  st.fields.B = advance_B(st.fields.B, st.fields.E, cfg.dt, cfg.c,
                          geometry_.mode == BoundaryMode::OpenInflow ? &external_b_ : nullptr);
  if (pending.valid()) pending.get();
  archive_.insert(archive_.end(), records.begin(), records.end());

  ++st.cycle;
  const auto m = measure(st, cfg);
  row.cycle = st.cycle;
  row.field_energy = m.field_energy;
  row.kinetic_energy = m.kinetic_energy;
  row.momentum = m.momentum;
  row.particle_counts = m.particle_counts;
  row.krylov_iterations = report.iterations;
  row.krylov_residual = report.residual;
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  st.diagnostics.push_back(row);
  return st.diagnostics.back();
}

void Simulation::run(int cycles) {
  for (int n = 0; n < cycles; ++n) run_cycle();
}

void Simulation::restore(std::istream& in) {
  SimState restored = read_checkpoint(in, &geometry_);
  if (restored.species.size() != config_.species.size()) throw CheckpointError("species count does not match the config");
  restored.diagnostics = state_.diagnostics;
  state_ = std::move(restored);
}

DiagnosticsRow measure(const SimState& st, const SimConfig& cfg) {
  DiagnosticsRow row;
  row.cycle = st.cycle;
  row.field_energy = field_energy(st.fields);
  for (std::size_t s = 0; s < st.species.size(); ++s) {
    row.kinetic_energy.push_back(kinetic_energy(st.species[s], cfg.species[s], cfg.c));
    row.particle_counts.push_back(st.species[s].size());
  }
  row.momentum = total_momentum(st.species, cfg.species, cfg.c);
  return row;
}

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, std::ostream& out) {
  const std::size_t ns = rows.empty() ? 0 : rows.front().kinetic_energy.size();
  out << "cycle,field_energy";
  for (std::size_t s = 0; s < ns; ++s) out << ",kinetic_energy_" << s;
  out << ",total_energy,momentum_x,momentum_y,momentum_z";
  for (std::size_t s = 0; s < ns; ++s) out << ",count_" << s;
  out << ",gauss_residual,krylov_iterations,krylov_residual,wall_time\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.cycle << ',' << num(r.field_energy);
    for (double k : r.kinetic_energy) out << ',' << num(k);
    out << ',' << num(r.total_energy()) << ',' << num(r.momentum.x) << ',' << num(r.momentum.y) << ','
        << num(r.momentum.z);
    for (auto c : r.particle_counts) out << ',' << c;
    out << ',' << num(r.gauss_residual) << ',' << r.krylov_iterations << ',' << num(r.krylov_residual) << ','
        << num(r.wall_time) << '\n';
  }
}

void write_checkpoint(const SimState& st, double dt, double c, std::ostream& out) {
  const auto& g = st.fields.geometry;
  out.write("IPKC", 4);
  put_u32(out, 1);
  for (int a = 0; a < 3; ++a) put_u32(out, std::uint32_t(g.nodes[a]));
  put_u32(out, 1);
  put_u32(out, std::uint32_t(st.species.size()));
  put_u64(out, st.cycle);
  for (auto w : st.rng.state()) put_u64(out, w);
  put_f64(out, dt);
  put_f64(out, c);
  put_field(out, st.fields.E);
  put_field(out, st.fields.B);
  for (const auto& ps : st.species) {
    put_u64(out, ps.size());
    for (const auto& p : ps) {
      for (int a = 0; a < 3; ++a) put_f64(out, p.position[a]);
      for (int a = 0; a < 3; ++a) put_f64(out, p.velocity[a]);
      put_f64(out, p.weight);
    }
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

CheckpointHeader read_checkpoint_header(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw CheckpointError("truncated checkpoint");
  if (std::string(magic, 4) != "IPKC") throw CheckpointError("bad checkpoint magic");
  const auto version = get_u32(in);
  if (version != 1) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  CheckpointHeader h;
  for (auto& d : h.dims) d = get_u32(in);
  h.ghost_width = get_u32(in);
  if (h.ghost_width != 1) throw CheckpointError("unsupported ghost width");
  h.species = get_u32(in);
  h.cycle = get_u64(in);
  for (auto& w : h.rng) w = get_u64(in);
  h.dt = get_f64(in);
  h.c = get_f64(in);
  return h;
}

SimState read_checkpoint(std::istream& in, const GridGeometry* expected) {
  const auto h = read_checkpoint_header(in);
  GridGeometry g;
  if (expected) {
    for (int a = 0; a < 3; ++a)
      if (int(h.dims[a]) != expected->nodes[a]) throw CheckpointError("checkpoint grid does not match the config");
    g = *expected;
  } else {
    for (int a = 0; a < 3; ++a)
      if (h.dims[a] < 2 || h.dims[a] > (1u << 16)) throw CheckpointError("implausible checkpoint grid");
    g = GridGeometry({int(h.dims[0]), int(h.dims[1]), int(h.dims[2])}, {1.0, 1.0, 1.0}, BoundaryMode::Periodic);
  }
  SimState st;
  st.cycle = h.cycle;
  st.rng.set_state(h.rng);
  st.fields = FieldGrid(g);
  get_field(in, st.fields.E);
  get_field(in, st.fields.B);
  st.species.resize(h.species);
  for (auto& ps : st.species) {
    const auto n = get_u64(in);
    // Grow incrementally so a corrupt count fails on truncation, not allocation.
    for (std::uint64_t i = 0; i < n; ++i) {
      Particle p;
      for (int a = 0; a < 3; ++a) p.position[a] = get_f64(in);
      for (int a = 0; a < 3; ++a) p.velocity[a] = get_f64(in);
      p.weight = get_f64(in);
      ps.push_back(p);
    }
  }
  return st;
}

}  // namespace ipic
