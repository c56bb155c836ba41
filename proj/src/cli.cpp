#include "ipic/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "ipic/analysis.hpp"
#include "ipic/driver.hpp"
#include "ipic/gmm.hpp"

namespace fs = std::filesystem;

namespace ipic {
namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return f;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

struct RunArgs {
  std::string config;
  int cycles = -1;
  int checkpoint_every = 0;
  int compress_every = -1;
  int workers = 0;
  std::string out = ".";
  std::string resume;
};

int do_run(const RunArgs& a, std::ostream& out) {
  SimConfig cfg = load_config_file(a.config);
  if (a.compress_every >= 0) cfg.compress_params.every = a.compress_every;
  if (a.workers > 0) cfg.workers = a.workers;
  const int cycles = a.cycles >= 0 ? a.cycles : cfg.n_cycles;
  const fs::path dir(a.out);
  fs::create_directories(dir);

  std::unique_ptr<Simulation> sim;
  if (a.resume.empty()) {
    sim = std::make_unique<Simulation>(cfg);
  } else {
    auto in = open_in(a.resume);
    const GridGeometry g(cfg);
    sim = std::make_unique<Simulation>(cfg, read_checkpoint(in, &g));
  }

  auto checkpoint = [&](const fs::path& p) {
    auto f = open_out(p);
    write_checkpoint(sim->state(), cfg.dt, cfg.c, f);
  };
  for (int n = 0; n < cycles; ++n) {
    const auto& row = sim->run_cycle();
    if (a.checkpoint_every > 0 && (n + 1) % a.checkpoint_every == 0) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(6) << std::setfill('0') << row.cycle << ".ipkc";
      checkpoint(dir / name.str());
    }
  }
  checkpoint(dir / "final.ipkc");
  {
    auto f = open_out(dir / "diagnostics.csv");
    write_diagnostics_csv(sim->state().diagnostics, f);
  }
  if (!sim->archive().empty()) {
    auto f = open_out(dir / "archive.gmma");
    write_archive(sim->archive(), f);
  }
  out << "ran " << cycles << " cycles to cycle " << sim->state().cycle << "; solver failures "
      << sim->solver_failures() << "\n";
  return 0;
}

struct CompressArgs {
  std::string checkpoint;
  int bins = 32;
  int components = 8;
  std::string range = "auto";
  double v_max = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int do_compress(const CompressArgs& a, std::ostream& out) {
  auto in = open_in(a.checkpoint);
  const SimState st = read_checkpoint(in);
  const auto range = a.range == "fixed" ? HistogramRange::Fixed : HistogramRange::Auto;
  std::vector<GmmRecord> records;
  for (std::size_t s = 0; s < st.species.size(); ++s) {
    if (st.species[s].empty()) continue;
    const auto h = bin_velocities(st.species[s], a.bins, range, a.v_max);
    int occupied = 0;
    for (double c : h.counts) occupied += c > 0.0;
    EmParams ep;
    ep.seed = a.seed;
    const auto fit = fit_gmm(h, std::min(a.components, occupied), ep);
    records.push_back({std::uint32_t(s), 0u, std::uint32_t(st.cycle), fit.mixture});
    out << "species " << s << ": " << st.species[s].size() << " particles, " << fit.mixture.weights.size()
        << " components, log-likelihood " << fit.log_likelihood.back() << ", ratio "
        << compression_ratio(st.species[s].size(), fit.mixture.weights.size()) << "\n";
  }
  auto f = open_out(a.out);
  write_archive(records, f);
  return 0;
}

struct AnalyzeArgs {
  std::vector<std::string> archives;
  std::optional<double> penalty;
  int bins = 32;
  std::string out = ".";
};

int do_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<GmmRecord> records;
  for (const auto& path : a.archives) {
    auto in = open_in(path);
    auto r = read_archive(in);
    records.insert(records.end(), r.begin(), r.end());
  }
  const auto result = analyze_records(records, a.bins, a.penalty);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "metrics.csv");
    f << std::setprecision(17);
    f << "cycle,species,region,mean_x,mean_y,mean_z,var_xx,var_xy,var_xz,var_yy,var_yz,var_zz,"
         "skew_x,skew_y,skew_z,kurt_x,kurt_y,kurt_z,anisotropy,entropy,kl_prev\n";
    for (const auto& r : result.rows) {
      const auto& m = r.metrics;
      f << r.cycle << ',' << r.species << ',' << r.region;
      for (int i = 0; i < 3; ++i) f << ',' << m.mean[i];
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) f << ',' << m.covariance(i, j);
      for (int i = 0; i < 3; ++i) f << ',' << m.skewness[i];
      for (int i = 0; i < 3; ++i) f << ',' << m.kurtosis[i];
      f << ',' << m.anisotropy << ',' << m.entropy << ',';
      if (m.kl_from_previous) f << *m.kl_from_previous;
      f << '\n';
    }
  }
  {
    auto f = open_out(dir / "change_points.csv");
    f << "species,region,metric,indices,cycles\n";
    for (const auto& c : result.change_points) {
      f << c.species << ',' << c.region << ',' << c.metric << ',';
      for (std::size_t n = 0; n < c.indices.size(); ++n) f << (n ? ";" : "") << c.indices[n];
      f << ',';
      for (std::size_t n = 0; n < c.cycles.size(); ++n) f << (n ? ";" : "") << c.cycles[n];
      f << '\n';
    }
  }
  out << result.rows.size() << " records, " << result.change_points.size() << " change-point series\n";
  return 0;
}

int do_dump(const std::string& path, std::ostream& out) {
  auto in = open_in(path);
  const auto h = read_checkpoint_header(in);
  out << "grid " << h.dims[0] << " x " << h.dims[1] << " x " << h.dims[2] << " (ghost width " << h.ghost_width
      << ")\n"
      << "species " << h.species << "\n"
      << "cycle " << h.cycle << "\n"
      << std::setprecision(17) << "dt " << h.dt << "\nc " << h.c << "\nrng";
  out << std::hex;
  for (auto w : h.rng) out << " 0x" << w;
  out << std::dec << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment-implicit particle-in-cell simulation and velocity-distribution analytics", "ipic"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a simulation from a config file");
  run_cmd->add_option("config", run.config, "INI config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--cycles", run.cycles, "Cycles to run (default: config)")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--checkpoint-every", run.checkpoint_every, "Checkpoint cadence in cycles")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--compress-every", run.compress_every, "GMM compression cadence (0 disables)")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--workers", run.workers, "Worker threads (default: config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--resume", run.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  CompressArgs comp;
  auto* comp_cmd = app.add_subcommand("compress", "Fit GMMs to the velocities stored in a checkpoint");
  comp_cmd->add_option("checkpoint", comp.checkpoint)->required()->check(CLI::ExistingFile);
  comp_cmd->add_option("--bins", comp.bins, "Histogram bins per axis")->check(CLI::PositiveNumber);
  comp_cmd->add_option("--components", comp.components, "Mixture components (capped by occupied bins)")->check(CLI::PositiveNumber);
  comp_cmd->add_option("--range", comp.range, "Histogram range: data extent or +-v-max")->check(CLI::IsMember({"auto", "fixed"}));
  comp_cmd->add_option("--v-max", comp.v_max, "Half-width of the fixed range")->check(CLI::PositiveNumber);
  comp_cmd->add_option("--seed", comp.seed, "EM seed");
  comp_cmd->add_option("--out", comp.out, "Archive path")->required();

  AnalyzeArgs ana;
  auto* ana_cmd = app.add_subcommand("analyze", "Distribution metrics and change points of GMM archives");
  ana_cmd->add_option("archives", ana.archives)->required()->check(CLI::ExistingFile);
  ana_cmd->add_option("--penalty", ana.penalty, "Change-point penalty (default: noise-scaled)")
      ->check(CLI::NonNegativeNumber);
  ana_cmd->add_option("--bins", ana.bins, "Reconstruction bins per axis")->check(CLI::Range(2, 512));
  ana_cmd->add_option("--out", ana.out, "Output directory");

  std::string dump_path;
  auto* dump_cmd = app.add_subcommand("checkpoint-dump", "Print a checkpoint header");
  dump_cmd->add_option("file", dump_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*run_cmd) return do_run(run, out);
    if (*comp_cmd) return do_compress(comp, out);
    if (*ana_cmd) return do_analyze(ana, out);
    if (*dump_cmd) return do_dump(dump_path, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ipic
