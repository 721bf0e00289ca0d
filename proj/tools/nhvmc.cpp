// Command-line front end: nhvmc {ed|vmc|sweep|landscape|observables} [options]

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nhvmc/runner.hpp"

namespace {

int default_workers() {
  if (const char* env = std::getenv("NHVMC_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring NHVMC_WORKERS='" << env << "'\n";
  }
  return 1;
}

struct Options {
  std::string config;
  std::string out;
  int workers = default_workers();
  std::optional<std::uint64_t> seed;
  std::string resume;
};

void add_common(CLI::App* sub, Options& o, bool config_required) {
  auto* c = sub->add_option("--config", o.config, "Run configuration (JSON)");
  if (config_required) c->required();
  sub->add_option("--out", o.out, "Output directory (overrides output.directory)");
  sub->add_option("--workers", o.workers, "Parallel sweep workers (default: NHVMC_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Overrides ansatz.seed");
  sub->add_option("--resume", o.resume, "Snapshot to continue from (vmc) or to evaluate (observables)");
}

nhvmc::RunConfig run_config(const Options& o) {
  auto c = nhvmc::load_run_config(o.config);
  if (o.seed) c.ansatz.seed = *o.seed;
  if (!o.out.empty()) c.output.directory = o.out;
  return c;
}

void print_summary(const nhvmc::fs::path& dir) {
  std::cout << "wrote " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational Monte Carlo for non-Hermitian spin models"};
  app.require_subcommand(1);
  Options o;
  auto* ed = app.add_subcommand("ed", "Exact diagonalization: spectrum, ground pair, gap, fidelity, observables");
  auto* vmc = app.add_subcommand("vmc", "Single variational run");
  auto* sweep = app.add_subcommand("sweep", "Grid of runs over h and k with optional warm-start chaining");
  auto* land = app.add_subcommand("landscape", "Single-qubit variance landscape scan");
  auto* obs = app.add_subcommand("observables", "Observables of a saved snapshot");
  add_common(ed, o, true);
  add_common(vmc, o, true);
  add_common(sweep, o, true);
  add_common(land, o, false);
  add_common(obs, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : nhvmc::kExitValidation;
  }

  try {
    if (*ed) {
      const auto c = run_config(o);
      const nhvmc::fs::path dir = c.output.directory;
      const int rc = nhvmc::cmd_ed(c, dir);
      print_summary(dir);
      return rc;
    }
    if (*vmc) {
      const auto c = run_config(o);
      const nhvmc::fs::path dir = c.output.directory;
      const int rc = nhvmc::cmd_vmc(c, dir, o.resume.empty() ? std::nullopt : std::optional<std::string>(o.resume));
      print_summary(dir);
      if (rc == nhvmc::kExitNotConverged) std::cerr << "run finished without reaching the convergence loss\n";
      return rc;
    }
    if (*sweep) {
      auto s = nhvmc::load_sweep_config(o.config);
      if (o.seed) s.base.ansatz.seed = *o.seed;
      if (!o.out.empty()) s.base.output.directory = o.out;
      const nhvmc::fs::path dir = s.base.output.directory;
      const int rc = nhvmc::cmd_sweep(s, dir, o.workers);
      print_summary(dir);
      if (rc == nhvmc::kExitPartialSweep) std::cerr << "some sweep points failed; see aggregate.csv\n";
      return rc;
    }
    if (*land) {
      nhvmc::LandscapeConfig lc;
      if (!o.config.empty()) {
        const auto j = nhvmc::read_json_file(o.config);
        lc = nhvmc::parse_landscape_config(j.contains("landscape") ? j.at("landscape") : j);
      }
      const nhvmc::fs::path dir = o.out.empty() ? "landscape" : o.out;
      const int rc = nhvmc::cmd_landscape(lc, dir);
      print_summary(dir);
      return rc;
    }
    if (*obs) {
      if (o.resume.empty()) throw nhvmc::ConfigError("resume", "observables needs --resume SNAPSHOT");
      const auto c = run_config(o);
      const nhvmc::fs::path dir = c.output.directory;
      const int rc = nhvmc::cmd_observables(c, dir, o.resume);
      print_summary(dir);
      return rc;
    }
  } catch (const nhvmc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return nhvmc::kExitValidation;
  } catch (const nhvmc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return nhvmc::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nhvmc::kExitNumerical;
  }
  return nhvmc::kExitValidation;
}
