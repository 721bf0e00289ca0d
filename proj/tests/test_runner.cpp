#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "nhvmc/runner.hpp"

using namespace nhvmc;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nhvmc_runner_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> out;
  for (std::string s; std::getline(in, s);) out.push_back(s);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

// Rows of a CSV as column-name -> value maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  const auto ls = lines_of(p);
  REQUIRE(!ls.empty());
  const auto head = split(ls[0]);
  std::vector<std::map<std::string, std::string>> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = split(ls[i]);
    REQUIRE(f.size() == head.size());
    std::map<std::string, std::string> r;
    for (std::size_t c = 0; c < f.size(); ++c) r[head[c]] = f[c];
    rows.push_back(r);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(int n, double h, double k) {
  RunConfig c = parse_run_config({{"model", {{"lattice", {{"kind", "chain1d"}, {"extent", {n}}}}, {"h", h}, {"k", k}}}});
  c.estimator.mode = EstimatorMode::full_summation;
  return c;
}

RunConfig sampled_config(int n, double h, double k) {
  RunConfig c = small_config(n, h, k);
  c.estimator.mode = EstimatorMode::sampled;
  c.estimator.sampler.n_chains = 4;
  c.estimator.sampler.n_samples_per_chain = 32;
  c.estimator.sampler.n_burnin = 20;
  return c;
}

}  // namespace

TEST_CASE("ed on a single site matches the 2x2 closed form") {
  // H = [[-i k, -h], [-h, i k]] has eigenvalues -+sqrt(h^2 - k^2).
  for (const auto& [h, k] : {std::pair{1.0, 0.4}, std::pair{0.5, 0.8}}) {
    auto c = small_config(1, h, k);
    const auto dir = scratch("ed1");
    CHECK(cmd_ed(c, dir) == kExitOk);
    const auto rows = read_csv(dir / "spectrum.csv");
    REQUIRE(rows.size() == 2);
    const cplx root = std::sqrt(cplx(h * h - k * k, 0.0));
    std::vector<cplx> got;
    for (const auto& r : rows) got.emplace_back(std::stod(r.at("re")), std::stod(r.at("im")));
    const bool direct = std::abs(got[0] + root) < 1e-12 && std::abs(got[1] - root) < 1e-12;
    const bool swapped = std::abs(got[0] - root) < 1e-12 && std::abs(got[1] + root) < 1e-12;
    CHECK((direct || swapped));
    CHECK(std::real(got[0]) <= std::real(got[1]));
  }
}

TEST_CASE("ed at k = 0 has real spectrum and writes every artifact") {
  auto c = small_config(8, 0.7, 0.0);
  const auto dir = scratch("ed_herm");
  CHECK(cmd_ed(c, dir) == kExitOk);
  for (const char* f : {"config.resolved.json", "spectrum.csv", "ground.csv", "observables.csv", "correlation_lr.csv",
                        "correlation_rr.csv"}) {
    CHECK(fs::exists(dir / f));
  }
  for (const auto& r : read_csv(dir / "spectrum.csv")) CHECK(std::abs(std::stod(r.at("im"))) < 1e-10);
  const auto g = read_csv(dir / "ground.csv").at(0);
  CHECK(std::stod(g.at("lr_fidelity")) == doctest::Approx(1.0));
  // Sidecar reproduces the run config.
  auto side = parse_run_config(read_json_file((dir / "config.resolved.json").string()));
  side.output.directory = c.output.directory;
  CHECK(to_json(side) == to_json(c));
}

TEST_CASE("ed gap scan over k has a single interior minimum") {
  auto c = small_config(9, 2.5, 0.0);
  for (int i = 1; i <= 12; ++i) c.ed.k_grid.push_back(0.2 * i);
  c.ed.observables = false;
  const auto dir = scratch("ed_scan");
  CHECK(cmd_ed(c, dir) == kExitOk);
  const auto rows = read_csv(dir / "gap_scan.csv");
  REQUIRE(rows.size() == 12);
  std::vector<double> gap;
  for (const auto& r : rows) gap.push_back(std::stod(r.at("gap")));
  const auto imin = std::min_element(gap.begin(), gap.end()) - gap.begin();
  CHECK(imin > 0);
  CHECK(imin < 11);
  for (long i = 1; i <= imin; ++i) CHECK(gap[i] < gap[i - 1]);
  for (long i = imin + 1; i < 12; ++i) CHECK(gap[i] > gap[i - 1]);
}

TEST_CASE("ed beyond the caps names them") {
  auto c = parse_run_config({{"model", {{"lattice", {{"kind", "square2d"}, {"extent", {4, 4}}}}}}});
  try {
    cmd_ed(c, scratch("ed_cap"));
    FAIL("expected a cap error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("cap") != std::string::npos);
  }
  // Periodic chains up to 14 sites go through the translation sectors.
  const auto p = ed_point(Hamiltonian(chain(13), {0.5, 1.0, 0.2}));
  CHECK(p.method == "translation_sector");
}

TEST_CASE("vmc with M = 0 reports the initial state only") {
  auto c = small_config(6, 1.0, 0.1);
  c.schedule.mode = ScheduleMode::self_consistent;
  c.schedule.M = 0;
  const auto dir = scratch("vmc0");
  CHECK(cmd_vmc(c, dir) == kExitNotConverged);
  CHECK(lines_of(dir / "records.jsonl").empty());
  const auto s = read_csv(dir / "summary.csv").at(0);
  CHECK(s.at("steps") == "0");
  CHECK(s.at("initial_hash") == s.at("final_hash"));
  CHECK(fs::exists(dir / "params.snapshot"));
}

TEST_CASE("fixed start records carry three phase tags") {
  auto c = small_config(9, 1.5, 0.15);
  c.schedule.F = 3;
  c.schedule.T = 3;
  c.schedule.M = 3;
  const auto dir = scratch("vmc_phases");
  cmd_vmc(c, dir);
  std::vector<std::string> tags;
  for (const auto& l : lines_of(dir / "records.jsonl")) tags.push_back(json::parse(l).at("phase_tag"));
  REQUIRE(tags.size() == 9);
  CHECK(tags[0] == "fixed");
  CHECK(tags[3] == "transition");
  CHECK(tags[8] == "self_consistent");
  const auto r = json::parse(lines_of(dir / "records.jsonl").at(0));
  for (const char* key : {"step", "eps_re", "eps_im", "loss", "loss_stderr", "acc", "grad_norm", "phase_tag"}) {
    CHECK(r.contains(key));
  }
}

TEST_CASE("resume from a snapshot reproduces the continued trajectory") {
  for (auto mode : {ScheduleMode::fixed_start, ScheduleMode::energy_as_parameter}) {
    auto c = sampled_config(6, 1.0, 0.2);
    c.schedule.mode = mode;
    c.schedule.F = 2;
    c.schedule.T = 2;
    c.schedule.M = mode == ScheduleMode::fixed_start ? 4 : 8;
    c.output.snapshot_stride = 4;
    const auto a = scratch("resume_a");
    cmd_vmc(c, a);
    const auto b = scratch("resume_b");
    cmd_vmc(c, b, (a / "snapshots" / "step_00000004.snapshot").string());
    CHECK(slurp(a / "params.snapshot") == slurp(b / "params.snapshot"));
    const auto la = lines_of(a / "records.jsonl");
    const auto lb = lines_of(b / "records.jsonl");
    REQUIRE(lb.size() == 4);
    for (std::size_t i = 0; i < lb.size(); ++i) {
      auto ra = json::parse(la[4 + i]);
      auto rb = json::parse(lb[i]);
      ra.erase("wall_time");
      rb.erase("wall_time");
      CHECK(ra == rb);
    }
  }
  auto c = sampled_config(6, 1.0, 0.2);
  c.ansatz.alpha = 2;
  const auto a = scratch("resume_a");
  CHECK_THROWS_AS(cmd_vmc(c, scratch("resume_c"), (a / "params.snapshot").string()), ConfigError);
}

TEST_CASE("independent sweep points do not inherit parameters") {
  SweepConfig s;
  s.base = small_config(6, 1.0, 0.0);
  s.base.schedule.mode = ScheduleMode::self_consistent;
  s.base.schedule.M = 3;
  s.k_values = {0.1, 0.3};
  s.chaining = Chaining::independent;
  const auto dir = scratch("sweep_ind");
  CHECK(cmd_sweep(s, dir, 2) == kExitOk);
  const auto agg = read_csv(dir / "aggregate.csv");
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].at("initial_hash") == agg[1].at("initial_hash"));
  CHECK(agg[1].at("initial_hash") != agg[0].at("final_hash"));
}

TEST_CASE("warm sweep chains points and aggregate rows equal run summaries") {
  SweepConfig s;
  s.base = small_config(6, 1.0, 0.0);
  s.base.schedule.M = 3;
  s.base.schedule.hermitian_steps = 4;
  s.h_values = {0.8, 1.2};
  s.k_values = {0.0, 0.2, 0.4};
  s.chaining = Chaining::warm_forward;
  const auto d1 = scratch("sweep_warm1");
  CHECK(cmd_sweep(s, d1, 1) == kExitOk);
  const auto agg = read_csv(d1 / "aggregate.csv");
  REQUIRE(agg.size() == 6);
  for (std::size_t i = 0; i < agg.size(); ++i) {
    if (i % 3 != 0) CHECK(agg[i].at("initial_hash") == agg[i - 1].at("final_hash"));
    const auto point = agg[i].at("point");
    const auto sl = lines_of(d1 / "points" / point / "summary.csv");
    const auto al = lines_of(d1 / "aggregate.csv");
    CHECK(al[i + 1] == point + "," + sl[1]);
  }
  CHECK(agg[0].at("steps") == "4");
  CHECK(agg[2].at("steps") == "10");
  // Worker count does not change results.
  const auto d2 = scratch("sweep_warm2");
  CHECK(cmd_sweep(s, d2, 3) == kExitOk);
  CHECK(slurp(d1 / "aggregate.csv") == slurp(d2 / "aggregate.csv"));
}

TEST_CASE("combined fixed-then-warm sweep") {
  SweepConfig s;
  s.base = small_config(6, 1.0, 0.0);
  s.base.schedule.F = 2;
  s.base.schedule.T = 2;
  s.base.schedule.M = 2;
  s.base.schedule.direction = SweepDirection::backward;
  s.k_values = {0.4, 0.2, 0.0};
  s.chaining = Chaining::combined_fixed_then_warm;
  const auto dir = scratch("sweep_combined");
  CHECK(cmd_sweep(s, dir, 1) == kExitOk);
  const auto agg = read_csv(dir / "aggregate.csv");
  REQUIRE(agg.size() == 3);
  const auto first = lines_of(dir / "points" / agg[0].at("point") / "records.jsonl");
  CHECK(json::parse(first.front()).at("phase_tag") == "fixed");
  const auto second = lines_of(dir / "points" / agg[1].at("point") / "records.jsonl");
  CHECK(json::parse(second.front()).at("phase_tag") == "self_consistent");
  CHECK(agg[1].at("initial_hash") == agg[0].at("final_hash"));
}

TEST_CASE("a failing sweep point is marked and the rest continue") {
  SweepConfig s;
  s.base = small_config(6, 1.0, 0.0);
  s.base.schedule.mode = ScheduleMode::self_consistent;
  s.base.schedule.M = 2;
  s.k_values = {0.1, 0.2, 0.3};
  const auto dir = scratch("sweep_fail");
  fs::create_directories(dir / "points");
  // A plain file where the second point's directory should go.
  std::ofstream(dir / "points" / point_name(1, 1.0, 0.2)) << "blocker";
  CHECK(cmd_sweep(s, dir, 2) == kExitPartialSweep);
  const auto agg = read_csv(dir / "aggregate.csv");
  REQUIRE(agg.size() == 3);
  CHECK(agg[0].at("status") != "failed");
  CHECK(agg[1].at("status") == "failed");
  CHECK(agg[2].at("status") != "failed");
}

TEST_CASE("observables from a snapshot agree with the run summary") {
  auto c = small_config(6, 1.0, 0.2);
  c.schedule.mode = ScheduleMode::self_consistent;
  c.schedule.M = 5;
  const auto run = scratch("obs_run");
  cmd_vmc(c, run);
  const auto dir = scratch("obs");
  CHECK(cmd_observables(c, dir, (run / "params.snapshot").string()) == kExitOk);
  const auto s = read_csv(run / "summary.csv").at(0);
  std::map<std::string, std::map<std::string, std::string>> obs;
  for (const auto& r : read_csv(dir / "observables.csv")) obs[r.at("name") + "/" + r.at("mode")] = r;
  CHECK(std::stod(obs["eps/lr"].at("re")) == doctest::Approx(std::stod(s.at("eps_re"))).epsilon(1e-12));
  CHECK(std::stod(obs["M_z/lr"].at("im")) == doctest::Approx(std::stod(s.at("M_z_im"))).epsilon(1e-12));
  CHECK(fs::exists(dir / "correlation_lr.csv"));
}

TEST_CASE("landscape command") {
  const auto dir = scratch("land");
  CHECK(cmd_landscape({}, dir) == kExitOk);
  CHECK(fs::exists(dir / "landscape.csv"));
  CHECK(slurp(dir / "landscape_report.txt").find("saddle") != std::string::npos);
}
