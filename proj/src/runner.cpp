#include "nhvmc/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "nhvmc/observables.hpp"

namespace nhvmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

std::string hex(std::uint64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// Messages land in CSV cells.
std::string csv_safe(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '"') c = ';';
  }
  return s;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(p, mode);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << "\n"; }

json record_json(const RunRecord& r, std::optional<double> nh_scale) {
  json j;
  j["step"] = r.step;
  j["eps_re"] = r.epsilon.real();
  j["eps_im"] = r.epsilon.imag();
  j["loss"] = r.loss.total;
  j["loss_stderr"] = r.loss.stderr;
  j["acc"] = r.acceptance_rate;
  j["grad_norm"] = r.grad_norm;
  j["phase_tag"] = r.phase;
  j["l_right"] = r.loss.l_right;
  j["l_left"] = r.loss.l_left;
  j["eps_est_re"] = r.epsilon_estimate.value.real();
  j["eps_est_im"] = r.epsilon_estimate.value.imag();
  j["eps_est_stderr_re"] = r.epsilon_estimate.stderr_re;
  j["eps_est_stderr_im"] = r.epsilon_estimate.stderr_im;
  j["eps_frozen"] = r.eps_frozen;
  j["lr"] = r.learning_rate;
  j["rejected"] = r.rejected;
  j["sr_fallback"] = r.sr_fallback;
  j["wall_time"] = r.wall_time;
  if (nh_scale) j["nh_scale"] = *nh_scale;
  // NaN is not valid JSON.
  for (auto& [key, v] : j.items()) {
    if (v.is_number_float() && !std::isfinite(v.get<double>())) v = nullptr;
  }
  return j;
}

Snapshot snapshot_of(const TrainState& s, int num_sites, int alpha) {
  Snapshot snap = s.to_snapshot();
  snap.num_visible = num_sites;
  snap.alpha = alpha;
  return snap;
}

void write_observables_csv(const fs::path& p, const std::vector<std::pair<std::string, ObservableEstimate>>& rows) {
  auto os = open_out(p);
  os << "name,mode,re,im,stderr_re,stderr_im\n";
  for (const auto& [name, o] : rows) {
    for (const auto& [mode, e] : {std::pair{"lr", o.lr}, std::pair{"rr", o.rr}}) {
      os << name << "," << mode << "," << num(e.value.real()) << "," << num(e.value.imag()) << ","
         << num(e.stderr_re) << "," << num(e.stderr_im) << "\n";
    }
  }
}

bool has_shells(const LatticeSpec& lat) { return lat.periodic && lat.num_sites >= 2 && !lat.bonds.empty(); }

}  // namespace

// ---------------------------------------------------------------------------------------------
// Summaries

std::vector<std::string> summary_header() {
  return {"h",        "k",        "eps_re",        "eps_im",        "loss",          "M_z_re",        "M_z_im",
          "M_x_re",   "M_x_im",   "nh_scale",      "eps_stderr_re", "eps_stderr_im", "eps_collapsed", "loss_stderr",
          "l_right",  "l_left",   "M_z_stderr_re", "M_z_stderr_im", "M_x_stderr_re", "M_x_stderr_im", "obs_mode",
          "steps",    "initial_hash", "final_hash", "converged", "status", "message"};
}

std::vector<std::string> summary_fields(const RunSummary& s) {
  return {num(s.h),
          num(s.k),
          num(s.eps.value.real()),
          num(s.eps.value.imag()),
          num(s.loss.total),
          num(s.m_z.value.real()),
          num(s.m_z.value.imag()),
          num(s.m_x.value.real()),
          num(s.m_x.value.imag()),
          num(s.nh_scale),
          num(s.eps.stderr_re),
          num(s.eps.stderr_im),
          s.eps_collapsed ? "1" : "0",
          num(s.loss.stderr),
          num(s.loss.l_right),
          num(s.loss.l_left),
          num(s.m_z.stderr_re),
          num(s.m_z.stderr_im),
          num(s.m_x.stderr_re),
          num(s.m_x.stderr_im),
          to_string(s.observable_mode),
          std::to_string(s.steps),
          hex(s.initial_hash),
          hex(s.final_hash),
          s.converged ? "1" : "0",
          s.status,
          csv_safe(s.message)};
}

void write_summary_csv(const fs::path& path, const RunSummary& s) {
  auto os = open_out(path);
  os << join(summary_header()) << "\n" << join(summary_fields(s)) << "\n";
}

RunSummary summarize(const RunConfig& cfg, const TrainState& state) {
  const auto ham = cfg.hamiltonian();
  const VarianceOptimizer vo(ham, cfg.optimizer, cfg.estimator);
  const auto rep = vo.report(state);
  RunSummary s;
  s.h = cfg.model.params.h;
  s.k = cfg.model.params.k;
  s.nh_scale = cfg.model.params.nh_scale;
  s.eps_collapsed = !rep.eps.has_value();
  s.eps = rep.eps ? *rep.eps : Estimate{rep.loss_eps, kNaN, kNaN};
  s.loss = rep.loss;
  s.steps = state.step;
  s.final_hash = state.parameter_hash();
  s.observable_mode = cfg.observables.mode;
  s.m_z = s.m_x = Estimate{cplx(kNaN, kNaN), kNaN, kNaN};
  if (cfg.observables.enabled) {
    const auto pair = state.pair();
    try {
      s.m_z = magnetization(pair, rep.right, Axis::z, cfg.observables.mode);
      s.m_x = magnetization(pair, rep.right, Axis::x, cfg.observables.mode);
    } catch (const OverlapCollapseError& e) {
      s.message = "observables: overlap collapse";
    }
  }
  s.converged = std::isfinite(s.loss.total) && s.loss.total < cfg.schedule.convergence_loss;
  s.status = s.converged ? "converged" : "not_converged";
  return s;
}

// ---------------------------------------------------------------------------------------------
// Runs

TrainState state_from_snapshot(const RunConfig& cfg, const std::string& path) {
  Snapshot snap;
  try {
    snap = load_snapshot(path);
  } catch (const std::exception& e) {
    throw ConfigError("resume", e.what());
  }
  const int n = cfg.lattice().num_sites;
  if (snap.num_visible != n) {
    throw ConfigError("resume", "snapshot has " + std::to_string(snap.num_visible) + " sites, config has " +
                                    std::to_string(n));
  }
  if (snap.alpha != cfg.ansatz.alpha) throw ConfigError("resume", "snapshot alpha differs from ansatz.alpha");
  if (snap.mode != cfg.ansatz.dual_mode) throw ConfigError("resume", "snapshot dual mode differs from ansatz.dual_mode");
  try {
    return TrainState::from_snapshot(snap);
  } catch (const ValidationError& e) {
    throw ConfigError("resume", e.what());
  }
}

PointResult run_point(const RunConfig& cfg, const fs::path& dir, std::optional<TrainState> init, PointKind kind,
                      bool append_records) {
  cfg.validate();
  fs::create_directories(dir);
  RunConfig resolved = cfg;
  resolved.output.directory = dir.string();
  write_json(dir / "config.resolved.json", to_json(resolved));

  const auto ham = cfg.hamiltonian();
  const int n = ham.num_sites();
  const auto sched = cfg.resolved_schedule();
  TrainState state = init ? std::move(*init)
                          : TrainState::initial(cfg.ansatz.dual_mode, n, cfg.ansatz.alpha, cfg.ansatz.seed,
                                                cfg.ansatz.init_scale);

  const std::uint64_t initial_hash = state.parameter_hash();
  auto records = open_out(dir / "records.jsonl", append_records ? std::ios::app : std::ios::out);
  const int stride = cfg.output.snapshot_stride;
  if (stride > 0) fs::create_directories(dir / "snapshots");
  const auto on_record = [&](const RunRecord& r, const TrainState& s, std::optional<double> nh) {
    records << record_json(r, nh).dump() << "\n";
    if (stride > 0 && s.step % stride == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "step_%08ld.snapshot", s.step);
      save_snapshot((dir / "snapshots" / name).string(), snapshot_of(s, n, cfg.ansatz.alpha));
    }
  };

  RunConfig final_cfg = cfg;
  try {
    if (kind == PointKind::configured && sched.mode == ScheduleMode::warm_start) {
      auto pts = run_warm_start(ham, std::move(state), sched, cfg.optimizer, cfg.estimator,
                                [&](double scale, const RunRecord& r, const TrainState& s) { on_record(r, s, scale); });
      state = pts.back().state;
      final_cfg.model.params.nh_scale = pts.back().nh_scale;
    } else if (kind == PointKind::configured) {
      const VarianceOptimizer vo(ham, cfg.optimizer, cfg.estimator);
      run_schedule(state, vo, sched, [&](const RunRecord& r, const TrainState& s) { on_record(r, s, {}); });
    } else {
      const VarianceOptimizer vo(ham, cfg.optimizer, cfg.estimator);
      state.has_eps = false;  // an inherited eps belongs to another Hamiltonian
      if (ham.params().is_hermitian()) {
        const int steps = sched.hermitian_steps < 0 ? sched.M : sched.hermitian_steps;
        for (int m = 0; m < steps; ++m) {
          const auto r = vo.energy_step(state);
          on_record(r, state, {});
        }
      } else {
        for (int m = 0; m < sched.M; ++m) {
          const auto r = vo.self_consistent_step(state, sched.eps_stride);
          on_record(r, state, {});
        }
      }
    }
  } catch (const NumericalError& e) {
    records.flush();
    save_snapshot((dir / "params.snapshot").string(), snapshot_of(state, n, cfg.ansatz.alpha));
    RunSummary s;
    s.h = cfg.model.params.h;
    s.k = cfg.model.params.k;
    s.nh_scale = cfg.model.params.nh_scale;
    s.eps = Estimate{cplx(kNaN, kNaN), kNaN, kNaN};
    s.loss = {kNaN, kNaN, kNaN, kNaN};
    s.m_z = s.m_x = s.eps;
    s.steps = state.step;
    s.initial_hash = initial_hash;
    s.final_hash = state.parameter_hash();
    s.status = "failed";
    s.message = std::string("numerical failure: ") + e.what();
    write_summary_csv(dir / "summary.csv", s);
    throw;
  }
  records.flush();
  save_snapshot((dir / "params.snapshot").string(), snapshot_of(state, n, cfg.ansatz.alpha));
  PointResult out{summarize(final_cfg, state), std::move(state)};
  out.summary.initial_hash = initial_hash;
  write_summary_csv(dir / "summary.csv", out.summary);
  return out;
}

int cmd_vmc(const RunConfig& cfg, const fs::path& out, const std::optional<std::string>& resume) {
  cfg.validate();
  std::optional<TrainState> init;
  if (resume) {
    if (cfg.schedule.mode == ScheduleMode::warm_start) {
      throw ConfigError("resume", "warm_start schedules cannot be resumed; resume the individual point instead");
    }
    init = state_from_snapshot(cfg, *resume);
  }
  const auto res = run_point(cfg, out, std::move(init), PointKind::configured, resume.has_value());
  return res.summary.converged ? kExitOk : kExitNotConverged;
}

// ---------------------------------------------------------------------------------------------
// Exact diagonalization

EdPoint ed_point(const Hamiltonian& ham) {
  const auto& lat = ham.lattice();
  const int n = ham.num_sites();
  EdPoint p;
  if (n <= kDenseEigenCap) {
    p.method = "dense";
    p.dense = diagonalize(dense_matrix(ham), true);
    p.eigenvalues = p.dense->eigenvalues;
    p.ground = ground_state(*p.dense);
    p.lr_fidelity = lr_fidelity(*p.dense);
    p.pairing_condition = p.dense->pairing_condition[0];
    p.ep_suspect = p.dense->ep_suspect[0];
  } else if (lat.kind == LatticeKind::chain1d && lat.periodic && n <= kMatvecCap) {
    p.method = "translation_sector";
    const auto sec = translation_sector_ed(ham, true);
    p.eigenvalues = sec.eigenvalues;
    p.ground.energy = sec.ground_energy;
    p.ground.right = sec.ground_right;
    p.ground.left = sec.ground_left;
    p.lr_fidelity = sec.ground_fidelity;
    p.pairing_condition = 1.0 / std::sqrt(sec.ground_fidelity);
  } else {
    throw ValidationError("N = " + std::to_string(n) + " exceeds the exact-diagonalization cap (dense N <= " +
                          std::to_string(kDenseEigenCap) + ", periodic chains N <= " + std::to_string(kMatvecCap) +
                          ")");
  }
  p.gap = p.eigenvalues.size() >= 3 ? spectral_gap(p.eigenvalues).delta : kNaN;
  return p;
}

int cmd_ed(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  RunConfig resolved = cfg;
  resolved.output.directory = out.string();
  write_json(out / "config.resolved.json", to_json(resolved));

  const auto ham = cfg.hamiltonian();
  const auto lat = ham.lattice();
  const int n = ham.num_sites();
  const auto p = ed_point(ham);

  {
    auto os = open_out(out / "spectrum.csv");
    if (p.dense) {
      write_spectrum_csv(os, *p.dense);
    } else {
      os << "n,re,im,lr_overlap\n";
      for (Eigen::Index i = 0; i < p.eigenvalues.size(); ++i) {
        os << i << "," << num(p.eigenvalues(i).real()) << "," << num(p.eigenvalues(i).imag()) << ",nan\n";
      }
    }
  }
  {
    auto os = open_out(out / "ground.csv");
    os << "N,method,E0_re,E0_im,gap,lr_fidelity,pairing_condition,ep_suspect,sort_convention\n";
    os << n << "," << p.method << "," << num(p.ground.energy.real()) << "," << num(p.ground.energy.imag()) << ","
       << num(p.gap) << "," << num(p.lr_fidelity) << "," << num(p.pairing_condition) << ","
       << (p.ep_suspect ? 1 : 0) << "," << csv_safe(kSortConvention) << "\n";
  }
  if (cfg.ed.observables) {
    const auto& r = p.ground.right;
    const auto& l = p.ground.left;
    std::vector<std::pair<std::string, ObservableEstimate>> rows;
    for (const auto& [name, axis] : {std::pair{"M_z", Axis::z}, std::pair{"M_x", Axis::x}}) {
      const auto op = magnetization_operator(n, axis);
      ObservableEstimate o;
      o.lr.value = exact_observable(r, l, op, n, ExpectationMode::lr);
      o.rr.value = exact_observable(r, l, op, n, ExpectationMode::rr);
      rows.emplace_back(name, o);
    }
    write_observables_csv(out / "observables.csv", rows);
    if (has_shells(lat)) {
      const auto shells = shell_table(lat);
      for (auto mode : {ExpectationMode::lr, ExpectationMode::rr}) {
        auto os = open_out(out / (mode == ExpectationMode::lr ? "correlation_lr.csv" : "correlation_rr.csv"));
        write_correlation_csv(os, connected_correlation_z(r, l, shells, mode, cfg.observables.floor));
      }
    }
  }
  if (!cfg.ed.k_grid.empty()) {
    auto os = open_out(out / "gap_scan.csv");
    os << "k,E0_re,E0_im,gap,lr_fidelity,method\n";
    for (double k : cfg.ed.k_grid) {
      auto hp = cfg.model.params;
      hp.k = k;
      const auto q = ed_point(ham.with_params(hp));
      os << num(k) << "," << num(q.ground.energy.real()) << "," << num(q.ground.energy.imag()) << "," << num(q.gap)
         << "," << num(q.lr_fidelity) << "," << q.method << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// Sweeps

std::string point_name(std::size_t index, double h, double k) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "p%03zu_h%g_k%g", index, h, k);
  return buf;
}

int cmd_sweep(const SweepConfig& cfg, const fs::path& out, int workers) {
  cfg.validate();
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  fs::create_directories(out / "points");
  json resolved = to_json(cfg);
  resolved["base"]["output"]["directory"] = out.string();
  write_json(out / "sweep.resolved.json", resolved);

  const auto hs = cfg.h_axis();
  const auto ks = cfg.k_axis();
  struct Point {
    double h, k;
    fs::path dir;
    RunSummary summary;
  };
  std::vector<Point> points;
  for (double h : hs) {
    for (double k : ks) {
      points.push_back({h, k, out / "points" / point_name(points.size(), h, k), {}});
    }
  }
  // A job is a list of point indices run in order; only chained rules put several points in a job.
  std::vector<std::vector<std::size_t>> jobs;
  if (cfg.chaining == Chaining::independent) {
    for (std::size_t i = 0; i < points.size(); ++i) jobs.push_back({i});
  } else {
    for (std::size_t a = 0; a < hs.size(); ++a) {
      std::vector<std::size_t> chain;
      for (std::size_t b = 0; b < ks.size(); ++b) chain.push_back(a * ks.size() + b);
      jobs.push_back(chain);
    }
  }

  const auto config_at = [&](const Point& p) {
    RunConfig c = cfg.base;
    c.model.params.h = p.h;
    c.model.params.k = p.k;
    return c;
  };
  const auto failed = [](const Point& p, const std::string& why) {
    RunSummary s;
    s.h = p.h;
    s.k = p.k;
    s.eps = Estimate{cplx(kNaN, kNaN), kNaN, kNaN};
    s.loss = {kNaN, kNaN, kNaN, kNaN};
    s.m_z = s.m_x = s.eps;
    s.status = "failed";
    s.message = why;
    return s;
  };

  // Best effort: the directory itself may be what failed; aggregate.csv still gets the row.
  const auto record_failure = [](const fs::path& dir, const RunSummary& s) {
    try {
      fs::create_directories(dir);
      write_summary_csv(dir / "summary.csv", s);
    } catch (const std::exception&) {
    }
  };

  const auto run_job = [&](const std::vector<std::size_t>& job) {
    std::optional<TrainState> carry;
    bool broken = false;
    for (std::size_t pos = 0; pos < job.size(); ++pos) {
      auto& p = points[job[pos]];
      if (broken) {
        p.summary = failed(p, "skipped: previous point of the chain failed");
        record_failure(p.dir, p.summary);
        continue;
      }
      try {
        auto c = config_at(p);
        PointResult r;
        switch (cfg.chaining) {
          case Chaining::independent: r = run_point(c, p.dir, std::nullopt, PointKind::configured); break;
          case Chaining::warm_forward:
          case Chaining::warm_backward: r = run_point(c, p.dir, carry, PointKind::warm); break;
          case Chaining::combined_fixed_then_warm:
            if (pos == 0) {
              c.schedule.mode = ScheduleMode::fixed_start;
              r = run_point(c, p.dir, std::nullopt, PointKind::configured);
            } else {
              r = run_point(c, p.dir, carry, PointKind::warm);
            }
            break;
        }
        p.summary = r.summary;
        carry = std::move(r.state);
      } catch (const std::exception& e) {
        p.summary = failed(p, e.what());
        record_failure(p.dir, p.summary);
        broken = true;
      }
    }
  };

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(jobs[j]);
  };
  const int nthreads = std::min<int>(workers, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  bool any_failed = false;
  auto os = open_out(out / "aggregate.csv");
  os << "point," << join(summary_header()) << "\n";
  for (const auto& p : points) {
    os << p.dir.filename().string() << "," << join(summary_fields(p.summary)) << "\n";
    any_failed = any_failed || p.summary.status == "failed";
  }
  return any_failed ? kExitPartialSweep : kExitOk;
}

// ---------------------------------------------------------------------------------------------
// Landscape and observables

int cmd_landscape(const LandscapeConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  write_json(out / "config.resolved.json", json{{"landscape", to_json(cfg)}});
  const auto r = scan_landscape(cfg);
  {
    auto os = open_out(out / "landscape.csv");
    write_landscape_csv(os, r);
  }
  auto os = open_out(out / "landscape_report.txt");
  write_landscape_report(os, r);
  return kExitOk;
}

int cmd_observables(const RunConfig& cfg, const fs::path& out, const std::string& snapshot) {
  cfg.validate();
  fs::create_directories(out);
  RunConfig resolved = cfg;
  resolved.output.directory = out.string();
  json side = to_json(resolved);
  side["snapshot"] = snapshot;
  write_json(out / "config.resolved.json", side);

  const auto state = state_from_snapshot(cfg, snapshot);
  const auto ham = cfg.hamiltonian();
  const VarianceOptimizer vo(ham, cfg.optimizer, cfg.estimator);
  const auto rep = vo.report(state);
  const auto pair = state.pair();
  const int n = ham.num_sites();

  std::vector<std::pair<std::string, ObservableEstimate>> rows;
  ObservableEstimate e;
  e.lr = rep.eps ? *rep.eps : Estimate{cplx(kNaN, kNaN), kNaN, kNaN};
  e.rr = Estimate{cplx(kNaN, kNaN), kNaN, kNaN};
  rows.emplace_back("eps", e);
  ObservableEstimate loss;
  loss.lr = Estimate{rep.loss.total, rep.loss.stderr, 0.0};
  loss.rr = loss.lr;
  rows.emplace_back("loss", loss);
  for (const auto& [name, axis] : {std::pair{"M_z", Axis::z}, std::pair{"M_x", Axis::x}}) {
    rows.emplace_back(name, biorthogonal_observable(pair, magnetization_operator(n, axis), rep.right));
  }
  write_observables_csv(out / "observables.csv", rows);
  if (has_shells(ham.lattice())) {
    const auto shells = shell_table(ham.lattice());
    for (auto mode : {ExpectationMode::lr, ExpectationMode::rr}) {
      auto os = open_out(out / (mode == ExpectationMode::lr ? "correlation_lr.csv" : "correlation_rr.csv"));
      write_correlation_csv(os, connected_correlation_z(pair, rep.right, shells, mode, cfg.observables.floor));
    }
  }
  return kExitOk;
}

}  // namespace nhvmc
