#include "commands.hpp"

#include <unistd.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "superlase/errors.hpp"

namespace superlase::cli {
namespace {

namespace fs = std::filesystem;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// RFC 4180: quote fields holding a separator, quote or line break.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

/// Files produced by a command, written only once everything succeeded.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
  void add_json(std::string name, const Json& j) { add(std::move(name), j.dump(2) + "\n"); }
};

void commit(const fs::path& dir, const Artifacts& a) {
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& [tmp, final_path] : staged) fs::remove(tmp, ec);
  };
  try {
    for (const auto& [name, content] : a.files) {
      const fs::path target = dir / name;
      fs::create_directories(target.parent_path());
      const fs::path tmp =
          target.parent_path() / ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
      staged.emplace_back(tmp, target);
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      os << content;
      os.close();
      if (!os) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    for (const auto& [tmp, target] : staged) fs::rename(tmp, target);
  } catch (...) {
    cleanup();
    throw;
  }
}

Json config_for_hash(const RunConfig& c) {
  auto tree = to_tree(c);
  tree.erase("output");  // where results go does not change them
  return tree;
}

// ---------------------------------------------------------------- commands

Json ensemble_json(const ClusterEnsemble& e) {
  Json a = Json::array();
  for (const auto& c : e.clusters())
    a.push_back(Json{{"detuning", c.detuning}, {"coupling", c.coupling}, {"population", c.population}});
  return a;
}

Json report_json(const SteadyStateReport& r) {
  // Wall time is left out so that repeated runs give identical files.
  return Json{{"converged", r.converged},       {"method", r.method},
              {"steps", r.steps},               {"rhs_evaluations", r.rhs_evaluations},
              {"newton_iterations", r.newton_iterations}, {"final_residual", r.final_residual},
              {"simulated_time", r.simulated_time}};
}

Json run_steady(const RunConfig& cfg, const std::string& prefix, Artifacts& out) {
  const auto run = solve_steady(cfg.model);
  const auto labels = run.state.layout().labels();
  const auto values = run.state.values();
  std::string csv = "moment,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) csv += csv_field(labels[i]) + "," + num(values[i]) + "\n";
  out.add(prefix + "steady.csv", std::move(csv));

  Json clusters = ensemble_json(run.ensemble);
  for (std::size_t m = 0; m < run.ensemble.size(); ++m) clusters[m]["excited_population"] = run.state.population(m);
  Json summary{{"photon_number", run.state.photon_number()}, {"report", report_json(run.report)}, {"clusters", clusters}};
  out.add_json(prefix + "steady.json", summary);
  return Json{{"photon_number", run.state.photon_number()}, {"method", run.report.method}};
}

Json run_spectrum_cmd(const RunConfig& cfg, const std::string& prefix, Artifacts& out) {
  const auto run = run_spectrum(cfg.model);
  const auto& s = run.spectrum;
  const double vmax = *std::max_element(s.values.begin(), s.values.end());
  const double scale = cfg.output.normalize && vmax > 0.0 ? 1.0 / vmax : 1.0;

  std::string csv = "omega_over_kappa,S\n";
  for (std::size_t i = 0; i < s.frequencies.size(); ++i) csv += num(s.frequencies[i]) + "," + num(scale * s.values[i]) + "\n";
  out.add(prefix + "spectrum.csv", std::move(csv));

  Json peaks = Json::array();
  const auto counted = count_peaks(s, cfg.model.grid.prominence_frac);
  for (const auto& p : s.peaks)
    peaks.push_back(Json{{"position", p.position}, {"height", p.height}, {"prominence", p.prominence}});
  Json summary{{"photon_number", run.steady.state.photon_number()},
               {"weight", s.weight},
               {"fwhm", opt_json(s.fwhm)},
               {"lineshift", opt_json(s.lineshift)},
               {"multimodal", !s.fwhm.has_value()},
               {"peak_count", counted},
               {"peaks", peaks},
               {"base_points", s.base_points},
               {"points", s.frequencies.size()},
               {"refinement_passes", s.refinement_passes},
               {"max_S", vmax},
               {"normalized", cfg.output.normalize},
               {"warnings", s.warnings},
               {"steady_state", report_json(run.steady.report)}};
  out.add_json(prefix + "spectrum.json", summary);
  return Json{{"peak_count", counted}, {"fwhm", opt_json(s.fwhm)}, {"weight", s.weight}};
}

Json run_sweep_cmd(const RunConfig& cfg, unsigned workers, const std::string& prefix, Artifacts& out) {
  if (cfg.sweep.axes.empty()) throw PreconditionError("sweep.axes is empty");
  const auto result = sweep(cfg.model, cfg.sweep.axes, SweepOptions{workers, cfg.sweep.max_points});
  std::string csv;
  for (const auto& a : result.axes) csv += std::string(to_string(a.axis)) + ",";
  csv += "photon_number,fwhm,lineshift,peak_count,weight,multimodal,converged,error\n";
  std::size_t failed = 0;
  for (const auto& r : result.records) {
    for (double p : r.parameters) csv += num(p) + ",";
    const auto& x = r.result;
    failed += x.converged ? 0 : 1;
    csv += (x.converged ? num(x.photon_number) : "") + "," + (x.fwhm ? num(*x.fwhm) : "") + "," +
           (x.lineshift ? num(*x.lineshift) : "") + "," + (x.converged ? std::to_string(x.peak_count) : "") + "," +
           (x.converged ? num(x.weight) : "") + "," + (x.multimodal() ? "true" : "false") + "," +
           (x.converged ? "true" : "false") + "," + csv_field(x.error) + "\n";
  }
  out.add(prefix + "sweep.csv", std::move(csv));
  return Json{{"points", result.records.size()}, {"failed", failed}};
}

Json run_critical_cmd(const RunConfig& cfg, unsigned workers, const std::string& prefix, Artifacts& out) {
  const auto& cp = cfg.critical_pump;
  CriticalPumpOptions opts;
  opts.prescan_points = cp.prescan_points;
  opts.workers = workers;
  const auto r = critical_pump(cfg.model, cp.r_min, cp.r_max, cp.tolerance, opts);
  std::string csv = "R,peak_count\n";
  for (const auto& [rate, count] : r.evaluated) csv += num(rate) + "," + std::to_string(count) + "\n";
  out.add(prefix + "critical_pump_scan.csv", std::move(csv));
  const bool below = r.status == CriticalPumpResult::Status::below_range;
  Json summary{{"status", below ? "below-range" : "bracketed"},
               {"critical_pump", r.critical_pump},
               {"bracket", Json::array({r.bracket_lo, r.bracket_hi})},
               {"monotone_prescan", r.monotone_prescan},
               {"evaluations", r.evaluations}};
  out.add_json(prefix + "critical_pump.json", summary);
  return summary;
}

Json run_crosscorr_cmd(const RunConfig& cfg, unsigned workers, const std::string& prefix, Artifacts& out) {
  if (cfg.crosscorr.pumps.empty()) throw PreconditionError("crosscorr.pumps is empty");
  const auto e = cfg.model.ensemble.build();
  const auto scan = cross_correlation_scan(e, cfg.model.rates, cfg.crosscorr.pumps, cfg.model.solver, workers);
  std::string full = "R,m,j,detuning_m,detuning_j,re,im,abs,arg\n";
  std::string trace = "R,converged,re,im,abs,error\n";
  std::size_t failed = 0;
  for (const auto& p : scan.points) {
    failed += p.converged ? 0 : 1;
    trace += num(p.pump) + "," + (p.converged ? "true," : "false,") + (p.converged ? num(p.traced.real()) : "") + "," +
             (p.converged ? num(p.traced.imag()) : "") + "," + (p.converged ? num(std::abs(p.traced)) : "") + "," +
             csv_field(p.error) + "\n";
    if (!p.converged) continue;
    for (std::size_t m = 0; m < p.clusters; ++m) {
      for (std::size_t j = 0; j < p.clusters; ++j) {
        const auto z = p.at(m, j);
        full += num(p.pump) + "," + std::to_string(m) + "," + std::to_string(j) + "," + num(e[m].detuning) + "," +
                num(e[j].detuning) + "," + num(z.real()) + "," + num(z.imag()) + "," + num(std::abs(z)) + "," +
                num(std::arg(z)) + "\n";
      }
    }
  }
  out.add(prefix + "crosscorr.csv", std::move(full));
  out.add(prefix + "crosscorr_trace.csv", std::move(trace));
  return Json{{"points", scan.points.size()}, {"failed", failed}, {"first", scan.first}, {"central", scan.central}};
}

Json execute(Command cmd, const RunConfig& cfg, unsigned workers, const std::string& prefix, Artifacts& out) {
  cfg.validate();
  Json summary;
  switch (cmd) {
    case Command::steady: summary = run_steady(cfg, prefix, out); break;
    case Command::spectrum: summary = run_spectrum_cmd(cfg, prefix, out); break;
    case Command::sweep: summary = run_sweep_cmd(cfg, workers, prefix, out); break;
    case Command::critical_pump: summary = run_critical_cmd(cfg, workers, prefix, out); break;
    case Command::crosscorr: summary = run_crosscorr_cmd(cfg, workers, prefix, out); break;
  }
  out.add_json(prefix + "config.json", to_tree(cfg));
  return summary;
}

Json manifest_entry(Command cmd, const RunConfig& cfg) {
  return Json{{"command", to_string(cmd)},
              {"config_hash", "fnv1a64:" + hex(fnv1a(config_for_hash(cfg).dump()))},
              {"seed", cfg.model.ensemble.seed}};
}

int error_exit(std::ostream& err, int status, const std::string& kind, const std::string& message, Json extra = {}) {
  Json e{{"kind", kind}, {"message", message}, {"exit_status", status}};
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) e[k] = v;
  err << Json{{"error", e}}.dump() << std::endl;
  return status;
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::steady: return "steady";
    case Command::spectrum: return "spectrum";
    case Command::sweep: return "sweep";
    case Command::critical_pump: return "critical-pump";
    case Command::crosscorr: return "crosscorr";
  }
  return "?";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Superradiant laser simulator (second-order cumulant moment equations)", "superlase"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kSoftwareVersion);

  std::string config_path, out_dir, preset;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("-c,--config", config_path, "INI or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a config value, section.key=value (repeatable)");
    sub->add_option("-o,--out", out_dir, std::string("output directory (overrides $") + kOutputDirEnv + " and output.dir)");
    sub->add_option("-w,--workers", workers, "worker threads for independent points (0 = logical cores)");
  };
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (auto [name, cmd, help] :
       {std::tuple{"steady", Command::steady, "steady-state moments"},
        std::tuple{"spectrum", Command::spectrum, "cavity output spectrum"},
        std::tuple{"sweep", Command::sweep, "observables on a parameter grid"},
        std::tuple{"critical-pump", Command::critical_pump, "pump at which the spectrum becomes single-peaked"},
        std::tuple{"crosscorr", Command::crosscorr, "inter-cluster coherences versus pump"}}) {
    auto* sub = app.add_subcommand(name, help);
    common(sub, true);
    subs.emplace_back(sub, cmd);
  }
  auto* repro = app.add_subcommand("reproduce", "run a built-in figure preset");
  repro->add_option("id", preset, "figure id")->required()->check(CLI::IsMember(preset_ids()));
  common(repro, false);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kSoftwareVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    return error_exit(err, 2, "usage", e.what());
  }

  try {
    std::vector<Job> jobs;
    bool reproduce = repro->parsed();
    if (reproduce) {
      jobs = preset_jobs(preset);
    } else {
      for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) continue;
        Json tree = config_path.empty() ? Json::object() : load_config_tree(config_path);
        for (const auto& o : overrides) apply_override(tree, o);
        jobs.push_back(Job{"", cmd, from_tree(tree)});
      }
    }
    if (reproduce && !overrides.empty()) {
      for (auto& j : jobs) {
        Json tree = to_tree(j.config);
        for (const auto& o : overrides) apply_override(tree, o);
        j.config = from_tree(tree);
      }
    }

    // Output directory: flag, then environment, then config.
    std::string dir = jobs.front().config.output.dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) dir = env;
    if (!out_dir.empty()) dir = out_dir;
    if (reproduce && out_dir.empty() && !std::getenv(kOutputDirEnv)) dir = preset;
    for (auto& j : jobs) {
      j.config.output.dir = dir;
      j.config.validate();  // every job is checked before any compute starts
    }

    Artifacts artifacts;
    Json summaries = Json::object();
    Json entries = Json::array();
    for (const auto& j : jobs) {
      const std::string prefix = j.name.empty() ? "" : j.name + "/";
      auto s = execute(j.command, j.config, workers, prefix, artifacts);
      auto entry = manifest_entry(j.command, j.config);
      if (!j.name.empty()) entry["job"] = j.name;
      entries.push_back(entry);
      summaries[j.name.empty() ? to_string(j.command) : j.name] = s;
    }
    Json manifest{{"software", "superlase"}, {"version", kSoftwareVersion}};
    if (reproduce) {
      manifest["preset"] = preset;
      manifest["jobs"] = entries;
    } else {
      for (const auto& [k, v] : entries[0].items()) manifest[k] = v;
    }
    Json files = Json::array();
    for (const auto& [name, content] : artifacts.files) files.push_back(name);
    files.push_back("manifest.json");
    manifest["files"] = files;
    artifacts.add_json("manifest.json", manifest);

    commit(dir, artifacts);
    out << Json{{"output_dir", dir}, {"results", summaries}}.dump(2) << "\n";
    return 0;
  } catch (const PreconditionError& e) {
    return error_exit(err, 3, "precondition", e.what());
  } catch (const ConvergenceError& e) {
    return error_exit(err, 4, "convergence", e.what(),
                      Json{{"time_reached", e.time_reached()}, {"last_residual", e.last_residual()}});
  } catch (const IntegrationError& e) {
    return error_exit(err, 4, "integration", e.what(), Json{{"time_reached", e.time_reached()}});
  } catch (const SingularMatrixError& e) {
    return error_exit(err, 4, "singular-matrix", e.what(), Json{{"pivot", e.pivot()}});
  } catch (const MultimodalError& e) {
    return error_exit(err, 4, "multimodal", e.what());
  } catch (const std::exception& e) {
    return error_exit(err, 1, "internal", e.what());
  }
}

}  // namespace superlase::cli
