#include "quadtune/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "quadtune/dynamics.hpp"
#include "quadtune/io.hpp"
#include "quadtune/seqlang.hpp"
#include "quadtune/spin.hpp"
#include "quadtune/strain.hpp"

namespace quadtune {

namespace {

constexpr double two_pi = 6.283185307179586;

void print_diagnostics(const std::string& path,
                       const std::vector<ParseDiagnostic>& diags) {
  for (const auto& d : diags) {
    std::cerr << path << ":" << d.line << ":" << d.column << ": "
              << (d.severity == ParseDiagnostic::Severity::error ? "error"
                                                                 : "warning")
              << ": " << d.message;
    if (!d.token.empty() && d.token != "\n") std::cerr << " ('" << d.token << "')";
    std::cerr << "\n";
  }
}

struct LoadedConfig {
  ExperimentConfig cfg;
  std::string text;
};

bool load_config(const CliOptions& opt, LoadedConfig& out) {
  if (opt.config_path.empty()) {
    std::cerr << "quadtune: --config is required for this command\n";
    return false;
  }
  try {
    out.text = read_text(opt.config_path);
  } catch (const std::exception& e) {
    std::cerr << "quadtune: " << e.what() << "\n";
    return false;
  }
  ParseResult res = parse_config(out.text);
  print_diagnostics(opt.config_path, res.diagnostics);
  if (!res.ok()) return false;
  const auto vdiags = validate_config(res.config);
  print_diagnostics(opt.config_path, vdiags);
  for (const auto& d : vdiags)
    if (d.severity == ParseDiagnostic::Severity::error) return false;
  out.cfg = std::move(res.config);
  return true;
}

// resolved output format: --format wins over the config
bool resolve_format(const CliOptions& opt, const ExperimentConfig& cfg,
                    std::string& fmt) {
  fmt = opt.format.empty() ? cfg.output.format : opt.format;
  if (fmt != "csv" && fmt != "json") {
    std::cerr << "quadtune: unknown format '" << fmt << "' (csv or json)\n";
    return false;
  }
  return true;
}

// Tracks outputs and writes the manifest twice: once up front flagged
// incomplete, once after the last output, so interrupted runs are visible.
class ManifestWriter {
 public:
  ManifestWriter(const std::string& command, const CliOptions& opt,
                 const std::string& hashed_bytes, const std::string& prefix)
      : t0_(std::chrono::steady_clock::now()) {
    m_.command = command;
    m_.config_path = opt.config_path;
    m_.config_hash = hash_hex(fnv1a64(hashed_bytes));
    m_.seed = opt.seed;
    m_.version = QUADTUNE_VERSION;
    std::filesystem::create_directories(opt.out_dir);
    path_ = (std::filesystem::path(opt.out_dir) / (prefix + "_manifest.json")).string();
    write();
  }

  std::string dir() const { return std::filesystem::path(path_).parent_path().string(); }

  std::string add(const std::string& filename) {
    const std::string full =
        (std::filesystem::path(dir()) / filename).string();
    m_.outputs.push_back(full);
    return full;
  }

  void finish() {
    m_.complete = true;
    m_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    write();
    std::cout << "wrote " << path_ << "\n";
  }

 private:
  void write() const { write_text(path_, manifest_json(m_).dump(2) + "\n"); }

  RunManifest m_;
  std::string path_;
  std::chrono::steady_clock::time_point t0_;
};

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int nt = std::min(thread_count(), n);
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  const auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nt - 1);
  for (int t = 0; t < nt - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

std::string m_tag(double m) {
  if (m == 1.5) return "p32";
  if (m == 0.5) return "p12";
  if (m == -0.5) return "m12";
  return "m32";
}

int numeric_failure(const std::exception& e) {
  std::cerr << "quadtune: " << e.what() << "\n";
  return exit_numeric_failure;
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("QUADTUNE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(std::min(v, 256L));
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

int cmd_spectrum(const CliOptions& opt) {
  LoadedConfig lc;
  if (!load_config(opt, lc)) return exit_config_error;
  const ExperimentConfig& cfg = lc.cfg;
  std::string fmt;
  if (!resolve_format(opt, cfg, fmt)) return exit_config_error;

  try {
    const double f0 = config_f0_hz(cfg);
    const QuadrupoleCoupling qc = config_fq(cfg);

    EndorConfig base;
    base.efficiency = cfg.endor.efficiency;
    base.rf_duration_s = cfg.endor.rf_duration_s;
    if (cfg.endor.rf_start_hz == 0.0 && cfg.endor.rf_stop_hz == 0.0) {
      // cover all three lines plus broadening tails and the pulse bandwidth
      const double half = 0.75 * std::abs(qc.fq_hz) +
                          6.0 * cfg.broadening.spread_hz +
                          10.0 / base.rf_duration_s;
      base.rf_start_hz = f0 - half;
      base.rf_stop_hz = f0 + half;
    } else {
      base.rf_start_hz = cfg.endor.rf_start_hz;
      base.rf_stop_hz = cfg.endor.rf_stop_hz;
    }

    const double targets[4] = {1.5, 0.5, -0.5, -1.5};
    std::vector<Spectrum> spectra(4);
    parallel_for(4, [&](int i) {
      EndorConfig ec = base;
      ec.ionize_m = ec.read_m = targets[i];
      spectra[i] = synthesize_spectrum(ec, cfg.system, f0, qc.fq_hz,
                                       cfg.field.theta_rad, cfg.broadening,
                                       cfg.endor.points);
    });

    ManifestWriter manifest("spectrum", opt, lc.text, cfg.output.prefix);
    for (int i = 0; i < 4; ++i) {
      const Spectrum& s = spectra[i];
      if (!s.warning.empty())
        std::cerr << "quadtune: warning: " << s.warning << " (ionize m = "
                  << targets[i] << ")\n";
      const std::string stem = cfg.output.prefix + "_spectrum_" + m_tag(targets[i]);
      CsvTable table;
      table.columns = {"frequency_hz", "signal"};
      table.rows.reserve(s.frequency_hz.size());
      for (size_t p = 0; p < s.frequency_hz.size(); ++p)
        table.rows.push_back({s.frequency_hz[p], s.signal[p]});
      write_csv(manifest.add(stem + ".csv"), table);
      write_text(manifest.add(stem + ".json"),
                 spectrum_json(s, cfg.field.b0_t).dump(2) + "\n");
    }
    manifest.finish();
    return exit_ok;
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
}

int cmd_sweep(const CliOptions& opt) {
  LoadedConfig lc;
  if (!load_config(opt, lc)) return exit_config_error;
  const ExperimentConfig& cfg = lc.cfg;
  std::string fmt;
  if (!resolve_format(opt, cfg, fmt)) return exit_config_error;
  if (!cfg.sweep.present) {
    std::cerr << "quadtune: the sweep command needs a [sweep] section\n";
    return exit_config_error;
  }
  const SweepSection& sw = cfg.sweep;
  if (sw.variable == "strain" && cfg.strain.mode != "stack-100" &&
      cfg.strain.mode != "stack-111") {
    std::cerr << "quadtune: a strain sweep needs strain mode stack-100 or "
                 "stack-111 (swept value = in-plane strain)\n";
    return exit_config_error;
  }

  try {
    const SpinSystem& sys = cfg.system;
    const double theta = cfg.field.theta_rad;
    const double kGrid[3] = {1.5, 0.5, -0.5};

    // one row per (point, transition): variable, m_hi, exact, perturbative
    CsvTable table;
    table.columns = {sw.variable == "theta" ? "theta_rad"
                     : sw.variable == "B0"  ? "b0_t"
                                            : "strain",
                     "transition_m_hi", "exact_shift_hz", "perturbative_shift_hz"};
    table.rows.resize(static_cast<size_t>(sw.points) * 3);

    if (sw.variable == "theta") {
      const double f0 = config_f0_hz(cfg);
      const double fq = config_fq(cfg).fq_hz;
      const auto shifts = angular_sweep(sys, f0, fq, sw.points, sw.start, sw.stop);
      for (size_t i = 0; i < shifts.size(); ++i)
        table.rows[i] = {shifts[i].theta_rad, shifts[i].m_hi, shifts[i].exact_hz,
                         shifts[i].perturbative_hz};
    } else if (sw.variable == "strain") {
      const double f0 = config_f0_hz(cfg);
      parallel_for(sw.points, [&](int p) {
        const double v =
            sw.start + (sw.stop - sw.start) * p / double(sw.points - 1);
        ExperimentConfig point = cfg;
        point.strain.eps_parallel = v;
        point.strain.eps_perp_given = false;  // re-derive from elasticity
        const double fq = config_fq(point).fq_hz;
        const auto table_v = transition_frequencies(
            build_axial_hamiltonian(sys, f0, fq, theta));
        for (int t = 0; t < 3; ++t) {
          const Transition& tr = table_v.by_m(kGrid[t]);
          table.rows[size_t(p) * 3 + t] = {
              v, kGrid[t], tr.frequency_hz - f0,
              first_order_shift(fq, theta, kGrid[t]) +
                  second_order_shift(fq, f0, theta, kGrid[t])};
        }
      });
    } else {  // B0
      const double fq = config_fq(cfg).fq_hz;
      parallel_for(sw.points, [&](int p) {
        const double b0 =
            sw.start + (sw.stop - sw.start) * p / double(sw.points - 1);
        const double f0 =
            larmor_frequency(sys, make_field(b0, cfg.field.orientation));
        const auto table_v = transition_frequencies(
            build_axial_hamiltonian(sys, f0, fq, theta));
        for (int t = 0; t < 3; ++t) {
          const Transition& tr = table_v.by_m(kGrid[t]);
          table.rows[size_t(p) * 3 + t] = {
              b0, kGrid[t], tr.frequency_hz - f0,
              first_order_shift(fq, theta, kGrid[t]) +
                  second_order_shift(fq, f0, theta, kGrid[t])};
        }
      });
    }

    ManifestWriter manifest("sweep", opt, lc.text, cfg.output.prefix);
    const std::string stem =
        cfg.output.prefix + "_sweep_" + (sw.variable == "B0" ? "b0" : sw.variable);
    if (fmt == "csv") {
      write_csv(manifest.add(stem + ".csv"), table);
    } else {
      nlohmann::ordered_json j;
      j["kind"] = "sweep";
      j["variable"] = sw.variable;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row[table.columns[0]] = r[0];
        row["transition"] = transition_m_label(r[1]);
        row["exact_shift_hz"] = r[2];
        row["perturbative_shift_hz"] = r[3];
        rows.push_back(std::move(row));
      }
      j["rows"] = std::move(rows);
      write_text(manifest.add(stem + ".json"), j.dump(2) + "\n");
    }
    manifest.finish();
    return exit_ok;
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
}

int cmd_decay(const CliOptions& opt) {
  LoadedConfig lc;
  if (!load_config(opt, lc)) return exit_config_error;
  const ExperimentConfig& cfg = lc.cfg;
  std::string fmt;
  if (!resolve_format(opt, cfg, fmt)) return exit_config_error;
  if (!cfg.noise.present) {
    std::cerr << "quadtune: the decay command needs a [noise] section\n";
    return exit_config_error;
  }
  const NoiseSection& ns = cfg.noise;

  try {
    NoiseModel noise;
    noise.alpha = ns.alpha;
    noise.amplitude = ns.amplitude;
    noise.omega_low = two_pi * ns.f_low_hz;
    noise.omega_high = two_pi * ns.f_high_hz;
    if (ns.t2_calibration_s > 0.0)
      noise = calibrate_noise(ns.alpha, ns.t2_calibration_s, ns.n_calibration,
                              noise.omega_low, noise.omega_high);

    ManifestWriter manifest("decay", opt, lc.text, cfg.output.prefix);
    CsvTable table;
    table.columns = {"n_pulses", "t_s", "amplitude"};
    nlohmann::ordered_json report;
    report["model"] = "t2-scaling";

    if (noise.amplitude <= 0.0) {
      // no dephasing: unit coherence everywhere, nothing to fit
      for (int n : ns.n_pulses)
        for (int k = 1; k <= ns.t_points; ++k)
          table.rows.push_back({double(n), k * 1e-3, 1.0});
      report["t2"] = nlohmann::ordered_json::array();
      report["converged"] = false;
      report["reason"] = "zero noise amplitude";
    } else {
      const size_t nn = ns.n_pulses.size();
      std::vector<double> t2(nn);
      std::vector<DecayCurve> curves(nn);
      parallel_for(static_cast<int>(nn), [&](int i) {
        const int n = ns.n_pulses[i];
        t2[i] = coherence_time(noise, n);
        std::vector<double> grid(ns.t_points);
        for (int k = 0; k < ns.t_points; ++k)
          grid[k] = 2.0 * t2[i] * (k + 1) / ns.t_points;
        curves[i] = coherence_decay(noise, n, grid);
      });
      for (size_t i = 0; i < nn; ++i)
        for (size_t k = 0; k < curves[i].time_s.size(); ++k)
          table.rows.push_back({double(ns.n_pulses[i]), curves[i].time_s[k],
                                curves[i].amplitude[k]});

      nlohmann::ordered_json t2_rows = nlohmann::ordered_json::array();
      for (size_t i = 0; i < nn; ++i) {
        nlohmann::ordered_json row;
        row["n_pulses"] = ns.n_pulses[i];
        row["t2_s"] = t2[i];
        t2_rows.push_back(std::move(row));
      }
      report["t2"] = std::move(t2_rows);

      std::vector<std::pair<double, double>> points;
      for (size_t i = 0; i < nn; ++i)
        points.emplace_back(double(ns.n_pulses[i]), t2[i]);
      std::sort(points.begin(), points.end());
      points.erase(std::unique(points.begin(), points.end()), points.end());
      if (points.size() >= 2) {
        const FitResult fit = fit_scaling(points);
        report["fit"] = fit_result_json(fit);
        report["converged"] = fit.converged;
        std::cout << "T2(n) ~ n^" << fit.estimate(0) << " (sigma "
                  << fit.sigma(0) << ")\n";
      } else {
        report["converged"] = false;
        report["reason"] = "need at least two distinct pulse counts";
      }
    }

    const std::string stem = cfg.output.prefix + "_decay";
    if (fmt == "csv") {
      write_csv(manifest.add(stem + ".csv"), table);
    } else {
      nlohmann::ordered_json j;
      j["kind"] = "decay";
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row["n_pulses"] = int(r[0]);
        row["t_s"] = r[1];
        row["amplitude"] = r[2];
        rows.push_back(std::move(row));
      }
      j["rows"] = std::move(rows);
      write_text(manifest.add(stem + ".json"), j.dump(2) + "\n");
    }
    write_text(manifest.add(cfg.output.prefix + "_decay_fit.json"),
               report.dump(2) + "\n");
    manifest.finish();
    return exit_ok;
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
}

namespace {

// named numeric column lookup; throws invalid_argument (schema) when absent
size_t require_column(const CsvTable& t, const std::string& path,
                      const std::string& name) {
  for (size_t c = 0; c < t.columns.size(); ++c)
    if (t.columns[c] == name) return c;
  throw std::invalid_argument(path + ": missing required column '" + name + "'");
}

}  // namespace

int cmd_fit(const CliOptions& opt) {
  // config is optional here: it supplies the spin system, f0 and the output
  // prefix; without it the defaults apply
  ExperimentConfig cfg;
  std::string hashed;
  if (!opt.config_path.empty()) {
    LoadedConfig lc;
    if (!load_config(opt, lc)) return exit_config_error;
    cfg = std::move(lc.cfg);
    hashed = std::move(lc.text);
  }
  if (opt.model != "gn" && opt.model != "fq-angular" && opt.model != "scaling") {
    std::cerr << "quadtune: unknown fit model '" << opt.model
              << "' (gn, fq-angular or scaling)\n";
    return exit_config_error;
  }
  if (opt.data_files.empty()) {
    std::cerr << "quadtune: the fit command needs at least one data file\n";
    return exit_schema_mismatch;
  }

  // slurp phase: unreadable data files are a data problem, not a numeric one
  std::vector<std::string> contents;
  try {
    for (const auto& f : opt.data_files) contents.push_back(read_text(f));
  } catch (const std::exception& e) {
    std::cerr << "quadtune: " << e.what() << "\n";
    return exit_schema_mismatch;
  }
  if (hashed.empty())
    for (const auto& c : contents) hashed += c;

  // parse + fit: invalid_argument = schema/content, runtime_error = numeric
  FitResult result;
  try {
    if (opt.model == "gn") {
      std::vector<Spectrum> spectra;
      std::vector<double> b0;
      for (size_t i = 0; i < contents.size(); ++i) {
        const auto j = nlohmann::json::parse(contents[i], nullptr, false);
        if (j.is_discarded())
          throw std::invalid_argument(opt.data_files[i] + ": not valid json");
        double b = 0.0;
        spectra.push_back(spectrum_from_json(j, b));
        b0.push_back(b);
      }
      result = fit_gn(spectra, b0, cfg.system);
    } else if (opt.model == "fq-angular") {
      std::vector<std::pair<double, double>> shifts;
      for (size_t i = 0; i < contents.size(); ++i) {
        const CsvTable t = parse_csv(contents[i], opt.data_files[i]);
        const size_t ct = require_column(t, opt.data_files[i], "theta_rad");
        const size_t cs = require_column(t, opt.data_files[i], "shift_hz");
        for (const auto& r : t.rows) shifts.emplace_back(r[ct], r[cs]);
      }
      if (shifts.empty())
        throw std::invalid_argument("no data rows in the input files");
      result = fit_fq_angular(shifts, opt.order, config_f0_hz(cfg), cfg.system);
    } else {
      std::vector<std::pair<double, double>> points;
      for (size_t i = 0; i < contents.size(); ++i) {
        const CsvTable t = parse_csv(contents[i], opt.data_files[i]);
        const size_t cn = require_column(t, opt.data_files[i], "n_pulses");
        const size_t ct = require_column(t, opt.data_files[i], "t2_s");
        for (const auto& r : t.rows) points.emplace_back(r[cn], r[ct]);
      }
      if (points.empty())
        throw std::invalid_argument("no data rows in the input files");
      result = fit_scaling(points);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "quadtune: " << e.what() << "\n";
    return exit_schema_mismatch;
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }

  try {
    ManifestWriter manifest("fit", opt, hashed, cfg.output.prefix);
    write_text(manifest.add(cfg.output.prefix + "_fit_" + opt.model + ".json"),
               fit_result_json(result).dump(2) + "\n");
    manifest.finish();
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
  for (int i = 0; i < result.estimate.size(); ++i)
    std::cout << result.names[i] << " = " << result.estimate(i) << " +- "
              << result.sigma(i) << "\n";
  if (!result.converged) std::cerr << "quadtune: warning: fit did not converge\n";
  return exit_ok;
}

int cmd_forecast(const CliOptions& opt) {
  LoadedConfig lc;
  if (!load_config(opt, lc)) return exit_config_error;
  const ExperimentConfig& cfg = lc.cfg;
  if (cfg.strain.mode != "stack-100" && cfg.strain.mode != "stack-111") {
    std::cerr << "quadtune: the forecast command needs strain mode stack-100 "
                 "or stack-111 (bipolar in-plane strain amplitude)\n";
    return exit_config_error;
  }

  try {
    const StackOrientation geometry = cfg.strain.mode == "stack-100"
                                          ? StackOrientation::s100
                                          : StackOrientation::s111;
    const double eps = std::abs(cfg.strain.eps_parallel);
    const double span = piezo_shift_forecast(eps, cfg.tensor_s, geometry, cfg.system);
    const double fq = config_fq(cfg).fq_hz;

    nlohmann::ordered_json j;
    j["kind"] = "forecast";
    j["geometry"] = cfg.strain.mode;
    j["strain_amplitude"] = eps;
    j["fq_hz"] = fq;
    j["outer_span_hz"] = span;

    ManifestWriter manifest("forecast", opt, lc.text, cfg.output.prefix);
    write_text(manifest.add(cfg.output.prefix + "_forecast.json"),
               j.dump(2) + "\n");
    manifest.finish();
    std::cout << "outer transition tuning span: " << span * 1e-3
              << " kHz for strain amplitude " << eps << "\n";
    return exit_ok;
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
}

int run_command(const std::string& name, const CliOptions& opt) {
  if (name == "spectrum") return cmd_spectrum(opt);
  if (name == "sweep") return cmd_sweep(opt);
  if (name == "decay") return cmd_decay(opt);
  if (name == "fit") return cmd_fit(opt);
  if (name == "forecast") return cmd_forecast(opt);
  std::cerr << "quadtune: unknown command '" << name << "'\n";
  return exit_config_error;
}

}  // namespace quadtune
