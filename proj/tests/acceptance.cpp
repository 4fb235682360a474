// Release gate: one self-contained check per numbered criterion, each
// printing exactly one PASS/FAIL line with the measured value and runtime.
// Exit status is the number of failed criteria.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "quadtune/dynamics.hpp"
#include "quadtune/endor.hpp"
#include "quadtune/fit.hpp"
#include "quadtune/seqlang.hpp"
#include "quadtune/spin.hpp"
#include "quadtune/strain.hpp"

using namespace quadtune;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
  double ms = 0.0;
};

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Elasticity: eps_perp(100) from eps_par = -3.8e-4 within 2% of 2.9e-4.
Outcome criterion_elasticity() {
  constexpr double eps_par = -3.8e-4;
  constexpr double target = 2.9e-4;
  constexpr double rel_tol = 0.02;
  constexpr double limit_ms = 1.0;

  const auto t0 = Clock::now();
  const Eigen::Matrix3d eps = biaxial_thermal_strain(eps_par, StackOrientation::s100);
  const double ms = elapsed_ms(t0);

  const double eps_perp = eps(2, 2);
  const bool pass = std::abs(eps_perp - target) <= rel_tol * target && ms < limit_ms;
  return {pass, fmt("eps_perp = %.4e (target %.1e +-2%%)  [%.3f ms < %g ms]",
                    eps_perp, target, ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 2. [100] coupling 76 kHz +-7%; S11 inverted to 1e-6 on noiseless data.
Outcome criterion_coupling_100() {
  constexpr double target_fq = 76e3;
  constexpr double rel_tol = 0.07;
  constexpr double inverse_tol = 1e-6;
  constexpr double limit_ms = 1.0;
  const SpinSystem sys;
  const GradientElasticTensor s{1.5e22, 6.8e22};

  const auto t0 = Clock::now();
  const Eigen::Matrix3d eps100 = biaxial_thermal_strain(-3.8e-4, StackOrientation::s100);
  const Eigen::Matrix3d eps111 =
      uniaxial_strain(2.9e-4, -3.8e-4, Eigen::Vector3d(1, 1, 1).normalized());
  const double fq100 = coupling_fq(efg_from_strain(eps100, s), sys).fq_hz;
  const double fq111 = coupling_fq(efg_from_strain(eps111, s), sys).fq_hz;
  const ExtractedS rec = extract_s(fq100, fq111, eps100, eps111, sys);
  const double ms = elapsed_ms(t0);

  const bool fq_ok = std::abs(std::abs(fq100) - target_fq) <= rel_tol * target_fq;
  const double s11_err = std::abs(rec.s11 - s.s11) / s.s11;
  const bool pass = fq_ok && s11_err <= inverse_tol && ms < limit_ms;
  return {pass, fmt("|f_Q| = %.2f kHz (target 76 +-7%%), S11 error %.1e  [%.3f ms < %g ms]",
                    std::abs(fq100) / 1e3, s11_err, ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 3. [111] coupling in [230, 255] kHz; S44 inverted from 255 kHz lands in
//    the 6.8(20)e22 interval.
Outcome criterion_coupling_111() {
  constexpr double band_lo = 230e3, band_hi = 255e3;
  constexpr double s44_lo = 4.8e22, s44_hi = 8.8e22;
  const SpinSystem sys;
  const GradientElasticTensor s{1.5e22, 6.8e22};
  const Eigen::Vector3d n111 = Eigen::Vector3d(1, 1, 1).normalized();

  // measured film strains on both geometries
  const Eigen::Matrix3d eps100 = biaxial_thermal_strain(-3.8e-4, 2.9e-4, StackOrientation::s100);
  const Eigen::Matrix3d eps111 = uniaxial_strain(2.9e-4, -3.8e-4, n111);
  const double fq111 = coupling_fq(efg_from_strain(eps111, s), sys).fq_hz;

  const ExtractedS rec = extract_s(76e3, std::copysign(255e3, fq111), eps100, eps111, sys);

  const bool band_ok = std::abs(fq111) >= band_lo && std::abs(fq111) <= band_hi;
  const bool s44_ok = rec.s44 >= s44_lo && rec.s44 <= s44_hi;
  return {band_ok && s44_ok,
          fmt("|f_Q| = %.2f kHz (band [230, 255]), S44 = %.2e (interval [4.8e22, 8.8e22])",
              std::abs(fq111) / 1e3, rec.s44)};
}

// ---------------------------------------------------------------------------
// 4. Perturbative formulas vs exact diagonalization over the full grid;
//    first- and second-order zero angles.
Outcome criterion_oracle_equivalence() {
  constexpr double bound1 = 2.0;   // x f_Q^2/f0
  constexpr double bound2 = 5.0;   // x f_Q^3/f0^2
  constexpr double magic_deg = 54.7356, magic_tol_deg = 0.01;
  constexpr double zero2_deg = 70.529, zero2_tol_deg = 0.05;
  constexpr double limit_ms = 1000.0;
  const SpinSystem sys;
  const double f0 = 2.55e6;

  const auto t0 = Clock::now();
  double worst1 = 0.0, worst2 = 0.0;
  for (double ratio : {0.01, 0.05, 0.1}) {
    const double fq = ratio * f0;
    for (int i = 0; i <= 180; ++i) {
      const double th = i * 0.5 * kPi / 180.0;
      const TransitionTable t = transition_frequencies(build_axial_hamiltonian(sys, f0, fq, th));
      for (double m : {1.5, 0.5, -0.5}) {
        const double exact = t.by_m(m).frequency_hz - f0;
        const double s1 = first_order_shift(fq, th, m);
        const double s2 = second_order_shift(fq, f0, th, m);
        worst1 = std::max(worst1, std::abs(exact - s1) / (fq * fq / f0));
        worst2 = std::max(worst2, std::abs(exact - s1 - s2) / (fq * fq * fq / (f0 * f0)));
      }
    }
  }

  // zero crossings of the perturbative shifts by bisection
  const auto bisect = [](auto f, double lo, double hi) {
    double flo = f(lo);
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      if ((f(mid) < 0) == (flo < 0)) { lo = mid; flo = f(mid); }
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double fq = 0.05 * f0;
  const double magic = bisect([&](double th) { return first_order_shift(fq, th, 1.5); },
                              45.0 * kPi / 180.0, 65.0 * kPi / 180.0) * 180.0 / kPi;
  const double zero2 = bisect([&](double th) { return second_order_shift(fq, f0, th, 0.5); },
                              66.0 * kPi / 180.0, 77.0 * kPi / 180.0) * 180.0 / kPi;
  const double ms = elapsed_ms(t0);

  const bool pass = worst1 < bound1 && worst2 < bound2 &&
                    std::abs(magic - magic_deg) <= magic_tol_deg &&
                    std::abs(zero2 - zero2_deg) <= zero2_tol_deg && ms < limit_ms;
  return {pass, fmt("worst o1 %.3f<2, o2 %.3f<5; zeros %.4f/%.3f deg  [%.0f ms < %g ms]",
                    worst1, worst2, magic, zero2, ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 5. Inner-line second-order shift at f_Q = 255 kHz, f0 = 2.55 MHz, 90 deg.
Outcome criterion_second_order_observable() {
  constexpr double target = 1.20e3;
  constexpr double rel_tol = 0.05;
  const SpinSystem sys;
  const double f0 = 2.55e6, fq = 255e3, th = kPi / 2.0;

  const double pert = second_order_shift(fq, f0, th, 0.5);
  const double exact =
      transition_frequencies(build_axial_hamiltonian(sys, f0, fq, th)).by_m(0.5).frequency_hz -
      f0;
  const bool pass = std::abs(std::abs(pert) - target) <= rel_tol * target &&
                    std::abs(std::abs(exact) - target) <= rel_tol * target;
  return {pass, fmt("|shift| = %.2f Hz perturbative, %.2f Hz exact (target 1200 +-5%%)",
                    std::abs(pert), std::abs(exact))};
}

// ---------------------------------------------------------------------------
// 6. Spectra: unstrained -> one dip per spectrum within 1 Hz of f0;
//    strained m = 1/2 ionization -> two dips.
Outcome criterion_spectra() {
  constexpr double center_tol_hz = 1.0;
  constexpr double limit_ms = 5000.0;
  const SpinSystem sys;
  const double f0 = 2.55e6;
  const BroadeningModel none;

  EndorConfig base;
  base.rf_start_hz = f0 - 25e3;
  base.rf_stop_hz = f0 + 25e3;

  const auto t0 = Clock::now();
  const std::vector<Spectrum> four = synthesize_four_spectra(base, sys, f0, 0.0, 0.0, none, 501);
  const double ms = elapsed_ms(t0);

  bool unstrained_ok = four.size() == 4;
  double worst_center = 0.0;
  for (const Spectrum& spec : four) {
    const std::vector<Peak> peaks = peak_positions(spec);
    if (peaks.size() != 1) unstrained_ok = false;
    for (const Peak& p : peaks)
      worst_center = std::max(worst_center, std::abs(p.center_hz - f0));
  }
  unstrained_ok = unstrained_ok && worst_center <= center_tol_hz;

  EndorConfig half;
  half.ionize_m = half.read_m = 0.5;
  half.rf_start_hz = f0 - 160e3;
  half.rf_stop_hz = f0 + 160e3;
  const Spectrum strained = synthesize_spectrum(half, sys, f0, 255e3, 0.0, none, 801);
  const size_t n_dips = peak_positions(strained).size();

  const bool pass = unstrained_ok && n_dips == 2 && ms < limit_ms;
  return {pass, fmt("4 single dips, worst center error %.3f Hz; strained dips = %zu  "
                    "[%.0f ms < %g ms]",
                    worst_center, n_dips, ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 7. Decay scaling exponents and the measured endpoint pairs.
Outcome criterion_decay_scaling() {
  constexpr double exp_tol = 0.05;
  constexpr double pair_tol = 0.01;
  constexpr double limit_ms = 30000.0;
  const std::vector<int> ns = {1, 2, 4, 8, 16, 32};

  const auto t0 = Clock::now();
  const auto slope = [&](const NoiseModel& nm) {
    std::vector<double> x, y;
    for (int n : ns) {
      x.push_back(n);
      y.push_back(coherence_time(nm, n));
    }
    return fit_power_law(x, y);
  };
  const double k1 = slope(calibrate_noise(1.0, 0.044));
  const double k4 = slope(calibrate_noise(4.0, 0.0037, 1, 2.0 * kPi * 50.0));

  const FitResult pair1 = fit_scaling({{1.0, 0.044}, {32.0, 0.275}});
  const FitResult pair4 = fit_scaling({{1.0, 0.0037}, {32.0, 0.064}});
  const double ms = elapsed_ms(t0);

  const bool pass = std::abs(k1 - 0.5) <= exp_tol && std::abs(k4 - 0.8) <= exp_tol &&
                    std::abs(pair1.estimate(0) - 0.53) <= pair_tol &&
                    std::abs(pair4.estimate(0) - 0.82) <= pair_tol && ms < limit_ms;
  return {pass, fmt("exponents %.3f/%.3f (0.5/0.8 +-0.05), pairs %.4f/%.4f (0.53/0.82 +-0.01)  "
                    "[%.0f ms < %g ms]",
                    k1, k4, pair1.estimate(0), pair4.estimate(0), ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 8. Estimation round-trips: g_n and chemical shift from four fields,
//    f_Q from seven angles.
Outcome criterion_estimation() {
  constexpr double gn_tol = 0.0005;
  constexpr double shift_target = -0.40, shift_tol = 0.03;  // percent
  constexpr double fq_rel_tol = 0.02;
  constexpr double limit_ms = 10000.0;
  const SpinSystem sys;
  const PhysicalConstants k;

  const auto t0 = Clock::now();
  const std::vector<double> b0 = {0.3394, 0.3465, 0.3536, 0.3607};
  const BroadeningModel none;
  std::vector<Spectrum> spectra;
  for (double b : b0) {
    const double f0 = sys.g_n * k.mu_n * b / k.h;
    EndorConfig cfg;
    cfg.rf_start_hz = f0 - 25e3;
    cfg.rf_stop_hz = f0 + 25e3;
    spectra.push_back(synthesize_spectrum(cfg, sys, f0, 0.0, 0.0, none, 501));
  }
  const FitResult gn = fit_gn(spectra, b0, sys, k);

  const double f0 = 2.55e6, fq_true = 255e3;
  std::vector<std::pair<double, double>> shifts;
  for (double deg : {0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0}) {
    const double th = deg * kPi / 180.0;
    const double f =
        transition_frequencies(build_axial_hamiltonian(sys, f0, fq_true, th)).outer_plus().frequency_hz;
    shifts.emplace_back(th, f - f0);
  }
  const FitResult fq = fit_fq_angular(shifts, 1, f0, sys);
  const double ms = elapsed_ms(t0);

  const bool pass = gn.converged && std::abs(gn.estimate(0) - 0.9558) <= gn_tol &&
                    std::abs(gn.estimate(1) - shift_target) <= shift_tol && fq.converged &&
                    std::abs(std::abs(fq.estimate(0)) - fq_true) <= fq_rel_tol * fq_true &&
                    ms < limit_ms;
  return {pass, fmt("g_n %.5f (+-5e-4), shift %.3f%% (-0.40 +-0.03), f_Q %.1f kHz (255 +-2%%)  "
                    "[%.0f ms < %g ms]",
                    gn.estimate(0), gn.estimate(1), std::abs(fq.estimate(0)) / 1e3, ms, limit_ms),
          ms};
}

// ---------------------------------------------------------------------------
// 9. Piezo tuning forecast at 5e-5 on the [111] geometry.
Outcome criterion_forecast() {
  constexpr double lo = 13e3, hi = 23e3;
  const double span =
      piezo_shift_forecast(5e-5, GradientElasticTensor{}, StackOrientation::s111, SpinSystem{});
  return {span >= lo && span <= hi,
          fmt("outer span = %.2f kHz (band [13, 23] kHz)", span / 1e3)};
}

// ---------------------------------------------------------------------------
// 10. Config language: canonical round-trip on fuzz-mutated valid configs,
//     positioned diagnostics on malformed input, reference config clean.
const char* kReferenceConfig = R"cfg(# ionized As-75 donor in a strained epilayer
[system]
spin = 3/2
g_n = 0.9558
g_n_free = 0.95965
q = 0.314 barn

[field]
B0 = 350 mT
orientation = 0 0 1
theta = 0 rad

[strain]
mode = stack-100
eps_parallel = -3.8e-4

[tensor-S]
S11 = 1.5e22 V/m^2
S44 = 6.8e22 V/m^2

[broadening]
shape = gaussian
spread = 10 kHz
asymmetry = 0.25
nodes = 64

[noise]
alpha = 1.0
t2_calibration = 44 ms
n_pulses = 1 2 4 8 16 32

[sweep]
variable = theta
range = 0 .. 90 deg
points = 19

[endor]
efficiency = 0.85
rf_duration = 400 us
points = 501

[output]
prefix = "epilayer"
format = csv

[sequence cpmg]
pulse(inner, pi/2, 400 us, 0)
repeat 32 {
  wait(1 ms)
  pulse(inner, pi, 400 us, pi/2)
  wait(1 ms)
}
)cfg";

int count_errors(const ParseResult& r) {
  int n = 0;
  for (const ParseDiagnostic& d : r.diagnostics)
    if (d.severity == ParseDiagnostic::Severity::error) ++n;
  return n;
}

bool diagnostics_positioned(const ParseResult& r) {
  for (const ParseDiagnostic& d : r.diagnostics)
    if (d.line < 1 || d.column < 1 || d.message.empty()) return false;
  return true;
}

Outcome criterion_parser() {
  constexpr int n_valid_mutants = 100;
  constexpr int n_junk_mutants = 40;
  constexpr double limit_ms = 1000.0;
  const std::string base = kReferenceConfig;

  const auto t0 = Clock::now();

  // reference parameters parse and validate without errors
  ParseResult ref = parse_config(base);
  bool ref_ok = count_errors(ref) == 0;
  if (ref_ok) {
    const auto extra = validate_config(ref.config);
    for (const ParseDiagnostic& d : extra)
      if (d.severity == ParseDiagnostic::Severity::error) ref_ok = false;
  }

  // float literals eligible for value mutation: digit runs containing '.' or
  // an exponent, so integer-typed slots keep their type
  struct Span { size_t pos, len; };
  const auto scan_floats = [](const std::string& text) {
    std::vector<Span> out;
    for (size_t i = 0; i < text.size();) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) { ++i; continue; }
      size_t j = i;
      bool has_dot = false, has_exp = false;
      while (j < text.size()) {
        const char c = text[j];
        if (std::isdigit(static_cast<unsigned char>(c))) { ++j; continue; }
        if (c == '.' && !has_dot && j + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[j + 1]))) { has_dot = true; ++j; continue; }
        if ((c == 'e' || c == 'E') && !has_exp && j + 1 < text.size() &&
            (std::isdigit(static_cast<unsigned char>(text[j + 1])) || text[j + 1] == '-' ||
             text[j + 1] == '+')) { has_exp = true; j += 2; continue; }
        break;
      }
      if (has_dot || has_exp) out.push_back({i, j - i});
      i = j;
    }
    return out;
  };

  std::mt19937_64 rng(20260819ull);
  std::uniform_real_distribution<double> scale(-0.3, 0.3);
  int round_trips = 0;
  for (int trial = 0; trial < n_valid_mutants; ++trial) {
    std::string text = base;
    const int n_edits = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < n_edits; ++e) {
      switch (rng() % 3) {
        case 0: {  // rescale one float literal (re-scan: spans shift after edits)
          const std::vector<Span> cur = scan_floats(text);
          if (cur.empty()) break;
          const Span s = cur[rng() % cur.size()];
          const double v = std::strtod(text.substr(s.pos, s.len).c_str(), nullptr);
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.9g", v * std::pow(10.0, scale(rng)));
          std::string rep(buf);
          if (rep.find('.') == std::string::npos && rep.find('e') == std::string::npos)
            rep += ".0";
          text = text.substr(0, s.pos) + rep + text.substr(s.pos + s.len);
          break;
        }
        case 1: {  // insert a comment line at a random line boundary
          size_t pos = rng() % (text.size() + 1);
          while (pos > 0 && text[pos - 1] != '\n') --pos;
          text.insert(pos, "# fuzz note\n");
          break;
        }
        default: {  // insert a blank line
          size_t pos = rng() % (text.size() + 1);
          while (pos > 0 && text[pos - 1] != '\n') --pos;
          text.insert(pos, "\n");
          break;
        }
      }
    }
    const ParseResult r1 = parse_config(text);
    if (count_errors(r1) != 0) continue;
    const std::string s1 = serialize_config(r1.config);
    const ParseResult r2 = parse_config(s1);
    if (count_errors(r2) == 0 && serialize_config(r2.config) == s1) ++round_trips;
  }

  // structured junk edits: any diagnostic that appears must be positioned
  const std::string junk_chars = "[]=(){},.#\"\n abcXYZ019+-/^~@";
  int junk_dirty = 0;
  bool positioned_ok = true;
  for (int trial = 0; trial < n_junk_mutants; ++trial) {
    std::string text = base;
    const int n_edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < n_edits && !text.empty(); ++e) {
      const size_t pos = rng() % text.size();
      switch (rng() % 3) {
        case 0: text[pos] = junk_chars[rng() % junk_chars.size()]; break;
        case 1: text.erase(pos, 1); break;
        default: text.insert(pos, 1, junk_chars[rng() % junk_chars.size()]); break;
      }
    }
    const ParseResult r = parse_config(text);
    if (count_errors(r) > 0) {
      ++junk_dirty;
      if (!diagnostics_positioned(r)) positioned_ok = false;
    }
  }

  // hand-written malformed inputs with known positions
  struct Bad { const char* text; int line; };
  const std::vector<Bad> malformed = {
      {"[field]\nB0 = 0.35\n", 2},                        // missing unit
      {"[field]\nB0 = 350 furlong\n", 2},                 // unknown unit
      {"[field]\ntheta = 10 kHz\n", 2},                   // unit mismatch
      {"[system]\nbogus_key = 1\n", 2},                   // unknown key
      {"[field]\n[field]\nB0 = 1 T\n", 2},                // duplicate section
      {"[sequence s]\npulse(sideways, pi, 1 us, 0)\n", 2},// unknown transition
      {"[sequence s]\nrepeat 4 {\nwait(1 ms)\n", 4},      // unclosed repeat, reported at EOF
  };
  bool malformed_ok = true;
  for (const Bad& b : malformed) {
    const ParseResult r = parse_config(b.text);
    if (count_errors(r) == 0 || !diagnostics_positioned(r)) { malformed_ok = false; continue; }
    bool at_line = false;
    for (const ParseDiagnostic& d : r.diagnostics)
      if (d.severity == ParseDiagnostic::Severity::error && d.line == b.line) at_line = true;
    if (!at_line) malformed_ok = false;
  }
  const double ms = elapsed_ms(t0);

  const bool pass = ref_ok && round_trips == n_valid_mutants && positioned_ok && junk_dirty > 0 &&
                    malformed_ok && ms < limit_ms;
  return {pass, fmt("round-trips %d/%d, junk dirty %d positioned, %zu malformed located  "
                    "[%.0f ms < %g ms]",
                    round_trips, n_valid_mutants, junk_dirty, malformed.size(), ms, limit_ms),
          ms};
}

}  // namespace

int main() {
  // warm-up so criterion timings measure the algorithms, not first-touch cost
  transition_frequencies(build_axial_hamiltonian(SpinSystem{}, 2.55e6, 255e3, 0.3));

  struct Entry {
    const char* name;
    Outcome (*run)();
  };
  const Entry entries[] = {
      {"elasticity round-trip", criterion_elasticity},
      {"[100] coupling round-trip", criterion_coupling_100},
      {"[111] coupling round-trip", criterion_coupling_111},
      {"oracle equivalence", criterion_oracle_equivalence},
      {"second-order observable", criterion_second_order_observable},
      {"spectrum synthesis", criterion_spectra},
      {"decay scaling", criterion_decay_scaling},
      {"estimation round-trips", criterion_estimation},
      {"piezo forecast", criterion_forecast},
      {"config language", criterion_parser},
  };

  int failed = 0;
  int idx = 0;
  for (const Entry& entry : entries) {
    ++idx;
    Outcome out;
    try {
      out = entry.run();
    } catch (const std::exception& ex) {
      out = {false, fmt("exception: %s", ex.what())};
    }
    if (!out.pass) ++failed;
    std::printf("%s %2d  %-26s %s\n", out.pass ? "PASS" : "FAIL", idx, entry.name,
                out.detail.c_str());
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed;
}
