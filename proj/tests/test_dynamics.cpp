#include <doctest.h>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "quadtune/dynamics.hpp"
#include "quadtune/spin.hpp"

using namespace quadtune;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Segment-wise toggling integral in long double; organized differently from
// the library's boundary-coefficient sum (per-segment exponential differences).
double filter_reference(int n, double t, double w) {
  std::vector<long double> b{0.0L};
  for (int j = 1; j <= n; ++j) b.push_back((2.0L * j - 1.0L) * t / (2.0L * n));
  b.push_back(t);
  std::complex<long double> g(0.0L, 0.0L);
  const std::complex<long double> iw(0.0L, static_cast<long double>(w));
  for (size_t k = 0; k + 1 < b.size(); ++k) {
    const long double sgn = (k % 2) ? -1.0L : 1.0L;
    g += sgn * (std::exp(iw * b[k + 1]) - std::exp(iw * b[k])) / iw;
  }
  return static_cast<double>(0.5L * std::norm(g));
}
}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("density states") {
  const DensityState p0 = pure_state(0);
  CHECK(p0.purity() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p0.populations()(0) == doctest::Approx(1.0));
  CHECK_NOTHROW(p0.validate());

  const DensityState mx = mixed_state();
  CHECK(mx.purity() == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(pure_state(4), std::invalid_argument);
  CHECK_THROWS_AS(pure_state(-1), std::invalid_argument);

  DensityState bad = pure_state(0);
  bad.rho(0, 0) = 1.5;  // trace != 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = pure_state(0);
  bad.rho(0, 1) = 0.3;  // not Hermitian
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mixed_state();
  bad.rho(0, 0) = -0.1;
  bad.rho(1, 1) = 0.6;  // trace 1 but negative eigenvalue
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("excitation profile") {
  CHECK(excitation_profile(4e-4, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  // first zero of the pi square pulse at sqrt(3)/(2T)
  const double zero400 = 2165.0635094610966;
  CHECK(excitation_profile(4e-4, zero400) < 1e-24);
  CHECK(zero400 > 2.0e3);
  CHECK(zero400 < 2.5e3);

  // FWHM ~ 0.8/T: frozen half-maximum crossings
  const double fwhm400 = 1996.713388211752;
  CHECK(excitation_profile(4e-4, 0.5 * fwhm400) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fwhm400 * 4e-4 > 0.75);
  CHECK(fwhm400 * 4e-4 < 0.85);
  const double fwhm6ms = 133.11422588078347;
  CHECK(excitation_profile(6e-3, 0.5 * fwhm6ms) == doctest::Approx(0.5).epsilon(1e-9));

  // symmetric in detuning, bounded by 1
  for (double d : {10.0, 300.0, 1234.5, 5e3, 2e4}) {
    CHECK(excitation_profile(4e-4, d) == doctest::Approx(excitation_profile(4e-4, -d)));
    CHECK(excitation_profile(4e-4, d) <= 1.0);
    CHECK(excitation_profile(4e-4, d) >= 0.0);
  }
  CHECK_THROWS_AS(excitation_profile(0.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(excitation_profile(-1e-3, 10.0), std::invalid_argument);
}

TEST_CASE("cpmg filter closed forms") {
  const double t = 0.01;

  // Hahn echo: 8 sin^4(wt/4) / w^2
  for (double wt : {0.06, 0.5, 2.0, 7.3, 40.0 * kPi + 1.3}) {
    const double w = wt / t;
    const double hahn = 8.0 * std::pow(std::sin(w * t / 4.0), 4) / (w * w);
    CHECK(cpmg_filter_function(1, t, w) == doctest::Approx(hahn).epsilon(1e-12));
  }
  // moment branch (wt < 0.05) against the same closed form
  for (double wt : {1e-4, 0.01, 0.049}) {
    const double w = wt / t;
    const double hahn = 8.0 * std::pow(std::sin(w * t / 4.0), 4) / (w * w);
    CHECK(cpmg_filter_function(1, t, w) == doctest::Approx(hahn).epsilon(1e-9));
  }

  // DC refocusing for every n
  CHECK(cpmg_filter_function(1, t, 0.0) == 0.0);
  for (int n : {1, 2, 3, 4, 5, 6, 32}) {
    CHECK(cpmg_filter_function(n, t, 1e-8) < 1e-18);
  }

  // segment-wise long-double reference across branches and pulse numbers
  for (int n : {1, 2, 3, 4, 8}) {
    for (double wt : {0.002, 0.02, 0.049, 0.06, 0.4, 3.1, 27.0}) {
      const double w = wt / t;
      const double ref = filter_reference(n, t, w);
      CHECK(cpmg_filter_function(n, t, w) == doctest::Approx(ref).epsilon(1e-6));
    }
  }
  // large even n: moment branch must survive the t^3/n^3 cancellation
  for (double wt : {0.002, 0.02, 0.049}) {
    const double w = wt / t;
    CHECK(cpmg_filter_function(32, t, w) ==
          doctest::Approx(filter_reference(32, t, w)).epsilon(2e-5));
  }
  // branch continuity at wt = 0.05
  for (int n : {1, 2, 3, 4, 8}) {
    const double fa = cpmg_filter_function(n, t, 0.0499999 / t);
    const double fb = cpmg_filter_function(n, t, 0.0500001 / t);
    CHECK(fa == doctest::Approx(fb).epsilon(1e-5));
  }
  for (int n : {31, 32}) {
    const double fa = cpmg_filter_function(n, t, 0.0499999 / t);
    const double fb = cpmg_filter_function(n, t, 0.0500001 / t);
    CHECK(fa == doctest::Approx(fb).epsilon(5e-4));
  }

  CHECK_THROWS_AS(cpmg_filter_function(0, t, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(cpmg_filter_function(1, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("cpmg filter peak doubles with n") {
  const double t = 0.01;
  const auto peak_at = [&](int n) {
    double best_w = 0.0, best = -1.0;
    for (int i = 0; i < 40000; ++i) {
      const double w = (0.3 + 5.7 * i / 39999.0) * kPi * n / t;
      const double f = cpmg_filter_function(n, t, w);
      if (f > best) {
        best = f;
        best_w = w;
      }
    }
    return best_w;
  };
  const double p2 = peak_at(2), p4 = peak_at(4), p8 = peak_at(8);
  CHECK(p4 / p2 > 1.8);
  CHECK(p4 / p2 < 2.2);
  CHECK(p8 / p4 > 1.8);
  CHECK(p8 / p4 < 2.2);

  // fast-oscillation average
  for (int n : {1, 3, 16}) {
    CHECK(cpmg_filter_average(n, 100.0) ==
          doctest::Approx((2.0 * n + 1.0) / 1e4).epsilon(1e-12));
  }
}

TEST_CASE("decoherence integral matches frozen quadrature") {
  NoiseModel nm;  // defaults: cutoffs 2*pi*0.01 .. 2*pi*1e6
  nm.amplitude = 1.0;

  struct Ref {
    double alpha;
    int n;
    double t;
    double chi;
  };
  // adaptive reference quadrature, oscillatory tail integrated pairwise in
  // closed cosine form; cross-checked at two panel resolutions to 1e-14
  const Ref refs[] = {
      {1.0, 1, 0.044, 2.135751873420e-04},  {1.0, 4, 0.100, 3.253134915501e-04},
      {2.0, 2, 0.020, 8.333333333251e-08},  {4.0, 1, 0.0037, 2.966812984593e-11},
      {4.0, 2, 0.010, 7.486002604175e-14},  {1.0, 32, 0.275, 3.190058885753e-04},
      {4.0, 32, 0.064, 1.225642666936e-14},
  };
  for (const Ref& r : refs) {
    nm.alpha = r.alpha;
    CHECK(decoherence_integral(nm, r.n, r.t) == doctest::Approx(r.chi).epsilon(5e-6));
  }

  // raising the infrared cutoff removes the unrefocused Hahn contribution
  nm.alpha = 4.0;
  nm.omega_low = 2.0 * kPi * 50.0;
  CHECK(decoherence_integral(nm, 1, 0.0037) ==
        doctest::Approx(3.737249787175e-15).epsilon(5e-6));
  nm.omega_low = 2.0 * kPi * 0.01;

  // linear in the amplitude; zero time or zero amplitude integrate to zero
  nm.alpha = 1.0;
  nm.amplitude = 2.0;
  CHECK(decoherence_integral(nm, 1, 0.044) ==
        doctest::Approx(2.0 * 2.135751873420e-04).epsilon(1e-6));
  CHECK(decoherence_integral(nm, 1, 0.0) == 0.0);
  nm.amplitude = 0.0;
  CHECK(decoherence_integral(nm, 4, 0.1) == 0.0);

  nm.amplitude = 1.0;
  CHECK_THROWS_AS(decoherence_integral(nm, 0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(decoherence_integral(nm, 1, 0.01, -1.0), std::invalid_argument);
  nm.alpha = 6.5;
  CHECK_THROWS_AS(nm.validate(), std::invalid_argument);
  nm.alpha = 1.0;
  nm.omega_low = -1.0;
  CHECK_THROWS_AS(nm.validate(), std::invalid_argument);
  nm.omega_low = 10.0;
  nm.omega_high = 5.0;
  CHECK_THROWS_AS(nm.validate(), std::invalid_argument);
}

TEST_CASE("coherence decay curves") {
  const NoiseModel nm = calibrate_noise(1.0, 0.044);
  CHECK(nm.amplitude == doctest::Approx(4.6821918428e+03).epsilon(1e-5));

  std::vector<double> grid;
  for (int i = 0; i < 12; ++i) grid.push_back(2e-3 * std::pow(200.0, i / 11.0));
  DecayCurve curve = coherence_decay(nm, 1, grid);
  CHECK(curve.n_pulses == 1);
  CHECK(curve.time_s.size() == curve.amplitude.size());
  CHECK(curve.amplitude.front() > 0.9);
  for (size_t i = 0; i < curve.amplitude.size(); ++i) {
    CHECK(curve.amplitude[i] >= 0.0);
    CHECK(curve.amplitude[i] <= 1.0 + 1e-9);
    if (i > 0) CHECK(curve.amplitude[i] <= curve.amplitude[i - 1] + 1e-12);
  }

  // W(T2) = 1/e by calibration
  DecayCurve at_t2 = coherence_decay(nm, 1, {0.044});
  CHECK(at_t2.amplitude[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-5));

  // zero noise: W identically one
  NoiseModel off;
  off.amplitude = 0.0;
  const DecayCurve flat = coherence_decay(off, 1, grid);
  for (double a : flat.amplitude) CHECK(a == 1.0);

  CHECK_THROWS_AS(coherence_decay(nm, 1, {}), std::invalid_argument);
}

TEST_CASE("coherence time and T2 scaling against frozen roots") {
  // alpha = 1 at default cutoffs
  const NoiseModel nm1 = calibrate_noise(1.0, 0.044);
  const double t2_ref1[] = {0.044, 5.847643e-02, 8.102599e-02, 1.133940e-01};
  const int ns[] = {1, 2, 4, 8};
  double prev = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double t2 = coherence_time(nm1, ns[i]);
    CHECK(t2 == doctest::Approx(t2_ref1[i]).epsilon(5e-6));
    CHECK(t2 >= prev);  // more pulses never hurt
    prev = t2;
  }

  // alpha = 4 with the infrared cutoff raised to 2*pi*50 rad/s: the Hahn
  // point joins the even-n CPMG family (unrefocused w^-2 weight suppressed)
  const NoiseModel nm4 = calibrate_noise(4.0, 0.0037, 1, 2.0 * kPi * 50.0);
  CHECK(nm4.amplitude == doctest::Approx(2.6757644175e+14).epsilon(1e-5));
  const double t2_ref4[] = {3.7e-3, 6.0411724179e-03, 1.1246473751e-02, 1.9968681279e-02};
  prev = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double t2 = coherence_time(nm4, ns[i]);
    CHECK(t2 == doctest::Approx(t2_ref4[i]).epsilon(5e-6));
    CHECK(t2 >= prev);
    prev = t2;
  }

  NoiseModel off;
  off.amplitude = 0.0;
  CHECK_THROWS_AS(coherence_time(off, 1), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_noise(1.0, -0.01), std::invalid_argument);
}

TEST_CASE("t2 extraction from decay curves") {
  // plain exponential, ten points spanning well past 1/e
  DecayCurve c;
  c.n_pulses = 1;
  for (int i = 0; i < 10; ++i) {
    const double t = 2e-3 + i * (150e-3 - 2e-3) / 9.0;
    c.time_s.push_back(t);
    c.amplitude.push_back(std::exp(-t / 0.044));
  }
  const StretchedExpFit f1 = t2_extract(c);
  CHECK(f1.t2_s == doctest::Approx(0.044).epsilon(0.01));
  CHECK(f1.beta == doctest::Approx(1.0).epsilon(0.01));

  // stretched exponential, beta = 3
  DecayCurve c3;
  for (int i = 0; i < 14; ++i) {
    const double t = 2e-3 + i * (18e-3 - 2e-3) / 13.0;
    c3.time_s.push_back(t);
    c3.amplitude.push_back(std::exp(-std::pow(t / 0.010, 3.0)));
  }
  const StretchedExpFit f3 = t2_extract(c3);
  CHECK(f3.t2_s == doctest::Approx(0.010).epsilon(0.01));
  CHECK(f3.beta == doctest::Approx(3.0).epsilon(0.01));

  // insufficient range: never decays below 0.5
  DecayCurve shallow;
  for (int i = 0; i < 10; ++i) {
    shallow.time_s.push_back(1e-3 * (i + 1));
    shallow.amplitude.push_back(std::exp(-shallow.time_s.back() / 0.044));
  }
  CHECK_THROWS_WITH_AS(t2_extract(shallow),
                       doctest::Contains("insufficient decay range"),
                       std::invalid_argument);

  DecayCurve few;
  few.time_s = {0.01, 0.05, 0.2};
  few.amplitude = {0.96, 0.5, 0.01};
  CHECK_THROWS_AS(t2_extract(few), std::invalid_argument);

  DecayCurve ragged;
  ragged.time_s = {0.01, 0.02};
  ragged.amplitude = {0.9};
  CHECK_THROWS_AS(t2_extract(ragged), std::invalid_argument);
}

TEST_CASE("power-law exponent fit") {
  // log-ratio endpoints of the two measured n=1 -> n=32 pairs
  const double k1 = fit_power_law({1.0, 32.0}, {0.044, 0.275});
  CHECK(k1 == doctest::Approx(std::log(275.0 / 44.0) / std::log(32.0)).epsilon(1e-12));
  CHECK(std::abs(k1 - 0.53) < 0.01);

  const double k2 = fit_power_law({1.0, 32.0}, {0.0037, 0.064});
  CHECK(k2 == doctest::Approx(std::log(64.0 / 3.7) / std::log(32.0)).epsilon(1e-12));
  CHECK(std::abs(k2 - 0.82) < 0.01);

  CHECK(fit_power_law({1.0, 2.0, 4.0, 8.0}, {3.0, 3.0, 3.0, 3.0}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_power_law({1.0, -2.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_power_law({1.0, 2.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_power_law({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("selective pulses rotate the resonant pair") {
  const SpinSystem sys;
  const double f0 = 2.55e6, fq = 255e3;
  const NuclearHamiltonian h = build_axial_hamiltonian(sys, f0, fq, 0.0);

  // at theta = 0 the ascending eigenorder is m = 3/2, 1/2, -1/2, -3/2
  Pulse pi_outer;
  pi_outer.transition = "outer+";
  pi_outer.flip_rad = kPi;
  pi_outer.duration_s = 4e-4;

  const DensityState after = apply_pulse(pure_state(0), pi_outer, h);
  CHECK(after.populations()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(after.populations()(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(after.rho.trace().real() - 1.0) < 1e-9);
  CHECK((after.rho - after.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(after.purity() == doctest::Approx(1.0).epsilon(1e-9));

  // two pi/2 compose to the pi rotation
  Pulse half = pi_outer;
  half.flip_rad = kPi / 2.0;
  const DensityState two_halves = apply_pulse(apply_pulse(pure_state(0), half, h), half, h);
  CHECK((two_halves.rho - after.rho).cwiseAbs().maxCoeff() < 1e-9);

  // pi calibrated on the outer dipole (sqrt(3)/2), applied to the inner
  // transition (dipole 1): flip angle scales by 2/sqrt(3)
  Pulse miscal;
  miscal.transition = "inner";
  miscal.flip_rad = kPi;
  miscal.duration_s = 4e-4;
  miscal.reference_dipole = std::sqrt(3.0) / 2.0;
  const DensityState inner = apply_pulse(pure_state(1), miscal, h);
  const double expect = std::pow(std::sin(kPi / std::sqrt(3.0)), 2);
  CHECK(inner.populations()(2) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(expect > 0.93);
  CHECK(expect < 0.95);

  // mixed state stays mixed (purity never increases)
  const DensityState still_mixed = apply_pulse(mixed_state(), pi_outer, h);
  CHECK(still_mixed.purity() == doctest::Approx(0.25).epsilon(1e-12));

  // phase only shifts coherences, not populations
  Pulse phased = half;
  phased.phase_rad = kPi / 2.0;
  const DensityState a = apply_pulse(pure_state(0), half, h);
  const DensityState b = apply_pulse(pure_state(0), phased, h);
  CHECK((a.populations() - b.populations()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.rho(0, 1) - b.rho(0, 1)) > 0.1);
}

TEST_CASE("pulse selectivity guards") {
  const SpinSystem sys;
  const double f0 = 2.55e6;

  // degenerate lines: any carrier is ambiguous
  const NuclearHamiltonian h0 = build_axial_hamiltonian(sys, f0, 0.0, 0.0);
  Pulse p;
  p.transition = "inner";
  p.duration_s = 4e-4;
  try {
    apply_pulse(pure_state(1), p, h0);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("inner") != std::string::npos);
    CHECK(msg.find("outer") != std::string::npos);
  }

  // far-off carrier refused while flagged selective
  const NuclearHamiltonian h = build_axial_hamiltonian(sys, f0, 255e3, 0.0);
  Pulse far;
  far.transition = "inner";
  far.duration_s = 4e-4;
  far.carrier_hz = f0 + 1e6;
  CHECK_THROWS_WITH_AS(apply_pulse(pure_state(1), far, h),
                       doctest::Contains("not selective"), std::invalid_argument);

  far.selective = false;
  CHECK_NOTHROW(apply_pulse(pure_state(1), far, h));

  Pulse zero_len;
  zero_len.duration_s = 0.0;
  CHECK_THROWS_AS(apply_pulse(pure_state(1), zero_len, h), std::invalid_argument);
  CHECK_THROWS_AS(apply_pulse(mixed_state(2), p, h), std::invalid_argument);
}

TEST_CASE("free evolution and sequences") {
  const SpinSystem sys;
  const double f0 = 2.55e6, fq = 255e3;
  const NuclearHamiltonian h = build_axial_hamiltonian(sys, f0, fq, 0.0);
  const Eigensystem es = eigensystem(h);

  // coherence between the lowest two levels precesses at their gap
  DensityState coher = mixed_state();
  coher.rho(0, 1) = coher.rho(1, 0) = 0.1;
  const double tau = 1.234e-6;
  const DensityState evolved = free_evolution(coher, h, tau);
  const std::complex<double> expect =
      0.1 * std::polar(1.0, -2.0 * kPi * (es.values(0) - es.values(1)) * tau);
  CHECK(std::abs(evolved.rho(0, 1) - expect) < 1e-9);
  CHECK(std::abs(std::abs(evolved.rho(0, 1)) - 0.1) < 1e-12);
  CHECK((evolved.populations() - coher.populations()).cwiseAbs().maxCoeff() < 1e-12);

  // loop expansion == manual repetition
  Pulse half;
  half.transition = "outer+";
  half.flip_rad = kPi / 2.0;
  half.duration_s = 4e-4;
  PulseSequence seq;
  seq.events.push_back(PulseSequence::Event::make_loop(
      2, {PulseSequence::Event::make_pulse(half),
          PulseSequence::Event::make_delay(1e-5)}));
  const DensityState looped = apply_sequence(pure_state(0), seq, h);
  DensityState manual = pure_state(0);
  for (int i = 0; i < 2; ++i) {
    manual = apply_pulse(manual, half, h);
    manual = free_evolution(manual, h, 1e-5);
  }
  CHECK((looped.rho - manual.rho).cwiseAbs().maxCoeff() < 1e-12);

  // an even number of pi pulses restores the populations
  Pulse pi_p = half;
  pi_p.flip_rad = kPi;
  PulseSequence six;
  six.events.push_back(PulseSequence::Event::make_loop(
      3, {PulseSequence::Event::make_pulse(pi_p),
          PulseSequence::Event::make_pulse(pi_p)}));
  const DensityState back = apply_sequence(pure_state(0), six, h);
  CHECK(back.populations()(0) == doctest::Approx(1.0).epsilon(1e-9));

  PulseSequence bad_delay;
  bad_delay.events.push_back(PulseSequence::Event::make_delay(0.0));
  CHECK_THROWS_AS(apply_sequence(pure_state(0), bad_delay, h), std::invalid_argument);
  PulseSequence bad_loop;
  bad_loop.events.push_back(PulseSequence::Event::make_loop(0, {}));
  CHECK_THROWS_AS(apply_sequence(pure_state(0), bad_loop, h), std::invalid_argument);
  CHECK_THROWS_AS(free_evolution(pure_state(0), h, -1.0), std::invalid_argument);
}

}  // TEST_SUITE
