#include "quadtune/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>

namespace quadtune {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void DensityState::validate(double tol) const {
  if (rho.rows() != rho.cols() || rho.rows() < 2)
    throw std::invalid_argument("density matrix must be square, dim >= 2");
  if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
    throw std::invalid_argument("density matrix must have unit trace");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("density matrix must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tol)
    throw std::invalid_argument("density matrix must be positive semidefinite");
}

DensityState pure_state(int level, int dim) {
  if (dim < 2 || level < 0 || level >= dim)
    throw std::invalid_argument("pure_state: level outside [0, dim)");
  DensityState st;
  st.rho = Eigen::MatrixXcd::Zero(dim, dim);
  st.rho(level, level) = 1.0;
  return st;
}

DensityState mixed_state(int dim) {
  if (dim < 2) throw std::invalid_argument("mixed_state: dim >= 2");
  DensityState st;
  st.rho = Eigen::MatrixXcd::Identity(dim, dim) / static_cast<double>(dim);
  return st;
}

PulseSequence::Event PulseSequence::Event::make_pulse(const Pulse& p) {
  Event e;
  e.kind = Kind::pulse;
  e.pulse = p;
  return e;
}

PulseSequence::Event PulseSequence::Event::make_delay(double seconds) {
  Event e;
  e.kind = Kind::delay;
  e.delay_s = seconds;
  return e;
}

PulseSequence::Event PulseSequence::Event::make_loop(int count, std::vector<Event> body) {
  Event e;
  e.kind = Kind::loop;
  e.count = count;
  e.body = std::move(body);
  return e;
}

DensityState apply_pulse(const DensityState& rho, const Pulse& p, const NuclearHamiltonian& h) {
  rho.validate();
  if (rho.rho.rows() != h.dim) throw std::invalid_argument("apply_pulse: dimension mismatch");
  if (p.duration_s <= 0.0) throw std::invalid_argument("apply_pulse: duration must be > 0");

  const TransitionTable table = transition_frequencies(h);
  const Transition& target = table.by_m(transition_label_m_hi(p.transition));
  const double carrier = p.carrier_hz > 0.0 ? p.carrier_hz : target.frequency_hz;
  const double bandwidth = 1.0 / p.duration_s;

  if (p.selective) {
    for (const Transition& other : table.lines) {
      if (std::abs(other.m_hi - target.m_hi) < 0.25) continue;
      if (std::abs(other.frequency_hz - carrier) < bandwidth) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "pulse carrier %.6g Hz is ambiguous between %s and %s "
                      "(both within the %.3g Hz pulse bandwidth)",
                      carrier, transition_m_label(target.m_hi).c_str(),
                      transition_m_label(other.m_hi).c_str(), bandwidth);
        throw std::invalid_argument(msg);
      }
    }
    if (std::abs(target.frequency_hz - carrier) > 10.0 * bandwidth) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "pulse carrier %.6g Hz is %.3g Hz away from %s; not selective "
                    "(limit 10/duration = %.3g Hz)",
                    carrier, std::abs(target.frequency_hz - carrier),
                    transition_m_label(target.m_hi).c_str(), 10.0 * bandwidth);
      throw std::invalid_argument(msg);
    }
  }

  const Eigensystem es = eigensystem(h);
  const Eigen::VectorXcd hi = es.vectors.col(target.hi_index);
  const Eigen::VectorXcd lo = es.vectors.col(target.lo_index);

  const double dipole = std::sqrt(target.dipole_weight);
  const double ref = p.reference_dipole > 0.0 ? p.reference_dipole : dipole;
  const double angle = p.flip_rad * dipole / ref;

  const std::complex<double> i1(0.0, 1.0);
  const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(h.dim, h.dim);
  u += (c - 1.0) * (hi * hi.adjoint() + lo * lo.adjoint());
  u -= i1 * s *
       (std::polar(1.0, -p.phase_rad) * hi * lo.adjoint() +
        std::polar(1.0, p.phase_rad) * lo * hi.adjoint());

  DensityState out;
  out.rho = u * rho.rho * u.adjoint();
  return out;
}

DensityState free_evolution(const DensityState& rho, const NuclearHamiltonian& h,
                            double duration_s) {
  rho.validate();
  if (duration_s < 0.0) throw std::invalid_argument("free_evolution: duration must be >= 0");
  const Eigensystem es = eigensystem(h);
  Eigen::VectorXcd phases(h.dim);
  for (int k = 0; k < h.dim; ++k)
    phases(k) = std::polar(1.0, -2.0 * kPi * es.values(k) * duration_s);
  const Eigen::MatrixXcd u = es.vectors * phases.asDiagonal() * es.vectors.adjoint();
  DensityState out;
  out.rho = u * rho.rho * u.adjoint();
  return out;
}

namespace {
void run_events(DensityState& st, const std::vector<PulseSequence::Event>& events,
                const NuclearHamiltonian& h) {
  for (const auto& e : events) {
    switch (e.kind) {
      case PulseSequence::Event::Kind::pulse:
        st = apply_pulse(st, e.pulse, h);
        break;
      case PulseSequence::Event::Kind::delay:
        if (e.delay_s <= 0.0)
          throw std::invalid_argument("sequence delay duration must be > 0");
        st = free_evolution(st, h, e.delay_s);
        break;
      case PulseSequence::Event::Kind::loop:
        if (e.count < 1) throw std::invalid_argument("sequence loop count must be >= 1");
        for (int i = 0; i < e.count; ++i) run_events(st, e.body, h);
        break;
    }
  }
}
}  // namespace

DensityState apply_sequence(const DensityState& rho, const PulseSequence& seq,
                            const NuclearHamiltonian& h) {
  DensityState st = rho;
  run_events(st, seq.events, h);
  return st;
}

double excitation_profile(double duration_s, double detuning_hz) {
  if (duration_s <= 0.0)
    throw std::invalid_argument("excitation_profile: duration must be > 0");
  const double w1 = kPi / duration_s;  // pi pulse on resonance
  const double dw = 2.0 * kPi * detuning_hz;
  const double w2 = w1 * w1 + dw * dw;
  const double s = std::sin(0.5 * std::sqrt(w2) * duration_s);
  return w1 * w1 / w2 * s * s;
}

double cpmg_filter_function(int n, double total_time_s, double omega_rad_s) {
  if (n < 1) throw std::invalid_argument("cpmg_filter_function: n must be >= 1");
  if (total_time_s <= 0.0)
    throw std::invalid_argument("cpmg_filter_function: total_time must be > 0");
  const double t = total_time_s;
  const double w = std::abs(omega_rad_s);
  if (w == 0.0) return 0.0;

  if (w * t >= 0.05) {
    // boundary form of the toggling integral: pulses at t_j = (2j-1) t / (2n)
    std::complex<double> sum(1.0, 0.0);
    sum += (n % 2 ? 1.0 : -1.0) * std::polar(1.0, w * t);
    for (int j = 1; j <= n; ++j) {
      const double tj = (2.0 * j - 1.0) * t / (2.0 * n);
      sum += 2.0 * (j % 2 ? -1.0 : 1.0) * std::polar(1.0, w * tj);
    }
    return std::norm(sum) / (2.0 * w * w);
  }

  // w t << 1: the phasor sum cancels to O((wt)^2/n^3); use moments of the
  // toggling function y(t') instead.  Orders through M6 hold the relative
  // truncation error near 1e-11 up to wt = 0.05 even at n = 32, where
  // M2 ~ t^3/n^3 amplifies the residual.
  double m[7] = {0, 0, 0, 0, 0, 0, 0};
  double a = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double b = (k == n) ? t : (2.0 * k + 1.0) * t / (2.0 * n);
    const double sgn = (k % 2) ? -1.0 : 1.0;
    double ap = a, bp = b;
    for (int p = 1; p <= 6; ++p) {
      ap *= a;
      bp *= b;
      m[p] += sgn * (bp - ap) / (p + 1.0);
    }
    a = b;
  }
  const double w2 = w * w;
  const double re = w2 * (-m[2] / 2.0 + w2 * (m[4] / 24.0 - w2 * m[6] / 720.0));
  const double im = w * (m[1] + w2 * (-m[3] / 6.0 + w2 * m[5] / 120.0));
  return 0.5 * (re * re + im * im);
}

double cpmg_filter_average(int n, double omega_rad_s) {
  if (n < 1) throw std::invalid_argument("cpmg_filter_average: n must be >= 1");
  if (omega_rad_s <= 0.0)
    throw std::invalid_argument("cpmg_filter_average: omega must be > 0");
  return (2.0 * n + 1.0) / (omega_rad_s * omega_rad_s);
}

void NoiseModel::validate() const {
  if (!(alpha >= 0.0 && alpha <= 6.0))
    throw std::invalid_argument("noise exponent alpha must lie in [0, 6]");
  if (amplitude < 0.0) throw std::invalid_argument("noise amplitude must be >= 0");
  if (!(omega_low > 0.0 && omega_high > omega_low))
    throw std::invalid_argument("noise cutoffs must satisfy 0 < low < high");
}

namespace {

// 15-point Gauss-Legendre with a 7-point estimate for the error.
constexpr double kGl15X[8] = {0.0,
                              0.2011940939974345,
                              0.3941513470775634,
                              0.5709721726085388,
                              0.7244177313601700,
                              0.8482065834104272,
                              0.9372733924007059,
                              0.9879925180204854};
constexpr double kGl15W[8] = {0.2025782419255613, 0.1984314853271116, 0.1861610000155622,
                              0.1662692058169939, 0.1395706779261543, 0.1071592204671719,
                              0.0703660474881081, 0.0307532419961173};
constexpr double kGl7X[4] = {0.0, 0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
constexpr double kGl7W[4] = {0.4179591836734694, 0.3818300505051189, 0.2797053914892766,
                             0.1294849661688697};

template <class F>
double gl15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double acc = kGl15W[0] * f(c);
  for (int i = 1; i < 8; ++i)
    acc += kGl15W[i] * (f(c - h * kGl15X[i]) + f(c + h * kGl15X[i]));
  return acc * h;
}

template <class F>
double gl7(const F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double acc = kGl7W[0] * f(c);
  for (int i = 1; i < 4; ++i) acc += kGl7W[i] * (f(c - h * kGl7X[i]) + f(c + h * kGl7X[i]));
  return acc * h;
}

// Bisect until the 15-vs-7 point discrepancy drops below tol (absolute).
template <class F>
double adaptive_panel(const F& f, double a, double b, double tol, int depth = 0) {
  const double i15 = gl15(f, a, b);
  const double err = std::abs(i15 - gl7(f, a, b));
  if (err <= tol || err <= 1e-14 * std::abs(i15)) return i15;
  if (depth >= 24) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "coherence quadrature did not converge on [%.6g, %.6g] rad/s "
                  "(error %.3g, tolerance %.3g)",
                  a, b, err, tol);
    throw std::runtime_error(msg);
  }
  const double mid = 0.5 * (a + b);
  return adaptive_panel(f, a, mid, 0.5 * tol, depth + 1) +
         adaptive_panel(f, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace

double decoherence_integral(const NoiseModel& noise, int n, double t_s, double rel_tol) {
  noise.validate();
  if (n < 1) throw std::invalid_argument("decoherence_integral: n must be >= 1");
  if (t_s < 0.0) throw std::invalid_argument("decoherence_integral: time must be >= 0");
  if (!(rel_tol > 0.0) || rel_tol > 0.1)
    throw std::invalid_argument("decoherence_integral: rel_tol in (0, 0.1]");
  if (t_s == 0.0 || noise.amplitude == 0.0) return 0.0;

  const double t = t_s;
  const double wlo = noise.omega_low, whi = noise.omega_high;
  const double alpha = noise.alpha;
  const auto s_psd = [&](double w) { return noise.amplitude * std::pow(w, -alpha); };
  const auto g = [&](double w) { return s_psd(w) * cpmg_filter_function(n, t, w); };

  double acc = 0.0;
  const auto panel_tol = [&](double rough) {
    return 0.25 * rel_tol * std::max(std::abs(acc), std::abs(rough)) +
           std::numeric_limits<double>::min();
  };
  const auto integrate = [&](const auto& f, double a, double b) {
    return adaptive_panel(f, a, b, panel_tol(gl15(f, a, b)));
  };

  // 1. smooth low-frequency region, log-spaced panels
  const double w1 = std::min(whi, std::max(wlo, 0.5 * kPi / t));
  if (w1 > wlo) {
    const int panels = std::max(1, static_cast<int>(std::ceil(4.0 * std::log10(w1 / wlo))));
    double a = wlo;
    const double ratio = std::pow(w1 / wlo, 1.0 / panels);
    for (int i = 0; i < panels; ++i) {
      const double b = (i + 1 == panels) ? w1 : a * ratio;
      acc += integrate(g, a, b);
      a = b;
    }
  }

  // 2. through the oscillatory pass-band (peak near pi n / t), half-period panels
  const double width = kPi / t;
  const double w2 = std::min(whi, std::max(w1, 4.0 * kPi * n / t));
  double a = w1;
  while (a < w2 * (1.0 - 1e-12)) {
    const double b = std::min(a + width, w2);
    acc += integrate(g, a, b);
    a = b;
  }
  if (w2 >= whi * (1.0 - 1e-12)) return acc / kPi;

  // 3. beyond the pass-band: analytic fast-oscillation average plus the
  //    oscillatory residual, summed one period at a time until it is spent
  const double avg_coeff = noise.amplitude * (2.0 * n + 1.0) / (1.0 + alpha);
  acc += avg_coeff * (std::pow(w2, -(1.0 + alpha)) - std::pow(whi, -(1.0 + alpha)));
  const auto residual = [&](double w) {
    return s_psd(w) * (cpmg_filter_function(n, t, w) - (2.0 * n + 1.0) / (w * w));
  };
  a = w2;
  int calm = 0;
  long periods = 0;
  while (a < whi * (1.0 - 1e-12) && calm < 3) {
    const double b = std::min(a + 2.0 * width, whi);
    const double mid = 0.5 * (a + b);
    const double val = integrate(residual, a, mid) + integrate(residual, mid, b);
    acc += val;
    calm = std::abs(val) < 0.25 * rel_tol * std::abs(acc) ? calm + 1 : 0;
    a = b;
    if (++periods > 2000000) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "coherence quadrature: oscillatory tail past %.6g rad/s did not settle",
                    a);
      throw std::runtime_error(msg);
    }
  }
  return acc / kPi;
}

DecayCurve coherence_decay(const NoiseModel& noise, int n,
                           const std::vector<double>& t_grid_s) {
  if (t_grid_s.empty()) throw std::invalid_argument("coherence_decay: empty time grid");
  DecayCurve curve;
  curve.n_pulses = n;
  curve.time_s = t_grid_s;
  curve.amplitude.reserve(t_grid_s.size());
  for (double t : t_grid_s)
    curve.amplitude.push_back(std::exp(-decoherence_integral(noise, n, t)));
  return curve;
}

double coherence_time(const NoiseModel& noise, int n) {
  noise.validate();
  if (noise.amplitude <= 0.0)
    throw std::invalid_argument("coherence_time: zero-amplitude noise never decoheres");
  const auto chi = [&](double t) { return decoherence_integral(noise, n, t); };

  double lo = 1e-3, hi = 1e-3;
  if (chi(lo) < 1.0) {
    for (int i = 0; i < 80 && chi(hi) < 1.0; ++i) hi *= 3.0;
  } else {
    for (int i = 0; i < 80 && chi(lo) >= 1.0; ++i) lo /= 3.0;
  }
  if (!(chi(lo) < 1.0 && chi(hi) >= 1.0))
    throw std::runtime_error("coherence_time: could not bracket chi = 1");
  for (int i = 0; i < 64 && hi / lo > 1.0 + 1e-10; ++i) {
    const double mid = std::sqrt(lo * hi);
    (chi(mid) < 1.0 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

NoiseModel calibrate_noise(double alpha, double t2_target_s, int n, double omega_low,
                           double omega_high) {
  if (t2_target_s <= 0.0) throw std::invalid_argument("calibrate_noise: T2 must be > 0");
  NoiseModel nm;
  nm.alpha = alpha;
  nm.amplitude = 1.0;
  nm.omega_low = omega_low;
  nm.omega_high = omega_high;
  const double chi1 = decoherence_integral(nm, n, t2_target_s);
  if (!(chi1 > 0.0))
    throw std::runtime_error("calibrate_noise: filter passes no noise at the target time");
  nm.amplitude = 1.0 / chi1;  // chi is linear in the amplitude
  return nm;
}

StretchedExpFit t2_extract(const DecayCurve& curve) {
  if (curve.time_s.size() != curve.amplitude.size())
    throw std::invalid_argument("t2_extract: ragged curve");
  std::vector<double> xs, ys;  // ln t, ln(-ln W)
  double amin = 1.0, amax = 0.0;
  for (size_t i = 0; i < curve.time_s.size(); ++i) {
    const double t = curve.time_s[i], a = curve.amplitude[i];
    if (!(t > 0.0) || !(a > 1e-4) || !(a < 1.0 - 1e-12)) continue;
    amin = std::min(amin, a);
    amax = std::max(amax, a);
    xs.push_back(std::log(t));
    ys.push_back(std::log(-std::log(a)));
  }
  if (xs.size() < 5 || amin > 0.2 || amax < 0.95)
    throw std::invalid_argument(
        "t2_extract: insufficient decay range (need >= 5 points spanning amplitudes "
        "0.95 down to 0.2)");

  // linear LSQ in the log-log coordinates: y = beta x + c, T2 = exp(-c/beta)
  const double ntot = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = ntot * sxx - sx * sx;
  if (std::abs(denom) <
      1e-12 * (std::abs(ntot * sxx) + sx * sx) + std::numeric_limits<double>::min())
    throw std::invalid_argument("t2_extract: degenerate time grid");
  StretchedExpFit fit;
  fit.beta = (ntot * sxy - sx * sy) / denom;
  const double c = (sy - fit.beta * sx) / ntot;
  fit.t2_s = std::exp(-c / fit.beta);
  return fit;
}

double fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_power_law: need >= 2 matched points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("fit_power_law: inputs must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(x.size());
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) <
      1e-12 * (std::abs(m * sxx) + sx * sx) + std::numeric_limits<double>::min())
    throw std::invalid_argument("fit_power_law: degenerate abscissae");
  return (m * sxy - sx * sy) / denom;
}

}  // namespace quadtune
