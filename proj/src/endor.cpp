#include "quadtune/endor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "quadtune/dynamics.hpp"

namespace quadtune {

namespace {
bool valid_target(double m) {
  return std::abs(std::abs(m) - 1.5) < 1e-9 || std::abs(std::abs(m) - 0.5) < 1e-9;
}

int env_threads() {
  if (const char* s = std::getenv("QUADTUNE_THREADS")) {
    const int k = std::atoi(s);
    if (k >= 1) return std::min(k, 64);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(std::min(hw, 16u)) : 1;
}

// Golub-Welsch: nodes/weights from the symmetric Jacobi matrix of the
// orthogonal-polynomial recurrence for the given weight function.
std::vector<std::pair<double, double>> golub_welsch(const Eigen::VectorXd& diag,
                                                    const Eigen::VectorXd& offdiag,
                                                    double mu0) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    j(i, i) = diag(i);
    if (i + 1 < n) j(i, i + 1) = j(i + 1, i) = offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(j);
  std::vector<std::pair<double, double>> out(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    out[i] = {solver.eigenvalues()(i), mu0 * v0 * v0};
  }
  return out;
}

std::vector<std::pair<double, double>> hermite_nodes(int n) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n), e(n - 1);
  for (int k = 1; k < n; ++k) e(k - 1) = std::sqrt(0.5 * k);
  auto nw = golub_welsch(d, e, std::sqrt(M_PI));
  for (auto& p : nw) p.second /= std::sqrt(M_PI);  // normalize to unit mass
  return nw;
}

std::vector<std::pair<double, double>> laguerre_nodes(int n) {
  Eigen::VectorXd d(n), e(n - 1);
  for (int k = 0; k < n; ++k) d(k) = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) e(k - 1) = static_cast<double>(k);
  return golub_welsch(d, e, 1.0);  // integral of e^-x over [0, inf) = 1
}

// standard normal quantile: Acklam's rational approximation plus one Halley
// step on erfc, good to machine precision over (0, 1)
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// midpoint-in-probability sampling of the f_Q distribution: the excitation
// kernel is bandlimited to |tau| <= T, so node spacing below 1/T on the line
// positions makes the ensemble sum alias-free even when spread >> bandwidth
std::vector<std::pair<double, double>> stratified_nodes(const BroadeningModel& b,
                                                        int n) {
  const double qm = 0.5 * (1.0 - b.asymmetry), qp = 0.5 * (1.0 + b.asymmetry);
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    double x;
    if (b.shape == BroadeningModel::Shape::gaussian) {
      x = u < qm ? b.spread_hz * normal_quantile(0.5 * u / qm)
                 : b.spread_hz * normal_quantile(0.5 * (1.0 + (u - qm) / qp));
    } else {
      x = u < qm ? b.spread_hz * std::log(u / qm)
                 : -b.spread_hz * std::log((1.0 - u) / qp);
    }
    out.emplace_back(x, 1.0 / n);
  }
  return out;
}
}  // namespace

void EndorConfig::validate() const {
  if (!valid_target(ionize_m) || !valid_target(read_m))
    throw std::invalid_argument("endor targets must be one of +-3/2, +-1/2");
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw std::invalid_argument("ionization efficiency must lie in [0, 1]");
  if (t_antiparallel_s <= 0.0 || t_parallel_s <= 0.0)
    throw std::invalid_argument("recombination times must be > 0");
  if (rf_duration_s <= 0.0)
    throw std::invalid_argument("rf pulse duration must be > 0");
}

void PopulationVector::validate(double tol) const {
  if (as0.minCoeff() < -tol || asp.minCoeff() < -tol)
    throw std::invalid_argument("populations must be non-negative");
  if (std::abs(total() - 1.0) > tol)
    throw std::invalid_argument("populations must sum to 1 across both pools");
}

PopulationVector PopulationVector::equilibrium() {
  PopulationVector p;
  p.as0.setConstant(0.25);
  return p;
}

int m_index(double m) {
  if (!valid_target(m)) throw std::invalid_argument("m must be one of +-3/2, +-1/2");
  return static_cast<int>(std::lround(1.5 - m));
}

void BroadeningModel::validate() const {
  if (spread_hz < 0.0) throw std::invalid_argument("broadening spread must be >= 0");
  if (!(asymmetry >= -1.0 && asymmetry <= 1.0))
    throw std::invalid_argument("broadening asymmetry must lie in [-1, 1]");
  if (nodes < 32) throw std::invalid_argument("broadening quadrature needs >= 32 nodes");
}

std::vector<std::pair<double, double>> broadening_nodes(const BroadeningModel& b) {
  b.validate();
  if (b.spread_hz == 0.0) return {{0.0, 1.0}};

  std::vector<std::pair<double, double>> out;
  if (b.shape == BroadeningModel::Shape::gaussian) {
    // two half-normals weighted (1 +- a)/2: mirror-symmetric nodes rescaled
    for (const auto& [x, w] : hermite_nodes(b.nodes)) {
      const double side = x > 0.0 ? (1.0 + b.asymmetry) : (1.0 - b.asymmetry);
      out.emplace_back(std::sqrt(2.0) * b.spread_hz * x, side * w);
    }
  } else {
    // one-sided exponential tails on each side, weighted (1 +- a)/2
    const auto gl = laguerre_nodes(b.nodes);
    for (const auto& [x, w] : gl)
      out.emplace_back(b.spread_hz * x, 0.5 * (1.0 + b.asymmetry) * w);
    for (const auto& [x, w] : gl)
      out.emplace_back(-b.spread_hz * x, 0.5 * (1.0 - b.asymmetry) * w);
  }
  return out;
}

PopulationVector run_endor_step(const PopulationVector& pop, const EndorConfig& cfg,
                                double rf_hz, const TransitionTable& table) {
  cfg.validate();
  pop.validate();
  PopulationVector p = pop;

  // 1. fast selective ionization of the target line
  const int ion = m_index(cfg.ionize_m);
  const double moved = p.as0(ion) * cfg.efficiency;
  p.as0(ion) -= moved;
  p.asp(ion) += moved;

  // 2. rf transfer between m-adjacent As+ levels, descending m
  std::vector<Transition> lines = table.lines;
  std::sort(lines.begin(), lines.end(),
            [](const Transition& a, const Transition& b) { return a.m_hi > b.m_hi; });
  for (const Transition& line : lines) {
    const int hi = m_index(line.m_hi);
    const double w =
        excitation_profile(cfg.rf_duration_s, rf_hz - line.frequency_hz);
    const double a = p.asp(hi), b = p.asp(hi + 1);
    p.asp(hi) = (1.0 - w) * a + w * b;
    p.asp(hi + 1) = (1.0 - w) * b + w * a;
  }

  // 3. slow parallel recombination ionizes every remaining neutral
  p.asp += p.as0;
  p.as0.setZero();

  // 4. optical reset returns everything to As0, m_I preserved
  p.as0 = p.asp;
  p.asp.setZero();

  p.validate();
  return p;
}

double endor_signal(const PopulationVector& pop, double read_m) {
  return 4.0 * pop.as0(m_index(read_m));
}

void Spectrum::validate() const {
  if (frequency_hz.size() != signal.size())
    throw std::invalid_argument("spectrum arrays must have equal length");
  for (size_t i = 1; i < frequency_hz.size(); ++i)
    if (!(frequency_hz[i] > frequency_hz[i - 1]))
      throw std::invalid_argument("spectrum frequencies must be strictly increasing");
}

Spectrum synthesize_spectrum(const EndorConfig& cfg, const SpinSystem& sys,
                             double f0_hz, double fq_hz, double theta_rad,
                             const BroadeningModel& broadening, int n_points) {
  cfg.validate();
  if (n_points < 10) throw std::invalid_argument("spectrum needs >= 10 sweep points");
  if (!(cfg.rf_stop_hz > cfg.rf_start_hz))
    throw std::invalid_argument("rf sweep range must have stop > start");

  Spectrum spec;
  spec.ionize_m = cfg.ionize_m;
  spec.read_m = cfg.read_m;
  spec.f0_hz = f0_hz;
  spec.fq_hz = fq_hz;
  spec.theta_rad = theta_rad;
  spec.broadening = broadening;
  spec.frequency_hz.resize(n_points);
  spec.signal.assign(n_points, 1.0);
  for (int i = 0; i < n_points; ++i)
    spec.frequency_hz[i] =
        cfg.rf_start_hz +
        (cfg.rf_stop_hz - cfg.rf_start_hz) * i / static_cast<double>(n_points - 1);

  // one transition table per distribution node; when the spread exceeds the
  // rf bandwidth 1/T the fixed quadrature nodes are too sparse to resolve the
  // excitation kernel, so switch to stratified sampling with enough nodes
  broadening.validate();
  const double span = broadening.spread_hz * cfg.rf_duration_s;
  std::vector<std::pair<double, double>> nodes;
  if (span <= 0.5) {
    nodes = broadening_nodes(broadening);
  } else {
    int n = std::max(broadening.nodes, static_cast<int>(std::ceil(8.0 * span)) + 33);
    n = std::min(n, 8192) + (std::min(n, 8192) & 1);
    nodes = stratified_nodes(broadening, n);
  }
  std::vector<TransitionTable> tables;
  tables.reserve(nodes.size());
  bool covered = false;
  for (const auto& [dfq, w] : nodes) {
    tables.push_back(
        transition_frequencies(build_axial_hamiltonian(sys, f0_hz, fq_hz + dfq, theta_rad)));
    for (const Transition& line : tables.back().lines)
      covered = covered || (line.frequency_hz >= cfg.rf_start_hz &&
                            line.frequency_hz <= cfg.rf_stop_hz);
  }
  if (!covered) {
    spec.warning = "rf sweep range covers no nuclear transition; spectrum is flat";
    return spec;
  }

  const PopulationVector eq = PopulationVector::equilibrium();
  const auto eval_point = [&](int i) {
    double acc = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      const PopulationVector out =
          run_endor_step(eq, cfg, spec.frequency_hz[i], tables[k]);
      acc += nodes[k].second * endor_signal(out, cfg.read_m);
    }
    spec.signal[i] = acc;
  };

  const int threads = std::min(env_threads(), n_points);
  if (threads <= 1) {
    for (int i = 0; i < n_points; ++i) eval_point(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int i = t; i < n_points; i += threads) eval_point(i);
      });
    for (auto& th : pool) th.join();
  }
  return spec;
}

std::vector<Spectrum> synthesize_four_spectra(const EndorConfig& base,
                                              const SpinSystem& sys, double f0_hz,
                                              double fq_hz, double theta_rad,
                                              const BroadeningModel& broadening,
                                              int n_points) {
  std::vector<Spectrum> out;
  out.reserve(4);
  for (double m : {1.5, 0.5, -0.5, -1.5}) {
    EndorConfig cfg = base;
    cfg.ionize_m = m;
    cfg.read_m = m;
    out.push_back(
        synthesize_spectrum(cfg, sys, f0_hz, fq_hz, theta_rad, broadening, n_points));
  }
  return out;
}

std::vector<Peak> peak_positions(const Spectrum& spec, double min_depth) {
  spec.validate();
  const auto& f = spec.frequency_hz;
  const auto& s = spec.signal;
  std::vector<Peak> peaks;
  if (f.size() < 3) return peaks;

  for (size_t i = 1; i + 1 < s.size(); ++i) {
    if (!(s[i] < s[i - 1] && s[i] <= s[i + 1])) continue;

    // topographic prominence: rise to the key saddle on each side before a
    // deeper minimum; rejects noise wiggles riding on the flank of a dip
    double left_wall = s[i];
    for (size_t j = i; j-- > 0;) {
      if (s[j] < s[i]) break;
      left_wall = std::max(left_wall, s[j]);
    }
    double right_wall = s[i];
    for (size_t j = i + 1; j < s.size(); ++j) {
      if (s[j] < s[i]) break;
      right_wall = std::max(right_wall, s[j]);
    }
    if (std::min(left_wall, right_wall) - s[i] < min_depth) continue;

    Peak pk;
    // parabola through the minimum and its neighbors
    const double denom = s[i - 1] - 2.0 * s[i] + s[i + 1];
    const double delta = denom > 0.0 ? 0.5 * (s[i - 1] - s[i + 1]) / denom : 0.0;
    const double bin = 0.5 * (f[i + 1] - f[i - 1]);
    pk.center_hz = f[i] + delta * bin;
    pk.depth = (1.0 - s[i]) + 0.125 * (s[i - 1] - s[i + 1]) * delta;

    // full width at half depth by linear interpolation of the crossings
    const double half = 1.0 - 0.5 * pk.depth;
    double left = f.front(), right = f.back();
    for (size_t j = i; j > 0; --j) {
      if (s[j - 1] >= half) {
        left = f[j] + (f[j - 1] - f[j]) * (half - s[j]) / (s[j - 1] - s[j]);
        break;
      }
    }
    for (size_t j = i; j + 1 < s.size(); ++j) {
      if (s[j + 1] >= half) {
        right = f[j] + (f[j + 1] - f[j]) * (half - s[j]) / (s[j + 1] - s[j]);
        break;
      }
    }
    pk.width_hz = right - left;
    peaks.push_back(pk);
  }

  // drop minima consistent with Rabi sidelobes of a deeper line: the lobe
  // envelope is (omega_1 / 2 pi delta)^2 with omega_1 / 2 pi = 0.626 * FWHM
  std::vector<Peak> kept;
  kept.reserve(peaks.size());
  for (const Peak& p : peaks) {
    bool sidelobe = false;
    for (const Peak& q : peaks) {
      if (q.depth < 2.0 * p.depth) continue;
      const double gap = std::abs(p.center_hz - q.center_hz);
      if (gap <= 0.0) continue;
      const double env = 0.626 * q.width_hz / gap;
      if (p.depth <= 3.0 * q.depth * env * env) {
        sidelobe = true;
        break;
      }
    }
    if (!sidelobe) kept.push_back(p);
  }
  peaks.swap(kept);

  for (size_t i = 0; i + 1 < peaks.size(); ++i) {
    const double gap = peaks[i + 1].center_hz - peaks[i].center_hz;
    if (gap < std::max(peaks[i].width_hz, peaks[i + 1].width_hz)) {
      peaks[i].multiplet = true;
      peaks[i + 1].multiplet = true;
    }
  }
  return peaks;
}

}  // namespace quadtune
