#ifndef QUADTUNE_DYNAMICS_HPP
#define QUADTUNE_DYNAMICS_HPP

#include <string>
#include <vector>

#include "quadtune/spin.hpp"

namespace quadtune {

// Nuclear density matrix; unit trace, Hermitian, positive semidefinite.
struct DensityState {
  Eigen::MatrixXcd rho;

  void validate(double tol = 1e-9) const;
  double purity() const { return (rho * rho).trace().real(); }
  Eigen::VectorXd populations() const { return rho.diagonal().real(); }
};

DensityState pure_state(int level, int dim = 4);
DensityState mixed_state(int dim = 4);

// Selective rf pulse. The nominal flip is what a pulse of this strength
// produces on the transition whose dipole element is reference_dipole;
// applied to a transition with element d it rotates by flip * d / ref.
// reference_dipole = 0 means "calibrated on its own target".
struct Pulse {
  std::string transition = "inner";  // inner | outer+ | outer-
  double flip_rad = 3.14159265358979323846;
  double duration_s = 4e-4;
  double phase_rad = 0.0;
  double carrier_hz = 0.0;       // 0 -> exactly the target transition frequency
  double reference_dipole = 0.0;
  bool selective = true;         // enforce the isolation preconditions
};

// Ordered events; loops expand at execution time.
struct PulseSequence {
  struct Event {
    enum class Kind { pulse, delay, loop };
    Kind kind = Kind::delay;
    Pulse pulse;                // kind == pulse
    double delay_s = 0.0;       // kind == delay
    int count = 1;              // kind == loop
    std::vector<Event> body;    // kind == loop

    static Event make_pulse(const Pulse& p);
    static Event make_delay(double seconds);
    static Event make_loop(int count, std::vector<Event> body);
  };
  std::vector<Event> events;
};

// Ideal selective rotation on the two eigenstates of the labeled transition.
// Throws when a selective pulse is ambiguous (two lines within 1/duration of
// the carrier, both named in the message) or off-resonant by > 10/duration.
DensityState apply_pulse(const DensityState& rho, const Pulse& pulse,
                         const NuclearHamiltonian& h);

DensityState free_evolution(const DensityState& rho, const NuclearHamiltonian& h,
                            double duration_s);

DensityState apply_sequence(const DensityState& rho, const PulseSequence& seq,
                            const NuclearHamiltonian& h);

// Transition probability of a square pulse, nominal pi on resonance:
//   P(detuning) = (w1^2 / W^2) sin^2(W T / 2),  w1 = pi/T,  W^2 = w1^2 + (2 pi df)^2.
// First zero at sqrt(3)/(2T), FWHM ~ 0.8/T.
double excitation_profile(double duration_s, double detuning_hz);

// CPMG filter |integral of the toggling function times e^{i w t'}|^2 / 2 for
// n ideal pi pulses at t_j = (2j-1) t / (2n); n = 1 is the Hahn echo
// 8 sin^4(w t/4) / w^2.  DC offsets refocus: F -> 0 as w -> 0.
double cpmg_filter_function(int n, double total_time_s, double omega_rad_s);

// Fast-oscillation average of the filter, (2n+1)/w^2; exact envelope used for
// the analytic high-frequency tail of the decoherence integral.
double cpmg_filter_average(int n, double omega_rad_s);

// Dephasing noise PSD S(w) = amplitude / w^alpha on [omega_low, omega_high].
struct NoiseModel {
  double alpha = 1.0;
  double amplitude = 0.0;            // rad^2 s^(alpha-1) as used in S(w) = A w^-alpha
  double omega_low = 6.283185307179586e-2;   // 2 pi * 0.01 Hz
  double omega_high = 6.283185307179586e6;   // 2 pi * 1 MHz

  void validate() const;
};

struct DecayCurve {
  std::string transition;
  int n_pulses = 1;
  std::vector<double> time_s;
  std::vector<double> amplitude;
};

// chi(t) = (1/pi) * integral S(w) Filter_n(w, t) dw over the model band,
// adaptive panel quadrature to the requested relative tolerance with an
// analytic averaged tail.  W(t) = exp(-chi).
double decoherence_integral(const NoiseModel& noise, int n, double t_s,
                            double rel_tol = 1e-6);

DecayCurve coherence_decay(const NoiseModel& noise, int n, const std::vector<double>& t_grid_s);

// t with chi(t) = 1, i.e. W = 1/e.
double coherence_time(const NoiseModel& noise, int n);

// Amplitude A such that the 1/e time at n pulses equals t2_target (chi is
// linear in A, so this is a single decoherence_integral evaluation).
NoiseModel calibrate_noise(double alpha, double t2_target_s, int n = 1,
                           double omega_low = 6.283185307179586e-2,
                           double omega_high = 6.283185307179586e6);

struct StretchedExpFit {
  double t2_s = 0.0;
  double beta = 1.0;
};

// Least-squares fit of exp[-(t/T2)^beta]; requires >= 5 usable points
// covering amplitudes from >= 0.95 down to <= 0.2.
StretchedExpFit t2_extract(const DecayCurve& curve);

// Log-log least-squares slope; used for the T2(n) power law.
double fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace quadtune

#endif
