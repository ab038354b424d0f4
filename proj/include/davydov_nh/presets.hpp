#pragma once

// Named parameter sets behind the runner presets and the acceptance checks.

#include <cmath>
#include <tuple>
#include <utility>

#include <Eigen/Dense>

#include "davydov_nh/models.hpp"
#include "davydov_nh/tdvp.hpp"

namespace davydov_nh::presets {

/// N_b = 1 sweep: v = 0.5 w0^2, Delta = 0.5 w0, one mode at 10 w0 with lambda = 0.2 w0.
inline NlzModel nlz_single_mode(double g) {
  NlzModel m;
  m.sweep_velocity = 0.5;
  m.tunneling = 0.5;
  m.non_hermiticity = g;
  m.bath = single_mode_bath(10.0, 0.2);
  return m;
}

/// Ohmic bath, alpha = 0.002, w_c = 10 w0, discretized on (0, 4 w_c].
inline NlzModel nlz_ohmic_bath(double g, Index n_modes = 60) {
  NlzModel m;
  m.sweep_velocity = 0.5;
  m.tunneling = 0.5;
  m.non_hermiticity = g;
  m.bath = discretize_ohmic_bath(0.002, 10.0, n_modes, 40.0);
  return m;
}

/// Symmetric window with |v t / 2| = 10 Delta at both ends.
inline std::pair<double, double> nlz_sweep_window(const NlzModel& m) {
  const double half = 20.0 * std::abs(m.tunneling) / std::abs(m.sweep_velocity);
  return {-half, half};
}

/// Three cavity modes at (1.0, 1.2, 1.3) w0, g_k = 0.2 w0, gamma = 0.01 w0, kappa_k = ratio * gamma.
inline JcModel jc_multimode(double kappa_ratio) {
  JcModel m;
  m.qubit_frequency = 1.0;
  m.qubit_decay = 1e-2;
  m.mode_frequencies = (Eigen::VectorXd(3) << 1.0, 1.2, 1.3).finished();
  m.couplings = Eigen::VectorXd::Constant(3, 0.2);
  m.mode_decays = Eigen::VectorXd::Constant(3, kappa_ratio * m.qubit_decay);
  return m;
}

/// w_R = 0.1 eV, N = 10, w_c = w0 = 1 eV, Omega = 0.5. The phonon band center
/// (0.1 eV here) is a free choice.
inline HtcModel htc_loss(double kappa, double lambda = 0.1) {
  HtcModel m;
  m.cavity_frequency = 1.0;
  m.qubit_frequency = 1.0;
  m.rabi_coupling = 0.1;
  m.n_qubits = 10;
  m.phonon_coupling = lambda;
  m.phonon_center = 0.1;
  m.bandwidth = 0.5;
  m.cavity_loss = kappa;
  return m;
}

// Integrator settings. dt = 0 selects the default rule (1e-3 of the shortest
// period), which the single-mode sweep needs at large g where the metric is
// stiff. The 60-mode bath is integrated at a coarser fixed step; the HTC runs
// drop the 1 eV carrier through energy_shift.

inline IntegratorConfig nlz_integrator(const NlzModel& m) {
  IntegratorConfig cfg;
  std::tie(cfg.t_start, cfg.t_end) = nlz_sweep_window(m);
  return cfg;
}

inline IntegratorConfig nlz_bath_integrator(const NlzModel& m) {
  IntegratorConfig cfg = nlz_integrator(m);
  cfg.dt = 2e-3;
  cfg.sample_stride = 10;
  return cfg;
}

inline IntegratorConfig jc_integrator() {
  IntegratorConfig cfg;
  cfg.t_end = 200.0;
  return cfg;
}

/// Times in fs.
inline IntegratorConfig htc_integrator(const HtcModel& m) {
  IntegratorConfig cfg;
  cfg.dt = 0.025;
  cfg.t_end = 300.0;
  cfg.energy_shift = m.cavity_frequency;
  return cfg;
}

}  // namespace davydov_nh::presets
