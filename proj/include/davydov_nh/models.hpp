#pragma once

// The three Hamiltonians: a non-Hermitian Landau-Zener sweep coupled to a
// bosonic bath (NLZ), a lossy multimode Jaynes-Cummings model (JC), and a
// Holstein-Tavis-Cummings model with cavity loss (HTC), each compiled to a
// SpinBosonOperator.
//
// Units: NLZ and JC in units of the qubit frequency w0 (hbar = 1). HTC
// parameters are in eV and time is in fs; time_scale() converts operator
// energies to angular frequencies.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "davydov_nh/ansatz.hpp"
#include "davydov_nh/operator.hpp"

namespace davydov_nh {

/// hbar in eV fs.
inline constexpr double kHbarEvFs = 0.6582119;

struct BathModeTable {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd couplings;
  /// HTC only: lattice momentum per mode and phases e^{-i k n} (mode x site).
  Eigen::VectorXd momenta;
  Eigen::MatrixXcd site_phases;

  Index size() const noexcept { return frequencies.size(); }

  void validate() const {
    if (couplings.size() != frequencies.size()) {
      throw ShapeError("BathModeTable: frequency and coupling lengths differ");
    }
    if (site_phases.size() != 0 && site_phases.rows() != frequencies.size()) {
      throw ShapeError("BathModeTable: site phase rows must equal the mode count");
    }
    for (Index k = 0; k < size(); ++k) {
      if (!(frequencies(k) > 0.0) || !std::isfinite(frequencies(k))) {
        throw ShapeError("BathModeTable: frequencies must be finite and strictly positive");
      }
      if (!std::isfinite(couplings(k))) throw ShapeError("BathModeTable: non-finite coupling");
      if (k > 0 && frequencies(k) < frequencies(k - 1)) {
        throw ShapeError("BathModeTable: frequencies must be sorted ascending");
      }
    }
  }
};

/// J(w) = 2 alpha w exp(-w / w_c)
inline double ohmic_spectral_density(double alpha, double cutoff, double omega) {
  return 2.0 * alpha * omega * std::exp(-omega / cutoff);
}

/// Midpoint grid on (0, omega_max]: w_k = (k - 1/2) dw, lambda_k = sqrt(J(w_k) dw).
inline BathModeTable discretize_ohmic_bath(double alpha, double cutoff, Index n_modes,
                                           double omega_max) {
  if (!(alpha >= 0.0) || !(cutoff > 0.0) || n_modes < 1 || !(omega_max > 0.0)) {
    throw ShapeError("discretize_ohmic_bath: need alpha >= 0, cutoff > 0, n_modes >= 1, omega_max > 0");
  }
  const double dw = omega_max / static_cast<double>(n_modes);
  BathModeTable bath;
  bath.frequencies.resize(n_modes);
  bath.couplings.resize(n_modes);
  for (Index k = 0; k < n_modes; ++k) {
    const double w = (static_cast<double>(k) + 0.5) * dw;
    bath.frequencies(k) = w;
    bath.couplings(k) = std::sqrt(ohmic_spectral_density(alpha, cutoff, w) * dw);
  }
  return bath;
}

inline BathModeTable single_mode_bath(double frequency, double coupling) {
  BathModeTable bath;
  bath.frequencies = Eigen::VectorXd::Constant(1, frequency);
  bath.couplings = Eigen::VectorXd::Constant(1, coupling);
  bath.validate();
  return bath;
}

struct NlzModel {
  double sweep_velocity = 0.5;   // v, units w0^2
  double tunneling = 0.5;        // Delta, units w0
  double non_hermiticity = 0.0;  // g
  BathModeTable bath;
};

struct JcModel {
  double qubit_frequency = 1.0;
  double qubit_decay = 0.0;  // gamma
  Eigen::VectorXd mode_frequencies;
  Eigen::VectorXd mode_decays;  // kappa_k
  Eigen::VectorXd couplings;    // g_k
};

struct HtcModel {
  double cavity_frequency = 1.0;     // eV
  double qubit_frequency = 1.0;      // eV
  double rabi_coupling = 0.1;        // collective coupling w_R, eV
  Index n_qubits = 10;
  double phonon_coupling = 0.1;      // lambda, dimensionless
  double phonon_center = 0.1;        // w_k0, eV
  double bandwidth = 0.5;            // Omega in [0, 1]
  double cavity_loss = 0.0;          // kappa, eV

  Index photon_state() const noexcept { return n_qubits; }
};

using ModelSpec = std::variant<NlzModel, JcModel, HtcModel>;

inline void validate(const NlzModel& m) {
  if (!std::isfinite(m.sweep_velocity) || !std::isfinite(m.tunneling) ||
      !std::isfinite(m.non_hermiticity) || m.non_hermiticity < 0.0) {
    throw ShapeError("NlzModel: parameters must be finite with g >= 0");
  }
  m.bath.validate();
}

inline void validate(const JcModel& m) {
  const Index nb = m.mode_frequencies.size();
  if (m.mode_decays.size() != nb || m.couplings.size() != nb) {
    throw ShapeError("JcModel: mode frequency, decay and coupling vectors must have equal length");
  }
  if (!(m.qubit_decay >= 0.0) || (nb > 0 && m.mode_decays.minCoeff() < 0.0)) {
    throw ShapeError("JcModel: decay rates must be non-negative");
  }
  if (!std::isfinite(m.qubit_frequency) || !m.mode_frequencies.allFinite() ||
      !m.couplings.allFinite() || !m.mode_decays.allFinite()) {
    throw ShapeError("JcModel: non-finite parameter");
  }
}

inline void validate(const HtcModel& m) {
  if (m.n_qubits < 2 || m.n_qubits % 2 != 0) throw ShapeError("HtcModel: N must be even and >= 2");
  if (!(m.bandwidth >= 0.0 && m.bandwidth <= 1.0)) throw ShapeError("HtcModel: Omega must lie in [0, 1]");
  if (!(m.cavity_loss >= 0.0)) throw ShapeError("HtcModel: kappa must be non-negative");
  if (!(m.phonon_center > 0.0)) throw ShapeError("HtcModel: phonon band center must be positive");
}

inline void validate(const ModelSpec& model) {
  std::visit([](const auto& m) { validate(m); }, model);
}

inline std::string_view model_name(const ModelSpec& model) {
  switch (model.index()) {
    case 0: return "nlz";
    case 1: return "jc";
    default: return "htc";
  }
}

/// Linear dispersion w_k = w_k0 [1 + Omega (2|k|/pi - 1)], k = 2 pi l / N,
/// l = -N/2+1 .. N/2. Modes are sorted by frequency (stable in l).
inline BathModeTable htc_phonon_modes(const HtcModel& model) {
  validate(model);
  const Index n = model.n_qubits;
  std::vector<double> momenta;
  for (Index l = -n / 2 + 1; l <= n / 2; ++l) {
    momenta.push_back(2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(n));
  }
  auto dispersion = [&](double k) {
    return model.phonon_center *
           (1.0 + model.bandwidth * (2.0 * std::abs(k) / std::numbers::pi - 1.0));
  };
  std::vector<std::size_t> order(momenta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dispersion(momenta[a]) < dispersion(momenta[b]);
  });

  BathModeTable bath;
  const auto nb = static_cast<Index>(momenta.size());
  bath.frequencies.resize(nb);
  bath.couplings.resize(nb);
  bath.momenta.resize(nb);
  bath.site_phases.resize(nb, n);
  for (Index i = 0; i < nb; ++i) {
    const double k = momenta[order[static_cast<std::size_t>(i)]];
    bath.momenta(i) = k;
    bath.frequencies(i) = dispersion(k);
    bath.couplings(i) = -model.phonon_coupling * bath.frequencies(i) / std::sqrt(static_cast<double>(n));
    for (Index site = 0; site < n; ++site) {
      bath.site_phases(i, site) = std::polar(1.0, -k * static_cast<double>(site + 1));
    }
  }
  return bath;
}

/// [[v t/2, Delta], [Delta (1-g), -v t/2]] in the basis (up, down).
inline Eigen::Matrix2cd nlz_system_matrix(const NlzModel& model, double t) {
  Eigen::Matrix2cd h;
  h << 0.5 * model.sweep_velocity * t, model.tunneling,
      model.tunneling * (1.0 - model.non_hermiticity), -0.5 * model.sweep_velocity * t;
  return h;
}

inline Index system_dimension(const ModelSpec& model) {
  switch (model.index()) {
    case 0:
    case 1: return 2;
    default: return std::get<HtcModel>(model).n_qubits + 1;
  }
}

inline Index mode_count(const ModelSpec& model) {
  switch (model.index()) {
    case 0: return std::get<NlzModel>(model).bath.size();
    case 1: return std::get<JcModel>(model).mode_frequencies.size();
    default: return std::get<HtcModel>(model).n_qubits;
  }
}

/// Factor turning operator energies into angular frequency per model time unit.
inline double time_scale(const ModelSpec& model) {
  return std::holds_alternative<HtcModel>(model) ? 1.0 / kHbarEvFs : 1.0;
}

/// Initial system state used by the presets: up (NLZ), excited qubit (JC), cavity photon (HTC).
inline Index default_initial_system_state(const ModelSpec& model) {
  return std::holds_alternative<HtcModel>(model) ? std::get<HtcModel>(model).photon_state() : 0;
}

inline SpinBosonOperator hamiltonian(const NlzModel& model, double t) {
  const Index nb = model.bath.size();
  SpinBosonOperator h = SpinBosonOperator::zero(2, nb);
  h.system = nlz_system_matrix(model, t);
  const double lower = 1.0 - model.non_hermiticity;
  for (Index k = 0; k < nb; ++k) {
    const double half = 0.5 * model.bath.couplings(k);
    h.mode_energies(k) = model.bath.frequencies(k);
    h.creation_at(0, 1, k) = half;
    h.annihilation_at(0, 1, k) = half;
    h.creation_at(1, 0, k) = lower * half;
    h.annihilation_at(1, 0, k) = lower * half;
  }
  return h;
}

/// States: 0 = |e>, 1 = |g>.
inline SpinBosonOperator hamiltonian(const JcModel& model, double /*t*/) {
  const Index nb = model.mode_frequencies.size();
  SpinBosonOperator h = SpinBosonOperator::zero(2, nb);
  h.system(0, 0) = Complex(0.5 * model.qubit_frequency, -0.5 * model.qubit_decay);
  h.system(1, 1) = -0.5 * model.qubit_frequency;
  for (Index k = 0; k < nb; ++k) {
    h.mode_energies(k) = Complex(model.mode_frequencies(k), -0.5 * model.mode_decays(k));
    h.creation_at(1, 0, k) = 0.5 * model.couplings(k);      // sigma_- a_k^+
    h.annihilation_at(0, 1, k) = 0.5 * model.couplings(k);  // sigma_+ a_k
  }
  return h;
}

/// Single-excitation manifold: states 0..N-1 have qubit n excited, state N is |g,{1}>.
inline SpinBosonOperator hamiltonian(const HtcModel& model, double /*t*/) {
  const BathModeTable phonons = htc_phonon_modes(model);
  const Index n = model.n_qubits;
  const Index photon = model.photon_state();
  SpinBosonOperator h = SpinBosonOperator::zero(n + 1, phonons.size());
  const double g = model.rabi_coupling / std::sqrt(static_cast<double>(n));
  for (Index q = 0; q < n; ++q) {
    h.system(q, q) = model.qubit_frequency;
    h.system(photon, q) = g;
    h.system(q, photon) = g;
  }
  h.system(photon, photon) = Complex(model.cavity_frequency, -model.cavity_loss);
  for (Index k = 0; k < phonons.size(); ++k) {
    h.mode_energies(k) = phonons.frequencies(k);
    for (Index q = 0; q < n; ++q) {
      h.creation_at(q, q, k) = phonons.couplings(k) * phonons.site_phases(k, q);
      h.annihilation_at(q, q, k) = phonons.couplings(k) * std::conj(phonons.site_phases(k, q));
    }
  }
  return h;
}

inline SpinBosonOperator hamiltonian(const ModelSpec& model, double t) {
  return std::visit([t](const auto& m) { return hamiltonian(m, t); }, model);
}

/// <D_m, s| H(t) |D_n, s'>, in the model's energy units.
inline Complex h_matrix_element(const ModelSpec& model, const AnsatzState& state, Index m, Index s,
                                Index n, Index sp, double t = 0.0) {
  return coherent_matrix_element(hamiltonian(model, t), state, m, s, n, sp);
}

/// Fastest angular frequency of the model over [t_start, t_end].
inline double characteristic_frequency(const ModelSpec& model, double t_start, double t_end) {
  double w = 0.0;
  if (const auto* nlz = std::get_if<NlzModel>(&model)) {
    const double sweep = 0.5 * std::abs(nlz->sweep_velocity) * std::max(std::abs(t_start), std::abs(t_end));
    w = std::max({sweep, std::abs(nlz->tunneling), nlz->bath.size() ? nlz->bath.frequencies.maxCoeff() : 0.0});
  } else if (const auto* jc = std::get_if<JcModel>(&model)) {
    w = std::abs(jc->qubit_frequency);
    if (jc->mode_frequencies.size()) w = std::max(w, jc->mode_frequencies.cwiseAbs().maxCoeff());
  } else {
    const auto& htc = std::get<HtcModel>(model);
    w = std::max({std::abs(htc.cavity_frequency), std::abs(htc.qubit_frequency),
                  htc.phonon_center * (1.0 + htc.bandwidth)}) / kHbarEvFs;
  }
  return w > 0.0 ? w : 1.0;
}

}  // namespace davydov_nh
