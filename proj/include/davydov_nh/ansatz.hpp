#pragma once

// Multi-D2 variational state and the coherent-state algebra built on it.
//
//   |D> = sum_s |s> sum_n A_ns |alpha_n>,   |alpha_n> = exp(sum_k alpha_nk b_k^+ - h.c.)|0>
//
// Every expectation value uses the ordinary conjugate bra <D|, so for a
// non-Hermitian generator all returned quantities are unnormalized.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "davydov_nh/errors.hpp"

namespace davydov_nh {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// Largest imaginary residue tolerated on a quantity that must be real.
inline constexpr double kImagResidueTolerance = 1e-10;
/// Norms at or below this are treated as a fully decayed state.
inline constexpr double kNormFloor = 1e-14;

class AnsatzState {
 public:
  AnsatzState() = default;

  AnsatzState(Index multiplicity, Index n_system, Index n_modes)
      : amplitudes_(Eigen::MatrixXcd::Zero(multiplicity, n_system)),
        displacements_(Eigen::MatrixXcd::Zero(multiplicity, n_modes)) {
    if (multiplicity < 1 || n_system < 1 || n_modes < 0) {
      throw ShapeError("AnsatzState: need multiplicity >= 1, n_system >= 1, n_modes >= 0");
    }
  }

  /// amplitudes is M x N_s, displacements is M x N_b.
  AnsatzState(Eigen::MatrixXcd amplitudes, Eigen::MatrixXcd displacements)
      : amplitudes_(std::move(amplitudes)), displacements_(std::move(displacements)) {
    if (amplitudes_.rows() < 1 || amplitudes_.cols() < 1) {
      throw ShapeError("AnsatzState: amplitude matrix must be at least 1x1");
    }
    if (displacements_.rows() != amplitudes_.rows()) {
      throw ShapeError("AnsatzState: amplitude and displacement row counts differ");
    }
  }

  Index multiplicity() const noexcept { return amplitudes_.rows(); }
  Index n_system() const noexcept { return amplitudes_.cols(); }
  Index n_modes() const noexcept { return displacements_.cols(); }

  const Eigen::MatrixXcd& amplitudes() const noexcept { return amplitudes_; }
  const Eigen::MatrixXcd& displacements() const noexcept { return displacements_; }
  Eigen::MatrixXcd& amplitudes() noexcept { return amplitudes_; }
  Eigen::MatrixXcd& displacements() noexcept { return displacements_; }

  bool is_finite() const { return amplitudes_.allFinite() && displacements_.allFinite(); }

  bool same_shape(const AnsatzState& other) const noexcept {
    return multiplicity() == other.multiplicity() && n_system() == other.n_system() &&
           n_modes() == other.n_modes();
  }

 private:
  Eigen::MatrixXcd amplitudes_;
  Eigen::MatrixXcd displacements_;
};

using OverlapMatrix = Eigen::MatrixXcd;

struct ObservableRecord {
  double time = 0.0;
  double norm = 0.0;
  Eigen::VectorXd populations;
  std::optional<double> sigma_z;
  Eigen::VectorXd mode_occupations;
  double total_bosons = 0.0;
};

namespace detail {

inline double checked_real(Complex value, double scale, const char* what) {
  if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
    throw NumericalInconsistency(std::string(what) + ": non-finite value");
  }
  if (std::abs(value.imag()) > kImagResidueTolerance * std::max(1.0, scale)) {
    throw NumericalInconsistency(std::string(what) + ": imaginary residue " +
                                 std::to_string(value.imag()) + " exceeds tolerance");
  }
  return value.real();
}

// rho_mn = sum_s conj(A_ms) A_ns
inline Eigen::MatrixXcd amplitude_products(const AnsatzState& state) {
  return state.amplitudes().conjugate() * state.amplitudes().transpose();
}

}  // namespace detail

namespace detail {

// log <alpha_m|alpha_n> = -|d|^2/2 + i Im(alpha_m^* . d),  d = alpha_n - alpha_m.
// Same value as alpha_m^* alpha_n - (|alpha_m|^2 + |alpha_n|^2)/2 without the
// cancellation, and exactly zero for equal displacements.
template <typename RowA, typename RowB>
Complex log_overlap(const RowA& am, const RowB& an) {
  double re = 0.0;
  double im = 0.0;
  for (Index k = 0; k < am.size(); ++k) {
    const Complex d = an(k) - am(k);
    re -= 0.5 * std::norm(d);
    im += (std::conj(am(k)) * d).imag();
  }
  return {re, im};
}

}  // namespace detail

/// S_mn = <alpha_m|alpha_n>. Computed on the upper triangle and mirrored so
/// the unit diagonal and Hermiticity hold bit-exactly.
inline OverlapMatrix overlap(const AnsatzState& state) {
  const Index m_count = state.multiplicity();
  const Eigen::MatrixXcd& alpha = state.displacements();
  OverlapMatrix s(m_count, m_count);
  for (Index m = 0; m < m_count; ++m) {
    s(m, m) = Complex(1.0, 0.0);
    for (Index n = m + 1; n < m_count; ++n) {
      s(m, n) = std::exp(detail::log_overlap(alpha.row(m), alpha.row(n)));
      s(n, m) = std::conj(s(m, n));
    }
  }
  return s;
}

/// Reduced system density matrix  R_ss' = sum_mn conj(A_ms) A_ns' S_mn  (unnormalized).
inline Eigen::MatrixXcd reduced_density(const AnsatzState& state, const OverlapMatrix& s) {
  return state.amplitudes().adjoint() * s * state.amplitudes();
}

inline double norm(const AnsatzState& state) {
  const Eigen::MatrixXcd r = reduced_density(state, overlap(state));
  const double scale = r.diagonal().cwiseAbs().sum();
  return detail::checked_real(r.trace(), scale, "norm");
}

inline Eigen::VectorXd system_populations(const AnsatzState& state) {
  const Eigen::MatrixXcd r = reduced_density(state, overlap(state));
  Eigen::VectorXd pops(state.n_system());
  const double scale = r.diagonal().cwiseAbs().sum();
  for (Index s = 0; s < state.n_system(); ++s) {
    pops(s) = detail::checked_real(r(s, s), scale, "system_populations");
  }
  return pops;
}

/// Unnormalized population(0) - population(1); state 0 is the upper level.
inline double sigma_z(const AnsatzState& state) {
  if (state.n_system() != 2) {
    throw ShapeError("sigma_z: requires a two-state system, got N_s = " +
                     std::to_string(state.n_system()));
  }
  const Eigen::VectorXd pops = system_populations(state);
  return pops(0) - pops(1);
}

namespace detail {

// <b_k^+ b_k> for every k, from <alpha_m| b^+ b |alpha_n> = conj(alpha_mk) alpha_nk S_mn.
inline Eigen::VectorXd occupations(const AnsatzState& state, const OverlapMatrix& s) {
  const Eigen::MatrixXcd weights = amplitude_products(state).cwiseProduct(s);
  const Eigen::MatrixXcd& alpha = state.displacements();
  Eigen::VectorXd occ(state.n_modes());
  const double scale = weights.cwiseAbs().sum() *
                       std::max(1.0, alpha.cwiseAbs2().rowwise().sum().maxCoeff());
  for (Index k = 0; k < state.n_modes(); ++k) {
    const Complex value = alpha.col(k).dot(weights * alpha.col(k));
    occ(k) = checked_real(value, scale, "mode_occupation");
  }
  return occ;
}

}  // namespace detail

inline double mode_occupation(const AnsatzState& state, Index k) {
  if (k < 0 || k >= state.n_modes()) {
    throw ShapeError("mode_occupation: mode index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(state.n_modes()) + ")");
  }
  const Eigen::MatrixXcd weights = detail::amplitude_products(state).cwiseProduct(overlap(state));
  const auto column = state.displacements().col(k);
  const double scale = weights.cwiseAbs().sum() * std::max(1.0, column.cwiseAbs2().maxCoeff());
  return detail::checked_real(column.dot(weights * column), scale, "mode_occupation");
}

inline Eigen::VectorXd mode_occupations(const AnsatzState& state) {
  return detail::occupations(state, overlap(state));
}

inline double total_boson_number(const AnsatzState& state) { return mode_occupations(state).sum(); }

/// value / norm(state); throws NormUnderflow once the state has decayed away.
inline double normalized(double value, const AnsatzState& state) {
  const double n = norm(state);
  if (!(n > kNormFloor)) {
    throw NormUnderflow("normalized: norm " + std::to_string(n) + " at or below floor");
  }
  return value / n;
}

inline ObservableRecord record_observables(const AnsatzState& state, double time) {
  const OverlapMatrix s = overlap(state);
  const Eigen::MatrixXcd r = reduced_density(state, s);
  const double scale = r.diagonal().cwiseAbs().sum();

  ObservableRecord rec;
  rec.time = time;
  rec.populations.resize(state.n_system());
  for (Index i = 0; i < state.n_system(); ++i) {
    rec.populations(i) = detail::checked_real(r(i, i), scale, "system_populations");
  }
  rec.norm = detail::checked_real(r.trace(), scale, "norm");
  if (state.n_system() == 2) rec.sigma_z = rec.populations(0) - rec.populations(1);
  rec.mode_occupations = detail::occupations(state, s);
  rec.total_bosons = rec.mode_occupations.sum();
  return rec;
}

/// Radius of the displacement noise on the idle Ansaetze. Larger values seed them
/// further from the occupied term, which makes the early solve better conditioned.
inline constexpr double kDefaultNoiseRadius = 1e-2;

/// Product state  (sum_s c_s |s>) (x) |displacement>  in Ansatz 0. Ansaetze n >= 1 carry
/// zero amplitude and displacements scattered uniformly over a disk of radius
/// noise_radius around `displacement`, so the metric is not exactly singular at t = 0.
inline AnsatzState make_initial_state(Index multiplicity, const Eigen::VectorXcd& system_amplitudes,
                                      const Eigen::VectorXcd& displacement, std::uint64_t seed,
                                      double noise_radius = kDefaultNoiseRadius) {
  const double amp_norm = system_amplitudes.norm();
  if (!(amp_norm > 0.0) || !system_amplitudes.allFinite()) {
    throw ShapeError("make_initial_state: system amplitudes must be finite and non-zero");
  }
  AnsatzState state(multiplicity, system_amplitudes.size(), displacement.size());
  state.amplitudes().row(0) = system_amplitudes.transpose() / amp_norm;
  state.displacements().rowwise() = displacement.transpose();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index n = 1; n < multiplicity; ++n) {
    for (Index k = 0; k < displacement.size(); ++k) {
      const double radius = noise_radius * std::sqrt(unit(rng));
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      state.displacements()(n, k) += std::polar(radius, angle);
    }
  }
  return state;
}

inline AnsatzState make_initial_state(Index multiplicity, Index n_system, Index system_index,
                                      Index n_modes, std::uint64_t seed,
                                      double noise_radius = kDefaultNoiseRadius) {
  if (system_index < 0 || system_index >= n_system) {
    throw ShapeError("make_initial_state: system index out of range");
  }
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n_system);
  c(system_index) = 1.0;
  return make_initial_state(multiplicity, c, Eigen::VectorXcd::Zero(n_modes), seed, noise_radius);
}

}  // namespace davydov_nh
