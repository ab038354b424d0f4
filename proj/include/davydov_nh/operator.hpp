#pragma once

// Operators of the form
//
//   O = sum_{s,s'} |s><s'| (x) [ E_ss' + delta_ss' sum_k w_k b_k^+ b_k
//                                + sum_k ( C_ss'k b_k^+ + D_ss'k b_k ) ]
//
// with complex coefficients. All three model Hamiltonians (and their
// anti-Hermitian parts) live in this family, and its coherent-state matrix
// elements close on the identities
//   <a|b_k|b> = b_k <a|b>,  <a|b_k^+|b> = conj(a_k) <a|b>,  <a|b_k^+ b_k|b> = conj(a_k) b_k <a|b>.

#include <string>

#include <Eigen/Dense>

#include "davydov_nh/ansatz.hpp"

namespace davydov_nh {

struct SpinBosonOperator {
  Eigen::MatrixXcd system;         // E, N_s x N_s
  Eigen::VectorXcd mode_energies;  // w, length N_b
  Eigen::MatrixXcd creation;       // C, (N_s*N_s) x N_b, row s*N_s + s'
  Eigen::MatrixXcd annihilation;   // D, same layout

  static SpinBosonOperator zero(Index n_system, Index n_modes) {
    return {Eigen::MatrixXcd::Zero(n_system, n_system), Eigen::VectorXcd::Zero(n_modes),
            Eigen::MatrixXcd::Zero(n_system * n_system, n_modes),
            Eigen::MatrixXcd::Zero(n_system * n_system, n_modes)};
  }

  Index n_system() const noexcept { return system.rows(); }
  Index n_modes() const noexcept { return mode_energies.size(); }

  Complex& creation_at(Index s, Index sp, Index k) { return creation(s * n_system() + sp, k); }
  Complex& annihilation_at(Index s, Index sp, Index k) {
    return annihilation(s * n_system() + sp, k);
  }
  Complex creation_at(Index s, Index sp, Index k) const { return creation(s * n_system() + sp, k); }
  Complex annihilation_at(Index s, Index sp, Index k) const {
    return annihilation(s * n_system() + sp, k);
  }

  SpinBosonOperator adjoint() const {
    const Index ns = n_system();
    SpinBosonOperator out = zero(ns, n_modes());
    out.system = system.adjoint();
    out.mode_energies = mode_energies.conjugate();
    for (Index s = 0; s < ns; ++s) {
      for (Index sp = 0; sp < ns; ++sp) {
        out.creation.row(s * ns + sp) = annihilation.row(sp * ns + s).conjugate();
        out.annihilation.row(s * ns + sp) = creation.row(sp * ns + s).conjugate();
      }
    }
    return out;
  }

  SpinBosonOperator& operator+=(const SpinBosonOperator& o) {
    system += o.system;
    mode_energies += o.mode_energies;
    creation += o.creation;
    annihilation += o.annihilation;
    return *this;
  }

  SpinBosonOperator& operator*=(Complex factor) {
    system *= factor;
    mode_energies *= factor;
    creation *= factor;
    annihilation *= factor;
    return *this;
  }

  /// Gamma in O = O_0 - i Gamma, i.e. Gamma = i (O - O^+) / 2.
  SpinBosonOperator anti_hermitian_part() const {
    SpinBosonOperator diff = adjoint();
    diff *= Complex(-1.0, 0.0);
    diff += *this;
    diff *= Complex(0.0, 0.5);
    return diff;
  }

  /// Largest coefficient of O - O^+.
  double hermiticity_defect() const {
    const SpinBosonOperator a = adjoint();
    double d = (system - a.system).cwiseAbs().maxCoeff();
    if (n_modes() > 0) {
      d = std::max(d, (mode_energies - a.mode_energies).cwiseAbs().maxCoeff());
      d = std::max(d, (creation - a.creation).cwiseAbs().maxCoeff());
      d = std::max(d, (annihilation - a.annihilation).cwiseAbs().maxCoeff());
    }
    return d;
  }
};

inline void check_compatible(const SpinBosonOperator& op, const AnsatzState& state,
                             const char* where) {
  if (op.n_system() != state.n_system() || op.n_modes() != state.n_modes()) {
    throw ShapeError(std::string(where) + ": operator acts on (N_s=" +
                     std::to_string(op.n_system()) + ", N_b=" + std::to_string(op.n_modes()) +
                     ") but state has (N_s=" + std::to_string(state.n_system()) +
                     ", N_b=" + std::to_string(state.n_modes()) + ")");
  }
}

/// <s, alpha_m| O |s', alpha_n>  for a single index quadruple.
inline Complex coherent_matrix_element(const SpinBosonOperator& op, const AnsatzState& state,
                                       Index m, Index s, Index n, Index sp) {
  check_compatible(op, state, "coherent_matrix_element");
  const Index M = state.multiplicity();
  const Index ns = state.n_system();
  if (m < 0 || n < 0 || m >= M || n >= M || s < 0 || sp < 0 || s >= ns || sp >= ns) {
    throw ShapeError("coherent_matrix_element: index out of range");
  }
  const auto am = state.displacements().row(m);
  const auto an = state.displacements().row(n);
  Complex bosonic = op.system(s, sp);
  for (Index k = 0; k < state.n_modes(); ++k) {
    const Complex ca = std::conj(am(k));
    if (s == sp) bosonic += op.mode_energies(k) * ca * an(k);
    bosonic += op.creation_at(s, sp, k) * ca + op.annihilation_at(s, sp, k) * an(k);
  }
  const Complex overlap_mn = (m == n) ? Complex(1.0, 0.0) : std::exp(detail::log_overlap(am, an));
  return overlap_mn * bosonic;
}

/// Full table  O_{(m,s),(n,s')} = <s, alpha_m| O |s', alpha_n>,  row index m*N_s + s.
inline Eigen::MatrixXcd coherent_matrix(const SpinBosonOperator& op, const AnsatzState& state,
                                        const OverlapMatrix& s) {
  check_compatible(op, state, "coherent_matrix");
  const Index M = state.multiplicity();
  const Index ns = state.n_system();
  const Eigen::MatrixXcd& alpha = state.displacements();

  // number term  sum_k w_k conj(alpha_mk) alpha_nk
  const Eigen::MatrixXcd number = alpha.conjugate() * op.mode_energies.asDiagonal() * alpha.transpose();
  // cre(ss', m) = sum_k C_ss'k conj(alpha_mk),  ann(ss', n) = sum_k D_ss'k alpha_nk
  const Eigen::MatrixXcd cre = op.creation * alpha.adjoint();
  const Eigen::MatrixXcd ann = op.annihilation * alpha.transpose();

  Eigen::MatrixXcd table(M * ns, M * ns);
  for (Index m = 0; m < M; ++m) {
    for (Index n = 0; n < M; ++n) {
      for (Index a = 0; a < ns; ++a) {
        for (Index b = 0; b < ns; ++b) {
          Complex v = op.system(a, b) + cre(a * ns + b, m) + ann(a * ns + b, n);
          if (a == b) v += number(m, n);
          table(m * ns + a, n * ns + b) = s(m, n) * v;
        }
      }
    }
  }
  return table;
}

/// Amplitudes flattened as a(m*N_s + s) = A_ms.
inline Eigen::VectorXcd flat_amplitudes(const AnsatzState& state) {
  const Eigen::MatrixXcd at = state.amplitudes().transpose();
  return Eigen::Map<const Eigen::VectorXcd>(at.data(), at.size());
}

/// <D|O|D> with the ordinary conjugate bra.
inline Complex expectation(const SpinBosonOperator& op, const AnsatzState& state) {
  const Eigen::VectorXcd a = flat_amplitudes(state);
  return a.dot(coherent_matrix(op, state, overlap(state)) * a);
}

}  // namespace davydov_nh
