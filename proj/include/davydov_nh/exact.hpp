#pragma once

// Brute-force references: truncated-Fock propagation, dense spectra of the
// NLZ Hamiltonian over a (t, g) grid, and the single-excitation JC equations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "davydov_nh/ansatz.hpp"
#include "davydov_nh/errors.hpp"
#include "davydov_nh/models.hpp"
#include "davydov_nh/operator.hpp"
#include "davydov_nh/tdvp.hpp"
#include "davydov_nh/trajectory.hpp"

namespace davydov_nh {

/// Tensor basis |s> (x) |n_1 ... n_Nb>, n_k <= n_max. Index
/// s * (n_max+1)^Nb + sum_k n_k (n_max+1)^(Nb-1-k): the last mode varies fastest.
struct FockSpaceVector {
  Index n_system = 0;
  Index n_modes = 0;
  int n_max = 0;
  Eigen::VectorXcd coefficients;

  Index fock_dimension() const {
    Index d = 1;
    for (Index k = 0; k < n_modes; ++k) d *= static_cast<Index>(n_max) + 1;
    return d;
  }
  Index dimension() const { return n_system * fock_dimension(); }

  void validate() const {
    if (n_system < 1 || n_modes < 0 || n_max < 0) throw ShapeError("FockSpaceVector: bad shape");
    if (coefficients.size() != dimension()) {
      throw ShapeError("FockSpaceVector: coefficient count must equal N_s * (n_max+1)^N_b");
    }
  }
};

namespace detail {

inline std::vector<Index> mode_strides(Index n_modes, int n_max) {
  std::vector<Index> stride(static_cast<std::size_t>(n_modes), 1);
  for (Index k = n_modes - 2; k >= 0; --k) {
    stride[static_cast<std::size_t>(k)] = stride[static_cast<std::size_t>(k + 1)] * (n_max + 1);
  }
  return stride;
}

inline std::vector<int> occupations_of(Index j, Index n_modes, int n_max) {
  std::vector<int> occ(static_cast<std::size_t>(n_modes));
  for (Index k = n_modes - 1; k >= 0; --k) {
    occ[static_cast<std::size_t>(k)] = static_cast<int>(j % (n_max + 1));
    j /= (n_max + 1);
  }
  return occ;
}

}  // namespace detail

/// Product of a system vector and a coherent state, expanded to n_max quanta
/// per mode. Throws TruncationError when the discarded tail mass exceeds tail_tolerance.
inline FockSpaceVector coherent_fock_vector(const Eigen::VectorXcd& system_amplitudes,
                                            const Eigen::VectorXcd& displacement, int n_max,
                                            double tail_tolerance = 1e-12) {
  FockSpaceVector v;
  v.n_system = system_amplitudes.size();
  v.n_modes = displacement.size();
  v.n_max = n_max;
  std::vector<Eigen::VectorXcd> single(static_cast<std::size_t>(v.n_modes));
  for (Index k = 0; k < v.n_modes; ++k) {
    const Complex a = displacement(k);
    Eigen::VectorXcd c(n_max + 1);
    c(0) = std::exp(-0.5 * std::norm(a));
    for (int n = 1; n <= n_max; ++n) c(n) = c(n - 1) * a / std::sqrt(static_cast<double>(n));
    const double tail = 1.0 - c.squaredNorm();
    if (tail > tail_tolerance) {
      throw TruncationError("coherent_fock_vector: tail mass " + std::to_string(tail) +
                            " beyond n_max = " + std::to_string(n_max));
    }
    single[static_cast<std::size_t>(k)] = std::move(c);
  }
  const Index fd = v.fock_dimension();
  v.coefficients.resize(v.dimension());
  for (Index j = 0; j < fd; ++j) {
    const auto occ = detail::occupations_of(j, v.n_modes, n_max);
    Complex amp = 1.0;
    for (Index k = 0; k < v.n_modes; ++k) amp *= single[static_cast<std::size_t>(k)](occ[static_cast<std::size_t>(k)]);
    for (Index s = 0; s < v.n_system; ++s) v.coefficients(s * fd + j) = system_amplitudes(s) * amp;
  }
  return v;
}

/// Re-expands v with a larger per-mode truncation (new levels start empty).
inline FockSpaceVector embed(const FockSpaceVector& v, int n_max) {
  if (n_max < v.n_max) throw ShapeError("embed: cannot shrink the truncation");
  FockSpaceVector out{v.n_system, v.n_modes, n_max, {}};
  out.coefficients = Eigen::VectorXcd::Zero(out.dimension());
  const Index fd_old = v.fock_dimension();
  const Index fd_new = out.fock_dimension();
  const auto stride = detail::mode_strides(v.n_modes, n_max);
  for (Index j = 0; j < fd_old; ++j) {
    const auto occ = detail::occupations_of(j, v.n_modes, v.n_max);
    Index target = 0;
    for (Index k = 0; k < v.n_modes; ++k) target += occ[static_cast<std::size_t>(k)] * stride[static_cast<std::size_t>(k)];
    for (Index s = 0; s < v.n_system; ++s) out.coefficients(s * fd_new + target) = v.coefficients(s * fd_old + j);
  }
  return out;
}

/// Dense matrix of a SpinBosonOperator on the truncated tensor basis.
inline Eigen::MatrixXcd fock_matrix(const SpinBosonOperator& op, int n_max) {
  const Index ns = op.n_system();
  const Index nb = op.n_modes();
  Index fd = 1;
  for (Index k = 0; k < nb; ++k) fd *= n_max + 1;
  const auto stride = detail::mode_strides(nb, n_max);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(ns * fd, ns * fd);
  for (Index j = 0; j < fd; ++j) {
    const auto occ = detail::occupations_of(j, nb, n_max);
    Complex number = 0.0;
    for (Index k = 0; k < nb; ++k) number += op.mode_energies(k) * static_cast<double>(occ[static_cast<std::size_t>(k)]);
    for (Index s = 0; s < ns; ++s) {
      for (Index sp = 0; sp < ns; ++sp) {
        Complex diag = op.system(s, sp);
        if (s == sp) diag += number;
        h(s * fd + j, sp * fd + j) += diag;
        for (Index k = 0; k < nb; ++k) {
          const int n = occ[static_cast<std::size_t>(k)];
          const Index st = stride[static_cast<std::size_t>(k)];
          if (n < n_max) {
            h(s * fd + j + st, sp * fd + j) += op.creation_at(s, sp, k) * std::sqrt(static_cast<double>(n + 1));
          }
          if (n > 0) {
            h(s * fd + j - st, sp * fd + j) += op.annihilation_at(s, sp, k) * std::sqrt(static_cast<double>(n));
          }
        }
      }
    }
  }
  return h;
}

inline ObservableRecord record_fock(const FockSpaceVector& v, double time) {
  ObservableRecord rec;
  rec.time = time;
  const Index fd = v.fock_dimension();
  rec.populations = Eigen::VectorXd::Zero(v.n_system);
  rec.mode_occupations = Eigen::VectorXd::Zero(v.n_modes);
  for (Index j = 0; j < fd; ++j) {
    const auto occ = detail::occupations_of(j, v.n_modes, v.n_max);
    for (Index s = 0; s < v.n_system; ++s) {
      const double p = std::norm(v.coefficients(s * fd + j));
      rec.populations(s) += p;
      for (Index k = 0; k < v.n_modes; ++k) rec.mode_occupations(k) += p * occ[static_cast<std::size_t>(k)];
    }
  }
  rec.norm = rec.populations.sum();
  if (v.n_system == 2) rec.sigma_z = rec.populations(0) - rec.populations(1);
  rec.total_bosons = rec.mode_occupations.sum();
  return rec;
}

struct FockGate {
  bool enabled = true;
  double tolerance = 1e-8;  // on the final norm, relative to max(1, norm)
  int max_n_max = 160;
};

struct FockTrajectory {
  Trajectory trajectory;
  int n_max = 0;  // truncation of the returned trajectory
};

namespace detail {

// RK4 for i psi' = scale H(t) psi with H(t) = H(0) + t (H(1) - H(0)); every model
// here is affine in t.
inline Trajectory fock_run(const ModelSpec& model, const FockSpaceVector& initial,
                           const IntegratorConfig& cfg) {
  const double scale = time_scale(model);
  const Eigen::MatrixXcd h0 = fock_matrix(hamiltonian(model, 0.0), initial.n_max);
  const Eigen::MatrixXcd h1 = fock_matrix(hamiltonian(model, 1.0), initial.n_max) - h0;
  const Complex factor(0.0, -scale);
  auto deriv = [&](const Eigen::VectorXcd& psi, double t) -> Eigen::VectorXcd {
    return factor * (h0 * psi + t * (h1 * psi));
  };

  const double span = cfg.t_end - cfg.t_start;
  const double dt_req = cfg.dt > 0.0 ? cfg.dt : default_time_step(model, cfg.t_start, cfg.t_end);
  const long long n = std::llround(span / dt_req);
  const long long steps = (span > 0.0 && n == 0) ? 1 : n;
  const double dt = steps > 0 ? span / static_cast<double>(steps) : 0.0;

  Trajectory traj;
  FockSpaceVector v = initial;
  traj.records.push_back(record_fock(v, cfg.t_start));
  for (long long i = 0; i < steps; ++i) {
    const double t = cfg.t_start + static_cast<double>(i) * dt;
    const Eigen::VectorXcd& y = v.coefficients;
    const Eigen::VectorXcd k1 = deriv(y, t);
    const Eigen::VectorXcd k2 = deriv(y + 0.5 * dt * k1, t + 0.5 * dt);
    const Eigen::VectorXcd k3 = deriv(y + 0.5 * dt * k2, t + 0.5 * dt);
    const Eigen::VectorXcd k4 = deriv(y + dt * k3, t + dt);
    v.coefficients = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!v.coefficients.allFinite()) {
      traj.error = ErrorKind::StepRejected;
      traj.error_message = "fock_propagate: non-finite coefficients";
      return traj;
    }
    if ((i + 1) % cfg.sample_stride == 0) {
      traj.records.push_back(record_fock(v, cfg.t_start + static_cast<double>(i + 1) * dt));
    }
  }
  return traj;
}

}  // namespace detail

/// Exact propagation on the truncated Fock space. With the gate enabled the run
/// is repeated at 2 n_max; the truncation is doubled until the final norms agree.
inline FockTrajectory fock_propagate(const ModelSpec& model, const FockSpaceVector& initial,
                                     const IntegratorConfig& cfg, const FockGate& gate = {}) {
  cfg.validate();
  validate(model);
  initial.validate();
  if (initial.n_system != system_dimension(model) || initial.n_modes != mode_count(model)) {
    throw ShapeError("fock_propagate: initial vector does not match the model");
  }
  FockSpaceVector current = initial;
  Trajectory traj = detail::fock_run(model, current, cfg);
  if (!gate.enabled) return {std::move(traj), current.n_max};
  while (true) {
    const int doubled = std::max(1, 2 * current.n_max);
    if (doubled > gate.max_n_max) {
      throw TruncationError("fock_propagate: no convergence up to n_max = " + std::to_string(gate.max_n_max));
    }
    FockSpaceVector bigger = embed(current, doubled);
    Trajectory refined = detail::fock_run(model, bigger, cfg);
    if (!traj.complete() || !refined.complete()) return {std::move(traj), current.n_max};
    const double a = traj.records.back().norm;
    const double b = refined.records.back().norm;
    if (std::abs(a - b) < gate.tolerance * std::max(1.0, std::abs(b))) {
      return {std::move(traj), current.n_max};
    }
    current = std::move(bigger);
    traj = std::move(refined);
  }
}

/// Up-state (x) vacuum, the NLZ starting point.
inline FockSpaceVector nlz_initial_fock(const NlzModel& model, int n_max) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2);
  c(0) = 1.0;
  return coherent_fock_vector(c, Eigen::VectorXcd::Zero(model.bath.size()), n_max);
}

struct SpectrumGrid {
  std::vector<double> times;
  std::vector<double> g_values;
  /// eigenvalues[i_t * n_g + i_g], sorted by real part then imaginary part.
  std::vector<Eigen::VectorXcd> eigenvalues;
  Eigen::MatrixXd max_imag;  // n_t x n_g
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> failed;

  const Eigen::VectorXcd& at(std::size_t i_t, std::size_t i_g) const {
    return eigenvalues[i_t * g_values.size() + i_g];
  }

  /// First g whose largest imaginary eigenvalue part over all t exceeds `detect`.
  std::optional<double> exceptional_threshold(double detect = 1e-6) const {
    for (std::size_t j = 0; j < g_values.size(); ++j) {
      if (max_imag.col(static_cast<Index>(j)).maxCoeff() > detect) return g_values[j];
    }
    return std::nullopt;
  }
};

inline void sort_spectrum(Eigen::VectorXcd& ev) {
  std::sort(ev.data(), ev.data() + ev.size(), [](const Complex& a, const Complex& b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
}

/// Dense eigenvalues of the truncated NLZ Hamiltonian at every (t, g). The
/// matrix is real for real t, so a real nonsymmetric solver is used and real
/// eigenvalues come out with exactly zero imaginary part. Columns of the g grid
/// are processed on up to `jobs` threads.
inline SpectrumGrid spectrum_scan(const NlzModel& model, const std::vector<double>& times,
                                  const std::vector<double>& g_values, int n_max,
                                  unsigned jobs = 1) {
  if (times.empty() || g_values.empty()) throw ShapeError("spectrum_scan: grids must be non-empty");
  if (n_max < 0) throw ShapeError("spectrum_scan: n_max must be >= 0");
  SpectrumGrid grid;
  grid.times = times;
  grid.g_values = g_values;
  const std::size_t nt = times.size();
  const std::size_t ng = g_values.size();
  grid.eigenvalues.resize(nt * ng);
  grid.max_imag = Eigen::MatrixXd::Zero(static_cast<Index>(nt), static_cast<Index>(ng));
  grid.failed.setConstant(static_cast<Index>(nt), static_cast<Index>(ng), false);

  auto column = [&](std::size_t j) {
    NlzModel m = model;
    m.non_hermiticity = g_values[j];
    const Eigen::MatrixXcd h0 = fock_matrix(hamiltonian(m, 0.0), n_max);
    const Eigen::MatrixXcd h1 = fock_matrix(hamiltonian(m, 1.0), n_max) - h0;
    for (std::size_t i = 0; i < nt; ++i) {
      const Eigen::MatrixXd h = (h0 + times[i] * h1).real();
      // The real QR iteration occasionally stalls; a diagonal shift changes its
      // path without touching the spectrum structure.
      Eigen::EigenSolver<Eigen::MatrixXd> es(h, false);
      double shift = 0.0;
      for (double sh : {0.5, 1.0, 3.0}) {
        if (es.info() == Eigen::Success) break;
        shift = sh;
        es.compute(h + shift * Eigen::MatrixXd::Identity(h.rows(), h.cols()), false);
      }
      Eigen::VectorXcd ev;
      if (es.info() == Eigen::Success) {
        ev = es.eigenvalues();
        ev.real().array() -= shift;
        sort_spectrum(ev);
        grid.max_imag(static_cast<Index>(i), static_cast<Index>(j)) = std::max(0.0, ev.imag().maxCoeff());
      } else {
        ev = Eigen::VectorXcd::Constant(h.rows(), Complex(std::numeric_limits<double>::quiet_NaN(), 0.0));
        grid.failed(static_cast<Index>(i), static_cast<Index>(j)) = true;
        grid.max_imag(static_cast<Index>(i), static_cast<Index>(j)) = std::numeric_limits<double>::quiet_NaN();
      }
      grid.eigenvalues[i * ng + j] = std::move(ev);
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(ng)));
  if (workers == 1) {
    for (std::size_t j = 0; j < ng; ++j) column(j);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < ng; j += workers) column(j);
      });
    }
  }
  return grid;
}

struct JcSolution {
  std::vector<double> times;
  Eigen::VectorXcd excited;  // c_e(t)
  Eigen::MatrixXcd ground;   // c_gk(t), one row per time
};

/// RK4 for the single-excitation amplitudes starting from |e, {0}>:
///   i c_e'  = (w0 - i gamma)/2 c_e + sum_k g_k/2 c_gk
///   i c_gk' = (w_k - w0/2 - i kappa_k/2) c_gk + g_k/2 c_e
inline JcSolution jc_single_excitation_solve(const JcModel& model, double t_end, double dt,
                                             Index sample_stride = 1) {
  validate(model);
  if (!(dt > 0.0) || !(t_end >= 0.0) || sample_stride < 1) {
    throw ConfigError("jc_single_excitation_solve: need dt > 0, t_end >= 0, stride >= 1");
  }
  const Index nb = model.mode_frequencies.size();
  Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(nb + 1, nb + 1);
  l(0, 0) = Complex(0.5 * model.qubit_frequency, -0.5 * model.qubit_decay);
  for (Index k = 0; k < nb; ++k) {
    l(0, k + 1) = 0.5 * model.couplings(k);
    l(k + 1, 0) = 0.5 * model.couplings(k);
    l(k + 1, k + 1) = Complex(model.mode_frequencies(k) - 0.5 * model.qubit_frequency,
                              -0.5 * model.mode_decays(k));
  }
  const Eigen::MatrixXcd gen = Complex(0.0, -1.0) * l;

  const long long n = std::llround(t_end / dt);
  const long long steps = (t_end > 0.0 && n == 0) ? 1 : n;
  const double h = steps > 0 ? t_end / static_cast<double>(steps) : 0.0;
  const auto samples = static_cast<Index>(steps / sample_stride + 1);

  JcSolution sol;
  sol.excited.resize(samples);
  sol.ground.resize(samples, nb);
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(nb + 1);
  y(0) = 1.0;
  Index row = 0;
  auto store = [&](double t) {
    sol.times.push_back(t);
    sol.excited(row) = y(0);
    sol.ground.row(row) = y.tail(nb).transpose();
    ++row;
  };
  store(0.0);
  for (long long i = 0; i < steps; ++i) {
    const Eigen::VectorXcd k1 = gen * y;
    const Eigen::VectorXcd k2 = gen * (y + 0.5 * h * k1);
    const Eigen::VectorXcd k3 = gen * (y + 0.5 * h * k2);
    const Eigen::VectorXcd k4 = gen * (y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((i + 1) % sample_stride == 0) store(static_cast<double>(i + 1) * h);
  }
  return sol;
}

/// P_e = |c_e|^2 / (|c_e|^2 + sum_k |c_gk|^2) at every stored time.
inline Eigen::VectorXd jc_population(const JcSolution& sol) {
  Eigen::VectorXd pe(sol.excited.size());
  for (Index i = 0; i < sol.excited.size(); ++i) {
    const double e = std::norm(sol.excited(i));
    const double total = e + sol.ground.row(i).squaredNorm();
    if (!(total >= kNormFloor)) throw NormUnderflow("jc_population: total amplitude underflow");
    pe(i) = e / total;
  }
  return pe;
}

}  // namespace davydov_nh
