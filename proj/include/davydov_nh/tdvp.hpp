#pragma once

// Variational equations of motion for the multi-D2 Ansatz.
//
// The Dirac-Frenkel condition <dD/du_j| (i d/dt - H) |D> = 0 is imposed with H
// taken as given (non-Hermitian allowed); only the ket evolves. Tangent
// directions are
//
//   dD/dA_ns     = |s> |alpha_n>
//   dD/dalpha_nk = sum_s A_ns |s> b_k^+ |alpha_n>
//
// The second is the holomorphic derivative; the derivative of the coherent-state
// normalization, -Re(alpha_n^* . alpha_n') |alpha_n>, lies along dD/dA_ns and is
// folded back into dA/dt after the solve:
//
//   dA_ns/dt = x_ns + A_ns Re(sum_k conj(alpha_nk) dalpha_nk/dt).
//
// Parameter layout: A_ns at n*N_s + s, then alpha_nk at M*N_s + n*N_b + k.

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "davydov_nh/ansatz.hpp"
#include "davydov_nh/errors.hpp"
#include "davydov_nh/models.hpp"
#include "davydov_nh/operator.hpp"
#include "davydov_nh/trajectory.hpp"

namespace davydov_nh {

inline constexpr double kDefaultSvdCutoff = 1e-8;

/// How eigenvalues of the metric near cutoff * sigma_max are treated.
/// Filter: 1/sigma becomes sigma / (sigma^2 + eps^2), which keeps the velocity
/// a smooth function of the state. Truncate: plain pseudo-inverse, eigenvalues
/// below eps dropped; the retained rank can flicker between RK4 stages.
enum class Regularization { Filter, Truncate };

struct SolveOptions {
  double cutoff = kDefaultSvdCutoff;
  Regularization mode = Regularization::Filter;
};

/// Metric T and right-hand side h of  T du/dt = -i h.  h already carries the
/// model's time scale, so it is in angular frequency units.
struct GramSystem {
  Eigen::MatrixXcd metric;
  Eigen::VectorXcd rhs;
  double condition = std::numeric_limits<double>::quiet_NaN();
  /// Largest eigenvalue of the part of the full metric that was projected out
  /// (zero when the system is the full metric). Sets the cutoff reference.
  double complement_scale = 0.0;
};

struct RegularizedSolution {
  Eigen::VectorXcd velocity;
  double condition = std::numeric_limits<double>::quiet_NaN();
  Index rank = 0;
};

/// Per-step settings of rk4_step. A step is rejected (StepRejected) when any
/// stage would move a parameter by more than max_change * (1 + max |u|).
struct StepOptions {
  SolveOptions solve;
  double energy_shift = 0.0;
  double max_change = std::numeric_limits<double>::infinity();
};

struct IntegratorConfig {
  double dt = 0.0;  // 0 selects default_time_step()
  double t_start = 0.0;
  double t_end = 1.0;
  double svd_cutoff = kDefaultSvdCutoff;
  Regularization regularization = Regularization::Filter;
  /// Constant subtracted from the Hamiltonian (model energy units). Only the
  /// global phase of the state changes; it removes a fast carrier oscillation.
  double energy_shift = 0.0;
  Index sample_stride = 1;
  std::uint64_t seed = 0;
  /// Largest parameter change a single step may make, relative to 1 + max |u|.
  /// Guards the fast transient right after a near-degenerate start.
  double max_step_change = 0.01;
  int max_step_retries = 8;

  void validate() const {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("integrator.dt must be positive");
    if (!std::isfinite(t_start) || !std::isfinite(t_end) || t_end < t_start) {
      throw ConfigError("integrator: need finite t_start <= t_end");
    }
    if (!(svd_cutoff > 0.0 && svd_cutoff < 1.0)) {
      throw ConfigError("integrator.svd_cutoff must lie in (0, 1)");
    }
    if (sample_stride < 1) throw ConfigError("integrator.sample_stride must be >= 1");
    if (max_step_retries < 0) throw ConfigError("integrator.max_step_retries must be >= 0");
    if (!std::isfinite(energy_shift)) throw ConfigError("integrator.energy_shift must be finite");
    if (!(max_step_change > 0.0)) throw ConfigError("integrator.max_step_change must be positive");
  }

  SolveOptions solve_options() const { return {svd_cutoff, regularization}; }
  StepOptions step_options() const { return {solve_options(), energy_shift, max_step_change}; }
};

inline Index parameter_count(const AnsatzState& state) {
  return state.multiplicity() * (state.n_system() + state.n_modes());
}

/// 1e-3 of the shortest period in the model.
inline double default_time_step(const ModelSpec& model, double t_start, double t_end) {
  return 1e-3 * 2.0 * std::numbers::pi / characteristic_frequency(model, t_start, t_end);
}

namespace detail {

// Metric for amplitudes A (M x N_s) and displacement coordinates disp (M x q).
// S and rho are always those of the full state.
inline Eigen::MatrixXcd build_metric(const Eigen::MatrixXcd& amps, const Eigen::MatrixXcd& disp,
                                     const OverlapMatrix& s, const Eigen::MatrixXcd& rho) {
  const Index M = amps.rows();
  const Index ns = amps.cols();
  const Index q = disp.cols();
  const Index off = M * ns;
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(M * (ns + q), M * (ns + q));
  for (Index m = 0; m < M; ++m) {
    for (Index n = 0; n < M; ++n) {
      const Complex smn = s(m, n);
      for (Index a = 0; a < ns; ++a) t(m * ns + a, n * ns + a) = smn;
      for (Index a = 0; a < ns; ++a) {
        for (Index k = 0; k < q; ++k) {
          t(m * ns + a, off + n * q + k) = amps(n, a) * std::conj(disp(m, k)) * smn;
          t(off + m * q + k, n * ns + a) = std::conj(amps(m, a)) * disp(n, k) * smn;
        }
      }
      const Complex kmn = rho(m, n) * smn;
      auto block = t.block(off + m * q, off + n * q, q, q);
      block.noalias() = kmn * (disp.row(n).transpose() * disp.row(m).conjugate());
      block.diagonal().array() += kmn;
    }
  }
  return t;
}

struct RhsParts {
  Eigen::VectorXcd amplitude;      // length M*N_s
  Eigen::MatrixXcd displacement;   // M x N_b
};

inline RhsParts build_rhs(const SpinBosonOperator& op, const AnsatzState& state,
                          const OverlapMatrix& s, const Eigen::MatrixXcd& rho) {
  const Index M = state.multiplicity();
  const Index ns = state.n_system();
  const Eigen::MatrixXcd& amps = state.amplitudes();
  const Eigen::MatrixXcd& disp = state.displacements();
  const Eigen::MatrixXcd table = coherent_matrix(op, state, s);
  const Eigen::VectorXcd a = flat_amplitudes(state);

  RhsParts out;
  out.amplitude = table * a;
  if (state.n_modes() == 0) {
    out.displacement.resize(M, 0);
    return out;
  }
  // G_mn = sum_ss' conj(A_ms) H_(ms),(ns') A_ns'
  Eigen::MatrixXcd g(M, M);
  for (Index m = 0; m < M; ++m) {
    for (Index n = 0; n < M; ++n) {
      g(m, n) = (amps.row(m).conjugate() * table.block(m * ns, n * ns, ns, ns) *
                 amps.row(n).transpose())(0, 0);
    }
  }
  // Q(m, s*N_s + s') = conj(A_ms) (S A)_ms'
  const Eigen::MatrixXcd sa = s * amps;
  Eigen::MatrixXcd qmat(M, ns * ns);
  for (Index m = 0; m < M; ++m) {
    for (Index x = 0; x < ns; ++x) {
      for (Index y = 0; y < ns; ++y) qmat(m, x * ns + y) = std::conj(amps(m, x)) * sa(m, y);
    }
  }
  const Eigen::MatrixXcd weights = rho.cwiseProduct(s);
  out.displacement = g * disp + (weights * disp) * op.mode_energies.asDiagonal();
  out.displacement.noalias() += qmat * op.creation;
  return out;
}

}  // namespace detail

/// Full (T, h) at time t, with T of dimension M (N_s + N_b).
inline GramSystem assemble_eom(const AnsatzState& state, const SpinBosonOperator& op,
                               double scale = 1.0) {
  check_compatible(op, state, "assemble_eom");
  const OverlapMatrix s = overlap(state);
  const Eigen::MatrixXcd rho = detail::amplitude_products(state);
  const detail::RhsParts parts = detail::build_rhs(op, state, s, rho);

  GramSystem sys;
  sys.metric = detail::build_metric(state.amplitudes(), state.displacements(), s, rho);
  const Index off = parts.amplitude.size();
  sys.rhs.resize(parameter_count(state));
  sys.rhs.head(off) = parts.amplitude;
  const Eigen::MatrixXcd dt = parts.displacement.transpose();
  sys.rhs.tail(sys.rhs.size() - off) = Eigen::Map<const Eigen::VectorXcd>(dt.data(), dt.size());
  sys.rhs *= scale;
  return sys;
}

inline GramSystem assemble_eom(const AnsatzState& state, const ModelSpec& model, double t) {
  return assemble_eom(state, hamiltonian(model, t), time_scale(model));
}

/// Solves T y = -i h through the pseudo-inverse of the Hermitian metric,
/// with eps = cutoff * sigma_max. `rank` counts eigenvalues above eps.
inline RegularizedSolution regularized_solve(const GramSystem& system,
                                             const SolveOptions& options = {}) {
  const Index p = system.metric.rows();
  if (system.metric.cols() != p || system.rhs.size() != p) {
    throw ShapeError("regularized_solve: metric and rhs dimensions disagree");
  }
  RegularizedSolution out;
  out.velocity = Eigen::VectorXcd::Zero(p);
  if (p == 0) return out;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(system.metric);
  if (eig.info() != Eigen::Success) throw SingularMetric("regularized_solve: eigensolver failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double sigma_max = std::max(lambda.cwiseAbs().maxCoeff(), system.complement_scale);
  if (!std::isfinite(sigma_max) || !(sigma_max > std::numeric_limits<double>::min())) {
    throw SingularMetric("regularized_solve: all singular values underflow");
  }
  const double threshold = options.cutoff * sigma_max;
  const Eigen::MatrixXcd& v = eig.eigenvectors();
  Eigen::VectorXcd coeff = v.adjoint() * (Complex(0.0, -1.0) * system.rhs);
  double sigma_min = sigma_max;
  for (Index i = 0; i < p; ++i) {
    const double sv = std::abs(lambda(i));
    if (sv > threshold) {
      sigma_min = std::min(sigma_min, sv);
      ++out.rank;
    }
    if (options.mode == Regularization::Filter) {
      coeff(i) *= lambda(i) / (lambda(i) * lambda(i) + threshold * threshold);
    } else {
      coeff(i) = sv > threshold ? coeff(i) / lambda(i) : Complex(0.0, 0.0);
    }
  }
  if (out.rank == 0) throw SingularMetric("regularized_solve: no singular value above cutoff");
  out.velocity.noalias() = v * coeff;
  out.condition = sigma_max / sigma_min;
  return out;
}

/// dA/dt and dalpha/dt packed into an AnsatzState-shaped container.
///
/// When N_b > 2M the displacement block is solved inside the span of
/// {alpha_n, h_alpha,n}: the metric maps that subspace into itself and acts as
/// (rho o S) (x) 1 on its complement, where h vanishes, so the reduced
/// pseudo-inverse reproduces the full one with the cutoff referenced to the
/// global sigma_max.
///
/// |D> itself is the tangent vector y_D = (A, 0), so the exact flow has the
/// component -i <D|H|D> / N along it. That component is taken exactly and only
/// the T-orthogonal complement (metric T - d d^+ / N, d = T y_D) goes through
/// the regularized solve. Then dN/dt = -2 <Gamma> holds to round-off, and for
/// Hermitian H so does conservation of <H>, whatever the cutoff.
inline AnsatzState time_derivative(const AnsatzState& state, const SpinBosonOperator& op,
                                   double scale, const SolveOptions& options = {},
                                   bool reduce = true) {
  check_compatible(op, state, "time_derivative");
  if (!state.is_finite()) throw StepRejected("time_derivative: non-finite parameters");

  const Index M = state.multiplicity();
  const Index ns = state.n_system();
  const Index nb = state.n_modes();
  const OverlapMatrix s = overlap(state);
  const Eigen::MatrixXcd rho = detail::amplitude_products(state);
  detail::RhsParts parts = detail::build_rhs(op, state, s, rho);

  const bool use_subspace = reduce && nb > 2 * M;
  Eigen::MatrixXcd basis;  // N_b x q, orthonormal columns
  Eigen::MatrixXcd disp_coords = state.displacements();
  Eigen::MatrixXcd rhs_disp = parts.displacement;
  GramSystem sys;
  if (use_subspace) {
    Eigen::MatrixXcd span(nb, 2 * M);
    span << state.displacements().transpose(), parts.displacement.transpose();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(span);
    basis = qr.householderQ() * Eigen::MatrixXcd::Identity(nb, 2 * M);
    disp_coords = state.displacements() * basis.conjugate();
    rhs_disp = parts.displacement * basis.conjugate();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> keig(rho.cwiseProduct(s),
                                                         Eigen::EigenvaluesOnly);
    sys.complement_scale = keig.eigenvalues().cwiseAbs().maxCoeff();
  }
  const Index q = disp_coords.cols();
  sys.metric = detail::build_metric(state.amplitudes(), disp_coords, s, rho);
  sys.rhs.resize(M * (ns + q));
  sys.rhs.head(M * ns) = parts.amplitude;
  for (Index n = 0; n < M; ++n) sys.rhs.segment(M * ns + n * q, q) = rhs_disp.row(n).transpose();
  sys.rhs *= scale;
  if (!sys.metric.allFinite() || !sys.rhs.allFinite()) {
    throw StepRejected("time_derivative: equations of motion overflow");
  }

  // |D> direction solved exactly, the T-orthogonal rest regularized
  const Index na = M * ns;
  const Eigen::VectorXcd amps = flat_amplitudes(state);
  const Eigen::VectorXcd d = sys.metric.leftCols(na) * amps;
  const double n_f = amps.dot(d.head(na)).real();
  Eigen::VectorXcd velocity;
  if (n_f > kNormFloor) {
    const Complex h_d = amps.dot(sys.rhs.head(na));
    GramSystem rest;
    rest.metric = sys.metric - (d * d.adjoint()) / n_f;
    rest.rhs = sys.rhs - d * (h_d / n_f);
    rest.complement_scale = sys.complement_scale;
    velocity = regularized_solve(rest, options).velocity;
    const Complex along = d.dot(velocity) / n_f;
    velocity.head(na) += (Complex(0.0, -1.0) * h_d / n_f - along) * amps;
  } else {
    velocity = regularized_solve(sys, options).velocity;
  }

  AnsatzState deriv(M, ns, nb);
  Eigen::MatrixXcd coords_dot(M, q);
  for (Index n = 0; n < M; ++n) coords_dot.row(n) = velocity.segment(M * ns + n * q, q).transpose();
  deriv.displacements() = use_subspace ? Eigen::MatrixXcd(coords_dot * basis.transpose()) : coords_dot;
  for (Index n = 0; n < M; ++n) {
    const double renorm =
        nb > 0 ? state.displacements().row(n).dot(deriv.displacements().row(n)).real() : 0.0;
    for (Index a = 0; a < ns; ++a) {
      deriv.amplitudes()(n, a) = velocity(n * ns + a) + state.amplitudes()(n, a) * renorm;
    }
  }
  return deriv;
}

namespace detail {

inline AnsatzState displaced(const AnsatzState& y, const AnsatzState& k, double h) {
  return AnsatzState(y.amplitudes() + h * k.amplitudes(), y.displacements() + h * k.displacements());
}

}  // namespace detail

/// One classical RK4 step of all variational parameters.
inline AnsatzState rk4_step(const AnsatzState& state, const ModelSpec& model, double t, double dt,
                            const StepOptions& options = {}) {
  if (!(dt > 0.0)) throw ConfigError("rk4_step: dt must be positive");
  const double scale = time_scale(model);
  auto shifted = [&](double time) {
    SpinBosonOperator h = hamiltonian(model, time);
    h.system.diagonal().array() -= options.energy_shift;
    return h;
  };
  const double limit = options.max_change *
                       (1.0 + std::max(state.amplitudes().cwiseAbs().maxCoeff(),
                                       state.n_modes() > 0 ? state.displacements().cwiseAbs().maxCoeff() : 0.0));
  auto stage = [&](const AnsatzState& y, const SpinBosonOperator& h) {
    AnsatzState k = time_derivative(y, h, scale, options.solve);
    double fastest = k.amplitudes().cwiseAbs().maxCoeff();
    if (k.n_modes() > 0) fastest = std::max(fastest, k.displacements().cwiseAbs().maxCoeff());
    if (dt * fastest > limit) {
      throw StepRejected("rk4_step: parameter change too large at t = " + std::to_string(t));
    }
    return k;
  };
  const SpinBosonOperator h0 = shifted(t);
  const SpinBosonOperator hm = shifted(t + 0.5 * dt);
  const SpinBosonOperator h1 = shifted(t + dt);

  const AnsatzState k1 = stage(state, h0);
  const AnsatzState k2 = stage(detail::displaced(state, k1, 0.5 * dt), hm);
  const AnsatzState k3 = stage(detail::displaced(state, k2, 0.5 * dt), hm);
  const AnsatzState k4 = stage(detail::displaced(state, k3, dt), h1);

  AnsatzState next(
      state.amplitudes() +
          (dt / 6.0) * (k1.amplitudes() + 2.0 * k2.amplitudes() + 2.0 * k3.amplitudes() + k4.amplitudes()),
      state.displacements() + (dt / 6.0) * (k1.displacements() + 2.0 * k2.displacements() +
                                            2.0 * k3.displacements() + k4.displacements()));
  if (!next.is_finite()) throw StepRejected("rk4_step: non-finite parameters at t = " + std::to_string(t + dt));
  return next;
}

using StateObserver = std::function<void(const AnsatzState&, double)>;
using Recorder = std::function<ObservableRecord(const AnsatzState&, double)>;

struct EvolutionResult {
  AnsatzState final_state;
  double final_time = 0.0;
  std::optional<ErrorKind> error;
  std::string error_message;
};

/// Steps from t_start to t_end and calls `observe` at t_start and after every
/// `sample_stride` steps. Step i runs from t_start + i dt to t_start + (i+1) dt,
/// with dt adjusted so the interval holds an integer number of steps. A rejected
/// step is retried with 2, 4, 8, ... substeps up to max_step_retries times.
inline EvolutionResult evolve(const AnsatzState& initial, const ModelSpec& model,
                              const IntegratorConfig& cfg, const StateObserver& observe) {
  cfg.validate();
  validate(model);
  if (initial.n_system() != system_dimension(model) || initial.n_modes() != mode_count(model)) {
    throw ShapeError("evolve: state shape does not match the model");
  }
  const double span = cfg.t_end - cfg.t_start;
  const double dt_req = cfg.dt > 0.0 ? cfg.dt : default_time_step(model, cfg.t_start, cfg.t_end);
  const auto n_steps = static_cast<long long>(std::llround(span / dt_req));
  const long long steps = (span > 0.0 && n_steps == 0) ? 1 : n_steps;
  const double dt = steps > 0 ? span / static_cast<double>(steps) : 0.0;

  EvolutionResult out{initial, cfg.t_start, std::nullopt, {}};
  observe(out.final_state, cfg.t_start);
  for (long long i = 0; i < steps; ++i) {
    const double t = cfg.t_start + static_cast<double>(i) * dt;
    try {
      try {
        out.final_state = rk4_step(out.final_state, model, t, dt, cfg.step_options());
      } catch (const StepRejected&) {
        bool accepted = false;
        for (int r = 1; r <= cfg.max_step_retries && !accepted; ++r) {
          const long long sub = 1LL << r;
          const double h = dt / static_cast<double>(sub);
          try {
            AnsatzState trial = out.final_state;
            for (long long j = 0; j < sub; ++j) {
              trial = rk4_step(trial, model, t + static_cast<double>(j) * h, h, cfg.step_options());
            }
            out.final_state = std::move(trial);
            accepted = true;
          } catch (const StepRejected&) {
          }
        }
        if (!accepted) throw;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StepRejected && e.kind() != ErrorKind::SingularMetric) throw;
      out.error = e.kind();
      out.error_message = e.what();
      return out;
    }
    out.final_time = cfg.t_start + static_cast<double>(i + 1) * dt;
    if ((i + 1) % cfg.sample_stride == 0) observe(out.final_state, out.final_time);
  }
  return out;
}

/// Full trajectory of recorded observables; deterministic for fixed inputs.
inline Trajectory propagate(const AnsatzState& initial, const ModelSpec& model,
                            const IntegratorConfig& cfg, const Recorder& recorder = record_observables) {
  Trajectory traj;
  const EvolutionResult res = evolve(initial, model, cfg, [&](const AnsatzState& st, double t) {
    traj.records.push_back(recorder(st, t));
  });
  traj.error = res.error;
  traj.error_message = res.error_message;
  return traj;
}

/// Initial product state for the preset convention of each model.
inline AnsatzState initial_state_for(const ModelSpec& model, Index multiplicity, std::uint64_t seed,
                                     double noise_radius = kDefaultNoiseRadius) {
  return make_initial_state(multiplicity, system_dimension(model),
                            default_initial_system_state(model), mode_count(model), seed,
                            noise_radius);
}

}  // namespace davydov_nh
