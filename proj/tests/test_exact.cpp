#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "davydov_nh/exact.hpp"
#include "davydov_nh/presets.hpp"
#include "fock_oracle.hpp"
#include "test_support.hpp"

using namespace davydov_nh;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NlzModel bare_lz(double window_coupling = 0.0) {
  NlzModel m = presets::nlz_single_mode(0.0);
  m.bath = single_mode_bath(10.0, window_coupling);
  return m;
}

JcModel rabi_model(double g1) {
  JcModel jc;
  jc.qubit_frequency = 1.0;
  jc.mode_frequencies = Eigen::VectorXd::Constant(1, 1.0);
  jc.mode_decays = Eigen::VectorXd::Zero(1);
  jc.couplings = Eigen::VectorXd::Constant(1, g1);
  return jc;
}

FockSpaceVector excited_vacuum(const JcModel& jc, int n_max) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2);
  c(0) = 1.0;
  return coherent_fock_vector(c, Eigen::VectorXcd::Zero(jc.mode_frequencies.size()), n_max);
}

}  // namespace

TEST_CASE("Fock vectors and matrices", "[exact]") {
  std::mt19937_64 rng(41);
  Eigen::VectorXcd c(2);
  c << Complex(0.6, 0.0), Complex(0.0, 0.8);
  const Eigen::VectorXcd alpha = (Eigen::VectorXcd(2) << Complex(0.7, -0.2), Complex(-0.3, 0.4)).finished();
  const FockSpaceVector v = coherent_fock_vector(c, alpha, 14);
  CHECK(v.dimension() == 2 * 15 * 15);
  CHECK_THAT(v.coefficients.squaredNorm(), WithinAbs(1.0, 1e-12));
  CHECK_THROWS_AS(coherent_fock_vector(c, alpha, 2), TruncationError);

  AnsatzState st(1, 2, 2);
  st.amplitudes().row(0) = c.transpose();
  st.displacements().row(0) = alpha.transpose();
  const Eigen::VectorXcd reference = oracle::expand(st, 14);
  CHECK((v.coefficients - reference).cwiseAbs().maxCoeff() < 1e-14);

  const ObservableRecord fr = record_fock(v, 0.0);
  const ObservableRecord ar = record_observables(st, 0.0);
  CHECK_THAT(fr.norm, WithinAbs(ar.norm, 1e-12));
  CHECK((fr.populations - ar.populations).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fr.mode_occupations - ar.mode_occupations).cwiseAbs().maxCoeff() < 1e-10);

  const FockSpaceVector big = embed(v, 20);
  CHECK_THAT(big.coefficients.squaredNorm(), WithinAbs(v.coefficients.squaredNorm(), 1e-15));
  CHECK_THROWS_AS(embed(v, 3), ShapeError);

  for (const ModelSpec& model : {ModelSpec(presets::nlz_single_mode(1.7)), ModelSpec(presets::jc_multimode(5.0))}) {
    const SpinBosonOperator h = hamiltonian(model, 0.3);
    const Eigen::MatrixXcd dense = fock_matrix(h, 3);
    const Eigen::MatrixXcd ref = Eigen::MatrixXcd(oracle::sparse(h, 3));
    CHECK((dense - ref).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("bare Landau-Zener sweep approaches the asymptotic formula", "[exact]") {
  const NlzModel m = bare_lz();
  const double p_lz = std::exp(-2.0 * std::numbers::pi * m.tunneling * m.tunneling / m.sweep_velocity);
  double previous = 1.0;
  for (double half : {25.0, 100.0, 400.0}) {
    IntegratorConfig cfg;
    cfg.t_start = -half;
    cfg.t_end = half;
    cfg.dt = 0.05 / half;  // keeps v t dt bounded at the window edges
    cfg.sample_stride = std::llround(2.0 * half / cfg.dt);
    const FockTrajectory ex = fock_propagate(m, nlz_initial_fock(m, 1), cfg);
    const double up = ex.trajectory.records.back().populations(0);
    const double dev = std::abs(up - p_lz);
    INFO("window " << half << ": P_up " << up << " vs " << p_lz);
    CHECK(dev < previous);
    previous = dev;
  }
  CHECK(previous < 2e-3);
}

TEST_CASE("exceptional point keeps the Fock norm", "[exact]") {
  const NlzModel m = presets::nlz_single_mode(1.0);
  IntegratorConfig cfg = presets::nlz_integrator(m);
  cfg.sample_stride = 10;
  const FockTrajectory ex = fock_propagate(m, nlz_initial_fock(m, 20), cfg);
  REQUIRE(ex.trajectory.complete());
  CHECK(ex.n_max >= 20);
  for (const auto& r : ex.trajectory.records) REQUIRE_THAT(r.norm, WithinAbs(1.0, 1e-6));
}

TEST_CASE("truncation gate", "[exact]") {
  NlzModel m = presets::nlz_single_mode(0.5);
  m.bath = single_mode_bath(1.0, 4.0);  // slow, strongly coupled mode
  IntegratorConfig cfg;
  cfg.t_start = -10.0;
  cfg.t_end = 10.0;
  cfg.dt = 2e-3;
  cfg.sample_stride = 100;
  FockGate gate;
  gate.max_n_max = 8;
  CHECK_THROWS_AS(fock_propagate(m, nlz_initial_fock(m, 2), cfg, gate), TruncationError);
  gate.max_n_max = 160;
  const FockTrajectory ok = fock_propagate(m, nlz_initial_fock(m, 2), cfg, gate);
  CHECK(ok.n_max > 2);

  const FockTrajectory plain = fock_propagate(presets::nlz_single_mode(0.5), nlz_initial_fock(m, 20), cfg);
  CHECK(plain.n_max == 20);
  CHECK_THROWS_AS(fock_propagate(presets::jc_multimode(1.0), nlz_initial_fock(m, 2), cfg), ShapeError);
}

TEST_CASE("exceptional-point spectrum", "[exact]") {
  const NlzModel m = presets::nlz_single_mode(0.0);
  std::vector<double> times;
  for (int i = 0; i <= 40; ++i) times.push_back(-10.0 + 0.5 * i);
  std::vector<double> gs;
  for (int i = 0; i <= 50; ++i) gs.push_back(0.05 * i);
  const SpectrumGrid grid = spectrum_scan(m, times, gs, 12, 2);
  REQUIRE(grid.eigenvalues.size() == times.size() * gs.size());
  CHECK(grid.at(0, 0).size() == 2 * 13);
  CHECK_FALSE(grid.failed.any());
  CHECK(grid.max_imag.minCoeff() >= 0.0);
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const double worst = grid.max_imag.col(static_cast<Index>(j)).maxCoeff();
    if (gs[j] < 1.0 - 1e-9) CHECK(worst < 1e-10);
    if (gs[j] > 1.1 - 1e-9) CHECK(worst > 1e-3);
  }
  const auto threshold = grid.exceptional_threshold();
  REQUIRE(threshold.has_value());
  CHECK_THAT(*threshold, WithinAbs(1.0, 0.05 + 1e-12));

  for (std::size_t i = 0; i < times.size(); ++i) {
    const Eigen::VectorXcd& ev = grid.at(i, 40);
    for (Index k = 1; k < ev.size(); ++k) {
      const bool ordered = ev(k - 1).real() < ev(k).real() ||
                           (ev(k - 1).real() == ev(k).real() && ev(k - 1).imag() <= ev(k).imag());
      REQUIRE(ordered);
    }
  }
  CHECK_THROWS_AS(spectrum_scan(m, {}, gs, 4), ShapeError);
}

TEST_CASE("spectrum scan survives a stalled QR iteration", "[exact]") {
  // With -march=native the unshifted real Schur iteration stalls at this point.
  const NlzModel m = presets::nlz_single_mode(1.5);
  const std::vector<double> ts{-10.0 + 20.0 * 94 / 200.0, 0.0};
  const SpectrumGrid grid = spectrum_scan(m, ts, {1.5}, 20);
  CHECK(!grid.failed.any());
  // A shifted solve returns the same spectrum as a complex solver.
  const Eigen::MatrixXcd h0 = fock_matrix(hamiltonian(m, 0.0), 20);
  const Eigen::MatrixXcd h = h0 + ts[0] * (fock_matrix(hamiltonian(m, 1.0), 20) - h0);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(h, false);
  REQUIRE(ces.info() == Eigen::Success);
  Eigen::VectorXcd ref = ces.eigenvalues();
  const Eigen::VectorXcd& got = grid.at(0, 0);
  for (Index i = 0; i < got.size(); ++i) {
    double best = 1e300;
    for (Index j = 0; j < ref.size(); ++j) best = std::min(best, std::abs(got(i) - ref(j)));
    CHECK(best < 1e-8);
  }
}

TEST_CASE("decoupled spectrum is the diagonal plus the ladder", "[exact]") {
  NlzModel m = bare_lz();
  m.tunneling = 0.0;
  const std::vector<double> times{-7.5, -1.0, 0.0, 2.25, 9.0};
  const int n_max = 8;
  const SpectrumGrid grid = spectrum_scan(m, times, {0.0, 1.5}, n_max);
  for (std::size_t i = 0; i < times.size(); ++i) {
    Eigen::VectorXcd expected(2 * (n_max + 1));
    for (int n = 0; n <= n_max; ++n) {
      expected(n) = 0.5 * m.sweep_velocity * times[i] + n * 10.0;
      expected(n_max + 1 + n) = -0.5 * m.sweep_velocity * times[i] + n * 10.0;
    }
    sort_spectrum(expected);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK((grid.at(i, j) - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("single-excitation JC solver", "[exact]") {
  SECTION("decoupled decay") {
    JcModel jc = presets::jc_multimode(1.0);
    jc.couplings.setZero();
    const JcSolution sol = jc_single_excitation_solve(jc, 20.0, 0.01, 100);
    const Eigen::VectorXd pe = jc_population(sol);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      CHECK_THAT(std::norm(sol.excited(static_cast<Index>(i))),
                 WithinAbs(std::exp(-jc.qubit_decay * sol.times[i]), 1e-10));
      CHECK_THAT(pe(static_cast<Index>(i)), WithinAbs(1.0, 1e-15));
    }
  }
  SECTION("resonant Rabi oscillation") {
    const double g1 = 0.2;
    const double node = std::numbers::pi / g1;
    const JcSolution sol = jc_single_excitation_solve(rabi_model(g1), node, node / 4000.0, 100);
    const Eigen::VectorXd pe = jc_population(sol);
    CHECK(pe(0) == 1.0);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
      const double c = std::cos(0.5 * g1 * sol.times[i]);
      CHECK_THAT(pe(static_cast<Index>(i)), WithinAbs(c * c, 1e-11));
    }
    CHECK_THAT(pe(pe.size() - 1), WithinAbs(0.0, 1e-11));
  }
  SECTION("errors") {
    JcModel jc = presets::jc_multimode(1.0);
    jc.qubit_decay = 100.0;
    jc.couplings.setZero();
    jc.mode_decays.setConstant(100.0);
    const JcSolution sol = jc_single_excitation_solve(jc, 1.0, 1e-3, 1000);
    CHECK_THROWS_AS(jc_population(sol), NormUnderflow);
    CHECK_THROWS_AS(jc_single_excitation_solve(jc, 1.0, 0.0), ConfigError);
  }
}

TEST_CASE("Fock propagation reproduces the single-excitation solver", "[exact]") {
  const JcModel jc = presets::jc_multimode(5.0);
  IntegratorConfig cfg;
  cfg.t_end = 50.0;
  cfg.dt = 0.01;
  cfg.sample_stride = 50;
  FockGate gate;
  gate.enabled = false;
  const FockTrajectory ex = fock_propagate(jc, excited_vacuum(jc, 1), cfg, gate);
  const JcSolution sol = jc_single_excitation_solve(jc, cfg.t_end, cfg.dt, cfg.sample_stride);
  const Eigen::VectorXd pe = jc_population(sol);
  REQUIRE(ex.trajectory.size() == sol.times.size());
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    const auto& r = ex.trajectory.records[i];
    const auto ii = static_cast<Index>(i);
    CHECK_THAT(r.time, WithinAbs(sol.times[i], 1e-12));
    CHECK_THAT(r.norm, WithinAbs(std::norm(sol.excited(ii)) + sol.ground.row(ii).squaredNorm(), 1e-8));
    CHECK_THAT(r.populations(0) / r.norm, WithinAbs(pe(ii), 1e-8));
  }
}

TEST_CASE("reference solvers are fourth order", "[exact]") {
  SECTION("Fock propagation") {
    const NlzModel m = presets::nlz_single_mode(1.5);
    auto final_norm = [&](double dt) {
      IntegratorConfig cfg;
      cfg.t_start = -5.0;
      cfg.t_end = 5.0;
      cfg.dt = dt;
      cfg.sample_stride = std::llround(10.0 / dt);
      FockGate gate;
      gate.enabled = false;
      return fock_propagate(m, nlz_initial_fock(m, 8), cfg, gate).trajectory.records.back().norm;
    };
    const double a = final_norm(0.02), b = final_norm(0.01), c = final_norm(0.005);
    const double order = std::log2(std::abs(a - b) / std::abs(b - c));
    INFO("order " << order);
    CHECK(order >= 3.8);
  }
  SECTION("single-excitation solver") {
    const JcModel jc = presets::jc_multimode(1.0);
    auto final_pe = [&](double dt) {
      const Eigen::VectorXd pe = jc_population(jc_single_excitation_solve(jc, 40.0, dt));
      return pe(pe.size() - 1);
    };
    const double a = final_pe(0.4), b = final_pe(0.2), c = final_pe(0.1);
    const double order = std::log2(std::abs(a - b) / std::abs(b - c));
    INFO("order " << order);
    CHECK(order >= 3.8);
  }
}

TEST_CASE("reference solvers are deterministic", "[exact]") {
  const NlzModel m = presets::nlz_single_mode(2.0);
  IntegratorConfig cfg;
  cfg.t_start = -3.0;
  cfg.t_end = 3.0;
  cfg.dt = 0.01;
  const FockTrajectory a = fock_propagate(m, nlz_initial_fock(m, 10), cfg);
  const FockTrajectory b = fock_propagate(m, nlz_initial_fock(m, 10), cfg);
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    REQUIRE(a.trajectory.records[i].norm == b.trajectory.records[i].norm);
  }
  const SpectrumGrid s1 = spectrum_scan(m, {-1.0, 0.5}, {0.5, 1.5, 2.5}, 6, 1);
  const SpectrumGrid s3 = spectrum_scan(m, {-1.0, 0.5}, {0.5, 1.5, 2.5}, 6, 3);
  for (std::size_t k = 0; k < s1.eigenvalues.size(); ++k) REQUIRE(s1.eigenvalues[k] == s3.eigenvalues[k]);
}
