#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "davydov_nh/exact.hpp"
#include "davydov_nh/presets.hpp"
#include "davydov_nh/tdvp.hpp"
#include "test_support.hpp"

using namespace davydov_nh;
using Catch::Approx;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// d<D|D>/dt = 2 Re <D|dD/dt>, written out from
//   d|alpha>/dt = (dalpha . b^+ - Re(alpha^* . dalpha)) |alpha>.
double norm_rate(const AnsatzState& st, const AnsatzState& d) {
  const OverlapMatrix s = overlap(st);
  Complex acc = 0.0;
  for (Index m = 0; m < st.multiplicity(); ++m) {
    for (Index n = 0; n < st.multiplicity(); ++n) {
      const Complex cross = st.displacements().row(m).conjugate().dot(d.displacements().row(n).conjugate()) ;
      const double re = st.displacements().row(n).dot(d.displacements().row(n)).real();
      for (Index a = 0; a < st.n_system(); ++a) {
        acc += std::conj(st.amplitudes()(m, a)) * s(m, n) *
               (d.amplitudes()(n, a) + st.amplitudes()(n, a) * (std::conj(cross) - re));
      }
    }
  }
  return 2.0 * acc.real();
}

JcModel lossless_jc() {
  JcModel jc = presets::jc_multimode(1.0);
  jc.qubit_decay = 0.0;
  jc.mode_decays.setZero();
  return jc;
}

JcModel bare_qubit(double w0, double gamma) {
  JcModel jc;
  jc.qubit_frequency = w0;
  jc.qubit_decay = gamma;
  jc.mode_frequencies.resize(0);
  jc.mode_decays.resize(0);
  jc.couplings.resize(0);
  return jc;
}

// 5-point centered derivative of uniformly sampled data
double centered_rate(const std::vector<double>& y, std::size_t i, double h) {
  return (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
}

}  // namespace

TEST_CASE("norm_rate helper matches a finite difference", "[tdvp]") {
  std::mt19937_64 rng(3);
  const AnsatzState st = test_support::random_state(rng, 3, 2, 2, 0.5, 0.8);
  const AnsatzState d = test_support::random_state(rng, 3, 2, 2, 1.0, 1.0);
  const double e = 1e-5;
  const double fd = (norm(detail::displaced(st, d, e)) - norm(detail::displaced(st, d, -e))) / (2.0 * e);
  CHECK_THAT(norm_rate(st, d), WithinAbs(fd, 1e-8));
}

TEST_CASE("single Ansatz without modes is the bare Schroedinger equation", "[tdvp]") {
  NlzModel m;
  m.tunneling = 0.4;
  m.non_hermiticity = 0.3;
  AnsatzState st(1, 2, 0);
  st.amplitudes() << Complex(0.6, 0.1), Complex(-0.2, 0.7);
  const GramSystem sys = assemble_eom(st, ModelSpec(m), 1.5);
  CHECK(sys.metric.isApprox(Eigen::Matrix2cd::Identity(), 0.0));
  const Eigen::Vector2cd expected = nlz_system_matrix(m, 1.5) * st.amplitudes().row(0).transpose();
  CHECK((sys.rhs - expected).cwiseAbs().maxCoeff() < 1e-15);

  const AnsatzState d = time_derivative(st, hamiltonian(m, 1.5), 1.0);
  const Eigen::Vector2cd tdse = Complex(0.0, -1.0) * expected;
  CHECK((d.amplitudes().row(0).transpose() - tdse).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("metric is Hermitian positive semi-definite", "[tdvp][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const AnsatzState st = test_support::random_state(rng, 3, 2, 3, 1.0, 1.0);
    const GramSystem sys = assemble_eom(st, ModelSpec(presets::jc_multimode(1.0)), 0.0);
    REQUIRE(sys.metric.rows() == parameter_count(st));
    REQUIRE((sys.metric - sys.metric.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(sys.metric, Eigen::EigenvaluesOnly);
    REQUIRE(eig.eigenvalues().minCoeff() > -1e-10 * eig.eigenvalues().maxCoeff());
  }
}

TEST_CASE("Hermitian flow conserves the norm", "[tdvp]") {
  std::mt19937_64 rng(23);
  const NlzModel nlz = presets::nlz_ohmic_bath(0.0, 4);
  for (int trial = 0; trial < 10; ++trial) {
    const AnsatzState st = test_support::random_state(rng, 3, 2, 4, 0.6, 0.7);
    const AnsatzState d = time_derivative(st, hamiltonian(nlz, 2.0), 1.0);
    CHECK_THAT(norm_rate(st, d), WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("Hermitian flow conserves the energy", "[tdvp]") {
  std::mt19937_64 rng(37);
  const JcModel jc = lossless_jc();
  const SpinBosonOperator h = hamiltonian(jc, 0.0);
  auto energy = [&](const AnsatzState& s) { return expectation(h, s).real() / norm(s); };
  for (int trial = 0; trial < 10; ++trial) {
    const AnsatzState st = test_support::random_state(rng, 3, 2, 3, 0.6, 0.7);
    const AnsatzState d = time_derivative(st, h, 1.0);
    const double e = 1e-5;
    const double rate = (energy(detail::displaced(st, d, e)) - energy(detail::displaced(st, d, -e))) / (2.0 * e);
    CHECK_THAT(rate, WithinAbs(0.0, 1e-8));
  }
}

TEST_CASE("flow obeys the norm-decay law at every state", "[tdvp]") {
  std::mt19937_64 rng(29);
  const JcModel jc = presets::jc_multimode(5.0);
  const SpinBosonOperator h = hamiltonian(jc, 0.0);
  const SpinBosonOperator gamma = h.anti_hermitian_part();
  for (int trial = 0; trial < 10; ++trial) {
    const AnsatzState st = test_support::random_state(rng, 3, 2, 3, 0.6, 0.7);
    const AnsatzState d = time_derivative(st, h, 1.0);
    const double expected = -2.0 * expectation(gamma, st).real();
    CHECK_THAT(norm_rate(st, d), WithinRel(expected, 1e-10));
  }
}

TEST_CASE("regularized solve", "[tdvp]") {
  for (Regularization mode : {Regularization::Filter, Regularization::Truncate}) {
    const SolveOptions opts{kDefaultSvdCutoff, mode};
    SECTION("identity metric") {
      GramSystem sys;
      sys.metric = Eigen::MatrixXcd::Identity(4, 4);
      sys.rhs = Eigen::VectorXcd::Random(4);
      const RegularizedSolution sol = regularized_solve(sys, opts);
      CHECK(sol.velocity == Complex(0.0, -1.0) * sys.rhs);
      CHECK(sol.rank == 4);
      CHECK(sol.condition == 1.0);
    }
    SECTION("one zero singular value") {
      const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(Eigen::MatrixXcd::Random(3, 3)).householderQ();
      const Eigen::MatrixXcd t = q * Eigen::Vector3cd(2.0, 0.5, 0.0).asDiagonal() * q.adjoint();
      const Eigen::VectorXcd y_true = q.leftCols(2) * Eigen::Vector2cd(Complex(1.0, 2.0), Complex(-0.5, 0.3));
      GramSystem sys;
      sys.metric = t;
      sys.rhs = Complex(0.0, 1.0) * (t * y_true);  // T y = -i h
      const RegularizedSolution sol = regularized_solve(sys, opts);
      CHECK((sol.velocity - y_true).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(sol.rank == 2);
    }
    SECTION("vanishing metric") {
      GramSystem sys;
      sys.metric = Eigen::MatrixXcd::Zero(3, 3);
      sys.rhs = Eigen::VectorXcd::Ones(3);
      CHECK_THROWS_AS(regularized_solve(sys, opts), SingularMetric);
    }
  }
  GramSystem bad;
  bad.metric = Eigen::MatrixXcd::Identity(2, 2);
  bad.rhs = Eigen::VectorXcd::Ones(3);
  CHECK_THROWS_AS(regularized_solve(bad), ShapeError);
}

TEST_CASE("subspace reduction reproduces the full solve", "[tdvp][property]") {
  std::mt19937_64 rng(31);
  const NlzModel nlz = presets::nlz_ohmic_bath(0.8, 9);
  for (Regularization mode : {Regularization::Filter, Regularization::Truncate}) {
    for (int trial = 0; trial < 10; ++trial) {
      const AnsatzState st = test_support::random_state(rng, 2, 2, 9, 0.8, 0.5);
      const SpinBosonOperator h = hamiltonian(nlz, -3.0);
      const AnsatzState full = time_derivative(st, h, 1.0, {kDefaultSvdCutoff, mode}, false);
      const AnsatzState reduced = time_derivative(st, h, 1.0, {kDefaultSvdCutoff, mode}, true);
      const double scale = full.displacements().cwiseAbs().maxCoeff() + full.amplitudes().cwiseAbs().maxCoeff();
      CHECK((full.amplitudes() - reduced.amplitudes()).cwiseAbs().maxCoeff() < 1e-9 * scale);
      CHECK((full.displacements() - reduced.displacements()).cwiseAbs().maxCoeff() < 1e-9 * scale);
    }
  }
}

TEST_CASE("free qubit phases and pure decay", "[tdvp]") {
  const double w0 = 1.3;
  AnsatzState st(1, 2, 0);
  st.amplitudes() << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  double err[2];
  int i = 0;
  for (double dt : {0.2, 0.1}) {
    const AnsatzState next = rk4_step(st, bare_qubit(w0, 0.0), 0.0, dt);
    const Complex e = st.amplitudes()(0, 0) * std::exp(Complex(0.0, -0.5 * w0 * dt));
    const Complex g = st.amplitudes()(0, 1) * std::exp(Complex(0.0, 0.5 * w0 * dt));
    err[i++] = std::max(std::abs(next.amplitudes()(0, 0) - e), std::abs(next.amplitudes()(0, 1) - g));
  }
  CHECK(err[0] < 1e-5);
  CHECK(std::log2(err[0] / err[1]) > 4.7);  // local error O(dt^5)

  const double gamma = 0.3;
  IntegratorConfig cfg;
  cfg.dt = 0.01;
  cfg.t_end = 5.0;
  cfg.sample_stride = 50;
  const Trajectory tr = propagate(make_initial_state(1, 2, 0, 0, 1), bare_qubit(w0, gamma), cfg);
  REQUIRE(tr.complete());
  for (const auto& r : tr.records) CHECK_THAT(r.norm, WithinAbs(std::exp(-gamma * r.time), 1e-10));
}

TEST_CASE("propagate bookkeeping", "[tdvp]") {
  const JcModel jc = presets::jc_multimode(1.0);
  IntegratorConfig cfg;
  cfg.t_start = 1.0;
  cfg.t_end = 1.0;
  const Trajectory empty = propagate(initial_state_for(jc, 2, 1), jc, cfg);
  REQUIRE(empty.size() == 1);
  CHECK(empty.records[0].time == 1.0);

  cfg.t_start = 0.0;
  cfg.t_end = 1.0;
  cfg.dt = 0.03;  // 33 steps of 1/33
  cfg.sample_stride = 11;
  const Trajectory tr = propagate(initial_state_for(jc, 2, 1), jc, cfg);
  REQUIRE(tr.size() == 4);
  CHECK_THAT(tr.records.back().time, WithinAbs(1.0, 1e-15));
  CHECK_THAT(tr.records[1].time, WithinAbs(1.0 / 3.0, 1e-15));

  IntegratorConfig bad;
  bad.t_end = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = IntegratorConfig{};
  bad.svd_cutoff = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = IntegratorConfig{};
  bad.sample_stride = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = IntegratorConfig{};
  bad.dt = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(propagate(AnsatzState(1, 3, 3), jc, IntegratorConfig{}), ShapeError);
  CHECK_THROWS_AS(rk4_step(initial_state_for(jc, 1, 1), jc, 0.0, 0.0), ConfigError);
}

TEST_CASE("oversized steps are rejected", "[tdvp]") {
  const JcModel jc = presets::jc_multimode(1.0);
  const AnsatzState init = initial_state_for(jc, 3, 7);
  StepOptions opts;
  opts.max_change = 0.01;
  CHECK_THROWS_AS(rk4_step(init, jc, 0.0, 0.01, opts), StepRejected);
  CHECK_NOTHROW(rk4_step(init, jc, 0.0, 1e-5, opts));

  IntegratorConfig cfg;
  cfg.t_end = 0.01;
  cfg.dt = 0.01;
  cfg.max_step_retries = 0;
  CHECK_FALSE(propagate(init, jc, cfg).complete());
  cfg.max_step_retries = 8;
  const Trajectory tr = propagate(init, jc, cfg);
  CHECK(tr.complete());
  CHECK(tr.size() == 2);
}

TEST_CASE("runaway integration ends with an error tag and keeps the records", "[tdvp]") {
  const JcModel jc = presets::jc_multimode(1.0);
  IntegratorConfig cfg;
  cfg.dt = 40.0;
  cfg.t_end = 4.0e4;
  cfg.max_step_retries = 1;
  const Trajectory tr = propagate(initial_state_for(jc, 1, 1), jc, cfg, [](const AnsatzState& s, double t) {
    ObservableRecord r;
    r.time = t;
    r.norm = s.amplitudes().squaredNorm();
    return r;
  });
  REQUIRE_FALSE(tr.complete());
  CHECK(*tr.error == ErrorKind::StepRejected);
  CHECK(tr.size() >= 1);
  CHECK(tr.size() < 1000);
}

TEST_CASE("energy shift changes nothing observable", "[tdvp]") {
  const HtcModel htc = presets::htc_loss(0.004);
  IntegratorConfig cfg = presets::htc_integrator(htc);
  cfg.t_end = 10.0;
  cfg.dt = 0.01;
  cfg.sample_stride = 100;
  const AnsatzState init = initial_state_for(htc, 2, 9);
  const Trajectory shifted = propagate(init, htc, cfg);
  cfg.energy_shift = 0.0;
  const Trajectory plain = propagate(init, htc, cfg);
  REQUIRE(shifted.size() == plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK_THAT(shifted.records[i].norm, WithinAbs(plain.records[i].norm, 1e-9));
    CHECK_THAT(shifted.records[i].populations(htc.photon_state()),
               WithinAbs(plain.records[i].populations(htc.photon_state()), 1e-6));
  }
}

TEST_CASE("NLZ single mode against exact propagation", "[tdvp][slow]") {
  SECTION("M = 2") {
    // the norm grows by orders of magnitude for g > 1, so compare relative there
    for (double g : {0.5, 1.5}) {
      const NlzModel m = presets::nlz_single_mode(g);
      IntegratorConfig cfg = presets::nlz_integrator(m);
      cfg.sample_stride = 20;
      const Trajectory var = propagate(initial_state_for(m, 2, 7), m, cfg);
      const FockTrajectory ex = fock_propagate(m, nlz_initial_fock(m, 20), cfg);
      REQUIRE(var.complete());
      REQUIRE(var.size() == ex.trajectory.size());
      double dev = 0.0;
      for (std::size_t i = 0; i < var.size(); ++i) {
        const double n_ex = ex.trajectory.records[i].norm;
        dev = std::max(dev, std::abs(var.records[i].norm - n_ex) / std::max(1.0, n_ex));
      }
      INFO("g = " << g);
      CHECK(dev < 1e-3);
    }
  }
  SECTION("duplicated Ansatz stays finite and accurate") {
    const NlzModel m = presets::nlz_single_mode(0.5);
    IntegratorConfig cfg = presets::nlz_integrator(m);
    cfg.sample_stride = 20;
    const AnsatzState twin = initial_state_for(m, 2, 7, 0.0);
    REQUIRE(twin.displacements().row(0) == twin.displacements().row(1));
    const Trajectory var = propagate(twin, m, cfg);
    const FockTrajectory ex = fock_propagate(m, nlz_initial_fock(m, 20), cfg);
    REQUIRE(var.complete());
    double dev = 0.0;
    for (std::size_t i = 0; i < var.size(); ++i) {
      dev = std::max(dev, std::abs(var.records[i].populations(0) - ex.trajectory.records[i].populations(0)));
    }
    CHECK(dev < 1e-3);
  }
  SECTION("exceptional point keeps the norm") {
    const NlzModel m = presets::nlz_single_mode(1.0);
    IntegratorConfig cfg = presets::nlz_integrator(m);
    cfg.sample_stride = 10;
    const Trajectory var = propagate(initial_state_for(m, 2, 7), m, cfg);
    REQUIRE(var.complete());
    for (const auto& r : var.records) REQUIRE_THAT(r.norm, WithinAbs(1.0, 1e-6));
  }
}

TEST_CASE("seeded runs are bit-identical", "[tdvp]") {
  const NlzModel m = presets::nlz_ohmic_bath(1.5, 8);
  IntegratorConfig cfg;
  cfg.t_start = -2.0;
  cfg.t_end = 0.0;
  cfg.dt = 2e-3;
  cfg.seed = 77;
  auto run = [&] { return propagate(initial_state_for(m, 3, cfg.seed), m, cfg); };
  const Trajectory a = run();
  const Trajectory b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.records[i].norm == b.records[i].norm);
    REQUIRE(a.records[i].populations == b.records[i].populations);
    REQUIRE(a.records[i].mode_occupations == b.records[i].mode_occupations);
  }
}

TEST_CASE("RK4 self-convergence is fourth order", "[tdvp]") {
  // Starting from the near-degenerate vacuum Ansatz the first steps resolve a
  // fast transient, so the order is measured from generic states of the same model.
  const JcModel jc = presets::jc_multimode(1.0);
  std::mt19937_64 rng(5);
  AnsatzState generic = test_support::random_state(rng, 3, 2, 3, 0.5, 0.5);
  generic.amplitudes() /= std::sqrt(norm(generic));

  auto observed_order = [&](const AnsatzState& init, double dt) {
    auto final_state = [&](double step) {
      IntegratorConfig cfg;
      cfg.t_end = 8.0;
      cfg.dt = step;
      cfg.sample_stride = 1 << 20;
      cfg.max_step_change = 1e9;  // fixed steps only
      return evolve(init, jc, cfg, [](const AnsatzState&, double) {}).final_state;
    };
    const AnsatzState a = final_state(dt);
    const AnsatzState b = final_state(dt / 2.0);
    const AnsatzState c = final_state(dt / 4.0);
    auto dist = [](const AnsatzState& x, const AnsatzState& y) {
      return std::abs(norm(x) - norm(y)) + (system_populations(x) - system_populations(y)).cwiseAbs().maxCoeff();
    };
    return std::log2(dist(a, b) / dist(b, c));
  };
  const double generic_order = observed_order(generic, 0.08);
  const double single_order = observed_order(initial_state_for(jc, 1, 7), 0.02);
  INFO("orders " << generic_order << " " << single_order);
  CHECK(generic_order >= 3.8);
  CHECK(single_order >= 3.8);
}

TEST_CASE("lossless JC conserves norm and energy", "[tdvp]") {
  const JcModel jc = lossless_jc();
  IntegratorConfig cfg = presets::jc_integrator();
  cfg.sample_stride = 100;
  const SpinBosonOperator h = hamiltonian(jc, 0.0);
  std::vector<double> n, e;
  evolve(initial_state_for(jc, 3, 7), jc, cfg, [&](const AnsatzState& st, double) {
    const ObservableRecord r = record_observables(st, 0.0);
    n.push_back(r.norm);
    e.push_back(expectation(h, st).real() / r.norm);
  });
  for (std::size_t i = 0; i < n.size(); ++i) {
    CHECK_THAT(n[i], WithinAbs(n[0], 1e-6 * n[0]));
    CHECK_THAT(e[i], WithinAbs(e[0], 1e-6 * std::abs(e[0])));
  }
}

TEST_CASE("lossy JC: monotone norm obeying the decay law", "[tdvp]") {
  const JcModel jc = presets::jc_multimode(1.0);
  IntegratorConfig cfg = presets::jc_integrator();
  cfg.t_end = 40.0;
  const SpinBosonOperator gamma = hamiltonian(jc, 0.0).anti_hermitian_part();
  std::vector<double> t, n, rate;
  evolve(initial_state_for(jc, 3, 7), jc, cfg, [&](const AnsatzState& st, double time) {
    t.push_back(time);
    n.push_back(norm(st));
    rate.push_back(-2.0 * expectation(gamma, st).real());
  });
  const double h = t[1] - t[0];
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < t.size(); ++i) {
    worst = std::max(worst, std::abs(centered_rate(n, i, h) - rate[i]) / std::abs(rate[i]));
  }
  CHECK(worst < 1e-4);
  for (std::size_t i = 1; i < n.size(); ++i) REQUIRE(n[i] <= n[i - 1] + 1e-9);
}

TEST_CASE("JC against the single-excitation solution", "[tdvp][slow]") {
  const JcModel jc = presets::jc_multimode(5.0);
  IntegratorConfig cfg = presets::jc_integrator();
  cfg.t_end = 60.0;
  const double dt = default_time_step(jc, 0.0, cfg.t_end);
  const Trajectory var = propagate(initial_state_for(jc, 3, 7), jc, cfg);
  const Eigen::VectorXd pe = jc_population(jc_single_excitation_solve(jc, cfg.t_end, dt));
  const std::vector<double> pv = var.normalized_population(0);
  REQUIRE(static_cast<Index>(pv.size()) == pe.size());
  double dev = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) dev = std::max(dev, std::abs(pv[i] - pe(static_cast<Index>(i))));
  CHECK(dev < 1e-3);
}

TEST_CASE("default time step", "[tdvp]") {
  CHECK_THAT(default_time_step(presets::nlz_single_mode(1.0), -20.0, 20.0),
             WithinRel(2e-3 * std::numbers::pi / 10.0, 1e-14));
  CHECK_THAT(default_time_step(presets::jc_multimode(1.0), 0.0, 200.0),
             WithinRel(2e-3 * std::numbers::pi / 1.3, 1e-14));
}
