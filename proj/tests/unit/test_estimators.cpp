#include "doctest.h"

#include "nqs/errors.hpp"
#include "nqs/estimators.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace nqs;
using namespace nqs::testing;

namespace {

/// Unnormalized state vector (no rescaling), so that global factors survive.
Eigen::VectorXcd raw_state(const Ansatz& psi) {
  const int L = psi.num_sites();
  Eigen::VectorXcd v(Eigen::Index{1} << L);
  for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = std::exp(psi.log_amplitude(SpinConfiguration::from_code(static_cast<Code>(c), L)));
  return v;
}

double dense_overlap(const Eigen::VectorXcd& target, const Eigen::VectorXcd& trial, const Eigen::MatrixXcd& u) {
  return std::norm(trial.dot(u * target)) / (trial.squaredNorm() * target.squaredNorm());
}

Eigen::MatrixXcd direct_covariance(const SampleSet& s, const Eigen::MatrixXcd& o) {
  const Eigen::Index n = o.rows();
  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(n, n);
  Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    mean += s.weights(k) * o.col(k);
    cov += s.weights(k) * o.col(k).conjugate() * o.col(k).transpose();
  }
  return cov - mean.conjugate() * mean.transpose();
}

Eigen::VectorXcd direct_force(const SampleSet& s, const Eigen::MatrixXcd& o, const Eigen::VectorXcd& local) {
  Eigen::VectorXcd mo = Eigen::VectorXcd::Zero(o.rows());
  Eigen::VectorXcd mlo = Eigen::VectorXcd::Zero(o.rows());
  Complex ml = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    mo += s.weights(k) * o.col(k).conjugate();
    mlo += s.weights(k) * local(k) * o.col(k).conjugate();
    ml += s.weights(k) * local(k);
  }
  return mlo - ml * mo;
}

}  // namespace

TEST_CASE("local energy of the uniform state") {
  const auto model = build_model(5, 0.8, 0.6, -0.4);
  const auto psi = make_ansatz(default_fnn_shape(5));
  for (Code c = 0; c < 32; ++c) {
    const auto x = SpinConfiguration::from_code(c, 5);
    double zz = 0.0, z = 0.0;
    for (int l = 0; l < 5; ++l) {
      z += x[l];
      if (l + 1 < 5) zz += x[l] * x[l + 1];
    }
    CHECK(std::abs(local_energy(*psi, model, x) - Complex(0.8 * zz + 0.4 * z - 0.6 * 5)) < 1e-13);
  }
}

TEST_CASE("eigenstates have constant local energy and zero force") {
  const auto model = build_model(2, 1.0, 0.5, 0.5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(kron_hamiltonian(2, 1.0, 0.5, 0.5));
  for (int n = 0; n < 4; ++n) {
    const Eigen::VectorXcd v = eig.eigenvectors().col(n);
    // the singlet-like eigenvector vanishes on the aligned configurations
    if (v.cwiseAbs().minCoeff() < 1e-8) continue;
    const TableAnsatz psi = TableAnsatz::from_state(2, v * Complex(0.3, 0.9));
    for (Code c = 0; c < 4; ++c) {
      CHECK(std::abs(local_energy(psi, model, SpinConfiguration::from_code(c, 2)) - eig.eigenvalues()(n)) < 1e-12);
    }
    const TvmcForce f = tvmc_force(full_summation(psi), psi, model);
    CHECK(f.force.norm() < 1e-8);
  }
}

TEST_CASE("uniform state is the ground state of the field-only chain") {
  const auto model = build_model(6, 0.0, 0.7, 0.0);
  const auto psi = make_ansatz(rbm_shape(6, 1));
  const TvmcForce f = tvmc_force(full_summation(*psi), *psi, model);
  CHECK(f.force.norm() < 1e-12);
  CHECK(std::abs(f.energy - Complex(-0.7 * 6)) < 1e-12);
}

TEST_CASE("full-summation expectations equal dense algebra") {
  for (int L : {3, 6, 8}) {
    const auto psi = random_rbm(L, L, 0.4, static_cast<std::uint64_t>(L));
    const auto model = build_model(L, 1.0, 0.5, 0.5);
    const SampleSet s = full_summation(*psi);
    const Eigen::VectorXcd v = brute_force_state(*psi);
    const Eigen::MatrixXcd h = kron_hamiltonian(L, 1.0, 0.5, 0.5);
    CHECK(std::abs(expectation(Observable::energy(), s, *psi, model) - v.dot(h * v)) < 1e-10);
    for (int site = 1; site <= L; ++site) {
      const Complex z = v.dot(embed(pauli_z(), site, L) * v);
      const Complex x = v.dot(embed(pauli_x(), site, L) * v);
      CHECK(std::abs(expectation(Observable::sigma_z(site), s, *psi, model) - z) < 1e-10);
      CHECK(std::abs(expectation(Observable::sigma_x(site), s, *psi, model) - x) < 1e-10);
    }
  }
}

TEST_CASE("expectations on the uniform state") {
  const auto model = build_model(14, 1.0, 0.5, 0.5);
  const auto psi = make_ansatz(default_fnn_shape(14));
  const SampleSet exact = full_summation(*psi);
  CHECK(std::abs(expectation(Observable::sigma_x(7), exact, *psi, model) - 1.0) < 1e-12);
  MetropolisOptions options;
  options.n_samples = 4000;
  options.seed = 3;
  const SampleSet mc = metropolis_sample(*psi, options);
  CHECK(std::abs(expectation(Observable::sigma_x(7), mc, *psi, model) - 1.0) < 1e-12);
  CHECK(std::abs(expectation(Observable::sigma_z(7), mc, *psi, model)) < 3.0 / std::sqrt(4000.0));
  CHECK_THROWS_AS(expectation(Observable::sigma_z(15), mc, *psi, model), RangeError);
  CHECK_THROWS_AS(expectation(Observable::energy(), SampleSet{}, *psi, model), EstimationError);
}

TEST_CASE("auxiliary matrix") {
  SUBCASE("a single sample has nothing to center") {
    const auto psi = random_rbm(4, 4, 0.3, 2);
    MetropolisOptions options;
    options.n_samples = 1;
    options.n_chains = 1;
    CHECK(build_x_matrix(metropolis_sample(*psi, options), *psi).entries.norm() == 0.0);
  }
  SUBCASE("zero RBM") {
    const auto psi = make_ansatz(rbm_shape(4, 2));
    const SampleSet s = full_summation(*psi);
    const XMatrix x = build_x_matrix(s, *psi);
    CHECK(x.entries.bottomRows(x.num_parameters() - 4).norm() == 0.0);
    for (int l = 0; l < 4; ++l) {
      for (Eigen::Index k = 0; k < s.size(); ++k) CHECK(std::abs(x.entries(l, k) - std::sqrt(s.weights(k)) * s.spins(l, k)) < 1e-15);
    }
  }
  SUBCASE("rows are centered and S is the covariance") {
    for (const auto& psi : {random_rbm(6, 6, 0.3, 5), random_fnn({6, 10, 8, 1}, 0.1, 5)}) {
      const SampleSet s = full_summation(*psi);
      const XMatrix x = build_x_matrix(s, *psi);
      const Eigen::VectorXcd row_means = x.entries * s.weights.cwiseSqrt().cast<Complex>();
      CHECK(row_means.cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::MatrixXcd cov = direct_covariance(s, psi->log_derivatives(s.spins));
      CHECK((x.geometric_tensor() - cov).cwiseAbs().maxCoeff() <= 1e-12 * cov.cwiseAbs().maxCoeff());
      CHECK((x.geometric_tensor() - x.entries * x.entries.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("tVMC force equals the covariance form") {
  for (int L : {4, 6, 8}) {
    const auto psi = random_rbm(L, L, 0.3, 40 + static_cast<std::uint64_t>(L));
    const auto model = build_model(L, 1.0, 0.5, 0.5);
    const SampleSet s = full_summation(*psi);
    const TvmcForce f = tvmc_force(s, *psi, model);
    const Eigen::VectorXcd direct = direct_force(s, psi->log_derivatives(s.spins), local_energies(*psi, model, s));
    CHECK((f.force - direct).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("local temporal overlaps") {
  const auto psi = random_rbm(6, 6, 0.3, 12);
  SUBCASE("identity with equal states") {
    for (Code c = 0; c < 64; c += 5) {
      const auto pair = local_temporal_overlaps(*psi, *psi, identity_block(2, 3), SpinConfiguration::from_code(c, 6));
      CHECK(std::abs(pair.forward - 1.0) < 1e-13);
      CHECK(std::abs(pair.backward - 1.0) < 1e-13);
    }
  }
  SUBCASE("identity with a rescaled trial") {
    const Complex c(0.4, -1.3);
    const TableAnsatz t(6, raw_state(*psi).array().log().matrix());
    const TableAnsatz tc(6, (raw_state(*psi) * c).array().log().matrix());
    for (Code k = 0; k < 64; k += 7) {
      const auto pair = local_temporal_overlaps(t, tc, identity_block(1, 2), SpinConfiguration::from_code(k, 6));
      CHECK(std::abs(pair.forward - 1.0 / c) < 1e-12);
    }
  }
  SUBCASE("d=2 block against the dense product") {
    const auto trial = random_rbm(6, 6, 0.3, 13);
    const auto model = build_model(6, 1.0, 0.5, 0.5);
    const TrotterBlock block = make_block(model, 3, 2, 0.05);
    const Eigen::MatrixXcd u = embed_block(block.unitary, 3, 2, 6);
    const Eigen::VectorXcd ut = u * raw_state(*psi);
    const Eigen::VectorXcd udag_tp = u.adjoint() * raw_state(*trial);
    for (Code k = 0; k < 64; ++k) {
      const auto x = SpinConfiguration::from_code(k, 6);
      const auto pair = local_temporal_overlaps(*psi, *trial, block, x);
      const auto i = static_cast<Eigen::Index>(k);
      CHECK(std::abs(pair.forward / (ut(i) / std::exp(trial->log_amplitude(x))) - 1.0) < 1e-12);
      CHECK(std::abs(pair.backward / (udag_tp(i) / std::exp(psi->log_amplitude(x))) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("overlap and force under full summation") {
  const auto model = build_model(6, 1.0, 0.5, 0.5);
  const TrotterBlock block = make_block(model, 2, 3, 0.05);
  const Eigen::MatrixXcd u = embed_block(block.unitary, 2, 3, 6);

  SUBCASE("dense overlap, reality and positivity") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto psi_t = random_rbm(6, 6, 0.3, 100 + seed);
      const auto psi_tp = random_fnn({6, 12, 8, 1}, 0.1, 200 + seed);
      const OverlapResult r = overlap_and_force(full_summation(*psi_t), full_summation(*psi_tp), *psi_t, *psi_tp, block);
      CHECK(std::abs(r.overlap.real() - dense_overlap(raw_state(*psi_t), raw_state(*psi_tp), u)) <= 1e-12);
      CHECK(std::abs(r.overlap.imag()) <= 1e-10);
      CHECK(r.infidelity() >= -1e-12);
    }
  }
  SUBCASE("exact target is a stationary point") {
    const auto psi_t = random_rbm(6, 6, 0.3, 7);
    const TableAnsatz target = TableAnsatz::from_state(6, u * raw_state(*psi_t) * Complex(2.0, 1.0));
    const OverlapResult r = overlap_and_force(full_summation(*psi_t), full_summation(target), *psi_t, target, block);
    CHECK(std::abs(r.overlap - 1.0) < 1e-10);
    CHECK(r.force.norm() < 1e-10);
  }
  SUBCASE("orthogonal states") {
    Eigen::VectorXcd a(4), b(4);
    a << 1, 1, 0, 0;
    b << 0, 0, 1, Complex(0, 1);
    const TableAnsatz ta = TableAnsatz::from_state(2, a.array() + 1e-300);
    const TableAnsatz tb = TableAnsatz::from_state(2, b.array() + 1e-300);
    const OverlapResult r = overlap_and_force(full_summation(ta), full_summation(tb), ta, tb, identity_block());
    CHECK(std::abs(r.overlap) < 1e-12);
  }
  SUBCASE("global rescaling leaves the overlap unchanged") {
    const auto psi_t = random_rbm(6, 6, 0.3, 8);
    const auto psi_tp = random_rbm(6, 6, 0.3, 9);
    const TableAnsatz a(6, raw_state(*psi_t).array().log().matrix());
    const TableAnsatz b(6, raw_state(*psi_tp).array().log().matrix());
    const TableAnsatz a2(6, (a.parameters().array() + Complex(3.0, 2.0)).matrix());
    const TableAnsatz b2(6, (b.parameters().array() + Complex(-1.5, 0.4)).matrix());
    const Complex c1 = overlap_and_force(full_summation(a), full_summation(b), a, b, block).overlap;
    const Complex c2 = overlap_and_force(full_summation(a2), full_summation(b2), a2, b2, block).overlap;
    CHECK(std::abs(c1 - c2) < 1e-10);
  }
  SUBCASE("force is the covariance of the local overlap") {
    const auto psi_t = random_rbm(6, 6, 0.3, 10);
    const auto psi_tp = random_rbm(6, 6, 0.3, 11);
    const SampleSet stp = full_summation(*psi_tp);
    const OverlapResult r = overlap_and_force(full_summation(*psi_t), stp, *psi_t, *psi_tp, block);
    const Eigen::VectorXcd direct = direct_force(stp, psi_tp->log_derivatives(stp.spins), r.local);
    CHECK((r.force - direct).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("force is the conjugate gradient of the overlap") {
    const auto psi_t = random_rbm(4, 4, 0.3, 20);
    const auto psi_tp = random_rbm(4, 4, 0.3, 21);
    const auto m4 = build_model(4, 1.0, 0.5, 0.5);
    const TrotterBlock b4 = make_block(m4, 1, 3, 0.05);
    const SampleSet st = full_summation(*psi_t);
    const OverlapResult r = overlap_and_force(st, full_summation(*psi_tp), *psi_t, *psi_tp, b4);
    std::unique_ptr<Ansatz> probe = psi_tp->clone();
    const double h = 1e-5;
    for (Eigen::Index m = 0; m < psi_tp->num_parameters(); ++m) {
      for (Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        Eigen::VectorXcd p = psi_tp->parameters();
        p(m) += h * dir;
        probe->set_parameters(p);
        const double up = overlap_and_force(st, full_summation(*probe), *psi_t, *probe, b4).overlap.real();
        p(m) -= 2.0 * h * dir;
        probe->set_parameters(p);
        const double down = overlap_and_force(st, full_summation(*probe), *psi_t, *probe, b4).overlap.real();
        const double fd = (up - down) / (2.0 * h);
        const double analytic = 2.0 * (std::conj(r.force(m)) * dir).real();
        CHECK(std::abs(fd - analytic) < 1e-7);
      }
    }
  }
}
