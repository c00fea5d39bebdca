#include "doctest.h"

#include "nqs/errors.hpp"
#include "nqs/oracle.hpp"
#include "nqs/sampling.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace nqs;
using namespace nqs::testing;

namespace {

DenseState random_dense(int L, std::mt19937_64& rng) {
  return DenseState::normalized(L, random_complex_vector(Eigen::Index{1} << L, 1.0, rng));
}

TiltedIsingModel quench_model(int L) { return build_model(L, 1.0, 0.5, 0.5); }

}  // namespace

TEST_CASE("dense states of ansaetze") {
  const DenseState u = nnqs_to_dense(*make_ansatz(default_fnn_shape(5)));
  for (Eigen::Index c = 0; c < u.dimension(); ++c) CHECK(std::abs(u.amplitudes(c) - Complex(std::pow(2.0, -2.5))) < 1e-15);
  CHECK(uniform_state(5).amplitudes.isApprox(u.amplitudes, 1e-15));

  const auto psi = random_rbm(6, 6, 0.4, 11);
  const DenseState d = nnqs_to_dense(*psi);
  CHECK(std::abs(d.amplitudes.norm() - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(d.amplitudes.dot(brute_force_state(*psi))) - 1.0) < 1e-12);

  // a constant added to every log-amplitude is a global phase and scale
  std::mt19937_64 rng(3);
  const TableAnsatz table(4, random_complex_vector(16, 0.5, rng));
  TableAnsatz shifted = table;
  shifted.set_parameters(table.parameters().array() + Complex(3.0, 1.7));
  CHECK(exact_infidelity(shifted, nnqs_to_dense(table)) <= 1e-12);

  const auto model = quench_model(6);
  const SampleSet samples = full_summation(*psi);
  for (int l = 1; l <= 6; ++l) {
    CHECK(std::abs(dense_expectation(d, model, Observable::sigma_z(l)) -
                   expectation(Observable::sigma_z(l), samples, *psi, model).real()) < 1e-10);
  }
  CHECK_THROWS_AS(nnqs_to_dense(*make_ansatz(rbm_shape(21, 1))), ResourceError);
}

TEST_CASE("dense Hamiltonian matches the Kronecker construction") {
  for (int L : {2, 5, 8}) {
    const Eigen::MatrixXd h = dense_hamiltonian(quench_model(L));
    CHECK((h.cast<Complex>() - kron_hamiltonian(L, 1.0, 0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS(dense_hamiltonian(quench_model(15)), ResourceError);
}

TEST_CASE("exact evolution") {
  std::mt19937_64 rng(4);
  SUBCASE("t = 0 is the identity") {
    const DenseState psi = random_dense(6, rng);
    CHECK((exact_evolve(quench_model(6), psi, 0.0).amplitudes - psi.amplitudes).norm() < 1e-13);
  }
  SUBCASE("eigenstates pick up a phase") {
    const ExactPropagator prop(quench_model(5));
    for (Eigen::Index k : {0, 7, 31}) {
      const DenseState v{5, prop.eigenvectors().col(k).cast<Complex>()};
      const DenseState out = prop.evolve(v, 1.3);
      const Complex phase = std::exp(Complex(0.0, -prop.energies()(k) * 1.3));
      CHECK((out.amplitudes - phase * v.amplitudes).norm() < 1e-12);
    }
  }
  SUBCASE("two sites against the Pade exponential") {
    const DenseState psi = random_dense(2, rng);
    const Eigen::VectorXcd expected = expm_minus_i(kron_hamiltonian(2, 1.0, 0.5, 0.5), 1.0) * psi.amplitudes;
    CHECK((exact_evolve(quench_model(2), psi, 1.0).amplitudes - expected).norm() < 1e-12);
  }
  SUBCASE("norm is preserved over 20 steps") {
    const ExactPropagator prop(quench_model(10));
    DenseState psi = random_dense(10, rng);
    for (int n = 0; n < 20; ++n) psi = prop.evolve(psi, 0.1);
    CHECK(std::abs(psi.amplitudes.norm() - 1.0) < 1e-10);
  }
  SUBCASE("evolution composes") {
    const ExactPropagator prop(quench_model(6));
    const DenseState psi = random_dense(6, rng);
    const DenseState twice = prop.evolve(prop.evolve(psi, 0.4), 0.6);
    CHECK((twice.amplitudes - prop.evolve(psi, 1.0).amplitudes).norm() < 1e-12);
  }
}

TEST_CASE("infidelity") {
  std::mt19937_64 rng(5);
  const DenseState a = random_dense(5, rng);
  CHECK(infidelity(a, a) <= 1e-14);

  // orthogonal complement of a
  Eigen::VectorXcd perp = random_complex_vector(32, 1.0, rng);
  perp -= a.amplitudes.dot(perp) * a.amplitudes;
  perp.normalize();
  CHECK(std::abs(infidelity(a, DenseState{5, perp}) - 1.0) < 1e-12);

  for (double alpha : {0.0, 0.1, 0.7, 1.2, std::numbers::pi / 2}) {
    const DenseState mix{5, std::cos(alpha) * a.amplitudes + std::sin(alpha) * perp};
    CHECK(std::abs(infidelity(mix, a) - std::pow(std::sin(alpha), 2)) < 1e-12);
  }

  // invariance under global phase and scale of either argument
  const DenseState b = random_dense(5, rng);
  const double base = infidelity(a, b);
  CHECK(std::abs(infidelity(DenseState{5, Complex(-2.0, 3.0) * a.amplitudes}, b) - base) < 1e-12);
  CHECK(std::abs(infidelity(a, DenseState{5, Complex(0.0, 0.01) * b.amplitudes}) - base) < 1e-12);
  CHECK(base >= 0.0);
  CHECK(base <= 1.0 + 1e-10);
}

TEST_CASE("blocks on dense states") {
  std::mt19937_64 rng(6);
  const int L = 7;
  const auto model = quench_model(L);
  for (int span : {2, 3, 6}) {
    for (int start = 1; start + span - 1 <= L; start += 2) {
      const TrotterBlock block = make_block(model, start, span, 0.05);
      DenseState psi = random_dense(L, rng);
      const Eigen::VectorXcd expected = embed_block(block.unitary, start, span, L) * psi.amplitudes;
      apply_block(psi, block);
      CHECK((psi.amplitudes - expected).norm() < 1e-12);
    }
  }

  // the schedule is a second-order approximation of exact evolution
  const TrotterSchedule schedule = trotter_schedule(model, 3, 0.01);
  DenseState psi = random_dense(L, rng);
  const DenseState exact = exact_evolve(model, psi, 0.01);
  apply_schedule(psi, schedule);
  CHECK(infidelity(psi, exact) < 1e-8);
  CHECK_THROWS_AS(apply_block(psi, make_block(quench_model(9), 6, 3, 0.1)), RangeError);
}

TEST_CASE("running integral") {
  const std::vector<double> ones(21, 1.0);
  const std::vector<double> a = integrate_series(ones, 0.1);
  REQUIRE(a.size() == 21);
  CHECK(a.front() == 0.0);
  CHECK(a.back() == doctest::Approx(2.0).epsilon(1e-14));

  const std::vector<double> zeros(8, 0.0);
  for (double v : integrate_series(zeros, 0.1)) CHECK(v == 0.0);

  std::vector<double> ramp;
  for (int n = 0; n <= 10; ++n) ramp.push_back(0.1 * n);
  CHECK(integrate_series(ramp, 0.1).back() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(integrate_series(std::vector<double>{}, 0.1).empty());

  // non-negative integrands give non-decreasing integrals
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> noisy(50);
  for (double& v : noisy) v = u(rng);
  const std::vector<double> acc = integrate_series(noisy, 0.1);
  for (std::size_t i = 1; i < acc.size(); ++i) CHECK(acc[i] >= acc[i - 1]);
}

TEST_CASE("ranked configurations") {
  const std::vector<Code> uniform = ranked_configurations(uniform_state(3), 8);
  REQUIRE(uniform.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(uniform[i] == i);

  Eigen::VectorXcd v(4);
  v << 0.8, 0.6, 0.0, 0.0;
  const std::vector<Code> ranks = ranked_configurations(DenseState{2, v}, 2);
  REQUIRE(ranks.size() == 2);
  CHECK(ranks[0] == 0);
  CHECK(ranks[1] == 1);

  std::mt19937_64 rng(8);
  const DenseState psi = random_dense(8, rng);
  const std::vector<Code> all = ranked_configurations(psi, 256);
  for (std::size_t i = 1; i < all.size(); ++i) {
    CHECK(std::norm(psi.amplitudes(static_cast<Eigen::Index>(all[i - 1]))) >=
          std::norm(psi.amplitudes(static_cast<Eigen::Index>(all[i]))));
  }
  CHECK(ranked_configurations(psi, 1000).size() == 256u);
}

TEST_CASE("amplitude ratio and phase distance") {
  CHECK(folded_phase_distance(std::numbers::pi / 2, 0.0) == doctest::Approx(std::numbers::pi / 2));
  CHECK(folded_phase_distance(3 * std::numbers::pi / 2, 0.0) == doctest::Approx(std::numbers::pi / 2));
  CHECK(folded_phase_distance(-3.0, 3.0) == doctest::Approx(2 * std::numbers::pi - 6.0));

  Eigen::VectorXcd v(4);
  v << Complex(0.0, 1.0), 1.0, 0.5, Complex(0.0, -0.25);
  const DenseState d{2, v};
  const AmplitudePhase ap = amplitude_ratio_and_phase_distance(d, 0, 1);
  CHECK(ap.ratio == doctest::Approx(1.0));
  CHECK(ap.phase_distance == doctest::Approx(std::numbers::pi / 2));
  CHECK(amplitude_ratio_and_phase_distance(d, 0, 3).ratio == doctest::Approx(4.0));
  CHECK(amplitude_ratio_and_phase_distance(d, 0, 3).phase_distance == doctest::Approx(std::numbers::pi));

  // uniform initial state
  const auto uniform = make_ansatz(default_fnn_shape(6));
  for (Code y : {Code{1}, Code{17}, Code{63}}) {
    const AmplitudePhase u = amplitude_ratio_and_phase_distance(*uniform, 0, y);
    CHECK(u.ratio == 1.0);
    CHECK(u.phase_distance == 0.0);
  }

  // the ansatz and its dense state agree
  const auto psi = random_fnn({6, 24, 18, 1}, 0.2, 9);
  const DenseState dense = nnqs_to_dense(*psi);
  const std::vector<Code> ranks = ranked_configurations(dense, 64);
  for (std::size_t n = 1; n < 64; n += 7) {
    const AmplitudePhase a = amplitude_ratio_and_phase_distance(*psi, ranks[0], ranks[n]);
    const AmplitudePhase b = amplitude_ratio_and_phase_distance(dense, ranks[0], ranks[n]);
    CHECK(std::abs(a.ratio - b.ratio) <= 1e-10 * b.ratio);
    CHECK(std::abs(a.phase_distance - b.phase_distance) <= 1e-10);
    CHECK(a.phase_distance >= 0.0);
    CHECK(a.phase_distance <= std::numbers::pi);
  }

  // |psi(y)| vanishingly small compared with |psi(x)|
  Eigen::VectorXcd logs = Eigen::VectorXcd::Zero(4);
  logs(2) = -800.0;
  const TableAnsatz spread(2, logs);
  const AmplitudePhase over = amplitude_ratio_and_phase_distance(spread, 0, 2);
  CHECK(over.overflow);
  CHECK(std::isinf(over.ratio));
  CHECK_FALSE(amplitude_ratio_and_phase_distance(spread, 0, 1).overflow);
}
