#include "nqs/oracle.hpp"

#include "nqs/errors.hpp"
#include "nqs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace nqs {

namespace {

void check_dense_sites(int num_sites) {
  if (num_sites > kMaxDenseSites) {
    throw ResourceError("dense reference refused: L = " + std::to_string(num_sites) + " exceeds " +
                        std::to_string(kMaxDenseSites) + " sites");
  }
}

}  // namespace

DenseState DenseState::normalized(int num_sites, Eigen::VectorXcd amplitudes) {
  if (amplitudes.size() != (Eigen::Index{1} << num_sites)) throw DimensionError("state vector has the wrong length");
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("state vector cannot be normalized");
  return DenseState{num_sites, amplitudes / norm};
}

DenseState nnqs_to_dense(const Ansatz& psi) {
  const SampleSet table = full_summation(psi);
  const double shift = table.log_psi.real().maxCoeff();
  Eigen::VectorXcd amps = (table.log_psi.array() - shift).exp().matrix();
  return DenseState::normalized(psi.num_sites(), std::move(amps));
}

DenseState uniform_state(int num_sites) {
  const Eigen::Index dim = Eigen::Index{1} << num_sites;
  return DenseState::normalized(num_sites, Eigen::VectorXcd::Ones(dim));
}

Eigen::MatrixXd dense_hamiltonian(const TiltedIsingModel& model) {
  const int L = model.num_sites();
  check_dense_sites(L);
  const Code dim = Code{1} << L;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Code c = 0; c < dim; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    h(col, col) = model.diagonal_energy(c);
    for (int l = 0; l < L; ++l) h(static_cast<Eigen::Index>(c ^ (Code{1} << l)), col) -= model.field_x();
  }
  return h;
}

ExactPropagator::ExactPropagator(const TiltedIsingModel& model) : num_sites_(model.num_sites()) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense_hamiltonian(model));
  if (eig.info() != Eigen::Success) throw NumericError("diagonalization of the Hamiltonian failed");
  energies_ = eig.eigenvalues();
  vectors_ = eig.eigenvectors();
}

DenseState ExactPropagator::evolve(const DenseState& psi0, double t) const {
  if (psi0.num_sites != num_sites_) throw DimensionError("state and propagator disagree on L");
  Eigen::VectorXcd coeffs = vectors_.transpose().cast<Complex>() * psi0.amplitudes;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs(i) *= std::exp(Complex(0.0, -energies_(i) * t));
  return DenseState{num_sites_, vectors_.cast<Complex>() * coeffs};
}

DenseState exact_evolve(const TiltedIsingModel& model, const DenseState& psi0, double t) {
  return ExactPropagator(model).evolve(psi0, t);
}

double infidelity(const DenseState& a, const DenseState& b) {
  if (a.dimension() != b.dimension()) throw DimensionError("states differ in dimension");
  const double na = a.amplitudes.squaredNorm();
  const double nb = b.amplitudes.squaredNorm();
  return 1.0 - std::norm(a.amplitudes.dot(b.amplitudes)) / (na * nb);
}

double exact_infidelity(const Ansatz& psi, const DenseState& reference) {
  return infidelity(nnqs_to_dense(psi), reference);
}

double dense_expectation(const DenseState& psi, const TiltedIsingModel& model, const Observable& observable) {
  const int L = psi.num_sites;
  const Code dim = Code{1} << L;
  const auto& a = psi.amplitudes;
  double total = 0.0;
  switch (observable.kind) {
    case Observable::Kind::sigma_z:
      for (Code c = 0; c < dim; ++c) total += std::norm(a(static_cast<Eigen::Index>(c))) * spin_at(c, observable.site - 1, L);
      break;
    case Observable::Kind::sigma_x: {
      const Code bit = Code{1} << (L - observable.site);
      for (Code c = 0; c < dim; ++c) {
        total += (std::conj(a(static_cast<Eigen::Index>(c))) * a(static_cast<Eigen::Index>(c ^ bit))).real();
      }
      break;
    }
    case Observable::Kind::energy:
      for (Code c = 0; c < dim; ++c) {
        const Complex ac = a(static_cast<Eigen::Index>(c));
        total += std::norm(ac) * model.diagonal_energy(c);
        Complex flips = 0.0;
        for (int l = 0; l < L; ++l) flips += a(static_cast<Eigen::Index>(c ^ (Code{1} << l)));
        total -= model.field_x() * (std::conj(ac) * flips).real();
      }
      break;
  }
  return total / a.squaredNorm();
}

void apply_block(DenseState& psi, const TrotterBlock& block) {
  const int L = psi.num_sites;
  if (block.start < 1 || block.start + block.span - 1 > L) throw RangeError("block exceeds the chain");
  const int dim = block.dimension();
  const Code outer = Code{1} << (L - block.span);
  const int shift = block.shift(L);
  const Code low_mask = (Code{1} << shift) - 1;
  Eigen::VectorXcd local(dim);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(dim));
  for (Code o = 0; o < outer; ++o) {
    const Code base = ((o >> shift) << (shift + block.span)) | (o & low_mask);
    for (int b = 0; b < dim; ++b) {
      index[static_cast<std::size_t>(b)] = static_cast<Eigen::Index>(block.with_local_index(base, b, L));
      local(b) = psi.amplitudes(index[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXcd mixed = block.unitary * local;
    for (int b = 0; b < dim; ++b) psi.amplitudes(index[static_cast<std::size_t>(b)]) = mixed(b);
  }
}

void apply_schedule(DenseState& psi, const TrotterSchedule& schedule) {
  for (std::size_t i = 0; i < schedule.size(); ++i) apply_block(psi, schedule.at(i));
}

std::vector<double> integrate_series(std::span<const double> values, double dt) {
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t n = 1; n < values.size(); ++n) out[n] = out[n - 1] + 0.5 * dt * (values[n - 1] + values[n]);
  return out;
}

std::vector<Code> ranked_configurations(const DenseState& psi, std::size_t n_max) {
  std::vector<Code> codes(static_cast<std::size_t>(psi.dimension()));
  std::iota(codes.begin(), codes.end(), Code{0});
  const Eigen::VectorXd prob = psi.amplitudes.cwiseAbs2();
  const auto by_rank = [&](Code a, Code b) {
    const double pa = prob(static_cast<Eigen::Index>(a));
    const double pb = prob(static_cast<Eigen::Index>(b));
    return pa != pb ? pa > pb : a < b;
  };
  const std::size_t n = std::min(n_max, codes.size());
  std::partial_sort(codes.begin(), codes.begin() + static_cast<std::ptrdiff_t>(n), codes.end(), by_rank);
  codes.resize(n);
  return codes;
}

double folded_phase_distance(double arg_a, double arg_b) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double d = std::fmod(std::abs(arg_a - arg_b), two_pi);
  return std::min(d, two_pi - d);
}

AmplitudePhase amplitude_ratio_and_phase_distance(const Ansatz& psi, Code x_m, Code y_n) {
  const int L = psi.num_sites();
  const Complex log_m = psi.log_amplitude(SpinConfiguration::from_code(x_m, L));
  const Complex log_n = psi.log_amplitude(SpinConfiguration::from_code(y_n, L));
  AmplitudePhase out;
  const double log_ratio = (log_m - log_n).real();
  if (log_ratio > kRatioLogLimit || !std::isfinite(log_ratio)) {
    out.overflow = true;
    out.ratio = std::numeric_limits<double>::infinity();
  } else {
    out.ratio = std::exp(log_ratio);
  }
  out.phase_distance = folded_phase_distance(std::remainder(log_m.imag(), 2.0 * std::numbers::pi),
                                             std::remainder(log_n.imag(), 2.0 * std::numbers::pi));
  return out;
}

AmplitudePhase amplitude_ratio_and_phase_distance(const DenseState& psi, Code x_m, Code y_n) {
  const Complex a_m = psi.amplitudes(static_cast<Eigen::Index>(x_m));
  const Complex a_n = psi.amplitudes(static_cast<Eigen::Index>(y_n));
  AmplitudePhase out;
  const double num = std::abs(a_m);
  const double den = std::abs(a_n);
  if (den == 0.0 || std::log(num) - std::log(den) > kRatioLogLimit) {
    out.overflow = true;
    out.ratio = std::numeric_limits<double>::infinity();
  } else {
    out.ratio = num / den;
  }
  out.phase_distance = folded_phase_distance(std::arg(a_m), std::arg(a_n));
  return out;
}

}  // namespace nqs
