#include "nqs/estimators.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nqs {

namespace {

constexpr std::size_t kEvalChunk = 1 << 16;

bool is_table_for(const SampleSet* table, int num_sites) {
  return table != nullptr && table->mode == SamplingMode::full_summation && table->num_sites == num_sites;
}

void require_nonempty(const SampleSet& samples) {
  if (samples.empty()) throw EstimationError("empty sample set");
}

}  // namespace

Eigen::VectorXcd log_psi_at(const Ansatz& psi, const SampleSet* table, std::span<const Code> codes) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(codes.size()));
  if (is_table_for(table, psi.num_sites())) {
    for (std::size_t n = 0; n < codes.size(); ++n) out(static_cast<Eigen::Index>(n)) = table->log_psi(static_cast<Eigen::Index>(codes[n]));
    return out;
  }
  for (std::size_t first = 0; first < codes.size(); first += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, codes.size() - first);
    const Eigen::MatrixXd spins = spins_from_codes(codes.subspan(first, count), psi.num_sites());
    out.segment(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) = psi.log_amplitudes(spins);
  }
  return out;
}

Complex weighted_mean(const Eigen::VectorXd& weights, const Eigen::VectorXcd& values) {
  if (weights.size() != values.size()) throw DimensionError("weights and values differ in length");
  if (weights.size() == 0) throw EstimationError("mean over an empty set");
  return (values.array() * weights.array().cast<Complex>()).sum();
}

Complex local_energy(const Ansatz& psi, const TiltedIsingModel& model, const SpinConfiguration& x) {
  const Complex log_x = psi.log_amplitude(x);
  Complex e = 0.0;
  for (const auto& [y, value] : connected_elements(model, x)) {
    e += (y == x) ? value : value * std::exp(psi.log_amplitude(y) - log_x);
  }
  return e;
}

Eigen::VectorXcd local_energies(const Ansatz& psi, const TiltedIsingModel& model, const SampleSet& samples) {
  const int L = model.num_sites();
  if (samples.num_sites != L || psi.num_sites() != L) throw DimensionError("sample set and model disagree on L");
  const auto N = samples.size();
  Eigen::VectorXcd e(N);
  for (Eigen::Index k = 0; k < N; ++k) e(k) = model.diagonal_energy(samples.codes[static_cast<std::size_t>(k)]);
  if (model.field_x() == 0.0) return e;
  std::vector<Code> flips(static_cast<std::size_t>(N) * static_cast<std::size_t>(L));
  for (Eigen::Index k = 0; k < N; ++k) {
    for (int l = 0; l < L; ++l) {
      flips[static_cast<std::size_t>(k) * L + l] = samples.codes[static_cast<std::size_t>(k)] ^ (Code{1} << (L - 1 - l));
    }
  }
  const Eigen::VectorXcd logs = log_psi_at(psi, &samples, flips);
  for (Eigen::Index k = 0; k < N; ++k) {
    Complex off = 0.0;
    for (int l = 0; l < L; ++l) off += std::exp(logs(k * L + l) - samples.log_psi(k));
    e(k) -= model.field_x() * off;
  }
  return e;
}

Eigen::VectorXcd local_values(const Observable& observable, const SampleSet& samples, const Ansatz& psi,
                              const TiltedIsingModel& model) {
  require_nonempty(samples);
  const int L = samples.num_sites;
  const auto N = samples.size();
  if (observable.kind != Observable::Kind::energy && (observable.site < 1 || observable.site > L)) {
    throw RangeError("observable site out of range");
  }
  Eigen::VectorXcd values(N);
  switch (observable.kind) {
    case Observable::Kind::energy:
      return local_energies(psi, model, samples);
    case Observable::Kind::sigma_z:
      for (Eigen::Index k = 0; k < N; ++k) values(k) = spin_at(samples.codes[static_cast<std::size_t>(k)], observable.site - 1, L);
      return values;
    case Observable::Kind::sigma_x: {
      const Code bit = Code{1} << (L - observable.site);
      std::vector<Code> flips(samples.codes.size());
      for (std::size_t k = 0; k < flips.size(); ++k) flips[k] = samples.codes[k] ^ bit;
      const Eigen::VectorXcd logs = log_psi_at(psi, &samples, flips);
      return (logs - samples.log_psi).array().exp().matrix();
    }
  }
  return values;
}

Complex expectation(const Observable& observable, const SampleSet& samples, const Ansatz& psi,
                    const TiltedIsingModel& model) {
  require_nonempty(samples);
  return weighted_mean(samples.weights, local_values(observable, samples, psi, model));
}

Eigen::MatrixXcd XMatrix::geometric_tensor() const {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(entries.rows(), entries.rows());
  s.selfadjointView<Eigen::Lower>().rankUpdate(entries);
  return s.selfadjointView<Eigen::Lower>();
}

XMatrix build_x_matrix(const SampleSet& samples, const Ansatz& psi) {
  require_nonempty(samples);
  XMatrix x;
  x.entries = psi.log_derivatives(samples.spins);
  const Eigen::VectorXcd mean = x.entries * samples.weights.cast<Complex>();
  x.entries.colwise() -= mean;
  const Eigen::VectorXd scale = samples.weights.cwiseSqrt();
  x.entries = x.entries.conjugate() * scale.asDiagonal();
  return x;
}

Eigen::VectorXcd centered_scaled(const SampleSet& samples, const Eigen::VectorXcd& local, Complex mean) {
  if (local.size() != samples.size()) throw DimensionError("local values and samples differ in length");
  return ((local.array() - mean) * samples.weights.cwiseSqrt().array().cast<Complex>()).matrix();
}

TvmcForce tvmc_force(const SampleSet& samples, const Ansatz& psi, const TiltedIsingModel& model) {
  require_nonempty(samples);
  TvmcForce out;
  const Eigen::VectorXcd e = local_energies(psi, model, samples);
  out.energy = weighted_mean(samples.weights, e);
  out.x = build_x_matrix(samples, psi);
  out.f = centered_scaled(samples, e, out.energy);
  out.force = out.x.entries * out.f;
  return out;
}

Eigen::VectorXcd block_overlaps(const Ansatz& numerator, const SampleSet* numerator_table,
                                const Eigen::MatrixXcd& block_matrix, const TrotterBlock& block,
                                std::span<const Code> codes, const Eigen::VectorXcd& denominator_log) {
  const int L = numerator.num_sites();
  const int dim = block.dimension();
  if (block.start < 1 || block.start + block.span - 1 > L) throw RangeError("block exceeds the chain");
  if (block_matrix.rows() != dim || block_matrix.cols() != dim) throw DimensionError("block matrix has the wrong size");
  if (static_cast<Eigen::Index>(codes.size()) != denominator_log.size()) throw DimensionError("codes and logs differ");

  std::vector<Code> variants(codes.size() * static_cast<std::size_t>(dim));
  for (std::size_t n = 0; n < codes.size(); ++n) {
    for (int b = 0; b < dim; ++b) variants[n * dim + static_cast<std::size_t>(b)] = block.with_local_index(codes[n], b, L);
  }
  const Eigen::VectorXcd logs = log_psi_at(numerator, numerator_table, variants);

  Eigen::VectorXcd out(static_cast<Eigen::Index>(codes.size()));
  Eigen::VectorXcd terms(dim);
  for (std::size_t n = 0; n < codes.size(); ++n) {
    const auto base = static_cast<Eigen::Index>(n) * dim;
    double shift = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < dim; ++b) shift = std::max(shift, logs(base + b).real());
    for (int b = 0; b < dim; ++b) terms(b) = std::exp(logs(base + b) - shift);
    const int row = block.local_index(codes[n], L);
    const Complex sum = (block_matrix.row(row) * terms).value();
    out(static_cast<Eigen::Index>(n)) = sum * std::exp(Complex(shift) - denominator_log(static_cast<Eigen::Index>(n)));
  }
  return out;
}

TemporalOverlapPair local_temporal_overlaps(const Ansatz& psi_t, const Ansatz& psi_tp, const TrotterBlock& block,
                                            const SpinConfiguration& x) {
  if (x.size() != psi_t.num_sites() || x.size() != psi_tp.num_sites()) throw DimensionError("configuration length mismatch");
  const Code code = x.code();
  const std::span<const Code> one(&code, 1);
  const Eigen::VectorXcd log_t = Eigen::VectorXcd::Constant(1, psi_t.log_amplitude(x));
  const Eigen::VectorXcd log_tp = Eigen::VectorXcd::Constant(1, psi_tp.log_amplitude(x));
  TemporalOverlapPair pair;
  pair.forward = block_overlaps(psi_t, nullptr, block.unitary, block, one, log_tp)(0);
  pair.backward = block_overlaps(psi_tp, nullptr, block.unitary.adjoint(), block, one, log_t)(0);
  return pair;
}

OverlapResult overlap_and_force(const SampleSet& psi_t_samples, const SampleSet& psi_tp_samples,
                                const Ansatz& psi_t, const Ansatz& psi_tp, const TrotterBlock& block) {
  require_nonempty(psi_t_samples);
  require_nonempty(psi_tp_samples);
  OverlapResult out;
  const Eigen::VectorXcd backward =
      block_overlaps(psi_tp, &psi_tp_samples, block.unitary.adjoint(), block, psi_t_samples.codes, psi_t_samples.log_psi);
  out.backward_mean = weighted_mean(psi_t_samples.weights, backward);
  const Eigen::VectorXcd forward =
      block_overlaps(psi_t, &psi_t_samples, block.unitary, block, psi_tp_samples.codes, psi_tp_samples.log_psi);
  out.local = forward * out.backward_mean;
  out.overlap = weighted_mean(psi_tp_samples.weights, out.local);
  out.x = build_x_matrix(psi_tp_samples, psi_tp);
  out.f = centered_scaled(psi_tp_samples, out.local, out.overlap);
  out.force = out.x.entries * out.f;
  return out;
}

}  // namespace nqs
