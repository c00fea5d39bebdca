#include "nqs/spin_model.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nqs {

SpinConfiguration::SpinConfiguration(std::vector<std::int8_t> spins) : spins_(std::move(spins)) {
  for (auto s : spins_) {
    if (s != 1 && s != -1) throw DimensionError("spin values must be +1 or -1");
  }
}

SpinConfiguration SpinConfiguration::from_code(Code code, int num_sites) {
  if (num_sites < 1 || num_sites > kMaxSites) throw RangeError("unsupported chain length");
  std::vector<std::int8_t> spins(static_cast<std::size_t>(num_sites));
  for (int l = 0; l < num_sites; ++l) spins[static_cast<std::size_t>(l)] = static_cast<std::int8_t>(spin_at(code, l, num_sites));
  SpinConfiguration x;
  x.spins_ = std::move(spins);
  return x;
}

Code SpinConfiguration::code() const {
  Code code = 0;
  for (auto s : spins_) code = (code << 1) | (s < 0 ? 1U : 0U);
  return code;
}

SpinConfiguration SpinConfiguration::flipped(int site) const {
  if (site < 0 || site >= size()) throw RangeError("site out of range");
  SpinConfiguration y = *this;
  y.spins_[static_cast<std::size_t>(site)] = static_cast<std::int8_t>(-y.spins_[static_cast<std::size_t>(site)]);
  return y;
}

Eigen::VectorXd SpinConfiguration::as_vector() const {
  Eigen::VectorXd v(size());
  for (int l = 0; l < size(); ++l) v(l) = spins_[static_cast<std::size_t>(l)];
  return v;
}

Eigen::MatrixXd spins_from_codes(std::span<const Code> codes, int num_sites) {
  Eigen::MatrixXd spins(num_sites, static_cast<Eigen::Index>(codes.size()));
  for (std::size_t n = 0; n < codes.size(); ++n) {
    for (int l = 0; l < num_sites; ++l) spins(l, static_cast<Eigen::Index>(n)) = spin_at(codes[n], l, num_sites);
  }
  return spins;
}

Code code_of_column(const Eigen::MatrixXd& spins, Eigen::Index column) {
  Code code = 0;
  for (Eigen::Index l = 0; l < spins.rows(); ++l) code = (code << 1) | (spins(l, column) < 0 ? 1U : 0U);
  return code;
}

TiltedIsingModel::TiltedIsingModel(int num_sites, double coupling, double field_x, double field_z)
    : num_sites_(num_sites), coupling_(coupling), field_x_(field_x), field_z_(field_z) {
  if (num_sites < 2) throw InvalidModelError("the chain needs at least two sites");
  if (num_sites > kMaxSites) throw InvalidModelError("chain longer than " + std::to_string(kMaxSites) + " sites");
  if (!std::isfinite(coupling) || !std::isfinite(field_x) || !std::isfinite(field_z)) {
    throw InvalidModelError("couplings must be finite");
  }
}

double TiltedIsingModel::site_weight(int site) const {
  if (site < 1 || site > num_sites_) throw RangeError("site out of range");
  return (site == 1 || site == num_sites_) ? 1.0 : 0.5;
}

double TiltedIsingModel::diagonal_energy(Code code) const {
  double bonds = 0.0;
  double magnetization = 0.0;
  int prev = spin_at(code, 0, num_sites_);
  magnetization += prev;
  for (int l = 1; l < num_sites_; ++l) {
    const int s = spin_at(code, l, num_sites_);
    bonds += prev * s;
    magnetization += s;
    prev = s;
  }
  return coupling_ * bonds - field_z_ * magnetization;
}

double TiltedIsingModel::diagonal_energy(const SpinConfiguration& x) const {
  if (x.size() != num_sites_) throw DimensionError("configuration length does not match the model");
  return diagonal_energy(x.code());
}

TiltedIsingModel build_model(int num_sites, double coupling, double field_x, double field_z) {
  return TiltedIsingModel(num_sites, coupling, field_x, field_z);
}

std::vector<MatrixElement> connected_elements(const TiltedIsingModel& model, const SpinConfiguration& x) {
  if (x.size() != model.num_sites()) throw DimensionError("configuration length does not match the model");
  std::vector<MatrixElement> row;
  row.reserve(static_cast<std::size_t>(model.num_sites()) + 1);
  row.push_back({x, Complex(model.diagonal_energy(x), 0.0)});
  if (model.field_x() != 0.0) {
    for (int l = 0; l < model.num_sites(); ++l) row.push_back({x.flipped(l), Complex(-model.field_x(), 0.0)});
  }
  return row;
}

Eigen::MatrixXcd block_generator(const TiltedIsingModel& model, int start, int span) {
  if (span < 2) throw RangeError("block span must be at least 2");
  if (start < 1 || start + span - 1 > model.num_sites()) throw RangeError("block exceeds the chain");
  const int dim = 1 << span;
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(dim, dim);
  auto bit = [span](int local, int j) { return (local >> (span - 1 - j)) & 1; };
  for (int bond = start; bond <= start + span - 2; ++bond) {
    const int j = bond - start;
    const double wl = model.site_weight(bond);
    const double wr = model.site_weight(bond + 1);
    for (int b = 0; b < dim; ++b) {
      const int zl = bit(b, j) ? -1 : 1;
      const int zr = bit(b, j + 1) ? -1 : 1;
      gen(b, b) += model.coupling() * zl * zr - model.field_z() * (wl * zl + wr * zr);
      gen(b ^ (1 << (span - 1 - j)), b) += -model.field_x() * wl;
      gen(b ^ (1 << (span - 2 - j)), b) += -model.field_x() * wr;
    }
  }
  return gen;
}

Eigen::MatrixXcd block_unitary(const Eigen::MatrixXcd& generator, double tau) {
  if (generator.rows() != generator.cols()) throw DimensionError("generator must be square");
  const double asym = (generator - generator.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-12)) throw NumericError("block generator is not Hermitian");
  const auto n = generator.rows();
  if (tau == 0.0) return Eigen::MatrixXcd::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(generator);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the block generator failed");
  Eigen::VectorXcd phases(n);
  for (Eigen::Index k = 0; k < n; ++k) phases(k) = std::exp(Complex(0.0, -eig.eigenvalues()(k) * tau));
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

TrotterBlock make_block(const TiltedIsingModel& model, int start, int span, double duration) {
  TrotterBlock block;
  block.start = start;
  block.span = span;
  block.duration = duration;
  block.generator = block_generator(model, start, span);
  block.unitary = block_unitary(block.generator, duration);
  return block;
}

TrotterBlock identity_block(int start, int span) {
  if (span < 2 || start < 1) throw RangeError("invalid identity block");
  TrotterBlock block;
  block.start = start;
  block.span = span;
  block.generator = Eigen::MatrixXcd::Zero(1 << span, 1 << span);
  block.unitary = Eigen::MatrixXcd::Identity(1 << span, 1 << span);
  return block;
}

TrotterSchedule trotter_schedule(const TiltedIsingModel& model, int span, double dt) {
  const int num_sites = model.num_sites();
  if (span < 2 || span > num_sites) throw RangeError("block span must lie in [2, L]");
  TrotterSchedule schedule;
  schedule.dt = dt;
  for (int start = 1; start <= num_sites - 1; start += span - 1) {
    const int width = std::min(span, num_sites - start + 1);
    schedule.blocks.push_back(make_block(model, start, width, dt / 2));
  }
  const std::size_t n = schedule.blocks.size();
  for (std::size_t i = 0; i < n; ++i) schedule.sequence.push_back(i);
  for (std::size_t i = n; i-- > 0;) schedule.sequence.push_back(i);
  return schedule;
}

std::vector<double> bond_coverage(const TrotterSchedule& schedule, int num_sites) {
  std::vector<double> coverage(static_cast<std::size_t>(num_sites - 1), 0.0);
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& block = schedule.at(i);
    for (int bond = block.start; bond <= block.start + block.span - 2; ++bond) {
      coverage.at(static_cast<std::size_t>(bond - 1)) += block.duration;
    }
  }
  return coverage;
}

}  // namespace nqs
