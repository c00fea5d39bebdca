#pragma once

// Tilted Ising chain with open boundaries, its local bond terms and the
// symmetric Trotter sweep built from them.
//
// Basis convention used throughout the library: a configuration of L spins
// is encoded as an integer code whose bit (L-1-l) holds site l (0-based, so
// the first site is the most significant bit). Bit value 0 is spin +1, bit
// value 1 is spin -1. Dense vectors and block matrices are indexed by these
// codes, which matches the Kronecker ordering sigma_1 (x) sigma_2 (x) ...

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace nqs {

using Complex = std::complex<double>;
using Code = std::uint64_t;

/// Largest chain length that fits the integer code.
inline constexpr int kMaxSites = 62;

inline int spin_at(Code code, int site, int num_sites) {
  return ((code >> (num_sites - 1 - site)) & 1U) ? -1 : 1;
}

class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::vector<std::int8_t> spins);

  static SpinConfiguration from_code(Code code, int num_sites);

  Code code() const;
  int size() const { return static_cast<int>(spins_.size()); }
  int operator[](int site) const { return spins_[static_cast<std::size_t>(site)]; }
  std::span<const std::int8_t> spins() const { return spins_; }
  SpinConfiguration flipped(int site) const;
  Eigen::VectorXd as_vector() const;

  bool operator==(const SpinConfiguration&) const = default;

 private:
  std::vector<std::int8_t> spins_;
};

/// Columns of the returned L x N matrix are the +-1 spins of each code.
Eigen::MatrixXd spins_from_codes(std::span<const Code> codes, int num_sites);
Code code_of_column(const Eigen::MatrixXd& spins, Eigen::Index column);

class TiltedIsingModel {
 public:
  TiltedIsingModel(int num_sites, double coupling, double field_x, double field_z);

  int num_sites() const { return num_sites_; }
  double coupling() const { return coupling_; }
  double field_x() const { return field_x_; }
  double field_z() const { return field_z_; }
  int num_bonds() const { return num_sites_ - 1; }

  /// Weight n_l of site l (1-based): 1 on the two chain ends, 1/2 inside.
  double site_weight(int site) const;

  /// J sum x_l x_{l+1} - h_z sum x_l.
  double diagonal_energy(Code code) const;
  double diagonal_energy(const SpinConfiguration& x) const;

 private:
  int num_sites_;
  double coupling_;
  double field_x_;
  double field_z_;
};

TiltedIsingModel build_model(int num_sites, double coupling, double field_x, double field_z);

struct MatrixElement {
  SpinConfiguration config;
  Complex value;
};

/// Nonzero entries of the Hamiltonian row of x: the diagonal first, then one
/// entry per single-spin flip (omitted when h_x is zero).
std::vector<MatrixElement> connected_elements(const TiltedIsingModel& model,
                                              const SpinConfiguration& x);

/// Sum of the bond terms H_m, m = start .. start+span-2 (1-based), acting on
/// the 2^span space of sites start .. start+span-1.
Eigen::MatrixXcd block_generator(const TiltedIsingModel& model, int start, int span);

/// exp(-i generator tau) through the eigendecomposition of the generator.
Eigen::MatrixXcd block_unitary(const Eigen::MatrixXcd& generator, double tau);

struct TrotterBlock {
  int start = 1;  ///< first site, 1-based
  int span = 2;
  double duration = 0.0;
  Eigen::MatrixXcd generator;
  Eigen::MatrixXcd unitary;

  int dimension() const { return 1 << span; }
  /// Right shift that brings the block's bits to the bottom of a code.
  int shift(int num_sites) const { return num_sites - (start - 1) - span; }
  Code mask() const { return (Code{1} << span) - 1; }
  int local_index(Code code, int num_sites) const {
    return static_cast<int>((code >> shift(num_sites)) & mask());
  }
  Code with_local_index(Code code, int local, int num_sites) const {
    const int s = shift(num_sites);
    return (code & ~(mask() << s)) | (static_cast<Code>(local) << s);
  }
};

TrotterBlock make_block(const TiltedIsingModel& model, int start, int span, double duration);

/// Block whose unitary is the identity (zero generator, zero duration).
TrotterBlock identity_block(int start = 1, int span = 2);

/// Forward sweep of blocks followed by the reversed sweep, each block lasting
/// dt/2. Blocks tile the bonds with stride span-1; the last block may be
/// shorter so that every bond is covered exactly once per sweep.
struct TrotterSchedule {
  double dt = 0.0;
  std::vector<TrotterBlock> blocks;    ///< distinct blocks of the forward sweep
  std::vector<std::size_t> sequence;   ///< application order, indices into blocks

  std::size_t size() const { return sequence.size(); }
  const TrotterBlock& at(std::size_t i) const { return blocks[sequence[i]]; }
};

TrotterSchedule trotter_schedule(const TiltedIsingModel& model, int span, double dt);

/// Total duration with which each bond (index 0 .. L-2) appears in the schedule.
std::vector<double> bond_coverage(const TrotterSchedule& schedule, int num_sites);

}  // namespace nqs
