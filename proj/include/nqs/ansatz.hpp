#pragma once

// Variational wave functions. Both ansatze hold a flat complex parameter
// vector and are holomorphic in it, so log-derivatives are complex-linear.
//
// Flat layouts:
//   RBM  [ a (L) | b (H) | W (H x L, row-major) ]
//   FNN  for each layer k = 1..K: [ W^[k] (n_k x n_{k-1}, row-major) | b^[k] (n_k) ]

#include "nqs/spin_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

namespace nqs {

struct RbmShape {
  int num_sites = 0;
  int num_hidden = 0;
  bool operator==(const RbmShape&) const = default;
};

struct FnnShape {
  std::vector<int> layer_sizes;  ///< [L, n_1, ..., 1]
  bool operator==(const FnnShape&) const = default;
};

using AnsatzShape = std::variant<RbmShape, FnnShape>;

/// RBM with alpha * L hidden units.
RbmShape rbm_shape(int num_sites, int alpha);
/// FNN with layer sizes [L, 4L, 3L, 1].
FnnShape default_fnn_shape(int num_sites);

int shape_sites(const AnsatzShape& shape);
Eigen::Index parameter_count(const AnsatzShape& shape);
void validate_shape(const AnsatzShape& shape);

/// Odd polynomial u - u^3/3 + 2u^5/15 (truncated series of ln cosh').
Complex activation(Complex u);
Complex activation_derivative(Complex u);

/// ln(2 cosh z), switching to |Re z| + ln(1 + e^{-2|Re z|}) style evaluation
/// once |Re z| exceeds 20 so that large arguments never overflow.
Complex log_2cosh(Complex z);

class Ansatz {
 public:
  virtual ~Ansatz() = default;

  virtual std::unique_ptr<Ansatz> clone() const = 0;
  virtual AnsatzShape shape() const = 0;
  virtual int num_sites() const = 0;

  Eigen::Index num_parameters() const { return params_.size(); }
  const Eigen::VectorXcd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXcd& params);

  /// log psi for every column of an L x N matrix of +-1 spins.
  virtual Eigen::VectorXcd log_amplitudes(const Eigen::MatrixXd& spins) const = 0;
  /// d log psi / d theta, one column per configuration (N_p x N).
  virtual Eigen::MatrixXcd log_derivatives(const Eigen::MatrixXd& spins) const = 0;

  Complex log_amplitude(const SpinConfiguration& x) const;
  Eigen::VectorXcd log_derivatives(const SpinConfiguration& x) const;

 protected:
  explicit Ansatz(Eigen::VectorXcd params) : params_(std::move(params)) {}
  Ansatz(const Ansatz&) = default;
  Ansatz& operator=(const Ansatz&) = default;

  void check_input(const Eigen::MatrixXd& spins) const;

  Eigen::VectorXcd params_;
};

using RowMatrixXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RbmParameters {
  Eigen::VectorXcd visible_bias;  ///< a
  Eigen::VectorXcd hidden_bias;   ///< b
  Eigen::MatrixXcd weights;       ///< W, H x L
};

Eigen::VectorXcd flatten(const RbmParameters& p);
RbmParameters unflatten(const RbmShape& shape, const Eigen::VectorXcd& flat);

struct FnnParameters {
  std::vector<Eigen::MatrixXcd> weights;  ///< W^[k], n_k x n_{k-1}
  std::vector<Eigen::VectorXcd> biases;   ///< b^[k]
};

Eigen::VectorXcd flatten(const FnnParameters& p);
FnnParameters unflatten(const FnnShape& shape, const Eigen::VectorXcd& flat);

class Rbm final : public Ansatz {
 public:
  explicit Rbm(RbmShape shape);
  Rbm(RbmShape shape, Eigen::VectorXcd params);

  std::unique_ptr<Ansatz> clone() const override { return std::make_unique<Rbm>(*this); }
  AnsatzShape shape() const override { return shape_; }
  int num_sites() const override { return shape_.num_sites; }

  Eigen::VectorXcd log_amplitudes(const Eigen::MatrixXd& spins) const override;
  Eigen::MatrixXcd log_derivatives(const Eigen::MatrixXd& spins) const override;
  using Ansatz::log_derivatives;

 private:
  Eigen::Map<const Eigen::VectorXcd> visible_bias() const;
  Eigen::Map<const Eigen::VectorXcd> hidden_bias() const;
  Eigen::Map<const RowMatrixXcd> weights() const;

  RbmShape shape_;
};

class Fnn final : public Ansatz {
 public:
  explicit Fnn(FnnShape shape);
  Fnn(FnnShape shape, Eigen::VectorXcd params);

  std::unique_ptr<Ansatz> clone() const override { return std::make_unique<Fnn>(*this); }
  AnsatzShape shape() const override { return shape_; }
  int num_sites() const override { return shape_.layer_sizes.front(); }
  int num_layers() const { return static_cast<int>(shape_.layer_sizes.size()) - 1; }

  /// Offset of W^[k] (k = 1..K) in the flat parameter vector; b^[k] follows it.
  Eigen::Index layer_offset(int k) const { return offsets_[static_cast<std::size_t>(k - 1)]; }

  Eigen::VectorXcd log_amplitudes(const Eigen::MatrixXd& spins) const override;
  Eigen::MatrixXcd log_derivatives(const Eigen::MatrixXd& spins) const override;
  using Ansatz::log_derivatives;

 private:
  Eigen::Map<const RowMatrixXcd> weights(int k) const;
  Eigen::Map<const Eigen::VectorXcd> bias(int k) const;
  void forward_chunk(const Eigen::MatrixXd& spins, Eigen::Index first, Eigen::Index count,
                     Eigen::VectorXcd& out) const;
  void derivatives_chunk(const Eigen::MatrixXd& spins, Eigen::Index first, Eigen::Index count,
                         Eigen::MatrixXcd& out) const;

  FnnShape shape_;
  std::vector<Eigen::Index> offsets_;
};

/// Builds the ansatz for a shape. An empty parameter vector means all zeros.
std::unique_ptr<Ansatz> make_ansatz(const AnsatzShape& shape, Eigen::VectorXcd params = {});

/// All parameters i.i.d. circular complex Gaussian with E|theta|^2 = noise_scale^2.
/// noise_scale = 0 gives the exactly uniform state.
std::unique_ptr<Ansatz> init_near_uniform(const AnsatzShape& shape, double noise_scale, std::uint64_t seed);

/// Hidden-layer draws for init_fnn_generic: W^[k] entries with
/// E|w|^2 = (weight / sqrt(fan_in))^2, biases with E|b|^2 = bias^2.
struct HiddenScales {
  double weight = 0.5;
  double bias = 0.3;
};

/// Random hidden layers, output layer i.i.d. with E|theta|^2 = noise_scale^2.
/// The state is uniform up to O(noise_scale), while the log-derivatives stay
/// of order one; near theta = 0 the FNN is an odd function of the spins and
/// its geometric tensor is nearly singular.
std::unique_ptr<Ansatz> init_fnn_generic(const FnnShape& shape, double noise_scale, const HiddenScales& hidden,
                                         std::uint64_t seed);

}  // namespace nqs
