#include "nqs/ansatz.hpp"

#include "nqs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nqs {

namespace {

constexpr Eigen::Index kChunk = 2048;

Eigen::Index fnn_parameter_count(const FnnShape& shape) {
  Eigen::Index n = 0;
  for (std::size_t k = 1; k < shape.layer_sizes.size(); ++k) {
    n += static_cast<Eigen::Index>(shape.layer_sizes[k]) * (shape.layer_sizes[k - 1] + 1);
  }
  return n;
}

}  // namespace

RbmShape rbm_shape(int num_sites, int alpha) { return RbmShape{num_sites, alpha * num_sites}; }

FnnShape default_fnn_shape(int num_sites) { return FnnShape{{num_sites, 4 * num_sites, 3 * num_sites, 1}}; }

int shape_sites(const AnsatzShape& shape) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RbmShape>) {
          return s.num_sites;
        } else {
          return s.layer_sizes.empty() ? 0 : s.layer_sizes.front();
        }
      },
      shape);
}

Eigen::Index parameter_count(const AnsatzShape& shape) {
  return std::visit(
      [](const auto& s) -> Eigen::Index {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RbmShape>) {
          return static_cast<Eigen::Index>(s.num_sites) + s.num_hidden +
                 static_cast<Eigen::Index>(s.num_hidden) * s.num_sites;
        } else {
          return fnn_parameter_count(s);
        }
      },
      shape);
}

void validate_shape(const AnsatzShape& shape) {
  if (const auto* rbm = std::get_if<RbmShape>(&shape)) {
    if (rbm->num_sites < 1 || rbm->num_sites > kMaxSites) throw DimensionError("RBM: invalid number of sites");
    if (rbm->num_hidden < 0) throw DimensionError("RBM: negative number of hidden units");
    return;
  }
  const auto& fnn = std::get<FnnShape>(shape);
  if (fnn.layer_sizes.size() < 2) throw DimensionError("FNN: need an input and an output layer");
  if (fnn.layer_sizes.back() != 1) throw DimensionError("FNN: the last layer must have exactly one node");
  if (fnn.layer_sizes.front() < 1 || fnn.layer_sizes.front() > kMaxSites) {
    throw DimensionError("FNN: invalid number of sites");
  }
  for (int n : fnn.layer_sizes) {
    if (n < 1) throw DimensionError("FNN: every layer needs at least one node");
  }
}

Complex activation(Complex u) {
  const Complex u2 = u * u;
  return u * (1.0 + u2 * (-1.0 / 3.0 + u2 * (2.0 / 15.0)));
}

Complex activation_derivative(Complex u) {
  const Complex u2 = u * u;
  return 1.0 + u2 * (-1.0 + u2 * (2.0 / 3.0));
}

Complex log_2cosh(Complex z) {
  const double re = z.real();
  if (std::abs(re) <= 20.0) return std::log(2.0 * std::cosh(z));
  const Complex sz = re > 0 ? z : -z;
  // 2 cosh z = e^{sz} (1 + e^{-2 sz}); |e^{-2 sz}| < e^{-40}
  return sz + std::log(1.0 + std::exp(-2.0 * sz));
}

void Ansatz::set_parameters(const Eigen::VectorXcd& params) {
  if (params.size() != params_.size()) throw DimensionError("parameter vector has the wrong length");
  params_ = params;
}

void Ansatz::check_input(const Eigen::MatrixXd& spins) const {
  if (spins.rows() != num_sites()) throw DimensionError("configuration length does not match the ansatz");
}

Complex Ansatz::log_amplitude(const SpinConfiguration& x) const {
  if (x.size() != num_sites()) throw DimensionError("configuration length does not match the ansatz");
  return log_amplitudes(x.as_vector())(0);
}

Eigen::VectorXcd Ansatz::log_derivatives(const SpinConfiguration& x) const {
  if (x.size() != num_sites()) throw DimensionError("configuration length does not match the ansatz");
  return log_derivatives(Eigen::MatrixXd(x.as_vector())).col(0);
}

// --- parameter packing ------------------------------------------------------

Eigen::VectorXcd flatten(const RbmParameters& p) {
  const auto L = p.visible_bias.size();
  const auto H = p.hidden_bias.size();
  if (p.weights.rows() != H || p.weights.cols() != L) throw DimensionError("RBM: weight matrix has the wrong shape");
  Eigen::VectorXcd flat(L + H + H * L);
  flat.head(L) = p.visible_bias;
  flat.segment(L, H) = p.hidden_bias;
  Eigen::Map<RowMatrixXcd>(flat.data() + L + H, H, L) = p.weights;
  return flat;
}

RbmParameters unflatten(const RbmShape& shape, const Eigen::VectorXcd& flat) {
  if (flat.size() != parameter_count(shape)) throw DimensionError("RBM: flat vector has the wrong length");
  const Eigen::Index L = shape.num_sites;
  const Eigen::Index H = shape.num_hidden;
  RbmParameters p;
  p.visible_bias = flat.head(L);
  p.hidden_bias = flat.segment(L, H);
  p.weights = Eigen::Map<const RowMatrixXcd>(flat.data() + L + H, H, L);
  return p;
}

Eigen::VectorXcd flatten(const FnnParameters& p) {
  if (p.weights.size() != p.biases.size()) throw DimensionError("FNN: weights and biases disagree");
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < p.weights.size(); ++k) n += p.weights[k].size() + p.biases[k].size();
  Eigen::VectorXcd flat(n);
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    const auto& w = p.weights[k];
    if (p.biases[k].size() != w.rows()) throw DimensionError("FNN: bias length does not match the layer");
    Eigen::Map<RowMatrixXcd>(flat.data() + off, w.rows(), w.cols()) = w;
    off += w.size();
    flat.segment(off, w.rows()) = p.biases[k];
    off += w.rows();
  }
  return flat;
}

FnnParameters unflatten(const FnnShape& shape, const Eigen::VectorXcd& flat) {
  validate_shape(shape);
  if (flat.size() != parameter_count(shape)) throw DimensionError("FNN: flat vector has the wrong length");
  FnnParameters p;
  Eigen::Index off = 0;
  for (std::size_t k = 1; k < shape.layer_sizes.size(); ++k) {
    const Eigen::Index rows = shape.layer_sizes[k];
    const Eigen::Index cols = shape.layer_sizes[k - 1];
    p.weights.emplace_back(Eigen::Map<const RowMatrixXcd>(flat.data() + off, rows, cols));
    off += rows * cols;
    p.biases.emplace_back(flat.segment(off, rows));
    off += rows;
  }
  return p;
}

// --- RBM --------------------------------------------------------------------

Rbm::Rbm(RbmShape shape) : Rbm(shape, Eigen::VectorXcd::Zero(parameter_count(shape))) {}

Rbm::Rbm(RbmShape shape, Eigen::VectorXcd params) : Ansatz(std::move(params)), shape_(shape) {
  validate_shape(shape_);
  if (params_.size() != parameter_count(shape_)) throw DimensionError("RBM: parameter vector has the wrong length");
}

Eigen::Map<const Eigen::VectorXcd> Rbm::visible_bias() const {
  return {params_.data(), shape_.num_sites};
}

Eigen::Map<const Eigen::VectorXcd> Rbm::hidden_bias() const {
  return {params_.data() + shape_.num_sites, shape_.num_hidden};
}

Eigen::Map<const RowMatrixXcd> Rbm::weights() const {
  return {params_.data() + shape_.num_sites + shape_.num_hidden, shape_.num_hidden, shape_.num_sites};
}

Eigen::VectorXcd Rbm::log_amplitudes(const Eigen::MatrixXd& spins) const {
  check_input(spins);
  const Eigen::MatrixXcd x = spins.cast<Complex>();
  Eigen::VectorXcd out = x.transpose() * visible_bias();
  if (shape_.num_hidden == 0) return out;
  for (Eigen::Index first = 0; first < spins.cols(); first += kChunk) {
    const Eigen::Index count = std::min(kChunk, spins.cols() - first);
    Eigen::MatrixXcd theta = weights() * x.middleCols(first, count);
    theta.colwise() += hidden_bias();
    for (Eigen::Index n = 0; n < count; ++n) {
      Complex acc = 0.0;
      for (Eigen::Index h = 0; h < theta.rows(); ++h) acc += log_2cosh(theta(h, n));
      out(first + n) += acc;
    }
  }
  return out;
}

Eigen::MatrixXcd Rbm::log_derivatives(const Eigen::MatrixXd& spins) const {
  check_input(spins);
  const Eigen::Index L = shape_.num_sites;
  const Eigen::Index H = shape_.num_hidden;
  const Eigen::MatrixXcd x = spins.cast<Complex>();
  Eigen::MatrixXcd out(num_parameters(), spins.cols());
  out.topRows(L) = x;
  if (H == 0) return out;
  Eigen::MatrixXcd theta = weights() * x;
  theta.colwise() += hidden_bias();
  const Eigen::MatrixXcd t = theta.unaryExpr([](Complex z) { return std::tanh(z); });
  out.middleRows(L, H) = t;
  for (Eigen::Index n = 0; n < spins.cols(); ++n) {
    Eigen::Map<RowMatrixXcd>(out.col(n).data() + L + H, H, L).noalias() = t.col(n) * x.col(n).transpose();
  }
  return out;
}

// --- FNN --------------------------------------------------------------------

Fnn::Fnn(FnnShape shape) : Fnn(shape, Eigen::VectorXcd::Zero(parameter_count(shape))) {}

Fnn::Fnn(FnnShape shape, Eigen::VectorXcd params) : Ansatz(std::move(params)), shape_(std::move(shape)) {
  validate_shape(shape_);
  if (params_.size() != parameter_count(shape_)) throw DimensionError("FNN: parameter vector has the wrong length");
  Eigen::Index off = 0;
  for (std::size_t k = 1; k < shape_.layer_sizes.size(); ++k) {
    offsets_.push_back(off);
    off += static_cast<Eigen::Index>(shape_.layer_sizes[k]) * (shape_.layer_sizes[k - 1] + 1);
  }
}

Eigen::Map<const RowMatrixXcd> Fnn::weights(int k) const {
  const auto rows = shape_.layer_sizes[static_cast<std::size_t>(k)];
  const auto cols = shape_.layer_sizes[static_cast<std::size_t>(k - 1)];
  return {params_.data() + layer_offset(k), rows, cols};
}

Eigen::Map<const Eigen::VectorXcd> Fnn::bias(int k) const {
  const auto rows = shape_.layer_sizes[static_cast<std::size_t>(k)];
  const auto cols = shape_.layer_sizes[static_cast<std::size_t>(k - 1)];
  return {params_.data() + layer_offset(k) + static_cast<Eigen::Index>(rows) * cols, rows};
}

void Fnn::forward_chunk(const Eigen::MatrixXd& spins, Eigen::Index first, Eigen::Index count,
                        Eigen::VectorXcd& out) const {
  // u^[0] = x and the activation acts on every layer input, including x.
  Eigen::MatrixXcd a = spins.middleCols(first, count).cast<Complex>().unaryExpr(&activation);
  Eigen::MatrixXcd u;
  const int K = num_layers();
  for (int k = 1; k <= K; ++k) {
    u.noalias() = weights(k) * a;
    u.colwise() += bias(k);
    if (k < K) a = u.unaryExpr(&activation);
  }
  out.segment(first, count) = u.row(0).transpose();
}

Eigen::VectorXcd Fnn::log_amplitudes(const Eigen::MatrixXd& spins) const {
  check_input(spins);
  Eigen::VectorXcd out(spins.cols());
  for (Eigen::Index first = 0; first < spins.cols(); first += kChunk) {
    forward_chunk(spins, first, std::min(kChunk, spins.cols() - first), out);
  }
  return out;
}

void Fnn::derivatives_chunk(const Eigen::MatrixXd& spins, Eigen::Index first, Eigen::Index count,
                            Eigen::MatrixXcd& out) const {
  const int K = num_layers();
  // pre[k] = u^[k] for k = 0..K-1, act[k] = f(u^[k]).
  std::vector<Eigen::MatrixXcd> pre(static_cast<std::size_t>(K));
  std::vector<Eigen::MatrixXcd> act(static_cast<std::size_t>(K));
  pre[0] = spins.middleCols(first, count).cast<Complex>();
  act[0] = pre[0].unaryExpr(&activation);
  for (int k = 1; k < K; ++k) {
    auto& u = pre[static_cast<std::size_t>(k)];
    u.noalias() = weights(k) * act[static_cast<std::size_t>(k - 1)];
    u.colwise() += bias(k);
    act[static_cast<std::size_t>(k)] = u.unaryExpr(&activation);
  }
  // delta = d u^[K] / d u^[k], propagated from the output layer down.
  Eigen::MatrixXcd delta = Eigen::MatrixXcd::Ones(1, count);
  for (int k = K; k >= 1; --k) {
    const auto& a = act[static_cast<std::size_t>(k - 1)];
    const Eigen::Index rows = delta.rows();
    const Eigen::Index cols = a.rows();
    const Eigen::Index off = layer_offset(k);
    for (Eigen::Index n = 0; n < count; ++n) {
      Complex* column = out.col(first + n).data();
      Eigen::Map<RowMatrixXcd>(column + off, rows, cols).noalias() = delta.col(n) * a.col(n).transpose();
      Eigen::Map<Eigen::VectorXcd>(column + off + rows * cols, rows) = delta.col(n);
    }
    if (k > 1) {
      Eigen::MatrixXcd back = weights(k).transpose() * delta;
      delta = back.cwiseProduct(pre[static_cast<std::size_t>(k - 1)].unaryExpr(&activation_derivative));
    }
  }
}

Eigen::MatrixXcd Fnn::log_derivatives(const Eigen::MatrixXd& spins) const {
  check_input(spins);
  Eigen::MatrixXcd out(num_parameters(), spins.cols());
  for (Eigen::Index first = 0; first < spins.cols(); first += kChunk) {
    derivatives_chunk(spins, first, std::min(kChunk, spins.cols() - first), out);
  }
  return out;
}

// --- factories --------------------------------------------------------------

std::unique_ptr<Ansatz> make_ansatz(const AnsatzShape& shape, Eigen::VectorXcd params) {
  validate_shape(shape);
  if (params.size() == 0) params = Eigen::VectorXcd::Zero(parameter_count(shape));
  if (const auto* rbm = std::get_if<RbmShape>(&shape)) return std::make_unique<Rbm>(*rbm, std::move(params));
  return std::make_unique<Fnn>(std::get<FnnShape>(shape), std::move(params));
}

std::unique_ptr<Ansatz> init_near_uniform(const AnsatzShape& shape, double noise_scale, std::uint64_t seed) {
  if (!(noise_scale >= 0.0)) throw ConfigError("noise scale must be non-negative");
  Eigen::VectorXcd params = Eigen::VectorXcd::Zero(parameter_count(shape));
  if (noise_scale > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, noise_scale / std::sqrt(2.0));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      params(i) = Complex(re, im);
    }
  }
  return make_ansatz(shape, std::move(params));
}

std::unique_ptr<Ansatz> init_fnn_generic(const FnnShape& shape, double noise_scale, const HiddenScales& hidden,
                                         std::uint64_t seed) {
  validate_shape(shape);
  if (!(noise_scale >= 0.0) || !(hidden.weight >= 0.0) || !(hidden.bias >= 0.0)) {
    throw ConfigError("initialization scales must be non-negative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(2.0));
  const auto draw = [&](double scale) {
    const double re = normal(rng);
    const double im = normal(rng);
    return scale * Complex(re, im);
  };
  FnnParameters p = unflatten(shape, Eigen::VectorXcd::Zero(parameter_count(shape)));
  const std::size_t layers = p.weights.size();
  for (std::size_t k = 0; k < layers; ++k) {
    const bool output = k + 1 == layers;
    const double w = output ? noise_scale : hidden.weight / std::sqrt(static_cast<double>(p.weights[k].cols()));
    const double b = output ? noise_scale : hidden.bias;
    for (Eigen::Index i = 0; i < p.weights[k].size(); ++i) p.weights[k](i) = draw(w);
    for (Eigen::Index i = 0; i < p.biases[k].size(); ++i) p.biases[k](i) = draw(b);
  }
  return make_ansatz(shape, flatten(p));
}

}  // namespace nqs
