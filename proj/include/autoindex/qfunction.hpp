#pragma once

// Action-value approximator: 2C -> W1 -> W2 -> C+1 perceptron with ReLU hidden
// layers, squared-error loss on the taken action, and Adam updates.
// Everything is double precision and single-threaded so that a fixed seed
// gives bit-identical trajectories.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autoindex/bits.hpp"

namespace autoindex {

struct NetworkShape {
  std::size_t columns = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;

  std::size_t inputs() const { return 2 * columns; }
  std::size_t outputs() const { return columns + 1; }
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

// Weights and biases of the three affine layers. Gradients and Adam moments
// use the same layout.
struct Parameters {
  std::array<Eigen::MatrixXd, 3> weights;
  std::array<Eigen::VectorXd, 3> biases;

  static Parameters zeros(const NetworkShape& shape) {
    const std::array<Eigen::Index, 4> dims{static_cast<Eigen::Index>(shape.inputs()),
                                           static_cast<Eigen::Index>(shape.hidden1),
                                           static_cast<Eigen::Index>(shape.hidden2),
                                           static_cast<Eigen::Index>(shape.outputs())};
    Parameters p;
    for (std::size_t l = 0; l < 3; ++l) {
      p.weights[l] = Eigen::MatrixXd::Zero(dims[l + 1], dims[l]);
      p.biases[l] = Eigen::VectorXd::Zero(dims[l + 1]);
    }
    return p;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < 3; ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < 3; ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  // Flat view in the order W1, b1, W2, b2, W3, b3 (column-major inside each
  // matrix); used by gradient checking.
  double& at(std::size_t flat) {
    for (std::size_t l = 0; l < 3; ++l) {
      if (flat < static_cast<std::size_t>(weights[l].size())) return weights[l].data()[flat];
      flat -= weights[l].size();
      if (flat < static_cast<std::size_t>(biases[l].size())) return biases[l].data()[flat];
      flat -= biases[l].size();
    }
    throw std::out_of_range("parameter index out of range");
  }
  double at(std::size_t flat) const { return const_cast<Parameters*>(this)->at(flat); }

  friend bool operator==(const Parameters& a, const Parameters& b) {
    for (std::size_t l = 0; l < 3; ++l)
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    return true;
  }
};

// Activations of the last forward pass. Buffers only grow, so repeated
// passes over batches of varying width do not reallocate; the valid region is
// the first `cols` columns.
struct ForwardCache {
  Eigen::MatrixXd pre1, hidden1, pre2, hidden2, output;
  Eigen::Index cols = 0;
};

namespace detail {
inline void reserve_cols(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() < cols) m.resize(rows, std::max(cols, m.cols()));
}
}  // namespace detail

class QNetwork {
 public:
  QNetwork() = default;
  explicit QNetwork(const NetworkShape& shape) : shape_(shape), params_(Parameters::zeros(shape)) {}

  // Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  template <class Rng>
  static QNetwork initialized(const NetworkShape& shape, Rng& rng) {
    QNetwork net(shape);
    for (auto& w : net.params_.weights) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    }
    return net;
  }

  const NetworkShape& shape() const { return shape_; }
  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  // inputs: one state per column (2C x B). Returns (C+1) x B values.
  Eigen::MatrixXd forward_batch(Eigen::Ref<const Eigen::MatrixXd> inputs) const {
    ForwardCache cache;
    forward_cached(inputs, cache);
    return cache.output.leftCols(cache.cols);
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const { return forward_batch(input).col(0); }

  Eigen::VectorXd forward(const BitVector& state) const { return forward(to_input(state)); }

  void forward_cached(Eigen::Ref<const Eigen::MatrixXd> inputs, ForwardCache& cache) const {
    if (static_cast<std::size_t>(inputs.rows()) != shape_.inputs())
      throw std::invalid_argument("network input has " + std::to_string(inputs.rows()) +
                                  " rows, expected " + std::to_string(shape_.inputs()));
    const auto& w = params_.weights;
    const auto& b = params_.biases;
    const Eigen::Index n = inputs.cols();
    detail::reserve_cols(cache.pre1, w[0].rows(), n);
    detail::reserve_cols(cache.hidden1, w[0].rows(), n);
    detail::reserve_cols(cache.pre2, w[1].rows(), n);
    detail::reserve_cols(cache.hidden2, w[1].rows(), n);
    detail::reserve_cols(cache.output, w[2].rows(), n);
    cache.cols = n;

    auto pre1 = cache.pre1.leftCols(n);
    auto hidden1 = cache.hidden1.leftCols(n);
    auto pre2 = cache.pre2.leftCols(n);
    auto hidden2 = cache.hidden2.leftCols(n);
    auto output = cache.output.leftCols(n);
    pre1.noalias() = w[0] * inputs;
    pre1.colwise() += b[0];
    hidden1 = pre1.cwiseMax(0.0);
    pre2.noalias() = w[1] * hidden1;
    pre2.colwise() += b[1];
    hidden2 = pre2.cwiseMax(0.0);
    output.noalias() = w[2] * hidden2;
    output.colwise() += b[2];
  }

  static Eigen::VectorXd to_input(const BitVector& state) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) v[static_cast<Eigen::Index>(i)] = state[i] ? 1.0 : 0.0;
    return v;
  }

 private:
  NetworkShape shape_;
  Parameters params_;
};

// Regression batch. Several samples may share one input column.
struct TrainingBatch {
  Eigen::MatrixXd inputs;
  std::vector<std::size_t> column;
  std::vector<std::size_t> action;
  std::vector<double> target;

  std::size_t size() const { return target.size(); }
};

struct LossAndGradients {
  double loss = 0.0;
  Parameters gradients;
};

// Scratch buffers for repeated gradient evaluations.
struct GradientWorkspace {
  ForwardCache cache;
  Eigen::MatrixXd d_out, d2, d1;
  LossAndGradients result;
};

// loss = mean_i (Q(s_i)[a_i] - y_i)^2; only the taken action's output unit
// receives gradient. Result lands in ws.result.
inline void loss_and_gradients(const QNetwork& net, Eigen::Ref<const Eigen::MatrixXd> inputs,
                               const std::vector<std::size_t>& column,
                               const std::vector<std::size_t>& action, const std::vector<double>& target,
                               GradientWorkspace& ws) {
  if (target.empty()) throw std::invalid_argument("empty training batch");
  if (column.size() != target.size() || action.size() != target.size())
    throw std::invalid_argument("training batch fields have inconsistent lengths");
  net.forward_cached(inputs, ws.cache);
  const Eigen::Index cols = ws.cache.cols;
  const auto& w = net.params().weights;

  detail::reserve_cols(ws.d_out, w[2].rows(), cols);
  detail::reserve_cols(ws.d2, w[1].rows(), cols);
  detail::reserve_cols(ws.d1, w[0].rows(), cols);
  auto d_out = ws.d_out.leftCols(cols);
  auto d2 = ws.d2.leftCols(cols);
  auto d1 = ws.d1.leftCols(cols);

  const double n = static_cast<double>(target.size());
  d_out.setZero();
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto a = static_cast<Eigen::Index>(action[i]);
    const auto c = static_cast<Eigen::Index>(column[i]);
    const double diff = ws.cache.output(a, c) - target[i];
    loss += diff * diff;
    d_out(a, c) += 2.0 * diff / n;
  }
  ws.result.loss = loss / n;

  auto& g = ws.result.gradients;
  if (g.weights[0].size() == 0) g = Parameters::zeros(net.shape());
  g.weights[2].noalias() = d_out * ws.cache.hidden2.leftCols(cols).transpose();
  g.biases[2] = d_out.rowwise().sum();
  d2.noalias() = w[2].transpose() * d_out;
  d2.array() *= (ws.cache.pre2.leftCols(cols).array() > 0.0).cast<double>();
  g.weights[1].noalias() = d2 * ws.cache.hidden1.leftCols(cols).transpose();
  g.biases[1] = d2.rowwise().sum();
  d1.noalias() = w[1].transpose() * d2;
  d1.array() *= (ws.cache.pre1.leftCols(cols).array() > 0.0).cast<double>();
  g.weights[0].noalias() = d1 * inputs.transpose();
  g.biases[0] = d1.rowwise().sum();
}

inline LossAndGradients loss_and_gradients(const QNetwork& net, const TrainingBatch& batch) {
  GradientWorkspace ws;
  loss_and_gradients(net, batch.inputs, batch.column, batch.action, batch.target, ws);
  return std::move(ws.result);
}

inline double batch_loss(const QNetwork& net, const TrainingBatch& batch) {
  auto out = net.forward_batch(batch.inputs);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double diff = out(static_cast<Eigen::Index>(batch.action[i]),
                            static_cast<Eigen::Index>(batch.column[i])) - batch.target[i];
    loss += diff * diff;
  }
  return loss / static_cast<double>(batch.size());
}

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const NetworkShape& shape, AdamOptions options)
      : options_(options), first_(Parameters::zeros(shape)), second_(Parameters::zeros(shape)) {}

  // Bias-corrected Adam. Throws if the update leaves a non-finite parameter.
  void step(Parameters& params, const Parameters& grads) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double correction1 = 1.0 - std::pow(options_.beta1, t);
    const double correction2 = 1.0 - std::pow(options_.beta2, t);
    const double lr = options_.learning_rate;
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      if (p.rows() != g.rows() || p.cols() != g.cols())
        throw std::invalid_argument("gradient shape does not match parameter shape");
      m = options_.beta1 * m + (1.0 - options_.beta1) * g;
      v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / correction1) /
                   ((v.array() / correction2).sqrt() + options_.epsilon);
    };
    for (std::size_t l = 0; l < 3; ++l) {
      update(params.weights[l], grads.weights[l], first_.weights[l], second_.weights[l]);
      update(params.biases[l], grads.biases[l], first_.biases[l], second_.biases[l]);
    }
    if (!params.all_finite()) throw std::runtime_error("optimizer step produced non-finite parameters");
  }

  std::uint64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  const Parameters& first_moment() const { return first_; }
  const Parameters& second_moment() const { return second_; }

  void restore(std::uint64_t steps, Parameters first, Parameters second) {
    steps_ = steps;
    first_ = std::move(first);
    second_ = std::move(second);
  }

 private:
  AdamOptions options_;
  Parameters first_;
  Parameters second_;
  std::uint64_t steps_ = 0;
};

inline void optimizer_step(QNetwork& net, AdamOptimizer& opt, const Parameters& grads) {
  opt.step(net.params(), grads);
}

struct GradientCheckOptions {
  double perturbation = 1e-5;
  double tolerance = 1e-4;
  double kink_margin = 1e-6;
  // Denominator floor for the relative error, so parameters with an exactly
  // zero gradient compare against round-off rather than against zero.
  double relative_floor = 1e-6;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation crossed a ReLU kink
  bool kink_adjacent = false;  // some pre-activation within kink_margin of 0
  bool passed = false;
};

namespace detail {
inline double min_abs_preactivation(const QNetwork& net, const Eigen::MatrixXd& inputs) {
  ForwardCache cache;
  net.forward_cached(inputs, cache);
  return std::min(cache.pre1.leftCols(cache.cols).cwiseAbs().minCoeff(),
                  cache.pre2.leftCols(cache.cols).cwiseAbs().minCoeff());
}

inline std::vector<bool> relu_pattern(const QNetwork& net, const Eigen::MatrixXd& inputs) {
  ForwardCache cache;
  net.forward_cached(inputs, cache);
  std::vector<bool> pattern;
  pattern.reserve(static_cast<std::size_t>(cache.pre1.size() + cache.pre2.size()));
  for (Eigen::Index i = 0; i < cache.pre1.size(); ++i) pattern.push_back(cache.pre1.data()[i] > 0.0);
  for (Eigen::Index i = 0; i < cache.pre2.size(); ++i) pattern.push_back(cache.pre2.data()[i] > 0.0);
  return pattern;
}
}  // namespace detail

// Central differences against the analytic gradient, parameter by parameter.
// Perturbations that change any ReLU's on/off state are excluded and counted;
// inside one activation pattern the loss is smooth, so the remaining
// comparisons are valid. A pre-activation within kink_margin of zero is
// flagged so callers can redraw the point.
template <class GradientFn>
GradientCheckReport gradient_check(const QNetwork& net, const TrainingBatch& batch,
                                   const GradientCheckOptions& options, GradientFn&& analytic) {
  GradientCheckReport report;
  report.kink_adjacent = detail::min_abs_preactivation(net, batch.inputs) < options.kink_margin;
  const auto base_pattern = detail::relu_pattern(net, batch.inputs);
  const Parameters grads = analytic(net, batch).gradients;
  QNetwork probe = net;
  const double h = options.perturbation;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    double& p = probe.params().at(i);
    const double original = p;
    p = original + h;
    const double plus = batch_loss(probe, batch);
    const bool plus_same = detail::relu_pattern(probe, batch.inputs) == base_pattern;
    p = original - h;
    const double minus = batch_loss(probe, batch);
    const bool minus_same = detail::relu_pattern(probe, batch.inputs) == base_pattern;
    p = original;
    if (!plus_same || !minus_same) {
      ++report.excluded;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = grads.at(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), options.relative_floor});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_relative_error < options.tolerance;
  return report;
}

inline GradientCheckReport gradient_check(const QNetwork& net, const TrainingBatch& batch,
                                          const GradientCheckOptions& options = {}) {
  return gradient_check(net, batch, options,
                        [](const QNetwork& n, const TrainingBatch& b) { return loss_and_gradients(n, b); });
}

// Text parameter format, lossless through hexadecimal floats:
//   autoindex-qnetwork 1
//   <C> <W1> <W2>
//   then for each layer: the weight matrix row-major, then the bias vector,
//   one line per matrix row and one line for the bias.
namespace detail {
inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << std::hexfloat << m(r, c);
    out << '\n';
  }
  out << std::defaultfloat;
}

inline double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("truncated parameter data");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) throw std::runtime_error("bad number '" + token + "'");
  return v;
}

inline void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_double(in);
}

inline void write_parameters(std::ostream& out, const Parameters& p) {
  for (std::size_t l = 0; l < 3; ++l) {
    write_matrix(out, p.weights[l]);
    write_matrix(out, Eigen::MatrixXd(p.biases[l].transpose()));
  }
}

inline void read_parameters(std::istream& in, Parameters& p) {
  for (std::size_t l = 0; l < 3; ++l) {
    read_matrix(in, p.weights[l]);
    Eigen::MatrixXd b(1, p.biases[l].size());
    read_matrix(in, b);
    p.biases[l] = b.transpose();
  }
}
}  // namespace detail

inline void save_network(std::ostream& out, const QNetwork& net) {
  const auto& s = net.shape();
  out << "autoindex-qnetwork 1\n" << s.columns << ' ' << s.hidden1 << ' ' << s.hidden2 << '\n';
  detail::write_parameters(out, net.params());
}

inline QNetwork load_network(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "autoindex-qnetwork" || version != 1)
    throw std::runtime_error("not an autoindex network file");
  NetworkShape shape;
  if (!(in >> shape.columns >> shape.hidden1 >> shape.hidden2))
    throw std::runtime_error("network file header is truncated");
  QNetwork net(shape);
  detail::read_parameters(in, net.params());
  return net;
}

}  // namespace autoindex
