#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpmetric/rng.hpp"

namespace cpmetric::nn {

enum class Activation { relu, sigmoid, softmax, linear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::linear;

  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  ///< out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::linear;
};

/// Gradient buffers shaped like an Mlp.
struct MlpGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  void set_zero();
};

/// Stack of fully connected layers. Inputs and outputs are column batches
/// (features x batch).
class Mlp {
 public:
  /// Activations of every layer for one forward pass; entry 0 is the input.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };

  Mlp() = default;
  /// Zero-initialized; softmax is only accepted on the last layer.
  explicit Mlp(const std::vector<LayerSpec>& specs);

  /// Uniform fan-in scaled init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero bias.
  void init(Rng& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

  /// Back-propagates dL/d(output) through the cached pass. Parameter gradients
  /// are added to `grad`; the return value is dL/d(input).
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_output, MlpGrad& grad) const;

  MlpGrad make_grad() const;

  int input_dim() const;
  int output_dim() const;
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
  bool empty() const { return layers_.empty(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Contiguous parameter blocks in layer order: W0, b0, W1, b1, ...
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

 private:
  std::vector<DenseLayer> layers_;
};

std::vector<std::span<const double>> gradient_blocks(const MlpGrad& grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update over matching parameter/gradient blocks.
/// Increments state.t before updating; state is sized on first use.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg);

/// Flushes subnormal floats to zero while alive and restores the previous
/// mode on exit. Training slows down badly once weights or Adam moments
/// drift into the subnormal range. No-op off x86.
class FlushDenormals {
 public:
  FlushDenormals();
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned int saved_ = 0;
};

/// Row-wise numerically stable softmax over each column.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z);

}  // namespace cpmetric::nn
