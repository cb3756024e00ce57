#include "cpmetric/nn.hpp"

#include <cmath>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "cpmetric/error.hpp"

namespace cpmetric::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  if (s == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + s + "'");
}

void MlpGrad::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : bias) b.setZero();
}

Mlp::Mlp(const std::vector<LayerSpec>& specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.in_dim <= 0 || s.out_dim <= 0) throw DimensionError("layer dimensions must be positive");
    if (i > 0 && specs[i - 1].out_dim != s.in_dim) throw DimensionError("consecutive layer dimensions disagree");
    if (s.activation == Activation::softmax && i + 1 != specs.size())
      throw DimensionError("softmax is only allowed on the output layer");
    layers_.push_back(DenseLayer{Eigen::MatrixXd::Zero(s.out_dim, s.in_dim), Eigen::VectorXd::Zero(s.out_dim),
                                 s.activation});
  }
}

void Mlp::init(Rng& rng) {
  for (auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols()));
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = rng.uniform(-limit, limit);
    layer.bias.setZero();
  }
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double peak = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - peak).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = (1.0 / (1.0 + (-z.array()).exp())).matrix(); break;
    case Activation::softmax: z = softmax_columns(z); break;
    case Activation::linear: break;
  }
}

// dL/dz from dL/da, given the activation output a.
Eigen::MatrixXd activation_backward(Activation act, const Eigen::MatrixXd& a, const Eigen::MatrixXd& d_a) {
  switch (act) {
    case Activation::relu: return (a.array() > 0.0).select(d_a, 0.0);
    case Activation::sigmoid: return (d_a.array() * a.array() * (1.0 - a.array())).matrix();
    case Activation::softmax: {
      const Eigen::RowVectorXd dot = (d_a.array() * a.array()).colwise().sum();
      return (a.array() * (d_a.rowwise() - dot).array()).matrix();
    }
    case Activation::linear: return d_a;
  }
  return d_a;
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (layers_.empty()) return input;
  if (input.rows() != layers_.front().weights.cols())
    throw DimensionError("input has " + std::to_string(input.rows()) + " features, layer expects " +
                         std::to_string(layers_.front().weights.cols()));
  if (cache) {
    cache->activations.resize(layers_.size() + 1);
    cache->activations[0] = input;
  }
  Eigen::MatrixXd x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    Eigen::MatrixXd z = layer.weights * x;
    z.colwise() += layer.bias;
    apply_activation(layer.activation, z);
    x = std::move(z);
    if (cache) cache->activations[i + 1] = x;
  }
  return x;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output, MlpGrad& grad) const {
  if (cache.activations.size() != layers_.size() + 1) throw DimensionError("forward cache does not match network");
  Eigen::MatrixXd d = d_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    const Eigen::MatrixXd dz = activation_backward(layer.activation, cache.activations[i + 1], d);
    grad.weights[i].noalias() += dz * cache.activations[i].transpose();
    grad.bias[i] += dz.rowwise().sum();
    d.noalias() = layer.weights.transpose() * dz;
  }
  return d;
}

MlpGrad Mlp::make_grad() const {
  MlpGrad g;
  for (const auto& layer : layers_) {
    g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weights.rows()); }

std::vector<LayerSpec> Mlp::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_)
    out.push_back(LayerSpec{static_cast<int>(l.weights.cols()), static_cast<int>(l.weights.rows()), l.activation});
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return total;
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameter_blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> gradient_blocks(const MlpGrad& grad) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < grad.weights.size(); ++i) {
    out.emplace_back(grad.weights[i].data(), static_cast<std::size_t>(grad.weights[i].size()));
    out.emplace_back(grad.bias[i].data(), static_cast<std::size_t>(grad.bias[i].size()));
  }
  return out;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("parameter and gradient block counts differ");
  std::size_t total = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) throw DimensionError("parameter and gradient block sizes differ");
    total += params[b].size();
  }
  if (state.m.empty()) {
    state.m.assign(total, 0.0);
    state.v.assign(total, 0.0);
  }
  if (state.m.size() != total) throw DimensionError("optimizer state does not match parameters");

  ++state.t;
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::size_t k = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b];
    auto g = grads[b];
    for (std::size_t i = 0; i < w.size(); ++i, ++k) {
      state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g[i];
      state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = state.m[k] / correction1;
      const double v_hat = state.v[k] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

#if defined(__SSE__)
FlushDenormals::FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040U); }  // FTZ | DAZ
FlushDenormals::~FlushDenormals() { _mm_setcsr(saved_); }
#else
FlushDenormals::FlushDenormals() {}
FlushDenormals::~FlushDenormals() {}
#endif

}  // namespace cpmetric::nn
