#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpmetric/cpnet.hpp"
#include "cpmetric/datagen.hpp"
#include "cpmetric/encoders.hpp"
#include "cpmetric/nn.hpp"

namespace cpmetric {

enum class TaskMode { classification, regression };

std::string to_string(TaskMode mode);
TaskMode task_mode_from_string(const std::string& s);

/// Layer widths. Each input type gets its own encoder
/// [in -> encoder_hidden... -> latent], all relu; the head is
/// [2 * 2 * latent -> head_hidden... -> output].
struct Architecture {
  std::vector<int> encoder_hidden{128, 64};
  int latent = 32;
  std::vector<int> head_hidden{64, 32};

  bool operator==(const Architecture&) const = default;
};

struct ModelSpec {
  int n = 3;
  TaskMode mode = TaskMode::classification;
  int bins = 10;
  Architecture arch;
  std::uint64_t seed = 0;

  int output_dim() const { return mode == TaskMode::classification ? bins : 1; }
};

std::vector<nn::LayerSpec> encoder_layers(int input_dim, const Architecture& arch);

/// Siamese distance network. Both nets of a pair go through the same two
/// encoders (one storage per encoder); their codes are concatenated as
/// [lap(A), cpt(A), lap(B), cpt(B)] and fed to the head.
class Model {
 public:
  explicit Model(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  nn::Mlp& encoder_laplacian() { return encoder_laplacian_; }
  nn::Mlp& encoder_cpt() { return encoder_cpt_; }
  nn::Mlp& head() { return head_; }
  const nn::Mlp& encoder_laplacian() const { return encoder_laplacian_; }
  const nn::Mlp& encoder_cpt() const { return encoder_cpt_; }
  const nn::Mlp& head() const { return head_; }

  /// Width of one net's code (laplacian latent + cpt latent).
  int code_dim() const { return encoder_laplacian_.output_dim() + encoder_cpt_.output_dim(); }
  std::size_t parameter_count() const;

  /// Encoder blocks first, then head blocks.
  std::vector<std::span<double>> parameter_blocks();

  /// Re-draws the head weights from the seed stream used at construction.
  void reinitialize_head();

 private:
  ModelSpec spec_;
  nn::Mlp encoder_laplacian_;
  nn::Mlp encoder_cpt_;
  nn::Mlp head_;
};

struct ModelGrad {
  nn::MlpGrad laplacian;
  nn::MlpGrad cpt;
  nn::MlpGrad head;

  std::vector<std::span<const double>> blocks() const;
};

/// Distinct nets of a batch stacked as columns, and the columns each pair uses.
struct PairBatch {
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd cpt;
  std::vector<int> first;
  std::vector<int> second;

  std::size_t size() const { return first.size(); }
};

/// Builds a batch from library encodings; each distinct net is encoded once.
PairBatch make_batch(std::span<const NetEncoding> nets, std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs);
PairBatch make_batch(const EncodedSample& sample);

struct ForwardPass {
  nn::Mlp::Cache laplacian;
  nn::Mlp::Cache cpt;
  nn::Mlp::Cache head;
  Eigen::MatrixXd output;
};

/// Output columns: class probabilities (classification) or a scalar in (0,1).
Eigen::MatrixXd forward(const Model& model, const PairBatch& batch, ForwardPass* pass = nullptr);
Eigen::VectorXd forward(const Model& model, const EncodedSample& sample);

struct Targets {
  std::vector<int> bins;
  std::vector<double> values;
};

inline constexpr double kProbabilityClamp = 1e-12;

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd d_output;  ///< dL/d(output), already divided by batch size
};

/// Mean over the batch of cross-entropy against the one-hot bin
/// (classification) or squared error against y (regression).
LossResult loss(TaskMode mode, const Eigen::MatrixXd& output, const Targets& targets);

/// Single-sample loss, target taken from the sample's bin or y.
double loss(TaskMode mode, const Eigen::VectorXd& output, const EncodedSample& sample);

/// Backpropagates through head and both encoder branches. Each encoder
/// receives the summed contributions of branch A and branch B.
ModelGrad backward(const Model& model, const PairBatch& batch, const ForwardPass& pass, const Eigen::MatrixXd& d_output);

/// Loss of the batch; fills `grad` when non-null.
double loss_and_gradient(const Model& model, const PairBatch& batch, const Targets& targets, ModelGrad* grad);

struct TrainConfig {
  int epochs = 70;
  int batch_size = 128;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  bool freeze_encoders = false;
  /// Use a seeded subset of this many training pairs; 0 keeps all.
  std::size_t max_train_pairs = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_csv() const;
};

/// Pairs over a shared table of net encodings.
struct PairSet {
  std::span<const NetEncoding> nets;
  std::vector<LabeledPair> pairs;
};

/// Pairs of one fold side, referencing `nets` (the encoded library).
PairSet fold_pairs(const Dataset& ds, std::span<const NetEncoding> nets, int fold, bool test_side);

/// Mini-batch Adam training, deterministic given cfg.seed.
TrainHistory train(Model& model, const PairSet& train_set, const PairSet* validation, const TrainConfig& cfg);

/// Mean loss over a pair set.
double evaluate_loss(const Model& model, const PairSet& set, int batch_size = 1024);

struct Prediction {
  int bin = 0;
  double distance = 0.0;  ///< regression output, or expected bin centre under the class probabilities
};

Prediction prediction_from_output(const ModelSpec& spec, const Eigen::VectorXd& output);
Prediction predict(const Model& model, const CPNet& a, const CPNet& b);
Prediction predict(const Model& model, const NetEncoding& a, const NetEncoding& b);
std::vector<Prediction> predict(const Model& model, const PairSet& set, int batch_size = 1024);

/// Versioned header plus little-endian float32 weights in layer order.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cpmetric
