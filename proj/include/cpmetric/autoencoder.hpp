#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpmetric/encoders.hpp"
#include "cpmetric/model.hpp"
#include "cpmetric/nn.hpp"

namespace cpmetric {

/// separate: one autoencoder per input type, trained independently.
/// siamese: both codes are concatenated, mixed by a shared fusion layer, and
/// the fused code is decoded by one decoder per input type.
enum class AutoencoderKind { separate, siamese };

std::string to_string(AutoencoderKind kind);
AutoencoderKind autoencoder_kind_from_string(const std::string& s);

/// Encoders have exactly the shapes of a Model's encoders so they can be
/// transferred. The cpt decoder emits logits; reconstruction is sigmoid(logit).
struct Autoencoder {
  AutoencoderKind kind = AutoencoderKind::separate;
  nn::Mlp encoder_laplacian;
  nn::Mlp encoder_cpt;
  nn::Mlp fusion;  ///< siamese only
  nn::Mlp decoder_laplacian;
  nn::Mlp decoder_cpt;

  std::vector<std::span<double>> parameter_blocks();
};

Autoencoder make_autoencoder(AutoencoderKind kind, const ModelSpec& spec, std::uint64_t seed);

struct AutoencoderGrad {
  nn::MlpGrad encoder_laplacian, encoder_cpt, fusion, decoder_laplacian, decoder_cpt;

  std::vector<std::span<const double>> blocks() const;
};

struct ReconstructionLoss {
  double laplacian = 0.0;  ///< mean squared error
  double cpt = 0.0;        ///< binary cross-entropy
  double cpt_accuracy = 0.0;

  double total() const { return laplacian + cpt; }
};

/// Inputs are column batches of flattened encodings. Fills `grad` (for the
/// total loss) when non-null.
ReconstructionLoss reconstruction_loss(const Autoencoder& ae, const Eigen::MatrixXd& laplacian,
                                       const Eigen::MatrixXd& cpt, AutoencoderGrad* grad = nullptr);

struct AutoencoderEpoch {
  int epoch = 0;
  ReconstructionLoss train;
  ReconstructionLoss validation;
};

struct PretrainResult {
  Autoencoder best;  ///< weights from the best validation epoch(s)
  std::vector<AutoencoderEpoch> history;
  int best_epoch_laplacian = 0;  ///< same as best_epoch_cpt for siamese
  int best_epoch_cpt = 0;

  std::string to_csv() const;
};

/// Pretrains on distinct net encodings. A seeded `validation_fraction` of
/// the nets is held out for best-epoch selection: separate keeps each
/// autoencoder's best epoch on its own loss, siamese keeps the best epoch
/// on the summed loss.
PretrainResult pretrain_autoencoder(AutoencoderKind kind, std::span<const NetEncoding> nets, const ModelSpec& spec,
                                    const TrainConfig& cfg, double validation_fraction = 0.1);

/// Copies pretrained encoder weights into `model`; the head keeps its fresh
/// initialization. Throws DimensionError when shapes differ.
void transfer_weights(const Autoencoder& ae, Model& model);

}  // namespace cpmetric
