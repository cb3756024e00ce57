#include "cpmetric/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cpmetric/error.hpp"

namespace cpmetric {

std::string to_string(AutoencoderKind kind) { return kind == AutoencoderKind::separate ? "separate" : "siamese"; }

AutoencoderKind autoencoder_kind_from_string(const std::string& s) {
  if (s == "separate") return AutoencoderKind::separate;
  if (s == "siamese") return AutoencoderKind::siamese;
  throw ValidationError("unknown autoencoder kind '" + s + "'");
}

namespace {

std::vector<nn::LayerSpec> decoder_layers(int code_dim, int output_dim, const Architecture& arch) {
  std::vector<nn::LayerSpec> specs;
  int in = code_dim;
  for (auto it = arch.encoder_hidden.rbegin(); it != arch.encoder_hidden.rend(); ++it) {
    specs.push_back({in, *it, nn::Activation::relu});
    in = *it;
  }
  specs.push_back({in, output_dim, nn::Activation::linear});
  return specs;
}

void append(std::vector<std::span<double>>& out, nn::Mlp& mlp) {
  for (auto b : mlp.parameter_blocks()) out.push_back(b);
}

void append(std::vector<std::span<const double>>& out, const nn::MlpGrad& g) {
  for (auto b : nn::gradient_blocks(g)) out.push_back(b);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::vector<std::span<double>> Autoencoder::parameter_blocks() {
  std::vector<std::span<double>> out;
  append(out, encoder_laplacian);
  append(out, encoder_cpt);
  append(out, fusion);
  append(out, decoder_laplacian);
  append(out, decoder_cpt);
  return out;
}

std::vector<std::span<const double>> AutoencoderGrad::blocks() const {
  std::vector<std::span<const double>> out;
  append(out, encoder_laplacian);
  append(out, encoder_cpt);
  append(out, fusion);
  append(out, decoder_laplacian);
  append(out, decoder_cpt);
  return out;
}

Autoencoder make_autoencoder(AutoencoderKind kind, const ModelSpec& spec, std::uint64_t seed) {
  const int lap_dim = static_cast<int>(laplacian_size(spec.n));
  const int cpt_dim = static_cast<int>(cpt_size(spec.n));
  const int latent = spec.arch.latent;
  Autoencoder ae;
  ae.kind = kind;
  ae.encoder_laplacian = nn::Mlp(encoder_layers(lap_dim, spec.arch));
  ae.encoder_cpt = nn::Mlp(encoder_layers(cpt_dim, spec.arch));
  int code = latent;
  if (kind == AutoencoderKind::siamese) {
    code = 2 * latent;
    ae.fusion = nn::Mlp({{2 * latent, code, nn::Activation::relu}});
  }
  ae.decoder_laplacian = nn::Mlp(decoder_layers(code, lap_dim, spec.arch));
  ae.decoder_cpt = nn::Mlp(decoder_layers(code, cpt_dim, spec.arch));

  Rng init(seed, "init-autoencoder");
  ae.encoder_laplacian.init(init);
  ae.encoder_cpt.init(init);
  ae.fusion.init(init);
  ae.decoder_laplacian.init(init);
  ae.decoder_cpt.init(init);
  return ae;
}

ReconstructionLoss reconstruction_loss(const Autoencoder& ae, const Eigen::MatrixXd& laplacian,
                                       const Eigen::MatrixXd& cpt, AutoencoderGrad* grad) {
  if (laplacian.cols() != cpt.cols() || laplacian.cols() == 0) throw DimensionError("autoencoder batch shape mismatch");
  const bool siamese = ae.kind == AutoencoderKind::siamese;
  nn::Mlp::Cache c_enc_lap, c_enc_cpt, c_fusion, c_dec_lap, c_dec_cpt;
  const Eigen::MatrixXd z_lap = ae.encoder_laplacian.forward(laplacian, &c_enc_lap);
  const Eigen::MatrixXd z_cpt = ae.encoder_cpt.forward(cpt, &c_enc_cpt);

  Eigen::MatrixXd code_lap = z_lap, code_cpt = z_cpt;
  if (siamese) {
    Eigen::MatrixXd joined(z_lap.rows() + z_cpt.rows(), z_lap.cols());
    joined << z_lap, z_cpt;
    code_lap = ae.fusion.forward(joined, &c_fusion);
    code_cpt = code_lap;
  }
  const Eigen::MatrixXd recon = ae.decoder_laplacian.forward(code_lap, &c_dec_lap);
  const Eigen::MatrixXd logits = ae.decoder_cpt.forward(code_cpt, &c_dec_cpt);

  const double batch = static_cast<double>(laplacian.cols());
  const double lap_scale = 1.0 / (batch * static_cast<double>(laplacian.rows()));
  const double cpt_scale = 1.0 / (batch * static_cast<double>(cpt.rows()));

  ReconstructionLoss out;
  const Eigen::MatrixXd diff = recon - laplacian;
  out.laplacian = diff.squaredNorm() * lap_scale;
  Eigen::MatrixXd prob = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
  std::size_t correct = 0;
  for (Eigen::Index c = 0; c < cpt.cols(); ++c) {
    for (Eigen::Index r = 0; r < cpt.rows(); ++r) {
      const double z = logits(r, c), t = cpt(r, c);
      out.cpt += softplus(z) - t * z;
      correct += ((prob(r, c) > 0.5) == (t > 0.5)) ? 1 : 0;
    }
  }
  out.cpt *= cpt_scale;
  out.cpt_accuracy = static_cast<double>(correct) / static_cast<double>(cpt.size());

  if (grad) {
    *grad = AutoencoderGrad{ae.encoder_laplacian.make_grad(), ae.encoder_cpt.make_grad(), ae.fusion.make_grad(),
                            ae.decoder_laplacian.make_grad(), ae.decoder_cpt.make_grad()};
    const Eigen::MatrixXd d_recon = 2.0 * lap_scale * diff;
    const Eigen::MatrixXd d_logits = cpt_scale * (prob - cpt);
    Eigen::MatrixXd d_code_lap = ae.decoder_laplacian.backward(c_dec_lap, d_recon, grad->decoder_laplacian);
    Eigen::MatrixXd d_code_cpt = ae.decoder_cpt.backward(c_dec_cpt, d_logits, grad->decoder_cpt);
    Eigen::MatrixXd d_z_lap, d_z_cpt;
    if (siamese) {
      const Eigen::MatrixXd d_joined = ae.fusion.backward(c_fusion, d_code_lap + d_code_cpt, grad->fusion);
      d_z_lap = d_joined.topRows(z_lap.rows());
      d_z_cpt = d_joined.bottomRows(z_cpt.rows());
    } else {
      d_z_lap = std::move(d_code_lap);
      d_z_cpt = std::move(d_code_cpt);
    }
    ae.encoder_laplacian.backward(c_enc_lap, d_z_lap, grad->encoder_laplacian);
    ae.encoder_cpt.backward(c_enc_cpt, d_z_cpt, grad->encoder_cpt);
  }
  return out;
}

std::string PretrainResult::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_laplacian,train_cpt,val_laplacian,val_cpt,val_cpt_accuracy\n";
  for (const auto& e : history)
    out << e.epoch << ',' << e.train.laplacian << ',' << e.train.cpt << ',' << e.validation.laplacian << ','
        << e.validation.cpt << ',' << e.validation.cpt_accuracy << '\n';
  return out.str();
}

namespace {

void stack(std::span<const NetEncoding> nets, std::span<const std::size_t> ids, Eigen::MatrixXd& lap, Eigen::MatrixXd& cpt) {
  const auto lap_dim = static_cast<Eigen::Index>(nets[0].laplacian.size());
  const auto cpt_dim = static_cast<Eigen::Index>(nets[0].cpt.size());
  lap.resize(lap_dim, static_cast<Eigen::Index>(ids.size()));
  cpt.resize(cpt_dim, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) {
    lap.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(nets[ids[c]].laplacian.data(), lap_dim);
    cpt.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(nets[ids[c]].cpt.data(), cpt_dim);
  }
}

}  // namespace

PretrainResult pretrain_autoencoder(AutoencoderKind kind, std::span<const NetEncoding> nets, const ModelSpec& spec,
                                    const TrainConfig& cfg, double validation_fraction) {
  const nn::FlushDenormals flush;
  if (nets.empty()) throw ValidationError("autoencoder pretraining needs at least one net");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ValidationError("epochs and batch size must be >= 1");
  if (nets[0].laplacian.size() != laplacian_size(spec.n) || nets[0].cpt.size() != cpt_size(spec.n))
    throw DimensionError("encodings do not match n=" + std::to_string(spec.n));

  std::vector<std::size_t> ids(nets.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng split(cfg.seed, "ae-split");
  split.shuffle(ids);
  std::size_t val_count = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(nets.size())));
  if (val_count >= nets.size()) val_count = nets.size() - 1;
  std::vector<std::size_t> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(val_count));
  std::vector<std::size_t> train_ids(ids.begin() + static_cast<std::ptrdiff_t>(val_count), ids.end());
  std::sort(val_ids.begin(), val_ids.end());
  std::sort(train_ids.begin(), train_ids.end());

  Eigen::MatrixXd val_lap, val_cpt, all_train_lap, all_train_cpt;
  if (!val_ids.empty()) stack(nets, val_ids, val_lap, val_cpt);

  PretrainResult result;
  Autoencoder ae = make_autoencoder(kind, spec, cfg.seed);
  result.best = ae;
  double best_lap = std::numeric_limits<double>::infinity();
  double best_cpt = best_lap;
  double best_total = best_lap;

  Rng shuffle(cfg.seed, "ae-shuffle");
  nn::AdamState state;
  Eigen::MatrixXd lap, cpt;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle.shuffle(train_ids);
    AutoencoderEpoch rec;
    rec.epoch = epoch;
    for (std::size_t lo = 0; lo < train_ids.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(train_ids.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      stack(nets, std::span<const std::size_t>(train_ids).subspan(lo, hi - lo), lap, cpt);
      AutoencoderGrad grad;
      const ReconstructionLoss l = reconstruction_loss(ae, lap, cpt, &grad);
      const double w = static_cast<double>(hi - lo);
      rec.train.laplacian += l.laplacian * w;
      rec.train.cpt += l.cpt * w;
      rec.train.cpt_accuracy += l.cpt_accuracy * w;
      const auto params = ae.parameter_blocks();
      const auto grads = grad.blocks();
      nn::adam_step(params, grads, state, cfg.adam);
    }
    const double total = static_cast<double>(train_ids.size());
    rec.train.laplacian /= total;
    rec.train.cpt /= total;
    rec.train.cpt_accuracy /= total;
    rec.validation = val_ids.empty() ? rec.train : reconstruction_loss(ae, val_lap, val_cpt);
    result.history.push_back(rec);

    if (kind == AutoencoderKind::separate) {
      if (rec.validation.laplacian < best_lap) {
        best_lap = rec.validation.laplacian;
        result.best.encoder_laplacian = ae.encoder_laplacian;
        result.best.decoder_laplacian = ae.decoder_laplacian;
        result.best_epoch_laplacian = epoch;
      }
      if (rec.validation.cpt < best_cpt) {
        best_cpt = rec.validation.cpt;
        result.best.encoder_cpt = ae.encoder_cpt;
        result.best.decoder_cpt = ae.decoder_cpt;
        result.best_epoch_cpt = epoch;
      }
    } else if (rec.validation.total() < best_total) {
      best_total = rec.validation.total();
      result.best = ae;
      result.best_epoch_laplacian = result.best_epoch_cpt = epoch;
    }
  }
  return result;
}

void transfer_weights(const Autoencoder& ae, Model& model) {
  if (ae.encoder_laplacian.specs() != model.encoder_laplacian().specs() ||
      ae.encoder_cpt.specs() != model.encoder_cpt().specs())
    throw DimensionError("pretrained encoder shapes do not match the model encoders");
  model.encoder_laplacian() = ae.encoder_laplacian;
  model.encoder_cpt() = ae.encoder_cpt;
}

}  // namespace cpmetric
