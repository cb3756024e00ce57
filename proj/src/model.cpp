#include "cpmetric/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/error.hpp"
#include "cpmetric/order_metric.hpp"

namespace cpmetric {

std::string to_string(TaskMode mode) { return mode == TaskMode::classification ? "classification" : "regression"; }

TaskMode task_mode_from_string(const std::string& s) {
  if (s == "classification") return TaskMode::classification;
  if (s == "regression") return TaskMode::regression;
  throw ValidationError("unknown mode '" + s + "' (expected classification or regression)");
}

std::vector<nn::LayerSpec> encoder_layers(int input_dim, const Architecture& arch) {
  std::vector<nn::LayerSpec> specs;
  int in = input_dim;
  for (int width : arch.encoder_hidden) {
    specs.push_back({in, width, nn::Activation::relu});
    in = width;
  }
  specs.push_back({in, arch.latent, nn::Activation::relu});
  return specs;
}

namespace {

std::vector<nn::LayerSpec> head_layers(const ModelSpec& spec) {
  std::vector<nn::LayerSpec> specs;
  int in = 2 * 2 * spec.arch.latent;
  for (int width : spec.arch.head_hidden) {
    specs.push_back({in, width, nn::Activation::relu});
    in = width;
  }
  specs.push_back({in, spec.output_dim(),
                   spec.mode == TaskMode::classification ? nn::Activation::softmax : nn::Activation::sigmoid});
  return specs;
}

void append_blocks(std::vector<std::span<double>>& out, nn::Mlp& mlp) {
  for (auto b : mlp.parameter_blocks()) out.push_back(b);
}

}  // namespace

Model::Model(const ModelSpec& spec)
    : spec_(spec),
      encoder_laplacian_(encoder_layers(static_cast<int>(laplacian_size(spec.n)), spec.arch)),
      encoder_cpt_(encoder_layers(static_cast<int>(cpt_size(spec.n)), spec.arch)),
      head_(head_layers(spec)) {
  if (spec.n < 1) throw ValidationError("model needs n >= 1");
  if (spec.mode == TaskMode::classification && spec.bins < 2) throw ValidationError("classification needs >= 2 bins");
  Rng init(spec.seed, "init-encoders");
  encoder_laplacian_.init(init);
  encoder_cpt_.init(init);
  reinitialize_head();
}

void Model::reinitialize_head() {
  Rng init(spec_.seed, "init-head");
  head_.init(init);
}

std::size_t Model::parameter_count() const {
  return encoder_laplacian_.parameter_count() + encoder_cpt_.parameter_count() + head_.parameter_count();
}

std::vector<std::span<double>> Model::parameter_blocks() {
  std::vector<std::span<double>> out;
  append_blocks(out, encoder_laplacian_);
  append_blocks(out, encoder_cpt_);
  append_blocks(out, head_);
  return out;
}

std::vector<std::span<const double>> ModelGrad::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto* g : {&laplacian, &cpt, &head})
    for (auto b : nn::gradient_blocks(*g)) out.push_back(b);
  return out;
}

PairBatch make_batch(std::span<const NetEncoding> nets, std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs) {
  PairBatch batch;
  std::vector<std::uint32_t> distinct;
  distinct.reserve(pairs.size() * 2);
  for (auto [a, b] : pairs) {
    if (a >= nets.size() || b >= nets.size()) throw DimensionError("pair references a net outside the table");
    distinct.push_back(a);
    distinct.push_back(b);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const auto lap_dim = static_cast<Eigen::Index>(nets.empty() ? 0 : nets[0].laplacian.size());
  const auto cpt_dim = static_cast<Eigen::Index>(nets.empty() ? 0 : nets[0].cpt.size());
  batch.laplacian.resize(lap_dim, static_cast<Eigen::Index>(distinct.size()));
  batch.cpt.resize(cpt_dim, static_cast<Eigen::Index>(distinct.size()));
  for (std::size_t c = 0; c < distinct.size(); ++c) {
    const auto& e = nets[distinct[c]];
    if (static_cast<Eigen::Index>(e.laplacian.size()) != lap_dim || static_cast<Eigen::Index>(e.cpt.size()) != cpt_dim)
      throw DimensionError("net encodings of different sizes in one batch");
    batch.laplacian.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(e.laplacian.data(), lap_dim);
    batch.cpt.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(e.cpt.data(), cpt_dim);
  }
  auto column = [&](std::uint32_t id) {
    return static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), id) - distinct.begin());
  };
  for (auto [a, b] : pairs) {
    batch.first.push_back(column(a));
    batch.second.push_back(column(b));
  }
  return batch;
}

PairBatch make_batch(const EncodedSample& sample) {
  // Two slots even when both nets are equal, so each branch has its own column.
  const NetEncoding nets[] = {sample.a, sample.b};
  PairBatch batch;
  const auto lap_dim = static_cast<Eigen::Index>(sample.a.laplacian.size());
  const auto cpt_dim = static_cast<Eigen::Index>(sample.a.cpt.size());
  if (static_cast<Eigen::Index>(sample.b.laplacian.size()) != lap_dim ||
      static_cast<Eigen::Index>(sample.b.cpt.size()) != cpt_dim)
    throw DimensionError("the two nets of a sample have different sizes");
  batch.laplacian.resize(lap_dim, 2);
  batch.cpt.resize(cpt_dim, 2);
  for (int c = 0; c < 2; ++c) {
    batch.laplacian.col(c) = Eigen::Map<const Eigen::VectorXd>(nets[c].laplacian.data(), lap_dim);
    batch.cpt.col(c) = Eigen::Map<const Eigen::VectorXd>(nets[c].cpt.data(), cpt_dim);
  }
  batch.first = {0};
  batch.second = {1};
  return batch;
}

namespace {

// Head input: column p = [code(first[p]); code(second[p])].
Eigen::MatrixXd gather_pairs(const Eigen::MatrixXd& codes, const PairBatch& batch) {
  const Eigen::Index d = codes.rows();
  Eigen::MatrixXd h(2 * d, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t p = 0; p < batch.size(); ++p) {
    h.col(static_cast<Eigen::Index>(p)).head(d) = codes.col(batch.first[p]);
    h.col(static_cast<Eigen::Index>(p)).tail(d) = codes.col(batch.second[p]);
  }
  return h;
}

}  // namespace

Eigen::MatrixXd forward(const Model& model, const PairBatch& batch, ForwardPass* pass) {
  if (batch.laplacian.rows() != model.encoder_laplacian().input_dim() ||
      batch.cpt.rows() != model.encoder_cpt().input_dim())
    throw DimensionError("encodings of size " + std::to_string(batch.laplacian.rows()) + "/" +
                         std::to_string(batch.cpt.rows()) + " do not fit a model for n=" +
                         std::to_string(model.spec().n));
  ForwardPass local;
  ForwardPass& fp = pass ? *pass : local;
  const Eigen::MatrixXd lap_code = model.encoder_laplacian().forward(batch.laplacian, &fp.laplacian);
  const Eigen::MatrixXd cpt_code = model.encoder_cpt().forward(batch.cpt, &fp.cpt);
  Eigen::MatrixXd codes(lap_code.rows() + cpt_code.rows(), lap_code.cols());
  codes << lap_code, cpt_code;
  fp.output = model.head().forward(gather_pairs(codes, batch), &fp.head);
  return fp.output;
}

Eigen::VectorXd forward(const Model& model, const EncodedSample& sample) {
  return forward(model, make_batch(sample)).col(0);
}

LossResult loss(TaskMode mode, const Eigen::MatrixXd& output, const Targets& targets) {
  const Eigen::Index batch = output.cols();
  if (batch == 0) throw DimensionError("empty batch");
  LossResult r;
  r.d_output = Eigen::MatrixXd::Zero(output.rows(), batch);
  const double scale = 1.0 / static_cast<double>(batch);
  if (mode == TaskMode::classification) {
    if (static_cast<Eigen::Index>(targets.bins.size()) != batch) throw DimensionError("target count mismatch");
    for (Eigen::Index c = 0; c < batch; ++c) {
      const int t = targets.bins[static_cast<std::size_t>(c)];
      if (t < 0 || t >= output.rows()) throw DimensionError("target bin outside the output layer");
      const double prob = output(t, c);
      if (prob > kProbabilityClamp) {
        r.value -= std::log(prob);
        r.d_output(t, c) = -scale / prob;
      } else {
        r.value -= std::log(kProbabilityClamp);
      }
    }
  } else {
    if (output.rows() != 1) throw DimensionError("regression output must be scalar");
    if (static_cast<Eigen::Index>(targets.values.size()) != batch) throw DimensionError("target count mismatch");
    for (Eigen::Index c = 0; c < batch; ++c) {
      const double err = output(0, c) - targets.values[static_cast<std::size_t>(c)];
      r.value += err * err;
      r.d_output(0, c) = 2.0 * err * scale;
    }
  }
  r.value *= scale;
  return r;
}

double loss(TaskMode mode, const Eigen::VectorXd& output, const EncodedSample& sample) {
  Targets t;
  t.bins = {sample.bin};
  t.values = {sample.y};
  return loss(mode, Eigen::MatrixXd(output), t).value;
}

ModelGrad backward(const Model& model, const PairBatch& batch, const ForwardPass& pass, const Eigen::MatrixXd& d_output) {
  ModelGrad grad{model.encoder_laplacian().make_grad(), model.encoder_cpt().make_grad(), model.head().make_grad()};
  const Eigen::MatrixXd d_head_in = model.head().backward(pass.head, d_output, grad.head);

  const Eigen::Index lap_dim = model.encoder_laplacian().output_dim();
  const Eigen::Index code = model.code_dim();
  Eigen::MatrixXd d_codes = Eigen::MatrixXd::Zero(code, batch.laplacian.cols());
  for (std::size_t p = 0; p < batch.size(); ++p) {
    d_codes.col(batch.first[p]) += d_head_in.col(static_cast<Eigen::Index>(p)).head(code);
    d_codes.col(batch.second[p]) += d_head_in.col(static_cast<Eigen::Index>(p)).tail(code);
  }
  model.encoder_laplacian().backward(pass.laplacian, d_codes.topRows(lap_dim), grad.laplacian);
  model.encoder_cpt().backward(pass.cpt, d_codes.bottomRows(code - lap_dim), grad.cpt);
  return grad;
}

double loss_and_gradient(const Model& model, const PairBatch& batch, const Targets& targets, ModelGrad* grad) {
  ForwardPass pass;
  const Eigen::MatrixXd out = forward(model, batch, grad ? &pass : nullptr);
  LossResult l = loss(model.spec().mode, out, targets);
  if (grad) *grad = backward(model, batch, pass, l.d_output);
  return l.value;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  out.precision(10);
  for (const auto& e : epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
  return out.str();
}

PairSet fold_pairs(const Dataset& ds, std::span<const NetEncoding> nets, int fold, bool test_side) {
  if (fold < 0 || fold >= static_cast<int>(ds.folds.size()))
    throw ValidationError("fold " + std::to_string(fold) + " does not exist");
  const auto& f = ds.folds[static_cast<std::size_t>(fold)];
  PairSet set{nets, {}};
  for (std::size_t id : test_side ? f.test_pairs : f.train_pairs) set.pairs.push_back(ds.pairs[id]);
  return set;
}

namespace {

Targets targets_for(std::span<const LabeledPair> pairs) {
  Targets t;
  for (const auto& p : pairs) {
    t.bins.push_back(p.bin);
    t.values.push_back(p.y);
  }
  return t;
}

PairBatch batch_for(std::span<const NetEncoding> nets, std::span<const LabeledPair> pairs) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ids;
  ids.reserve(pairs.size());
  for (const auto& p : pairs) ids.emplace_back(p.a, p.b);
  return make_batch(nets, ids);
}

void check_set(const Model& model, const PairSet& set) {
  if (set.nets.empty()) return;
  if (set.nets[0].laplacian.size() != laplacian_size(model.spec().n) || set.nets[0].cpt.size() != cpt_size(model.spec().n))
    throw DimensionError("dataset encodings do not match a model for n=" + std::to_string(model.spec().n));
}

}  // namespace

double evaluate_loss(const Model& model, const PairSet& set, int batch_size) {
  check_set(model, set);
  if (set.pairs.empty()) throw ValidationError("cannot evaluate an empty pair set");
  double total = 0.0;
  const std::span<const LabeledPair> all(set.pairs);
  for (std::size_t lo = 0; lo < all.size(); lo += static_cast<std::size_t>(batch_size)) {
    const auto chunk = all.subspan(lo, std::min<std::size_t>(static_cast<std::size_t>(batch_size), all.size() - lo));
    total += loss_and_gradient(model, batch_for(set.nets, chunk), targets_for(chunk), nullptr) *
             static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(all.size());
}

TrainHistory train(Model& model, const PairSet& train_set, const PairSet* validation, const TrainConfig& cfg) {
  const nn::FlushDenormals flush;
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(cfg.adam.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (train_set.pairs.empty()) throw ValidationError("training fold is empty");
  check_set(model, train_set);
  if (validation) check_set(model, *validation);

  std::vector<LabeledPair> pairs = train_set.pairs;
  if (cfg.max_train_pairs > 0 && cfg.max_train_pairs < pairs.size()) {
    Rng subsample(cfg.seed, "subsample");
    std::vector<std::size_t> keep(pairs.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    subsample.shuffle(keep);
    keep.resize(cfg.max_train_pairs);
    std::sort(keep.begin(), keep.end());
    std::vector<LabeledPair> subset;
    for (auto k : keep) subset.push_back(pairs[k]);
    pairs = std::move(subset);
  }

  Rng shuffle(cfg.seed, "shuffle");
  nn::AdamState state;
  nn::AdamState head_state;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledPair> chunk;
  TrainHistory history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      chunk.clear();
      for (std::size_t i = lo; i < hi; ++i) chunk.push_back(pairs[order[i]]);
      ModelGrad grad;
      const double batch_loss = loss_and_gradient(model, batch_for(train_set.nets, chunk), targets_for(chunk), &grad);
      epoch_loss += batch_loss * static_cast<double>(chunk.size());
      if (cfg.freeze_encoders) {
        const auto params = model.head().parameter_blocks();
        const auto grads = nn::gradient_blocks(grad.head);
        nn::adam_step(params, grads, head_state, cfg.adam);
      } else {
        const auto params = model.parameter_blocks();
        const auto grads = grad.blocks();
        nn::adam_step(params, grads, state, cfg.adam);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(pairs.size());
    rec.val_loss = (validation && !validation->pairs.empty()) ? evaluate_loss(model, *validation) : rec.train_loss;
    history.epochs.push_back(rec);
  }
  return history;
}

Prediction prediction_from_output(const ModelSpec& spec, const Eigen::VectorXd& output) {
  Prediction p;
  if (spec.mode == TaskMode::classification) {
    Eigen::Index best = 0;
    output.maxCoeff(&best);
    p.bin = static_cast<int>(best);
    for (Eigen::Index c = 0; c < output.size(); ++c)
      p.distance += output(c) * (static_cast<double>(c) + 0.5) / static_cast<double>(output.size());
  } else {
    p.distance = output(0);
    p.bin = bin_label(std::clamp(p.distance, 0.0, 1.0), spec.bins);
  }
  return p;
}

Prediction predict(const Model& model, const NetEncoding& a, const NetEncoding& b) {
  EncodedSample s;
  s.a = a;
  s.b = b;
  return prediction_from_output(model.spec(), forward(model, s));
}

Prediction predict(const Model& model, const CPNet& a, const CPNet& b) {
  require_same_variables(a, b);
  if (a.size() != model.spec().n)
    throw DimensionError("model expects n=" + std::to_string(model.spec().n) + ", nets have n=" + std::to_string(a.size()));
  return predict(model, encode_net(a), encode_net(b));
}

std::vector<Prediction> predict(const Model& model, const PairSet& set, int batch_size) {
  check_set(model, set);
  std::vector<Prediction> out;
  out.reserve(set.pairs.size());
  const std::span<const LabeledPair> all(set.pairs);
  for (std::size_t lo = 0; lo < all.size(); lo += static_cast<std::size_t>(batch_size)) {
    const auto chunk = all.subspan(lo, std::min<std::size_t>(static_cast<std::size_t>(batch_size), all.size() - lo));
    const Eigen::MatrixXd outputs = forward(model, batch_for(set.nets, chunk));
    for (Eigen::Index c = 0; c < outputs.cols(); ++c)
      out.push_back(prediction_from_output(model.spec(), outputs.col(c)));
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'P', 'M', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

nlohmann::json layers_json(const nn::Mlp& mlp) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : mlp.specs())
    out.push_back({{"in", s.in_dim}, {"out", s.out_dim}, {"activation", nn::to_string(s.activation)}});
  return out;
}

void check_layers(const nlohmann::json& expected, const nn::Mlp& mlp, const char* which) {
  if (expected != layers_json(mlp))
    throw DimensionError(std::string("checkpoint ") + which + " layers do not match the declared architecture");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto& spec = model.spec();
  nlohmann::json header{{"format", "cpmetric-model"},
                        {"n", spec.n},
                        {"mode", to_string(spec.mode)},
                        {"bins", spec.bins},
                        {"seed", spec.seed},
                        {"encoding", kEncodingVersion},
                        {"architecture",
                         {{"encoder_hidden", spec.arch.encoder_hidden},
                          {"latent", spec.arch.latent},
                          {"head_hidden", spec.arch.head_hidden}}},
                        {"layers",
                         {{"encoder_laplacian", layers_json(model.encoder_laplacian())},
                          {"encoder_cpt", layers_json(model.encoder_cpt())},
                          {"head", layers_json(model.head())}}}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto* mlp : {&model.encoder_laplacian(), &model.encoder_cpt(), &model.head()}) {
    for (const auto& layer : mlp->layers()) {
      // Weights row-major (out x in), then bias.
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(layer.weights(r, c))));
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(layer.bias(r))));
    }
  }
  write_text_file(path, out);
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  if (data.size() < 12 || data.compare(0, 4, kMagic, 4) != 0) throw ParseError(path.string() + ": not a model checkpoint");
  if (get_u32(data, 4) != kCheckpointVersion) throw ParseError(path.string() + ": unsupported checkpoint version");
  const std::size_t header_len = get_u32(data, 8);
  if (data.size() < 12 + header_len) throw ParseError(path.string() + ": truncated header");
  nlohmann::json header;
  ModelSpec spec;
  try {
    header = nlohmann::json::parse(data.substr(12, header_len));
    spec.n = header.at("n").get<int>();
    spec.mode = task_mode_from_string(header.at("mode").get<std::string>());
    spec.bins = header.at("bins").get<int>();
    spec.seed = header.at("seed").get<std::uint64_t>();
    const auto& arch = header.at("architecture");
    spec.arch.encoder_hidden = arch.at("encoder_hidden").get<std::vector<int>>();
    spec.arch.latent = arch.at("latent").get<int>();
    spec.arch.head_hidden = arch.at("head_hidden").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (header.value("encoding", std::string()) != kEncodingVersion)
    throw ValidationError(path.string() + ": checkpoint uses a different encoding convention");
  Model model(spec);
  check_layers(header["layers"]["encoder_laplacian"], model.encoder_laplacian(), "encoder_laplacian");
  check_layers(header["layers"]["encoder_cpt"], model.encoder_cpt(), "encoder_cpt");
  check_layers(header["layers"]["head"], model.head(), "head");

  std::size_t at = 12 + header_len;
  auto next = [&]() {
    if (at + 4 > data.size()) throw ParseError(path.string() + ": truncated weights");
    const float f = std::bit_cast<float>(get_u32(data, at));
    at += 4;
    return static_cast<double>(f);
  };
  for (auto* mlp : {&model.encoder_laplacian(), &model.encoder_cpt(), &model.head()}) {
    for (auto& layer : mlp->layers()) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = next();
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = next();
    }
  }
  if (at != data.size()) throw ParseError(path.string() + ": trailing bytes after weights");
  return model;
}

}  // namespace cpmetric
