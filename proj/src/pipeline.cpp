#include "cpmetric/pipeline.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>

#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/error.hpp"

namespace cpmetric {

namespace fs = std::filesystem;

namespace {

using clock = std::chrono::steady_clock;

double seconds_since(clock::time_point start) {
  return std::chrono::duration<double>(clock::now() - start).count();
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ValidationError("missing " + what + ": " + p.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

nlohmann::json read_json_file(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& p, const nlohmann::json& j) { write_text_file(p, j.dump(2) + "\n"); }

template <typename T>
void put_le(std::string& out, T v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t at) {
  std::array<unsigned char, sizeof(T)> bits;
  std::memcpy(bits.data(), in.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

std::string read_binary_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + p.string());
  return data;
}

void write_binary_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + p.string());
}

nlohmann::json arch_json(const Architecture& a) {
  return {{"encoder_hidden", a.encoder_hidden}, {"latent", a.latent}, {"head_hidden", a.head_hidden}};
}

std::string fold_dir(int k) { return "fold" + std::to_string(k); }

}  // namespace

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},     {"tool_version", m.tool_version}, {"seed", m.seed},
          {"config", m.config},       {"inputs", m.inputs},             {"outputs", m.outputs},
          {"wall_seconds", m.wall_seconds}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& path, const RunManifest& m) { write_json_file(path, to_json(m)); }

RunManifest read_manifest(const fs::path& path) {
  require_file(path, "manifest");
  return manifest_from_json(read_json_file(path));
}

// ---- generate

RunManifest run_generate(const GenerateOptions& opts) {
  const auto start = clock::now();
  opts.gen.validate();
  const auto nets = generate_library(opts.gen);
  if (opts.out.has_parent_path()) make_dir(opts.out.parent_path());
  write_library(opts.out, nets);

  RunManifest m;
  m.command = "generate";
  m.seed = opts.gen.seed;
  m.config = {{"n", opts.gen.n},
              {"count", opts.gen.count},
              {"max_indegree", opts.gen.effective_max_indegree()},
              {"seed", opts.gen.seed}};
  m.outputs["library"] = opts.out.filename().string();
  m.wall_seconds = seconds_since(start);
  write_manifest(fs::path(opts.out.string() + ".manifest.json"), m);
  return m;
}

// ---- dataset

RunManifest run_dataset(const DatasetStageOptions& opts) {
  const auto start = clock::now();
  GenConfig gen = opts.gen;
  std::vector<CPNet> library;
  if (opts.library) {
    require_file(*opts.library, "library");
    library = read_library(*opts.library);
    if (library.empty()) throw ValidationError("library is empty");
    gen.n = library.front().size();
    gen.count = library.size();
  } else {
    gen.validate();
    library = generate_library(gen);
  }
  const std::size_t train_size = opts.dataset.train_size.value_or(
      static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(library.size()))));
  auto membership = split_library(library.size(), gen.seed, opts.dataset.folds, train_size);
  const Dataset ds = assemble_dataset(gen, library, membership, opts.dataset);

  make_dir(opts.out_dir);
  write_library(opts.out_dir / "library.json", ds.library);

  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : ds.folds) folds.push_back({{"train", f.train_nets}, {"test", f.test_nets}});
  write_json_file(opts.out_dir / "folds.json", {{"folds", folds}});

  std::string pairs;
  pairs.reserve(ds.pairs.size() * 16);
  for (const auto& p : ds.pairs) {
    put_le<std::uint32_t>(pairs, p.a);
    put_le<std::uint32_t>(pairs, p.b);
    put_le<double>(pairs, p.y);
  }
  write_binary_file(opts.out_dir / "pairs.bin", pairs);

  RunManifest m;
  m.command = "dataset";
  m.seed = gen.seed;
  m.config = {{"n", gen.n},
              {"count", ds.library.size()},
              {"max_indegree", gen.effective_max_indegree()},
              {"seed", gen.seed},
              {"folds", opts.dataset.folds},
              {"train_size", train_size},
              {"p", ds.p.value()},
              {"m", ds.m},
              {"ordered", ds.ordered},
              {"pairs", ds.pairs.size()},
              {"encoding", kEncodingVersion}};
  if (opts.library) m.inputs["library"] = opts.library->string();
  m.outputs = {{"library", "library.json"}, {"folds", "folds.json"}, {"pairs", "pairs.bin"}};

  if (opts.write_records) {
    const auto nets = encode_library(ds.library);
    RecordWriter writer(opts.out_dir / "records.bin", gen.n, ds.m);
    for (const auto& p : ds.pairs) writer.append(nets[p.a], nets[p.b], p.y);
    writer.close();
    m.outputs["records"] = "records.bin";
    m.outputs["records_header"] = record_header_path("records.bin").string();
  }
  m.wall_seconds = seconds_since(start);
  write_manifest(opts.out_dir / "manifest.json", m);
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  const RunManifest m = read_manifest(dir / "manifest.json");
  if (m.command != "dataset") throw ValidationError(dir.string() + " is not a dataset directory");
  require_file(dir / "library.json", "library");
  require_file(dir / "folds.json", "fold membership");
  require_file(dir / "pairs.bin", "pair labels");

  GenConfig gen;
  DatasetOptions opts;
  FoldMembership membership;
  try {
    gen.n = m.config.at("n").get<int>();
    gen.count = m.config.at("count").get<std::size_t>();
    gen.max_indegree = m.config.at("max_indegree").get<int>();
    gen.seed = m.config.at("seed").get<std::uint64_t>();
    opts.folds = m.config.at("folds").get<int>();
    opts.p = PenaltyParam(m.config.at("p").get<double>());
    opts.m = m.config.at("m").get<int>();
    opts.ordered = m.config.at("ordered").get<bool>();
    if (m.config.at("encoding").get<std::string>() != kEncodingVersion)
      throw ValidationError("dataset encoding '" + m.config.at("encoding").get<std::string>() +
                            "' differs from this build's '" + kEncodingVersion + "'");
    const nlohmann::json folds = read_json_file(dir / "folds.json");
    for (const auto& f : folds.at("folds"))
      membership.emplace_back(f.at("train").get<std::vector<std::uint32_t>>(),
                              f.at("test").get<std::vector<std::uint32_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(dir.string() + ": " + e.what());
  }

  const std::string raw = read_binary_file(dir / "pairs.bin");
  if (raw.size() % 16 != 0) throw ParseError("pairs.bin has a truncated record");
  std::vector<double> labels;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ids;
  for (std::size_t at = 0; at < raw.size(); at += 16) {
    ids.emplace_back(get_le<std::uint32_t>(raw, at), get_le<std::uint32_t>(raw, at + 4));
    labels.push_back(get_le<double>(raw, at + 8));
  }
  Dataset ds = assemble_dataset(gen, read_library(dir / "library.json"), std::move(membership), opts, &labels);
  for (std::size_t i = 0; i < ds.pairs.size(); ++i)
    if (ds.pairs[i].a != ids[i].first || ds.pairs[i].b != ids[i].second)
      throw ValidationError("pairs.bin does not match the fold membership at record " + std::to_string(i));
  return ds;
}

// ---- train

std::string to_string(AutoencoderChoice c) {
  switch (c) {
    case AutoencoderChoice::none: return "none";
    case AutoencoderChoice::separate: return "separate";
    case AutoencoderChoice::siamese: return "siamese";
  }
  return "none";
}

AutoencoderChoice autoencoder_choice_from_string(const std::string& s) {
  if (s == "none") return AutoencoderChoice::none;
  if (s == "separate") return AutoencoderChoice::separate;
  if (s == "siamese") return AutoencoderChoice::siamese;
  throw ValidationError("unknown autoencoder '" + s + "' (expected none, separate or siamese)");
}

RunManifest run_train(const TrainStageOptions& opts) {
  const auto start = clock::now();
  const Dataset ds = load_dataset(opts.dataset_dir);
  const auto nets = encode_library(ds.library);

  std::optional<Model> init;
  if (opts.init) {
    require_file(*opts.init, "checkpoint");
    init = load_checkpoint(*opts.init);
    if (init->spec().n != ds.n())
      throw DimensionError("checkpoint is for n=" + std::to_string(init->spec().n) + " but the dataset has n=" +
                           std::to_string(ds.n()));
    if (init->spec().mode != opts.mode || init->spec().bins != ds.m)
      throw DimensionError("checkpoint head (" + to_string(init->spec().mode) + ", " +
                           std::to_string(init->spec().bins) + " bins) does not match the requested task");
  }

  std::vector<int> folds;
  if (opts.fold) {
    if (*opts.fold < 0 || *opts.fold >= static_cast<int>(ds.folds.size()))
      throw ValidationError("fold " + std::to_string(*opts.fold) + " does not exist");
    folds.push_back(*opts.fold);
  } else {
    for (int k = 0; k < static_cast<int>(ds.folds.size()); ++k) folds.push_back(k);
  }

  make_dir(opts.out_dir);
  RunManifest m;
  m.command = "train";
  m.seed = opts.train.seed;
  m.inputs["dataset"] = opts.dataset_dir.string();
  if (opts.init) m.inputs["init"] = opts.init->string();

  for (int k : folds) {
    TrainConfig cfg = opts.train;
    cfg.seed = opts.train.seed + static_cast<std::uint64_t>(k);
    ModelSpec spec;
    spec.n = ds.n();
    spec.mode = opts.mode;
    spec.bins = ds.m;
    spec.arch = init ? init->spec().arch : opts.arch;
    spec.seed = cfg.seed;
    Model model = init ? *init : Model(spec);

    const fs::path dir = opts.out_dir / fold_dir(k);
    make_dir(dir);
    if (opts.autoencoder != AutoencoderChoice::none) {
      std::vector<NetEncoding> train_nets;
      for (auto id : ds.folds[static_cast<std::size_t>(k)].train_nets) train_nets.push_back(nets[id]);
      TrainConfig ae_cfg = cfg;
      ae_cfg.epochs = opts.autoencoder_epochs;
      ae_cfg.batch_size = opts.autoencoder_batch;
      const auto kind = opts.autoencoder == AutoencoderChoice::separate ? AutoencoderKind::separate
                                                                         : AutoencoderKind::siamese;
      const PretrainResult pre = pretrain_autoencoder(kind, train_nets, model.spec(), ae_cfg);
      transfer_weights(pre.best, model);
      write_text_file(dir / "autoencoder.csv", pre.to_csv());
      m.outputs[fold_dir(k) + "/autoencoder"] = fold_dir(k) + "/autoencoder.csv";
    }
    const PairSet train_set = fold_pairs(ds, nets, k, false);
    const PairSet val_set = fold_pairs(ds, nets, k, true);
    const TrainHistory history = train(model, train_set, val_set.pairs.empty() ? nullptr : &val_set, cfg);
    save_checkpoint(dir / "model.ckpt", model);
    write_text_file(dir / "history.csv", history.to_csv());
    m.outputs[fold_dir(k) + "/model"] = fold_dir(k) + "/model.ckpt";
    m.outputs[fold_dir(k) + "/history"] = fold_dir(k) + "/history.csv";
  }

  m.config = {{"dataset", opts.dataset_dir.string()},
              {"folds", folds},
              {"mode", to_string(opts.mode)},
              {"architecture", arch_json(init ? init->spec().arch : opts.arch)},
              {"epochs", opts.train.epochs},
              {"batch_size", opts.train.batch_size},
              {"learning_rate", opts.train.adam.learning_rate},
              {"seed", opts.train.seed},
              {"freeze_encoders", opts.train.freeze_encoders},
              {"max_train_pairs", opts.train.max_train_pairs},
              {"autoencoder", to_string(opts.autoencoder)},
              {"autoencoder_epochs", opts.autoencoder_epochs},
              {"autoencoder_batch", opts.autoencoder_batch}};
  m.wall_seconds = seconds_since(start);
  write_manifest(opts.out_dir / "manifest.json", m);
  return m;
}

// ---- eval

EvaluationReport evaluate_runs(const std::vector<fs::path>& train_dirs) {
  if (train_dirs.empty()) throw ValidationError("no training runs to evaluate");
  EvaluationReport report;
  for (const auto& dir : train_dirs) {
    const RunManifest tm = read_manifest(dir / "manifest.json");
    if (tm.command != "train") throw ValidationError(dir.string() + " is not a training directory");
    const fs::path dataset_dir = tm.inputs.at("dataset");
    const Dataset ds = load_dataset(dataset_dir);
    const auto nets = encode_library(ds.library);
    const auto folds = tm.config.at("folds").get<std::vector<int>>();

    ReportRow row;
    row.label = tm.config.at("autoencoder").get<std::string>();
    row.n = ds.n();
    row.mode = task_mode_from_string(tm.config.at("mode").get<std::string>());
    std::vector<int> pred_bins, true_bins;
    std::vector<double> pred_y, true_y, constant_y;
    double constant_sum = 0.0;
    for (int k : folds) {
      const fs::path ckpt = dir / fold_dir(k) / "model.ckpt";
      require_file(ckpt, "checkpoint");
      const Model model = load_checkpoint(ckpt);
      if (model.spec().n != ds.n()) throw DimensionError("checkpoint n does not match its dataset");
      const PairSet test = fold_pairs(ds, nets, k, true);
      const PairSet train_side = fold_pairs(ds, nets, k, false);
      double mean = 0.0;
      for (const auto& p : train_side.pairs) mean += p.y;
      if (!train_side.pairs.empty()) mean /= static_cast<double>(train_side.pairs.size());
      constant_sum += mean;
      const auto preds = predict(model, test);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_bins.push_back(preds[i].bin);
        true_bins.push_back(test.pairs[i].bin);
        pred_y.push_back(preds[i].distance);
        true_y.push_back(test.pairs[i].y);
        constant_y.push_back(mean);
      }
    }
    if (row.mode == TaskMode::classification) {
      row.classification = classification_report(pred_bins, true_bins, ds.m);
    } else {
      row.regression.samples = true_y.size();
      row.regression.mae = mae(pred_y, true_y);
      row.regression.constant_mae = mae(constant_y, true_y);
      row.regression.constant_value = constant_sum / static_cast<double>(folds.size());
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

RunManifest run_eval(const EvalStageOptions& opts) {
  const auto start = clock::now();
  const EvaluationReport report = evaluate_runs(opts.train_dirs);
  make_dir(opts.out_dir);
  write_json_file(opts.out_dir / "report.json", to_json(report));
  write_text_file(opts.out_dir / "report.txt", to_table(report));

  RunManifest m;
  m.command = "eval";
  for (std::size_t i = 0; i < opts.train_dirs.size(); ++i)
    m.inputs["train" + std::to_string(i)] = opts.train_dirs[i].string();
  m.outputs = {{"report", "report.json"}, {"table", "report.txt"}};
  m.wall_seconds = seconds_since(start);
  write_manifest(opts.out_dir / "manifest.json", m);
  return m;
}

// ---- bench

RunManifest run_bench(const BenchStageOptions& opts) {
  const auto start = clock::now();
  std::map<int, Model> models;
  for (const auto& path : opts.checkpoints) {
    require_file(path, "checkpoint");
    Model model = load_checkpoint(path);
    const int n = model.spec().n;
    models.insert_or_assign(n, std::move(model));
  }
  const bool learned = std::find(opts.bench.methods.begin(), opts.bench.methods.end(),
                                 BenchMethod::model_inference) != opts.bench.methods.end();
  std::set<int> untrained;
  if (learned && opts.untrained_fallback) {
    for (int n : opts.bench.n_values)
      if (!models.count(n)) {
        ModelSpec spec;
        spec.n = n;
        spec.seed = opts.bench.seed;
        models.emplace(n, Model(spec));
        untrained.insert(n);
      }
  }
  const TimingReport report = benchmark_runtime(opts.bench, [&](int n) -> const Model* {
    auto it = models.find(n);
    return it == models.end() ? nullptr : &it->second;
  });

  make_dir(opts.out_dir);
  nlohmann::json j = to_json(report);
  j["untrained_models"] = untrained;
  write_json_file(opts.out_dir / "timing.json", j);
  write_text_file(opts.out_dir / "timing.txt", to_table(report));

  RunManifest m;
  m.command = "bench";
  m.seed = opts.bench.seed;
  std::vector<std::string> methods;
  for (auto method : opts.bench.methods) methods.push_back(to_string(method));
  m.config = {{"n_values", opts.bench.n_values},
              {"methods", methods},
              {"trials", opts.bench.trials},
              {"warmup", opts.bench.warmup},
              {"p", opts.bench.p.value()},
              {"untrained_fallback", opts.untrained_fallback}};
  for (std::size_t i = 0; i < opts.checkpoints.size(); ++i)
    m.inputs["checkpoint" + std::to_string(i)] = opts.checkpoints[i].string();
  m.outputs = {{"timing", "timing.json"}, {"table", "timing.txt"}};
  m.wall_seconds = seconds_since(start);
  write_manifest(opts.out_dir / "manifest.json", m);
  return m;
}

}  // namespace cpmetric
