#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmetric/autoencoder.hpp"
#include "cpmetric/datagen.hpp"
#include "cpmetric/eval.hpp"
#include "cpmetric/model.hpp"

namespace cpmetric {

inline constexpr const char* kToolVersion = "0.1.0";

/// Written next to the outputs of every artifact-producing stage. Paths in
/// `inputs` are as given; paths in `outputs` are relative to the manifest.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
/// Throws ValidationError when the file is missing.
RunManifest read_manifest(const std::filesystem::path& path);

struct GenerateOptions {
  GenConfig gen;
  std::filesystem::path out;  ///< library file; the manifest goes to "<out>.manifest.json"
};

RunManifest run_generate(const GenerateOptions& opts);

struct DatasetStageOptions {
  GenConfig gen;
  /// Use this library instead of generating one; gen.n and gen.count are then
  /// taken from the file.
  std::optional<std::filesystem::path> library;
  DatasetOptions dataset;
  bool write_records = true;
  std::filesystem::path out_dir;
};

/// Writes library.json, folds.json, pairs.bin (u32 a, u32 b, f64 y per pair,
/// little-endian), records.bin plus its header, and manifest.json.
RunManifest run_dataset(const DatasetStageOptions& opts);

/// Rebuilds a Dataset from a dataset stage directory using the stored labels.
Dataset load_dataset(const std::filesystem::path& dir);

enum class AutoencoderChoice { none, separate, siamese };

std::string to_string(AutoencoderChoice c);
AutoencoderChoice autoencoder_choice_from_string(const std::string& s);

struct TrainStageOptions {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  std::optional<int> fold;  ///< all folds when empty
  TaskMode mode = TaskMode::classification;
  Architecture arch;
  TrainConfig train;
  AutoencoderChoice autoencoder = AutoencoderChoice::none;
  int autoencoder_epochs = 100;
  int autoencoder_batch = 32;
  std::optional<std::filesystem::path> init;  ///< starting checkpoint
};

/// Per fold k writes fold<k>/model.ckpt, fold<k>/history.csv and, when
/// pretraining, fold<k>/autoencoder.csv. Fold k trains with seed + k.
RunManifest run_train(const TrainStageOptions& opts);

struct EvalStageOptions {
  std::vector<std::filesystem::path> train_dirs;  ///< one report row each
  std::filesystem::path out_dir;
};

/// Evaluates every trained fold on its test side and pools the per-sample
/// results of all folds into one row per training run.
EvaluationReport evaluate_runs(const std::vector<std::filesystem::path>& train_dirs);

/// Writes report.json, report.txt and manifest.json.
RunManifest run_eval(const EvalStageOptions& opts);

struct BenchStageOptions {
  BenchConfig bench;
  std::vector<std::filesystem::path> checkpoints;
  /// Time freshly initialized models where no checkpoint covers n.
  bool untrained_fallback = false;
  std::filesystem::path out_dir;
};

/// Writes timing.json, timing.txt and manifest.json.
RunManifest run_bench(const BenchStageOptions& opts);

}  // namespace cpmetric
