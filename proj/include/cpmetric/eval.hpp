#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmetric/model.hpp"

namespace cpmetric {

enum class Averaging { micro, macro };

/// Rows are true labels, columns predictions.
using Confusion = std::vector<std::vector<std::uint64_t>>;

Confusion confusion_matrix(std::span<const int> predictions, std::span<const int> labels, int m);

/// Single-label F1. Macro averages per-class F1 over all m classes; a class
/// with no predictions and no labels contributes 0.
double f_score(std::span<const int> predictions, std::span<const int> labels, int m, Averaging averaging);

/// When the chance agreement is 1 (one class for both raters) the result is
/// 1.0 if the raters agree everywhere, else 0.0.
double cohen_kappa(std::span<const int> predictions, std::span<const int> labels, int m);

/// Mean |pred - label| in bin units.
double mae(std::span<const int> predictions, std::span<const int> labels);
double mae(std::span<const double> predictions, std::span<const double> labels);

struct ClassificationReport {
  int m = 10;
  std::uint64_t samples = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  double mae_intervals = 0.0;
  Confusion confusion;

  bool operator==(const ClassificationReport&) const = default;
};

ClassificationReport classification_report(std::span<const int> predictions, std::span<const int> labels, int m);

struct RegressionReport {
  std::uint64_t samples = 0;
  double mae = 0.0;
  /// MAE of always answering the mean training label.
  double constant_mae = 0.0;
  double constant_value = 0.0;

  bool operator==(const RegressionReport&) const = default;
};

RegressionReport regression_report(std::span<const double> predictions, std::span<const double> labels,
                                   double constant_value);

nlohmann::json to_json(const ClassificationReport& r);
ClassificationReport classification_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegressionReport& r);
RegressionReport regression_report_from_json(const nlohmann::json& j);

/// One labelled row of a results table.
struct ReportRow {
  std::string label;
  int n = 0;
  TaskMode mode = TaskMode::classification;
  ClassificationReport classification;
  RegressionReport regression;

  bool operator==(const ReportRow&) const = default;
};

struct EvaluationReport {
  std::vector<ReportRow> rows;

  bool operator==(const EvaluationReport&) const = default;
};

nlohmann::json to_json(const EvaluationReport& r);
EvaluationReport evaluation_report_from_json(const nlohmann::json& j);
/// Aligned columns: classification rows show F-score, kappa and interval
/// MAE; regression rows show MAE.
std::string to_table(const EvaluationReport& r);

enum class BenchMethod { exact_ktd, model_inference };

std::string to_string(BenchMethod m);

struct TimingRow {
  BenchMethod method = BenchMethod::exact_ktd;
  int n = 0;
  int trials = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

struct TimingReport {
  std::vector<TimingRow> rows;
  /// Per n, share of triples where both methods pick the same closer net.
  /// Only filled when both methods ran.
  std::vector<std::pair<int, double>> agreement;

  const TimingRow* find(BenchMethod method, int n) const;
};

struct BenchConfig {
  std::vector<int> n_values{3, 4, 5, 6, 7};
  std::vector<BenchMethod> methods{BenchMethod::exact_ktd, BenchMethod::model_inference};
  int trials = 1000;
  int warmup = 50;
  std::uint64_t seed = 0;
  PenaltyParam p;
};

/// Returns the model to use for n, or nullptr when none is available.
using ModelLookup = std::function<const Model*(int n)>;

/// Samples (ref, A, B) triples per n and times the qualitative comparison
/// with each method on a monotonic clock. Triple generation is not timed.
/// Throws ValidationError when model inference is requested without a model.
TimingReport benchmark_runtime(const BenchConfig& cfg, const ModelLookup& models);

nlohmann::json to_json(const TimingReport& r);
std::string to_table(const TimingReport& r);

}  // namespace cpmetric
