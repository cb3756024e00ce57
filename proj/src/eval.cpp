#include "cpmetric/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "cpmetric/datagen.hpp"
#include "cpmetric/error.hpp"

namespace cpmetric {

namespace {

template <typename A, typename B>
void check_lengths(const A& a, const B& b) {
  if (a.size() != b.size())
    throw ValidationError("length mismatch: " + std::to_string(a.size()) + " predictions, " +
                          std::to_string(b.size()) + " labels");
}

void check_labels(std::span<const int> v, int m) {
  for (int x : v)
    if (x < 0 || x >= m) throw ValidationError("label " + std::to_string(x) + " outside [0," + std::to_string(m) + ")");
}

}  // namespace

Confusion confusion_matrix(std::span<const int> predictions, std::span<const int> labels, int m) {
  check_lengths(predictions, labels);
  if (m < 1) throw ValidationError("class count must be >= 1");
  check_labels(predictions, m);
  check_labels(labels, m);
  Confusion c(static_cast<std::size_t>(m), std::vector<std::uint64_t>(static_cast<std::size_t>(m), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) ++c[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  return c;
}

double f_score(std::span<const int> predictions, std::span<const int> labels, int m, Averaging averaging) {
  const Confusion c = confusion_matrix(predictions, labels, m);
  if (labels.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(m);
  if (averaging == Averaging::micro) {
    std::uint64_t hit = 0;
    for (std::size_t i = 0; i < k; ++i) hit += c[i][i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
  }
  double sum = 0.0;
  for (std::size_t cls = 0; cls < k; ++cls) {
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += c[j][cls];
      actual += c[cls][j];
    }
    if (predicted + actual > 0) sum += 2.0 * static_cast<double>(c[cls][cls]) / static_cast<double>(predicted + actual);
  }
  return sum / static_cast<double>(m);
}

double cohen_kappa(std::span<const int> predictions, std::span<const int> labels, int m) {
  const Confusion c = confusion_matrix(predictions, labels, m);
  if (labels.empty()) return 0.0;
  const double total = static_cast<double>(labels.size());
  const auto k = static_cast<std::size_t>(m);
  double agree = 0.0, chance = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    agree += static_cast<double>(c[i][i]);
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += static_cast<double>(c[i][j]);
      col += static_cast<double>(c[j][i]);
    }
    chance += (row / total) * (col / total);
  }
  const double p_o = agree / total;
  if (chance >= 1.0) return p_o >= 1.0 ? 1.0 : 0.0;
  return (p_o - chance) / (1.0 - chance);
}

double mae(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions, labels);
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += std::abs(predictions[i] - labels[i]);
  return sum / static_cast<double>(labels.size());
}

double mae(std::span<const double> predictions, std::span<const double> labels) {
  check_lengths(predictions, labels);
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += std::abs(predictions[i] - labels[i]);
  return sum / static_cast<double>(labels.size());
}

ClassificationReport classification_report(std::span<const int> predictions, std::span<const int> labels, int m) {
  ClassificationReport r;
  r.m = m;
  r.samples = labels.size();
  r.confusion = confusion_matrix(predictions, labels, m);
  r.micro_f1 = f_score(predictions, labels, m, Averaging::micro);
  r.macro_f1 = f_score(predictions, labels, m, Averaging::macro);
  r.kappa = cohen_kappa(predictions, labels, m);
  r.mae_intervals = mae(predictions, labels);
  return r;
}

RegressionReport regression_report(std::span<const double> predictions, std::span<const double> labels,
                                   double constant_value) {
  RegressionReport r;
  r.samples = labels.size();
  r.mae = mae(predictions, labels);
  r.constant_value = constant_value;
  std::vector<double> constant(labels.size(), constant_value);
  r.constant_mae = mae(constant, labels);
  return r;
}

nlohmann::json to_json(const ClassificationReport& r) {
  return {{"m", r.m},
          {"samples", r.samples},
          {"micro_f1", r.micro_f1},
          {"macro_f1", r.macro_f1},
          {"kappa", r.kappa},
          {"mae_intervals", r.mae_intervals},
          {"confusion", r.confusion}};
}

ClassificationReport classification_report_from_json(const nlohmann::json& j) {
  try {
    ClassificationReport r;
    r.m = j.at("m").get<int>();
    r.samples = j.at("samples").get<std::uint64_t>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.kappa = j.at("kappa").get<double>();
    r.mae_intervals = j.at("mae_intervals").get<double>();
    r.confusion = j.at("confusion").get<Confusion>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("classification report: ") + e.what());
  }
}

nlohmann::json to_json(const RegressionReport& r) {
  return {{"samples", r.samples}, {"mae", r.mae}, {"constant_mae", r.constant_mae}, {"constant_value", r.constant_value}};
}

RegressionReport regression_report_from_json(const nlohmann::json& j) {
  try {
    RegressionReport r;
    r.samples = j.at("samples").get<std::uint64_t>();
    r.mae = j.at("mae").get<double>();
    r.constant_mae = j.at("constant_mae").get<double>();
    r.constant_value = j.at("constant_value").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("regression report: ") + e.what());
  }
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"label", row.label}, {"n", row.n}, {"mode", to_string(row.mode)}};
    if (row.mode == TaskMode::classification)
      j["classification"] = to_json(row.classification);
    else
      j["regression"] = to_json(row.regression);
    rows.push_back(std::move(j));
  }
  return {{"format", "cpmetric-report"}, {"version", 1}, {"rows", rows}};
}

EvaluationReport evaluation_report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    for (const auto& row : j.at("rows")) {
      ReportRow out;
      out.label = row.at("label").get<std::string>();
      out.n = row.at("n").get<int>();
      out.mode = task_mode_from_string(row.at("mode").get<std::string>());
      if (out.mode == TaskMode::classification)
        out.classification = classification_report_from_json(row.at("classification"));
      else
        out.regression = regression_report_from_json(row.at("regression"));
      r.rows.push_back(std::move(out));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what());
  }
  return r;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string render(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) out << "  ";
      if (c == 0)
        out << std::left << std::setw(static_cast<int>(width[c])) << cells[r][c];
      else
        out << std::right << std::setw(static_cast<int>(width[c])) << cells[r][c];
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace

std::string to_table(const EvaluationReport& r) {
  std::vector<std::vector<std::string>> cells{{"model", "n", "mode", "samples", "F-micro", "F-macro", "kappa", "MAE"}};
  for (const auto& row : r.rows) {
    if (row.mode == TaskMode::classification) {
      const auto& c = row.classification;
      cells.push_back({row.label, std::to_string(row.n), "class", std::to_string(c.samples), fixed(c.micro_f1, 4),
                       fixed(c.macro_f1, 4), fixed(c.kappa, 4), fixed(c.mae_intervals, 4)});
    } else {
      const auto& g = row.regression;
      cells.push_back({row.label, std::to_string(row.n), "regr", std::to_string(g.samples), "-", "-", "-",
                       fixed(g.mae, 4)});
    }
  }
  return render(cells);
}

std::string to_string(BenchMethod m) { return m == BenchMethod::exact_ktd ? "exact-ktd" : "model-inference"; }

const TimingRow* TimingReport::find(BenchMethod method, int n) const {
  for (const auto& r : rows)
    if (r.method == method && r.n == n) return &r;
  return nullptr;
}

namespace {

struct Triple {
  CPNet ref, a, b;
};

Closer model_compare(const Model& model, const Triple& t) {
  const NetEncoding ref = encode_net(t.ref);
  const NetEncoding a = encode_net(t.a);
  const NetEncoding b = encode_net(t.b);
  return compare_distances(predict(model, ref, a).distance, predict(model, ref, b).distance);
}

}  // namespace

TimingReport benchmark_runtime(const BenchConfig& cfg, const ModelLookup& models) {
  if (cfg.trials < 1) throw ValidationError("trials must be >= 1");
  if (cfg.warmup < 0) throw ValidationError("warmup must be >= 0");
  const bool exact = std::find(cfg.methods.begin(), cfg.methods.end(), BenchMethod::exact_ktd) != cfg.methods.end();
  const bool learned =
      std::find(cfg.methods.begin(), cfg.methods.end(), BenchMethod::model_inference) != cfg.methods.end();

  TimingReport report;
  using clock = std::chrono::steady_clock;
  for (int n : cfg.n_values) {
    const Model* model = nullptr;
    if (learned) {
      model = models ? models(n) : nullptr;
      if (!model) throw ValidationError("no model available for n=" + std::to_string(n));
      if (model->spec().n != n) throw DimensionError("model is for n=" + std::to_string(model->spec().n));
    }
    GenConfig gen;
    gen.n = n;
    Rng structure(cfg.seed + static_cast<std::uint64_t>(n), "bench-structure");
    Rng tables(cfg.seed + static_cast<std::uint64_t>(n), "bench-tables");
    const int total = cfg.warmup + cfg.trials;
    std::vector<Triple> triples;
    triples.reserve(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
      CPNet ref = random_cpnet(gen, structure, tables);
      CPNet a = random_cpnet(gen, structure, tables);
      CPNet b = random_cpnet(gen, structure, tables);
      triples.push_back({std::move(ref), std::move(a), std::move(b)});
    }

    std::vector<Closer> exact_answer, model_answer;
    auto run = [&](BenchMethod method, std::vector<Closer>& answers) {
      std::vector<double> ms;
      ms.reserve(static_cast<std::size_t>(cfg.trials));
      for (int i = 0; i < total; ++i) {
        const Triple& t = triples[static_cast<std::size_t>(i)];
        const auto start = clock::now();
        const Closer c = method == BenchMethod::exact_ktd ? qualitative_compare(t.ref, t.a, t.b, cfg.p)
                                                          : model_compare(*model, t);
        const auto stop = clock::now();
        if (i < cfg.warmup) continue;
        answers.push_back(c);
        ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
      }
      TimingRow row;
      row.method = method;
      row.n = n;
      row.trials = cfg.trials;
      double sum = 0.0;
      for (double v : ms) sum += v;
      row.mean_ms = sum / static_cast<double>(ms.size());
      double sq = 0.0;
      for (double v : ms) sq += (v - row.mean_ms) * (v - row.mean_ms);
      row.std_ms = ms.size() > 1 ? std::sqrt(sq / static_cast<double>(ms.size() - 1)) : 0.0;
      report.rows.push_back(row);
    };
    if (exact) run(BenchMethod::exact_ktd, exact_answer);
    if (learned) run(BenchMethod::model_inference, model_answer);
    if (exact && learned) {
      std::size_t same = 0;
      for (std::size_t i = 0; i < exact_answer.size(); ++i) same += exact_answer[i] == model_answer[i] ? 1 : 0;
      report.agreement.emplace_back(n, static_cast<double>(same) / static_cast<double>(exact_answer.size()));
    }
  }
  return report;
}

nlohmann::json to_json(const TimingReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"method", to_string(row.method)},
                    {"n", row.n},
                    {"trials", row.trials},
                    {"mean_ms", row.mean_ms},
                    {"std_ms", row.std_ms}});
  nlohmann::json agreement = nlohmann::json::array();
  for (const auto& [n, rate] : r.agreement) agreement.push_back({{"n", n}, {"agreement", rate}});
  return {{"format", "cpmetric-timing"}, {"version", 1}, {"rows", rows}, {"agreement", agreement}};
}

std::string to_table(const TimingReport& r) {
  std::vector<std::vector<std::string>> cells{{"method", "n", "trials", "mean ms", "std ms"}};
  for (const auto& row : r.rows)
    cells.push_back({to_string(row.method), std::to_string(row.n), std::to_string(row.trials), fixed(row.mean_ms, 4),
                     fixed(row.std_ms, 4)});
  std::string out = render(cells);
  for (const auto& [n, rate] : r.agreement) out += "agreement n=" + std::to_string(n) + ": " + fixed(rate, 4) + "\n";
  return out;
}

}  // namespace cpmetric
