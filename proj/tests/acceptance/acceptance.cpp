// Acceptance checks. Each selected criterion prints one line:
//   criterion <k>: PASS|FAIL <details>
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>

#include "cpmetric/autoencoder.hpp"
#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/datagen.hpp"
#include "cpmetric/eval.hpp"
#include "cpmetric/order_metric.hpp"
#include "cpmetric/pipeline.hpp"
#include "../support/nets.hpp"
#include "../support/oracle.hpp"

using namespace cpmetric;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t) {
  return std::chrono::duration<double>(clock_type::now() - t).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// Parent masks and preference bits packed into one word (n <= 4).
std::uint64_t pack(const CPNet& net) {
  std::uint64_t key = 0;
  for (int v = 0; v < net.size(); ++v) {
    std::uint64_t mask = 0, bits = 0;
    for (int p : net.parents(v)) mask |= 1ULL << p;
    const auto& pref = net.table(v).preferred;
    for (std::size_t r = 0; r < pref.size(); ++r) bits |= static_cast<std::uint64_t>(pref[r]) << r;
    key |= (mask | bits << 4) << (12 * v);
  }
  return key;
}

double ols_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  const double mx = (n - 1) / 2.0;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ---- 1

Verdict enumeration_counts() {
  const auto start = clock_type::now();
  std::unordered_set<std::uint64_t> n3, n4;
  const auto c3 = enumerate_cpnets(3, [&](const CPNet& net) { n3.insert(pack(net)); });
  n4.reserve(500000);
  const auto c4 = enumerate_cpnets(4, [&](const CPNet& net) { n4.insert(pack(net)); });
  const double secs = seconds_since(start);
  const bool ok = c3 == 488 && n3.size() == 488 && c4 == 481776 && n4.size() == 481776 && secs < 300;
  return {ok, "n=3 " + std::to_string(c3) + " (" + std::to_string(n3.size()) + " distinct), n=4 " +
                  std::to_string(c4) + " (" + std::to_string(n4.size()) + " distinct) in " + fmt(secs, 3) + " s"};
}

// ---- 2

Verdict metric_axioms() {
  const auto start = clock_type::now();
  int failures = 0;
  double worst_slack = -1.0;
  for (int n = 3; n <= 5; ++n) {
    const auto nets = testnets::random_nets(n, 600, 100 + static_cast<std::uint64_t>(n));
    for (int t = 0; t < 200; ++t) {
      const CPNet& a = nets[3 * t];
      const CPNet& b = nets[3 * t + 1];
      const CPNet& c = nets[3 * t + 2];
      const auto aa = ktd(a, a);
      const auto ab = ktd(a, b);
      const auto ba = ktd(b, a);
      const auto bc = ktd(b, c);
      const auto ac = ktd(a, c);
      if (aa.raw != 0.0 || aa.normalized != 0.0) ++failures;
      if (ab.raw != ba.raw || ab.normalized != ba.normalized) ++failures;
      const double slack = ac.normalized - (ab.normalized + bc.normalized);
      worst_slack = std::max(worst_slack, slack);
      if (slack > 1e-9) ++failures;
      for (double v : {ab.normalized, bc.normalized, ac.normalized})
        if (v < 0.0 || v > 1.0) ++failures;
    }
  }
  const double secs = seconds_since(start);
  return {failures == 0 && secs < 120, std::to_string(failures) + " violations over 600 triples, max triangle excess " +
                                           fmt(worst_slack) + ", " + fmt(secs, 3) + " s"};
}

// ---- 3

Verdict oracle_equivalence() {
  double worst = 0.0;
  for (int n = 3; n <= 4; ++n) {
    const auto nets = testnets::random_nets(n, 100, 700 + static_cast<std::uint64_t>(n));
    for (int i = 0; i < 50; ++i) {
      const auto got = ktd(nets[2 * i], nets[2 * i + 1]);
      const auto want = oracle::ktd(nets[2 * i], nets[2 * i + 1], PenaltyParam::kDefault);
      worst = std::max({worst, std::abs(got.raw - want.raw), std::abs(got.normalized - want.normalized)});
    }
  }
  return {worst <= 1e-12, "100 pairs, max abs difference " + fmt(worst)};
}

// ---- 4

Verdict example_net_semantics() {
  const CPNet net = testnets::example();
  const Outcome best = optimal_outcome(net);
  const auto flips = worsening_flips(net, best);
  const std::set<Outcome> got(flips.begin(), flips.end());
  const std::set<Outcome> want{testnets::outcome("1000"), testnets::outcome("0100"), testnets::outcome("0010"),
                               testnets::outcome("0001")};
  const bool opt = best == testnets::outcome("0000");
  const bool succ = flips.size() == 4 && got == want;
  const bool dom = dominates(net, best, testnets::outcome("1111"));
  return {opt && succ && dom, "optimal " + format_outcome(net, best) + ", " + std::to_string(flips.size()) +
                                  " successors" + (succ ? " (match)" : " (mismatch)") +
                                  ", dominates(abcd, a'b'c'd') = " + (dom ? "true" : "false")};
}

// ---- 5

void jitter_biases(nn::Mlp& m, Rng& rng) {
  for (auto& layer : m.layers())
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.uniform(-0.2, 0.2);
}

Verdict gradient_correctness() {
  const auto nets = testnets::random_nets(3, 8, 55);
  std::vector<NetEncoding> enc;
  for (const auto& n : nets) enc.push_back(encode_net(n));
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {1, 0}};
  const PairBatch batch = make_batch(enc, pairs);
  Targets t;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    t.bins.push_back(static_cast<int>((3 * i) % 10));
    t.values.push_back(0.05 + 0.2 * static_cast<double>(i));
  }

  std::map<std::string, double> errors;
  for (TaskMode mode : {TaskMode::classification, TaskMode::regression}) {
    ModelSpec spec;
    spec.n = 3;
    spec.mode = mode;
    spec.seed = 8;
    Model model(spec);
    Rng rng(4);
    jitter_biases(model.encoder_laplacian(), rng);
    jitter_biases(model.encoder_cpt(), rng);
    jitter_biases(model.head(), rng);
    ModelGrad g;
    loss_and_gradient(model, batch, t, &g);
    errors[to_string(mode)] = oracle::max_gradient_error(
        model.parameter_blocks(), g.blocks(), [&] { return loss_and_gradient(model, batch, t, nullptr); });
  }
  Eigen::MatrixXd lap(static_cast<Eigen::Index>(laplacian_size(3)), 6), cpt(static_cast<Eigen::Index>(cpt_size(3)), 6);
  for (int i = 0; i < 6; ++i) {
    lap.col(i) = Eigen::Map<const Eigen::VectorXd>(enc[i].laplacian.data(), lap.rows());
    cpt.col(i) = Eigen::Map<const Eigen::VectorXd>(enc[i].cpt.data(), cpt.rows());
  }
  for (auto kind : {AutoencoderKind::separate, AutoencoderKind::siamese}) {
    ModelSpec spec;
    spec.n = 3;
    Autoencoder ae = make_autoencoder(kind, spec, 12);
    Rng rng(5);
    for (nn::Mlp* m : {&ae.encoder_laplacian, &ae.encoder_cpt, &ae.fusion, &ae.decoder_laplacian, &ae.decoder_cpt})
      jitter_biases(*m, rng);
    AutoencoderGrad g;
    reconstruction_loss(ae, lap, cpt, &g);
    errors[to_string(kind) + " autoencoder"] = oracle::max_gradient_error(
        ae.parameter_blocks(), g.blocks(), [&] { return reconstruction_loss(ae, lap, cpt).total(); });
  }
  bool ok = true;
  std::string detail;
  for (const auto& [name, err] : errors) {
    ok = ok && err <= 1e-4;
    detail += (detail.empty() ? "" : ", ") + name + " " + fmt(err, 3);
  }
  return {ok, "max relative error: " + detail};
}

// ---- 6

Verdict autoencoder_trend() {
  GenConfig gen;
  gen.n = 4;
  gen.count = 5000;
  gen.seed = 1;
  const auto library = generate_library(gen);
  const auto nets = encode_library(library);
  ModelSpec spec;
  spec.n = 4;
  spec.seed = 1;
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.seed = 1;

  const auto start = clock_type::now();
  const PretrainResult r = pretrain_autoencoder(AutoencoderKind::siamese, nets, spec, cfg);
  int first_epoch = 0;
  double best_acc = 0.0;
  for (const auto& e : r.history) {
    if (e.epoch <= 10) best_acc = std::max(best_acc, e.validation.cpt_accuracy);
    if (first_epoch == 0 && e.validation.cpt_accuracy >= 0.95) first_epoch = e.epoch;
  }
  std::vector<double> train_lap, val_lap;
  for (std::size_t i = r.history.size() / 2; i < r.history.size(); ++i) {
    train_lap.push_back(r.history[i].train.laplacian);
    val_lap.push_back(r.history[i].validation.laplacian);
  }
  const double s_train = ols_slope(train_lap);
  const double s_val = ols_slope(val_lap);
  const bool acc_ok = first_epoch > 0 && first_epoch <= 10;
  const bool trend_ok = s_train <= 0.0 && s_val <= 0.0;
  return {acc_ok && trend_ok,
          "siamese on 5000 n=4 nets: held-out CPT accuracy >= 0.95 at epoch " +
              (first_epoch ? std::to_string(first_epoch) : std::string("never")) + " (best in 10: " + fmt(best_acc) +
              "); Laplacian loss slope over epochs 21-40: train " + fmt(s_train, 3) + ", held-out " + fmt(s_val, 3) +
              " (final " + fmt(r.history.back().train.laplacian, 3) + "); " + fmt(seconds_since(start), 3) + " s"};
}

// ---- 7 and 9

struct SeedRun {
  double micro_f1 = 0.0;
  double mae = 0.0;
};

SeedRun classification_run(const fs::path& dataset, const fs::path& out, std::uint64_t seed, AutoencoderChoice ae) {
  TrainStageOptions tr;
  tr.dataset_dir = dataset;
  tr.out_dir = out;
  tr.autoencoder = ae;
  tr.train.seed = seed;
  run_train(tr);
  const auto report = evaluate_runs({out});
  return {report.rows[0].classification.micro_f1, report.rows[0].classification.mae_intervals};
}

fs::path n3_dataset(const fs::path& root, std::uint64_t seed) {
  DatasetStageOptions ds;
  ds.gen.n = 3;
  ds.gen.count = 488;
  ds.gen.seed = seed;
  ds.dataset.train_size = 400;
  ds.dataset.ordered = false;
  ds.write_records = false;
  ds.out_dir = root / ("data" + std::to_string(seed));
  run_dataset(ds);
  return ds.out_dir;
}

std::vector<Verdict> learning_and_transfer(bool want7, bool want9) {
  TempDir tmp("cpmetric_acceptance_7_9");
  constexpr int kSeeds = 10;
  std::vector<SeedRun> siamese, none, separate;
  std::vector<fs::path> data;
  double siamese_secs = 0.0;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    data.push_back(n3_dataset(tmp.path, seed));
    const auto start = clock_type::now();
    siamese.push_back(classification_run(data.back(), tmp.path / ("siamese" + std::to_string(s)), seed,
                                         AutoencoderChoice::siamese));
    siamese_secs += seconds_since(start);
    std::cout << "  seed " << s << " siamese micro-F1 " << fmt(siamese.back().micro_f1) << " MAE "
              << fmt(siamese.back().mae) << std::endl;
  }

  std::vector<Verdict> out;
  if (want7) {
    int passing = 0;
    std::string list;
    for (const auto& r : siamese) {
      if (r.micro_f1 >= 0.45 && r.mae <= 0.8) ++passing;
      list += (list.empty() ? "" : " ") + fmt(r.micro_f1, 3) + "/" + fmt(r.mae, 3);
    }
    out.push_back({passing >= 8 && siamese_secs < 900,
                   std::to_string(passing) + "/10 seeds with micro-F1 >= 0.45 and interval MAE <= 0.8 (F1/MAE: " +
                       list + "); " + fmt(siamese_secs, 4) + " s"});
  }
  if (want9) {
    for (int s = 1; s <= kSeeds; ++s) {
      none.push_back(classification_run(data[s - 1], tmp.path / ("none" + std::to_string(s)),
                                        static_cast<std::uint64_t>(s), AutoencoderChoice::none));
      std::cout << "  seed " << s << " no-autoencoder micro-F1 " << fmt(none.back().micro_f1) << std::endl;
    }
    auto wins = [&](const std::vector<SeedRun>& v) {
      int w = 0;
      for (int s = 0; s < kSeeds; ++s)
        if (v[s].micro_f1 >= none[s].micro_f1) ++w;
      return w;
    };
    const int siamese_wins = wins(siamese);
    std::string detail = "siamese >= none in " + std::to_string(siamese_wins) + "/10 seeds";
    bool ok = siamese_wins >= 6;
    if (!ok) {
      for (int s = 1; s <= kSeeds; ++s)
        separate.push_back(classification_run(data[s - 1], tmp.path / ("separate" + std::to_string(s)),
                                              static_cast<std::uint64_t>(s), AutoencoderChoice::separate));
      const int separate_wins = wins(separate);
      detail += ", separate >= none in " + std::to_string(separate_wins) + "/10 seeds";
      ok = separate_wins >= 6;
    }
    out.push_back({ok, detail});
  }
  return out;
}

// ---- 8

Verdict regression_beats_constant() {
  TempDir tmp("cpmetric_acceptance_8");
  int passing = 0;
  std::string list;
  const auto start = clock_type::now();
  for (int s = 1; s <= 10; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    DatasetStageOptions ds;
    ds.gen.n = 4;
    ds.gen.count = 200;
    ds.gen.seed = seed;
    ds.dataset.train_size = 101;
    ds.dataset.ordered = false;
    ds.write_records = false;
    ds.out_dir = tmp.path / ("data" + std::to_string(s));
    run_dataset(ds);
    TrainStageOptions tr;
    tr.dataset_dir = ds.out_dir;
    tr.out_dir = tmp.path / ("train" + std::to_string(s));
    tr.mode = TaskMode::regression;
    tr.train.seed = seed;
    tr.train.max_train_pairs = 5000;
    run_train(tr);
    const auto row = evaluate_runs({tr.out_dir}).rows[0].regression;
    if (row.mae <= 0.10 && row.mae < row.constant_mae) ++passing;
    list += (list.empty() ? "" : " ") + fmt(row.mae, 3) + "/" + fmt(row.constant_mae, 3);
  }
  return {passing >= 8, std::to_string(passing) + "/10 seeds with MAE <= 0.10 and below the constant-mean MAE " +
                            "(model/constant: " + list + "); " + fmt(seconds_since(start), 4) + " s"};
}

// ---- 10

Verdict runtime_trend() {
  BenchConfig cfg;
  cfg.seed = 1;
  std::map<int, std::unique_ptr<Model>> models;
  for (int n : cfg.n_values) {
    ModelSpec spec;
    spec.n = n;
    spec.seed = 1;
    models[n] = std::make_unique<Model>(spec);
  }
  const TimingReport rep = benchmark_runtime(cfg, [&](int n) { return models.at(n).get(); });
  bool increasing = true;
  std::string exact, model;
  for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
    const int n = cfg.n_values[i];
    const double e = rep.find(BenchMethod::exact_ktd, n)->mean_ms;
    if (i > 0 && !(e > rep.find(BenchMethod::exact_ktd, cfg.n_values[i - 1])->mean_ms)) increasing = false;
    exact += (exact.empty() ? "" : " ") + fmt(e, 3);
    model += (model.empty() ? "" : " ") + fmt(rep.find(BenchMethod::model_inference, n)->mean_ms, 3);
  }
  const double ratio =
      rep.find(BenchMethod::model_inference, 7)->mean_ms / rep.find(BenchMethod::model_inference, 3)->mean_ms;
  return {increasing && ratio <= 5.0, "exact ms (n=3..7): " + exact + (increasing ? " increasing" : " NOT increasing") +
                                          "; model ms: " + model + ", n=7/n=3 ratio " + fmt(ratio, 3)};
}

// ---- 11

Verdict distribution_shape() {
  bool ok = true;
  std::string detail;
  for (int n : {4, 5}) {
    GenConfig gen;
    gen.n = n;
    gen.count = 300;
    gen.seed = 1;
    DatasetOptions opts;
    opts.ordered = false;
    const Dataset ds = build_dataset(gen, opts);
    const auto h = distance_histogram(ds, 20);
    const auto mode = static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
    ok = ok && mode > 0 && mode < 19;
    detail += (detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + " mode bin " +
              std::to_string(mode) + " of " + std::to_string(ds.pairs.size()) + " pairs";
  }
  return {ok, detail};
}

// ---- 12

nlohmann::json without_timing(nlohmann::json manifest) {
  manifest.erase("wall_seconds");
  return manifest;
}

void run_pipeline(const fs::path& root, const DatasetStageOptions& ds, const TrainStageOptions& tr_template) {
  DatasetStageOptions d = ds;
  d.out_dir = root / "data";
  run_dataset(d);
  TrainStageOptions tr = tr_template;
  tr.dataset_dir = d.out_dir;
  tr.out_dir = root / "train";
  run_train(tr);
  run_eval(EvalStageOptions{{tr.out_dir}, root / "eval"});
}

Verdict determinism() {
  TempDir tmp("cpmetric_acceptance_12");
  DatasetStageOptions ds;
  ds.gen.n = 3;
  ds.gen.count = 488;
  ds.gen.seed = 7;
  ds.dataset.train_size = 400;
  ds.dataset.ordered = false;
  TrainStageOptions tr;
  tr.train.epochs = 3;
  tr.train.seed = 7;
  tr.autoencoder = AutoencoderChoice::siamese;
  tr.autoencoder_epochs = 5;
  run_pipeline(tmp.path / "first", ds, tr);

  // second run configured only from the first run's manifests
  const RunManifest dm = read_manifest(tmp.path / "first" / "data" / "manifest.json");
  DatasetStageOptions ds2;
  ds2.gen.n = dm.config.at("n").get<int>();
  ds2.gen.count = dm.config.at("count").get<std::size_t>();
  ds2.gen.max_indegree = dm.config.at("max_indegree").get<int>();
  ds2.gen.seed = dm.seed;
  ds2.dataset.folds = dm.config.at("folds").get<int>();
  ds2.dataset.train_size = dm.config.at("train_size").get<std::size_t>();
  ds2.dataset.p = PenaltyParam(dm.config.at("p").get<double>());
  ds2.dataset.m = dm.config.at("m").get<int>();
  ds2.dataset.ordered = dm.config.at("ordered").get<bool>();
  const RunManifest tm = read_manifest(tmp.path / "first" / "train" / "manifest.json");
  TrainStageOptions tr2;
  tr2.mode = task_mode_from_string(tm.config.at("mode").get<std::string>());
  tr2.train.epochs = tm.config.at("epochs").get<int>();
  tr2.train.batch_size = tm.config.at("batch_size").get<int>();
  tr2.train.adam.learning_rate = tm.config.at("learning_rate").get<double>();
  tr2.train.seed = tm.config.at("seed").get<std::uint64_t>();
  tr2.autoencoder = autoencoder_choice_from_string(tm.config.at("autoencoder").get<std::string>());
  tr2.autoencoder_epochs = tm.config.at("autoencoder_epochs").get<int>();
  tr2.autoencoder_batch = tm.config.at("autoencoder_batch").get<int>();
  run_pipeline(tmp.path / "second", ds2, tr2);

  std::vector<std::string> differing;
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path / "first")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), tmp.path / "first");
    const fs::path other = tmp.path / "second" / rel;
    ++compared;
    if (!fs::exists(other)) {
      differing.push_back(rel.string() + " (missing)");
      continue;
    }
    if (rel.filename() == "manifest.json") {
      // wall-clock time and the run's own directory are the only expected differences
      auto a = without_timing(nlohmann::json::parse(read_text_file(entry.path())));
      auto b = without_timing(nlohmann::json::parse(read_text_file(other)));
      for (auto* j : {&a, &b}) {
        j->erase("inputs");
        if (j->contains("config")) (*j)["config"].erase("dataset");
      }
      if (a != b) differing.push_back(rel.string());
    } else if (read_text_file(entry.path()) != read_text_file(other)) {
      differing.push_back(rel.string());
    }
  }
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number (repeatable; default all)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int k = 1; k <= 12; ++k) selected.push_back(k);
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  const std::map<int, std::function<Verdict()>> single{
      {1, enumeration_counts}, {2, metric_axioms},  {3, oracle_equivalence}, {4, example_net_semantics},
      {5, gradient_correctness}, {6, autoencoder_trend}, {8, regression_beats_constant}, {10, runtime_trend},
      {11, distribution_shape}, {12, determinism}};

  bool all = true;
  auto report = [&](int k, const Verdict& o) {
    all = all && o.pass;
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
  };
  const bool want7 = std::count(selected.begin(), selected.end(), 7) > 0;
  const bool want9 = std::count(selected.begin(), selected.end(), 9) > 0;
  for (int k : selected) {
    if (k == 7 || k == 9) continue;
    try {
      report(k, single.at(k)());
    } catch (const std::exception& e) {
      report(k, {false, std::string("threw: ") + e.what()});
    }
  }
  if (want7 || want9) {
    try {
      const auto results = learning_and_transfer(want7, want9);
      std::size_t i = 0;
      if (want7) report(7, results[i++]);
      if (want9) report(9, results[i]);
    } catch (const std::exception& e) {
      if (want7) report(7, {false, std::string("threw: ") + e.what()});
      if (want9) report(9, {false, std::string("threw: ") + e.what()});
    }
  }
  return all ? 0 : 1;
}
