#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "cpmetric/error.hpp"
#include "cpmetric/eval.hpp"
#include "cpmetric/rng.hpp"

using namespace cpmetric;

TEST_CASE("f-score examples") {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<int> preds{0, 1, 1, 1};
  CHECK(f_score(preds, labels, 2, Averaging::micro) == doctest::Approx(0.75));
  // class 0: P=1 R=0.5 F=2/3; class 1: P=2/3 R=1 F=0.8
  CHECK(f_score(preds, labels, 2, Averaging::macro) == doctest::Approx((2.0 / 3.0 + 0.8) / 2));
  CHECK(f_score(labels, labels, 2, Averaging::macro) == doctest::Approx(1.0));
  // empty classes count as zero
  CHECK(f_score(labels, labels, 4, Averaging::macro) == doctest::Approx(0.5));
}

TEST_CASE("confusion and micro-F1 agree") {
  Rng rng(12);
  std::vector<int> p, l;
  for (int i = 0; i < 500; ++i) {
    p.push_back(static_cast<int>(rng.below(5)));
    l.push_back(static_cast<int>(rng.below(5)));
  }
  const Confusion c = confusion_matrix(p, l, 5);
  std::uint64_t trace = 0, total = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      total += c[i][j];
      if (i == j) trace += c[i][j];
    }
  CHECK(total == 500);
  CHECK(f_score(p, l, 5, Averaging::micro) == doctest::Approx(static_cast<double>(trace) / 500.0));
}

TEST_CASE("cohen kappa") {
  const std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const std::vector<int> preds{0, 0, 0, 1, 1, 0, 0, 1, 1, 1};
  CHECK(cohen_kappa(preds, labels, 2) == doctest::Approx(0.2));
  CHECK(cohen_kappa(labels, labels, 2) == doctest::Approx(1.0));
  const std::vector<int> same(6, 1);
  CHECK(cohen_kappa(same, same, 3) == 1.0);

  Rng rng(3);
  std::vector<int> a, b;
  for (int i = 0; i < 100000; ++i) {
    a.push_back(static_cast<int>(rng.below(10)));
    b.push_back(static_cast<int>(rng.below(10)));
  }
  CHECK(std::abs(cohen_kappa(a, b, 10)) < 0.05);
}

TEST_CASE("distribution-matched random guessing") {
  const std::vector<double> dist{0.05, 0.1, 0.3, 0.35, 0.15, 0.05};
  auto draw = [&](Rng& r) {
    double u = r.uniform(), acc = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k)
      if ((acc += dist[k]) > u) return static_cast<int>(k);
    return static_cast<int>(dist.size() - 1);
  };
  Rng rl(1), rp(2);
  std::vector<int> l, p;
  for (int i = 0; i < 100000; ++i) {
    l.push_back(draw(rl));
    p.push_back(draw(rp));
  }
  double expected = 0.0;
  for (double q : dist) expected += q * q;
  CHECK(std::abs(f_score(p, l, 6, Averaging::micro) - expected) < 0.01);
}

TEST_CASE("mae") {
  CHECK(mae(std::vector<int>{0, 2, 5}, std::vector<int>{1, 2, 2}) == doctest::Approx(4.0 / 3));
  CHECK(mae(std::vector<double>{0.1, 0.5}, std::vector<double>{0.3, 0.5}) == doctest::Approx(0.1));
  CHECK_THROWS(mae(std::vector<int>{0}, std::vector<int>{}));
}

TEST_CASE("report json round trip") {
  EvaluationReport r;
  ReportRow c;
  c.label = "siamese";
  c.n = 3;
  c.classification = classification_report(std::vector<int>{0, 1, 1, 2}, std::vector<int>{0, 1, 2, 2}, 3);
  ReportRow g;
  g.label = "none";
  g.n = 4;
  g.mode = TaskMode::regression;
  g.regression = regression_report(std::vector<double>{0.2, 0.4}, std::vector<double>{0.25, 0.3}, 0.3);
  r.rows = {c, g};
  CHECK(c.classification.samples == 4);
  CHECK(g.regression.mae == doctest::Approx(0.075));
  CHECK(g.regression.constant_mae == doctest::Approx(0.025));
  CHECK(evaluation_report_from_json(to_json(r)) == r);
  const std::string table = to_table(r);
  CHECK(table.find("siamese") != std::string::npos);
  CHECK_THROWS_AS(evaluation_report_from_json(nlohmann::json::parse(R"({"rows":[{"label":1}]})")), ParseError);
}

TEST_CASE("runtime benchmark") {
  BenchConfig cfg;
  cfg.n_values = {3, 4};
  cfg.trials = 20;
  cfg.warmup = 2;
  std::map<int, std::unique_ptr<Model>> models;
  for (int n : cfg.n_values) {
    ModelSpec spec;
    spec.n = n;
    models[n] = std::make_unique<Model>(spec);
  }
  const TimingReport rep = benchmark_runtime(cfg, [&](int n) { return models.count(n) ? models[n].get() : nullptr; });
  for (int n : cfg.n_values)
    for (auto m : cfg.methods) {
      const TimingRow* row = rep.find(m, n);
      REQUIRE(row != nullptr);
      CHECK(row->trials == 20);
      CHECK(row->mean_ms > 0.0);
    }
  CHECK(rep.agreement.size() == 2);
  CHECK_THROWS_AS(benchmark_runtime(cfg, [](int) -> const Model* { return nullptr; }), ValidationError);
}
