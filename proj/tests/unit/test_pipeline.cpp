#include <doctest.h>

#include <filesystem>

#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/error.hpp"
#include "cpmetric/pipeline.hpp"

using namespace cpmetric;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("manifest round trip") {
  TempDir tmp("cpmetric_manifest_test");
  RunManifest m;
  m.command = "dataset";
  m.seed = 9;
  m.config = {{"n", 3}};
  m.inputs["library"] = "lib.json";
  m.outputs["pairs"] = "pairs.bin";
  m.wall_seconds = 1.5;
  write_manifest(tmp.path / "manifest.json", m);
  const RunManifest r = read_manifest(tmp.path / "manifest.json");
  CHECK(r.command == "dataset");
  CHECK(r.seed == 9);
  CHECK(r.config == m.config);
  CHECK(r.inputs == m.inputs);
  CHECK(r.outputs == m.outputs);
  CHECK_THROWS_AS(read_manifest(tmp.path / "missing.json"), ValidationError);
}

TEST_CASE("small pipeline") {
  TempDir tmp("cpmetric_pipeline_test");
  DatasetStageOptions ds;
  ds.gen.n = 3;
  ds.gen.count = 30;
  ds.gen.seed = 5;
  ds.dataset.folds = 2;
  ds.out_dir = tmp.path / "data";
  run_dataset(ds);
  for (const char* f : {"library.json", "folds.json", "pairs.bin", "records.bin", "manifest.json"})
    CHECK(fs::exists(ds.out_dir / f));

  const Dataset loaded = load_dataset(ds.out_dir);
  const Dataset built = build_dataset(ds.gen, ds.dataset);
  CHECK(loaded.library == built.library);
  CHECK(loaded.pairs == built.pairs);
  CHECK(loaded.folds == built.folds);
  CHECK(read_record_header(ds.out_dir / "records.bin").records == built.pairs.size());

  TrainStageOptions tr;
  tr.dataset_dir = ds.out_dir;
  tr.out_dir = tmp.path / "train";
  tr.arch = Architecture{{8}, 4, {6}};
  tr.train.epochs = 2;
  tr.autoencoder = AutoencoderChoice::siamese;
  tr.autoencoder_epochs = 2;
  run_train(tr);
  CHECK(fs::exists(tr.out_dir / "fold0" / "model.ckpt"));
  CHECK(fs::exists(tr.out_dir / "fold1" / "autoencoder.csv"));

  EvalStageOptions ev;
  ev.train_dirs = {tr.out_dir};
  ev.out_dir = tmp.path / "eval";
  run_eval(ev);
  const auto report = evaluation_report_from_json(nlohmann::json::parse(read_text_file(ev.out_dir / "report.json")));
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].label == "siamese");
  std::uint64_t test_pairs = 0;
  for (const auto& f : built.folds) test_pairs += f.test_pairs.size();
  CHECK(report.rows[0].classification.samples == test_pairs);

  TrainStageOptions bad = tr;
  bad.out_dir = tmp.path / "train2";
  bad.dataset_dir = tmp.path / "nowhere";
  CHECK_THROWS_AS(run_train(bad), ValidationError);
  bad.dataset_dir = ds.out_dir;
  bad.fold = 7;
  CHECK_THROWS_AS(run_train(bad), ValidationError);
}
