#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/error.hpp"
#include "cpmetric/order_metric.hpp"
#include "cpmetric/pipeline.hpp"

using namespace cpmetric;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned and exact distances between CP-nets"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // generate
  GenerateOptions gen_opts;
  auto* generate = app.add_subcommand("generate", "Write a library of distinct random CP-nets");
  generate->add_option("--n", gen_opts.gen.n, "Number of variables")->required()->check(CLI::Range(1, 30));
  generate->add_option("--count", gen_opts.gen.count, "Number of nets")->capture_default_str();
  generate->add_option("--seed", gen_opts.gen.seed, "Random seed")->capture_default_str();
  generate->add_option("--max-indegree", gen_opts.gen.max_indegree, "Parent bound (default n-1)");
  generate->add_option("--out", gen_opts.out, "Library file")->required();

  // ktd
  std::string ktd_a, ktd_b;
  double ktd_p = PenaltyParam::kDefault;
  auto* ktd_cmd = app.add_subcommand("ktd", "Exact Kendall tau distance between two CP-net files");
  ktd_cmd->add_option("first", ktd_a, "First net (JSON)")->required();
  ktd_cmd->add_option("second", ktd_b, "Second net (JSON)")->required();
  ktd_cmd->add_option("--p", ktd_p, "Penalty for pairs ordered in only one net")->capture_default_str();

  // dataset
  DatasetStageOptions ds_opts;
  std::string ds_library;
  std::size_t ds_train_size = 0;
  bool ds_unordered = false, ds_no_records = false;
  double ds_p = PenaltyParam::kDefault;
  auto* dataset = app.add_subcommand("dataset", "Label all pairs and write a staged dataset");
  dataset->add_option("--library", ds_library, "Use this library instead of generating one");
  dataset->add_option("--n", ds_opts.gen.n, "Number of variables")->capture_default_str();
  dataset->add_option("--count", ds_opts.gen.count, "Library size")->capture_default_str();
  dataset->add_option("--seed", ds_opts.gen.seed, "Random seed")->capture_default_str();
  dataset->add_option("--max-indegree", ds_opts.gen.max_indegree, "Parent bound (default n-1)");
  dataset->add_option("--folds", ds_opts.dataset.folds, "Number of random splits")->capture_default_str();
  dataset->add_option("--train-size", ds_train_size, "Nets per training side (default 90%)");
  dataset->add_option("--p", ds_p, "KTD penalty parameter")->capture_default_str();
  dataset->add_option("--m", ds_opts.dataset.m, "Number of label intervals")->capture_default_str();
  dataset->add_flag("--unordered", ds_unordered, "One pair per unordered couple instead of both orders");
  dataset->add_flag("--no-records", ds_no_records, "Skip the float32 record file");
  dataset->add_option("--workers", ds_opts.dataset.workers, "Threads for pair labelling")->capture_default_str();
  dataset->add_option("--out", ds_opts.out_dir, "Output directory")->required();

  // train
  TrainStageOptions tr_opts;
  std::string tr_mode = "classification", tr_ae = "none", tr_init;
  int tr_fold = -1;
  auto* train_cmd = app.add_subcommand("train", "Train the distance network on a staged dataset");
  train_cmd->add_option("--dataset", tr_opts.dataset_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", tr_opts.out_dir, "Output directory")->required();
  train_cmd->add_option("--fold", tr_fold, "Train one fold only (default all)");
  train_cmd->add_option("--mode", tr_mode, "classification or regression")->capture_default_str();
  train_cmd->add_option("--autoencoder", tr_ae, "none, separate or siamese")->capture_default_str();
  train_cmd->add_option("--ae-epochs", tr_opts.autoencoder_epochs, "Autoencoder epochs")->capture_default_str();
  train_cmd->add_option("--ae-batch", tr_opts.autoencoder_batch, "Autoencoder batch size")->capture_default_str();
  train_cmd->add_option("--epochs", tr_opts.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", tr_opts.train.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", tr_opts.train.adam.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--seed", tr_opts.train.seed, "Random seed")->capture_default_str();
  train_cmd->add_flag("--freeze-encoders", tr_opts.train.freeze_encoders, "Only update the head");
  train_cmd->add_option("--max-train-pairs", tr_opts.train.max_train_pairs, "Subsample training pairs (0 = all)");
  train_cmd->add_option("--init", tr_init, "Start from this checkpoint");
  train_cmd->add_option("--encoder-hidden", tr_opts.arch.encoder_hidden, "Encoder hidden widths")->delimiter(',');
  train_cmd->add_option("--latent", tr_opts.arch.latent, "Latent width per encoder")->capture_default_str();
  train_cmd->add_option("--head-hidden", tr_opts.arch.head_hidden, "Head hidden widths")->delimiter(',');

  // eval
  EvalStageOptions ev_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained runs on their test folds");
  eval_cmd->add_option("--train", ev_opts.train_dirs, "Training directory (repeatable)")->required();
  eval_cmd->add_option("--out", ev_opts.out_dir, "Output directory")->required();

  // bench
  BenchStageOptions bn_opts;
  std::vector<std::string> bn_methods{"exact-ktd", "model-inference"};
  double bn_p = PenaltyParam::kDefault;
  auto* bench = app.add_subcommand("bench", "Time exact and learned qualitative comparisons");
  bench->add_option("--n", bn_opts.bench.n_values, "Variable counts")->delimiter(',')->capture_default_str();
  bench->add_option("--trials", bn_opts.bench.trials, "Timed triples per n")->capture_default_str();
  bench->add_option("--warmup", bn_opts.bench.warmup, "Untimed triples per n")->capture_default_str();
  bench->add_option("--seed", bn_opts.bench.seed, "Random seed")->capture_default_str();
  bench->add_option("--p", bn_p, "KTD penalty parameter")->capture_default_str();
  bench->add_option("--methods", bn_methods, "exact-ktd and/or model-inference")->delimiter(',');
  bench->add_option("--checkpoint", bn_opts.checkpoints, "Model checkpoint (repeatable)");
  bench->add_flag("--untrained", bn_opts.untrained_fallback, "Use fresh models where no checkpoint covers n");
  bench->add_option("--out", bn_opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate) {
      run_generate(gen_opts);
      std::cout << "wrote " << gen_opts.gen.count << " nets to " << gen_opts.out.string() << "\n";
    } else if (*ktd_cmd) {
      const PenaltyParam p(ktd_p);
      const CPNet a = read_cpnet_file(ktd_a);
      const CPNet b = read_cpnet_file(ktd_b);
      const DistanceValue d = ktd(a, b, p);
      std::cout << "raw " << format_number(d.raw) << "\n";
      std::cout << "normalized " << format_number(d.normalized) << "\n";
    } else if (*dataset) {
      if (!ds_library.empty()) ds_opts.library = ds_library;
      if (ds_train_size > 0) ds_opts.dataset.train_size = ds_train_size;
      ds_opts.dataset.p = PenaltyParam(ds_p);
      ds_opts.dataset.ordered = !ds_unordered;
      ds_opts.write_records = !ds_no_records;
      const RunManifest m = run_dataset(ds_opts);
      std::cout << "wrote " << m.config.at("pairs").get<std::size_t>() << " labelled pairs to "
                << ds_opts.out_dir.string() << "\n";
    } else if (*train_cmd) {
      tr_opts.mode = task_mode_from_string(tr_mode);
      tr_opts.autoencoder = autoencoder_choice_from_string(tr_ae);
      if (tr_fold >= 0) tr_opts.fold = tr_fold;
      if (!tr_init.empty()) tr_opts.init = tr_init;
      run_train(tr_opts);
      std::cout << "wrote checkpoints to " << tr_opts.out_dir.string() << "\n";
    } else if (*eval_cmd) {
      run_eval(ev_opts);
      std::cout << read_text_file(ev_opts.out_dir / "report.txt");
    } else if (*bench) {
      bn_opts.bench.p = PenaltyParam(bn_p);
      bn_opts.bench.methods.clear();
      for (const auto& m : bn_methods) {
        if (m == "exact-ktd")
          bn_opts.bench.methods.push_back(BenchMethod::exact_ktd);
        else if (m == "model-inference")
          bn_opts.bench.methods.push_back(BenchMethod::model_inference);
        else
          throw ValidationError("unknown method '" + m + "'");
      }
      run_bench(bn_opts);
      std::cout << read_text_file(bn_opts.out_dir / "timing.txt");
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return 0;
}
