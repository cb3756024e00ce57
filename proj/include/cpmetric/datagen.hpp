#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpmetric/cpnet.hpp"
#include "cpmetric/encoders.hpp"
#include "cpmetric/order_metric.hpp"
#include "cpmetric/rng.hpp"

namespace cpmetric {

struct GenConfig {
  int n = 4;
  int max_indegree = -1;  ///< negative means n-1
  std::uint64_t seed = 0;
  std::size_t count = 1000;

  int effective_max_indegree() const { return max_indegree < 0 ? n - 1 : max_indegree; }
  /// Throws ValidationError on an impossible configuration.
  void validate() const;
};

/// Number of distinct nets over n variables, when known (n <= 4).
std::optional<std::uint64_t> cpnet_space_size(int n);

/// One random net. Structure: a random variable permutation where each
/// variable takes a uniform number of parents (up to the in-degree bound)
/// drawn from the variables before it. Tables: uniform rows, redrawn per
/// variable until every edge is a real dependency.
CPNet random_cpnet(const GenConfig& cfg, Rng& structure_rng, Rng& table_rng);
CPNet random_cpnet(const GenConfig& cfg, Rng& rng);

/// `cfg.count` distinct nets. For n <= 3 the whole space is enumerated and a
/// seeded uniform subset is kept; larger n uses random_cpnet with duplicate
/// rejection.
std::vector<CPNet> generate_library(const GenConfig& cfg);

struct LabeledPair {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double y = 0.0;
  int bin = 0;

  bool operator==(const LabeledPair&) const = default;
};

/// Generative-set membership of one fold plus the pairs formed inside each side.
struct Fold {
  std::vector<std::uint32_t> train_nets;
  std::vector<std::uint32_t> test_nets;
  std::vector<std::size_t> train_pairs;  ///< indices into Dataset::pairs
  std::vector<std::size_t> test_pairs;

  bool operator==(const Fold&) const = default;
};

struct DatasetOptions {
  int folds = 1;
  PenaltyParam p;
  int m = 10;
  bool ordered = true;
  /// Nets in each training generative set; defaults to round(0.9 * count).
  std::optional<std::size_t> train_size;
  int workers = 1;
};

struct Dataset {
  GenConfig gen;
  PenaltyParam p;
  int m = 10;
  bool ordered = true;
  std::vector<CPNet> library;
  /// Every labeled pair used by any fold, sorted by (a, b).
  std::vector<LabeledPair> pairs;
  std::vector<Fold> folds;

  int n() const { return gen.n; }
};

using FoldMembership = std::vector<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>>;

/// Per fold, a seeded random `train_size` nets go to the training side and
/// the rest to the test side. Both sides are sorted.
FoldMembership split_library(std::size_t count, std::uint64_t seed, int folds, std::size_t train_size);

Dataset build_dataset(const GenConfig& gen, const DatasetOptions& opts);

/// Rebuilds pairs and labels for a given library and fold membership. Used
/// by build_dataset and when reloading a dataset from disk.
Dataset assemble_dataset(const GenConfig& gen, std::vector<CPNet> library, FoldMembership membership,
                         const DatasetOptions& opts, const std::vector<double>* known_labels = nullptr);

/// Pair counts per interval of [0,1]; sums to pairs.size().
std::vector<std::uint64_t> distance_histogram(const Dataset& ds, int bins);

/// Encodes every library net once.
std::vector<NetEncoding> encode_library(const std::vector<CPNet>& library);

}  // namespace cpmetric
