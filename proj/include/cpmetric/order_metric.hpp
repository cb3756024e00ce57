#pragma once

#include <cstdint>

#include "cpmetric/cpnet.hpp"

namespace cpmetric {

/// Cost of a pair ordered in one order and incomparable in the other; 0.5 <= p < 1.
class PenaltyParam {
 public:
  static constexpr double kDefault = 0.5;

  PenaltyParam() = default;
  /// Throws ValidationError outside [0.5, 1).
  explicit PenaltyParam(double p);

  double value() const { return p_; }

 private:
  double p_ = kDefault;
};

/// Kendall tau distance between two induced orders.
struct DistanceValue {
  double raw = 0.0;         ///< sum of per-pair penalties
  double normalized = 0.0;  ///< raw / C(|U|, 2)
  std::uint64_t inverted_pairs = 0;
  std::uint64_t one_sided_pairs = 0;
  std::uint64_t total_pairs = 0;
};

/// Penalty of one outcome pair: 0, p or 1. Throws ValidationError if i == j
/// or the orders cover different outcome sets.
double pair_penalty(const PartialOrder& P, const PartialOrder& Q, std::size_t i, std::size_t j, PenaltyParam p);

/// Distance between two already materialized orders over the same outcomes.
DistanceValue kendall_tau(const PartialOrder& P, const PartialOrder& Q, PenaltyParam p);

/// Exact distance between the orders induced by two nets over the same variables.
DistanceValue ktd(const CPNet& a, const CPNet& b, PenaltyParam p = PenaltyParam{});

/// Throws ValidationError unless both nets share variable names and domains.
void require_same_variables(const CPNet& a, const CPNet& b);

enum class Closer { first, second, tie };

/// Which of `a`, `b` is closer to `ref`; ties within 1e-12 of normalized distance.
Closer qualitative_compare(const CPNet& ref, const CPNet& a, const CPNet& b, PenaltyParam p = PenaltyParam{});

/// Same decision rule applied to two precomputed distances.
Closer compare_distances(double to_first, double to_second);

inline constexpr double kTieTolerance = 1e-12;

}  // namespace cpmetric
