#include "cpmetric/order_metric.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "cpmetric/error.hpp"

namespace cpmetric {

PenaltyParam::PenaltyParam(double p) : p_(p) {
  if (!(p >= 0.5 && p < 1.0)) throw ValidationError("penalty p must satisfy 0.5 <= p < 1, got " + std::to_string(p));
}

double pair_penalty(const PartialOrder& P, const PartialOrder& Q, std::size_t i, std::size_t j, PenaltyParam p) {
  if (P.size() != Q.size()) throw ValidationError("orders are over different outcome sets");
  if (i == j) throw ValidationError("pair penalty needs two distinct outcomes");
  if (i >= P.size() || j >= P.size()) throw ValidationError("outcome index out of range");
  const bool p_ij = P.dominates(i, j), p_ji = P.dominates(j, i);
  const bool q_ij = Q.dominates(i, j), q_ji = Q.dominates(j, i);
  const bool p_ordered = p_ij || p_ji;
  const bool q_ordered = q_ij || q_ji;
  if (p_ordered && q_ordered) return (p_ij == q_ij) ? 0.0 : 1.0;
  if (p_ordered != q_ordered) return p.value();
  return 0.0;
}

DistanceValue kendall_tau(const PartialOrder& P, const PartialOrder& Q, PenaltyParam p) {
  if (P.size() != Q.size()) throw ValidationError("orders are over different outcome sets");
  const std::size_t n = P.size();
  const std::size_t words = P.dominance().words_per_row();

  // Every unordered pair is seen twice, once from each endpoint's row.
  std::uint64_t inverted = 0;
  std::uint64_t one_sided = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pd = P.dominance().row(i);
    const auto pu = P.dominated_by().row(i);
    const auto qd = Q.dominance().row(i);
    const auto qu = Q.dominated_by().row(i);
    for (std::size_t w = 0; w < words; ++w) {
      inverted += static_cast<std::uint64_t>(std::popcount((pd[w] & qu[w]) | (pu[w] & qd[w])));
      one_sided += static_cast<std::uint64_t>(std::popcount((pd[w] | pu[w]) ^ (qd[w] | qu[w])));
    }
  }
  DistanceValue d;
  d.inverted_pairs = inverted / 2;
  d.one_sided_pairs = one_sided / 2;
  d.total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  d.raw = static_cast<double>(d.inverted_pairs) + p.value() * static_cast<double>(d.one_sided_pairs);
  d.normalized = d.total_pairs ? d.raw / static_cast<double>(d.total_pairs) : 0.0;
  return d;
}

void require_same_variables(const CPNet& a, const CPNet& b) {
  if (a.variables() != b.variables())
    throw ValidationError("CP-nets are over different variable sets (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + " variables, names and domains must match)");
}

DistanceValue ktd(const CPNet& a, const CPNet& b, PenaltyParam p) {
  require_same_variables(a, b);
  return kendall_tau(induced_order(a), induced_order(b), p);
}

Closer compare_distances(double to_first, double to_second) {
  if (std::abs(to_first - to_second) <= kTieTolerance) return Closer::tie;
  return to_first < to_second ? Closer::first : Closer::second;
}

Closer qualitative_compare(const CPNet& ref, const CPNet& a, const CPNet& b, PenaltyParam p) {
  require_same_variables(ref, a);
  require_same_variables(ref, b);
  const PartialOrder r = induced_order(ref);
  return compare_distances(kendall_tau(r, induced_order(a), p).normalized,
                           kendall_tau(r, induced_order(b), p).normalized);
}

}  // namespace cpmetric
