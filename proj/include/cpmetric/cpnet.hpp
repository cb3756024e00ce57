#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpmetric/bit_matrix.hpp"

namespace cpmetric {

/// Number of values per variable. Only binary domains are supported.
inline constexpr int kDomainSize = 2;

/// Largest variable count for which outcome-space computations are allowed
/// unless CPMETRIC_BUDGET_N overrides it.
inline constexpr int kDefaultBudgetN = 12;

/// Current outcome-space bound, honoring the CPMETRIC_BUDGET_N environment variable.
int outcome_budget_n();

struct Variable {
  std::string name;
  std::array<std::string, kDomainSize> domain;

  bool operator==(const Variable&) const = default;
};

/// Complete assignment of a value index to every variable.
class Outcome {
 public:
  Outcome() = default;
  explicit Outcome(std::vector<std::uint8_t> values) : values_(std::move(values)) {}

  /// Decodes an outcome index: bit i holds the value of variable i.
  static Outcome from_index(std::uint64_t index, int n);
  std::uint64_t index() const;

  int size() const { return static_cast<int>(values_.size()); }
  std::uint8_t operator[](int var) const { return values_[static_cast<std::size_t>(var)]; }
  const std::vector<std::uint8_t>& values() const { return values_; }

  /// Copy with one variable reassigned.
  Outcome with(int var, std::uint8_t value) const;

  auto operator<=>(const Outcome&) const = default;

 private:
  std::vector<std::uint8_t> values_;
};

/// Conditional preference table of one variable.
///
/// `preferred` has one entry per complete parent assignment, in lexicographic
/// order over `parents` (first parent most significant, value 0 before 1).
/// Each entry is the index of the preferred domain value under that assignment.
struct CPTable {
  int variable = 0;
  std::vector<int> parents;
  std::vector<std::uint8_t> preferred;

  std::size_t row_count() const { return preferred.size(); }
  /// Row selected by the parent values found in `o`.
  std::size_t row_for(const Outcome& o) const;
  /// Same as row_for, for an outcome given as a bit-packed index.
  std::size_t row_for_index(std::uint64_t outcome_index) const;
  /// True iff some row changes when only the parent at `parent_pos` changes.
  bool depends_on(std::size_t parent_pos) const;

  bool operator==(const CPTable&) const = default;
};

/// Validated acyclic, non-degenerate binary CP-net. Immutable once built.
class CPNet {
 public:
  /// Validates every invariant; throws ValidationError with a location on failure.
  CPNet(std::vector<Variable> variables, std::vector<CPTable> tables);

  int size() const { return static_cast<int>(variables_.size()); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(int i) const { return variables_[static_cast<std::size_t>(i)]; }
  const std::vector<CPTable>& tables() const { return tables_; }
  const CPTable& table(int i) const { return tables_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& parents(int i) const { return table(i).parents; }

  bool has_edge(int parent, int child) const;
  /// All edges parent -> child, sorted.
  std::vector<std::pair<int, int>> edges() const;
  std::optional<int> index_of(std::string_view name) const;

  /// Index of the preferred value of `var` given the parent values in `o`.
  std::uint8_t preferred_value(int var, const Outcome& o) const;

  bool operator==(const CPNet&) const = default;

 private:
  std::vector<Variable> variables_;
  std::vector<CPTable> tables_;
};

/// Strict partial order over the 2^n outcomes of a net, indexed as in
/// Outcome::index(). `dominates(i, j)` means outcome i is preferred to j.
class PartialOrder {
 public:
  explicit PartialOrder(BitMatrix dominance);

  std::size_t size() const { return dominance_.rows(); }
  bool dominates(std::size_t i, std::size_t j) const { return dominance_.test(i, j); }
  bool comparable(std::size_t i, std::size_t j) const {
    return dominance_.test(i, j) || dominance_.test(j, i);
  }
  /// Row i: outcomes dominated by i.
  const BitMatrix& dominance() const { return dominance_; }
  /// Row i: outcomes dominating i.
  const BitMatrix& dominated_by() const { return dominated_by_; }

 private:
  BitMatrix dominance_;
  BitMatrix dominated_by_;
};

/// Default variable names and labels used by generators: X0 with {x0, x0'}.
Variable default_variable(int index);

/// Parents before children; ties broken by ascending variable index.
std::vector<int> topological_order(const CPNet& net);

/// Throws ValidationError if the edge does not exist.
bool is_degenerate_edge(const CPNet& net, int parent, int child);

Outcome optimal_outcome(const CPNet& net);

/// Outcomes reachable from `o` by changing one variable to its less preferred value.
std::vector<Outcome> worsening_flips(const CPNet& net, const Outcome& o);

/// Transitive closure of the worsening-flip relation. Throws BudgetError
/// when the net exceeds outcome_budget_n().
PartialOrder induced_order(const CPNet& net);

/// Forward search along worsening flips from `better` to `worse`.
bool dominates(const CPNet& net, const Outcome& better, const Outcome& worse);

/// Calls `visit` for every distinct acyclic non-degenerate binary net over
/// default_variable(0..n-1) and returns the count. Supports n <= 4.
std::uint64_t enumerate_cpnets(int n, int max_indegree, const std::function<void(const CPNet&)>& visit);
std::uint64_t enumerate_cpnets(int n, const std::function<void(const CPNet&)>& visit);

}  // namespace cpmetric
