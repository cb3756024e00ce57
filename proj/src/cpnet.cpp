#include "cpmetric/cpnet.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <queue>
#include <set>
#include <string>

#include "cpmetric/error.hpp"

namespace cpmetric {

namespace {

std::string where(const std::vector<Variable>& vars, int i) {
  std::string name = i < static_cast<int>(vars.size()) ? vars[static_cast<std::size_t>(i)].name : "?";
  return "variable '" + name + "' (index " + std::to_string(i) + ")";
}

// Kahn's procedure over parent lists; returns fewer than n entries on a cycle.
std::vector<int> kahn_order(int n, const std::vector<CPTable>& tables) {
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    for (int p : tables[static_cast<std::size_t>(v)].parents) {
      children[static_cast<std::size_t>(p)].push_back(v);
      ++indegree[static_cast<std::size_t>(v)];
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < n; ++v)
    if (indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : children[static_cast<std::size_t>(v)])
      if (--indegree[static_cast<std::size_t>(c)] == 0) ready.push(c);
  }
  return order;
}

void check_budget(int n) {
  int budget = outcome_budget_n();
  if (n > budget)
    throw BudgetError("outcome space of " + std::to_string(n) + " variables exceeds budget n <= " +
                      std::to_string(budget) + " (set CPMETRIC_BUDGET_N to raise it)");
}

}  // namespace

int outcome_budget_n() {
  if (const char* env = std::getenv("CPMETRIC_BUDGET_N")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 30) return static_cast<int>(v);
  }
  return kDefaultBudgetN;
}

Outcome Outcome::from_index(std::uint64_t index, int n) {
  std::vector<std::uint8_t> values(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((index >> i) & 1U);
  return Outcome(std::move(values));
}

std::uint64_t Outcome::index() const {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) idx |= static_cast<std::uint64_t>(values_[i] & 1U) << i;
  return idx;
}

Outcome Outcome::with(int var, std::uint8_t value) const {
  Outcome copy = *this;
  copy.values_[static_cast<std::size_t>(var)] = value;
  return copy;
}

std::size_t CPTable::row_for(const Outcome& o) const {
  std::size_t row = 0;
  for (int p : parents) row = (row << 1) | o[p];
  return row;
}

std::size_t CPTable::row_for_index(std::uint64_t outcome_index) const {
  std::size_t row = 0;
  for (int p : parents) row = (row << 1) | ((outcome_index >> p) & 1U);
  return row;
}

bool CPTable::depends_on(std::size_t parent_pos) const {
  const std::size_t k = parents.size();
  const std::size_t bit = std::size_t{1} << (k - 1 - parent_pos);
  for (std::size_t r = 0; r < preferred.size(); ++r) {
    if (r & bit) continue;
    if (preferred[r] != preferred[r | bit]) return true;
  }
  return false;
}

CPNet::CPNet(std::vector<Variable> variables, std::vector<CPTable> tables)
    : variables_(std::move(variables)), tables_(std::move(tables)) {
  const int n = size();
  if (n == 0) throw ValidationError("CP-net has no variables");
  if (static_cast<int>(tables_.size()) != n)
    throw ValidationError("expected " + std::to_string(n) + " cp-tables, got " + std::to_string(tables_.size()));

  std::set<std::string> names;
  for (int i = 0; i < n; ++i) {
    const auto& v = variables_[static_cast<std::size_t>(i)];
    if (v.name.empty()) throw ValidationError(where(variables_, i) + ": empty name");
    if (!names.insert(v.name).second) throw ValidationError(where(variables_, i) + ": duplicate name");
    if (v.domain[0] == v.domain[1]) throw ValidationError(where(variables_, i) + ": domain labels must differ");
  }

  for (int i = 0; i < n; ++i) {
    const auto& t = tables_[static_cast<std::size_t>(i)];
    if (t.variable != i) throw ValidationError(where(variables_, i) + ": cp-table bound to wrong variable");
    for (std::size_t j = 0; j < t.parents.size(); ++j) {
      int p = t.parents[j];
      if (p < 0 || p >= n) throw ValidationError(where(variables_, i) + ": parent index out of range");
      if (p == i) throw ValidationError(where(variables_, i) + ": variable is its own parent");
      if (j > 0 && t.parents[j - 1] >= p)
        throw ValidationError(where(variables_, i) + ": parents must be sorted and unique");
    }
    if (t.parents.size() >= 63) throw ValidationError(where(variables_, i) + ": too many parents");
    const std::size_t rows = std::size_t{1} << t.parents.size();
    if (t.preferred.size() != rows)
      throw ValidationError(where(variables_, i) + ": expected " + std::to_string(rows) + " cpt rows, got " +
                            std::to_string(t.preferred.size()));
    for (std::size_t r = 0; r < rows; ++r)
      if (t.preferred[r] >= kDomainSize)
        throw ValidationError(where(variables_, i) + ": cpt row " + std::to_string(r) + " has invalid value");
  }

  if (static_cast<int>(kahn_order(n, tables_).size()) != n)
    throw ValidationError("dependency graph contains a cycle");

  for (int i = 0; i < n; ++i) {
    const auto& t = tables_[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < t.parents.size(); ++j)
      if (!t.depends_on(j))
        throw ValidationError("degenerate edge " + variables_[static_cast<std::size_t>(t.parents[j])].name + "->" +
                              variables_[static_cast<std::size_t>(i)].name);
  }
}

bool CPNet::has_edge(int parent, int child) const {
  if (child < 0 || child >= size()) return false;
  const auto& ps = parents(child);
  return std::binary_search(ps.begin(), ps.end(), parent);
}

std::vector<std::pair<int, int>> CPNet::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < size(); ++c)
    for (int p : parents(c)) out.emplace_back(p, c);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<int> CPNet::index_of(std::string_view name) const {
  for (int i = 0; i < size(); ++i)
    if (variables_[static_cast<std::size_t>(i)].name == name) return i;
  return std::nullopt;
}

std::uint8_t CPNet::preferred_value(int var, const Outcome& o) const {
  const auto& t = table(var);
  return t.preferred[t.row_for(o)];
}

PartialOrder::PartialOrder(BitMatrix dominance)
    : dominance_(std::move(dominance)), dominated_by_(dominance_.transposed()) {}

Variable default_variable(int index) {
  const std::string id = std::to_string(index);
  return Variable{"X" + id, {"x" + id, "x" + id + "'"}};
}

std::vector<int> topological_order(const CPNet& net) {
  auto order = kahn_order(net.size(), net.tables());
  if (static_cast<int>(order.size()) != net.size()) throw ValidationError("dependency graph contains a cycle");
  return order;
}

bool is_degenerate_edge(const CPNet& net, int parent, int child) {
  if (!net.has_edge(parent, child))
    throw ValidationError("no edge " + std::to_string(parent) + "->" + std::to_string(child));
  const auto& ps = net.parents(child);
  auto pos = static_cast<std::size_t>(std::lower_bound(ps.begin(), ps.end(), parent) - ps.begin());
  return !net.table(child).depends_on(pos);
}

Outcome optimal_outcome(const CPNet& net) {
  std::vector<std::uint8_t> values(static_cast<std::size_t>(net.size()), 0);
  Outcome o(values);
  for (int v : topological_order(net)) o = o.with(v, net.preferred_value(v, o));
  return o;
}

std::vector<Outcome> worsening_flips(const CPNet& net, const Outcome& o) {
  std::vector<Outcome> out;
  for (int v = 0; v < net.size(); ++v) {
    const std::uint8_t best = net.preferred_value(v, o);
    if (o[v] == best) out.push_back(o.with(v, static_cast<std::uint8_t>(1 - best)));
  }
  return out;
}

namespace {

// Bit v of the result is set when variable v can be worsened in `outcome`.
std::uint32_t flip_mask(const CPNet& net, std::uint64_t outcome) {
  std::uint32_t mask = 0;
  for (int v = 0; v < net.size(); ++v) {
    const auto& t = net.table(v);
    if (((outcome >> v) & 1U) == t.preferred[t.row_for_index(outcome)]) mask |= 1U << v;
  }
  return mask;
}

}  // namespace

PartialOrder induced_order(const CPNet& net) {
  const int n = net.size();
  check_budget(n);
  const std::size_t count = std::size_t{1} << n;

  std::vector<std::uint32_t> flips(count);
  for (std::size_t o = 0; o < count; ++o) flips[o] = flip_mask(net, o);

  // Memoized depth-first closure; the flip graph of an acyclic net is a DAG,
  // so every successor row is complete when it is merged.
  BitMatrix reach(count, count);
  std::vector<std::uint8_t> done(count, 0);
  std::vector<std::pair<std::uint64_t, int>> stack;
  for (std::size_t root = 0; root < count; ++root) {
    if (done[root]) continue;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
      auto& [o, next_var] = stack.back();
      bool descended = false;
      while (next_var < n) {
        const int v = next_var++;
        if (!((flips[o] >> v) & 1U)) continue;
        const std::uint64_t s = o ^ (std::uint64_t{1} << v);
        if (!done[s]) {
          stack.emplace_back(s, 0);
          descended = true;
          break;
        }
      }
      if (descended) continue;
      for (int v = 0; v < n; ++v) {
        if (!((flips[o] >> v) & 1U)) continue;
        const std::uint64_t s = o ^ (std::uint64_t{1} << v);
        reach.set(o, s);
        reach.or_row(o, s);
      }
      done[o] = 1;
      stack.pop_back();
    }
  }
  return PartialOrder(std::move(reach));
}

bool dominates(const CPNet& net, const Outcome& better, const Outcome& worse) {
  check_budget(net.size());
  if (better.size() != net.size() || worse.size() != net.size())
    throw ValidationError("outcome length does not match net size");
  const std::uint64_t target = worse.index();
  const std::uint64_t start = better.index();
  if (start == target) return false;
  std::vector<std::uint8_t> seen(std::size_t{1} << net.size(), 0);
  std::deque<std::uint64_t> frontier{start};
  seen[start] = 1;
  while (!frontier.empty()) {
    const std::uint64_t o = frontier.front();
    frontier.pop_front();
    const std::uint32_t mask = flip_mask(net, o);
    for (int v = 0; v < net.size(); ++v) {
      if (!((mask >> v) & 1U)) continue;
      const std::uint64_t s = o ^ (std::uint64_t{1} << v);
      if (s == target) return true;
      if (!seen[s]) {
        seen[s] = 1;
        frontier.push_back(s);
      }
    }
  }
  return false;
}

namespace {

// Truth tables over k parents that depend on every parent.
std::vector<std::vector<std::uint8_t>> nondegenerate_tables(int k) {
  std::vector<std::vector<std::uint8_t>> out;
  const std::size_t rows = std::size_t{1} << k;
  for (std::uint64_t tt = 0; tt < (std::uint64_t{1} << rows); ++tt) {
    CPTable t;
    t.parents.resize(static_cast<std::size_t>(k));
    t.preferred.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) t.preferred[r] = static_cast<std::uint8_t>((tt >> r) & 1U);
    bool ok = true;
    for (std::size_t j = 0; j < static_cast<std::size_t>(k) && ok; ++j) ok = t.depends_on(j);
    if (ok) out.push_back(std::move(t.preferred));
  }
  return out;
}

}  // namespace

std::uint64_t enumerate_cpnets(int n, int max_indegree, const std::function<void(const CPNet&)>& visit) {
  if (n < 1) throw ValidationError("enumeration needs n >= 1");
  if (n > 4) throw BudgetError("enumeration supports n <= 4, got " + std::to_string(n));
  if (max_indegree < 0 || max_indegree > n - 1) max_indegree = n - 1;

  std::vector<std::vector<std::vector<std::uint8_t>>> by_k;
  for (int k = 0; k <= max_indegree; ++k) by_k.push_back(nondegenerate_tables(k));

  std::vector<Variable> vars;
  for (int i = 0; i < n; ++i) vars.push_back(default_variable(i));

  std::vector<std::pair<int, int>> candidate_edges;
  for (int p = 0; p < n; ++p)
    for (int c = 0; c < n; ++c)
      if (p != c) candidate_edges.emplace_back(p, c);

  std::uint64_t total = 0;
  const std::uint64_t masks = std::uint64_t{1} << candidate_edges.size();
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    std::vector<CPTable> tables(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) tables[static_cast<std::size_t>(i)].variable = i;
    for (std::size_t e = 0; e < candidate_edges.size(); ++e)
      if ((mask >> e) & 1U)
        tables[static_cast<std::size_t>(candidate_edges[e].second)].parents.push_back(candidate_edges[e].first);
    bool within_degree = true;
    for (auto& t : tables) {
      std::sort(t.parents.begin(), t.parents.end());
      if (static_cast<int>(t.parents.size()) > max_indegree) within_degree = false;
    }
    if (!within_degree || static_cast<int>(kahn_order(n, tables).size()) != n) continue;

    // Odometer over the non-degenerate table choices of every variable.
    std::vector<std::size_t> pick(static_cast<std::size_t>(n), 0);
    while (true) {
      for (int i = 0; i < n; ++i) {
        auto& t = tables[static_cast<std::size_t>(i)];
        t.preferred = by_k[t.parents.size()][pick[static_cast<std::size_t>(i)]];
      }
      visit(CPNet(vars, tables));
      ++total;
      int i = n - 1;
      for (; i >= 0; --i) {
        auto& digit = pick[static_cast<std::size_t>(i)];
        if (++digit < by_k[tables[static_cast<std::size_t>(i)].parents.size()].size()) break;
        digit = 0;
      }
      if (i < 0) break;
    }
  }
  return total;
}

std::uint64_t enumerate_cpnets(int n, const std::function<void(const CPNet&)>& visit) {
  return enumerate_cpnets(n, n - 1, visit);
}

}  // namespace cpmetric
