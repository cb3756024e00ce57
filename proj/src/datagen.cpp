#include "cpmetric/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <unordered_set>

#include "cpmetric/error.hpp"

namespace cpmetric {

namespace {

std::string net_key(const CPNet& net) {
  std::string key;
  for (const auto& t : net.tables()) {
    for (int p : t.parents) key += static_cast<char>('a' + p);
    key += ':';
    for (auto v : t.preferred) key += static_cast<char>('0' + v);
    key += ';';
  }
  return key;
}

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, count ? count : 1);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(count, lo + chunk);
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void GenConfig::validate() const {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (count < 1) throw ValidationError("count must be at least 1");
  if (effective_max_indegree() >= n) throw ValidationError("max_indegree must be < n");
  if (auto space = cpnet_space_size(n); space && count > *space)
    throw ValidationError("requested " + std::to_string(count) + " distinct nets but only " + std::to_string(*space) +
                          " binary CP-nets with " + std::to_string(n) + " features exist");
}

std::optional<std::uint64_t> cpnet_space_size(int n) {
  switch (n) {
    case 1: return 2;
    case 2: return 12;
    case 3: return 488;
    case 4: return 481776;
    default: return std::nullopt;
  }
}

CPNet random_cpnet(const GenConfig& cfg, Rng& structure_rng, Rng& table_rng) {
  const int n = cfg.n;
  const int max_in = cfg.effective_max_indegree();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  structure_rng.shuffle(perm);

  std::vector<CPTable> tables(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const int v = perm[static_cast<std::size_t>(k)];
    auto& t = tables[static_cast<std::size_t>(v)];
    t.variable = v;
    const int parent_count = structure_rng.between(0, std::min(k, max_in));
    std::vector<int> earlier(perm.begin(), perm.begin() + k);
    structure_rng.shuffle(earlier);
    t.parents.assign(earlier.begin(), earlier.begin() + parent_count);
    std::sort(t.parents.begin(), t.parents.end());
  }

  constexpr int kMaxRedraws = 10000;
  for (auto& t : tables) {
    t.preferred.resize(std::size_t{1} << t.parents.size());
    int tries = 0;
    while (true) {
      for (auto& row : t.preferred) row = table_rng.coin() ? 1 : 0;
      bool ok = true;
      for (std::size_t j = 0; j < t.parents.size() && ok; ++j) ok = t.depends_on(j);
      if (ok) break;
      if (++tries >= kMaxRedraws) throw BudgetError("could not draw a non-degenerate cp-table");
    }
  }

  std::vector<Variable> vars;
  for (int i = 0; i < n; ++i) vars.push_back(default_variable(i));
  return CPNet(std::move(vars), std::move(tables));
}

CPNet random_cpnet(const GenConfig& cfg, Rng& rng) { return random_cpnet(cfg, rng, rng); }

std::vector<CPNet> generate_library(const GenConfig& cfg) {
  cfg.validate();
  std::vector<CPNet> out;
  out.reserve(cfg.count);
  Rng structure(cfg.seed, "structure");
  if (cfg.n <= 3) {
    std::vector<CPNet> all;
    enumerate_cpnets(cfg.n, cfg.effective_max_indegree(), [&](const CPNet& net) { all.push_back(net); });
    if (cfg.count > all.size())
      throw ValidationError("only " + std::to_string(all.size()) + " nets satisfy the in-degree bound");
    structure.shuffle(all);
    all.erase(all.begin() + static_cast<std::ptrdiff_t>(cfg.count), all.end());
    return all;
  }
  Rng tables(cfg.seed, "tables");
  std::unordered_set<std::string> seen;
  const std::size_t max_attempts = 1000 * cfg.count + 100000;
  std::size_t attempts = 0;
  while (out.size() < cfg.count) {
    if (++attempts > max_attempts)
      throw BudgetError("could not draw " + std::to_string(cfg.count) + " distinct nets (got " +
                        std::to_string(out.size()) + ")");
    CPNet net = random_cpnet(cfg, structure, tables);
    if (seen.insert(net_key(net)).second) out.push_back(std::move(net));
  }
  return out;
}

std::vector<NetEncoding> encode_library(const std::vector<CPNet>& library) {
  std::vector<NetEncoding> out;
  out.reserve(library.size());
  for (const auto& net : library) out.push_back(encode_net(net));
  return out;
}

Dataset assemble_dataset(const GenConfig& gen, std::vector<CPNet> library, FoldMembership membership,
                         const DatasetOptions& opts, const std::vector<double>* known_labels) {
  if (opts.m < 1) throw ValidationError("bin count must be positive");
  Dataset ds;
  ds.gen = gen;
  ds.p = opts.p;
  ds.m = opts.m;
  ds.ordered = opts.ordered;
  ds.library = std::move(library);
  const std::size_t count = ds.library.size();
  for (std::size_t i = 1; i < count; ++i) require_same_variables(ds.library[0], ds.library[i]);

  // Mark every pair formed inside one side of some fold.
  std::vector<std::uint8_t> needed(count * count, 0);
  auto mark_side = [&](const std::vector<std::uint32_t>& side) {
    for (auto a : side) {
      if (a >= count) throw ValidationError("fold references net " + std::to_string(a) + " outside the library");
      for (auto b : side) {
        if (a == b || (!ds.ordered && a > b)) continue;
        needed[a * count + b] = 1;
      }
    }
  };
  for (const auto& [train, test] : membership) {
    mark_side(train);
    mark_side(test);
  }

  std::vector<std::int64_t> pair_id(count * count, -1);
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = 0; b < count; ++b)
      if (needed[a * count + b]) {
        pair_id[a * count + b] = static_cast<std::int64_t>(ds.pairs.size());
        ds.pairs.push_back(LabeledPair{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), 0.0, 0});
      }

  if (known_labels) {
    if (known_labels->size() != ds.pairs.size())
      throw ValidationError("label count " + std::to_string(known_labels->size()) + " does not match pair count " +
                            std::to_string(ds.pairs.size()));
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) ds.pairs[i].y = (*known_labels)[i];
  } else {
    std::vector<std::optional<PartialOrder>> orders(count);
    parallel_for(count, opts.workers, [&](std::size_t i) { orders[i] = induced_order(ds.library[i]); });
    // Labels depend only on the unordered pair; the smaller index computes it.
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i)
      if (ds.pairs[i].a < ds.pairs[i].b || pair_id[ds.pairs[i].b * count + ds.pairs[i].a] < 0) work.push_back(i);
    parallel_for(work.size(), opts.workers, [&](std::size_t w) {
      auto& pr = ds.pairs[work[w]];
      pr.y = kendall_tau(*orders[pr.a], *orders[pr.b], ds.p).normalized;
    });
    for (auto& pr : ds.pairs)
      if (pr.a > pr.b) {
        const auto mirror = pair_id[pr.b * count + pr.a];
        if (mirror >= 0) pr.y = ds.pairs[static_cast<std::size_t>(mirror)].y;
      }
  }
  for (auto& pr : ds.pairs) pr.bin = bin_label(pr.y, ds.m);

  auto side_pairs = [&](const std::vector<std::uint32_t>& side) {
    std::vector<std::size_t> ids;
    for (auto a : side)
      for (auto b : side)
        if (auto id = pair_id[a * count + b]; id >= 0) ids.push_back(static_cast<std::size_t>(id));
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  for (auto& [train, test] : membership) {
    Fold f;
    f.train_nets = std::move(train);
    f.test_nets = std::move(test);
    f.train_pairs = side_pairs(f.train_nets);
    f.test_pairs = side_pairs(f.test_nets);
    ds.folds.push_back(std::move(f));
  }
  return ds;
}

FoldMembership split_library(std::size_t count, std::uint64_t seed, int folds, std::size_t train_size) {
  if (folds < 1) throw ValidationError("folds must be at least 1");
  if (train_size > count) throw ValidationError("train_size exceeds the library size");
  Rng splits(seed, "splits");
  FoldMembership membership;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::uint32_t> perm(count);
    std::iota(perm.begin(), perm.end(), 0U);
    splits.shuffle(perm);
    std::vector<std::uint32_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(train_size));
    std::vector<std::uint32_t> test(perm.begin() + static_cast<std::ptrdiff_t>(train_size), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    membership.emplace_back(std::move(train), std::move(test));
  }
  return membership;
}

Dataset build_dataset(const GenConfig& gen, const DatasetOptions& opts) {
  std::vector<CPNet> library = generate_library(gen);
  const std::size_t count = library.size();
  const std::size_t train_size =
      opts.train_size.value_or(static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(count))));
  FoldMembership membership = split_library(count, gen.seed, opts.folds, train_size);
  return assemble_dataset(gen, std::move(library), std::move(membership), opts);
}

std::vector<std::uint64_t> distance_histogram(const Dataset& ds, int bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& pr : ds.pairs) ++counts[static_cast<std::size_t>(bin_label(pr.y, bins))];
  return counts;
}

}  // namespace cpmetric
