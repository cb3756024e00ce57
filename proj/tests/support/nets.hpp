#pragma once

#include <string>
#include <vector>

#include "cpmetric/cpnet.hpp"
#include "cpmetric/datagen.hpp"

namespace testnets {

inline cpmetric::Variable var(const std::string& upper, const std::string& lower) {
  return {upper, {lower, lower + "'"}};
}

/// A, B unconditional; C prefers c iff A and B agree; D follows C.
inline cpmetric::CPNet example(bool invert_a = false) {
  std::vector<cpmetric::Variable> vars{var("A", "a"), var("B", "b"), var("C", "c"), var("D", "d")};
  std::vector<cpmetric::CPTable> tables{
      {0, {}, {static_cast<std::uint8_t>(invert_a ? 1 : 0)}},
      {1, {}, {0}},
      {2, {0, 1}, {0, 1, 1, 0}},
      {3, {2}, {0, 1}},
  };
  return cpmetric::CPNet(vars, tables);
}

inline cpmetric::CPNet single(bool inverted) {
  return cpmetric::CPNet({var("X", "x")}, {{0, {}, {static_cast<std::uint8_t>(inverted ? 1 : 0)}}});
}

/// Outcome from a string of 0/1 characters, variable 0 first.
inline cpmetric::Outcome outcome(const std::string& bits) {
  std::vector<std::uint8_t> v;
  for (char c : bits) v.push_back(static_cast<std::uint8_t>(c == '1'));
  return cpmetric::Outcome(v);
}

inline std::vector<cpmetric::CPNet> random_nets(int n, int count, std::uint64_t seed) {
  cpmetric::GenConfig cfg;
  cfg.n = n;
  cpmetric::Rng structure(seed, "structure"), tables(seed, "tables");
  std::vector<cpmetric::CPNet> out;
  for (int i = 0; i < count; ++i) out.push_back(cpmetric::random_cpnet(cfg, structure, tables));
  return out;
}

}  // namespace testnets
