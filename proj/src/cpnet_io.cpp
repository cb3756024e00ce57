#include "cpmetric/cpnet_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "cpmetric/error.hpp"

namespace cpmetric {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(path + ": missing \"" + key + "\"");
  return obj.at(key);
}

std::string require_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ValidationError(path + ": expected a string");
  return v.get<std::string>();
}

int value_index(const Variable& var, const std::string& label, const std::string& path) {
  for (int i = 0; i < kDomainSize; ++i)
    if (var.domain[static_cast<std::size_t>(i)] == label) return i;
  throw ValidationError(path + ": '" + label + "' is not in the domain of " + var.name);
}

}  // namespace

CPNet cpnet_from_json(const json& doc) {
  const json& vars_json = require(doc, "variables", "$");
  if (!vars_json.is_array() || vars_json.empty()) throw ValidationError("$.variables: expected a non-empty array");

  std::vector<Variable> vars;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < vars_json.size(); ++i) {
    const std::string path = "$.variables[" + std::to_string(i) + "]";
    const json& v = vars_json[i];
    Variable var;
    var.name = require_string(require(v, "name", path), path + ".name");
    const json& dom = require(v, "domain", path);
    if (!dom.is_array() || dom.size() != kDomainSize)
      throw ValidationError(path + ".domain: expected exactly 2 values (binary domains only)");
    for (std::size_t d = 0; d < kDomainSize; ++d)
      var.domain[d] = require_string(dom[d], path + ".domain[" + std::to_string(d) + "]");
    if (!index.emplace(var.name, static_cast<int>(i)).second)
      throw ValidationError(path + ".name: duplicate variable name '" + var.name + "'");
    vars.push_back(std::move(var));
  }

  std::vector<CPTable> tables;
  for (std::size_t i = 0; i < vars_json.size(); ++i) {
    const std::string path = "$.variables[" + std::to_string(i) + "]";
    const json& v = vars_json[i];
    CPTable t;
    t.variable = static_cast<int>(i);

    const json& parents = v.contains("parents") ? v.at("parents") : json::array();
    if (!parents.is_array()) throw ValidationError(path + ".parents: expected an array");
    for (std::size_t j = 0; j < parents.size(); ++j) {
      const std::string name = require_string(parents[j], path + ".parents[" + std::to_string(j) + "]");
      auto it = index.find(name);
      if (it == index.end()) throw ValidationError(path + ".parents: unknown variable '" + name + "'");
      t.parents.push_back(it->second);
    }
    std::sort(t.parents.begin(), t.parents.end());
    if (std::adjacent_find(t.parents.begin(), t.parents.end()) != t.parents.end())
      throw ValidationError(path + ".parents: duplicate parent");
    if (t.parents.size() > 20) throw ValidationError(path + ".parents: too many parents");

    const std::size_t rows = std::size_t{1} << t.parents.size();
    std::vector<int> filled(rows, -1);
    t.preferred.assign(rows, 0);
    const json& cpt = require(v, "cpt", path);
    if (!cpt.is_array()) throw ValidationError(path + ".cpt: expected an array");
    for (std::size_t r = 0; r < cpt.size(); ++r) {
      const std::string rpath = path + ".cpt[" + std::to_string(r) + "]";
      const json& given = cpt[r].contains("given") ? cpt[r].at("given") : json::object();
      if (!given.is_object()) throw ValidationError(rpath + ".given: expected an object");
      if (given.size() != t.parents.size())
        throw ValidationError(rpath + ".given: must assign exactly the parents of " + vars[i].name);
      std::size_t row = 0;
      for (int p : t.parents) {
        const auto& pvar = vars[static_cast<std::size_t>(p)];
        if (!given.contains(pvar.name)) throw ValidationError(rpath + ".given: missing parent '" + pvar.name + "'");
        const std::string label = require_string(given.at(pvar.name), rpath + ".given." + pvar.name);
        row = (row << 1) | static_cast<std::size_t>(value_index(pvar, label, rpath + ".given." + pvar.name));
      }
      const json& order = require(cpt[r], "order", rpath);
      if (!order.is_array() || order.size() != kDomainSize)
        throw ValidationError(rpath + ".order: expected [preferred, other]");
      const int best = value_index(vars[i], require_string(order[0], rpath + ".order[0]"), rpath + ".order[0]");
      const int worst = value_index(vars[i], require_string(order[1], rpath + ".order[1]"), rpath + ".order[1]");
      if (best == worst) throw ValidationError(rpath + ".order: not a strict order");
      if (filled[row] >= 0)
        throw ValidationError(rpath + ": duplicates parent assignment of cpt[" + std::to_string(filled[row]) + "]");
      filled[row] = static_cast<int>(r);
      t.preferred[row] = static_cast<std::uint8_t>(best);
    }
    for (std::size_t row = 0; row < rows; ++row)
      if (filled[row] < 0)
        throw ValidationError(path + ".cpt: missing row for parent assignment " + std::to_string(row) + " of " +
                              std::to_string(rows));
    tables.push_back(std::move(t));
  }

  try {
    return CPNet(std::move(vars), std::move(tables));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("$: ") + e.what());
  }
}

CPNet parse_cpnet(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("CP-net syntax error: ") + e.what());
  }
  return cpnet_from_json(doc);
}

json cpnet_to_json(const CPNet& net) {
  json vars = json::array();
  for (int i = 0; i < net.size(); ++i) {
    const auto& var = net.variable(i);
    const auto& t = net.table(i);
    json parents = json::array();
    for (int p : t.parents) parents.push_back(net.variable(p).name);
    json cpt = json::array();
    const std::size_t k = t.parents.size();
    for (std::size_t row = 0; row < t.row_count(); ++row) {
      json given = json::object();
      for (std::size_t j = 0; j < k; ++j) {
        const auto& pvar = net.variable(t.parents[j]);
        given[pvar.name] = pvar.domain[(row >> (k - 1 - j)) & 1U];
      }
      const int best = t.preferred[row];
      cpt.push_back({{"given", given}, {"order", {var.domain[static_cast<std::size_t>(best)],
                                                  var.domain[static_cast<std::size_t>(1 - best)]}}});
    }
    vars.push_back({{"name", var.name}, {"domain", var.domain}, {"parents", parents}, {"cpt", cpt}});
  }
  return json{{"variables", vars}};
}

std::string serialize_cpnet(const CPNet& net) { return cpnet_to_json(net).dump(2) + "\n"; }

std::string format_outcome(const CPNet& net, const Outcome& o) {
  std::string out;
  for (int i = 0; i < net.size(); ++i) {
    if (i) out += ' ';
    out += net.variable(i).domain[o[i]];
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

CPNet read_cpnet_file(const std::filesystem::path& path) { return parse_cpnet(read_text_file(path)); }

void write_cpnet_file(const std::filesystem::path& path, const CPNet& net) {
  write_text_file(path, serialize_cpnet(net));
}

std::vector<CPNet> read_library(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("nets") || !doc["nets"].is_array())
    throw ParseError(path.string() + ": not a CP-net library");
  std::vector<CPNet> nets;
  nets.reserve(doc["nets"].size());
  for (std::size_t i = 0; i < doc["nets"].size(); ++i) {
    try {
      nets.push_back(cpnet_from_json(doc["nets"][i]));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": nets[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return nets;
}

void write_library(const std::filesystem::path& path, const std::vector<CPNet>& nets) {
  json doc;
  doc["format"] = "cpmetric-library";
  doc["version"] = 1;
  doc["n"] = nets.empty() ? 0 : nets.front().size();
  doc["count"] = nets.size();
  doc["nets"] = json::array();
  for (const auto& net : nets) doc["nets"].push_back(cpnet_to_json(net));
  write_text_file(path, doc.dump(1) + "\n");
}

}  // namespace cpmetric
