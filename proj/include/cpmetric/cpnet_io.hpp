#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpmetric/cpnet.hpp"

namespace cpmetric {

/// Parses the JSON CP-net format. Throws ParseError on malformed text and
/// ValidationError (with a JSON-path location) on semantic problems.
CPNet parse_cpnet(std::string_view text);
CPNet cpnet_from_json(const nlohmann::json& doc);

/// Canonical form: variables in index order, cpt rows in lexicographic
/// parent-assignment order.
nlohmann::json cpnet_to_json(const CPNet& net);
std::string serialize_cpnet(const CPNet& net);

/// Human-readable outcome such as "x0 x1' x2".
std::string format_outcome(const CPNet& net, const Outcome& o);

CPNet read_cpnet_file(const std::filesystem::path& path);
void write_cpnet_file(const std::filesystem::path& path, const CPNet& net);

/// A library file holds many nets sharing one variable set.
std::vector<CPNet> read_library(const std::filesystem::path& path);
void write_library(const std::filesystem::path& path, const std::vector<CPNet>& nets);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cpmetric
