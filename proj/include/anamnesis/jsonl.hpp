#pragma once

#include <functional>
#include <fstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace anamnesis {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Calls fn(record, line_number) for every non-blank, non-'#' line.
// Parse failures throw LoadError naming the line.
void for_each_record(std::istream& in, const std::function<void(const Json&, std::size_t)>& fn);

std::string require_string(const Json& record, std::string_view field, std::size_t line);
std::string optional_string(const Json& record, std::string_view field, std::string_view fallback = {});
long long require_integer(const Json& record, std::string_view field, std::size_t line);
double require_number(const Json& record, std::string_view field, std::size_t line);
bool optional_bool(const Json& record, std::string_view field, bool fallback, std::size_t line);

std::ifstream open_input(const std::string& path);
std::ofstream open_output(const std::string& path);

}  // namespace anamnesis
