#include "anamnesis/jsonl.hpp"

#include <fstream>
#include <istream>

#include "anamnesis/error.hpp"

namespace anamnesis {

namespace {

std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

}  // namespace

void for_each_record(std::istream& in, const std::function<void(const Json&, std::size_t)>& fn) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        Json record;
        try {
            record = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw LoadError(where(number) + "malformed record: " + e.what());
        }
        if (!record.is_object()) {
            throw LoadError(where(number) + "record is not an object");
        }
        fn(record, number);
    }
}

std::string require_string(const Json& record, std::string_view field, std::size_t line) {
    auto it = record.find(std::string(field));
    if (it == record.end() || !it->is_string()) {
        throw LoadError(where(line) + "field '" + std::string(field) + "' must be a string");
    }
    return it->get<std::string>();
}

std::string optional_string(const Json& record, std::string_view field, std::string_view fallback) {
    auto it = record.find(std::string(field));
    if (it == record.end() || it->is_null()) {
        return std::string(fallback);
    }
    return it->is_string() ? it->get<std::string>() : std::string(fallback);
}

long long require_integer(const Json& record, std::string_view field, std::size_t line) {
    auto it = record.find(std::string(field));
    if (it == record.end() || !it->is_number_integer()) {
        throw LoadError(where(line) + "field '" + std::string(field) + "' must be an integer");
    }
    return it->get<long long>();
}

double require_number(const Json& record, std::string_view field, std::size_t line) {
    auto it = record.find(std::string(field));
    if (it == record.end() || !it->is_number()) {
        throw LoadError(where(line) + "field '" + std::string(field) + "' must be a number");
    }
    return it->get<double>();
}

bool optional_bool(const Json& record, std::string_view field, bool fallback, std::size_t line) {
    auto it = record.find(std::string(field));
    if (it == record.end() || it->is_null()) {
        return fallback;
    }
    if (!it->is_boolean()) {
        throw LoadError(where(line) + "field '" + std::string(field) + "' must be a boolean");
    }
    return it->get<bool>();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open '" + path + "' for reading");
    }
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw LoadError("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace anamnesis
