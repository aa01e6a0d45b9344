#include "anamnesis/config.hpp"

#include <cctype>
#include <charconv>
#include <map>

#include "anamnesis/error.hpp"

namespace anamnesis {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw LoadError("config key '" + key + "' expects a number, got '" + text + "'");
    }
    return value;
}

using Setter = std::function<void(ServiceConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"host", [](ServiceConfig& c, const std::string&, const std::string& v) { c.host = v; }},
        {"port", [](ServiceConfig& c, const std::string& k, const std::string& v) { c.port = parse_number<int>(k, v); }},
        {"kb", [](ServiceConfig& c, const std::string&, const std::string& v) { c.kb = v; }},
        {"bank", [](ServiceConfig& c, const std::string&, const std::string& v) { c.bank = v; }},
        {"lexicon", [](ServiceConfig& c, const std::string&, const std::string& v) { c.lexicon = v; }},
        {"model", [](ServiceConfig& c, const std::string&, const std::string& v) { c.model = v; }},
        {"journal", [](ServiceConfig& c, const std::string&, const std::string& v) { c.journal = v; }},
        {"ratings", [](ServiceConfig& c, const std::string&, const std::string& v) { c.ratings = v; }},
        {"variant", [](ServiceConfig& c, const std::string&, const std::string& v) {
             c.variant = engine_variant_from_string(v);
         }},
        {"seed", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.seed = parse_number<std::uint64_t>(k, v);
         }},
        {"pair_seed", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.pair_seed = parse_number<std::uint64_t>(k, v);
         }},
        {"max_questions", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.max_questions = parse_number<int>(k, v);
         }},
        {"margin_threshold", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.margin_threshold = parse_number<double>(k, v);
         }},
        {"emote_mode", [](ServiceConfig& c, const std::string&, const std::string& v) {
             c.emote_mode = emote_mode_from_string(v);
         }},
        {"temperature", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.temperature = parse_number<double>(k, v);
         }},
        {"consistency_threshold", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.consistency_threshold = parse_number<int>(k, v);
         }},
        {"external_endpoint", [](ServiceConfig& c, const std::string&, const std::string& v) {
             c.external_endpoint = v;
         }},
        {"external_timeout", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.external_timeout = parse_number<double>(k, v);
         }},
        {"embedding_endpoint", [](ServiceConfig& c, const std::string&, const std::string& v) {
             c.embedding_endpoint = v;
         }},
        {"embedding_timeout", [](ServiceConfig& c, const std::string& k, const std::string& v) {
             c.embedding_timeout = parse_number<double>(k, v);
         }},
    };
    return table;
}

}  // namespace

EngineConfig ServiceConfig::engine() const {
    EngineConfig e;
    e.variant = variant;
    e.max_questions = max_questions;
    e.margin_threshold = margin_threshold;
    e.seed = seed;
    e.emote_mode = emote_mode;
    e.temperature = temperature;
    return e;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : setters()) out.push_back(k);
        return out;
    }();
    return keys;
}

void set_config_value(ServiceConfig& config, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) {
        throw LoadError("unknown config key '" + key + "'");
    }
    it->second(config, key, value);
}

void apply_config_json(ServiceConfig& config, const Json& object) {
    if (!object.is_object()) {
        throw LoadError("config file must contain a JSON object");
    }
    for (const auto& [key, value] : object.items()) {
        if (value.is_null()) continue;
        set_config_value(config, key, value.is_string() ? value.get<std::string>() : value.dump());
    }
}

void apply_config_file(ServiceConfig& config, const std::string& path) {
    auto in = open_input(path);
    try {
        apply_config_json(config, Json::parse(in));
    } catch (const Json::exception& e) {
        throw LoadError("config file " + path + ": " + e.what());
    }
}

std::vector<std::string> apply_environment(ServiceConfig& config, const EnvLookup& lookup) {
    std::vector<std::string> applied;
    for (const auto& key : config_keys()) {
        std::string name = "ANAMNESIS_";
        for (char ch : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (const char* v = lookup(name.c_str()); v != nullptr) {
            set_config_value(config, key, v);
            applied.push_back(name);
        }
    }
    return applied;
}

OrderedJson config_to_json(const ServiceConfig& c) {
    return OrderedJson{{"host", c.host},
                       {"port", c.port},
                       {"kb", c.kb},
                       {"bank", c.bank},
                       {"lexicon", c.lexicon},
                       {"model", c.model},
                       {"journal", c.journal},
                       {"ratings", c.ratings},
                       {"variant", to_string(c.variant)},
                       {"seed", c.seed},
                       {"pair_seed", c.pair_seed},
                       {"max_questions", c.max_questions},
                       {"margin_threshold", c.margin_threshold},
                       {"emote_mode", to_string(c.emote_mode)},
                       {"temperature", c.temperature},
                       {"consistency_threshold", c.consistency_threshold},
                       {"external_endpoint", c.external_endpoint},
                       {"external_timeout", c.external_timeout},
                       {"embedding_endpoint", c.embedding_endpoint},
                       {"embedding_timeout", c.embedding_timeout}};
}

}  // namespace anamnesis
