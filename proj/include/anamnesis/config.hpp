#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "anamnesis/dialogue.hpp"
#include "anamnesis/jsonl.hpp"

namespace anamnesis {

// Service settings. Precedence, lowest first: these defaults, a JSON config
// file, ANAMNESIS_<KEY> environment variables, command-line flags.
struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string kb;
    std::string bank;
    std::string lexicon;
    std::string model;
    std::string journal;
    std::string ratings;
    EngineVariant variant = EngineVariant::medcod;
    std::uint64_t seed = 0;
    std::uint64_t pair_seed = 0;
    int max_questions = 10;
    double margin_threshold = 20.0;
    EmoteMode emote_mode = EmoteMode::classifier;
    double temperature = kDefaultTemperature;
    int consistency_threshold = kDefaultConsistencyThreshold;
    std::string external_endpoint;
    double external_timeout = 5.0;
    std::string embedding_endpoint;
    double embedding_timeout = 10.0;

    EngineConfig engine() const;
};

// Keys accepted in files and (upper-cased, prefixed) in the environment.
const std::vector<std::string>& config_keys();

// Sets one key from its textual form; throws LoadError on unknown keys or bad values.
void set_config_value(ServiceConfig& config, const std::string& key, const std::string& value);

void apply_config_json(ServiceConfig& config, const Json& object);
void apply_config_file(ServiceConfig& config, const std::string& path);

using EnvLookup = std::function<const char*(const char*)>;
// Returns the names of the variables that were applied.
std::vector<std::string> apply_environment(ServiceConfig& config, const EnvLookup& lookup);

OrderedJson config_to_json(const ServiceConfig& config);

}  // namespace anamnesis
