#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "anamnesis/kb.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

struct ClinicalCase {
    int id = 0;
    std::string age_band;
    std::string gender;
    std::string rfe;                    // finding id, always present
    std::vector<Assertion> findings;    // in the order they were asked, rfe excluded
    double final_margin = 0.0;

    bool operator==(const ClinicalCase&) const = default;
};

std::vector<std::string> default_age_bands();
std::vector<std::string> default_genders();

struct SimulatorConfig {
    double margin_threshold = 20.0;
    int min_findings = 5;
    int max_findings = 20;
    double p_absent = 0.6;
    std::uint64_t seed = 0;
    double temperature = kDefaultTemperature;
    std::size_t attempt_cap = 100000;
    std::vector<std::string> age_bands = default_age_bands();
    std::vector<std::string> genders = default_genders();

    void validate() const;  // throws ContractError
};

struct SimulationStats {
    std::size_t attempts = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t assertions_sampled = 0;
    std::size_t absent_sampled = 0;

    double acceptance_rate() const;
    double absent_rate() const;
};

// Step-by-step record of one simulate_case call.
struct SimulationTrace {
    std::string age_band;
    std::string gender;
    std::string rfe;
    int target_length = 0;
    struct Step {
        std::string finding_id;
        Polarity polarity;
        double margin_before;
    };
    std::vector<Step> steps;
    enum class Stop { length, margin, exhausted } stop = Stop::length;
    double final_margin = 0.0;
    bool accepted = false;
};

// Draw order on rng: age band index, gender index, rfe index (over
// non-demographic findings in KB order), target length L, then one
// uniform01 per sampled finding (absent iff draw < p_absent).
// Returns nullopt when the final margin is below the threshold.
std::optional<ClinicalCase> simulate_case(const KnowledgeBase& kb, const SimulatorConfig& config, Rng& rng,
                                          SimulationStats* stats = nullptr, SimulationTrace* trace = nullptr);

// Attempt i draws from Rng(Rng::derive(config.seed, i)); accepted cases get
// ids 0, 1, 2, ... in attempt order. Throws ExhaustionError when the attempt
// cap is hit before n_accepted cases are found.
std::vector<ClinicalCase> simulate_dataset(const KnowledgeBase& kb, const SimulatorConfig& config,
                                           std::size_t n_accepted, SimulationStats* stats = nullptr);

// Empty iff the case satisfies every ClinicalCase invariant against kb.
std::vector<std::string> validate_case(const KnowledgeBase& kb, const ClinicalCase& c, int max_findings = 20);

std::vector<Assertion> all_assertions(const ClinicalCase& c);

// One JSON object per line:
// {"id":0,"age":[band],"gender":[g],"RFE":["<id>+"],"findings":["<id>+"|"<id>-",...],"final_margin":m}
std::string case_to_json(const ClinicalCase& c);
ClinicalCase case_from_json(std::string_view line, std::size_t line_number = 0);
void write_cases(const std::vector<ClinicalCase>& cases, std::ostream& out);
std::vector<ClinicalCase> read_cases(std::istream& in);

}  // namespace anamnesis
