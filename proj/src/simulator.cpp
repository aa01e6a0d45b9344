#include "anamnesis/simulator.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <map>
#include <set>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"

namespace anamnesis {

std::vector<std::string> default_age_bands() {
    return {"child (2 to 11 yrs)", "adolescent (12 to 17 yrs)", "young adult (18 to 40 yrs)",
            "middle aged (41 to 64 yrs)", "senior (65 yrs and over)"};
}

std::vector<std::string> default_genders() { return {"male", "female"}; }

void SimulatorConfig::validate() const {
    if (min_findings < 1 || min_findings > max_findings) {
        throw ContractError("simulator requires 1 <= min_findings <= max_findings");
    }
    if (!(p_absent > 0.0 && p_absent < 1.0)) {
        throw ContractError("simulator requires 0 < p_absent < 1");
    }
    if (age_bands.empty() || genders.empty()) {
        throw ContractError("simulator demographic vocabularies must be nonempty");
    }
    if (!(temperature > 0.0)) {
        throw ContractError("simulator temperature must be positive");
    }
}

double SimulationStats::acceptance_rate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
}

double SimulationStats::absent_rate() const {
    return assertions_sampled == 0 ? 0.0
                                   : static_cast<double>(absent_sampled) / static_cast<double>(assertions_sampled);
}

std::optional<ClinicalCase> simulate_case(const KnowledgeBase& kb, const SimulatorConfig& config, Rng& rng,
                                          SimulationStats* stats, SimulationTrace* trace) {
    config.validate();
    std::vector<const Finding*> complaints;
    for (const auto& f : kb.findings()) {
        if (!f.is_demographic) {
            complaints.push_back(&f);
        }
    }
    if (complaints.empty() || kb.diseases().empty()) {
        throw ContractError("simulation needs at least one disease and one non-demographic finding");
    }

    ClinicalCase c;
    c.age_band = config.age_bands[rng.uniform_index(config.age_bands.size())];
    c.gender = config.genders[rng.uniform_index(config.genders.size())];
    c.rfe = complaints[rng.uniform_index(complaints.size())]->id;
    const int target_length = static_cast<int>(rng.uniform_int(config.min_findings, config.max_findings));

    SimulationTrace local;
    local.age_band = c.age_band;
    local.gender = c.gender;
    local.rfe = c.rfe;
    local.target_length = target_length;

    std::vector<Assertion> assertions{{c.rfe, Polarity::present}};
    double current_margin = 0.0;
    while (true) {
        const DifferentialDiagnosis dd = differential(kb, assertions, config.temperature);
        current_margin = margin(dd);
        if (static_cast<int>(c.findings.size()) >= target_length) {
            local.stop = SimulationTrace::Stop::length;
            break;
        }
        if (current_margin >= config.margin_threshold) {
            local.stop = SimulationTrace::Stop::margin;
            break;
        }
        const auto next = next_finding(kb, assertions, dd);
        if (!next) {
            local.stop = SimulationTrace::Stop::exhausted;
            break;
        }
        const Polarity polarity = rng.uniform01() < config.p_absent ? Polarity::absent : Polarity::present;
        if (stats != nullptr) {
            ++stats->assertions_sampled;
            if (polarity == Polarity::absent) {
                ++stats->absent_sampled;
            }
        }
        local.steps.push_back({*next, polarity, current_margin});
        c.findings.push_back({*next, polarity});
        assertions.push_back({*next, polarity});
    }

    c.final_margin = current_margin;
    local.final_margin = current_margin;
    local.accepted = current_margin >= config.margin_threshold;
    if (stats != nullptr) {
        ++stats->attempts;
        ++(local.accepted ? stats->accepted : stats->rejected);
    }
    if (trace != nullptr) {
        *trace = std::move(local);
    }
    if (current_margin < config.margin_threshold) {
        return std::nullopt;
    }
    return c;
}

std::vector<ClinicalCase> simulate_dataset(const KnowledgeBase& kb, const SimulatorConfig& config,
                                           std::size_t n_accepted, SimulationStats* stats) {
    if (n_accepted < 1) {
        throw ContractError("simulate_dataset requires n_accepted >= 1");
    }
    SimulationStats local;
    SimulationStats& s = stats != nullptr ? *stats : local;
    std::vector<ClinicalCase> cases;
    for (std::size_t attempt = 0; cases.size() < n_accepted; ++attempt) {
        if (attempt >= config.attempt_cap) {
            throw ExhaustionError("accepted " + std::to_string(cases.size()) + " of " +
                                  std::to_string(n_accepted) + " cases after " + std::to_string(attempt) +
                                  " attempts (margin threshold " + std::to_string(config.margin_threshold) + ")");
        }
        Rng rng(Rng::derive(config.seed, attempt));
        if (auto c = simulate_case(kb, config, rng, &s)) {
            c->id = static_cast<int>(cases.size());
            cases.push_back(std::move(*c));
        }
    }
    return cases;
}

std::vector<Assertion> all_assertions(const ClinicalCase& c) {
    std::vector<Assertion> out{{c.rfe, Polarity::present}};
    out.insert(out.end(), c.findings.begin(), c.findings.end());
    return out;
}

std::vector<std::string> validate_case(const KnowledgeBase& kb, const ClinicalCase& c, int max_findings) {
    std::vector<std::string> violations;
    if (kb.find_finding(c.rfe) == nullptr) {
        violations.push_back("rfe '" + c.rfe + "' is not a KB finding");
    }
    if (static_cast<int>(c.findings.size()) > max_findings) {
        violations.push_back("case has " + std::to_string(c.findings.size()) + " findings, more than " +
                             std::to_string(max_findings));
    }
    std::set<std::string> seen{c.rfe};
    std::map<std::string, std::vector<std::string>> present_by_group;
    if (const Finding* rfe = kb.find_finding(c.rfe); rfe != nullptr && rfe->exclusion_group) {
        present_by_group[*rfe->exclusion_group].push_back(rfe->id);
    }
    for (const auto& a : c.findings) {
        const Finding* f = kb.find_finding(a.finding_id);
        if (f == nullptr) {
            violations.push_back("unknown finding '" + a.finding_id + "'");
            continue;
        }
        if (!seen.insert(a.finding_id).second) {
            violations.push_back("finding '" + a.finding_id + "' appears more than once");
            continue;
        }
        if (a.polarity == Polarity::present && f->exclusion_group) {
            present_by_group[*f->exclusion_group].push_back(f->id);
        }
    }
    for (const auto& [group, members] : present_by_group) {
        if (members.size() > 1) {
            std::string list;
            for (const auto& m : members) {
                list += (list.empty() ? "" : ", ") + m;
            }
            violations.push_back("exclusion group '" + group + "' has several present findings: " + list);
        }
    }
    return violations;
}

namespace {

std::string tagged(const std::string& id, Polarity p) { return id + polarity_suffix(p); }

Assertion untag(const std::string& text, std::size_t line) {
    if (text.size() < 2 || (text.back() != '+' && text.back() != '-')) {
        throw LoadError("line " + std::to_string(line) + ": finding '" + text + "' lacks a +/- suffix");
    }
    return {text.substr(0, text.size() - 1), text.back() == '+' ? Polarity::present : Polarity::absent};
}

std::string single(const Json& r, const char* field, std::size_t line) {
    auto it = r.find(field);
    if (it == r.end() || !it->is_array() || it->size() != 1 || !(*it)[0].is_string()) {
        throw LoadError("line " + std::to_string(line) + ": field '" + field + "' must be a one-string array");
    }
    return (*it)[0].get<std::string>();
}

}  // namespace

std::string case_to_json(const ClinicalCase& c) {
    OrderedJson r;
    r["id"] = c.id;
    r["age"] = OrderedJson::array({c.age_band});
    r["gender"] = OrderedJson::array({c.gender});
    r["RFE"] = OrderedJson::array({tagged(c.rfe, Polarity::present)});
    OrderedJson findings = OrderedJson::array();
    for (const auto& a : c.findings) {
        findings.push_back(tagged(a.finding_id, a.polarity));
    }
    r["findings"] = std::move(findings);
    if (std::isfinite(c.final_margin)) {
        r["final_margin"] = c.final_margin;
    } else {
        r["final_margin"] = "inf";
    }
    return r.dump();
}

ClinicalCase case_from_json(std::string_view line_text, std::size_t line) {
    Json r;
    try {
        r = Json::parse(line_text);
    } catch (const Json::parse_error& e) {
        throw LoadError("line " + std::to_string(line) + ": malformed case record: " + e.what());
    }
    ClinicalCase c;
    c.id = static_cast<int>(require_integer(r, "id", line));
    c.age_band = single(r, "age", line);
    c.gender = single(r, "gender", line);
    Assertion rfe = untag(single(r, "RFE", line), line);
    if (rfe.polarity != Polarity::present) {
        throw LoadError("line " + std::to_string(line) + ": RFE must be asserted present");
    }
    c.rfe = rfe.finding_id;
    auto it = r.find("findings");
    if (it == r.end() || !it->is_array()) {
        throw LoadError("line " + std::to_string(line) + ": field 'findings' must be an array");
    }
    for (const auto& item : *it) {
        if (!item.is_string()) {
            throw LoadError("line " + std::to_string(line) + ": findings entries must be strings");
        }
        c.findings.push_back(untag(item.get<std::string>(), line));
    }
    auto m = r.find("final_margin");
    if (m != r.end() && m->is_number()) {
        c.final_margin = m->get<double>();
    } else if (m != r.end() && m->is_string() && m->get<std::string>() == "inf") {
        c.final_margin = kInfiniteMargin;
    }
    return c;
}

void write_cases(const std::vector<ClinicalCase>& cases, std::ostream& out) {
    for (const auto& c : cases) {
        out << case_to_json(c) << '\n';
    }
}

std::vector<ClinicalCase> read_cases(std::istream& in) {
    std::vector<ClinicalCase> cases;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        cases.push_back(case_from_json(line, number));
    }
    return cases;
}

}  // namespace anamnesis
