#include "anamnesis/paraphrase.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

std::string_view to_string(EntrySource s) {
    switch (s) {
        case EntrySource::expert: return "expert";
        case EntrySource::generated: return "generated";
        case EntrySource::manual: return "manual";
    }
    return "generated";
}

std::string_view to_string(Validation v) {
    switch (v) {
        case Validation::unknown: return "unknown";
        case Validation::consistent: return "consistent";
        case Validation::inconsistent: return "inconsistent";
    }
    return "unknown";
}

EntrySource entry_source_from_string(std::string_view text) {
    if (text == "expert") return EntrySource::expert;
    if (text == "generated") return EntrySource::generated;
    if (text == "manual") return EntrySource::manual;
    throw LoadError("unknown paraphrase source '" + std::string(text) + "'");
}

Validation validation_from_string(std::string_view text) {
    if (text == "unknown") return Validation::unknown;
    if (text == "consistent") return Validation::consistent;
    if (text == "inconsistent") return Validation::inconsistent;
    throw LoadError("unknown validation label '" + std::string(text) + "'");
}

std::string normalize_question(std::string_view text) {
    std::string out = trim(text);
    while (!out.empty() && (out.back() == '?' || std::isspace(static_cast<unsigned char>(out.back())))) {
        out.pop_back();
    }
    if (out.empty()) {
        throw ContractError("question text is empty");
    }
    out.push_back('?');
    return out;
}

ParaphraseBank ParaphraseBank::seed_from_kb(const KnowledgeBase& kb) {
    ParaphraseBank bank;
    for (const auto& f : kb.findings()) {
        bank.add({f.id, f.expert_question, EntrySource::expert, Validation::consistent, std::nullopt});
    }
    return bank;
}

bool ParaphraseBank::add(ParaphraseEntry entry) {
    if (entry.finding_id.empty()) {
        throw ContractError("paraphrase entry without a finding id");
    }
    entry.text = normalize_question(entry.text);
    if (entry.source == EntrySource::expert) {
        entry.validated = Validation::consistent;
    }
    auto& list = by_finding_[entry.finding_id];
    const bool duplicate =
        std::any_of(list.begin(), list.end(), [&](const auto& e) { return e.text == entry.text; });
    if (duplicate) {
        return false;
    }
    list.push_back(std::move(entry));
    return true;
}

void ParaphraseBank::record_validation(std::string_view finding_id, std::string_view text, Validation label,
                                       std::optional<std::string> note) {
    auto it = by_finding_.find(finding_id);
    const std::string wanted = normalize_question(text);
    if (it != by_finding_.end()) {
        for (auto& e : it->second) {
            if (e.text == wanted) {
                if (e.source != EntrySource::expert) {
                    e.validated = label;
                }
                if (note) {
                    e.note = std::move(note);
                }
                return;
            }
        }
    }
    throw NotFoundError("no paraphrase '" + wanted + "' for finding '" + std::string(finding_id) + "'");
}

bool ParaphraseBank::contains(std::string_view finding_id, std::string_view text) const {
    auto it = by_finding_.find(finding_id);
    if (it == by_finding_.end()) {
        return false;
    }
    std::string wanted;
    try {
        wanted = normalize_question(text);
    } catch (const ContractError&) {
        return false;
    }
    return std::any_of(it->second.begin(), it->second.end(), [&](const auto& e) { return e.text == wanted; });
}

bool ParaphraseBank::has_finding(std::string_view finding_id) const {
    return by_finding_.find(finding_id) != by_finding_.end();
}

std::vector<std::string> ParaphraseBank::serving_pool(std::string_view finding_id) const {
    std::vector<std::string> pool;
    auto it = by_finding_.find(finding_id);
    if (it == by_finding_.end()) {
        return pool;
    }
    for (const auto& e : it->second) {
        if (e.source == EntrySource::expert) {
            pool.push_back(e.text);
        }
    }
    for (const auto& e : it->second) {
        if (e.source != EntrySource::expert && e.validated == Validation::consistent) {
            pool.push_back(e.text);
        }
    }
    return pool;
}

const std::string& ParaphraseBank::expert_question(std::string_view finding_id) const {
    auto it = by_finding_.find(finding_id);
    if (it != by_finding_.end()) {
        for (const auto& e : it->second) {
            if (e.source == EntrySource::expert) {
                return e.text;
            }
        }
    }
    throw NotFoundError("no expert question for finding '" + std::string(finding_id) + "'");
}

std::vector<ParaphraseEntry> ParaphraseBank::entries() const {
    std::vector<ParaphraseEntry> out;
    for (const auto& [id, list] : by_finding_) {
        out.insert(out.end(), list.begin(), list.end());
    }
    return out;
}

const std::vector<ParaphraseEntry>& ParaphraseBank::entries_for(std::string_view finding_id) const {
    static const std::vector<ParaphraseEntry> empty;
    auto it = by_finding_.find(finding_id);
    return it == by_finding_.end() ? empty : it->second;
}

std::size_t ParaphraseBank::size() const {
    std::size_t n = 0;
    for (const auto& [id, list] : by_finding_) {
        n += list.size();
    }
    return n;
}

void save_bank(const ParaphraseBank& bank, std::ostream& out) {
    for (const auto& e : bank.entries()) {
        OrderedJson r{{"finding_id", e.finding_id},
                      {"text", e.text},
                      {"source", to_string(e.source)},
                      {"validated", to_string(e.validated)},
                      {"note", e.note ? OrderedJson(*e.note) : OrderedJson(nullptr)}};
        out << r.dump() << '\n';
    }
}

ParaphraseBank load_bank(std::istream& in) {
    ParaphraseBank bank;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        ParaphraseEntry e;
        e.finding_id = require_string(r, "finding_id", line);
        e.text = require_string(r, "text", line);
        e.source = entry_source_from_string(optional_string(r, "source", "generated"));
        e.validated = validation_from_string(optional_string(r, "validated", "unknown"));
        if (auto note = r.find("note"); note != r.end() && note->is_string()) {
            e.note = note->get<std::string>();
        }
        try {
            if (!bank.add(std::move(e))) {
                throw LoadError("line " + std::to_string(line) + ": duplicate paraphrase entry");
            }
        } catch (const ContractError& err) {
            throw LoadError("line " + std::to_string(line) + ": " + err.what());
        }
    });
    return bank;
}

double ValidationReport::consistency_rate() const {
    const std::size_t labelled = consistent + inconsistent;
    return labelled == 0 ? 0.0 : static_cast<double>(consistent) / static_cast<double>(labelled);
}

ValidationReport validation_report(const ParaphraseBank& bank) {
    ValidationReport report;
    for (const auto& e : bank.entries()) {
        if (e.source == EntrySource::expert) {
            continue;
        }
        switch (e.validated) {
            case Validation::consistent: ++report.consistent; break;
            case Validation::inconsistent: ++report.inconsistent; break;
            case Validation::unknown: ++report.unlabelled; break;
        }
    }
    return report;
}

namespace {

constexpr std::array<const char*, 14> kBodyParts = {"back", "chest", "neck",     "knee",  "ear",   "throat", "stomach",
                                                    "head", "shoulder", "hip", "ankle", "wrist", "elbow",  "foot"};

struct Adjective {
    const char* noun;
    const char* adjective;
};

constexpr std::array<Adjective, 6> kAdjectives = {{{"anxiety", "anxious"},
                                                   {"fatigue", "tired"},
                                                   {"nausea", "nauseous"},
                                                   {"dizziness", "dizzy"},
                                                   {"weakness", "weak"},
                                                   {"sleepiness", "sleepy"}}};

// "diarrhea, chronic" reads better as "chronic diarrhea".
std::string readable_name(const std::string& name) {
    const auto comma = name.find(", ");
    if (comma == std::string::npos) {
        return name;
    }
    const std::string head = name.substr(0, comma);
    const std::string qualifier = name.substr(comma + 2);
    if (qualifier.find(' ') != std::string::npos) {
        return name;
    }
    return qualifier + " " + head;
}

}  // namespace

std::vector<std::string> RuleBasedParaphraser::propose(const Finding& finding, std::size_t /*k*/, Rng& /*rng*/) {
    const std::string name = to_lower(trim(finding.name));
    std::vector<std::string> out;
    for (const char* part : kBodyParts) {
        if (name == std::string(part) + " pain") {
            const std::string p(part);
            out = {"Is your " + p + " hurting?", "Does your " + p + " hurt?", "Do you feel pain in your " + p + "?",
                   "Are you experiencing pain in your " + p + "?"};
            return out;
        }
    }
    for (const auto& adj : kAdjectives) {
        if (name == adj.noun) {
            const std::string a(adj.adjective);
            out = {"Are you " + a + "?", "Do you have " + name + "?", "Have you been experiencing any " + name + "?",
                   "Are you feeling nervous or " + a + "?"};
            if (name != "anxiety") {
                out.back() = "Have you been feeling " + a + " lately?";
            }
            return out;
        }
    }
    const std::string readable = readable_name(name);
    return {"Do you have " + readable + "?", "Have you been experiencing any " + readable + "?",
            "Have you noticed any " + readable + " lately?", "Are you having " + readable + "?"};
}

std::vector<std::string> generate_candidates(CandidateGenerator& generator, const ParaphraseBank& bank,
                                             const Finding& finding, std::size_t k, Rng& rng,
                                             std::size_t retry_budget) {
    if (k < 1) {
        throw ContractError("generate_candidates requires k >= 1");
    }
    std::vector<std::string> chosen;
    std::set<std::string> seen;
    std::size_t failures = 0;
    while (chosen.size() < k) {
        bool progressed = false;
        for (const auto& raw : generator.propose(finding, k - chosen.size(), rng)) {
            std::string text;
            try {
                text = normalize_question(raw);
            } catch (const ContractError&) {
                continue;
            }
            if (bank.contains(finding.id, text) || !seen.insert(text).second) {
                continue;
            }
            chosen.push_back(std::move(text));
            progressed = true;
            if (chosen.size() == k) {
                break;
            }
        }
        if (!progressed && ++failures >= retry_budget) {
            throw GenerationError("generator produced no new paraphrase for '" + finding.id + "' in " +
                                  std::to_string(retry_budget) + " attempts (" + std::to_string(chosen.size()) +
                                  " of " + std::to_string(k) + " collected)");
        }
    }
    return chosen;
}

std::string sample_question(const ParaphraseBank& bank, std::string_view finding_id, Rng& rng, bool diversity) {
    if (!bank.has_finding(finding_id)) {
        throw NotFoundError("no paraphrases for finding '" + std::string(finding_id) + "'");
    }
    if (!diversity) {
        return bank.expert_question(finding_id);
    }
    const auto pool = bank.serving_pool(finding_id);
    if (pool.empty()) {
        throw NotFoundError("empty serving pool for finding '" + std::string(finding_id) + "'");
    }
    return pool[rng.uniform_index(pool.size())];
}

}  // namespace anamnesis
