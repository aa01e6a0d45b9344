#include "anamnesis/kb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

std::string_view to_string(Polarity p) { return p == Polarity::present ? "present" : "absent"; }

Polarity polarity_from_string(std::string_view text) {
    if (text == "present") {
        return Polarity::present;
    }
    if (text == "absent") {
        return Polarity::absent;
    }
    throw LoadError("unknown polarity '" + std::string(text) + "'");
}

char polarity_suffix(Polarity p) { return p == Polarity::present ? '+' : '-'; }

KnowledgeBase::KnowledgeBase(std::vector<Disease> diseases, std::vector<Finding> findings,
                             std::vector<Association> associations)
    : diseases_(std::move(diseases)), findings_(std::move(findings)), associations_(std::move(associations)) {
    for (std::size_t i = 0; i < diseases_.size(); ++i) {
        const auto& d = diseases_[i];
        if (d.id.empty()) {
            throw LoadError("disease #" + std::to_string(i) + " has an empty id");
        }
        if (!disease_ix_.emplace(d.id, i).second) {
            throw LoadError("duplicate disease id '" + d.id + "'");
        }
    }
    for (std::size_t i = 0; i < findings_.size(); ++i) {
        const auto& f = findings_[i];
        if (f.id.empty()) {
            throw LoadError("finding #" + std::to_string(i) + " has an empty id");
        }
        if (trim(f.expert_question).empty()) {
            throw LoadError("finding '" + f.id + "' has an empty expert_question");
        }
        if (!finding_ix_.emplace(f.id, i).second) {
            throw LoadError("duplicate finding id '" + f.id + "'");
        }
        if (f.exclusion_group) {
            groups_[*f.exclusion_group].push_back(i);
        }
    }
    for (const auto& [group, members] : groups_) {
        if (members.size() < 2) {
            throw IntegrityError("exclusion group '" + group + "' has fewer than two findings");
        }
    }

    by_finding_.resize(findings_.size());
    by_disease_.resize(diseases_.size());
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& a : associations_) {
        const std::string label = "assoc(" + a.finding_id + "," + a.disease_id + ")";
        if (a.es < 0 || a.es > 5) {
            throw LoadError(label + ": es=" + std::to_string(a.es) + " outside 0..5");
        }
        if (a.tf < 1 || a.tf > 5) {
            throw LoadError(label + ": tf=" + std::to_string(a.tf) + " outside 1..5");
        }
        auto fi = finding_ix_.find(a.finding_id);
        if (fi == finding_ix_.end()) {
            throw IntegrityError(label + ": unknown finding '" + a.finding_id + "'");
        }
        auto di = disease_ix_.find(a.disease_id);
        if (di == disease_ix_.end()) {
            throw IntegrityError(label + ": unknown disease '" + a.disease_id + "'");
        }
        if (!seen.emplace(a.finding_id, a.disease_id).second) {
            throw LoadError(label + ": duplicate finding-disease pair");
        }
        by_finding_[fi->second].push_back({di->second, a.es, a.tf});
        by_disease_[di->second].push_back({fi->second, a.es, a.tf});
    }
}

const Finding* KnowledgeBase::find_finding(std::string_view id) const {
    auto it = finding_ix_.find(std::string(id));
    return it == finding_ix_.end() ? nullptr : &findings_[it->second];
}

const Disease* KnowledgeBase::find_disease(std::string_view id) const {
    auto it = disease_ix_.find(std::string(id));
    return it == disease_ix_.end() ? nullptr : &diseases_[it->second];
}

const Finding& KnowledgeBase::finding(std::string_view id) const {
    const Finding* f = find_finding(id);
    if (f == nullptr) {
        throw NotFoundError("unknown finding '" + std::string(id) + "'");
    }
    return *f;
}

std::optional<std::size_t> KnowledgeBase::finding_index(std::string_view id) const {
    auto it = finding_ix_.find(std::string(id));
    if (it == finding_ix_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> KnowledgeBase::disease_index(std::string_view id) const {
    auto it = disease_ix_.find(std::string(id));
    if (it == disease_ix_.end()) {
        return std::nullopt;
    }
    return it->second;
}

int KnowledgeBase::es(std::string_view finding_id, std::string_view disease_id) const {
    auto fi = finding_index(finding_id);
    auto di = disease_index(disease_id);
    if (!fi || !di) {
        return 0;
    }
    for (const auto& link : by_finding_[*fi]) {
        if (link.index == *di) {
            return link.es;
        }
    }
    return 0;
}

int KnowledgeBase::tf(std::string_view finding_id, std::string_view disease_id) const {
    auto fi = finding_index(finding_id);
    auto di = disease_index(disease_id);
    if (!fi || !di) {
        return 0;
    }
    for (const auto& link : by_finding_[*fi]) {
        if (link.index == *di) {
            return link.tf;
        }
    }
    return 0;
}

std::vector<std::string> KnowledgeBase::exclusion_partners(std::string_view finding_id) const {
    std::vector<std::string> out;
    const Finding* f = find_finding(finding_id);
    if (f == nullptr || !f->exclusion_group) {
        return out;
    }
    for (std::size_t member : groups_.at(*f->exclusion_group)) {
        if (findings_[member].id != f->id) {
            out.push_back(findings_[member].id);
        }
    }
    return out;
}

KnowledgeBase load_kb(std::istream& in) {
    std::vector<Disease> diseases;
    std::vector<Finding> findings;
    std::vector<Association> associations;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        const std::string kind = require_string(r, "kind", line);
        if (kind == "disease") {
            diseases.push_back({require_string(r, "id", line), require_string(r, "name", line)});
        } else if (kind == "finding") {
            Finding f;
            f.id = require_string(r, "id", line);
            f.name = require_string(r, "name", line);
            f.expert_question = require_string(r, "expert_question", line);
            if (trim(f.expert_question).empty()) {
                throw LoadError("line " + std::to_string(line) + ": finding '" + f.id +
                                "' has an empty expert_question");
            }
            f.is_demographic = optional_bool(r, "is_demographic", false, line);
            std::string group = optional_string(r, "exclusion_group");
            if (!group.empty()) {
                f.exclusion_group = group;
            }
            findings.push_back(std::move(f));
        } else if (kind == "assoc") {
            Association a{require_string(r, "finding_id", line), require_string(r, "disease_id", line),
                          static_cast<int>(require_integer(r, "es", line)),
                          static_cast<int>(require_integer(r, "tf", line))};
            if (a.es < 0 || a.es > 5 || a.tf < 1 || a.tf > 5) {
                throw LoadError("line " + std::to_string(line) + ": assoc(" + a.finding_id + "," +
                                a.disease_id + ") es/tf out of range (es=" + std::to_string(a.es) +
                                ", tf=" + std::to_string(a.tf) + ")");
            }
            associations.push_back(std::move(a));
        } else {
            throw LoadError("line " + std::to_string(line) + ": unknown record kind '" + kind + "'");
        }
    });
    return KnowledgeBase(std::move(diseases), std::move(findings), std::move(associations));
}

KnowledgeBase load_kb_file(const std::string& path) {
    auto in = open_input(path);
    return load_kb(in);
}

void save_kb(const KnowledgeBase& kb, std::ostream& out) {
    for (const auto& d : kb.diseases()) {
        OrderedJson r{{"kind", "disease"}, {"id", d.id}, {"name", d.name}};
        out << r.dump() << '\n';
    }
    for (const auto& f : kb.findings()) {
        OrderedJson r{{"kind", "finding"},
                      {"id", f.id},
                      {"name", f.name},
                      {"expert_question", f.expert_question},
                      {"is_demographic", f.is_demographic}};
        if (f.exclusion_group) {
            r["exclusion_group"] = *f.exclusion_group;
        }
        out << r.dump() << '\n';
    }
    for (const auto& a : kb.associations()) {
        OrderedJson r{{"kind", "assoc"}, {"finding_id", a.finding_id}, {"disease_id", a.disease_id},
                      {"es", a.es}, {"tf", a.tf}};
        out << r.dump() << '\n';
    }
}

double DifferentialDiagnosis::probability_of(std::string_view disease_id) const {
    for (const auto& e : entries) {
        if (e.disease_id == disease_id) {
            return e.probability;
        }
    }
    return 0.0;
}

void check_assertions(const KnowledgeBase& kb, std::span<const Assertion> assertions) {
    std::set<std::string_view> seen;
    for (const auto& a : assertions) {
        if (kb.find_finding(a.finding_id) == nullptr) {
            throw ContractError("assertion on unknown finding '" + a.finding_id + "'");
        }
        if (!seen.insert(a.finding_id).second) {
            throw ContractError("finding '" + a.finding_id + "' asserted more than once");
        }
    }
}

namespace {

std::vector<double> raw_scores(const KnowledgeBase& kb, std::span<const Assertion> assertions) {
    std::vector<double> scores(kb.diseases().size(), 0.0);
    for (const auto& a : assertions) {
        const std::size_t fi = *kb.finding_index(a.finding_id);
        for (const auto& link : kb.finding_links(fi)) {
            scores[link.index] += a.polarity == Polarity::present ? link.es : -link.tf;
        }
    }
    return scores;
}

}  // namespace

double disease_score(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                     std::string_view disease_id) {
    check_assertions(kb, assertions);
    auto di = kb.disease_index(disease_id);
    if (!di) {
        throw NotFoundError("unknown disease '" + std::string(disease_id) + "'");
    }
    return raw_scores(kb, assertions)[*di];
}

DifferentialDiagnosis differential(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                                   double temperature) {
    if (kb.diseases().empty()) {
        throw ContractError("differential over an empty disease set");
    }
    if (!(temperature > 0.0)) {
        throw ContractError("softmax temperature must be positive");
    }
    check_assertions(kb, assertions);
    const std::vector<double> scores = raw_scores(kb, assertions);
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> weights(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weights[i] = std::exp((scores[i] - top) / temperature);
        total += weights[i];
    }
    DifferentialDiagnosis dd;
    dd.entries.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        dd.entries.push_back({kb.diseases()[i].id, scores[i], weights[i] / total});
    }
    std::sort(dd.entries.begin(), dd.entries.end(), [](const auto& a, const auto& b) {
        if (a.raw_score != b.raw_score) {
            return a.raw_score > b.raw_score;
        }
        return a.disease_id < b.disease_id;
    });
    return dd;
}

double margin(const DifferentialDiagnosis& dd) {
    if (dd.entries.empty()) {
        throw ContractError("margin of an empty differential");
    }
    if (dd.entries.size() == 1) {
        return kInfiniteMargin;
    }
    return dd.entries[0].raw_score - dd.entries[1].raw_score;
}

std::set<std::string> excluded_findings(const KnowledgeBase& kb, std::span<const Assertion> assertions) {
    std::set<std::string> asserted;
    for (const auto& a : assertions) {
        asserted.insert(a.finding_id);
    }
    std::set<std::string> out;
    for (const auto& a : assertions) {
        if (a.polarity != Polarity::present) {
            continue;
        }
        for (auto& partner : kb.exclusion_partners(a.finding_id)) {
            if (!asserted.contains(partner)) {
                out.insert(std::move(partner));
            }
        }
    }
    return out;
}

std::optional<std::string> next_finding(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                                        const DifferentialDiagnosis& dd) {
    std::vector<double> p(kb.diseases().size(), 0.0);
    for (const auto& e : dd.entries) {
        if (auto di = kb.disease_index(e.disease_id)) {
            p[*di] = e.probability;
        }
    }
    std::set<std::string_view> asserted;
    for (const auto& a : assertions) {
        asserted.insert(a.finding_id);
    }
    const std::set<std::string> excluded = excluded_findings(kb, assertions);

    const Finding* best = nullptr;
    double best_value = 0.0;
    for (std::size_t fi = 0; fi < kb.findings().size(); ++fi) {
        const Finding& f = kb.findings()[fi];
        if (f.is_demographic || asserted.contains(f.id) || excluded.contains(f.id)) {
            continue;
        }
        double value = 0.0;
        for (const auto& link : kb.finding_links(fi)) {
            value += p[link.index] * link.es;
        }
        if (best == nullptr || value > best_value || (value == best_value && f.id < best->id)) {
            best = &f;
            best_value = value;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return best->id;
}

std::optional<FindingMatch> resolve_finding_name(const KnowledgeBase& kb, std::string_view text, int min_score) {
    const std::string wanted = normalize_for_match(text);
    for (const auto& f : kb.findings()) {
        if (!f.is_demographic && normalize_for_match(f.name) == wanted) {
            return FindingMatch{f.id, 100};
        }
    }
    auto best = suggest_findings(kb, text, 1);
    if (best.empty() || best.front().score < min_score) {
        return std::nullopt;
    }
    return best.front();
}

std::vector<FindingMatch> suggest_findings(const KnowledgeBase& kb, std::string_view text, std::size_t limit) {
    std::vector<FindingMatch> all;
    for (const auto& f : kb.findings()) {
        if (!f.is_demographic) {
            all.push_back({f.id, fuzzy_score(text, f.name)});
        }
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.finding_id < b.finding_id;
    });
    if (all.size() > limit) {
        all.resize(limit);
    }
    return all;
}

}  // namespace anamnesis
