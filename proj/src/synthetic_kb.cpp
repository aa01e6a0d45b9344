#include "anamnesis/synthetic_kb.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "anamnesis/error.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

KnowledgeBase make_synthetic_kb(const SyntheticKbSpec& spec, std::uint64_t seed) {
    if (spec.diseases < 1 || spec.specific_per_disease < 1 || spec.shared_findings < 0 || spec.exclusion_pairs < 0) {
        throw ContractError("synthetic KB spec has a negative or empty dimension");
    }
    if (spec.diseases < 2 && spec.exclusion_pairs > 0) {
        throw ContractError("exclusion pairs need at least two diseases");
    }
    Rng rng(seed);
    std::vector<Disease> diseases;
    std::vector<Finding> findings;
    std::vector<Association> associations;

    for (int d = 0; d < spec.diseases; ++d) {
        diseases.push_back({"d" + std::to_string(d), "synthetic disease " + std::to_string(d)});
    }
    auto add_finding = [&](std::string id, std::string name) {
        findings.push_back({std::move(id), name, "Do you have " + name + "?", false, std::nullopt});
    };
    for (int d = 0; d < spec.diseases; ++d) {
        for (int j = 0; j < spec.specific_per_disease; ++j) {
            const std::string id = "s" + std::to_string(d) + "_" + std::to_string(j);
            add_finding(id, "specific sign " + std::to_string(d) + "." + std::to_string(j));
            associations.push_back({id, diseases[d].id, static_cast<int>(rng.uniform_int(3, 5)),
                                    static_cast<int>(rng.uniform_int(2, 5))});
            if (spec.diseases > 1 && rng.bernoulli(0.2)) {
                std::size_t other = rng.uniform_index(static_cast<std::size_t>(spec.diseases - 1));
                if (static_cast<int>(other) >= d) {
                    ++other;
                }
                associations.push_back({id, diseases[other].id, 1, static_cast<int>(rng.uniform_int(1, 2))});
            }
        }
    }
    for (int j = 0; j < spec.shared_findings; ++j) {
        const std::string id = "c" + std::to_string(j);
        add_finding(id, "common complaint " + std::to_string(j));
        const int links = static_cast<int>(rng.uniform_int(1, std::min(3, spec.diseases)));
        std::vector<bool> used(static_cast<std::size_t>(spec.diseases), false);
        for (int k = 0; k < links; ++k) {
            std::size_t d = rng.uniform_index(static_cast<std::size_t>(spec.diseases));
            if (used[d]) {
                continue;
            }
            used[d] = true;
            associations.push_back({id, diseases[d].id, static_cast<int>(rng.uniform_int(1, 3)),
                                    static_cast<int>(rng.uniform_int(1, 4))});
        }
    }
    for (int g = 0; g < spec.exclusion_pairs; ++g) {
        // Pair the last specific findings of two different diseases.
        const int j = spec.specific_per_disease - 1 - (g / spec.diseases) % spec.specific_per_disease;
        const int a = g % spec.diseases;
        const int b = (g + 1) % spec.diseases;
        const std::string group = "x" + std::to_string(g);
        for (int d : {a, b}) {
            auto& f = findings[static_cast<std::size_t>(d * spec.specific_per_disease + j)];
            if (!f.exclusion_group) {
                f.exclusion_group = group;
            }
        }
    }
    // Drop groups that ended up with a single member.
    std::map<std::string, int> sizes;
    for (const auto& f : findings) {
        if (f.exclusion_group) {
            ++sizes[*f.exclusion_group];
        }
    }
    for (auto& f : findings) {
        if (f.exclusion_group && sizes[*f.exclusion_group] < 2) {
            f.exclusion_group.reset();
        }
    }
    return KnowledgeBase(std::move(diseases), std::move(findings), std::move(associations));
}

}  // namespace anamnesis
