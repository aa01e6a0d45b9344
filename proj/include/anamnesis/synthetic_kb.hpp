#pragma once

#include <cstdint>

#include "anamnesis/kb.hpp"

namespace anamnesis {

// Shape of a randomly generated toy-scale knowledge base. Each disease gets
// its own block of strongly evocative findings, a pool of findings is shared
// loosely across diseases, and some specific findings are paired into
// exclusion groups across diseases.
struct SyntheticKbSpec {
    int diseases = 6;
    int specific_per_disease = 6;
    int shared_findings = 10;
    int exclusion_pairs = 3;
};

KnowledgeBase make_synthetic_kb(const SyntheticKbSpec& spec, std::uint64_t seed);

}  // namespace anamnesis
