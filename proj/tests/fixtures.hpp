#pragma once

#include <string>

#include "anamnesis/kb.hpp"

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(ANAMNESIS_DATA_DIR) + "/" + name; }

inline const anamnesis::KnowledgeBase& toy_kb() {
    static const anamnesis::KnowledgeBase kb = anamnesis::load_kb_file(data_path("toy.kb"));
    return kb;
}

inline const anamnesis::KnowledgeBase& clinic_kb() {
    static const anamnesis::KnowledgeBase kb = anamnesis::load_kb_file(data_path("clinic.kb"));
    return kb;
}

}  // namespace fixtures
