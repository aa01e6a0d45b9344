#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "anamnesis/emote.hpp"

namespace anamnesis {

// Keyword-coded emote corpus whose labels follow synthetic_emote_oracle:
//   apology     when the target finding is a sensitive topic,
//   empathy     when the patient response voices distress,
//   affirmative when the response confirms,
//   none        otherwise.
// Apology therefore depends on the target finding alone.
std::vector<EmoteDatasetRow> make_synthetic_emote_corpus(const std::array<std::size_t, kEmoteCodeCount>& counts,
                                                         std::uint64_t seed);

EmoteCode synthetic_emote_oracle(const ContextTriple& context);

}  // namespace anamnesis
