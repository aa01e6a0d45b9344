#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace anamnesis {

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

// Lowercase, drop every character that is neither alphanumeric nor
// whitespace, collapse whitespace runs to one space, trim.
std::string normalize_for_match(std::string_view text);

std::size_t levenshtein(std::string_view a, std::string_view b);

// round(100 * (1 - lev(a', b') / max(|a'|, |b'|))) over normalized inputs,
// rounding half away from zero. Two empty inputs score 100.
int fuzzy_score(std::string_view a, std::string_view b);

struct Segment {
    std::string text;
    std::size_t offset = 0;  // byte offset of text within the source

    bool operator==(const Segment&) const = default;
};

// Splits after each run of sentence punctuation {. ! ? ;}. The delimiters
// stay with the segment they close; whitespace after a delimiter belongs to
// the next segment, so concatenating all segments reproduces the input.
std::vector<Segment> split_on_punctuation(std::string_view text);

}  // namespace anamnesis
