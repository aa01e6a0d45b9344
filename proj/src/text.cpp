#include "anamnesis/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace anamnesis {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_sentence_delimiter(char c) { return c == '.' || c == '!' || c == '?' || c == ';'; }

}  // namespace

std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && is_space(text[begin])) {
        ++begin;
    }
    while (end > begin && is_space(text[end - 1])) {
        --end;
    }
    return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string normalize_for_match(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        // Non-ASCII bytes are kept so UTF-8 text is not silently erased.
        if (!std::isalnum(c) && c < 0x80) {
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t substitution = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitution});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

int fuzzy_score(std::string_view a, std::string_view b) {
    const std::string na = normalize_for_match(a);
    const std::string nb = normalize_for_match(b);
    const std::size_t longest = std::max(na.size(), nb.size());
    if (longest == 0) {
        return 100;
    }
    const double distance = static_cast<double>(levenshtein(na, nb));
    return static_cast<int>(std::lround(100.0 * (1.0 - distance / static_cast<double>(longest))));
}

std::vector<Segment> split_on_punctuation(std::string_view text) {
    std::vector<Segment> segments;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_sentence_delimiter(text[i])) {
            ++i;
            continue;
        }
        while (i < text.size() && is_sentence_delimiter(text[i])) {
            ++i;
        }
        segments.push_back({std::string(text.substr(start, i - start)), start});
        start = i;
    }
    if (start < text.size()) {
        segments.push_back({std::string(text.substr(start)), start});
    }
    return segments;
}

}  // namespace anamnesis
