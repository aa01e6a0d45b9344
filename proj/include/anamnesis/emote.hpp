#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anamnesis/rng.hpp"

namespace anamnesis {

enum class EmoteCode { none = 0, affirmative = 1, empathy = 2, apology = 3 };

inline constexpr std::size_t kEmoteCodeCount = 4;
inline constexpr std::array<EmoteCode, kEmoteCodeCount> kEmoteCodes = {EmoteCode::none, EmoteCode::affirmative,
                                                                       EmoteCode::empathy, EmoteCode::apology};

std::string_view to_string(EmoteCode code);
EmoteCode emote_code_from_string(std::string_view text);  // throws LoadError
inline std::size_t index_of(EmoteCode code) { return static_cast<std::size_t>(code); }

struct EmotePhrase {
    EmoteCode code = EmoteCode::affirmative;
    std::string text;

    bool operator==(const EmotePhrase&) const = default;
};

// Phrase as it is spoken before a question: the lexicon text with a closing
// period unless it already ends in sentence punctuation.
std::string surface_form(std::string_view phrase);

class EmoteLexicon {
public:
    EmoteLexicon() = default;
    explicit EmoteLexicon(std::vector<EmotePhrase> phrases);  // throws ContractError on none/empty

    // Surface phrases mined from professional edits, plus the emotive
    // openers seen in generated examples.
    static EmoteLexicon defaults();

    const std::vector<EmotePhrase>& phrases() const { return phrases_; }
    std::vector<std::string> phrases_for(EmoteCode code) const;

    // Exact match after normalize_for_match.
    std::optional<EmoteCode> lookup(std::string_view phrase) const;

    // Length in bytes of the longest leading run of whole sentences of
    // `question` that is a lexicon phrase, 0 when there is none.
    std::size_t leading_phrase_length(std::string_view question) const;

private:
    std::vector<EmotePhrase> phrases_;
};

// Line-delimited {code, phrase}.
EmoteLexicon load_lexicon(std::istream& in);
void save_lexicon(const EmoteLexicon& lexicon, std::ostream& out);

// Uniform over the lexicon phrases of `code` (one uniform_index draw).
// Throws ContractError for EmoteCode::none or a code without phrases.
std::string sample_emote_phrase(const EmoteLexicon& lexicon, EmoteCode code, Rng& rng);

// Everything in the edited question that precedes the sentence closest to
// the default question, trimmed. Ties go to the earliest sentence.
std::string extract_emote_phrase(std::string_view default_question, std::string_view edited_question);

// Conversation context fed to the emotion classifier.
struct ContextTriple {
    std::string previous_question;
    std::string patient_response;
    std::string target_finding;

    bool operator==(const ContextTriple&) const = default;
};

struct EditedQuestionRecord {
    std::string previous_question;
    std::string patient_response;
    std::string default_question;
    std::string edited_question;
    std::string target_finding;  // name of the finding the default question asks about
};

struct EmoteDatasetRow {
    ContextTriple context;
    std::string emote_phrase;  // empty iff code == none
    EmoteCode code = EmoteCode::none;

    bool operator==(const EmoteDatasetRow&) const = default;
};

struct ReviewItem {
    std::size_t record_index = 0;
    std::string phrase;
    EditedQuestionRecord record;
};

struct EmoteDatasetBuild {
    std::vector<EmoteDatasetRow> rows;
    std::vector<ReviewItem> review;  // phrases with no lexicon match, never auto-coded
};

EmoteDatasetBuild build_emote_dataset(const std::vector<EditedQuestionRecord>& records, const EmoteLexicon& lexicon);

// Seeded split stratified by code: within each code the rows are shuffled
// (Fisher-Yates on Rng(seed)) and the first round(fraction * n) go to train.
struct DatasetSplit {
    std::vector<EmoteDatasetRow> train;
    std::vector<EmoteDatasetRow> test;
    std::uint64_t seed = 0;
};
DatasetSplit split_emote_dataset(const std::vector<EmoteDatasetRow>& rows, double train_fraction, std::uint64_t seed);

std::vector<EditedQuestionRecord> read_edit_records(std::istream& in);
void write_edit_records(const std::vector<EditedQuestionRecord>& records, std::ostream& out);
std::vector<EmoteDatasetRow> read_emote_rows(std::istream& in);
void write_emote_rows(const std::vector<EmoteDatasetRow>& rows, std::ostream& out);
void write_review(const std::vector<ReviewItem>& review, std::ostream& out);

}  // namespace anamnesis
