#include "anamnesis/emote.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

std::string_view to_string(EmoteCode code) {
    switch (code) {
        case EmoteCode::none: return "none";
        case EmoteCode::affirmative: return "affirmative";
        case EmoteCode::empathy: return "empathy";
        case EmoteCode::apology: return "apology";
    }
    return "none";
}

EmoteCode emote_code_from_string(std::string_view text) {
    const std::string lowered = to_lower(text);
    for (EmoteCode code : kEmoteCodes) {
        if (lowered == to_string(code)) {
            return code;
        }
    }
    throw LoadError("unknown emote code '" + std::string(text) + "'");
}

std::string surface_form(std::string_view phrase) {
    std::string out = trim(phrase);
    if (!out.empty()) {
        const char last = out.back();
        if (last != '.' && last != '!' && last != '?' && last != ';') {
            out.push_back('.');
        }
    }
    return out;
}

EmoteLexicon::EmoteLexicon(std::vector<EmotePhrase> phrases) : phrases_(std::move(phrases)) {
    for (auto& p : phrases_) {
        p.text = trim(p.text);
        if (p.code == EmoteCode::none) {
            throw ContractError("lexicon phrase '" + p.text + "' cannot carry the none code");
        }
        if (p.text.empty()) {
            throw ContractError("lexicon phrase is empty");
        }
    }
}

EmoteLexicon EmoteLexicon::defaults() {
    return EmoteLexicon({
        {EmoteCode::affirmative, "Thanks for the input"},
        {EmoteCode::affirmative, "Okay"},
        {EmoteCode::affirmative, "I see"},
        {EmoteCode::affirmative, "Got it"},
        {EmoteCode::empathy, "Sorry about that"},
        {EmoteCode::empathy, "That's concerning"},
        {EmoteCode::empathy, "Okay, I'm sorry to hear"},
        {EmoteCode::empathy, "Oh I'm sorry to hear that"},
        {EmoteCode::empathy, "Sorry to know that"},
        {EmoteCode::empathy, "That's worrisome"},
        {EmoteCode::apology, "I am sorry for asking"},
        {EmoteCode::apology, "I apologise if this is personal"},
        {EmoteCode::apology, "I am sorry for asking if it sounds personal but may I know"},
    });
}

std::vector<std::string> EmoteLexicon::phrases_for(EmoteCode code) const {
    std::vector<std::string> out;
    for (const auto& p : phrases_) {
        if (p.code == code) {
            out.push_back(p.text);
        }
    }
    return out;
}

std::optional<EmoteCode> EmoteLexicon::lookup(std::string_view phrase) const {
    const std::string wanted = normalize_for_match(phrase);
    if (wanted.empty()) {
        return std::nullopt;
    }
    for (const auto& p : phrases_) {
        if (normalize_for_match(p.text) == wanted) {
            return p.code;
        }
    }
    return std::nullopt;
}

std::size_t EmoteLexicon::leading_phrase_length(std::string_view question) const {
    std::size_t best = 0;
    const auto segments = split_on_punctuation(question);
    // The last segment is the question itself; a phrase is never all of it.
    for (std::size_t j = 0; j + 1 < segments.size(); ++j) {
        const std::size_t end = segments[j].offset + segments[j].text.size();
        if (lookup(question.substr(0, end))) {
            best = end;
        }
    }
    return best;
}

EmoteLexicon load_lexicon(std::istream& in) {
    std::vector<EmotePhrase> phrases;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        EmoteCode code = emote_code_from_string(require_string(r, "code", line));
        if (code == EmoteCode::none) {
            throw LoadError("line " + std::to_string(line) + ": lexicon phrases cannot use the none code");
        }
        phrases.push_back({code, require_string(r, "phrase", line)});
    });
    return EmoteLexicon(std::move(phrases));
}

void save_lexicon(const EmoteLexicon& lexicon, std::ostream& out) {
    for (const auto& p : lexicon.phrases()) {
        OrderedJson r{{"code", to_string(p.code)}, {"phrase", p.text}};
        out << r.dump() << '\n';
    }
}

std::string sample_emote_phrase(const EmoteLexicon& lexicon, EmoteCode code, Rng& rng) {
    if (code == EmoteCode::none) {
        throw ContractError("the none code has no emote phrase");
    }
    const auto pool = lexicon.phrases_for(code);
    if (pool.empty()) {
        throw ContractError("lexicon has no phrases for code '" + std::string(to_string(code)) + "'");
    }
    return pool[rng.uniform_index(pool.size())];
}

std::string extract_emote_phrase(std::string_view default_question, std::string_view edited_question) {
    const auto segments = split_on_punctuation(edited_question);
    if (segments.empty()) {
        return {};
    }
    std::size_t best = 0;
    int best_score = -1;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const int score = fuzzy_score(segments[i].text, default_question);
        if (score > best_score) {
            best = i;
            best_score = score;
        }
    }
    return trim(edited_question.substr(0, segments[best].offset));
}

EmoteDatasetBuild build_emote_dataset(const std::vector<EditedQuestionRecord>& records, const EmoteLexicon& lexicon) {
    if (lexicon.phrases().empty()) {
        throw ContractError("build_emote_dataset needs a nonempty lexicon");
    }
    EmoteDatasetBuild build;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        ContextTriple context{r.previous_question, r.patient_response, r.target_finding};
        std::string phrase = extract_emote_phrase(r.default_question, r.edited_question);
        if (phrase.empty()) {
            build.rows.push_back({std::move(context), {}, EmoteCode::none});
            continue;
        }
        if (auto code = lexicon.lookup(phrase)) {
            build.rows.push_back({std::move(context), std::move(phrase), *code});
        } else {
            build.review.push_back({i, std::move(phrase), r});
        }
    }
    return build;
}

DatasetSplit split_emote_dataset(const std::vector<EmoteDatasetRow>& rows, double train_fraction,
                                 std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw ContractError("train fraction must lie in [0, 1]");
    }
    DatasetSplit split;
    split.seed = seed;
    Rng rng(seed);
    for (EmoteCode code : kEmoteCodes) {
        std::vector<const EmoteDatasetRow*> stratum;
        for (const auto& row : rows) {
            if (row.code == code) {
                stratum.push_back(&row);
            }
        }
        for (std::size_t i = stratum.size(); i > 1; --i) {
            std::swap(stratum[i - 1], stratum[rng.uniform_index(i)]);
        }
        const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(stratum.size())));
        for (std::size_t i = 0; i < stratum.size(); ++i) {
            (i < n_train ? split.train : split.test).push_back(*stratum[i]);
        }
    }
    return split;
}

std::vector<EditedQuestionRecord> read_edit_records(std::istream& in) {
    std::vector<EditedQuestionRecord> out;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        EditedQuestionRecord rec;
        rec.previous_question = optional_string(r, "previous_question");
        rec.patient_response = optional_string(r, "patient_response");
        rec.default_question = require_string(r, "default_question", line);
        rec.edited_question = require_string(r, "edited_question", line);
        rec.target_finding = optional_string(r, "target_finding");
        if (trim(rec.default_question).empty() || trim(rec.edited_question).empty()) {
            throw LoadError("line " + std::to_string(line) + ": default and edited questions must be nonempty");
        }
        out.push_back(std::move(rec));
    });
    return out;
}

void write_edit_records(const std::vector<EditedQuestionRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        OrderedJson j{{"previous_question", r.previous_question},
                      {"patient_response", r.patient_response},
                      {"default_question", r.default_question},
                      {"edited_question", r.edited_question},
                      {"target_finding", r.target_finding}};
        out << j.dump() << '\n';
    }
}

std::vector<EmoteDatasetRow> read_emote_rows(std::istream& in) {
    std::vector<EmoteDatasetRow> out;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        EmoteDatasetRow row;
        row.context.previous_question = optional_string(r, "previous_question");
        row.context.patient_response = optional_string(r, "patient_response");
        row.context.target_finding = require_string(r, "target_finding", line);
        row.emote_phrase = optional_string(r, "emote_phrase");
        row.code = emote_code_from_string(require_string(r, "code", line));
        if (row.emote_phrase.empty() != (row.code == EmoteCode::none)) {
            throw LoadError("line " + std::to_string(line) + ": emote_phrase must be empty exactly when code is none");
        }
        out.push_back(std::move(row));
    });
    return out;
}

void write_emote_rows(const std::vector<EmoteDatasetRow>& rows, std::ostream& out) {
    for (const auto& row : rows) {
        OrderedJson j{{"previous_question", row.context.previous_question},
                      {"patient_response", row.context.patient_response},
                      {"target_finding", row.context.target_finding},
                      {"emote_phrase", row.emote_phrase},
                      {"code", to_string(row.code)}};
        out << j.dump() << '\n';
    }
}

void write_review(const std::vector<ReviewItem>& review, std::ostream& out) {
    for (const auto& item : review) {
        OrderedJson j{{"record_index", item.record_index},
                      {"phrase", item.phrase},
                      {"default_question", item.record.default_question},
                      {"edited_question", item.record.edited_question}};
        out << j.dump() << '\n';
    }
}

}  // namespace anamnesis
