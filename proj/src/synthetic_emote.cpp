#include "anamnesis/synthetic_emote.hpp"

#include <algorithm>
#include <string_view>

#include "anamnesis/embedding.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

namespace {

constexpr std::array<std::string_view, 10> kQuestions = {
    "Do you have a fever?",          "Are you short of breath?",        "Do you feel nauseous?",
    "Have you lost weight without trying?", "Does bright light bother you?", "Are your symptoms worse in the morning?",
    "Do your symptoms come and go?", "Have you been sweating more than usual?", "Do you have back pain?",
    ""};

constexpr std::array<std::string_view, 10> kPlainFindings = {
    "fever",      "back pain",    "nausea",        "dry cough",         "light sensitivity",
    "weight loss", "palpitations", "bloody stool", "shortness of breath", "frequent urination"};

constexpr std::array<std::string_view, 6> kSensitiveFindings = {
    "multiple sexual partners", "marijuana use",         "alcohol abuse",
    "illicit drug injection",   "erectile dysfunction", "sexually transmitted infection"};

constexpr std::array<std::string_view, 6> kDenials = {"No.", "No, not at all.", "Not really.", "Never.",
                                                      "No, I haven't noticed that.", "Nope, none of that."};

constexpr std::array<std::string_view, 6> kConfirmations = {"Yes.", "Yes, I have.", "Yes, sometimes.",
                                                            "Definitely yes.", "Yes, a little.",
                                                            "Yes, that is right."};

constexpr std::array<std::string_view, 6> kDistress = {"Yes, and it is really painful.",
                                                       "It has been terrible lately.",
                                                       "Yes, it hurts and I am worried.",
                                                       "It is awful, I can barely sleep.",
                                                       "I am scared, it keeps getting worse.",
                                                       "Yes and the suffering is unbearable."};

constexpr std::array<std::string_view, 5> kTails = {"", " Since Monday.", " For about a week.", " Mostly at night.",
                                                    " On and off."};

constexpr std::array<std::string_view, 10> kDistressWords = {"painful", "terrible", "hurts",   "worried", "awful",
                                                             "scared",  "worse",    "suffering", "unbearable", "barely"};

template <typename Array>
std::string pick(const Array& items, Rng& rng) {
    return std::string(items[rng.uniform_index(items.size())]);
}

bool has_token(const std::vector<std::string>& tokens, std::string_view word) {
    return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

}  // namespace

EmoteCode synthetic_emote_oracle(const ContextTriple& context) {
    if (std::find(kSensitiveFindings.begin(), kSensitiveFindings.end(), context.target_finding) !=
        kSensitiveFindings.end()) {
        return EmoteCode::apology;
    }
    const auto tokens = tokenize(context.patient_response);
    for (auto w : kDistressWords) {
        if (has_token(tokens, w)) {
            return EmoteCode::empathy;
        }
    }
    if (has_token(tokens, "yes")) {
        return EmoteCode::affirmative;
    }
    return EmoteCode::none;
}

std::vector<EmoteDatasetRow> make_synthetic_emote_corpus(const std::array<std::size_t, kEmoteCodeCount>& counts,
                                                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EmoteDatasetRow> rows;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        const EmoteCode code = kEmoteCodes[c];
        for (std::size_t i = 0; i < counts[c]; ++i) {
            ContextTriple t;
            t.previous_question = pick(kQuestions, rng);
            switch (code) {
                case EmoteCode::none: t.patient_response = pick(kDenials, rng); break;
                case EmoteCode::affirmative: t.patient_response = pick(kConfirmations, rng); break;
                case EmoteCode::empathy: t.patient_response = pick(kDistress, rng); break;
                case EmoteCode::apology:
                    t.patient_response = rng.bernoulli(0.5) ? pick(kDenials, rng) : pick(kConfirmations, rng);
                    break;
            }
            t.patient_response += pick(kTails, rng);
            t.target_finding = code == EmoteCode::apology ? pick(kSensitiveFindings, rng) : pick(kPlainFindings, rng);
            std::string phrase;
            switch (code) {
                case EmoteCode::none: break;
                case EmoteCode::affirmative: phrase = "Got it."; break;
                case EmoteCode::empathy: phrase = "Sorry about that."; break;
                case EmoteCode::apology: phrase = "I am sorry for asking."; break;
            }
            rows.push_back({std::move(t), std::move(phrase), code});
        }
    }
    // Interleave classes so prefixes of the corpus are mixed.
    for (std::size_t i = rows.size(); i > 1; --i) {
        std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
    }
    return rows;
}

}  // namespace anamnesis
