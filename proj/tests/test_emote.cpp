#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "anamnesis/emote.hpp"
#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

using namespace anamnesis;

namespace {

EditedQuestionRecord edit(std::string def, std::string edited, std::string finding = "back pain") {
    return {"Do you smoke?", "No.", std::move(def), std::move(edited), std::move(finding)};
}

}  // namespace

TEST_CASE("extraction on the worked examples") {
    CHECK(extract_emote_phrase("Do you have flushing?",
                               "Oh I'm sorry to hear that. Do you have flushing? That is, do your arms feel warmer "
                               "than usual?") == "Oh I'm sorry to hear that.");
    CHECK(extract_emote_phrase("Do you smoke?", "Do you smoke?").empty());
    CHECK(extract_emote_phrase("Is your back hurting?", "Got it. Thanks. Is your back hurting?") == "Got it. Thanks.");
    // The question lightly reworded still wins over the opener.
    CHECK(extract_emote_phrase("Do you have a fever?", "I see. Do you have any fever?") == "I see.");
}

TEST_CASE("extraction ties go to the earliest segment") {
    CHECK(extract_emote_phrase("Okay?", "Okay? Okay?").empty());
}

TEST_CASE("extraction identity over a synthetic corpus") {
    const auto lexicon = EmoteLexicon::defaults();
    const std::vector<std::string> questions = {
        "Do you have a fever?",           "Is your back hurting?",         "Are you coughing up phlegm?",
        "Do you have multiple sexual partners?", "Have you lost weight without trying?", "Does bright light bother you?",
        "Do you feel nauseous?",          "Are your symptoms worse in the morning?"};
    const std::vector<std::string> suffixes = {"",
                                               "That is, does it come and go?",
                                               "Please take your time.",
                                               "For example, after meals.",
                                               "This helps me understand what is going on."};
    Rng rng(2024);
    int recovered = 0;
    const int total = 200;
    for (int i = 0; i < total; ++i) {
        const auto& p = lexicon.phrases()[rng.uniform_index(lexicon.phrases().size())];
        const auto& q = questions[rng.uniform_index(questions.size())];
        const auto& s = suffixes[rng.uniform_index(suffixes.size())];
        const std::string prefix = surface_form(p.text);
        std::string edited = prefix + " " + q;
        if (!s.empty()) {
            edited += " " + s;
        }
        if (extract_emote_phrase(q, edited) == prefix) {
            ++recovered;
        }
    }
    CHECK(recovered >= 196);
}

TEST_CASE("segments reconstruct the edited question") {
    const std::string edited = "Okay, I'm sorry to hear. Do you smoke?  That is, even occasionally!";
    const auto phrase = extract_emote_phrase("Do you smoke?", edited);
    const auto segments = split_on_punctuation(edited);
    std::string rebuilt;
    std::size_t start = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].offset >= phrase.size() && start == 0) {
            start = i;
        }
        rebuilt += segments[i].text;
    }
    CHECK(rebuilt == edited);
    CHECK(phrase == "Okay, I'm sorry to hear.");
    CHECK(edited.substr(0, phrase.size()) == phrase);
    CHECK(edited.substr(segments[start].offset) == " Do you smoke?  That is, even occasionally!");
}

TEST_CASE("fuzzy score is symmetric and bounded") {
    Rng rng(5);
    const std::string alphabet = "ab c.D?";
    for (int i = 0; i < 300; ++i) {
        std::string a, b;
        for (auto n = rng.uniform_index(12); n > 0; --n) a += alphabet[rng.uniform_index(alphabet.size())];
        for (auto n = rng.uniform_index(12); n > 0; --n) b += alphabet[rng.uniform_index(alphabet.size())];
        const int ab = fuzzy_score(a, b);
        CHECK(ab == fuzzy_score(b, a));
        CHECK(ab >= 0);
        CHECK(ab <= 100);
    }
}

TEST_CASE("default lexicon lookups") {
    const auto lexicon = EmoteLexicon::defaults();
    CHECK(lexicon.lookup("Thanks for the input") == EmoteCode::affirmative);
    CHECK(lexicon.lookup("thanks for the input.") == EmoteCode::affirmative);
    CHECK(lexicon.lookup("Sorry about that") == EmoteCode::empathy);
    CHECK(lexicon.lookup("Okay, I'm sorry to hear.") == EmoteCode::empathy);
    CHECK(lexicon.lookup("Okay.") == EmoteCode::affirmative);
    CHECK(lexicon.lookup("I apologise if this is personal") == EmoteCode::apology);
    CHECK_FALSE(lexicon.lookup("Hello there").has_value());
    CHECK_FALSE(lexicon.lookup("").has_value());
    CHECK(lexicon.phrases_for(EmoteCode::affirmative).size() == 4);
    CHECK(lexicon.phrases_for(EmoteCode::apology).size() == 3);

    CHECK(lexicon.leading_phrase_length("Okay, I'm sorry to hear. Do you smoke?") == 24);
    CHECK(lexicon.leading_phrase_length("Got it. Do you smoke?") == 7);
    CHECK(lexicon.leading_phrase_length("Do you smoke?") == 0);
    CHECK(lexicon.leading_phrase_length("Okay?") == 0);

    CHECK(surface_form("Got it") == "Got it.");
    CHECK(surface_form("Really?") == "Really?");
    CHECK_THROWS_AS(EmoteLexicon({{EmoteCode::none, "Hi"}}), ContractError);
    CHECK_THROWS_AS(EmoteLexicon({{EmoteCode::empathy, "  "}}), ContractError);
}

TEST_CASE("build_emote_dataset codes phrases and routes unknown ones to review") {
    const std::vector<EditedQuestionRecord> records = {
        edit("Is your back hurting?", "Is your back hurting?"),
        edit("Is your back hurting?", "Thanks for the input. Is your back hurting?"),
        edit("Is your back hurting?", "Sorry about that. Is your back hurting?"),
        edit("Is your back hurting?", "Hmm, right. Is your back hurting?"),
        edit("Do you have multiple sexual partners?",
             "I am sorry for asking. Do you have multiple sexual partners?", "multiple sexual partners"),
    };
    const auto build = build_emote_dataset(records, EmoteLexicon::defaults());
    REQUIRE(build.rows.size() == 4);
    CHECK(build.rows[0].code == EmoteCode::none);
    CHECK(build.rows[0].emote_phrase.empty());
    CHECK(build.rows[0].context.target_finding == "back pain");
    CHECK(build.rows[1].code == EmoteCode::affirmative);
    CHECK(build.rows[1].emote_phrase == "Thanks for the input.");
    CHECK(build.rows[2].code == EmoteCode::empathy);
    CHECK(build.rows[3].code == EmoteCode::apology);
    REQUIRE(build.review.size() == 1);
    CHECK(build.review[0].record_index == 3);
    CHECK(build.review[0].phrase == "Hmm, right.");
    for (const auto& row : build.rows) {
        CHECK(row.emote_phrase.empty() == (row.code == EmoteCode::none));
    }
    CHECK_THROWS_AS(build_emote_dataset(records, EmoteLexicon{}), ContractError);
}

TEST_CASE("sample_emote_phrase draws uniformly from the code's phrases") {
    const auto lexicon = EmoteLexicon::defaults();
    Rng rng(9);
    const auto pool = lexicon.phrases_for(EmoteCode::affirmative);
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) {
        const auto p = sample_emote_phrase(lexicon, EmoteCode::affirmative, rng);
        CHECK(std::find(pool.begin(), pool.end(), p) != pool.end());
        seen.insert(p);
    }
    CHECK(seen.size() == 4);
    const auto apologies = lexicon.phrases_for(EmoteCode::apology);
    const auto a = sample_emote_phrase(lexicon, EmoteCode::apology, rng);
    CHECK(std::find(apologies.begin(), apologies.end(), a) != apologies.end());
    CHECK_THROWS_AS(sample_emote_phrase(lexicon, EmoteCode::none, rng), ContractError);
}

TEST_CASE("stratified split keeps per-code proportions and is seeded") {
    std::vector<EmoteDatasetRow> rows;
    const int counts[4] = {50, 20, 5, 5};
    for (std::size_t c = 0; c < 4; ++c) {
        for (int i = 0; i < counts[c]; ++i) {
            const auto code = kEmoteCodes[c];
            rows.push_back({{"q" + std::to_string(i), "a", "f"},
                            code == EmoteCode::none ? "" : "Okay.",
                            code});
        }
    }
    const auto split = split_emote_dataset(rows, 0.8, 77);
    CHECK(split.train.size() == 64);
    CHECK(split.test.size() == 16);
    std::size_t test_apology = 0;
    for (const auto& r : split.test) test_apology += r.code == EmoteCode::apology;
    CHECK(test_apology == 1);
    const auto again = split_emote_dataset(rows, 0.8, 77);
    CHECK(again.train == split.train);
    CHECK(split_emote_dataset(rows, 0.8, 78).train != split.train);
}

TEST_CASE("lexicon and dataset files round trip") {
    std::stringstream lex;
    save_lexicon(EmoteLexicon::defaults(), lex);
    CHECK(load_lexicon(lex).phrases() == EmoteLexicon::defaults().phrases());

    auto shipped = open_input(fixtures::data_path("emote_lexicon.jsonl"));
    CHECK(load_lexicon(shipped).phrases() == EmoteLexicon::defaults().phrases());

    const std::vector<EmoteDatasetRow> rows = {{{"", "", "fever"}, "", EmoteCode::none},
                                               {{"Do you smoke?", "yes", "cough"}, "I see.", EmoteCode::affirmative}};
    std::stringstream io;
    write_emote_rows(rows, io);
    CHECK(read_emote_rows(io) == rows);

    std::istringstream bad(R"({"target_finding":"f","emote_phrase":"","code":"empathy"})");
    CHECK_THROWS_AS(read_emote_rows(bad), LoadError);
    std::istringstream bad_code(R"({"code":"joy","phrase":"Yay"})");
    CHECK_THROWS_AS(load_lexicon(bad_code), LoadError);
}
