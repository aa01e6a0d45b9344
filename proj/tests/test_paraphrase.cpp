#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/paraphrase.hpp"

using namespace anamnesis;
using fixtures::clinic_kb;
using fixtures::toy_kb;

namespace {

// Replays a fixed script of responses, one list per call.
class ScriptedGenerator : public CandidateGenerator {
public:
    explicit ScriptedGenerator(std::vector<std::vector<std::string>> script) : script_(std::move(script)) {}

    std::vector<std::string> propose(const Finding&, std::size_t, Rng&) override {
        ++calls;
        if (script_.empty()) {
            return {};
        }
        auto next = script_.front();
        if (script_.size() > 1) {
            script_.erase(script_.begin());
        }
        return next;
    }

    int calls = 0;

private:
    std::vector<std::vector<std::string>> script_;
};

ParaphraseBank bank_with_pool() {
    auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    bank.add({"f1", "Does your belly hurt?", EntrySource::generated, Validation::consistent, std::nullopt});
    bank.add({"f1", "Is your tummy sore?", EntrySource::manual, Validation::consistent, std::nullopt});
    bank.add({"f1", "Do you have a stomach ulcer?", EntrySource::generated, Validation::inconsistent, std::nullopt});
    bank.add({"f1", "Any belly trouble?", EntrySource::generated, Validation::unknown, std::nullopt});
    return bank;
}

}  // namespace

TEST_CASE("seed_from_kb gives one expert entry per finding") {
    const auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    CHECK(bank.size() == 4);
    for (const auto& e : bank.entries()) {
        CHECK(e.source == EntrySource::expert);
        CHECK(e.validated == Validation::consistent);
    }
    CHECK(bank.expert_question("f2") == "Do you have a fever?");
    CHECK(ParaphraseBank::seed_from_kb(toy_kb()) == bank);
}

TEST_CASE("question normalization") {
    CHECK(normalize_question("  Do you smoke  ") == "Do you smoke?");
    CHECK(normalize_question("Do you smoke??") == "Do you smoke?");
    CHECK_THROWS_AS(normalize_question("  ? "), ContractError);

    auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    CHECK(bank.add({"f2", "Are you running a temperature", EntrySource::generated, Validation::unknown, {}}));
    CHECK_FALSE(bank.add({"f2", "Are you running a temperature?", EntrySource::manual, Validation::unknown, {}}));
    CHECK(bank.contains("f2", "Are you running a temperature?"));
}

TEST_CASE("stub generator reproduces the back pain rewrites") {
    auto bank = ParaphraseBank::seed_from_kb(clinic_kb());
    RuleBasedParaphraser stub;
    Rng rng(1);
    const auto texts = generate_candidates(stub, bank, clinic_kb().finding("back pain"), 2, rng);
    CHECK(texts == std::vector<std::string>{"Is your back hurting?", "Does your back hurt?"});
}

TEST_CASE("generate_candidates skips duplicates and gives up after the retry budget") {
    auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    const auto& f1 = toy_kb().finding("f1");
    Rng rng(3);

    ScriptedGenerator dup_then_fresh({{"Do you have abdominal pain?"}, {"Does your tummy ache?"}});
    CHECK(generate_candidates(dup_then_fresh, bank, f1, 1, rng) == std::vector<std::string>{"Does your tummy ache?"});

    ScriptedGenerator always_dup({{"Do you have abdominal pain?"}});
    CHECK_THROWS_AS(generate_candidates(always_dup, bank, f1, 1, rng, 5), GenerationError);
    CHECK(always_dup.calls == 5);

    CHECK_THROWS_AS(generate_candidates(dup_then_fresh, bank, f1, 0, rng), ContractError);
}

TEST_CASE("validation controls the serving pool") {
    auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    bank.add({"f1", "Does your belly hurt?", EntrySource::generated, Validation::unknown, std::nullopt});
    CHECK(bank.serving_pool("f1").size() == 1);
    bank.record_validation("f1", "Does your belly hurt?", Validation::consistent, "ok");
    CHECK(bank.serving_pool("f1").size() == 2);

    bank.add({"f1", "Is it your appendix?", EntrySource::generated, Validation::unknown, std::nullopt});
    bank.record_validation("f1", "Is it your appendix?", Validation::inconsistent);
    CHECK(bank.serving_pool("f1").size() == 2);

    CHECK_THROWS_AS(bank.record_validation("f1", "Never added?", Validation::consistent), NotFoundError);
    CHECK_THROWS_AS(bank.record_validation("f9", "Does your belly hurt?", Validation::consistent), NotFoundError);

    // Expert entries cannot be voted out.
    bank.record_validation("f1", "Do you have abdominal pain?", Validation::inconsistent);
    CHECK(bank.serving_pool("f1").front() == "Do you have abdominal pain?");
}

TEST_CASE("validation report over 100 labelled candidates") {
    auto bank = ParaphraseBank::seed_from_kb(toy_kb());
    for (int i = 0; i < 100; ++i) {
        const std::string text = "Candidate number " + std::to_string(i) + "?";
        bank.add({"f1", text, EntrySource::generated, Validation::unknown, std::nullopt});
        bank.record_validation("f1", text, i < 78 ? Validation::consistent : Validation::inconsistent);
    }
    const auto report = validation_report(bank);
    CHECK(report.consistent == 78);
    CHECK(report.inconsistent == 22);
    CHECK(report.consistency_rate() == doctest::Approx(0.78));
}

TEST_CASE("sample_question ablation and diversity contracts") {
    const auto bank = bank_with_pool();
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        CHECK(sample_question(bank, "f1", rng, false) == "Do you have abdominal pain?");
    }
    CHECK(sample_question(bank, "f2", rng, true) == "Do you have a fever?");
    CHECK_THROWS_AS(sample_question(bank, "nope", rng, true), NotFoundError);

    std::map<std::string, int> counts;
    for (int i = 0; i < 3000; ++i) {
        ++counts[sample_question(bank, "f1", rng, true)];
    }
    REQUIRE(counts.size() == 3);
    for (const auto& [text, n] : counts) {
        CHECK(std::abs(n / 3000.0 - 1.0 / 3) <= 0.05);
    }
}

TEST_CASE("inconsistent and unlabelled entries are never served") {
    const auto bank = bank_with_pool();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const auto q = sample_question(bank, "f1", rng, true);
        CHECK(q != "Do you have a stomach ulcer?");
        CHECK(q != "Any belly trouble?");
    }
}

TEST_CASE("bank file round trip") {
    auto bank = bank_with_pool();
    bank.record_validation("f1", "Does your belly hurt?", Validation::consistent, "reviewed by two clinicians");
    std::stringstream io;
    save_bank(bank, io);
    const auto loaded = load_bank(io);
    CHECK(loaded == bank);

    std::istringstream dup(R"({"finding_id":"f1","text":"A?"}
{"finding_id":"f1","text":"A"}
)");
    CHECK_THROWS_AS(load_bank(dup), LoadError);
    std::istringstream bad(R"({"finding_id":"f1","text":"A?","source":"oracle"})");
    CHECK_THROWS_AS(load_bank(bad), LoadError);
}

TEST_CASE("shipped clinic bank loads and covers every finding") {
    auto in = open_input(fixtures::data_path("clinic.bank.jsonl"));
    const auto bank = load_bank(in);
    for (const auto& f : clinic_kb().findings()) {
        CHECK_MESSAGE(bank.has_finding(f.id), f.id);
        CHECK(bank.expert_question(f.id) == normalize_question(f.expert_question));
    }
    CHECK(bank.contains("back pain", "Is your back hurting?"));
}
