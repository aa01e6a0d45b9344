#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "anamnesis/error.hpp"
#include "anamnesis/simulator.hpp"
#include "anamnesis/synthetic_kb.hpp"

using namespace anamnesis;
using fixtures::toy_kb;

namespace {

std::string dataset_bytes(const KnowledgeBase& kb, const SimulatorConfig& config, std::size_t n) {
    std::ostringstream out;
    write_cases(simulate_dataset(kb, config, n), out);
    return out.str();
}

}  // namespace

TEST_CASE("unreachable margin rejects every toy case") {
    SimulatorConfig config;
    config.margin_threshold = 1000;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        CHECK_FALSE(simulate_case(toy_kb(), config, rng).has_value());
    }
}

// Golden values produced by tests/oracles/simulate_oracle.py.
TEST_CASE("golden trace: toy.kb, seed 42, default config") {
    SimulatorConfig config;
    Rng rng(42);
    SimulationTrace trace;
    SimulationStats stats;
    const auto result = simulate_case(toy_kb(), config, rng, &stats, &trace);
    CHECK_FALSE(result.has_value());
    CHECK(trace.age_band == "adolescent (12 to 17 yrs)");
    CHECK(trace.gender == "male");
    CHECK(trace.rfe == "f3");
    CHECK(trace.target_length == 19);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[0].finding_id == "f1");
    CHECK(trace.steps[0].polarity == Polarity::present);
    CHECK(trace.steps[0].margin_before == 3.0);
    CHECK(trace.steps[1].finding_id == "f2");
    CHECK(trace.steps[1].polarity == Polarity::absent);
    CHECK(trace.steps[1].margin_before == 6.0);
    CHECK(trace.stop == SimulationTrace::Stop::exhausted);
    CHECK(trace.final_margin == 4.0);
    CHECK(stats.rejected == 1);
    CHECK(stats.assertions_sampled == 2);
}

TEST_CASE("golden trace: toy.kb, seed 42, margin 5") {
    SimulatorConfig config;
    config.margin_threshold = 5;
    Rng rng(42);
    SimulationTrace trace;
    const auto result = simulate_case(toy_kb(), config, rng, nullptr, &trace);
    REQUIRE(result.has_value());
    CHECK(result->age_band == "adolescent (12 to 17 yrs)");
    CHECK(result->gender == "male");
    CHECK(result->rfe == "f3");
    CHECK(result->findings == std::vector<Assertion>{{"f1", Polarity::present}});
    CHECK(result->final_margin == 6.0);
    CHECK(trace.stop == SimulationTrace::Stop::margin);
    CHECK(validate_case(toy_kb(), *result).empty());
}

TEST_CASE("accepted cases satisfy their postconditions") {
    const auto kb = make_synthetic_kb({}, 11);
    SimulatorConfig config;
    SimulationStats stats;
    config.seed = 5;
    const auto cases = simulate_dataset(kb, config, 30, &stats);
    REQUIRE(cases.size() == 30);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        CHECK(c.id == static_cast<int>(i));
        CHECK(c.final_margin >= config.margin_threshold);
        CHECK(c.findings.size() <= 20);
        CHECK(validate_case(kb, c).empty());
        CHECK(margin(differential(kb, all_assertions(c))) == c.final_margin);
    }
    CHECK(stats.accepted == 30);
    CHECK(stats.attempts == stats.accepted + stats.rejected);
}

TEST_CASE("simulate_dataset ids and determinism") {
    SimulatorConfig config;
    config.margin_threshold = 3;
    config.seed = 9;
    const auto cases = simulate_dataset(toy_kb(), config, 3);
    REQUIRE(cases.size() == 3);
    CHECK(cases[0].id == 0);
    CHECK(cases[1].id == 1);
    CHECK(cases[2].id == 2);
    CHECK(dataset_bytes(toy_kb(), config, 3) == dataset_bytes(toy_kb(), config, 3));
    config.seed = 10;
    const auto other = simulate_dataset(toy_kb(), config, 3);
    CHECK(other.size() == 3);
}

TEST_CASE("exhaustion error when nothing is ever accepted") {
    SimulatorConfig config;
    config.margin_threshold = 1000;
    config.attempt_cap = 100;
    CHECK_THROWS_AS(simulate_dataset(toy_kb(), config, 1), ExhaustionError);
    CHECK_THROWS_AS(simulate_dataset(toy_kb(), config, 0), ContractError);
}

TEST_CASE("config validation") {
    SimulatorConfig config;
    config.min_findings = 0;
    Rng rng(1);
    CHECK_THROWS_AS(simulate_case(toy_kb(), config, rng), ContractError);
    config = {};
    config.p_absent = 1.0;
    CHECK_THROWS_AS(simulate_case(toy_kb(), config, rng), ContractError);
}

TEST_CASE("validate_case violations") {
    ClinicalCase c;
    c.rfe = "f1";
    c.findings = {{"f3", Polarity::present}, {"f4", Polarity::present}};
    auto v = validate_case(toy_kb(), c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("g1") != std::string::npos);

    c.findings = {{"f2", Polarity::present}, {"f2", Polarity::absent}};
    CHECK(validate_case(toy_kb(), c).size() == 1);

    c.findings = {{"f1", Polarity::absent}};
    CHECK(validate_case(toy_kb(), c).size() == 1);  // rfe repeated

    c.findings = {{"f3", Polarity::present}, {"f4", Polarity::absent}};
    CHECK(validate_case(toy_kb(), c).empty());
}

TEST_CASE("empirical absent fraction tracks p_absent") {
    const auto kb = make_synthetic_kb({}, 3);
    SimulatorConfig config;
    config.seed = 1;
    SimulationStats stats;
    simulate_dataset(kb, config, 100, &stats);
    REQUIRE(stats.assertions_sampled >= 1000);
    CHECK(std::abs(stats.absent_rate() - 0.6) <= 0.05);
}

TEST_CASE("case records round-trip and match the vignette shape") {
    ClinicalCase c;
    c.id = 0;
    c.age_band = "young adult (18 to 40 yrs)";
    c.gender = "male";
    c.rfe = "abdominal fullness sensation";
    c.findings = {{"diarrhea, chronic", Polarity::present}, {"lactose intolerance", Polarity::absent}};
    c.final_margin = 21;
    const std::string line = case_to_json(c);
    CHECK(line ==
          R"j({"id":0,"age":["young adult (18 to 40 yrs)"],"gender":["male"],"RFE":["abdominal fullness sensation+"],)j"
          R"j("findings":["diarrhea, chronic+","lactose intolerance-"],"final_margin":21.0})j");
    CHECK(case_from_json(line) == c);
    c.final_margin = kInfiniteMargin;
    CHECK(case_from_json(case_to_json(c)) == c);
    CHECK_THROWS_AS(case_from_json(R"({"id":0,"age":["a"],"gender":["m"],"RFE":["x-"],"findings":[]})"), LoadError);
}
