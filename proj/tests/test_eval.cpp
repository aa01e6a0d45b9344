#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "table1_fixture.hpp"

#include "anamnesis/error.hpp"
#include "anamnesis/eval.hpp"
#include "anamnesis/jsonl.hpp"

using namespace anamnesis;
using fixtures::clinic_kb;

namespace {

const ParaphraseBank& clinic_bank() {
    static const ParaphraseBank bank = [] {
        auto in = open_input(fixtures::data_path("clinic.bank.jsonl"));
        return load_bank(in);
    }();
    return bank;
}

const EmoteLexicon& lexicon() {
    static const EmoteLexicon lex = EmoteLexicon::defaults();
    return lex;
}

EngineResources resources() { return {clinic_kb(), clinic_bank(), lexicon(), nullptr, nullptr, 70}; }

EngineConfig config(EngineVariant v, std::uint64_t seed) {
    EngineConfig c;
    c.variant = v;
    c.seed = seed;
    c.emote_mode = EmoteMode::none;
    return c;
}

StartRequest fullness() { return {"young adult (18 to 40 yrs)", "male", "abdominal fullness sensation", {}, {}}; }

RatingRecord rec(std::string ref, int a, int b, std::string comment = {}) {
    return {"r1", std::move(ref), a, b, std::move(comment), {}};
}

std::vector<std::string> findings_of(const std::vector<Turn>& turns) {
    std::vector<std::string> out;
    for (const auto& t : turns) out.push_back(t.codes.next_finding);
    return out;
}

}  // namespace

TEST_CASE("published end-to-end table arithmetic") {
    const auto records = fixtures::table1_records();
    REQUIRE(records.size() == 90);
    const auto agg = aggregate_ratings(records);
    CHECK(agg.total_a == 63);
    CHECK(agg.total_b == 30);
    CHECK(agg.exclusive.counts == std::array<int, 3>{49, 16, 25});
    CHECK(agg.exclusive.percent == std::array<double, 3>{54.4, 17.8, 27.8});
    CHECK(agg.cases == 30);
    CHECK(agg.majority_total_a == 24);
    CHECK(agg.majority_total_b == 6);
    CHECK(agg.majority.counts == std::array<int, 3>{20, 2, 8});
    CHECK(agg.majority.percent == std::array<double, 3>{66.7, 6.6, 26.7});

    const auto table = render_table1(agg, "medcod", "expert");
    CHECK(table.find("(54.4%)") != std::string::npos);
    CHECK(table.find("(6.6%)") != std::string::npos);
    CHECK(table.find("Aggregated with Majority Voting Applied") != std::string::npos);

    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 37, shuffled.end());
    const auto again = aggregate_ratings(shuffled);
    CHECK(again.exclusive.counts == agg.exclusive.counts);
    CHECK(again.majority.counts == agg.majority.counts);
    CHECK(again.per_case == agg.per_case);
}

TEST_CASE("largest remainder percentages") {
    CHECK(largest_remainder_percent({1, 1, 1}) == std::array<double, 3>{33.4, 33.3, 33.3});
    CHECK(largest_remainder_percent({0, 0, 0}) == std::array<double, 3>{0, 0, 0});
    CHECK(largest_remainder_percent({1, 0, 0}) == std::array<double, 3>{100, 0, 0});
    CHECK(largest_remainder_percent({1, 2, 0}, 0) == std::array<double, 3>{33, 67, 0});
}

TEST_CASE("majority voting") {
    auto single = aggregate_ratings({rec("c1", 0, 1)});
    CHECK(single.per_case.at("c1") == CaseOutcome::b);
    auto split = aggregate_ratings({rec("c1", 1, 0), rec("c1", 1, 0), rec("c1", 0, 1)});
    CHECK(split.per_case.at("c1") == CaseOutcome::a);
    auto unanimous = aggregate_ratings({rec("c1", 1, 1, "x"), rec("c1", 1, 1, "y"), rec("c1", 1, 1, "z")});
    CHECK(unanimous.per_case.at("c1") == CaseOutcome::equal);
    CHECK(unanimous.majority_total_a == 1);
    auto even = aggregate_ratings({rec("c1", 1, 0), rec("c1", 0, 1)});
    CHECK(even.per_case.at("c1") == CaseOutcome::equal);
}

TEST_CASE("invalid ratings are rejected") {
    CHECK_THROWS_AS(validate_rating(rec("c1", 1, 1)), ContractError);
    CHECK_THROWS_AS(validate_rating(rec("c1", 0, 0, "  ")), ContractError);
    CHECK_THROWS_AS(validate_rating(rec("c1", 2, 0)), ContractError);
    CHECK_THROWS_AS(validate_rating(rec("", 1, 0)), ContractError);
    CHECK_NOTHROW(validate_rating(rec("c1", 0, 0, "both fine")));
    CHECK_THROWS_AS(aggregate_ratings({rec("c1", 1, 0), rec("c2", 1, 1)}), ContractError);
}

TEST_CASE("rating records round trip") {
    auto records = fixtures::table1_records();
    records[0].pair_id = "p000001";
    std::stringstream io;
    write_ratings(records, io);
    CHECK(read_ratings(io) == records);
    std::istringstream bad("{\"case_ref\":\"c\",\"points_a\":1,\"points_b\":1}\n");
    CHECK_THROWS_AS(read_ratings(bad), LoadError);
}

TEST_CASE("paired runs") {
    const std::vector<std::string> yes(10, "Yes");
    DialogueEngine expert(resources(), config(EngineVariant::expert, 5));
    DialogueEngine medcod(resources(), config(EngineVariant::medcod, 5));
    const auto p = run_paired(expert, medcod, fullness(), yes, "appendix");
    CHECK(p.variants[0] == EngineVariant::expert);
    CHECK(p.variants[1] == EngineVariant::medcod);
    CHECK(p.divergences.empty());
    CHECK(findings_of(p.transcripts[0]) == findings_of(p.transcripts[1]));
    // Frozen from a reference run on the shipped clinic knowledge base.
    const std::vector<std::string> golden = {"diarrhea, chronic", "chronic (> 4 weeks)", "gluten intolerance",
                                             "weight loss", "generalized weakness", "anxiety", "palpitations",
                                             "sweating increase", "abdominal pain, recurrent attacks", "intermittent"};
    CHECK(findings_of(p.transcripts[0]) == golden);
    REQUIRE(p.conclusions[0]);
    CHECK(p.conclusions[0]->reason == Termination::max_questions);
    for (std::size_t i = 0; i < p.transcripts[0].size(); ++i) {
        CHECK(p.transcripts[0][i].question == clinic_kb().finding(p.transcripts[0][i].codes.next_finding).expert_question);
    }

    DialogueEngine left(resources(), config(EngineVariant::medcod, 9));
    DialogueEngine right(resources(), config(EngineVariant::medcod, 9));
    const auto same = run_paired(left, right, fullness(), yes, "same");
    CHECK(same.transcripts[0] == same.transcripts[1]);
    CHECK(same.answers_used.size() <= yes.size());

    const std::vector<std::string> short_script(3, "no");
    CHECK_THROWS_AS(run_paired(left, right, fullness(), short_script, "short"), ContractError);

    auto c = config(EngineVariant::expert, 1);
    c.max_questions = 2;
    DialogueEngine capped(resources(), c);
    DialogueEngine full(resources(), config(EngineVariant::expert, 1));
    const auto diverged = run_paired(capped, full, fullness(), yes, "capped");
    CHECK_FALSE(diverged.divergences.empty());
    CHECK(diverged.transcripts[0].size() == 2);
}

namespace {

std::vector<SheetInstance> sheet_instances(int per_class, double probability) {
    std::vector<SheetInstance> out;
    const auto findings = clinic_kb().findings();
    int n = 0;
    for (auto code : kEmoteCodes) {
        for (int i = 0; i < per_class; ++i, ++n) {
            SheetInstance s;
            s.instance_id = "i" + std::to_string(n);
            s.context.age_band = "adult";
            s.context.gender = "female";
            s.context.rfe = "abdominal fullness sensation";
            s.context.previous_question = "Do you have a fever?";
            s.context.previous_response = i % 2 ? "Yes, it is awful" : "No";
            s.codes.next_finding = findings[static_cast<std::size_t>(n) % findings.size()].id;
            s.codes.emote = code;
            s.probability = probability;
            out.push_back(s);
        }
    }
    return out;
}

NlgResources nlg() { return {clinic_kb(), clinic_bank(), lexicon(), nullptr, 70}; }

const std::vector<EngineVariant> kModels = {EngineVariant::expert, EngineVariant::medcod_no_emote,
                                            EngineVariant::medcod};

}  // namespace

TEST_CASE("rating sheet sampling and anonymization") {
    auto instances = sheet_instances(30, 0.9);
    auto low = sheet_instances(5, 0.8);
    for (auto& s : low) s.instance_id += "low";
    instances.insert(instances.end(), low.begin(), low.end());

    const auto sheet = build_rating_sheet(instances, kModels, nlg(), 42);
    CHECK(sheet.rows.size() == 100);
    CHECK(sheet.warnings.empty());
    CHECK(sheet.shuffle_seed == 42);
    std::array<int, 4> per_class{};
    std::set<std::string> ids;
    std::set<std::vector<EngineVariant>> orders;
    for (const auto& row : sheet.rows) {
        ++per_class[static_cast<std::size_t>(row.predicted)];
        CHECK(row.probability > 0.8);
        CHECK(ids.insert(row.instance_id).second);
        REQUIRE(row.candidates.size() == 3);
        const auto& order = sheet.key.at(row.row_id);
        auto sorted = order;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == kModels);
        orders.insert(order);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(deanonymize(sheet, row.row_id, label_for(i)) == order[i]);
        }
    }
    CHECK(per_class == std::array<int, 4>{25, 25, 25, 25});
    CHECK(orders.size() > 1);
    CHECK_THROWS_AS(deanonymize(sheet, "r999", "M1"), NotFoundError);

    const auto again = build_rating_sheet(instances, kModels, nlg(), 42);
    CHECK(again.key == sheet.key);
    CHECK(again.rows.front().candidates == sheet.rows.front().candidates);

    const auto thin = build_rating_sheet(sheet_instances(10, 0.95), kModels, nlg(), 1);
    CHECK(thin.rows.size() == 40);
    CHECK(thin.warnings.size() == 4);
    CHECK(build_rating_sheet(low, kModels, nlg(), 1).rows.empty());
}

TEST_CASE("three-axis summaries") {
    const auto sheet = build_rating_sheet(sheet_instances(25, 0.9), kModels, nlg(), 3);
    std::vector<AxisRating> ratings;
    int k = 0;
    for (const auto& row : sheet.rows) {
        for (int rater = 0; rater < 5; ++rater, ++k) {
            for (std::size_t col = 0; col < 3; ++col) {
                const auto v = deanonymize(sheet, row.row_id, label_for(col));
                AxisRating r{row.row_id, "rater" + std::to_string(rater), label_for(col), 5, 5, 3};
                if (v == EngineVariant::expert) {
                    // 500 ratings: empathy total 1386, medical 2478, fluency 2471.
                    r.empathy = k < 386 ? 3 : 2;
                    r.medical = k < 478 ? 5 : 4;
                    r.fluency = k < 471 ? 5 : 4;
                }
                ratings.push_back(r);
            }
        }
    }
    const auto summary = summarize_axis_ratings(sheet, ratings);
    const auto& expert = summary.at(EngineVariant::expert);
    CHECK(expert.ratings == 500);
    CHECK(expert.empathy == doctest::Approx(2.772));
    const auto table = render_table2(summary);
    CHECK(table.find("expert            4.956     4.942     2.772") != std::string::npos);
    CHECK(table.find("no significance test") != std::string::npos);

    ratings[0].empathy = 6;
    CHECK_THROWS_AS(summarize_axis_ratings(sheet, ratings), ContractError);
}

TEST_CASE("sheet files round trip") {
    const auto sheet = build_rating_sheet(sheet_instances(3, 0.9), kModels, nlg(), 8);
    std::stringstream rows, key;
    write_sheet(sheet, rows);
    write_sheet_key(sheet, key);
    CHECK(rows.str().find("\"expert\"") == std::string::npos);
    const auto loaded = read_sheet(rows, &key);
    CHECK(loaded.key == sheet.key);
    CHECK(loaded.warnings == sheet.warnings);
    REQUIRE(loaded.rows.size() == sheet.rows.size());
    CHECK(loaded.rows[0].candidates == sheet.rows[0].candidates);
    CHECK(loaded.rows[0].context == sheet.rows[0].context);

    const auto instances = sheet_instances(2, 0.85);
    std::stringstream io;
    write_sheet_instances(instances, io);
    const auto back = read_sheet_instances(io);
    REQUIRE(back.size() == instances.size());
    CHECK(back[3].context == instances[3].context);
    CHECK(back[3].codes == instances[3].codes);

    std::vector<AxisRating> ratings{{"r001", "a", "M2", 4, 5, 3}};
    std::stringstream rio;
    write_axis_ratings(ratings, rio);
    CHECK(read_axis_ratings(rio) == ratings);
}
