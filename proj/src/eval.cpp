#include "anamnesis/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

namespace {

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.uniform_index(i)]);
    }
}

std::size_t split_index(int a, int b) {
    if (a == 1 && b == 0) return 0;
    if (a == 0 && b == 1) return 1;
    return 2;
}

PreferenceSplit make_split(const std::array<int, 3>& counts) {
    return {counts, largest_remainder_percent(counts)};
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace

PairedTranscript run_paired(DialogueEngine& a, DialogueEngine& b, const StartRequest& request,
                            const std::vector<std::string>& answers, const std::string& case_ref) {
    const int needed = std::max(a.defaults().max_questions, b.defaults().max_questions);
    if (static_cast<int>(answers.size()) < needed) {
        throw ContractError("answer script has " + std::to_string(answers.size()) + " answers but " +
                            std::to_string(needed) + " are needed");
    }
    PairedTranscript out;
    out.case_ref = case_ref;
    std::array<DialogueEngine*, 2> engines{&a, &b};
    std::array<Reply, 2> replies;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto started = engines[i]->start(request);
        out.session_ids[i] = started.session_id;
        replies[i] = started.reply;
    }
    std::size_t next = 0;
    auto active = [&](std::size_t i) { return replies[i].kind != ReplyKind::conclusion; };
    while (active(0) || active(1)) {
        if (next >= answers.size()) {
            out.divergences.push_back("answer script ran out before both conversations concluded");
            break;
        }
        const std::string& answer = answers[next++];
        out.answers_used.push_back(answer);
        for (std::size_t i = 0; i < 2; ++i) {
            if (active(i)) {
                replies[i] = engines[i]->answer(out.session_ids[i], answer);
            }
        }
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const auto st = engines[i]->state(out.session_ids[i]);
        out.variants[i] = st.config.variant;
        out.transcripts[i] = st.turns;
        out.conclusions[i] = st.conclusion;
    }
    const auto& ta = out.transcripts[0];
    const auto& tb = out.transcripts[1];
    if (ta.size() != tb.size()) {
        out.divergences.push_back("question counts differ: " + std::to_string(ta.size()) + " vs " +
                                  std::to_string(tb.size()));
    }
    for (std::size_t t = 0; t < std::min(ta.size(), tb.size()); ++t) {
        if (ta[t].codes.next_finding != tb[t].codes.next_finding) {
            out.divergences.push_back("turn " + std::to_string(t + 1) + " asks '" + ta[t].codes.next_finding +
                                      "' vs '" + tb[t].codes.next_finding + "'");
            break;
        }
    }
    return out;
}

OrderedJson paired_to_json(const PairedTranscript& paired) {
    OrderedJson sides = OrderedJson::array();
    for (std::size_t i = 0; i < 2; ++i) {
        OrderedJson turns = OrderedJson::array();
        for (const auto& t : paired.transcripts[i]) {
            turns.push_back({{"question", t.question},
                             {"next_finding", t.codes.next_finding},
                             {"emote", to_string(t.codes.emote)},
                             {"clarifications", t.clarifications},
                             {"answer", t.answer ? OrderedJson(*t.answer) : OrderedJson(nullptr)}});
        }
        OrderedJson side{{"variant", to_string(paired.variants[i])},
                         {"session_id", paired.session_ids[i]},
                         {"turns", std::move(turns)}};
        if (const auto& c = paired.conclusions[i]) {
            side["conclusion"] = {{"reason", to_string(c->reason)}, {"question_count", c->question_count}};
        } else {
            side["conclusion"] = nullptr;
        }
        sides.push_back(std::move(side));
    }
    return OrderedJson{{"case_ref", paired.case_ref},
                       {"answers", paired.answers_used},
                       {"sides", std::move(sides)},
                       {"divergences", paired.divergences}};
}

void validate_rating(const RatingRecord& r) {
    if (trim(r.case_ref).empty()) {
        throw ContractError("rating has no case_ref");
    }
    if ((r.points_a != 0 && r.points_a != 1) || (r.points_b != 0 && r.points_b != 1)) {
        throw ContractError("rating points must be 0 or 1");
    }
    if (r.points_a == r.points_b && trim(r.comment).empty()) {
        throw ContractError("equal points require a comment explaining the decision");
    }
}

std::string_view to_string(CaseOutcome o) {
    switch (o) {
        case CaseOutcome::a: return "A";
        case CaseOutcome::b: return "B";
        case CaseOutcome::equal: return "Equal";
    }
    return "Equal";
}

std::array<double, 3> largest_remainder_percent(const std::array<int, 3>& counts, int decimals) {
    const long long total = std::accumulate(counts.begin(), counts.end(), 0LL);
    std::array<double, 3> out{};
    if (total == 0) {
        return out;
    }
    long long scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const long long units = 100 * scale;
    std::array<long long, 3> quota{};
    std::array<long long, 3> remainder{};
    long long assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const long long num = counts[i] * units;
        quota[i] = num / total;
        remainder[i] = num % total;
        assigned += quota[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (remainder[x] != remainder[y]) return remainder[x] > remainder[y];
        return counts[x] > counts[y];
    });
    for (long long k = 0; k < units - assigned; ++k) {
        ++quota[order[static_cast<std::size_t>(k)]];
    }
    for (std::size_t i = 0; i < 3; ++i) {
        out[i] = static_cast<double>(quota[i]) / static_cast<double>(scale);
    }
    return out;
}

RatingAggregate aggregate_ratings(const std::vector<RatingRecord>& records) {
    RatingAggregate agg;
    std::array<int, 3> exclusive{};
    std::map<std::string, std::array<int, 3>> per_case;  // sum a, sum b, raters
    for (const auto& r : records) {
        validate_rating(r);
        ++agg.records;
        agg.total_a += r.points_a;
        agg.total_b += r.points_b;
        ++exclusive[split_index(r.points_a, r.points_b)];
        auto& c = per_case[r.case_ref];
        c[0] += r.points_a;
        c[1] += r.points_b;
        ++c[2];
    }
    agg.exclusive = make_split(exclusive);
    std::array<int, 3> majority{};
    for (const auto& [ref, c] : per_case) {
        const int a = 2 * c[0] > c[2] ? 1 : 0;
        const int b = 2 * c[1] > c[2] ? 1 : 0;
        agg.majority_total_a += a;
        agg.majority_total_b += b;
        const std::size_t k = split_index(a, b);
        ++majority[k];
        agg.per_case[ref] = k == 0 ? CaseOutcome::a : k == 1 ? CaseOutcome::b : CaseOutcome::equal;
    }
    agg.cases = static_cast<int>(per_case.size());
    agg.majority = make_split(majority);
    return agg;
}

std::string render_table1(const RatingAggregate& agg, std::string_view label_a, std::string_view label_b) {
    constexpr std::size_t w0 = 18;
    constexpr std::size_t w = 10;
    std::ostringstream out;
    auto row = [&](const std::string& head, const std::string& a, const std::string& b, const std::string& e) {
        out << pad(head, w0) << pad(a, w) << pad(b, w) << e << '\n';
    };
    auto pct = [](double p) { return "(" + fixed(p, 1) + "%)"; };
    auto block = [&](int ta, int tb, const PreferenceSplit& s) {
        row("Total Pts", std::to_string(ta), std::to_string(tb), "-");
        row("Mut. Excl. Pts", std::to_string(s.counts[0]), std::to_string(s.counts[1]), std::to_string(s.counts[2]));
        row("", pct(s.percent[0]), pct(s.percent[1]), pct(s.percent[2]));
    };
    row("", std::string(label_a), std::string(label_b), "Equal");
    block(agg.total_a, agg.total_b, agg.exclusive);
    out << "Aggregated with Majority Voting Applied (" << agg.cases << " cases)\n";
    block(agg.majority_total_a, agg.majority_total_b, agg.majority);
    return out.str();
}

OrderedJson aggregate_to_json(const RatingAggregate& agg) {
    auto split = [](const PreferenceSplit& s) {
        return OrderedJson{{"a", s.counts[0]},
                           {"b", s.counts[1]},
                           {"equal", s.counts[2]},
                           {"percent", {{"a", s.percent[0]}, {"b", s.percent[1]}, {"equal", s.percent[2]}}}};
    };
    OrderedJson cases = OrderedJson::object();
    for (const auto& [ref, o] : agg.per_case) {
        cases[ref] = to_string(o);
    }
    return OrderedJson{{"records", agg.records},
                       {"total", {{"a", agg.total_a}, {"b", agg.total_b}}},
                       {"exclusive", split(agg.exclusive)},
                       {"cases", agg.cases},
                       {"majority_total", {{"a", agg.majority_total_a}, {"b", agg.majority_total_b}}},
                       {"majority", split(agg.majority)},
                       {"per_case", std::move(cases)}};
}

OrderedJson rating_to_json(const RatingRecord& r) {
    OrderedJson j{{"rater_id", r.rater_id},
                  {"case_ref", r.case_ref},
                  {"points_a", r.points_a},
                  {"points_b", r.points_b},
                  {"comment", r.comment}};
    if (!r.pair_id.empty()) {
        j["pair_id"] = r.pair_id;
    }
    return j;
}

RatingRecord rating_from_json(const Json& j) {
    if (!j.is_object()) {
        throw LoadError("rating must be an object");
    }
    RatingRecord r;
    r.rater_id = optional_string(j, "rater_id");
    r.case_ref = require_string(j, "case_ref", 0);
    r.points_a = static_cast<int>(require_integer(j, "points_a", 0));
    r.points_b = static_cast<int>(require_integer(j, "points_b", 0));
    r.comment = optional_string(j, "comment");
    r.pair_id = optional_string(j, "pair_id");
    validate_rating(r);
    return r;
}

void write_ratings(const std::vector<RatingRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        out << rating_to_json(r).dump() << '\n';
    }
}

std::vector<RatingRecord> read_ratings(std::istream& in) {
    std::vector<RatingRecord> out;
    for_each_record(in, [&](const Json& j, std::size_t line) {
        try {
            out.push_back(rating_from_json(j));
        } catch (const Error& e) {
            throw LoadError("line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

void write_sheet_instances(const std::vector<SheetInstance>& instances, std::ostream& out) {
    for (const auto& s : instances) {
        out << OrderedJson{{"instance_id", s.instance_id},
                           {"prompt", render_prompt(s.context, s.codes)},
                           {"probability", s.probability}}
                   .dump()
            << '\n';
    }
}

std::vector<SheetInstance> read_sheet_instances(std::istream& in) {
    std::vector<SheetInstance> out;
    for_each_record(in, [&](const Json& j, std::size_t line) {
        SheetInstance s;
        s.instance_id = require_string(j, "instance_id", line);
        auto parsed = parse_prompt(require_string(j, "prompt", line));
        s.context = std::move(parsed.context);
        s.codes = std::move(parsed.codes);
        s.probability = require_number(j, "probability", line);
        out.push_back(std::move(s));
    });
    return out;
}

std::string label_for(std::size_t column) { return "M" + std::to_string(column + 1); }

namespace {

std::string describe_context(const GenerationContext& c, const std::string& target_name) {
    std::string out = "Patient: " + c.age_band + ", " + c.gender + ", presenting with " + c.rfe + "\n";
    out += "Previous question: " + c.previous_question + "\n";
    out += "Patient answer: " + c.previous_response + "\n";
    out += "Finding to ask next: " + target_name;
    return out;
}

std::size_t column_of(const std::string& label, std::size_t columns) {
    for (std::size_t i = 0; i < columns; ++i) {
        if (label_for(i) == label) return i;
    }
    throw NotFoundError("unknown model label '" + label + "'");
}

}  // namespace

RatingSheet build_rating_sheet(const std::vector<SheetInstance>& instances, const std::vector<EngineVariant>& models,
                               const NlgResources& resources, std::uint64_t seed, const SheetOptions& options) {
    if (models.empty()) {
        throw ContractError("a rating sheet needs at least one model");
    }
    if (options.per_class < 1) {
        throw ContractError("per_class must be at least 1");
    }
    RatingSheet sheet;
    sheet.shuffle_seed = seed;
    Rng rng(seed);
    std::vector<const SheetInstance*> chosen;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        const auto code = static_cast<EmoteCode>(c);
        std::vector<const SheetInstance*> pool;
        for (const auto& s : instances) {
            if (s.codes.emote == code && s.probability > options.probability_threshold) {
                pool.push_back(&s);
            }
        }
        shuffle(pool, rng);
        const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(options.per_class));
        if (take < static_cast<std::size_t>(options.per_class)) {
            sheet.warnings.push_back("class " + std::string(to_string(code)) + " has only " + std::to_string(take) +
                                     " qualifying instances of " + std::to_string(options.per_class) + " wanted");
        }
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    shuffle(chosen, rng);
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        const SheetInstance& s = *chosen[r];
        char id[32];
        std::snprintf(id, sizeof id, "r%03zu", r + 1);
        SheetRow row;
        row.row_id = id;
        row.instance_id = s.instance_id;
        row.context = describe_context(s.context, resources.kb.finding(s.codes.next_finding).name);
        row.predicted = s.codes.emote;
        row.probability = s.probability;
        std::vector<EngineVariant> order = models;
        shuffle(order, rng);
        for (const auto v : order) {
            row.candidates.push_back(generate(v, resources, s.context, s.codes, rng).text);
        }
        sheet.key[row.row_id] = std::move(order);
        sheet.rows.push_back(std::move(row));
    }
    return sheet;
}

EngineVariant deanonymize(const RatingSheet& sheet, const std::string& row_id, const std::string& label) {
    const auto it = sheet.key.find(row_id);
    if (it == sheet.key.end()) {
        throw NotFoundError("no key entry for row '" + row_id + "'");
    }
    return it->second[column_of(label, it->second.size())];
}

void validate_axis_rating(const AxisRating& r) {
    for (int v : {r.medical, r.fluency, r.empathy}) {
        if (v < 1 || v > 5) {
            throw ContractError("axis scores must be between 1 and 5");
        }
    }
}

std::map<EngineVariant, AxisSummary> summarize_axis_ratings(const RatingSheet& sheet,
                                                            const std::vector<AxisRating>& ratings) {
    std::map<EngineVariant, std::array<long long, 4>> sums;
    for (const auto& r : ratings) {
        validate_axis_rating(r);
        auto& s = sums[deanonymize(sheet, r.row_id, r.label)];
        ++s[0];
        s[1] += r.medical;
        s[2] += r.fluency;
        s[3] += r.empathy;
    }
    std::map<EngineVariant, AxisSummary> out;
    for (const auto& [v, s] : sums) {
        const double n = static_cast<double>(s[0]);
        out[v] = {static_cast<int>(s[0]), s[1] / n, s[2] / n, s[3] / n};
    }
    return out;
}

std::string render_table2(const std::map<EngineVariant, AxisSummary>& summary) {
    std::ostringstream out;
    out << pad("Model", 18) << pad("Medical", 10) << pad("Fluency", 10) << pad("Empathy", 10) << "Ratings\n";
    for (const auto& [v, s] : summary) {
        out << pad(std::string(to_string(v)), 18) << pad(fixed(s.medical, 3), 10) << pad(fixed(s.fluency, 3), 10)
            << pad(fixed(s.empathy, 3), 10) << s.ratings << '\n';
    }
    out << "Means over all ratings; no significance test is applied.\n";
    return out.str();
}

void write_sheet(const RatingSheet& sheet, std::ostream& out) {
    out << OrderedJson{{"kind", "header"}, {"shuffle_seed", sheet.shuffle_seed}, {"warnings", sheet.warnings}}.dump()
        << '\n';
    for (const auto& r : sheet.rows) {
        OrderedJson candidates = OrderedJson::object();
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            candidates[label_for(i)] = r.candidates[i];
        }
        out << OrderedJson{{"kind", "row"},
                           {"row_id", r.row_id},
                           {"instance_id", r.instance_id},
                           {"predicted", to_string(r.predicted)},
                           {"probability", r.probability},
                           {"context", r.context},
                           {"candidates", std::move(candidates)}}
                   .dump()
            << '\n';
    }
}

void write_sheet_key(const RatingSheet& sheet, std::ostream& out) {
    for (const auto& [row_id, order] : sheet.key) {
        OrderedJson labels = OrderedJson::object();
        for (std::size_t i = 0; i < order.size(); ++i) {
            labels[label_for(i)] = to_string(order[i]);
        }
        out << OrderedJson{{"row_id", row_id}, {"labels", std::move(labels)}}.dump() << '\n';
    }
}

RatingSheet read_sheet(std::istream& sheet_in, std::istream* key_in) {
    RatingSheet sheet;
    for_each_record(sheet_in, [&](const Json& j, std::size_t line) {
        const auto kind = require_string(j, "kind", line);
        if (kind == "header") {
            sheet.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
            sheet.warnings = j.value("warnings", std::vector<std::string>{});
            return;
        }
        if (kind != "row") {
            throw LoadError("line " + std::to_string(line) + ": unknown sheet record kind '" + kind + "'");
        }
        SheetRow r;
        r.row_id = require_string(j, "row_id", line);
        r.instance_id = require_string(j, "instance_id", line);
        r.predicted = emote_code_from_string(require_string(j, "predicted", line));
        r.probability = require_number(j, "probability", line);
        r.context = require_string(j, "context", line);
        const auto& c = j.at("candidates");
        for (std::size_t i = 0; i < c.size(); ++i) {
            r.candidates.push_back(c.at(label_for(i)).get<std::string>());
        }
        sheet.rows.push_back(std::move(r));
    });
    if (key_in != nullptr) {
        for_each_record(*key_in, [&](const Json& j, std::size_t line) {
            const auto row_id = require_string(j, "row_id", line);
            const auto& labels = j.at("labels");
            std::vector<EngineVariant> order;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                order.push_back(engine_variant_from_string(labels.at(label_for(i)).get<std::string>()));
            }
            sheet.key[row_id] = std::move(order);
        });
    }
    return sheet;
}

void write_axis_ratings(const std::vector<AxisRating>& ratings, std::ostream& out) {
    for (const auto& r : ratings) {
        out << OrderedJson{{"row_id", r.row_id},     {"rater_id", r.rater_id}, {"label", r.label},
                           {"medical", r.medical},   {"fluency", r.fluency},   {"empathy", r.empathy}}
                   .dump()
            << '\n';
    }
}

std::vector<AxisRating> read_axis_ratings(std::istream& in) {
    std::vector<AxisRating> out;
    for_each_record(in, [&](const Json& j, std::size_t line) {
        AxisRating r;
        r.row_id = require_string(j, "row_id", line);
        r.rater_id = optional_string(j, "rater_id");
        r.label = require_string(j, "label", line);
        r.medical = static_cast<int>(require_integer(j, "medical", line));
        r.fluency = static_cast<int>(require_integer(j, "fluency", line));
        r.empathy = static_cast<int>(require_integer(j, "empathy", line));
        validate_axis_rating(r);
        out.push_back(r);
    });
    return out;
}

}  // namespace anamnesis
