// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include "fixtures.hpp"
#include "table1_fixture.hpp"

#include "anamnesis/classifier.hpp"
#include "anamnesis/dialogue.hpp"
#include "anamnesis/emote.hpp"
#include "anamnesis/eval.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/nlg.hpp"
#include "anamnesis/paraphrase.hpp"
#include "anamnesis/service.hpp"
#include "anamnesis/simulator.hpp"
#include "anamnesis/synthetic_emote.hpp"
#include "anamnesis/synthetic_kb.hpp"

// After the Eigen-using headers: <resolv.h> defines a _res macro.
#include "httplib.h"

using namespace anamnesis;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& what) {
        if (pass) detail += (detail.empty() ? "" : "; ") + what;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

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

const EmotionClassifier& corpus_classifier() {
    static const EmotionClassifier c = [] {
        const auto split = split_emote_dataset(make_synthetic_emote_corpus({100, 100, 100, 100}, 31), 0.8, 7);
        return train(split.train, std::make_shared<HashingEmbedder>(), ClassifierConfig{});
    }();
    return c;
}

Outcome emote_extraction() {
    Outcome o;
    const std::vector<std::string> questions = {
        "Do you have a fever?", "Is your back hurting?", "Are you coughing up phlegm?",
        "Do you have multiple sexual partners?", "Have you lost weight without trying?",
        "Does bright light bother you?", "Do you feel nauseous?", "Are your symptoms worse in the morning?"};
    const std::vector<std::string> suffixes = {"", "That is, does it come and go?", "Please take your time.",
                                               "For example, after meals.",
                                               "This helps me understand what is going on."};
    Rng rng(2024);
    std::vector<std::pair<std::string, std::string>> items;
    std::vector<std::string> expected;
    for (int i = 0; i < 200; ++i) {
        const auto& p = lexicon().phrases()[rng.uniform_index(lexicon().phrases().size())];
        const auto& q = questions[rng.uniform_index(questions.size())];
        const auto& s = suffixes[rng.uniform_index(suffixes.size())];
        const std::string prefix = surface_form(p.text);
        items.emplace_back(q, prefix + " " + q + (s.empty() ? "" : " " + s));
        expected.push_back(prefix);
    }
    const auto t0 = Clock::now();
    int recovered = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        recovered += extract_emote_phrase(items[i].first, items[i].second) == expected[i];
    }
    const double elapsed = seconds_since(t0);
    o.require(recovered >= 196, "recovered " + std::to_string(recovered) + "/200 < 98%");
    o.require(elapsed < 1.0, "runtime " + fmt("%.3f s", elapsed));
    o.note("recovered " + std::to_string(recovered) + "/200 in " + fmt("%.3f s", elapsed));
    return o;
}

Outcome simulator_soundness() {
    Outcome o;
    SimulatorConfig config;
    config.seed = 17;
    const auto t0 = Clock::now();
    std::vector<std::pair<const KnowledgeBase*, std::vector<ClinicalCase>>> batches;
    std::vector<KnowledgeBase> kbs;
    for (std::uint64_t k = 0; k < 5; ++k) kbs.push_back(make_synthetic_kb({}, 100 + k));
    SimulationStats total;
    std::vector<std::string> bytes;
    for (std::size_t k = 0; k < kbs.size(); ++k) {
        SimulationStats stats;
        auto cfg = config;
        cfg.seed = config.seed + k;
        auto cases = simulate_dataset(kbs[k], cfg, 100, &stats);
        total.assertions_sampled += stats.assertions_sampled;
        total.absent_sampled += stats.absent_sampled;
        std::ostringstream out;
        write_cases(cases, out);
        bytes.push_back(out.str());
        batches.emplace_back(&kbs[k], std::move(cases));
    }
    const double elapsed = seconds_since(t0);
    std::size_t accepted = 0, margin_ok = 0, violations = 0, too_long = 0;
    for (const auto& [kb, cases] : batches) {
        for (const auto& c : cases) {
            ++accepted;
            margin_ok += margin(differential(*kb, all_assertions(c))) >= config.margin_threshold;
            violations += validate_case(*kb, c).size();
            too_long += c.findings.size() > static_cast<std::size_t>(config.max_findings);
        }
    }
    bool identical = true;
    for (std::size_t k = 0; k < kbs.size(); ++k) {
        auto cfg = config;
        cfg.seed = config.seed + k;
        std::ostringstream out;
        write_cases(simulate_dataset(kbs[k], cfg, 100), out);
        identical = identical && out.str() == bytes[k];
    }
    const double absent = total.absent_rate();
    o.require(accepted == 500, "accepted " + std::to_string(accepted));
    o.require(margin_ok == accepted, "margin recomputation held for " + std::to_string(margin_ok));
    o.require(violations == 0, std::to_string(violations) + " exclusion violations");
    o.require(too_long == 0, std::to_string(too_long) + " cases longer than 20");
    o.require(identical, "same seed gave different bytes");
    o.require(std::abs(absent - config.p_absent) <= 0.05, "absent rate " + fmt("%.3f", absent));
    o.require(elapsed < 10.0, "runtime " + fmt("%.2f s", elapsed));
    o.note("500 cases, absent rate " + fmt("%.3f", absent) + ", " + fmt("%.2f s", elapsed));
    return o;
}

Outcome classifier_pipeline() {
    Outcome o;
    const auto split = split_emote_dataset(make_synthetic_emote_corpus({100, 100, 100, 100}, 31), 0.8, 7);
    const auto& c = corpus_classifier();
    const double accuracy = evaluate(c, split.test).accuracy;
    o.require(accuracy >= 0.95, "held-out accuracy " + fmt("%.3f", accuracy));

    const std::vector<std::string> words = {"yes", "no", "pain", "awful", "fever", "drug", "sorry", "the", "cough"};
    Rng rng(123);
    auto sentence = [&] {
        std::string s;
        for (auto n = rng.uniform_index(6); n > 0; --n) s += words[rng.uniform_index(words.size())] + " ";
        return s;
    };
    double worst_identity = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = c.attribute({sentence(), sentence(), sentence()});
        for (std::size_t k = 0; k < kEmoteCodeCount; ++k) {
            const double sum = a.biases[k] + a.contributions[k][0] + a.contributions[k][1] + a.contributions[k][2];
            worst_identity = std::max(worst_identity, std::abs(sum - a.logits[k]));
        }
    }
    o.require(worst_identity < 1e-9, "attribution identity error " + fmt("%.3g", worst_identity));

    Rng grng(99);
    Eigen::MatrixXd X(10, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = grng.uniform01() * 2 - 1;
    const std::vector<std::size_t> y = {0, 1, 2, 3, 0, 1, 2, 3, 0, 0};
    const auto w = balanced_class_weights(y, 4);
    LogRegModel m{Eigen::MatrixXd(4, 3), Eigen::VectorXd(4)};
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = grng.uniform01() - 0.5;
    for (Eigen::Index i = 0; i < 4; ++i) m.biases[i] = grng.uniform01() - 0.5;
    const auto g = logreg_gradient(m, X, y, 10.0, w);
    double worst_grad = 0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param, h = 1e-6;
        param = saved + h;
        const double up = logreg_objective(m, X, y, 10.0, w);
        param = saved - h;
        const double down = logreg_objective(m, X, y, 10.0, w);
        param = saved;
        worst_grad = std::max(worst_grad, std::abs((up - down) / (2 * h) - analytic));
    };
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) probe(m.weights.data()[i], g.weights.data()[i]);
    for (Eigen::Index i = 0; i < 4; ++i) probe(m.biases[i], g.biases[i]);
    o.require(worst_grad < 1e-5, "gradient error " + fmt("%.3g", worst_grad));

    const auto skewed = make_synthetic_emote_corpus({300, 40, 8, 4}, 77);
    const auto even = make_synthetic_emote_corpus({100, 100, 100, 100}, 78);
    auto embedder = std::make_shared<HashingEmbedder>();
    ClassifierConfig balanced;
    balanced.k = 20;
    ClassifierConfig plain = balanced;
    plain.balanced = false;
    const auto rb = evaluate(train(skewed, embedder, balanced), even);
    const auto ru = evaluate(train(skewed, embedder, plain), even);
    const auto apo = index_of(EmoteCode::apology);
    o.require(rb.per_class[apo].recall >= ru.per_class[apo].recall,
              "balanced minority recall " + fmt("%.3f", rb.per_class[apo].recall) + " < unweighted " +
                  fmt("%.3f", ru.per_class[apo].recall));

    std::vector<std::size_t> supports;
    const std::size_t counts[4] = {557, 127, 18, 6};
    for (std::size_t k = 0; k < 4; ++k) supports.insert(supports.end(), counts[k], k);
    const double w_none = balanced_class_weights(supports, 4)[0];
    o.require(std::abs(w_none - 0.318) < 1e-3, "w_none " + fmt("%.4f", w_none));

    o.note("accuracy " + fmt("%.3f", accuracy) + ", identity " + fmt("%.1e", worst_identity) + ", gradient " +
           fmt("%.1e", worst_grad) + ", apology recall " + fmt("%.2f", rb.per_class[apo].recall) + " vs " +
           fmt("%.2f", ru.per_class[apo].recall) + ", w_none " + fmt("%.4f", w_none));
    return o;
}

Outcome metric_arithmetic() {
    Outcome o;
    const ConfusionMatrix published = {{{550, 4, 2, 1}, {53, 71, 3, 0}, {4, 1, 13, 0}, {1, 0, 0, 5}}};
    const auto r = report_from_confusion(published);
    o.require(std::abs(r.accuracy - 0.90) <= 0.01, "accuracy " + fmt("%.4f", r.accuracy));
    o.require(std::abs(r.macro_f1 - 0.80) <= 0.01, "macro F1 " + fmt("%.4f", r.macro_f1));
    o.note("accuracy " + fmt("%.4f", r.accuracy) + ", macro F1 " + fmt("%.4f", r.macro_f1));
    return o;
}

Outcome rating_aggregation() {
    Outcome o;
    const auto agg = aggregate_ratings(fixtures::table1_records());
    const std::array<double, 3> raw{54.4, 17.8, 27.8};
    const std::array<double, 3> majority{66.7, 6.6, 26.7};
    o.require(agg.exclusive.percent == raw, "exclusive percentages differ");
    o.require(agg.majority.percent == majority, "majority percentages differ");
    o.require(agg.total_a == 63 && agg.total_b == 30, "totals differ");
    o.require(agg.majority_total_a == 24 && agg.majority_total_b == 6, "majority totals differ");
    o.note("54.4/17.8/27.8 and 66.7/6.6/26.7 over " + std::to_string(agg.records) + " records");
    return o;
}

Outcome nlg_contracts() {
    Outcome o;
    const auto& kb = fixtures::clinic_kb();
    const NlgResources r{kb, clinic_bank(), lexicon()};
    Rng rng(2718);
    int prefix_ok = 0, consistent = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto& f = kb.findings()[rng.uniform_index(kb.findings().size())];
        const EmoteCode code = kEmoteCodes[rng.uniform_index(kEmoteCodeCount)];
        const auto g = generate(EngineVariant::medcod, r, {}, {f.id, code}, rng);
        const auto cut = lexicon().leading_phrase_length(g.text);
        const bool ok = code == EmoteCode::none ? cut == 0
                                                : cut > 0 && lexicon().lookup(g.text.substr(0, cut)) == code;
        prefix_ok += ok;
        consistent += validate_consistency(g.text, f.id, clinic_bank(), lexicon());
    }
    o.require(prefix_ok == 1000, std::to_string(prefix_ok) + "/1000 carry the right phrase");
    o.require(consistent == 1000, std::to_string(consistent) + "/1000 consistent");

    int expert_ok = 0;
    for (const auto& f : kb.findings()) {
        std::set<std::string> texts;
        for (EmoteCode code : kEmoteCodes) texts.insert(generate(EngineVariant::expert, r, {}, {f.id, code}, rng).text);
        expert_ok += texts.size() == 1;
    }
    o.require(expert_ok == static_cast<int>(kb.findings().size()), "expert varies with the emote code");

    ClinicalCase c;
    c.age_band = "adult (41 to 64 yrs)";
    c.gender = "female";
    c.rfe = "nausea";
    c.findings = {{"fever", Polarity::present}, {"dry cough", Polarity::absent}, {"back pain", Polarity::present}};
    const auto build = build_medconv_dataset({c}, kb, clinic_bank(), lexicon(), 11);
    bool well_formed = build.instances.size() == 2;
    for (const auto& inst : build.instances) {
        try {
            const auto p = parse_prompt(inst.serialized_context);
            well_formed = well_formed && kb.find_finding(p.codes.next_finding) != nullptr;
        } catch (const Error&) {
            well_formed = false;
        }
    }
    o.require(well_formed, "3-finding case gave " + std::to_string(build.instances.size()) + " instances");
    o.note("1000/1000 prefixed and consistent, expert fixed for " + std::to_string(expert_ok) +
           " findings, 2 dataset instances");
    return o;
}

struct HttpRun {
    std::string transcript;
    std::string journal;
    std::string final_state;
    ConversationState live;
    bool ok = true;
};

HttpRun run_over_http(const std::vector<std::string>& script) {
    HttpRun run;
    std::ostringstream journal_out;
    Journal journal(journal_out);
    EngineConfig config;
    config.seed = 20211;
    const EngineResources res{fixtures::clinic_kb(), clinic_bank(), lexicon(), &corpus_classifier(), nullptr,
                              kDefaultConsistencyThreshold};
    DialogueEngine engine(res, config, &journal);
    Service service(engine);
    HttpServer server(service);
    const int port = server.bind("127.0.0.1", 0);
    std::thread t([&] { server.listen(); });
    for (int i = 0; i < 200 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    httplib::Client client("127.0.0.1", port);
    const Json start = {{"age_band", "young adult (18 to 40 yrs)"},
                        {"gender", "male"},
                        {"rfe", "abdominal fullness sensation"},
                        {"variant", "medcod"},
                        {"seed", 20211}};
    auto r = client.Post("/conversations", start.dump(), "application/json");
    if (!r || r->status != 201) {
        run.ok = false;
    } else {
        run.transcript += r->body + "\n";
        const std::string id = Json::parse(r->body)["session_id"];
        std::string type = Json::parse(r->body)["type"];
        for (std::size_t i = 0; i < script.size() && type != "conclusion"; ++i) {
            auto a = client.Post("/conversations/" + id + "/answers", Json{{"text", script[i]}}.dump(),
                                 "application/json");
            if (!a || a->status != 200) {
                run.ok = false;
                break;
            }
            run.transcript += a->body + "\n";
            type = Json::parse(a->body)["type"];
        }
        auto s = client.Get("/conversations/" + id);
        run.ok = run.ok && s && s->status == 200;
        if (s) run.final_state = s->body;
        run.live = engine.state(id);
    }
    server.stop();
    t.join();
    run.journal = journal_out.str();
    return run;
}

Outcome end_to_end() {
    Outcome o;
    const std::vector<std::string> script = {"Yes",  "No",  "yes, it's awful", "Nope", "I do",
                                             "no",   "Yes", "not really",      "yeah", "No"};
    const auto first = run_over_http(script);
    const auto second = run_over_http(script);
    o.require(first.ok && second.ok, "HTTP exchange failed");
    o.require(first.transcript == second.transcript, "transcripts differ");
    o.require(first.journal == second.journal, "journals differ");

    std::istringstream in(first.journal);
    const auto replayed = replay_journal(in);
    bool replay_ok = replayed.sessions.size() == 1;
    if (replay_ok) {
        const auto& st = replayed.sessions.begin()->second;
        replay_ok = st == first.live && state_to_json(st).dump() == first.final_state;
    }
    o.require(replay_ok, "replay does not reconstruct the final state");

    const auto& live = first.live;
    bool terminated = live.status == SessionStatus::concluded && live.conclusion.has_value();
    if (terminated) {
        const auto& c = *live.conclusion;
        terminated = (c.reason == Termination::margin && c.margin >= 20.0) ||
                     (c.reason == Termination::max_questions && c.question_count == 10);
    }
    o.require(terminated, "conversation did not conclude by margin or at 10 questions");
    if (live.conclusion) {
        o.note("concluded by " + std::string(to_string(live.conclusion->reason)) + " after " +
               std::to_string(live.question_count) + " questions; " +
               std::to_string(std::count(first.journal.begin(), first.journal.end(), '\n')) +
               " journal events identical across runs");
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"emote-extraction", emote_extraction},
        {"simulator-soundness", simulator_soundness},
        {"classifier-pipeline", classifier_pipeline},
        {"metric-arithmetic", metric_arithmetic},
        {"rating-aggregation", rating_aggregation},
        {"nlg-contracts", nlg_contracts},
        {"end-to-end-determinism", end_to_end},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
