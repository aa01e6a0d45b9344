#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "anamnesis/classifier.hpp"
#include "anamnesis/config.hpp"
#include "anamnesis/dialogue.hpp"
#include "anamnesis/embedding.hpp"
#include "anamnesis/emote.hpp"
#include "anamnesis/error.hpp"
#include "anamnesis/eval.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/nlg.hpp"
#include "anamnesis/paraphrase.hpp"
#include "anamnesis/service.hpp"
#include "anamnesis/simulator.hpp"
#include "anamnesis/synthetic_emote.hpp"
#include "anamnesis/synthetic_kb.hpp"

using namespace anamnesis;

namespace {

// Loaded service inputs; members referenced by the engine live here.
struct Loaded {
    std::optional<KnowledgeBase> kb;
    std::optional<ParaphraseBank> bank;
    EmoteLexicon lexicon = EmoteLexicon::defaults();
    std::optional<EmotionClassifier> classifier;
    std::unique_ptr<ExternalGenerator> external;

    EngineResources resources(int consistency_threshold) const {
        return {*kb,
                *bank,
                lexicon,
                classifier ? &*classifier : nullptr,
                external.get(),
                consistency_threshold};
    }
};

std::shared_ptr<const Embedder> embedder_for_model(const std::string& model_path, const ServiceConfig& cfg) {
    auto in = open_input(model_path);
    const Json j = Json::parse(in);
    const auto id = j.at("embedder").at("id").get<std::string>();
    if (id.rfind("http:", 0) == 0) {
        if (cfg.embedding_endpoint.empty()) {
            throw ContractError("model " + model_path + " needs an embedding service; set embedding_endpoint");
        }
        const auto last = id.rfind(':');
        EmbeddingClientConfig ec;
        ec.endpoint = cfg.embedding_endpoint;
        ec.model_id = id.substr(5, last - 5);
        ec.dim = std::stoul(id.substr(last + 1));
        ec.timeout_seconds = cfg.embedding_timeout;
        return std::make_shared<HttpEmbedder>(ec);
    }
    return embedder_from_id(id);
}

EmotionClassifier load_model(const std::string& path, const ServiceConfig& cfg) {
    auto embedder = embedder_for_model(path, cfg);
    auto in = open_input(path);
    return load_classifier(in, embedder);
}

Loaded load_resources(const ServiceConfig& cfg, bool need_classifier = false) {
    if (cfg.kb.empty()) {
        throw ContractError("a knowledge base is required (--kb or ANAMNESIS_KB)");
    }
    Loaded l;
    l.kb.emplace(load_kb_file(cfg.kb));
    if (cfg.bank.empty()) {
        l.bank.emplace(ParaphraseBank::seed_from_kb(*l.kb));
    } else {
        auto in = open_input(cfg.bank);
        l.bank.emplace(load_bank(in));
    }
    if (!cfg.lexicon.empty()) {
        auto in = open_input(cfg.lexicon);
        l.lexicon = load_lexicon(in);
    }
    if (!cfg.model.empty()) {
        l.classifier.emplace(load_model(cfg.model, cfg));
    } else if (need_classifier) {
        throw ContractError("an emotion model is required (--model)");
    }
    if (!cfg.external_endpoint.empty()) {
        ExternalGeneratorConfig ec;
        ec.endpoint = cfg.external_endpoint;
        ec.timeout_seconds = cfg.external_timeout;
        l.external = std::make_unique<HttpExternalGenerator>(ec);
    }
    return l;
}

// Registers one flag per config key; only flags actually given override.
struct ConfigFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "JSON config file");
        for (const auto& key : config_keys()) {
            std::string flag = "--" + key;
            for (auto& ch : flag) {
                if (ch == '_') ch = '-';
            }
            options[key] = app->add_option(flag, values[key], "config key " + key);
        }
    }

    ServiceConfig resolve() const {
        ServiceConfig cfg;
        if (!config_file.empty()) apply_config_file(cfg, config_file);
        for (const auto& name : apply_environment(cfg, [](const char* n) { return std::getenv(n); })) {
            std::cerr << "config: " << name << " from environment\n";
        }
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) set_config_value(cfg, key, values.at(key));
        }
        return cfg;
    }
};

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run_http(Service& service, const ServiceConfig& cfg) {
    HttpServer server(service);
    const int port = server.bind(cfg.host, cfg.port);
    std::cerr << "listening on " << cfg.host << ':' << port << '\n';
    server.listen();
    return 0;
}

int serve(const ServiceConfig& cfg) {
    Loaded l = load_resources(cfg);

    const bool have_journal = !cfg.journal.empty() && std::filesystem::exists(cfg.journal);
    std::ofstream journal_file;
    std::unique_ptr<Journal> journal;
    if (!cfg.journal.empty()) {
        journal_file.open(cfg.journal, std::ios::app);
        if (!journal_file) throw LoadError("cannot open journal " + cfg.journal);
        journal = std::make_unique<Journal>(journal_file);
    }
    DialogueEngine engine(l.resources(cfg.consistency_threshold), cfg.engine(), journal.get());
    print_warnings(engine.warnings);
    if (have_journal) {
        auto in = open_input(cfg.journal);
        engine.recover(in);
        std::cerr << "recovered " << engine.session_count() << " sessions from " << cfg.journal << '\n';
    }

    if (cfg.ratings.empty()) {
        Service service(engine, cfg.pair_seed);
        return run_http(service, cfg);
    }
    std::vector<RatingRecord> existing;
    if (std::filesystem::exists(cfg.ratings)) {
        auto in = open_input(cfg.ratings);
        existing = read_ratings(in);
    }
    std::ofstream ratings_file(cfg.ratings, std::ios::app);
    if (!ratings_file) throw LoadError("cannot open ratings file " + cfg.ratings);
    Service service(engine, cfg.pair_seed, &ratings_file);
    service.load_ratings(std::move(existing));
    return run_http(service, cfg);
}

int chat(const ServiceConfig& cfg, StartRequest request) {
    Loaded l = load_resources(cfg);
    DialogueEngine engine(l.resources(cfg.consistency_threshold), cfg.engine());
    print_warnings(engine.warnings);
    auto ask = [](const std::string& prompt, std::string& into) {
        if (!into.empty()) return true;
        std::cout << prompt << std::flush;
        return static_cast<bool>(std::getline(std::cin, into));
    };
    if (!ask("Age band: ", request.age_band) || !ask("Gender: ", request.gender) ||
        !ask("Reason for visit: ", request.rfe_text)) {
        return 1;
    }
    StartResult started;
    try {
        started = engine.start(request);
    } catch (const NotFoundError& e) {
        std::cerr << e.what() << '\n';
        for (const auto& s : e.suggestions()) std::cerr << "  did you mean: " << s << '\n';
        return 1;
    }
    const auto& kb = engine.resources().kb;
    Reply reply = started.reply;
    std::cout << "(type :dd for the current differential, :quit to stop)\n";
    while (true) {
        print_warnings(reply.warnings);
        if (reply.kind == ReplyKind::conclusion) {
            std::cout << reply.text << '\n';
            const auto dd = differential_to_json(kb, *reply.differential);
            for (std::size_t i = 0; i < std::min<std::size_t>(5, dd["entries"].size()); ++i) {
                const auto& e = dd["entries"][i];
                std::cout << "  " << e["name"].get<std::string>() << "  " << e["probability"].get<double>() << '\n';
            }
            return 0;
        }
        std::cout << reply.text << "\n> " << std::flush;
        std::string line;
        if (!std::getline(std::cin, line) || line == ":quit") return 0;
        if (line == ":dd") {
            std::cout << differential_to_json(kb, engine.differential(started.session_id)).dump(2) << '\n';
            continue;
        }
        reply = engine.answer(started.session_id, line);
    }
}

template <typename F>
void with_output(const std::string& path, F&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
    } else {
        auto out = open_output(path);
        fn(out);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"History-taking dialogue engine and data pipeline"};
    app.require_subcommand(1);

    ConfigFlags serve_flags;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP dialogue service");
    serve_flags.attach(serve_cmd);

    ConfigFlags chat_flags;
    StartRequest chat_request;
    auto* chat_cmd = app.add_subcommand("chat", "Terminal conversation over the same engine");
    chat_flags.attach(chat_cmd);
    chat_cmd->add_option("--age-band", chat_request.age_band);
    chat_cmd->add_option("--gender", chat_request.gender);
    chat_cmd->add_option("--rfe", chat_request.rfe_text, "Reason for encounter");

    std::string kb_path, out_path, bank_path, lexicon_path, model_path, data_path;
    std::uint64_t seed = 0;

    SimulatorConfig sim;
    std::size_t n_cases = 100;
    std::string synthetic_kb;
    auto* sim_cmd = app.add_subcommand("simulate", "Sample clinical cases from a knowledge base");
    sim_cmd->add_option("--kb", kb_path, "Knowledge base file");
    sim_cmd->add_option("--synthetic-kb", synthetic_kb, "Use a generated toy-scale KB with this seed instead");
    sim_cmd->add_option("-n,--cases", n_cases, "Accepted cases to produce");
    sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->add_option("--margin", sim.margin_threshold);
    sim_cmd->add_option("--p-absent", sim.p_absent);
    sim_cmd->add_option("--min-findings", sim.min_findings);
    sim_cmd->add_option("--max-findings", sim.max_findings);
    sim_cmd->add_option("-o,--out", out_path, "Output JSONL (default stdout)");

    std::string cases_path;
    bool no_emotes = false;
    auto* build_cmd = app.add_subcommand("build-dataset", "Build generator training instances from cases");
    build_cmd->add_option("--cases", cases_path)->required();
    build_cmd->add_option("--kb", kb_path)->required();
    build_cmd->add_option("--bank", bank_path, "Paraphrase bank (default: expert questions only)");
    build_cmd->add_option("--lexicon", lexicon_path);
    build_cmd->add_option("--seed", seed);
    build_cmd->add_flag("--no-emotes", no_emotes, "Leave every instance at emote none");
    build_cmd->add_option("-o,--out", out_path);

    ClassifierConfig ccfg;
    double train_fraction = 0.8;
    std::string pca_mode = "per_source", report_path, test_out;
    auto* train_cmd = app.add_subcommand("train-emotion", "Train the emotion classifier");
    train_cmd->add_option("--data", data_path, "Emote dataset rows (JSONL)")->required();
    train_cmd->add_option("--k", ccfg.k, "PCA components per source");
    train_cmd->add_option("--C", ccfg.C, "Inverse regularization strength");
    train_cmd->add_option("--seed", ccfg.seed);
    train_cmd->add_option("--pca-mode", pca_mode, "per_source or concatenated");
    train_cmd->add_flag("!--unbalanced", ccfg.balanced, "Disable class re-weighting");
    train_cmd->add_option("--train-fraction", train_fraction, "Stratified split; 1 trains on everything");
    train_cmd->add_option("--test-out", test_out, "Write the held-out rows here");
    train_cmd->add_option("-o,--out", out_path, "Model file")->required();

    bool as_json = false, high_precision = false;
    std::string embedding_endpoint;
    auto* eval_cmd = app.add_subcommand("eval-emotion", "Report classifier metrics on labelled rows");
    eval_cmd->add_option("--model", model_path)->required();
    eval_cmd->add_option("--data", data_path)->required();
    eval_cmd->add_option("--embedding-endpoint", embedding_endpoint);
    eval_cmd->add_flag("--json", as_json);
    eval_cmd->add_flag("--high-precision", high_precision, "Predict none below probability 0.8");

    std::string review_path;
    auto* mine_cmd = app.add_subcommand("mine-emotes", "Extract coded emote rows from edited questions");
    mine_cmd->add_option("--edits", data_path, "Edited question records (JSONL)")->required();
    mine_cmd->add_option("--lexicon", lexicon_path);
    mine_cmd->add_option("-o,--out", out_path)->required();
    mine_cmd->add_option("--review", review_path, "Unmatched phrases for manual review");

    std::size_t per_finding = 4;
    std::string paraphrase_endpoint;
    auto* para_cmd = app.add_subcommand("paraphrase", "Add unvalidated paraphrase candidates to a bank");
    para_cmd->add_option("--kb", kb_path)->required();
    para_cmd->add_option("--bank", bank_path, "Existing bank (default: seeded from the KB)");
    para_cmd->add_option("--k", per_finding, "Candidates per finding");
    para_cmd->add_option("--endpoint", paraphrase_endpoint, "Paraphrasing service (default: offline templates)");
    para_cmd->add_option("--seed", seed);
    para_cmd->add_option("-o,--out", out_path)->required();

    auto* corpus_cmd = app.add_subcommand("synth-emote-corpus", "Write a keyword-coded synthetic emote corpus");
    std::array<std::size_t, kEmoteCodeCount> counts{100, 100, 100, 100};
    corpus_cmd->add_option("--counts", counts, "Rows per code: none affirmative empathy apology")->expected(4);
    corpus_cmd->add_option("--seed", seed);
    corpus_cmd->add_option("-o,--out", out_path);

    std::string ratings_path;
    std::string label_a = "A", label_b = "B";
    auto* agg_cmd = app.add_subcommand("aggregate-ratings", "Summarize A/B preference ratings");
    agg_cmd->add_option("--ratings", ratings_path)->required();
    agg_cmd->add_option("--label-a", label_a);
    agg_cmd->add_option("--label-b", label_b);
    agg_cmd->add_flag("--json", as_json);

    std::string instances_path, key_path;
    std::vector<std::string> models = {"expert", "medcod_no_emote", "medcod"};
    SheetOptions sheet_opts;
    auto* sheet_cmd = app.add_subcommand("rating-sheet", "Build an anonymized three-axis rating sheet");
    sheet_cmd->add_option("--instances", instances_path, "Training instances (JSONL)")->required();
    sheet_cmd->add_option("--model", model_path, "Emotion model used to label the instances")->required();
    sheet_cmd->add_option("--kb", kb_path)->required();
    sheet_cmd->add_option("--bank", bank_path);
    sheet_cmd->add_option("--lexicon", lexicon_path);
    sheet_cmd->add_option("--models", models, "Variants to compare");
    sheet_cmd->add_option("--per-class", sheet_opts.per_class);
    sheet_cmd->add_option("--threshold", sheet_opts.probability_threshold);
    sheet_cmd->add_option("--seed", seed);
    sheet_cmd->add_option("-o,--out", out_path)->required();
    sheet_cmd->add_option("--key", key_path, "Anonymization key file")->required();

    std::string sheet_path;
    auto* sum_cmd = app.add_subcommand("sheet-summary", "Mean three-axis scores per model");
    sum_cmd->add_option("--sheet", sheet_path)->required();
    sum_cmd->add_option("--key", key_path)->required();
    sum_cmd->add_option("--ratings", ratings_path)->required();

    std::string journal_path;
    auto* replay_cmd = app.add_subcommand("replay", "Rebuild session states from a journal");
    replay_cmd->add_option("--journal", journal_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            return serve(serve_flags.resolve());
        }
        if (*chat_cmd) {
            return chat(chat_flags.resolve(), chat_request);
        }
        if (*sim_cmd) {
            std::optional<KnowledgeBase> kb;
            if (!synthetic_kb.empty()) {
                kb.emplace(make_synthetic_kb({}, std::stoull(synthetic_kb)));
            } else if (!kb_path.empty()) {
                kb.emplace(load_kb_file(kb_path));
            } else {
                throw ContractError("give --kb or --synthetic-kb");
            }
            SimulationStats stats;
            const auto cases = simulate_dataset(*kb, sim, n_cases, &stats);
            with_output(out_path, [&](std::ostream& out) { write_cases(cases, out); });
            std::cerr << "accepted " << stats.accepted << " of " << stats.attempts << " attempts, absent rate "
                      << stats.absent_rate() << '\n';
            return 0;
        }
        if (*build_cmd) {
            const auto kb = load_kb_file(kb_path);
            ParaphraseBank bank = ParaphraseBank::seed_from_kb(kb);
            if (!bank_path.empty()) {
                auto in = open_input(bank_path);
                bank = load_bank(in);
            }
            EmoteLexicon lexicon = EmoteLexicon::defaults();
            if (!lexicon_path.empty()) {
                auto in = open_input(lexicon_path);
                lexicon = load_lexicon(in);
            }
            auto in = open_input(cases_path);
            MedconvBuildOptions opts;
            opts.with_emotes = !no_emotes;
            const auto build = build_medconv_dataset(read_cases(in), kb, bank, lexicon, seed, opts);
            for (const auto& s : build.skipped) std::cerr << "skipped: " << s << '\n';
            with_output(out_path, [&](std::ostream& out) { write_training_instances(build.instances, out); });
            std::cerr << build.instances.size() << " instances\n";
            return 0;
        }
        if (*train_cmd) {
            ccfg.pca_mode = pca_mode_from_string(pca_mode);
            auto in = open_input(data_path);
            auto rows = read_emote_rows(in);
            std::vector<EmoteDatasetRow> train_rows = rows, test_rows;
            if (train_fraction < 1.0) {
                auto split = split_emote_dataset(rows, train_fraction, ccfg.seed);
                train_rows = std::move(split.train);
                test_rows = std::move(split.test);
            }
            const auto model = train(train_rows, std::make_shared<HashingEmbedder>(), ccfg);
            print_warnings(model.warnings);
            {
                auto out = open_output(out_path);
                save_classifier(model, out);
            }
            if (!test_out.empty()) {
                auto out = open_output(test_out);
                write_emote_rows(test_rows, out);
            }
            if (!test_rows.empty()) {
                std::cout << render_report(evaluate(model, test_rows));
            }
            return 0;
        }
        if (*eval_cmd) {
            ServiceConfig cfg;
            cfg.embedding_endpoint = embedding_endpoint;
            const auto model = load_model(model_path, cfg);
            auto in = open_input(data_path);
            const auto report = evaluate(model, read_emote_rows(in), high_precision);
            std::cout << (as_json ? report_to_json(report) + "\n" : render_report(report));
            return 0;
        }
        if (*mine_cmd) {
            EmoteLexicon lexicon = EmoteLexicon::defaults();
            if (!lexicon_path.empty()) {
                auto in = open_input(lexicon_path);
                lexicon = load_lexicon(in);
            }
            auto in = open_input(data_path);
            const auto build = build_emote_dataset(read_edit_records(in), lexicon);
            {
                auto out = open_output(out_path);
                write_emote_rows(build.rows, out);
            }
            if (!review_path.empty()) {
                auto out = open_output(review_path);
                write_review(build.review, out);
            }
            std::cerr << build.rows.size() << " rows, " << build.review.size() << " for review\n";
            return 0;
        }
        if (*para_cmd) {
            const auto kb = load_kb_file(kb_path);
            ParaphraseBank bank = ParaphraseBank::seed_from_kb(kb);
            if (!bank_path.empty()) {
                auto in = open_input(bank_path);
                bank = load_bank(in);
            }
            std::unique_ptr<CandidateGenerator> gen;
            if (paraphrase_endpoint.empty()) {
                gen = std::make_unique<RuleBasedParaphraser>();
            } else {
                ParaphraseClientConfig pc;
                pc.endpoint = paraphrase_endpoint;
                for (const auto& e : bank.entries()) {
                    if (e.source == EntrySource::manual) pc.primes.emplace_back(kb.finding(e.finding_id).name, e.text);
                }
                gen = std::make_unique<HttpParaphraseClient>(pc);
            }
            Rng rng(seed);
            std::size_t added = 0;
            for (const auto& f : kb.findings()) {
                try {
                    for (auto& text : generate_candidates(*gen, bank, f, per_finding, rng)) {
                        added += bank.add({f.id, std::move(text), EntrySource::generated, Validation::unknown, {}});
                    }
                } catch (const GenerationError& e) {
                    std::cerr << "warning: " << f.id << ": " << e.what() << '\n';
                }
            }
            auto out = open_output(out_path);
            save_bank(bank, out);
            std::cerr << added << " candidates added for review\n";
            return 0;
        }
        if (*corpus_cmd) {
            const auto rows = make_synthetic_emote_corpus(counts, seed);
            with_output(out_path, [&](std::ostream& out) { write_emote_rows(rows, out); });
            return 0;
        }
        if (*agg_cmd) {
            auto in = open_input(ratings_path);
            const auto agg = aggregate_ratings(read_ratings(in));
            std::cout << (as_json ? aggregate_to_json(agg).dump(2) + "\n" : render_table1(agg, label_a, label_b));
            return 0;
        }
        if (*sheet_cmd) {
            ServiceConfig cfg;
            cfg.kb = kb_path;
            cfg.bank = bank_path;
            cfg.lexicon = lexicon_path;
            cfg.model = model_path;
            Loaded l = load_resources(cfg, true);
            auto in = open_input(instances_path);
            std::vector<SheetInstance> instances;
            std::size_t n = 0;
            for (const auto& inst : read_training_instances(in)) {
                auto parsed = parse_prompt(inst.serialized_context);
                const ContextTriple triple{parsed.context.previous_question, parsed.context.previous_response,
                                           l.kb->finding(parsed.codes.next_finding).name};
                const auto p = l.classifier->predict(triple);
                parsed.codes.emote = p.code;
                instances.push_back({"i" + std::to_string(n++), parsed.context, parsed.codes,
                                     p.probabilities[index_of(p.code)]});
            }
            std::vector<EngineVariant> variants;
            for (const auto& m : models) variants.push_back(engine_variant_from_string(m));
            const NlgResources nlg{*l.kb, *l.bank, l.lexicon, nullptr, cfg.consistency_threshold};
            const auto sheet = build_rating_sheet(instances, variants, nlg, seed, sheet_opts);
            print_warnings(sheet.warnings);
            {
                auto out = open_output(out_path);
                write_sheet(sheet, out);
            }
            auto key = open_output(key_path);
            write_sheet_key(sheet, key);
            std::cerr << sheet.rows.size() << " rows\n";
            return 0;
        }
        if (*sum_cmd) {
            auto sin = open_input(sheet_path);
            auto kin = open_input(key_path);
            const auto sheet = read_sheet(sin, &kin);
            auto rin = open_input(ratings_path);
            std::cout << render_table2(summarize_axis_ratings(sheet, read_axis_ratings(rin)));
            return 0;
        }
        if (*replay_cmd) {
            auto in = open_input(journal_path);
            const auto result = replay_journal(in);
            for (const auto& [id, st] : result.sessions) std::cout << state_to_json(st).dump() << '\n';
            std::cerr << result.sessions.size() << " sessions, last seq " << result.last_seq << '\n';
            return 0;
        }
    } catch (const ReplayError& e) {
        std::cerr << "replay error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
