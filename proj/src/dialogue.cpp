#include "anamnesis/dialogue.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "anamnesis/error.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

namespace {

constexpr std::array<std::string_view, 7> kYes = {"yes", "y", "yeah", "yep", "i do", "correct", "definitely"};
constexpr std::array<std::string_view, 6> kNo = {"no", "n", "nope", "not really", "i don't", "never"};

template <std::size_t N>
bool matches(const std::string& text, const std::array<std::string_view, N>& table) {
    for (auto entry : table) {
        const std::string e = normalize_for_match(entry);
        if (text == e || (text.size() > e.size() && text.compare(0, e.size(), e) == 0 && text[e.size()] == ' ')) {
            return true;
        }
    }
    return false;
}

OrderedJson margin_json(double m) { return std::isinf(m) ? OrderedJson("inf") : OrderedJson(m); }

double margin_from(const Json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") {
        return kInfiniteMargin;
    }
    if (!j.is_number()) {
        throw LoadError("margin must be a number or \"inf\"");
    }
    return j.get<double>();
}

}  // namespace

std::string_view to_string(ParsedAnswer a) {
    switch (a) {
        case ParsedAnswer::present: return "present";
        case ParsedAnswer::absent: return "absent";
        case ParsedAnswer::unknown: return "unknown";
    }
    return "unknown";
}

ParsedAnswer parse_answer(std::string_view raw) {
    const std::string text = normalize_for_match(raw);
    if (text.empty()) {
        return ParsedAnswer::unknown;
    }
    if (matches(text, kYes)) {
        return ParsedAnswer::present;
    }
    if (matches(text, kNo)) {
        return ParsedAnswer::absent;
    }
    return ParsedAnswer::unknown;
}

std::string_view to_string(EmoteMode m) { return m == EmoteMode::classifier ? "classifier" : "none"; }

EmoteMode emote_mode_from_string(std::string_view text) {
    if (text == "classifier") return EmoteMode::classifier;
    if (text == "none") return EmoteMode::none;
    throw LoadError("unknown emote mode '" + std::string(text) + "'");
}

void EngineConfig::validate() const {
    if (max_questions < 1) {
        throw ContractError("max_questions must be at least 1");
    }
    if (!(margin_threshold >= 0.0) || !(temperature > 0.0)) {
        throw ContractError("margin threshold must be non-negative and temperature positive");
    }
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::margin: return "margin";
        case Termination::max_questions: return "max_questions";
        case Termination::exhausted: return "exhausted";
    }
    return "exhausted";
}

Termination termination_from_string(std::string_view text) {
    if (text == "margin") return Termination::margin;
    if (text == "max_questions") return Termination::max_questions;
    if (text == "exhausted") return Termination::exhausted;
    throw LoadError("unknown termination reason '" + std::string(text) + "'");
}

std::string_view to_string(ReplyKind k) {
    switch (k) {
        case ReplyKind::question: return "question";
        case ReplyKind::clarification: return "clarification";
        case ReplyKind::conclusion: return "conclusion";
    }
    return "question";
}

void Journal::append(OrderedJson event) {
    std::lock_guard lock(mutex_);
    OrderedJson line;
    line["seq"] = next_seq_++;
    for (auto& [k, v] : event.items()) {
        line[k] = std::move(v);
    }
    out_ << line.dump() << '\n';
    out_.flush();
}

std::uint64_t Journal::next_seq() const {
    std::lock_guard lock(mutex_);
    return next_seq_;
}

void Journal::resume_after(std::uint64_t last_seq) {
    std::lock_guard lock(mutex_);
    next_seq_ = std::max(next_seq_, last_seq + 1);
}

ReplayResult replay_journal(std::istream& in) {
    ReplayResult result;
    std::string line;
    std::size_t offset = 0;
    while (true) {
        const std::size_t start = offset;
        if (!std::getline(in, line)) {
            break;
        }
        const bool terminated = !in.eof();
        offset += line.size() + (terminated ? 1 : 0);
        if (!terminated) {
            throw ReplayError("truncated journal record", start);
        }
        if (trim(line).empty()) {
            continue;
        }
        try {
            const Json e = Json::parse(line);
            const auto seq = e.at("seq").get<std::uint64_t>();
            if (seq <= result.last_seq) {
                throw ReplayError("sequence number " + std::to_string(seq) + " is not increasing", start);
            }
            result.last_seq = seq;
            const auto type = e.at("event").get<std::string>();
            const auto id = e.at("session_id").get<std::string>();
            if (type == "started") {
                if (result.sessions.count(id) != 0) {
                    throw ReplayError("session '" + id + "' started twice", start);
                }
                ConversationState st;
                st.session_id = id;
                st.age_band = e.at("age_band").get<std::string>();
                st.gender = e.at("gender").get<std::string>();
                st.rfe = e.at("rfe").get<std::string>();
                st.rfe_text = e.at("rfe_text").get<std::string>();
                st.config.variant = engine_variant_from_string(e.at("variant").get<std::string>());
                st.config.seed = e.at("seed").get<std::uint64_t>();
                st.config.max_questions = e.at("max_questions").get<int>();
                st.config.margin_threshold = e.at("margin_threshold").get<double>();
                st.config.emote_mode = emote_mode_from_string(e.at("emote_mode").get<std::string>());
                st.config.temperature = e.at("temperature").get<double>();
                st.assertions.push_back({st.rfe, Polarity::present});
                result.sessions.emplace(id, std::move(st));
                continue;
            }
            auto it = result.sessions.find(id);
            if (it == result.sessions.end()) {
                throw ReplayError("event for unknown session '" + id + "'", start);
            }
            ConversationState& st = it->second;
            if (st.status == SessionStatus::concluded) {
                throw ReplayError("event after session '" + id + "' concluded", start);
            }
            const bool pending = !st.turns.empty() && !st.turns.back().answer;
            if (type == "question_emitted") {
                if (pending) {
                    throw ReplayError("question emitted while another is unanswered", start);
                }
                Turn t;
                t.question = e.at("text").get<std::string>();
                t.codes.next_finding = e.at("finding").get<std::string>();
                t.codes.emote = emote_code_from_string(e.at("emote").get<std::string>());
                t.produced_by = engine_variant_from_string(e.at("produced_by").get<std::string>());
                st.turns.push_back(std::move(t));
                ++st.question_count;
            } else if (type == "answer_received") {
                if (!pending) {
                    throw ReplayError("answer without a pending question", start);
                }
                Turn& t = st.turns.back();
                const auto text = e.at("text").get<std::string>();
                const auto parsed = e.at("parsed").get<std::string>();
                if (parsed == "unknown") {
                    t.clarifications.push_back(text);
                } else if (parsed == "present" || parsed == "absent") {
                    t.answer = text;
                    t.parsed = parsed == "present" ? Polarity::present : Polarity::absent;
                    st.assertions.push_back({t.codes.next_finding, *t.parsed});
                } else {
                    throw ReplayError("unknown parsed value '" + parsed + "'", start);
                }
            } else if (type == "concluded") {
                if (pending) {
                    throw ReplayError("conclusion while a question is unanswered", start);
                }
                Conclusion c;
                c.reason = termination_from_string(e.at("reason").get<std::string>());
                c.margin = margin_from(e.at("margin"));
                c.question_count = e.at("question_count").get<int>();
                st.conclusion = c;
                st.status = SessionStatus::concluded;
            } else {
                throw ReplayError("unknown event type '" + type + "'", start);
            }
        } catch (const ReplayError&) {
            throw;
        } catch (const Json::exception& ex) {
            throw ReplayError(std::string("corrupt journal record: ") + ex.what(), start);
        } catch (const Error& ex) {
            throw ReplayError(std::string("corrupt journal record: ") + ex.what(), start);
        }
    }
    return result;
}

DialogueEngine::DialogueEngine(EngineResources resources, EngineConfig defaults, Journal* journal)
    : resources_(resources), defaults_(defaults), journal_(journal) {
    defaults_.validate();
    if (defaults_.emote_mode == EmoteMode::classifier && resources_.classifier == nullptr) {
        warnings.push_back("emote mode is classifier but no model is loaded; questions carry no emote");
    }
}

std::shared_ptr<DialogueEngine::Session> DialogueEngine::find(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        throw SessionError("unknown session '" + session_id + "'");
    }
    return it->second;
}

std::string DialogueEngine::allocate_id() {
    std::unique_lock lock(sessions_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
    return buf;
}

void DialogueEngine::log(bool journal, OrderedJson event) {
    if (journal && journal_ != nullptr) {
        journal_->append(std::move(event));
    }
}

StartResult DialogueEngine::start(const StartRequest& request) {
    if (trim(request.age_band).empty() || trim(request.gender).empty()) {
        throw ContractError("age_band and gender are required");
    }
    const auto match = resolve_finding_name(resources_.kb, request.rfe_text);
    if (!match) {
        std::vector<std::string> names;
        for (const auto& s : suggest_findings(resources_.kb, request.rfe_text)) {
            names.push_back(resources_.kb.finding(s.finding_id).name);
        }
        throw NotFoundError("no finding matches '" + request.rfe_text + "'", names);
    }
    EngineConfig config = defaults_;
    if (request.variant) config.variant = *request.variant;
    if (request.seed) config.seed = *request.seed;
    return open(allocate_id(), request, match->finding_id, config, true);
}

StartResult DialogueEngine::open(const std::string& id, const StartRequest& request, const std::string& rfe_id,
                                 const EngineConfig& config, bool journal) {
    auto session = std::make_shared<Session>();
    std::lock_guard session_lock(session->mutex);
    ConversationState& st = session->state;
    st.session_id = id;
    st.age_band = request.age_band;
    st.gender = request.gender;
    st.rfe = rfe_id;
    st.rfe_text = request.rfe_text;
    st.config = config;
    st.assertions.push_back({rfe_id, Polarity::present});
    session->rng = Rng(Rng::derive(config.seed, fnv1a64(id)));
    {
        std::unique_lock lock(sessions_mutex_);
        if (!sessions_.emplace(id, session).second) {
            throw SessionError("session '" + id + "' already exists");
        }
    }
    log(journal, OrderedJson{{"event", "started"},
                             {"session_id", id},
                             {"age_band", st.age_band},
                             {"gender", st.gender},
                             {"rfe", st.rfe},
                             {"rfe_text", st.rfe_text},
                             {"variant", to_string(config.variant)},
                             {"seed", config.seed},
                             {"max_questions", config.max_questions},
                             {"margin_threshold", config.margin_threshold},
                             {"emote_mode", to_string(config.emote_mode)},
                             {"temperature", config.temperature}});
    return {id, step(*session, journal, {})};
}

Reply DialogueEngine::answer(const std::string& session_id, std::string_view raw_text) {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    return answer_locked(*session, raw_text, true);
}

Reply DialogueEngine::answer_locked(Session& s, std::string_view raw_text, bool journal) {
    ConversationState& st = s.state;
    if (st.status == SessionStatus::concluded) {
        throw SessionError("session '" + st.session_id + "' has concluded");
    }
    if (st.turns.empty() || st.turns.back().answer) {
        throw SessionError("session '" + st.session_id + "' has no pending question");
    }
    Turn& turn = st.turns.back();
    const ParsedAnswer parsed = parse_answer(raw_text);
    log(journal, OrderedJson{{"event", "answer_received"},
                             {"session_id", st.session_id},
                             {"text", raw_text},
                             {"parsed", to_string(parsed)}});
    if (parsed == ParsedAnswer::unknown) {
        turn.clarifications.emplace_back(raw_text);
        Reply r;
        r.kind = ReplyKind::clarification;
        r.text = "Sorry, I didn't understand. Please answer yes or no. " + turn.question;
        r.codes = turn.codes;
        r.question_count = st.question_count;
        return r;
    }
    turn.answer = std::string(raw_text);
    turn.parsed = parsed == ParsedAnswer::present ? Polarity::present : Polarity::absent;
    st.assertions.push_back({turn.codes.next_finding, *turn.parsed});
    return step(s, journal, {});
}

DifferentialDiagnosis DialogueEngine::differential_of(const ConversationState& st) const {
    return anamnesis::differential(resources_.kb, st.assertions, st.config.temperature);
}

Reply DialogueEngine::step(Session& s, bool journal, std::vector<std::string> warnings_out) {
    ConversationState& st = s.state;
    const KnowledgeBase& kb = resources_.kb;
    DifferentialDiagnosis dd = differential_of(st);
    const double m = margin(dd);

    std::optional<Termination> reason;
    std::optional<std::string> next;
    if (m >= st.config.margin_threshold) {
        reason = Termination::margin;
    } else if (st.question_count >= st.config.max_questions) {
        reason = Termination::max_questions;
    } else if (next = next_finding(kb, st.assertions, dd); !next) {
        reason = Termination::exhausted;
    }

    Reply r;
    r.warnings = std::move(warnings_out);
    if (reason) {
        st.status = SessionStatus::concluded;
        st.conclusion = Conclusion{*reason, m, st.question_count};
        log(journal, OrderedJson{{"event", "concluded"},
                                 {"session_id", st.session_id},
                                 {"reason", to_string(*reason)},
                                 {"margin", margin_json(m)},
                                 {"question_count", st.question_count}});
        r.kind = ReplyKind::conclusion;
        r.conclusion = st.conclusion;
        r.question_count = st.question_count;
        r.text = "Thank you for answering my questions.";
        if (!dd.entries.empty()) {
            r.text += " The condition that best fits your answers is " +
                      kb.find_disease(dd.entries.front().disease_id)->name + ".";
        }
        r.differential = std::move(dd);
        return r;
    }

    const Finding& target = kb.finding(*next);
    ContextTriple triple;
    GenerationContext ctx;
    if (!st.turns.empty()) {
        triple.previous_question = st.turns.back().question;
        triple.patient_response = st.turns.back().answer.value_or("");
    }
    triple.target_finding = target.name;
    ctx.age_band = st.age_band;
    ctx.gender = st.gender;
    ctx.rfe = kb.finding(st.rfe).name;
    for (std::size_t i = 1; i < st.assertions.size(); ++i) {
        ctx.prior_findings.emplace_back(kb.finding(st.assertions[i].finding_id).name, st.assertions[i].polarity);
    }
    ctx.previous_question = triple.previous_question;
    ctx.previous_response = triple.patient_response;

    ControlCodes codes{target.id, EmoteCode::none};
    if (st.config.emote_mode == EmoteMode::classifier && resources_.classifier != nullptr) {
        codes.emote = resources_.classifier->predict(triple).code;
    }
    const NlgResources nlg{kb, resources_.bank, resources_.lexicon, resources_.external,
                           resources_.consistency_threshold};
    Generation g = generate(st.config.variant, nlg, ctx, codes, s.rng);
    r.warnings.insert(r.warnings.end(), g.warnings.begin(), g.warnings.end());

    Turn turn;
    turn.question = g.text;
    turn.codes = codes;
    turn.produced_by = g.produced_by;
    st.turns.push_back(turn);
    ++st.question_count;
    log(journal, OrderedJson{{"event", "question_emitted"},
                             {"session_id", st.session_id},
                             {"finding", codes.next_finding},
                             {"emote", to_string(codes.emote)},
                             {"produced_by", to_string(g.produced_by)},
                             {"text", g.text}});
    r.kind = ReplyKind::question;
    r.text = g.text;
    r.codes = codes;
    r.question_count = st.question_count;
    return r;
}

ConversationState DialogueEngine::state(const std::string& session_id) const {
    auto session = find(session_id);
    std::lock_guard lock(session->mutex);
    return session->state;
}

DifferentialDiagnosis DialogueEngine::differential(const std::string& session_id) const {
    return differential_of(state(session_id));
}

std::vector<std::string> DialogueEngine::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, s] : sessions_) {
        ids.push_back(id);
    }
    return ids;
}

bool DialogueEngine::has_session(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.count(session_id) != 0;
}

std::size_t DialogueEngine::session_count() const {
    std::shared_lock lock(sessions_mutex_);
    return sessions_.size();
}

void DialogueEngine::recover(std::istream& journal) {
    const ReplayResult replayed = replay_journal(journal);
    for (const auto& [id, logged] : replayed.sessions) {
        StartRequest request{logged.age_band, logged.gender, logged.rfe_text, std::nullopt, std::nullopt};
        open(id, request, logged.rfe, logged.config, false);
        auto session = find(id);
        std::lock_guard lock(session->mutex);
        for (const auto& turn : logged.turns) {
            for (const auto& text : turn.clarifications) {
                answer_locked(*session, text, false);
            }
            if (turn.answer) {
                answer_locked(*session, *turn.answer, false);
            }
        }
        if (!(session->state == logged)) {
            throw ReplayError("re-running session '" + id + "' does not reproduce the journal", 0);
        }
        if (id.size() > 1 && id[0] == 's') {
            try {
                next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
            } catch (const std::exception&) {
            }
        }
    }
    if (journal_ != nullptr) {
        journal_->resume_after(replayed.last_seq);
    }
}

OrderedJson differential_to_json(const KnowledgeBase& kb, const DifferentialDiagnosis& dd) {
    OrderedJson entries = OrderedJson::array();
    for (const auto& e : dd.entries) {
        entries.push_back({{"disease_id", e.disease_id},
                           {"name", kb.find_disease(e.disease_id)->name},
                           {"raw_score", e.raw_score},
                           {"probability", e.probability}});
    }
    return OrderedJson{{"margin", margin_json(margin(dd))}, {"entries", std::move(entries)}};
}

OrderedJson reply_to_json(const KnowledgeBase& kb, const Reply& reply) {
    OrderedJson j;
    j["type"] = to_string(reply.kind);
    j["question_count"] = reply.question_count;
    switch (reply.kind) {
        case ReplyKind::question:
            j["question"] = reply.text;
            break;
        case ReplyKind::clarification:
            j["clarification"] = reply.text;
            break;
        case ReplyKind::conclusion:
            j["conclusion"] = {{"message", reply.text},
                               {"reason", to_string(reply.conclusion->reason)},
                               {"margin", margin_json(reply.conclusion->margin)},
                               {"question_count", reply.conclusion->question_count},
                               {"differential", differential_to_json(kb, *reply.differential)}};
            break;
    }
    if (reply.codes) {
        j["codes"] = {{"next_finding", reply.codes->next_finding}, {"emote", to_string(reply.codes->emote)}};
    }
    if (!reply.warnings.empty()) {
        j["warnings"] = reply.warnings;
    }
    return j;
}

OrderedJson state_to_json(const ConversationState& st) {
    OrderedJson assertions = OrderedJson::array();
    for (const auto& a : st.assertions) {
        assertions.push_back(a.finding_id + polarity_suffix(a.polarity));
    }
    OrderedJson turns = OrderedJson::array();
    for (const auto& t : st.turns) {
        OrderedJson tj{{"question", t.question},
                       {"next_finding", t.codes.next_finding},
                       {"emote", to_string(t.codes.emote)},
                       {"produced_by", to_string(t.produced_by)},
                       {"clarifications", t.clarifications},
                       {"answer", t.answer ? OrderedJson(*t.answer) : OrderedJson(nullptr)},
                       {"parsed", t.parsed ? OrderedJson(to_string(*t.parsed)) : OrderedJson(nullptr)}};
        turns.push_back(std::move(tj));
    }
    OrderedJson j{{"session_id", st.session_id},
                  {"age_band", st.age_band},
                  {"gender", st.gender},
                  {"rfe", st.rfe},
                  {"rfe_text", st.rfe_text},
                  {"variant", to_string(st.config.variant)},
                  {"seed", st.config.seed},
                  {"max_questions", st.config.max_questions},
                  {"margin_threshold", st.config.margin_threshold},
                  {"emote_mode", to_string(st.config.emote_mode)},
                  {"status", st.status == SessionStatus::active ? "active" : "concluded"},
                  {"question_count", st.question_count},
                  {"assertions", std::move(assertions)},
                  {"turns", std::move(turns)}};
    if (st.conclusion) {
        j["conclusion"] = {{"reason", to_string(st.conclusion->reason)},
                           {"margin", margin_json(st.conclusion->margin)},
                           {"question_count", st.conclusion->question_count}};
    } else {
        j["conclusion"] = nullptr;
    }
    return j;
}

}  // namespace anamnesis
