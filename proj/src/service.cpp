#include "anamnesis/service.hpp"

#include <ostream>
#include <regex>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"

namespace anamnesis {

namespace {

HttpResponse json_response(int status, const OrderedJson& body) { return {status, body.dump()}; }

HttpResponse error_response(int status, std::string_view kind, const std::string& message,
                            const std::vector<std::string>& suggestions = {}) {
    OrderedJson err{{"kind", kind}, {"message", message}};
    if (!suggestions.empty()) {
        err["suggestions"] = suggestions;
    }
    return json_response(status, OrderedJson{{"error", std::move(err)}});
}

std::string string_field(const Json& body, const char* field) {
    const auto it = body.find(field);
    if (it == body.end() || !it->is_string()) {
        throw ContractError(std::string("field '") + field + "' must be a string");
    }
    return it->get<std::string>();
}

StartRequest start_request(const Json& body) {
    StartRequest r;
    r.age_band = string_field(body, "age_band");
    r.gender = string_field(body, "gender");
    r.rfe_text = string_field(body, "rfe");
    if (body.contains("seed") && !body["seed"].is_null()) {
        if (!body["seed"].is_number_unsigned()) {
            throw ContractError("field 'seed' must be a non-negative integer");
        }
        r.seed = body["seed"].get<std::uint64_t>();
    }
    return r;
}

// Removes everything that would reveal which variant drives a session.
void redact(OrderedJson& j) {
    if (!j.is_object()) return;
    j.erase("variant");
    j.erase("codes");
    j.erase("emote");
    j.erase("produced_by");
    j.erase("emote_mode");
    if (j.contains("turns")) {
        for (auto& t : j["turns"]) redact(t);
    }
}

const std::regex kConversation(R"(^/conversations/([^/]+)$)");
const std::regex kAnswers(R"(^/conversations/([^/]+)/answers$)");
const std::regex kDifferential(R"(^/conversations/([^/]+)/differential$)");
const std::regex kPair(R"(^/pairs/([^/]+)$)");

}  // namespace

Service::Service(DialogueEngine& engine, std::uint64_t pair_seed, std::ostream* ratings_out)
    : engine_(engine), pair_seed_(pair_seed), ratings_out_(ratings_out) {}

HttpResponse Service::handle(const HttpRequest& request) {
    try {
        return route(request);
    } catch (const Json::exception& e) {
        return error_response(400, "bad_request", std::string("malformed JSON: ") + e.what());
    } catch (const NotFoundError& e) {
        return error_response(404, "not_found", e.what(), e.suggestions());
    } catch (const SessionError& e) {
        return error_response(409, "session", e.what());
    } catch (const ContractError& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const LoadError& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const ExternalError& e) {
        return error_response(502, "external", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

HttpResponse Service::route(const HttpRequest& req) {
    std::smatch m;
    const std::string& path = req.path;
    auto body = [&] {
        Json j = req.body.empty() ? Json::object() : Json::parse(req.body);
        if (!j.is_object()) throw ContractError("request body must be a JSON object");
        return j;
    };
    auto known = [&](const std::string& id) {
        if (!engine_.has_session(id)) throw NotFoundError("unknown session '" + id + "'");
    };
    if (req.method == "GET") {
        if (path == "/healthz") {
            const auto& kb = engine_.resources().kb;
            return json_response(200, OrderedJson{{"status", "ok"},
                                                  {"sessions", engine_.session_count()},
                                                  {"diseases", kb.diseases().size()},
                                                  {"findings", kb.findings().size()},
                                                  {"classifier", engine_.resources().classifier != nullptr}});
        }
        if (std::regex_match(path, m, kConversation)) {
            const std::string id = m[1];
            known(id);
            OrderedJson j = state_to_json(engine_.state(id));
            if (hidden(id)) redact(j);
            return json_response(200, j);
        }
        if (std::regex_match(path, m, kDifferential)) {
            const std::string id = m[1];
            known(id);
            return json_response(200, differential_to_json(engine_.resources().kb, engine_.differential(id)));
        }
        if (std::regex_match(path, m, kPair)) {
            return get_pair(m[1]);
        }
        if (path == "/ratings") {
            OrderedJson arr = OrderedJson::array();
            for (const auto& r : ratings()) arr.push_back(rating_to_json(r));
            return json_response(200, arr);
        }
        if (path == "/ratings/summary") {
            return ratings_summary();
        }
    } else if (req.method == "POST") {
        if (path == "/conversations") {
            return start_conversation(body());
        }
        if (std::regex_match(path, m, kAnswers)) {
            const std::string id = m[1];
            known(id);
            return answer(id, body());
        }
        if (path == "/pairs") {
            return create_pair(body());
        }
        if (path == "/ratings") {
            return post_rating(body());
        }
    }
    return error_response(404, "not_found", "no route for " + req.method + " " + path);
}

HttpResponse Service::start_conversation(const Json& body) {
    StartRequest r = start_request(body);
    if (body.contains("variant") && !body["variant"].is_null()) {
        r.variant = engine_variant_from_string(string_field(body, "variant"));
    }
    const auto started = engine_.start(r);
    OrderedJson j{{"session_id", started.session_id}};
    const OrderedJson reply = reply_to_json(engine_.resources().kb, started.reply);
    for (const auto& [k, v] : reply.items()) j[k] = v;
    return json_response(201, j);
}

HttpResponse Service::answer(const std::string& id, const Json& body) {
    const Reply reply = engine_.answer(id, string_field(body, "text"));
    OrderedJson j = reply_to_json(engine_.resources().kb, reply);
    if (hidden(id)) redact(j);
    return json_response(200, j);
}

bool Service::hidden(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    const auto it = session_pair_.find(session_id);
    return it != session_pair_.end() && !pairs_.at(it->second).rated;
}

HttpResponse Service::create_pair(const Json& body) {
    StartRequest r = start_request(body);
    PairRecord p;
    p.case_ref = string_field(body, "case_ref");
    p.variants = {EngineVariant::medcod, EngineVariant::expert};
    if (body.contains("variants")) {
        const auto& v = body["variants"];
        if (!v.is_array() || v.size() != 2) throw ContractError("field 'variants' must list two variants");
        p.variants = {engine_variant_from_string(v[0].get<std::string>()),
                      engine_variant_from_string(v[1].get<std::string>())};
    }
    std::uint64_t n;
    {
        std::lock_guard lock(mutex_);
        n = next_pair_++;
    }
    char id[32];
    std::snprintf(id, sizeof id, "p%06llu", static_cast<unsigned long long>(n));
    p.pair_id = id;
    Rng rng(Rng::derive(pair_seed_, n));
    p.swapped = rng.bernoulli(0.5);

    std::array<StartResult, 2> started;
    for (std::size_t i = 0; i < 2; ++i) {
        StartRequest side = r;
        side.variant = p.variants[i];
        started[i] = engine_.start(side);
    }
    const std::size_t shown_a = p.swapped ? 1 : 0;
    p.displayed_sessions = {started[shown_a].session_id, started[1 - shown_a].session_id};
    {
        std::lock_guard lock(mutex_);
        session_pair_[started[0].session_id] = p.pair_id;
        session_pair_[started[1].session_id] = p.pair_id;
        pairs_[p.pair_id] = p;
    }
    OrderedJson sessions = OrderedJson::object();
    for (std::size_t d = 0; d < 2; ++d) {
        const auto& s = started[d == 0 ? shown_a : 1 - shown_a];
        OrderedJson side{{"session_id", s.session_id}};
        const OrderedJson reply = reply_to_json(engine_.resources().kb, s.reply);
        for (const auto& [k, v] : reply.items()) side[k] = v;
        redact(side);
        sessions[d == 0 ? "A" : "B"] = std::move(side);
    }
    return json_response(201, OrderedJson{{"pair_id", p.pair_id}, {"case_ref", p.case_ref}, {"sessions", sessions}});
}

std::optional<PairRecord> Service::pair(const std::string& pair_id) const {
    std::lock_guard lock(mutex_);
    const auto it = pairs_.find(pair_id);
    if (it == pairs_.end()) return std::nullopt;
    return it->second;
}

HttpResponse Service::get_pair(const std::string& id) {
    const auto p = pair(id);
    if (!p) throw NotFoundError("unknown pair '" + id + "'");
    bool concluded = true;
    for (const auto& s : p->displayed_sessions) {
        concluded = concluded && engine_.state(s).status == SessionStatus::concluded;
    }
    OrderedJson j{{"pair_id", p->pair_id},
                  {"case_ref", p->case_ref},
                  {"sessions", {{"A", p->displayed_sessions[0]}, {"B", p->displayed_sessions[1]}}},
                  {"concluded", concluded},
                  {"rated", p->rated}};
    if (p->rated) {
        j["reveal"] = {{"A", to_string(p->variants[p->swapped ? 1 : 0])},
                       {"B", to_string(p->variants[p->swapped ? 0 : 1])}};
    }
    return json_response(200, j);
}

HttpResponse Service::post_rating(const Json& body) {
    RatingRecord r = rating_from_json(body);
    OrderedJson reply{{"record", rating_to_json(r)}};
    if (!r.pair_id.empty()) {
        std::lock_guard lock(mutex_);
        auto it = pairs_.find(r.pair_id);
        if (it == pairs_.end()) throw NotFoundError("unknown pair '" + r.pair_id + "'");
        PairRecord& p = it->second;
        if (p.rated) throw SessionError("pair '" + r.pair_id + "' has already been rated");
        for (const auto& s : p.displayed_sessions) {
            if (engine_.state(s).status != SessionStatus::concluded) {
                throw SessionError("both conversations of pair '" + r.pair_id + "' must conclude before rating");
            }
        }
        if (r.case_ref != p.case_ref) throw ContractError("case_ref does not match the pair");
        if (p.swapped) std::swap(r.points_a, r.points_b);
        p.rated = true;
        reply["reveal"] = {{"A", to_string(p.variants[p.swapped ? 1 : 0])},
                           {"B", to_string(p.variants[p.swapped ? 0 : 1])}};
    }
    {
        std::lock_guard lock(mutex_);
        ratings_.push_back(r);
        if (ratings_out_ != nullptr) {
            *ratings_out_ << rating_to_json(r).dump() << '\n';
            ratings_out_->flush();
        }
    }
    return json_response(201, reply);
}

HttpResponse Service::ratings_summary() {
    const auto records = ratings();
    std::string label_a = "A";
    std::string label_b = "B";
    {
        std::lock_guard lock(mutex_);
        std::optional<std::array<EngineVariant, 2>> shared;
        bool consistent = !records.empty();
        for (const auto& r : records) {
            const auto it = pairs_.find(r.pair_id);
            if (r.pair_id.empty() || it == pairs_.end() || (shared && *shared != it->second.variants)) {
                consistent = false;
                break;
            }
            shared = it->second.variants;
        }
        if (consistent && shared) {
            label_a = to_string((*shared)[0]);
            label_b = to_string((*shared)[1]);
        }
    }
    const auto agg = aggregate_ratings(records);
    OrderedJson j = aggregate_to_json(agg);
    j["labels"] = {{"a", label_a}, {"b", label_b}};
    j["table"] = render_table1(agg, label_a, label_b);
    return json_response(200, j);
}

void Service::load_ratings(std::vector<RatingRecord> records) {
    for (const auto& r : records) validate_rating(r);
    std::lock_guard lock(mutex_);
    ratings_.insert(ratings_.end(), records.begin(), records.end());
}

std::vector<RatingRecord> Service::ratings() const {
    std::lock_guard lock(mutex_);
    return ratings_;
}

}  // namespace anamnesis
