#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "anamnesis/dialogue.hpp"
#include "anamnesis/eval.hpp"

namespace anamnesis {

struct HttpRequest {
    std::string method;
    std::string path;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string body;
};

// A/B pair: two sessions on the same start request, shown to the rater as
// "A" and "B". variants[0] is the first requested variant; swapped records
// whether it is displayed as B. Identities are revealed only after rating.
struct PairRecord {
    std::string pair_id;
    std::string case_ref;
    std::array<EngineVariant, 2> variants{};
    bool swapped = false;
    std::array<std::string, 2> displayed_sessions;  // [A, B]
    bool rated = false;
};

// Transport-independent request router for the dialogue service:
//   GET  /healthz
//   POST /conversations                     {age_band, gender, rfe, variant?, seed?}
//   POST /conversations/{id}/answers        {text}
//   GET  /conversations/{id}
//   GET  /conversations/{id}/differential
//   POST /pairs                             {age_band, gender, rfe, case_ref, variants?, seed?}
//   GET  /pairs/{id}
//   POST /ratings                           {rater_id, case_ref, points_a, points_b, comment, pair_id?}
//   GET  /ratings
//   GET  /ratings/summary
// Ratings tied to a pair are stored with column A holding the pair's first
// requested variant, whichever side the rater saw it on.
class Service {
public:
    Service(DialogueEngine& engine, std::uint64_t pair_seed = 0, std::ostream* ratings_out = nullptr);

    HttpResponse handle(const HttpRequest& request);

    void load_ratings(std::vector<RatingRecord> records);
    std::vector<RatingRecord> ratings() const;
    std::optional<PairRecord> pair(const std::string& pair_id) const;

private:
    HttpResponse route(const HttpRequest& request);
    HttpResponse start_conversation(const Json& body);
    HttpResponse answer(const std::string& id, const Json& body);
    HttpResponse create_pair(const Json& body);
    HttpResponse get_pair(const std::string& id);
    HttpResponse post_rating(const Json& body);
    HttpResponse ratings_summary();
    bool hidden(const std::string& session_id) const;

    DialogueEngine& engine_;
    std::uint64_t pair_seed_;
    std::ostream* ratings_out_;
    mutable std::mutex mutex_;
    std::map<std::string, PairRecord> pairs_;
    std::map<std::string, std::string> session_pair_;
    std::vector<RatingRecord> ratings_;
    std::uint64_t next_pair_ = 1;
};

// Blocking HTTP front end over a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 binds an ephemeral port. Returns the bound port; throws ExternalError.
    int bind(const std::string& host, int port);
    void listen();  // blocks until stop()
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace anamnesis
