#include <chrono>

#include "anamnesis/embedding.hpp"
#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/nlg.hpp"
#include "anamnesis/paraphrase.hpp"
#include "anamnesis/text.hpp"
#include "http_util.hpp"

namespace anamnesis {

namespace detail {

Endpoint split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw ContractError("endpoint '" + url + "' must start with http://");
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, slash), url.substr(slash)};
}

std::string post_json(const std::string& url, const std::string& body, double timeout_seconds) {
    const Endpoint ep = split_endpoint(url);
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
        throw ExternalError("request to " + url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ExternalError("request to " + url + " returned status " + std::to_string(res->status));
    }
    return res->body;
}

}  // namespace detail

namespace {

Json parse_reply(const std::string& body, const std::string& url) {
    try {
        Json j = Json::parse(body);
        if (!j.is_object()) {
            throw ExternalError("reply from " + url + " is not an object");
        }
        return j;
    } catch (const Json::exception& e) {
        throw ExternalError("reply from " + url + " is not JSON: " + e.what());
    }
}

std::string text_field(const Json& j, const std::string& url) {
    const auto it = j.find("text");
    if (it == j.end() || !it->is_string()) {
        throw ExternalError("reply from " + url + " has no text field");
    }
    return it->get<std::string>();
}

}  // namespace

HttpParaphraseClient::HttpParaphraseClient(ParaphraseClientConfig config) : config_(std::move(config)) {
    detail::split_endpoint(config_.endpoint);
}

std::string HttpParaphraseClient::request_body(const Finding& finding, Rng& rng) const {
    std::vector<std::size_t> order(config_.primes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t take = std::min(order.size(), config_.primes_per_request);
    for (std::size_t i = 0; i < take; ++i) {
        std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
    }
    OrderedJson primes = OrderedJson::array();
    for (std::size_t i = 0; i < take; ++i) {
        const auto& [f, q] = config_.primes[order[i]];
        primes.push_back({{"finding", f}, {"question", q}});
    }
    return OrderedJson{{"finding_name", finding.name},
                       {"expert_question", finding.expert_question},
                       {"primes", std::move(primes)},
                       {"temperature", config_.temperature}}
        .dump();
}

std::vector<std::string> HttpParaphraseClient::propose(const Finding& finding, std::size_t k, Rng& rng) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < k; ++i) {
        const auto body = detail::post_json(config_.endpoint, request_body(finding, rng), config_.timeout_seconds);
        auto text = trim(text_field(parse_reply(body, config_.endpoint), config_.endpoint));
        if (!text.empty()) {
            out.push_back(std::move(text));
        }
    }
    return out;
}

HttpEmbedder::HttpEmbedder(EmbeddingClientConfig config) : config_(std::move(config)) {
    detail::split_endpoint(config_.endpoint);
    if (config_.dim == 0) {
        throw ContractError("embedding dimension must be positive");
    }
}

Eigen::VectorXd HttpEmbedder::embed(std::string_view text) const {
    const auto body = detail::post_json(config_.endpoint, OrderedJson{{"text", text}}.dump(), config_.timeout_seconds);
    const Json j = parse_reply(body, config_.endpoint);
    const auto it = j.find("embedding");
    if (it == j.end() || !it->is_array() || it->size() != config_.dim) {
        throw ExternalError("reply from " + config_.endpoint + " lacks an embedding of length " +
                            std::to_string(config_.dim));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(config_.dim));
    for (std::size_t i = 0; i < config_.dim; ++i) {
        if (!(*it)[i].is_number()) {
            throw ExternalError("embedding from " + config_.endpoint + " contains a non-number");
        }
        v[static_cast<Eigen::Index>(i)] = (*it)[i].get<double>();
    }
    return v;
}

HttpExternalGenerator::HttpExternalGenerator(ExternalGeneratorConfig config) : config_(std::move(config)) {
    detail::split_endpoint(config_.endpoint);
}

std::string HttpExternalGenerator::request_body(const std::string& prompt) const {
    return OrderedJson{{"prompt", prompt}, {"max_tokens", config_.max_tokens}, {"temperature", config_.temperature}}
        .dump();
}

std::string HttpExternalGenerator::generate(const std::string& prompt) {
    const auto body = detail::post_json(config_.endpoint, request_body(prompt), config_.timeout_seconds);
    return text_field(parse_reply(body, config_.endpoint), config_.endpoint);
}

}  // namespace anamnesis
