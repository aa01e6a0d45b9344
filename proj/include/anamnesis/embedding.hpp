#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace anamnesis {

// Text to fixed-size vector. Implementations must be deterministic and safe
// to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    // Stable identifier recorded in model files, e.g. "hashing-bow-v1:384".
    virtual std::string id() const = 0;
    virtual Eigen::VectorXd embed(std::string_view text) const = 0;
};

// Signed feature hashing over lowercased alphanumeric unigrams and adjacent
// bigrams, L2-normalized. Text without tokens maps to the zero vector.
class HashingEmbedder : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 384;
    static constexpr std::string_view kIdPrefix = "hashing-bow-v1:";

    explicit HashingEmbedder(std::size_t dim = kDefaultDim);

    std::size_t dim() const override { return dim_; }
    std::string id() const override;
    Eigen::VectorXd embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

// Client for an embedding service: POST {"text": "..."} and expect
// {"embedding": [numbers...]} of length dim.
struct EmbeddingClientConfig {
    std::string endpoint;
    std::size_t dim = 0;
    std::string model_id = "external";
    double timeout_seconds = 10.0;
};

class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingClientConfig config);

    std::size_t dim() const override { return config_.dim; }
    std::string id() const override { return "http:" + config_.model_id + ":" + std::to_string(config_.dim); }
    Eigen::VectorXd embed(std::string_view text) const override;  // throws ExternalError

private:
    EmbeddingClientConfig config_;
};

// Rebuilds an embedder from a model file's id. Only the hashing family can be
// reconstructed offline; anything else throws ContractError.
std::shared_ptr<const Embedder> embedder_from_id(std::string_view id);

// Lowercased ASCII-alphanumeric runs; other bytes separate tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace anamnesis
