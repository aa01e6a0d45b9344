#include "anamnesis/embedding.hpp"

#include <cctype>
#include <charconv>

#include "anamnesis/error.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (c < 0x80 && std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) {
        throw ContractError("embedding dimension must be positive");
    }
}

std::string HashingEmbedder::id() const { return std::string(kIdPrefix) + std::to_string(dim_); }

Eigen::VectorXd HashingEmbedder::embed(std::string_view text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
    const auto tokens = tokenize(text);
    auto add = [&](const std::string& feature) {
        const std::uint64_t h = fnv1a64(feature);
        const auto index = static_cast<Eigen::Index>(h % dim_);
        v[index] += (h >> 63) ? -1.0 : 1.0;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add("u:" + tokens[i]);
        if (i + 1 < tokens.size()) {
            add("b:" + tokens[i] + " " + tokens[i + 1]);
        }
    }
    const double norm = v.norm();
    if (norm > 0.0) {
        v /= norm;
    }
    return v;
}

std::shared_ptr<const Embedder> embedder_from_id(std::string_view id) {
    if (id.substr(0, HashingEmbedder::kIdPrefix.size()) == HashingEmbedder::kIdPrefix) {
        const auto digits = id.substr(HashingEmbedder::kIdPrefix.size());
        std::size_t dim = 0;
        const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
        if (ec == std::errc() && end == digits.data() + digits.size() && dim > 0) {
            return std::make_shared<HashingEmbedder>(dim);
        }
    }
    throw ContractError("cannot rebuild embedder '" + std::string(id) + "'; supply it explicitly");
}

}  // namespace anamnesis
