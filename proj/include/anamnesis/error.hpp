#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace anamnesis {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document (bad field, out-of-range value, duplicate key).
class LoadError : public Error {
public:
    using Error::Error;
};

// Well-formed records that reference things that do not exist.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Caller violated an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& what, std::vector<std::string> suggestions = {})
        : Error(what), suggestions_(std::move(suggestions)) {}

    const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

private:
    std::vector<std::string> suggestions_;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class ExhaustionError : public Error {
public:
    using Error::Error;
};

class SessionError : public Error {
public:
    using Error::Error;
};

class ExternalError : public Error {
public:
    using Error::Error;
};

class ReplayError : public Error {
public:
    ReplayError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace anamnesis
