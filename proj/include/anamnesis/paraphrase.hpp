#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anamnesis/kb.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

enum class EntrySource { expert, generated, manual };
enum class Validation { unknown, consistent, inconsistent };

std::string_view to_string(EntrySource s);
std::string_view to_string(Validation v);
EntrySource entry_source_from_string(std::string_view text);
Validation validation_from_string(std::string_view text);

struct ParaphraseEntry {
    std::string finding_id;
    std::string text;
    EntrySource source = EntrySource::generated;
    Validation validated = Validation::unknown;
    std::optional<std::string> note;

    bool operator==(const ParaphraseEntry&) const = default;
};

// Trims and ends the question with exactly one '?'. Throws ContractError on
// text that is empty after trimming.
std::string normalize_question(std::string_view text);

// Per-finding store of presence questions. Mutations are single-writer;
// const access is safe to share.
class ParaphraseBank {
public:
    // One expert entry per KB finding, validated consistent.
    static ParaphraseBank seed_from_kb(const KnowledgeBase& kb);

    // Adds a normalized entry; returns false when (finding_id, text) exists.
    bool add(ParaphraseEntry entry);

    // Throws NotFoundError when the entry does not exist. Expert entries stay
    // consistent whatever label is recorded against them.
    void record_validation(std::string_view finding_id, std::string_view text, Validation label,
                           std::optional<std::string> note = std::nullopt);

    bool contains(std::string_view finding_id, std::string_view text) const;
    bool has_finding(std::string_view finding_id) const;

    // Expert entries first, then consistent entries, each in insertion order.
    std::vector<std::string> serving_pool(std::string_view finding_id) const;
    const std::string& expert_question(std::string_view finding_id) const;

    std::vector<ParaphraseEntry> entries() const;
    const std::vector<ParaphraseEntry>& entries_for(std::string_view finding_id) const;
    std::size_t size() const;

    bool operator==(const ParaphraseBank&) const = default;

private:
    std::map<std::string, std::vector<ParaphraseEntry>, std::less<>> by_finding_;
};

// Line-delimited {finding_id, text, source, validated, note}.
void save_bank(const ParaphraseBank& bank, std::ostream& out);
ParaphraseBank load_bank(std::istream& in);

// Consistency-rate summary over a set of labelled candidates.
struct ValidationReport {
    std::size_t consistent = 0;
    std::size_t inconsistent = 0;
    std::size_t unlabelled = 0;

    double consistency_rate() const;  // consistent / (consistent + inconsistent)
};
ValidationReport validation_report(const ParaphraseBank& bank);

// Source of paraphrase candidates for one finding.
class CandidateGenerator {
public:
    virtual ~CandidateGenerator() = default;
    virtual std::vector<std::string> propose(const Finding& finding, std::size_t k, Rng& rng) = 0;
};

// Offline stand-in for a language-model paraphraser: fixed rewrite templates
// keyed on body parts and a handful of symptom words. Always returns its full
// template expansion for the finding in a fixed order; rng is unused.
class RuleBasedParaphraser : public CandidateGenerator {
public:
    std::vector<std::string> propose(const Finding& finding, std::size_t k, Rng& rng) override;
};

// Client for an external paraphrasing service. Each call sends one request
// per wanted candidate:
//   {"finding_name","expert_question","primes":[{"finding","question"}...],"temperature"}
// and expects {"text": "..."} back.
struct ParaphraseClientConfig {
    std::string endpoint;  // http://host:port/path
    double temperature = 0.65;
    std::size_t primes_per_request = 10;
    std::vector<std::pair<std::string, std::string>> primes;  // (finding, manual paraphrase)
    double timeout_seconds = 10.0;
};

class HttpParaphraseClient : public CandidateGenerator {
public:
    explicit HttpParaphraseClient(ParaphraseClientConfig config);
    std::vector<std::string> propose(const Finding& finding, std::size_t k, Rng& rng) override;

    // The JSON body sent for one candidate; exposed for tests.
    std::string request_body(const Finding& finding, Rng& rng) const;

private:
    ParaphraseClientConfig config_;
};

// Collects k distinct normalized texts not already in the bank for the
// finding, calling the generator repeatedly. Each call that yields nothing
// new spends one unit of retry_budget; exhausting it throws GenerationError.
std::vector<std::string> generate_candidates(CandidateGenerator& generator, const ParaphraseBank& bank,
                                             const Finding& finding, std::size_t k, Rng& rng,
                                             std::size_t retry_budget = 5);

// diversity off: the expert question, no rng draw. On: uniform over the
// serving pool (one uniform_index draw).
std::string sample_question(const ParaphraseBank& bank, std::string_view finding_id, Rng& rng, bool diversity);

}  // namespace anamnesis
