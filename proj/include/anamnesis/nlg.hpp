#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "anamnesis/emote.hpp"
#include "anamnesis/kb.hpp"
#include "anamnesis/paraphrase.hpp"
#include "anamnesis/rng.hpp"
#include "anamnesis/simulator.hpp"

namespace anamnesis {

struct ControlCodes {
    std::string next_finding;  // finding id
    EmoteCode emote = EmoteCode::none;

    bool operator==(const ControlCodes&) const = default;
};

struct GenerationContext {
    std::string age_band;
    std::string gender;
    std::string rfe;  // finding name
    std::vector<std::pair<std::string, Polarity>> prior_findings;  // (finding name, polarity) in assertion order
    std::string previous_question;
    std::string previous_response;

    bool operator==(const GenerationContext&) const = default;
};

// Single-line fielded prompt:
//   AGE=..|SEX=..|RFE=..|FINDINGS=name+;name-;..|PREVQ=..|PREVA=..|NEXT=<finding id>|EMOTE=<code>
// Inside values '\\', '|', ';' and newline are escaped as \\ \| \; \n.
std::string render_prompt(const GenerationContext& context, const ControlCodes& codes);

struct ParsedPrompt {
    GenerationContext context;
    ControlCodes codes;
};
ParsedPrompt parse_prompt(std::string_view prompt);  // throws LoadError

enum class EngineVariant { expert, medcod_no_emote, medcod, external };

std::string_view to_string(EngineVariant v);
EngineVariant engine_variant_from_string(std::string_view text);  // throws LoadError

inline constexpr int kDefaultConsistencyThreshold = 90;

// Out-of-process question generator. Implementations throw ExternalError on
// transport failures and timeouts.
class ExternalGenerator {
public:
    virtual ~ExternalGenerator() = default;
    virtual std::string generate(const std::string& prompt) = 0;
};

// POST {"prompt","max_tokens","temperature"} -> {"text"}.
struct ExternalGeneratorConfig {
    std::string endpoint;  // http://host:port/path
    int max_tokens = 64;
    double temperature = 0.7;
    double timeout_seconds = 5.0;
};

class HttpExternalGenerator : public ExternalGenerator {
public:
    explicit HttpExternalGenerator(ExternalGeneratorConfig config);
    std::string generate(const std::string& prompt) override;
    std::string request_body(const std::string& prompt) const;

private:
    ExternalGeneratorConfig config_;
};

// Shared read-only inputs of generation.
struct NlgResources {
    const KnowledgeBase& kb;
    const ParaphraseBank& bank;
    const EmoteLexicon& lexicon;
    ExternalGenerator* external = nullptr;
    int consistency_threshold = kDefaultConsistencyThreshold;
};

struct Generation {
    std::string text;
    EngineVariant produced_by = EngineVariant::expert;  // medcod when the external variant fell back
    std::vector<std::string> warnings;
};

// expert: the KB question, emote ignored, no rng draw.
// medcod_no_emote: a serving-pool paraphrase, emote ignored.
// medcod: surface emote phrase (code != none) + " " + paraphrase; the phrase
//   is drawn before the paraphrase.
// external: the external generator's answer if it passes
//   validate_consistency, otherwise medcod.
// Throws NotFoundError for a finding that is not in the KB or bank.
Generation generate(EngineVariant variant, const NlgResources& resources, const GenerationContext& context,
                    const ControlCodes& codes, Rng& rng);

// Drops a leading lexicon phrase and compares the rest with the finding's
// serving pool.
bool validate_consistency(std::string_view question, std::string_view finding_id, const ParaphraseBank& bank,
                          const EmoteLexicon& lexicon, int threshold = kDefaultConsistencyThreshold);

struct TrainingInstance {
    std::string serialized_context;
    std::string target_text;

    bool operator==(const TrainingInstance&) const = default;
};

struct MedconvBuildOptions {
    bool with_emotes = true;
    std::array<double, kEmoteCodeCount> emote_weights = {1.0, 1.0, 1.0, 1.0};
    int max_findings = 20;
};

struct MedconvBuild {
    std::vector<TrainingInstance> instances;
    std::vector<std::string> skipped;  // one line per rejected case
};

// For each case (Rng::derive(seed, case index)) and each consecutive pair of
// asked findings, one instance predicting the second from the first: the
// previous turn is a sampled question for the first finding answered "Yes"
// or "No" by its polarity. The RFE is context only. Draw order per instance:
// previous question, emote code, emote phrase, target paraphrase.
MedconvBuild build_medconv_dataset(const std::vector<ClinicalCase>& cases, const KnowledgeBase& kb,
                                   const ParaphraseBank& bank, const EmoteLexicon& lexicon, std::uint64_t seed,
                                   const MedconvBuildOptions& options = {});

void write_training_instances(const std::vector<TrainingInstance>& instances, std::ostream& out);
std::vector<TrainingInstance> read_training_instances(std::istream& in);

}  // namespace anamnesis
