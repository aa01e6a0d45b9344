#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anamnesis/dialogue.hpp"
#include "anamnesis/nlg.hpp"

namespace anamnesis {

// ---- paired A/B conversations ----

struct PairedTranscript {
    std::string case_ref;
    std::array<EngineVariant, 2> variants{};
    std::array<std::string, 2> session_ids;
    std::array<std::vector<Turn>, 2> transcripts;
    std::array<std::optional<Conclusion>, 2> conclusions;
    std::vector<std::string> answers_used;
    std::vector<std::string> divergences;  // recorded, never fatal
};

// Both engines get the same answer stream, one answer per step while either
// side still has a pending question. Throws ContractError when the script has
// fewer answers than either engine's max_questions.
PairedTranscript run_paired(DialogueEngine& a, DialogueEngine& b, const StartRequest& request,
                            const std::vector<std::string>& answers, const std::string& case_ref);

OrderedJson paired_to_json(const PairedTranscript& paired);

// ---- end-to-end preference ratings ----

struct RatingRecord {
    std::string rater_id;
    std::string case_ref;
    int points_a = 0;
    int points_b = 0;
    std::string comment;
    std::string pair_id;  // set when the record rates a server-side anonymized pair

    bool operator==(const RatingRecord&) const = default;
};

// (1,0), (0,1), or equal points with a non-blank comment. Throws ContractError.
void validate_rating(const RatingRecord& record);

// Three-way split: A only, B only, equal.
struct PreferenceSplit {
    std::array<int, 3> counts{};
    std::array<double, 3> percent{};  // one decimal, summing to exactly 100.0 when any count is non-zero
};

enum class CaseOutcome { a, b, equal };
std::string_view to_string(CaseOutcome outcome);

struct RatingAggregate {
    int records = 0;
    int total_a = 0;
    int total_b = 0;
    PreferenceSplit exclusive;
    int cases = 0;
    int majority_total_a = 0;
    int majority_total_b = 0;
    PreferenceSplit majority;
    std::map<std::string, CaseOutcome> per_case;
};

// Percentages at the given number of decimals by largest remainder; equal
// remainders go to the larger count, then to the earlier position.
std::array<double, 3> largest_remainder_percent(const std::array<int, 3>& counts, int decimals = 1);

// Per case, each column is reduced by strict majority of its raters, and the
// reduced pair is classified like a single record. Rejects invalid records.
RatingAggregate aggregate_ratings(const std::vector<RatingRecord>& records);

std::string render_table1(const RatingAggregate& aggregate, std::string_view label_a = "A",
                          std::string_view label_b = "B");
OrderedJson aggregate_to_json(const RatingAggregate& aggregate);

OrderedJson rating_to_json(const RatingRecord& record);
RatingRecord rating_from_json(const Json& j);  // throws LoadError / ContractError
void write_ratings(const std::vector<RatingRecord>& records, std::ostream& out);
std::vector<RatingRecord> read_ratings(std::istream& in);

// ---- three-axis generation rating sheets ----

struct SheetInstance {
    std::string instance_id;
    GenerationContext context;
    ControlCodes codes;  // codes.emote is the classifier's prediction
    double probability = 0.0;  // probability of the predicted class
};

// One line per instance: {"instance_id", "prompt", "probability"}.
void write_sheet_instances(const std::vector<SheetInstance>& instances, std::ostream& out);
std::vector<SheetInstance> read_sheet_instances(std::istream& in);

struct SheetRow {
    std::string row_id;
    std::string instance_id;
    std::string context;  // rendered prompt shown to raters
    EmoteCode predicted = EmoteCode::none;
    double probability = 0.0;
    std::vector<std::string> candidates;  // candidates[i] carries the anonymous label "M<i+1>"
};

struct RatingSheet {
    std::vector<SheetRow> rows;
    std::map<std::string, std::vector<EngineVariant>> key;  // row_id -> variant behind each label
    std::uint64_t shuffle_seed = 0;
    std::vector<std::string> warnings;
};

struct SheetOptions {
    double probability_threshold = 0.8;
    int per_class = 25;
};

// Keeps instances whose predicted-class probability exceeds the threshold,
// samples per_class of each class, generates one candidate per model and
// shuffles both rows and model columns. A class with too few qualifying
// instances contributes what it has and adds a warning.
RatingSheet build_rating_sheet(const std::vector<SheetInstance>& instances, const std::vector<EngineVariant>& models,
                               const NlgResources& resources, std::uint64_t seed, const SheetOptions& options = {});

std::string label_for(std::size_t column);
EngineVariant deanonymize(const RatingSheet& sheet, const std::string& row_id, const std::string& label);

struct AxisRating {
    std::string row_id;
    std::string rater_id;
    std::string label;
    int medical = 0;
    int fluency = 0;
    int empathy = 0;

    bool operator==(const AxisRating&) const = default;
};

void validate_axis_rating(const AxisRating& rating);  // scores in 1..5

struct AxisSummary {
    int ratings = 0;
    double medical = 0.0;
    double fluency = 0.0;
    double empathy = 0.0;
};

// Mean scores per model after de-anonymization; unknown rows or labels throw.
std::map<EngineVariant, AxisSummary> summarize_axis_ratings(const RatingSheet& sheet,
                                                            const std::vector<AxisRating>& ratings);
std::string render_table2(const std::map<EngineVariant, AxisSummary>& summary);

// The sheet file omits the key; the key goes to a separate file.
void write_sheet(const RatingSheet& sheet, std::ostream& out);
void write_sheet_key(const RatingSheet& sheet, std::ostream& out);
RatingSheet read_sheet(std::istream& sheet_in, std::istream* key_in = nullptr);
void write_axis_ratings(const std::vector<AxisRating>& ratings, std::ostream& out);
std::vector<AxisRating> read_axis_ratings(std::istream& in);

}  // namespace anamnesis
