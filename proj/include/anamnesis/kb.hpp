#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace anamnesis {

struct Finding {
    std::string id;
    std::string name;
    std::string expert_question;
    bool is_demographic = false;
    std::optional<std::string> exclusion_group;

    bool operator==(const Finding&) const = default;
};

struct Disease {
    std::string id;
    std::string name;

    bool operator==(const Disease&) const = default;
};

// es: evoking strength 0..5, tf: term frequency 1..5.
struct Association {
    std::string finding_id;
    std::string disease_id;
    int es = 0;
    int tf = 1;

    bool operator==(const Association&) const = default;
};

enum class Polarity { present, absent };

std::string_view to_string(Polarity p);
Polarity polarity_from_string(std::string_view text);
char polarity_suffix(Polarity p);

struct Assertion {
    std::string finding_id;
    Polarity polarity = Polarity::present;

    bool operator==(const Assertion&) const = default;
};

// Immutable once built; safe to share across threads.
class KnowledgeBase {
public:
    // Validates every invariant; throws LoadError / IntegrityError.
    KnowledgeBase(std::vector<Disease> diseases, std::vector<Finding> findings,
                  std::vector<Association> associations);

    std::span<const Disease> diseases() const { return diseases_; }
    std::span<const Finding> findings() const { return findings_; }
    std::span<const Association> associations() const { return associations_; }

    const Finding* find_finding(std::string_view id) const;
    const Disease* find_disease(std::string_view id) const;
    const Finding& finding(std::string_view id) const;  // throws NotFoundError

    std::optional<std::size_t> finding_index(std::string_view id) const;
    std::optional<std::size_t> disease_index(std::string_view id) const;

    // ES / TF of a pair, 0 when the pair is not in the KB.
    int es(std::string_view finding_id, std::string_view disease_id) const;
    int tf(std::string_view finding_id, std::string_view disease_id) const;

    struct Link {
        std::size_t index;  // disease index for finding_links, finding index for disease_links
        int es;
        int tf;
    };
    std::span<const Link> finding_links(std::size_t finding_index) const { return by_finding_[finding_index]; }
    std::span<const Link> disease_links(std::size_t disease_index) const { return by_disease_[disease_index]; }

    // Members of the finding's exclusion group, excluding the finding itself.
    std::vector<std::string> exclusion_partners(std::string_view finding_id) const;

private:
    std::vector<Disease> diseases_;
    std::vector<Finding> findings_;
    std::vector<Association> associations_;
    std::unordered_map<std::string, std::size_t> finding_ix_;
    std::unordered_map<std::string, std::size_t> disease_ix_;
    std::vector<std::vector<Link>> by_finding_;
    std::vector<std::vector<Link>> by_disease_;
    std::unordered_map<std::string, std::vector<std::size_t>> groups_;
};

// Line-delimited JSON records, one per line:
//   {"kind":"disease","id":..,"name":..}
//   {"kind":"finding","id":..,"name":..,"expert_question":..,"is_demographic":false,"exclusion_group":".."}
//   {"kind":"assoc","finding_id":..,"disease_id":..,"es":0-5,"tf":1-5}
// Blank lines and lines starting with '#' are ignored.
KnowledgeBase load_kb(std::istream& in);
KnowledgeBase load_kb_file(const std::string& path);
void save_kb(const KnowledgeBase& kb, std::ostream& out);

struct DifferentialEntry {
    std::string disease_id;
    double raw_score = 0.0;
    double probability = 0.0;

    bool operator==(const DifferentialEntry&) const = default;
};

struct DifferentialDiagnosis {
    std::vector<DifferentialEntry> entries;

    double probability_of(std::string_view disease_id) const;
    bool operator==(const DifferentialDiagnosis&) const = default;
};

inline constexpr double kDefaultTemperature = 5.0;
inline constexpr double kInfiniteMargin = std::numeric_limits<double>::infinity();

// Throws ContractError on unknown findings or a finding asserted twice.
void check_assertions(const KnowledgeBase& kb, std::span<const Assertion> assertions);

// Sum of ES over present findings minus sum of TF over absent findings.
double disease_score(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                     std::string_view disease_id);

// Softmax of raw_score / temperature, ordered by (raw_score desc, disease_id asc).
DifferentialDiagnosis differential(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                                   double temperature = kDefaultTemperature);

// raw(first) - raw(second); kInfiniteMargin for a single disease.
double margin(const DifferentialDiagnosis& dd);

std::set<std::string> excluded_findings(const KnowledgeBase& kb, std::span<const Assertion> assertions);

// argmax over unasked, non-excluded, non-demographic findings of
// sum_d p(d) * ES(f, d); ties go to the smaller finding id.
std::optional<std::string> next_finding(const KnowledgeBase& kb, std::span<const Assertion> assertions,
                                        const DifferentialDiagnosis& dd);

// Case-insensitive exact name match first, then the best fuzzy match at or
// above min_score. Demographic findings are never matched.
struct FindingMatch {
    std::string finding_id;
    int score = 0;
};
std::optional<FindingMatch> resolve_finding_name(const KnowledgeBase& kb, std::string_view text,
                                                 int min_score = 90);
std::vector<FindingMatch> suggest_findings(const KnowledgeBase& kb, std::string_view text, std::size_t limit = 3);

}  // namespace anamnesis
