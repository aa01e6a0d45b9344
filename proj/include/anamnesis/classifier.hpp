#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anamnesis/emote.hpp"
#include "anamnesis/embedding.hpp"
#include "anamnesis/logreg.hpp"
#include "anamnesis/pca.hpp"

namespace anamnesis {

// Context sources in feature order.
inline constexpr std::size_t kSourceCount = 3;
inline constexpr std::array<std::string_view, kSourceCount> kSourceNames = {"previous_question", "patient_response",
                                                                            "target_finding"};

enum class PcaMode {
    per_source,    // one PCA per source, reduced blocks concatenated
    concatenated,  // one PCA over the concatenated embeddings
};

std::string_view to_string(PcaMode mode);
PcaMode pca_mode_from_string(std::string_view text);

struct ClassifierConfig {
    std::size_t k = 70;  // components per source (or in total when concatenated)
    double C = 10.0;
    bool balanced = true;
    std::uint64_t seed = 0;
    PcaMode pca_mode = PcaMode::per_source;
};

inline constexpr double kHighPrecisionThreshold = 0.8;

struct Features {
    Eigen::VectorXd x;  // classifier input
    // Per-source parts. In per_source mode these are the reduced blocks whose
    // concatenation is x; in concatenated mode each has x's length and they
    // sum to x.
    std::array<Eigen::VectorXd, kSourceCount> blocks;
};

struct Prediction {
    EmoteCode code = EmoteCode::none;
    std::array<double, kEmoteCodeCount> probabilities{};
};

struct Attribution {
    std::array<double, kEmoteCodeCount> biases{};
    std::array<std::array<double, kSourceCount>, kEmoteCodeCount> contributions{};  // [class][source]
    std::array<double, kEmoteCodeCount> logits{};
};

class EmotionClassifier {
public:
    // pcas holds one model per source (per_source) or exactly one.
    EmotionClassifier(std::shared_ptr<const Embedder> embedder, std::vector<PcaModel> pcas, LogRegModel logreg,
                      ClassifierConfig config);

    Features featurize(const ContextTriple& triple) const;
    // Plain argmax (ties to the earlier code) unless high_precision, which
    // answers none when the top probability is below kHighPrecisionThreshold.
    Prediction predict(const ContextTriple& triple, bool high_precision = false) const;
    Attribution attribute(const ContextTriple& triple) const;

    const Embedder& embedder() const { return *embedder_; }
    const std::shared_ptr<const Embedder>& embedder_ptr() const { return embedder_; }
    const std::vector<PcaModel>& pcas() const { return pcas_; }
    const LogRegModel& logreg() const { return logreg_; }
    const ClassifierConfig& config() const { return config_; }
    std::vector<std::size_t> block_sizes() const;

    // Notes produced while training, e.g. clamped component counts.
    std::vector<std::string> warnings;

    // Same as featurize for already embedded sources.
    Features featurize_embeddings(const std::array<Eigen::VectorXd, kSourceCount>& e) const;

private:

    std::shared_ptr<const Embedder> embedder_;
    std::vector<PcaModel> pcas_;
    LogRegModel logreg_;
    ClassifierConfig config_;
};

// Throws TrainingError on an empty dataset or a missing code.
EmotionClassifier train(const std::vector<EmoteDatasetRow>& rows, std::shared_ptr<const Embedder> embedder,
                        const ClassifierConfig& config);

// Versioned JSON model file. Loading rebuilds hashing embedders from their
// id; other embedders must be passed in and must match id and dim.
void save_classifier(const EmotionClassifier& classifier, std::ostream& out);
EmotionClassifier load_classifier(std::istream& in, std::shared_ptr<const Embedder> embedder = nullptr);

using ConfusionMatrix = std::array<std::array<std::size_t, kEmoteCodeCount>, kEmoteCodeCount>;  // [truth][predicted]

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassificationReport {
    ConfusionMatrix confusion{};
    std::array<ClassMetrics, kEmoteCodeCount> per_class{};
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::size_t total = 0;
    // Macro average of one-vs-rest average precision; only set by evaluate().
    std::optional<double> macro_pr_auc;
};

// Undefined ratios (0/0) count as 0.
ClassificationReport report_from_confusion(const ConfusionMatrix& confusion);

// Step-wise average precision of scores against binary labels, the usual
// estimate of the area under the precision-recall curve.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

// Throws ContractError on an empty test set.
ClassificationReport evaluate(const EmotionClassifier& classifier, const std::vector<EmoteDatasetRow>& rows,
                              bool high_precision = false);

std::string render_report(const ClassificationReport& report);
std::string report_to_json(const ClassificationReport& report);

}  // namespace anamnesis
