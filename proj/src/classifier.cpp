#include "anamnesis/classifier.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"

namespace anamnesis {

namespace {

constexpr std::string_view kModelFormat = "anamnesis-emotion-classifier";
constexpr int kModelVersion = 1;

const std::string& source_text(const ContextTriple& t, std::size_t j) {
    switch (j) {
        case 0: return t.previous_question;
        case 1: return t.patient_response;
        default: return t.target_finding;
    }
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rows.push_back(vector_json(m.row(r).transpose()));
    }
    return rows;
}

Eigen::VectorXd vector_from(const Json& j, std::string_view what) {
    if (!j.is_array()) {
        throw LoadError("model field '" + std::string(what) + "' is not an array");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw LoadError("model field '" + std::string(what) + "' holds a non-number");
        }
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from(const Json& j, std::size_t cols, std::string_view what) {
    if (!j.is_array()) {
        throw LoadError("model field '" + std::string(what) + "' is not an array");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto row = vector_from(j[r], what);
        if (static_cast<std::size_t>(row.size()) != cols) {
            throw LoadError("model field '" + std::string(what) + "' has a ragged row");
        }
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

const Json& field(const Json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw LoadError(std::string("model file lacks '") + name + "'");
    }
    return *it;
}

}  // namespace

std::string_view to_string(PcaMode mode) { return mode == PcaMode::per_source ? "per_source" : "concatenated"; }

PcaMode pca_mode_from_string(std::string_view text) {
    if (text == "per_source") return PcaMode::per_source;
    if (text == "concatenated") return PcaMode::concatenated;
    throw LoadError("unknown PCA mode '" + std::string(text) + "'");
}

EmotionClassifier::EmotionClassifier(std::shared_ptr<const Embedder> embedder, std::vector<PcaModel> pcas,
                                     LogRegModel logreg, ClassifierConfig config)
    : embedder_(std::move(embedder)), pcas_(std::move(pcas)), logreg_(std::move(logreg)), config_(config) {
    if (!embedder_) {
        throw ContractError("classifier needs an embedder");
    }
    const std::size_t dim = embedder_->dim();
    std::size_t features = 0;
    if (config_.pca_mode == PcaMode::per_source) {
        if (pcas_.size() != kSourceCount) {
            throw ContractError("per-source mode needs one PCA per source");
        }
        for (const auto& p : pcas_) {
            if (p.dim() != dim) {
                throw ContractError("PCA dimension does not match the embedder");
            }
            features += p.k();
        }
    } else {
        if (pcas_.size() != 1 || pcas_[0].dim() != kSourceCount * dim) {
            throw ContractError("concatenated mode needs one PCA over all sources");
        }
        features = pcas_[0].k();
    }
    if (logreg_.classes() != kEmoteCodeCount || logreg_.features() != features ||
        static_cast<std::size_t>(logreg_.biases.size()) != kEmoteCodeCount) {
        throw ContractError("logistic regression shape does not match the reduced features");
    }
}

std::vector<std::size_t> EmotionClassifier::block_sizes() const {
    std::vector<std::size_t> sizes;
    for (const auto& p : pcas_) {
        sizes.push_back(p.k());
    }
    return sizes;
}

Features EmotionClassifier::featurize_embeddings(const std::array<Eigen::VectorXd, kSourceCount>& e) const {
    const auto dim = static_cast<Eigen::Index>(embedder_->dim());
    for (const auto& v : e) {
        if (v.size() != dim) {
            throw ContractError("embedding has dimension " + std::to_string(v.size()) + ", expected " +
                                std::to_string(dim));
        }
    }
    Features f;
    if (config_.pca_mode == PcaMode::per_source) {
        Eigen::Index total = 0;
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            f.blocks[j] = pcas_[j].transform(e[j]);
            total += f.blocks[j].size();
        }
        f.x.resize(total);
        Eigen::Index offset = 0;
        for (const auto& b : f.blocks) {
            f.x.segment(offset, b.size()) = b;
            offset += b.size();
        }
    } else {
        const PcaModel& p = pcas_[0];
        f.x = Eigen::VectorXd::Zero(p.components.rows());
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            const auto start = static_cast<Eigen::Index>(j) * dim;
            f.blocks[j] = p.components.middleCols(start, dim) * (e[j] - p.mean.segment(start, dim));
            f.x += f.blocks[j];
        }
    }
    return f;
}

Features EmotionClassifier::featurize(const ContextTriple& triple) const {
    std::array<Eigen::VectorXd, kSourceCount> e;
    for (std::size_t j = 0; j < kSourceCount; ++j) {
        e[j] = embedder_->embed(source_text(triple, j));
    }
    return featurize_embeddings(e);
}

Prediction EmotionClassifier::predict(const ContextTriple& triple, bool high_precision) const {
    const Eigen::VectorXd p = logreg_.probabilities(featurize(triple).x);
    Prediction out;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        out.probabilities[c] = p[static_cast<Eigen::Index>(c)];
    }
    const std::size_t best = argmax(p);
    out.code = kEmoteCodes[best];
    if (high_precision && p[static_cast<Eigen::Index>(best)] < kHighPrecisionThreshold) {
        out.code = EmoteCode::none;
    }
    return out;
}

Attribution EmotionClassifier::attribute(const ContextTriple& triple) const {
    const Features f = featurize(triple);
    const Eigen::VectorXd logits = logreg_.logits(f.x);
    Attribution a;
    for (std::size_t i = 0; i < kEmoteCodeCount; ++i) {
        const auto row = logreg_.weights.row(static_cast<Eigen::Index>(i));
        a.biases[i] = logreg_.biases[static_cast<Eigen::Index>(i)];
        a.logits[i] = logits[static_cast<Eigen::Index>(i)];
        Eigen::Index offset = 0;
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            const auto& b = f.blocks[j];
            if (config_.pca_mode == PcaMode::per_source) {
                a.contributions[i][j] = row.segment(offset, b.size()).dot(b);
                offset += b.size();
            } else {
                a.contributions[i][j] = row.dot(b);
            }
        }
    }
    return a;
}

EmotionClassifier train(const std::vector<EmoteDatasetRow>& rows, std::shared_ptr<const Embedder> embedder,
                        const ClassifierConfig& config) {
    if (!embedder) {
        throw ContractError("train needs an embedder");
    }
    if (rows.empty()) {
        throw TrainingError("emotion dataset is empty");
    }
    if (config.k == 0 || !(config.C > 0.0)) {
        throw ContractError("k must be positive and C must be positive");
    }
    std::vector<std::size_t> labels;
    labels.reserve(rows.size());
    std::array<std::size_t, kEmoteCodeCount> support{};
    for (const auto& r : rows) {
        labels.push_back(index_of(r.code));
        ++support[index_of(r.code)];
    }
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        if (support[c] == 0) {
            throw TrainingError("emotion dataset has no rows with code '" + std::string(to_string(kEmoteCodes[c])) +
                                "'");
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto dim = static_cast<Eigen::Index>(embedder->dim());
    std::array<Eigen::MatrixXd, kSourceCount> E;
    for (auto& m : E) {
        m.resize(n, dim);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            const Eigen::VectorXd v = embedder->embed(source_text(rows[static_cast<std::size_t>(r)].context, j));
            if (v.size() != dim) {
                throw ContractError("embedder returned a vector of the wrong length");
            }
            E[j].row(r) = v.transpose();
        }
    }

    std::vector<std::string> warnings;
    auto fit_clamped = [&](const Eigen::MatrixXd& samples, std::string_view label) {
        const std::size_t rank = centered_rank(samples);
        const std::size_t k = std::min(config.k, rank);
        if (k < config.k) {
            warnings.push_back("PCA for " + std::string(label) + ": k clamped from " + std::to_string(config.k) +
                               " to rank " + std::to_string(rank));
        }
        if (k == 0) {
            PcaModel p;
            p.mean = samples.colwise().mean().transpose();
            p.components.resize(0, samples.cols());
            p.explained_variance.resize(0);
            return p;
        }
        return fit_pca(samples, k);
    };

    std::vector<PcaModel> pcas;
    if (config.pca_mode == PcaMode::per_source) {
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            pcas.push_back(fit_clamped(E[j], kSourceNames[j]));
        }
    } else {
        Eigen::MatrixXd all(n, dim * static_cast<Eigen::Index>(kSourceCount));
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            all.middleCols(static_cast<Eigen::Index>(j) * dim, dim) = E[j];
        }
        pcas.push_back(fit_clamped(all, "concatenated sources"));
    }

    std::size_t features = 0;
    for (const auto& p : pcas) {
        features += p.k();
    }
    // Reduced features for every row, computed with the same code path as
    // prediction.
    EmotionClassifier shell(embedder, pcas,
                            LogRegModel{Eigen::MatrixXd::Zero(kEmoteCodeCount, static_cast<Eigen::Index>(features)),
                                        Eigen::VectorXd::Zero(kEmoteCodeCount)},
                            config);
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(features));
    for (Eigen::Index r = 0; r < n; ++r) {
        std::array<Eigen::VectorXd, kSourceCount> e;
        for (std::size_t j = 0; j < kSourceCount; ++j) {
            e[j] = E[j].row(r).transpose();
        }
        X.row(r) = shell.featurize_embeddings(e).x.transpose();
    }

    const std::vector<double> weights = config.balanced ? balanced_class_weights(labels, kEmoteCodeCount)
                                                        : std::vector<double>(kEmoteCodeCount, 1.0);
    LogRegFit fit = fit_logreg(X, labels, kEmoteCodeCount, config.C, weights);
    if (!fit.converged) {
        warnings.push_back("logistic regression stopped after " + std::to_string(fit.iterations) +
                           " iterations with gradient max-norm " + std::to_string(fit.gradient_max_norm));
    }
    EmotionClassifier classifier(std::move(embedder), std::move(pcas), std::move(fit.model), config);
    classifier.warnings = std::move(warnings);
    return classifier;
}

void save_classifier(const EmotionClassifier& classifier, std::ostream& out) {
    const auto& cfg = classifier.config();
    OrderedJson j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["embedder"] = {{"id", classifier.embedder().id()}, {"dim", classifier.embedder().dim()}};
    OrderedJson order = OrderedJson::array();
    for (EmoteCode c : kEmoteCodes) {
        order.push_back(to_string(c));
    }
    j["class_order"] = order;
    j["config"] = {{"k", cfg.k},
                   {"C", cfg.C},
                   {"balanced", cfg.balanced},
                   {"seed", cfg.seed},
                   {"pca_mode", to_string(cfg.pca_mode)}};
    OrderedJson pcas = OrderedJson::array();
    for (const auto& p : classifier.pcas()) {
        OrderedJson pj;
        pj["mean"] = vector_json(p.mean);
        pj["explained_variance"] = vector_json(p.explained_variance);
        pj["components"] = matrix_json(p.components);
        pcas.push_back(std::move(pj));
    }
    j["pcas"] = std::move(pcas);
    j["biases"] = vector_json(classifier.logreg().biases);
    j["weights"] = matrix_json(classifier.logreg().weights);
    j["warnings"] = classifier.warnings;
    out << j.dump() << '\n';
}

EmotionClassifier load_classifier(std::istream& in, std::shared_ptr<const Embedder> embedder) {
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw LoadError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (field(j, "format") != kModelFormat) {
            throw LoadError("not an emotion classifier model file");
        }
        if (field(j, "version") != kModelVersion) {
            throw LoadError("unsupported model version " + field(j, "version").dump());
        }
        const auto& order = field(j, "class_order");
        for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
            if (!order.is_array() || order.size() != kEmoteCodeCount || order[c] != to_string(kEmoteCodes[c])) {
                throw LoadError("model class order differs from none, affirmative, empathy, apology");
            }
        }
        const auto& emb = field(j, "embedder");
        const auto id = field(emb, "id").get<std::string>();
        const auto dim = field(emb, "dim").get<std::size_t>();
        if (!embedder) {
            embedder = embedder_from_id(id);
        }
        if (embedder->id() != id || embedder->dim() != dim) {
            throw ContractError("model was trained with embedder '" + id + "' but '" + embedder->id() +
                                "' was supplied");
        }
        const auto& cj = field(j, "config");
        ClassifierConfig cfg;
        cfg.k = field(cj, "k").get<std::size_t>();
        cfg.C = field(cj, "C").get<double>();
        cfg.balanced = field(cj, "balanced").get<bool>();
        cfg.seed = field(cj, "seed").get<std::uint64_t>();
        cfg.pca_mode = pca_mode_from_string(field(cj, "pca_mode").get<std::string>());

        std::vector<PcaModel> pcas;
        for (const auto& pj : field(j, "pcas")) {
            PcaModel p;
            p.mean = vector_from(field(pj, "mean"), "mean");
            p.explained_variance = vector_from(field(pj, "explained_variance"), "explained_variance");
            p.components = matrix_from(field(pj, "components"), static_cast<std::size_t>(p.mean.size()), "components");
            pcas.push_back(std::move(p));
        }
        LogRegModel lr;
        lr.biases = vector_from(field(j, "biases"), "biases");
        std::size_t features = 0;
        for (const auto& p : pcas) {
            features += p.k();
        }
        lr.weights = matrix_from(field(j, "weights"), features, "weights");
        EmotionClassifier classifier(std::move(embedder), std::move(pcas), std::move(lr), cfg);
        if (auto w = j.find("warnings"); w != j.end() && w->is_array()) {
            classifier.warnings = w->get<std::vector<std::string>>();
        }
        return classifier;
    } catch (const Json::exception& e) {
        throw LoadError(std::string("malformed model file: ") + e.what());
    }
}

ClassificationReport report_from_confusion(const ConfusionMatrix& confusion) {
    ClassificationReport r;
    r.confusion = confusion;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        std::size_t row = 0;
        std::size_t col = 0;
        for (std::size_t o = 0; o < kEmoteCodeCount; ++o) {
            row += confusion[c][o];
            col += confusion[o][c];
        }
        const double tp = static_cast<double>(confusion[c][c]);
        auto& m = r.per_class[c];
        m.support = row;
        m.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
        m.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
        m.f1 = (m.precision + m.recall) == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        r.total += row;
        correct += confusion[c][c];
    }
    if (r.total > 0) {
        r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
        for (const auto& m : r.per_class) {
            r.macro_f1 += m.f1 / static_cast<double>(kEmoteCodeCount);
            r.weighted_f1 += m.f1 * static_cast<double>(m.support) / static_cast<double>(r.total);
        }
    }
    return r;
}

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) {
        throw ContractError("scores and labels differ in length");
    }
    const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    if (total_pos == 0) {
        return 0.0;
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < order.size();) {
        // Equal scores share one threshold.
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += positive[order[j]] ? 1 : 0;
            ++seen;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

ClassificationReport evaluate(const EmotionClassifier& classifier, const std::vector<EmoteDatasetRow>& rows,
                              bool high_precision) {
    if (rows.empty()) {
        throw ContractError("cannot evaluate on an empty test set");
    }
    ConfusionMatrix confusion{};
    std::array<std::vector<double>, kEmoteCodeCount> scores;
    std::array<std::vector<bool>, kEmoteCodeCount> positive;
    for (const auto& row : rows) {
        const Prediction p = classifier.predict(row.context, high_precision);
        ++confusion[index_of(row.code)][index_of(p.code)];
        for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
            scores[c].push_back(p.probabilities[c]);
            positive[c].push_back(index_of(row.code) == c);
        }
    }
    ClassificationReport report = report_from_confusion(confusion);
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        if (report.per_class[c].support > 0) {
            sum += average_precision(scores[c], positive[c]);
            ++classes;
        }
    }
    report.macro_pr_auc = sum / static_cast<double>(classes);
    return report;
}

std::string render_report(const ClassificationReport& r) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9s\n", "", "precision", "recall", "f1-score", "support");
    out << line;
    double macro_p = 0.0, macro_r = 0.0, weighted_p = 0.0, weighted_r = 0.0;
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        const auto& m = r.per_class[c];
        std::snprintf(line, sizeof line, "%-14s %9.2f %9.2f %9.2f %9zu\n", std::string(to_string(kEmoteCodes[c])).c_str(),
                      m.precision, m.recall, m.f1, m.support);
        out << line;
        macro_p += m.precision / kEmoteCodeCount;
        macro_r += m.recall / kEmoteCodeCount;
        if (r.total > 0) {
            weighted_p += m.precision * static_cast<double>(m.support) / static_cast<double>(r.total);
            weighted_r += m.recall * static_cast<double>(m.support) / static_cast<double>(r.total);
        }
    }
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9.2f %9zu\n", "accuracy", "", "", r.accuracy, r.total);
    out << line;
    std::snprintf(line, sizeof line, "%-14s %9.2f %9.2f %9.2f %9zu\n", "macro avg", macro_p, macro_r, r.macro_f1,
                  r.total);
    out << line;
    std::snprintf(line, sizeof line, "%-14s %9.2f %9.2f %9.2f %9zu\n", "weighted avg", weighted_p, weighted_r,
                  r.weighted_f1, r.total);
    out << line;
    if (r.macro_pr_auc) {
        std::snprintf(line, sizeof line, "PR-AUC (macro one-vs-rest average precision): %.4f\n", *r.macro_pr_auc);
        out << line;
    }
    out << "confusion (rows truth, columns predicted; none affirmative empathy apology)\n";
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        std::snprintf(line, sizeof line, "%-14s", std::string(to_string(kEmoteCodes[c])).c_str());
        out << line;
        for (std::size_t o = 0; o < kEmoteCodeCount; ++o) {
            std::snprintf(line, sizeof line, " %9zu", r.confusion[c][o]);
            out << line;
        }
        out << '\n';
    }
    return out.str();
}

std::string report_to_json(const ClassificationReport& r) {
    OrderedJson j;
    j["accuracy"] = r.accuracy;
    j["macro_f1"] = r.macro_f1;
    j["weighted_f1"] = r.weighted_f1;
    j["total"] = r.total;
    j["macro_pr_auc"] = r.macro_pr_auc ? OrderedJson(*r.macro_pr_auc) : OrderedJson(nullptr);
    OrderedJson classes = OrderedJson::object();
    for (std::size_t c = 0; c < kEmoteCodeCount; ++c) {
        const auto& m = r.per_class[c];
        classes[std::string(to_string(kEmoteCodes[c]))] = {
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    }
    j["per_class"] = std::move(classes);
    j["confusion"] = r.confusion;
    j["class_order"] = {"none", "affirmative", "empathy", "apology"};
    return j.dump(2);
}

}  // namespace anamnesis
