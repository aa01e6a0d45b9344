#include "anamnesis/logreg.hpp"

#include <cmath>
#include <string>

#include "anamnesis/error.hpp"

namespace anamnesis {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double top = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - top).exp().matrix();
    return e / e.sum();
}

std::size_t argmax(const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return static_cast<std::size_t>(best);
}

Eigen::VectorXd LogRegModel::logits(const Eigen::VectorXd& x) const {
    if (x.size() != weights.cols()) {
        throw ContractError("classifier input has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(weights.cols()));
    }
    return weights * x + biases;
}

Eigen::VectorXd LogRegModel::probabilities(const Eigen::VectorXd& x) const { return softmax(logits(x)); }

std::vector<double> balanced_class_weights(const std::vector<std::size_t>& labels, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t y : labels) {
        if (y >= classes) {
            throw ContractError("label " + std::to_string(y) + " out of range");
        }
        ++counts[y];
    }
    std::vector<double> weights(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) {
            throw ContractError("class " + std::to_string(c) + " has no samples");
        }
        weights[c] = static_cast<double>(labels.size()) / (static_cast<double>(classes) * static_cast<double>(counts[c]));
    }
    return weights;
}

namespace {

void check_problem(const Eigen::MatrixXd& X, const std::vector<std::size_t>& y, std::size_t classes, double C,
                   const std::vector<double>& class_weights) {
    if (!(C > 0.0)) {
        throw ContractError("C must be positive");
    }
    if (static_cast<std::size_t>(X.rows()) != y.size() || y.empty()) {
        throw ContractError("feature rows and labels disagree or are empty");
    }
    if (class_weights.size() != classes) {
        throw ContractError("need one class weight per class");
    }
    std::vector<bool> seen(classes, false);
    for (std::size_t label : y) {
        if (label >= classes) {
            throw ContractError("label " + std::to_string(label) + " out of range");
        }
        seen[label] = true;
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (!seen[c]) {
            throw ContractError("class " + std::to_string(c) + " is absent from the labels");
        }
    }
}

// Per-sample probabilities, rows are samples.
Eigen::MatrixXd sample_probabilities(const LogRegModel& m, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd z = X * m.weights.transpose();
    z.rowwise() += m.biases.transpose();
    for (Eigen::Index n = 0; n < z.rows(); ++n) {
        z.row(n) = softmax(z.row(n).transpose()).transpose();
    }
    return z;
}

Eigen::VectorXd flatten(const LogRegModel& m) {
    const auto K = m.weights.rows();
    const auto d = m.weights.cols();
    Eigen::VectorXd theta(K * (d + 1));
    for (Eigen::Index c = 0; c < K; ++c) {
        theta.segment(c * (d + 1), d) = m.weights.row(c).transpose();
        theta[c * (d + 1) + d] = m.biases[c];
    }
    return theta;
}

LogRegModel unflatten(const Eigen::VectorXd& theta, Eigen::Index K, Eigen::Index d) {
    LogRegModel m{Eigen::MatrixXd(K, d), Eigen::VectorXd(K)};
    for (Eigen::Index c = 0; c < K; ++c) {
        m.weights.row(c) = theta.segment(c * (d + 1), d).transpose();
        m.biases[c] = theta[c * (d + 1) + d];
    }
    return m;
}

double max_abs(const LogRegModel& g) {
    return std::max(g.weights.size() ? g.weights.cwiseAbs().maxCoeff() : 0.0, g.biases.cwiseAbs().maxCoeff());
}

}  // namespace

double logreg_objective(const LogRegModel& model, const Eigen::MatrixXd& X, const std::vector<std::size_t>& y,
                        double C, const std::vector<double>& class_weights) {
    Eigen::MatrixXd z = X * model.weights.transpose();
    z.rowwise() += model.biases.transpose();
    double loss = 0.0;
    for (Eigen::Index n = 0; n < z.rows(); ++n) {
        const double top = z.row(n).maxCoeff();
        const double lse = top + std::log((z.row(n).array() - top).exp().sum());
        const auto label = static_cast<Eigen::Index>(y[static_cast<std::size_t>(n)]);
        loss += class_weights[static_cast<std::size_t>(label)] * (lse - z(n, label));
    }
    return loss / static_cast<double>(z.rows()) + model.weights.squaredNorm() / (2.0 * C);
}

LogRegModel logreg_gradient(const LogRegModel& model, const Eigen::MatrixXd& X, const std::vector<std::size_t>& y,
                            double C, const std::vector<double>& class_weights) {
    Eigen::MatrixXd r = sample_probabilities(model, X);  // becomes w_n (p_n - onehot_n)
    for (Eigen::Index n = 0; n < r.rows(); ++n) {
        const std::size_t label = y[static_cast<std::size_t>(n)];
        r(n, static_cast<Eigen::Index>(label)) -= 1.0;
        r.row(n) *= class_weights[label] / static_cast<double>(r.rows());
    }
    LogRegModel g;
    g.weights = r.transpose() * X + model.weights / C;
    g.biases = r.colwise().sum().transpose();
    return g;
}

LogRegFit fit_logreg(const Eigen::MatrixXd& X, const std::vector<std::size_t>& y, std::size_t classes, double C,
                     const std::vector<double>& class_weights, const LogRegOptions& options) {
    check_problem(X, y, classes, C, class_weights);
    const auto K = static_cast<Eigen::Index>(classes);
    const auto d = X.cols();
    const auto N = X.rows();
    const auto P = d + 1;

    Eigen::MatrixXd Xa(N, P);  // features with a trailing 1 for the bias
    Xa.leftCols(d) = X;
    Xa.col(d).setOnes();
    Eigen::VectorXd sample_w(N);
    for (Eigen::Index n = 0; n < N; ++n) {
        sample_w[n] = class_weights[y[static_cast<std::size_t>(n)]] / static_cast<double>(N);
    }

    LogRegFit fit;
    fit.model = {Eigen::MatrixXd::Zero(K, d), Eigen::VectorXd::Zero(K)};
    double f = logreg_objective(fit.model, X, y, C, class_weights);

    for (;;) {
        const LogRegModel g = logreg_gradient(fit.model, X, y, C, class_weights);
        fit.gradient_max_norm = max_abs(g);
        if (fit.gradient_max_norm < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        if (fit.iterations >= options.max_iterations) {
            break;
        }
        ++fit.iterations;

        // Hessian blocks H_ab = Xa^T diag(w p_a (delta_ab - p_b)) Xa, plus the ridge on weights.
        const Eigen::MatrixXd prob = sample_probabilities(fit.model, X);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K * P, K * P);
        for (Eigen::Index a = 0; a < K; ++a) {
            for (Eigen::Index b = a; b < K; ++b) {
                const Eigen::VectorXd s =
                    (sample_w.array() * prob.col(a).array() * ((a == b ? 1.0 : 0.0) - prob.col(b).array())).matrix();
                const Eigen::MatrixXd block = Xa.transpose() * s.asDiagonal() * Xa;
                H.block(a * P, b * P, P, P) = block;
                if (a != b) {
                    H.block(b * P, a * P, P, P) = block.transpose();
                }
            }
            H.block(a * P, a * P, d, d).diagonal().array() += 1.0 / C;
        }
        // The bias direction shared by all classes is flat; a tiny ridge keeps
        // the factorization well posed.
        H.diagonal().array() += 1e-9;

        const Eigen::VectorXd grad = flatten(g);
        Eigen::VectorXd step = H.ldlt().solve(-grad);
        if (!step.allFinite() || step.dot(grad) >= 0.0) {
            step = -grad;
        }

        const Eigen::VectorXd theta = flatten(fit.model);
        const double slope = step.dot(grad);
        double t = 1.0;
        LogRegModel candidate;
        double f_new = f;
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            candidate = unflatten(theta + t * step, K, d);
            f_new = logreg_objective(candidate, X, y, C, class_weights);
            accepted = f_new <= f + 1e-4 * t * slope;
            t *= 0.5;
        }
        if (!accepted) {
            // No further descent at machine precision.
            break;
        }
        fit.model = std::move(candidate);
        f = f_new;
    }
    if (!fit.model.weights.allFinite() || !fit.model.biases.allFinite()) {
        throw TrainingError("logistic regression diverged");
    }
    return fit;
}

}  // namespace anamnesis
