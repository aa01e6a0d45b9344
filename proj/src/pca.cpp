#include "anamnesis/pca.hpp"

#include <cmath>
#include <string>

#include "anamnesis/error.hpp"

namespace anamnesis {

namespace {

struct Spectrum {
    Eigen::VectorXd mean;
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns match values
    std::size_t rank = 0;
};

Spectrum spectrum(const Eigen::MatrixXd& samples) {
    Spectrum s;
    const auto n = samples.rows();
    s.mean = samples.colwise().mean().transpose();
    if (n < 2) {
        return s;
    }
    const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw RankError("covariance eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    s.values = solver.eigenvalues().reverse();
    s.vectors = solver.eigenvectors().rowwise().reverse();
    const double top = s.values.size() > 0 ? s.values[0] : 0.0;
    if (top > 0.0) {
        for (Eigen::Index i = 0; i < s.values.size(); ++i) {
            if (s.values[i] > top * kRankTolerance) {
                ++s.rank;
            }
        }
    }
    return s;
}

}  // namespace

Eigen::VectorXd PcaModel::transform(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) {
        throw ContractError("PCA input has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(mean.size()));
    }
    return components * (x - mean);
}

Eigen::VectorXd PcaModel::reconstruct(const Eigen::VectorXd& z) const {
    if (z.size() != components.rows()) {
        throw ContractError("PCA code has dimension " + std::to_string(z.size()) + ", expected " +
                            std::to_string(components.rows()));
    }
    return mean + components.transpose() * z;
}

std::size_t centered_rank(const Eigen::MatrixXd& samples) { return spectrum(samples).rank; }

PcaModel fit_pca(const Eigen::MatrixXd& samples, std::size_t k) {
    if (k == 0) {
        throw ContractError("PCA needs at least one component");
    }
    if (samples.cols() == 0) {
        throw ContractError("PCA input has no columns");
    }
    const Spectrum s = spectrum(samples);
    if (k > s.rank) {
        throw RankError("requested " + std::to_string(k) + " components but the centered data has rank " +
                        std::to_string(s.rank));
    }
    PcaModel model;
    model.mean = s.mean;
    const auto kk = static_cast<Eigen::Index>(k);
    model.components = s.vectors.leftCols(kk).transpose();
    model.explained_variance = s.values.head(kk);
    for (Eigen::Index r = 0; r < kk; ++r) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
            const double m = std::abs(model.components(r, c));
            // Near-equal magnitudes count as a tie so the choice is stable.
            if (m > best + 1e-12) {
                best = m;
                arg = c;
            }
        }
        if (model.components(r, arg) < 0.0) {
            model.components.row(r) *= -1.0;
        }
    }
    return model;
}

}  // namespace anamnesis
