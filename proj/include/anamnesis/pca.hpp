#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace anamnesis {

struct PcaModel {
    Eigen::VectorXd mean;                // dim
    Eigen::MatrixXd components;          // k x dim, orthonormal rows, variance-descending
    Eigen::VectorXd explained_variance;  // k, unbiased sample variance along each row

    std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

    Eigen::VectorXd transform(const Eigen::VectorXd& x) const;      // throws ContractError on dim mismatch
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;    // mean + components^T z
};

// Eigenvalues of the covariance above max_eigenvalue * kRankTolerance count
// toward the rank.
inline constexpr double kRankTolerance = 1e-10;

// Rank of the centered sample matrix (rows are samples). Fewer than two
// samples have rank 0.
std::size_t centered_rank(const Eigen::MatrixXd& samples);

// Top-k eigenvectors of the unbiased sample covariance. Each component is
// signed so its largest-magnitude entry (first on ties) is positive.
// Throws RankError when k exceeds the centered rank, ContractError for k = 0.
PcaModel fit_pca(const Eigen::MatrixXd& samples, std::size_t k);

}  // namespace anamnesis
