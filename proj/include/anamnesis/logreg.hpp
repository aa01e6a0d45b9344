#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace anamnesis {

struct LogRegModel {
    Eigen::MatrixXd weights;  // classes x features
    Eigen::VectorXd biases;   // classes

    std::size_t classes() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t features() const { return static_cast<std::size_t>(weights.cols()); }

    Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
    Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;
};

// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Index of the largest entry; ties go to the lower index.
std::size_t argmax(const Eigen::VectorXd& v);

// w_c = N / (K * N_c). Throws ContractError when some class has no sample.
std::vector<double> balanced_class_weights(const std::vector<std::size_t>& labels, std::size_t classes);

struct LogRegOptions {
    std::size_t max_iterations = 1000;
    double gradient_tolerance = 1e-6;  // on the max-norm of the full gradient
};

struct LogRegFit {
    LogRegModel model;
    std::size_t iterations = 0;
    double gradient_max_norm = 0.0;
    bool converged = false;
};

// Objective minimized by fit_logreg:
//   (1/N) sum_n w_{y_n} * -log p(y_n | x_n) + ||W||^2 / (2C)
// Rows of X are samples. Biases are not penalized. Because the data term is
// a mean, duplicating every sample leaves the minimizer unchanged.
double logreg_objective(const LogRegModel& model, const Eigen::MatrixXd& X, const std::vector<std::size_t>& y,
                        double C, const std::vector<double>& class_weights);

// Analytic gradient of logreg_objective, returned in model shape.
LogRegModel logreg_gradient(const LogRegModel& model, const Eigen::MatrixXd& X, const std::vector<std::size_t>& y,
                            double C, const std::vector<double>& class_weights);

// Damped Newton from the zero model with backtracking line search. Stops on
// gradient max-norm below tolerance or after max_iterations.
// Throws ContractError on C <= 0, shape mismatches, or an absent class.
LogRegFit fit_logreg(const Eigen::MatrixXd& X, const std::vector<std::size_t>& y, std::size_t classes, double C,
                     const std::vector<double>& class_weights, const LogRegOptions& options = {});

}  // namespace anamnesis
