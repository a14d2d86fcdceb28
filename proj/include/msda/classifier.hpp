#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "msda/data_matrix.hpp"
#include "msda/error.hpp"

namespace msda {

enum class Loss { SquaredHinge, Logistic };

/// Binary L2-regularized linear classifier over +1/-1 labels.
struct LinearModel {
    Eigen::VectorXd w;
    double bias = 0.0;
    double c = 1.0;
    Loss loss = Loss::SquaredHinge;
};

/// Optional per-iteration record from fit.
struct FitDiagnostics {
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

inline double logistic_loss(double margin) {
    // log(1 + exp(-margin)), stable for large |margin|
    return margin >= 0.0 ? std::log1p(std::exp(-margin))
                         : -margin + std::log1p(std::exp(margin));
}

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double loss_sum(const Eigen::VectorXd& scores, const std::vector<int>& y, Loss loss) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double margin = y[i] * scores(static_cast<Eigen::Index>(i));
        if (loss == Loss::SquaredHinge) {
            const double slack = 1.0 - margin;
            if (slack > 0.0) total += slack * slack;
        } else {
            total += logistic_loss(margin);
        }
    }
    return total;
}

/// dLoss/dScore per example, given the current scores.
inline void loss_coeff(const Eigen::VectorXd& scores, const std::vector<int>& y, double c,
                       Loss loss, Eigen::VectorXd& coeff) {
    coeff.resize(scores.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double margin = y[i] * scores(ii);
        if (loss == Loss::SquaredHinge) {
            const double slack = 1.0 - margin;
            coeff(ii) = slack > 0.0 ? -2.0 * c * slack * y[i] : 0.0;
        } else {
            coeff(ii) = -c * y[i] * sigmoid(-margin);
        }
    }
}

} // namespace detail

/// (1/2)||w||^2 + C sum_i loss(y_i, w^T x_i + b); the bias is not
/// regularized.
inline double objective(const Eigen::VectorXd& w, double bias, const DataMatrix& X,
                        const std::vector<int>& y, double c, Loss loss) {
    const Eigen::VectorXd scores = X.transpose_times(w).array() + bias;
    return 0.5 * w.squaredNorm() + c * detail::loss_sum(scores, y, loss);
}

/// Analytic gradient of the objective in (w, bias).
inline void gradient(const Eigen::VectorXd& w, double bias, const DataMatrix& X,
                     const std::vector<int>& y, double c, Loss loss,
                     Eigen::VectorXd& grad_w, double& grad_bias) {
    const Eigen::VectorXd scores = X.transpose_times(w).array() + bias;
    Eigen::VectorXd coeff;
    detail::loss_coeff(scores, y, c, loss, coeff);
    grad_w = w + X.times(coeff);
    grad_bias = coeff.sum();
}

/// Full-batch gradient descent with backtracking (Armijo) line search,
/// zero initialization. Stops when the gradient infinity-norm over
/// (w, bias) drops to 1e-6, or after 5000 iterations.
inline LinearModel fit(const DataMatrix& X, const std::vector<int>& y, double c,
                       Loss loss = Loss::SquaredHinge, FitDiagnostics* diag = nullptr) {
    if (c <= 0.0) throw InvalidArgument("fit: C must be positive");
    if (y.size() != X.cols()) throw ShapeError("fit: one label per column required");
    bool has_pos = false, has_neg = false;
    for (int label : y) {
        if (label == 1) has_pos = true;
        else if (label == -1) has_neg = true;
        else throw InvalidArgument("fit: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg)
        throw DataError("fit: degenerate labels, need at least one example of each class");

    constexpr std::size_t kMaxIterations = 5000;
    constexpr double kGradTolerance = 1e-6;
    constexpr double kArmijo = 1e-4;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.dim()));
    double bias = 0.0;
    // The score vector X^T w + b is carried across iterations; a step
    // along -grad moves it by -t (X^T grad_w + grad_b), so line-search
    // trials cost O(n + d) instead of a matrix product each.
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols()));
    double value = 0.5 * w.squaredNorm() + c * detail::loss_sum(scores, y, loss);
    if (diag) diag->objective_trace.push_back(value);

    Eigen::VectorXd coeff, grad_w, dir, w_trial, scores_trial;
    double step = 1.0;
    std::size_t iter = 0;
    bool converged = false;
    for (; iter < kMaxIterations; ++iter) {
        if (iter > 0 && iter % 512 == 0)
            scores = X.transpose_times(w).array() + bias; // shed accumulated drift
        detail::loss_coeff(scores, y, c, loss, coeff);
        grad_w = w + X.times(coeff);
        const double grad_bias = coeff.sum();
        const double grad_inf = std::max(grad_w.lpNorm<Eigen::Infinity>(), std::abs(grad_bias));
        if (grad_inf <= kGradTolerance) {
            converged = true;
            break;
        }
        const double grad_sq = grad_w.squaredNorm() + grad_bias * grad_bias;
        dir = X.transpose_times(grad_w).array() + grad_bias;

        step = std::min(2.0 * step, 1.0);
        bool accepted = false;
        while (step > 1e-18) {
            w_trial = w - step * grad_w;
            const double bias_trial = bias - step * grad_bias;
            scores_trial = scores - step * dir;
            const double value_trial =
                0.5 * w_trial.squaredNorm() + c * detail::loss_sum(scores_trial, y, loss);
            if (value_trial <= value - kArmijo * step * grad_sq) {
                w.swap(w_trial);
                bias = bias_trial;
                scores.swap(scores_trial);
                value = value_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // no descent step representable
        if (diag) diag->objective_trace.push_back(value);
    }
    if (diag) {
        diag->iterations = iter;
        diag->converged = converged;
    }

    LinearModel model;
    model.w = std::move(w);
    model.bias = bias;
    model.c = c;
    model.loss = loss;
    return model;
}

/// sign(w^T x + b) per column; an exact zero resolves to +1.
inline std::vector<int> predict(const LinearModel& model, const DataMatrix& X) {
    if (X.dim() != static_cast<std::size_t>(model.w.size()))
        throw ShapeError("predict: dimension mismatch");
    const Eigen::VectorXd scores = X.transpose_times(model.w).array() + model.bias;
    std::vector<int> labels(X.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = scores(static_cast<Eigen::Index>(i)) >= 0.0 ? 1 : -1;
    return labels;
}

/// Fraction of columns misclassified.
inline double error_rate(const LinearModel& model, const DataMatrix& X,
                         const std::vector<int>& y) {
    if (y.size() != X.cols()) throw ShapeError("error_rate: one label per column required");
    if (y.empty()) return 0.0;
    const std::vector<int> predicted = predict(model, X);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < y.size(); ++i) wrong += predicted[i] != y[i];
    return static_cast<double>(wrong) / static_cast<double>(y.size());
}

} // namespace msda
