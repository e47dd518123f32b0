#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "drbo/errors.hpp"
#include "drbo/kernel.hpp"

namespace drbo {

/// Probability vector over the finite context grid.
struct WeightVector {
    Eigen::VectorXd weights;

    void validate(double tol = 1e-9) const {
        if (weights.size() == 0) throw invalid_input("empty weight vector");
        if ((weights.array() < -tol).any() || (weights.array() > 1.0 + tol).any())
            throw invalid_input("weights must lie in [0, 1]");
        if (std::abs(weights.sum() - 1.0) > tol)
            throw invalid_input("weights must sum to 1");
    }
};

inline WeightVector uniform_weights(Eigen::Index n) {
    if (n <= 0) throw invalid_input("weight vector needs positive length");
    return {Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
}

inline WeightVector delta_weights(Eigen::Index n, Eigen::Index at) {
    if (at < 0 || at >= n) throw invalid_input("delta index out of range");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    w[at] = 1.0;
    return {w};
}

enum class margin_mode {
    fixed,          // constant epsilon0
    concentration,  // (1/sqrt(t)) * (2 + sqrt(2 log(1/delta)))
    anytime,        // (1/sqrt(t)) * (2 + sqrt(2 log(6 t^2 / delta)))
};

struct MarginSchedule {
    margin_mode mode = margin_mode::fixed;
    double epsilon0 = 0.0;
    double delta = 0.1;

    void validate() const {
        if (epsilon0 < 0.0) throw invalid_input("margin epsilon0 must be >= 0");
        if (mode != margin_mode::fixed && !(delta > 0.0 && delta < 1.0))
            throw invalid_input("margin delta must lie in (0, 1)");
    }
};

/// MMD between two weight vectors on the same grid:
/// d = sqrt((w - w2)' M (w - w2)).
/// Quadratic forms in [-1e-9, 0) clamp to 0 (PSD jitter round-off); anything
/// more negative is a hard numeric error.
inline double mmd_distance(const WeightVector& w, const WeightVector& w2,
                           const GramMatrix& M) {
    if (w.weights.size() != w2.weights.size() ||
        w.weights.size() != M.size())
        throw invalid_input("mmd_distance: mismatched lengths");
    const Eigen::VectorXd d = w.weights - w2.weights;
    const double q = d.dot(M.entries * d);
    if (q < -1e-9)
        throw numeric_error("mmd_distance: quadratic form is negative (" +
                            std::to_string(q) + "); M is not PSD");
    return q > 0.0 ? std::sqrt(q) : 0.0;
}

/// Empirical distribution of observed grid indices.
inline WeightVector empirical_weights(const std::vector<int>& observed_contexts,
                                      Eigen::Index n) {
    if (observed_contexts.empty())
        throw invalid_input("empirical_weights: no observed contexts");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (int idx : observed_contexts) {
        if (idx < 0 || idx >= n)
            throw invalid_input("empirical_weights: index out of range");
        w[idx] += 1.0;
    }
    w /= static_cast<double>(observed_contexts.size());
    return {w};
}

// Pure formula evaluation; schedule field validation is the config layer's
// job, so out-of-range deltas here just flow through the log terms.
inline double margin(const MarginSchedule& schedule, int t) {
    if (t < 1) throw invalid_input("margin: t must be >= 1");
    const double td = static_cast<double>(t);
    switch (schedule.mode) {
        case margin_mode::fixed:
            return schedule.epsilon0;
        case margin_mode::concentration:
            return (2.0 + std::sqrt(2.0 * std::log(1.0 / schedule.delta))) /
                   std::sqrt(td);
        case margin_mode::anytime:
            return (2.0 +
                    std::sqrt(2.0 * std::log(6.0 * td * td / schedule.delta))) /
                   std::sqrt(td);
    }
    throw invalid_input("margin: unknown mode");
}

/// Weights proportional to the N(mean, std^2) density at the grid points,
/// renormalized to sum 1.
inline WeightVector discretize_gaussian(double mean, double std,
                                        const std::vector<Eigen::VectorXd>& grid) {
    if (grid.empty()) throw invalid_input("discretize_gaussian: empty grid");
    if (!(std > 0.0)) throw invalid_input("discretize_gaussian: std must be > 0");
    Eigen::VectorXd w(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i].size() != 1)
            throw invalid_input("discretize_gaussian: grid must be 1-D");
        const double z = (grid[i][0] - mean) / std;
        w[static_cast<Eigen::Index>(i)] = std::exp(-0.5 * z * z);
    }
    const double s = w.sum();
    if (!(s > 0.0))
        throw numeric_error("discretize_gaussian: all densities underflowed");
    return {w / s};
}

/// Exact MMD between two Gaussians discretized onto the same grid; this is how
/// the synthetic experiments pin their ball radius.
inline double mmd_between_gaussian_grids(double mean1, double std1, double mean2,
                                         double std2,
                                         const std::vector<Eigen::VectorXd>& grid,
                                         const GramMatrix& M) {
    return mmd_distance(discretize_gaussian(mean1, std1, grid),
                        discretize_gaussian(mean2, std2, grid), M);
}

}  // namespace drbo
