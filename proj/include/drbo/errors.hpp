#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace drbo {

// Caller handed us something malformed (bad dimensions, empty input, ...).
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numerical routine left its domain (failed factorization, negative
// quadratic form beyond round-off, ...).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative solver hit its caps before certifying the requested accuracy.
// Carries the best iterate found so the caller can decide whether to use it.
struct solver_error : std::runtime_error {
    solver_error(const std::string& msg, Eigen::VectorXd best_weights,
                 double best_value, double dual_gap, int iterations)
        : std::runtime_error(msg),
          best_weights(std::move(best_weights)),
          best_value(best_value),
          dual_gap(dual_gap),
          iterations(iterations) {}

    Eigen::VectorXd best_weights;
    double best_value;
    double dual_gap;
    int iterations;
};

}  // namespace drbo
