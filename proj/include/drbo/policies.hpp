#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drbo/adversary.hpp"
#include "drbo/errors.hpp"
#include "drbo/mmd.hpp"
#include "drbo/posterior.hpp"

namespace drbo {

/// One executed step: what was played, what came back, and the conservative
/// (pessimistic worst-case) value of the played action under the step's
/// reference and margin, computed right after the posterior update.
struct StepEntry {
    int x_idx = -1;
    int c_idx = -1;
    double y = 0.0;
    double epsilon = 0.0;
    WeightVector reference;
    double conservative_value = 0.0;
};

struct PolicyState {
    PosteriorModel model;
    std::vector<Eigen::VectorXd> action_grid;
    std::vector<Eigen::VectorXd> context_grid;
    GramMatrix context_gram;
    std::vector<StepEntry> history;
    double solver_tol = 1e-6;

    // Incremental best-solution tracker over history (running argmax of
    // conservative values; assumes a fixed (reference, epsilon) schedule).
    int best_step = -1;
    int best_action = -1;
    double best_conservative = -std::numeric_limits<double>::infinity();

    AdversaryWorkspace ws;  // reused across per-action sweeps (same M throughout)
};

/// Builds a state whose posterior maintains mean/std over the full joint grid
/// incrementally (action-major layout).
inline PolicyState make_policy_state(const KernelSpec& kernel, double noise_sigma,
                                     double rkhs_bound, double delta,
                                     PosteriorOptions opts,
                                     std::vector<Eigen::VectorXd> action_grid,
                                     std::vector<Eigen::VectorXd> context_grid,
                                     GramMatrix context_gram,
                                     double solver_tol = 1e-6) {
    if (action_grid.empty() || context_grid.empty())
        throw invalid_input("policy state needs non-empty grids");
    auto grid = std::make_shared<std::vector<JointPoint>>();
    grid->reserve(action_grid.size() * context_grid.size());
    for (const auto& x : action_grid)
        for (const auto& c : context_grid) grid->push_back({x, c});
    opts.prediction_grid = grid;
    opts.grid_row_size = static_cast<Eigen::Index>(context_grid.size());
    PolicyState s;
    s.model = PosteriorModel(kernel, noise_sigma, rkhs_bound, delta, opts);
    s.action_grid = std::move(action_grid);
    s.context_grid = std::move(context_grid);
    s.context_gram = std::move(context_gram);
    s.solver_tol = solver_tol;
    return s;
}

struct StepSelection {
    int action = -1;
    double score = 0.0;  // optimistic worst-case value of the chosen action
};

namespace detail {

inline void check_reference(const PolicyState& s, const WeightVector& ref) {
    ref.validate(1e-7);
    if (ref.weights.size() != static_cast<Eigen::Index>(s.context_grid.size()))
        throw invalid_input("reference length does not match the context grid");
}

}  // namespace detail

/// Optimistic distributionally robust selection: for every action, the
/// adversary minimizes over the MMD ball applied to that action's ucb row;
/// the action with the largest worst-case value wins. Ties go to the lowest
/// index.
inline StepSelection drbo_general_select(PolicyState& s, const WeightVector& reference,
                                         double epsilon) {
    detail::check_reference(s, reference);
    AdversaryProblem prob;
    prob.reference = reference;
    prob.epsilon = epsilon;
    prob.context_gram = s.context_gram;
    StepSelection sel;
    sel.score = -std::numeric_limits<double>::infinity();
    const int nx = static_cast<int>(s.action_grid.size());
    for (int i = 0; i < nx; ++i) {
        ConfidenceBand band = confidence_band_row(s.model, i);
        prob.values = std::move(band.ucb);
        double value;
        try {
            value = solve(prob, s.solver_tol, &s.ws).value;
        } catch (const solver_error& e) {
            throw solver_error(std::string(e.what()) + " (action index " +
                                   std::to_string(i) + ")",
                               e.best_weights, e.best_value, e.dual_gap,
                               e.iterations);
        }
        if (value > sel.score) {
            sel.score = value;
            sel.action = i;
        }
    }
    return sel;
}

inline int drbo_general_step(PolicyState& s, const WeightVector& reference,
                             double epsilon) {
    return drbo_general_select(s, reference, epsilon).action;
}

/// Data-driven variant: reference = empirical distribution of the contexts
/// seen so far, margin from the schedule at t-1. Before any context arrives
/// the reference is uniform with the t=1 margin (warm-up rule).
inline int drbo_datadriven_step(PolicyState& s, const MarginSchedule& schedule) {
    const Eigen::Index nc = static_cast<Eigen::Index>(s.context_grid.size());
    WeightVector reference;
    double epsilon;
    if (s.history.empty()) {
        reference = uniform_weights(nc);
        epsilon = margin(schedule, 1);
    } else {
        std::vector<int> ctx;
        ctx.reserve(s.history.size());
        for (const auto& h : s.history) ctx.push_back(h.c_idx);
        reference = empirical_weights(ctx, nc);
        epsilon = margin(schedule, static_cast<int>(s.history.size()));
    }
    return drbo_general_select(s, reference, epsilon).action;
}

/// Simulator-setting step: action as in the general setting, context = the
/// most uncertain one at that action (largest posterior std, lowest index on
/// ties).
inline std::pair<int, int> drbo_simulator_step(PolicyState& s,
                                               const WeightVector& reference,
                                               double epsilon) {
    const StepSelection sel = drbo_general_select(s, reference, epsilon);
    const Eigen::Index nc = s.model.options().grid_row_size;
    const Eigen::Index base = static_cast<Eigen::Index>(sel.action) * nc;
    int cbest = 0;
    double sbest = -1.0;
    for (Eigen::Index j = 0; j < nc; ++j) {
        const double sd = s.model.grid_std(base + j);
        if (sd > sbest) {
            sbest = sd;
            cbest = static_cast<int>(j);
        }
    }
    return {sel.action, cbest};
}

/// Action of the history step with the best conservative value. The tracker
/// is maintained incrementally by `observe`; its per-step values were
/// computed under each step's own (reference, epsilon), so callers should
/// hold those fixed across the run for the running max to be meaningful.
inline int select_solution(const PolicyState& s, const WeightVector& /*reference*/,
                           double /*epsilon*/) {
    if (s.history.empty())
        throw invalid_input("select_solution: empty history");
    return s.best_action;
}

/// Optimistic expected payoff under the reference distribution.
inline int ucb_baseline_step(PolicyState& s, const WeightVector& reference) {
    detail::check_reference(s, reference);
    int best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    const int nx = static_cast<int>(s.action_grid.size());
    for (int i = 0; i < nx; ++i) {
        const ConfidenceBand band = confidence_band_row(s.model, i);
        const double value = band.ucb.dot(reference.weights);
        if (value > best_val) {
            best_val = value;
            best = i;
        }
    }
    return best;
}

/// Worst-case over a Euclidean ball of contexts around the reference mean.
/// An empty ball falls back to the single nearest context.
inline int stableopt_step(PolicyState& s, const WeightVector& reference,
                          double epsilon) {
    detail::check_reference(s, reference);
    const Eigen::Index nc = static_cast<Eigen::Index>(s.context_grid.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(s.context_grid[0].size());
    for (Eigen::Index j = 0; j < nc; ++j)
        mean += reference.weights[j] * s.context_grid[static_cast<std::size_t>(j)];
    std::vector<Eigen::Index> ball;
    Eigen::Index nearest = 0;
    double nearest_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < nc; ++j) {
        const double d = (s.context_grid[static_cast<std::size_t>(j)] - mean).norm();
        if (d <= epsilon) ball.push_back(j);
        if (d < nearest_d) {
            nearest_d = d;
            nearest = j;
        }
    }
    if (ball.empty()) ball.push_back(nearest);
    int best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    const int nx = static_cast<int>(s.action_grid.size());
    for (int i = 0; i < nx; ++i) {
        const ConfidenceBand band = confidence_band_row(s.model, i);
        double worst = std::numeric_limits<double>::infinity();
        for (Eigen::Index j : ball) worst = std::min(worst, band.ucb[j]);
        if (worst > best_val) {
            best_val = worst;
            best = i;
        }
    }
    return best;
}

/// Record an executed step: posterior update, history append, and tracker
/// update with the post-update pessimistic worst-case value of the played
/// action.
inline void observe(PolicyState& s, int x_idx, int c_idx, double y,
                    const WeightVector& reference, double epsilon) {
    detail::check_reference(s, reference);
    const int nx = static_cast<int>(s.action_grid.size());
    const int nc = static_cast<int>(s.context_grid.size());
    if (x_idx < 0 || x_idx >= nx || c_idx < 0 || c_idx >= nc)
        throw invalid_input("observe: grid index out of range");
    Observation obs;
    obs.x = s.action_grid[static_cast<std::size_t>(x_idx)];
    obs.c = s.context_grid[static_cast<std::size_t>(c_idx)];
    obs.y = y;
    s.model.absorb(obs);
    ConfidenceBand band = confidence_band_row(s.model, x_idx);
    AdversaryProblem prob;
    prob.values = std::move(band.lcb);
    prob.reference = reference;
    prob.epsilon = epsilon;
    prob.context_gram = s.context_gram;
    const double conservative = solve(prob, s.solver_tol, &s.ws).value;
    StepEntry entry;
    entry.x_idx = x_idx;
    entry.c_idx = c_idx;
    entry.y = y;
    entry.epsilon = epsilon;
    entry.reference = reference;
    entry.conservative_value = conservative;
    s.history.push_back(std::move(entry));
    if (conservative > s.best_conservative) {
        s.best_conservative = conservative;
        s.best_step = static_cast<int>(s.history.size()) - 1;
        s.best_action = x_idx;
    }
}

}  // namespace drbo
