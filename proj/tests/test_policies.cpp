#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "drbo/environments.hpp"
#include "drbo/policies.hpp"

using namespace drbo;

namespace {

PosteriorOptions fixed_beta(double b = 2.0) {
    PosteriorOptions o;
    o.mode = beta_mode::fixed;
    o.beta_fixed = b;
    return o;
}

PolicyState small_state(int nx = 6, int nc = 5, double beta = 2.0) {
    const auto actions = uniform_grid_1d(nx);
    const auto contexts = uniform_grid_1d(nc);
    const GramMatrix M = context_gram(make_se_kernel(0.2), contexts);
    return make_policy_state(make_se_kernel(0.2), 0.1, 2.0, 0.1,
                             fixed_beta(beta), actions, contexts, M);
}

WeightVector random_reference(Eigen::Index n, std::mt19937_64& eng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.05 + u(eng);
    w /= w.sum();
    return {w};
}

void feed_random(PolicyState& s, int steps, std::mt19937_64& eng,
                 const WeightVector& ref, double eps) {
    std::uniform_int_distribution<int> dx(0, static_cast<int>(s.action_grid.size()) - 1);
    std::uniform_int_distribution<int> dc(0, static_cast<int>(s.context_grid.size()) - 1);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < steps; ++i) observe(s, dx(eng), dc(eng), g(eng), ref, eps);
}

}  // namespace

TEST_CASE("empty posterior ties break to the lowest index") {
    PolicyState s = small_state();
    const WeightVector ref = uniform_weights(5);
    CHECK(drbo_general_step(s, ref, 0.3) == 0);
    CHECK(ucb_baseline_step(s, ref) == 0);
    const auto [x, c] = drbo_simulator_step(s, ref, 0.3);
    CHECK(x == 0);
    CHECK(c == 0);
}

TEST_CASE("epsilon zero reduces the robust rule to the ucb baseline") {
    std::mt19937_64 eng(5);
    for (int rep = 0; rep < 30; ++rep) {
        PolicyState s = small_state();
        const WeightVector ref = random_reference(5, eng);
        feed_random(s, rep % 12, eng, ref, 0.0);
        CHECK(drbo_general_step(s, ref, 0.0) == ucb_baseline_step(s, ref));
    }
}

TEST_CASE("large ball prefers the robust action over the reference favorite") {
    // action 0: great at context 0, terrible at context 1; action 1: flat 0.5.
    // The reference mass sits on context 0, so the baseline favors action 0;
    // a wide ball exposes its downside.
    PolicyState s = small_state(2, 2);
    for (int i = 0; i < 30; ++i) {
        observe(s, 0, 0, 2.0, uniform_weights(2), 0.0);
        observe(s, 0, 1, -1.0, uniform_weights(2), 0.0);
        observe(s, 1, 0, 0.5, uniform_weights(2), 0.0);
        observe(s, 1, 1, 0.5, uniform_weights(2), 0.0);
    }
    const WeightVector ref{Eigen::Vector2d(0.9, 0.1)};
    CHECK(ucb_baseline_step(s, ref) == 0);
    const StepSelection robust = drbo_general_select(s, ref, 2.0);
    CHECK(robust.action == 1);

    // cross-check both actions' worst-case values against the oracle
    for (int i = 0; i < 2; ++i) {
        AdversaryProblem prob;
        prob.values = confidence_band_row(s.model, i).ucb;
        prob.reference = ref;
        prob.epsilon = 2.0;
        prob.context_gram = s.context_gram;
        const double oracle = brute_force_oracle(prob, 0.01).value;
        const double fast = solve(prob, s.solver_tol).value;
        CHECK(fast == Catch::Approx(oracle).margin(1e-3 * 3.0));
        if (i == robust.action)
            CHECK(robust.score == Catch::Approx(fast).margin(1e-9));
    }
}

TEST_CASE("chosen action maximizes the optimistic worst-case value") {
    std::mt19937_64 eng(9);
    PolicyState s = small_state();
    const WeightVector ref = random_reference(5, eng);
    feed_random(s, 18, eng, ref, 0.25);
    const StepSelection sel = drbo_general_select(s, ref, 0.25);
    for (int i = 0; i < 6; ++i) {
        AdversaryProblem prob;
        prob.values = confidence_band_row(s.model, i).ucb;
        prob.reference = ref;
        prob.epsilon = 0.25;
        prob.context_gram = s.context_gram;
        CHECK(solve(prob, s.solver_tol).value <= sel.score + 1e-7);
    }
}

TEST_CASE("data-driven steps use the empirical reference and margin") {
    const MarginSchedule sched{margin_mode::concentration, 0.0, 0.1};

    SECTION("warm-up mirrors a uniform reference at the t=1 margin") {
        PolicyState a = small_state();
        PolicyState b = small_state();
        CHECK(drbo_datadriven_step(a, sched) ==
              drbo_general_step(b, uniform_weights(5), margin(sched, 1)));
    }

    SECTION("after three contexts the empirical distribution drives the step") {
        PolicyState a = small_state();
        PolicyState b = small_state();
        std::mt19937_64 eng(13);
        std::normal_distribution<double> g(0.0, 0.3);
        const int ctx[3] = {3, 3, 1};
        const int act[3] = {0, 2, 4};
        for (int i = 0; i < 3; ++i) {
            const double y = g(eng);
            observe(a, act[i], ctx[i], y, uniform_weights(5), 0.1);
            observe(b, act[i], ctx[i], y, uniform_weights(5), 0.1);
        }
        const WeightVector emp = empirical_weights({3, 3, 1}, 5);
        CHECK(emp.weights[3] == Catch::Approx(2.0 / 3.0));
        CHECK(emp.weights[1] == Catch::Approx(1.0 / 3.0));
        CHECK(drbo_datadriven_step(a, sched) ==
              drbo_general_step(b, emp, margin(sched, 3)));
    }
}

TEST_CASE("simulator context is the most uncertain at the chosen action") {
    std::mt19937_64 eng(21);
    PolicyState s = small_state();
    const WeightVector ref = random_reference(5, eng);
    feed_random(s, 10, eng, ref, 0.2);
    const auto [x, c] = drbo_simulator_step(s, ref, 0.2);
    const Eigen::Index base = static_cast<Eigen::Index>(x) * 5;
    for (Eigen::Index j = 0; j < 5; ++j)
        CHECK(s.model.grid_std(base + j) <= s.model.grid_std(base + c) + 1e-12);

    // hammering one context pushes the next query elsewhere
    PolicyState s2 = small_state(2, 2);
    const WeightVector ref2 = uniform_weights(2);
    for (int i = 0; i < 8; ++i) {
        const auto [xi, ci] = drbo_simulator_step(s2, ref2, 0.1);
        observe(s2, xi, 1, 0.5, ref2, 0.1);
        (void)ci;
    }
    const auto [x3, c3] = drbo_simulator_step(s2, ref2, 0.1);
    (void)x3;
    CHECK(c3 == 0);
}

TEST_CASE("solution tracker follows the best conservative step") {
    std::mt19937_64 eng(29);
    PolicyState s = small_state();
    const WeightVector ref = random_reference(5, eng);
    CHECK_THROWS_AS(select_solution(s, ref, 0.2), invalid_input);

    double prev_best = -1e300;
    std::uniform_int_distribution<int> dx(0, 5);
    std::uniform_int_distribution<int> dc(0, 4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 25; ++t) {
        observe(s, dx(eng), dc(eng), g(eng), ref, 0.2);
        CHECK(s.best_conservative >= prev_best);
        prev_best = s.best_conservative;
    }
    REQUIRE(s.history.size() == 25);
    // incremental tracker == from-scratch argmax over stored step values
    int arg = 0;
    for (std::size_t i = 1; i < s.history.size(); ++i)
        if (s.history[i].conservative_value >
            s.history[static_cast<std::size_t>(arg)].conservative_value)
            arg = static_cast<int>(i);
    CHECK(s.best_step == arg);
    CHECK(select_solution(s, ref, 0.2) == s.history[static_cast<std::size_t>(arg)].x_idx);
}

TEST_CASE("single observe makes that step the selected solution") {
    PolicyState s = small_state();
    observe(s, 3, 2, 0.7, uniform_weights(5), 0.2);
    CHECK(select_solution(s, uniform_weights(5), 0.2) == 3);
    CHECK(s.history.size() == 1);
}

TEST_CASE("ucb baseline under a delta reference scans one column") {
    std::mt19937_64 eng(37);
    PolicyState s = small_state();
    feed_random(s, 15, eng, uniform_weights(5), 0.2);
    const WeightVector ref = delta_weights(5, 3);
    const int chosen = ucb_baseline_step(s, ref);
    int manual = 0;
    double best = -1e300;
    for (int i = 0; i < 6; ++i) {
        const double u = confidence_band_row(s.model, i).ucb[3];
        if (u > best) {
            best = u;
            manual = i;
        }
    }
    CHECK(chosen == manual);
}

TEST_CASE("stableopt ball widens from a singleton to the full grid") {
    std::mt19937_64 eng(43);
    PolicyState s = small_state(3, 3);
    const WeightVector ref = uniform_weights(3);  // mean context 0.5 = grid point 1
    feed_random(s, 12, eng, ref, 0.2);

    SECTION("zero radius is the nearest context column") {
        const int chosen = stableopt_step(s, ref, 0.0);
        int manual = 0;
        double best = -1e300;
        for (int i = 0; i < 3; ++i) {
            const double u = confidence_band_row(s.model, i).ucb[1];
            if (u > best) {
                best = u;
                manual = i;
            }
        }
        CHECK(chosen == manual);
    }

    SECTION("huge radius is the max-min over all contexts") {
        const int chosen = stableopt_step(s, ref, 10.0);
        int manual = 0;
        double best = -1e300;
        for (int i = 0; i < 3; ++i) {
            const double worst = confidence_band_row(s.model, i).ucb.minCoeff();
            if (worst > best) {
                best = worst;
                manual = i;
            }
        }
        CHECK(chosen == manual);
    }

    SECTION("intermediate radius covers exactly two contexts") {
        // contexts at 0, 0.5, 1; mean 0.5; radius 0.5 covers all three, so
        // shrink slightly to cover only the middle one plus none else; use
        // 0.49 to keep the middle singleton and 0.51 to include the ends.
        const int narrow = stableopt_step(s, ref, 0.49);
        const int wide = stableopt_step(s, ref, 0.51);
        int manual_narrow = 0, manual_wide = 0;
        double bn = -1e300, bw = -1e300;
        for (int i = 0; i < 3; ++i) {
            const ConfidenceBand band = confidence_band_row(s.model, i);
            if (band.ucb[1] > bn) {
                bn = band.ucb[1];
                manual_narrow = i;
            }
            const double worst = band.ucb.minCoeff();
            if (worst > bw) {
                bw = worst;
                manual_wide = i;
            }
        }
        CHECK(narrow == manual_narrow);
        CHECK(wide == manual_wide);
    }
}

TEST_CASE("observe validates indices and references") {
    PolicyState s = small_state();
    CHECK_THROWS_AS(observe(s, -1, 0, 0.0, uniform_weights(5), 0.1), invalid_input);
    CHECK_THROWS_AS(observe(s, 0, 9, 0.0, uniform_weights(5), 0.1), invalid_input);
    CHECK_THROWS_AS(observe(s, 0, 0, 0.0, uniform_weights(4), 0.1), invalid_input);
    CHECK_THROWS_AS(drbo_general_step(s, uniform_weights(4), 0.1), invalid_input);
}

TEST_CASE("policy posterior equals a batch refit of its history") {
    std::mt19937_64 eng(51);
    PolicyState s = small_state();
    const WeightVector ref = random_reference(5, eng);
    feed_random(s, 20, eng, ref, 0.15);
    std::vector<Observation> obs;
    for (const auto& h : s.history) {
        Observation o;
        o.x = s.action_grid[static_cast<std::size_t>(h.x_idx)];
        o.c = s.context_grid[static_cast<std::size_t>(h.c_idx)];
        o.y = h.y;
        obs.push_back(o);
    }
    const PosteriorModel refit = fit(obs, make_se_kernel(0.2), 0.1, 2.0, 0.1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int q = 0; q < 20; ++q) {
        const JointPoint z = make_point_1d(u(eng), u(eng));
        CHECK(s.model.mean_at(z) == Catch::Approx(refit.mean_at(z)).margin(1e-8));
        CHECK(s.model.var_at(z) == Catch::Approx(refit.var_at(z)).margin(1e-8));
    }
}

TEST_CASE("data-driven play converges to the stochastic optimum") {
    // fixed sampler, shrinking margin: late actions should concentrate on the
    // stochastic-optimal action under the true context distribution
    const Environment env = make_benchmark2({});
    const WeightVector truth = env.context_sampler(1);
    PolicyState s = make_policy_state(make_se_kernel(0.2), env.noise_sigma, 2.0,
                                      0.1, fixed_beta(2.0), env.action_grid,
                                      env.context_grid, env.mmd_gram);
    const MarginSchedule sched{margin_mode::concentration, 0.0, 0.1};
    const int T = 250;
    std::vector<int> actions;
    for (int t = 1; t <= T; ++t) {
        const int x = drbo_datadriven_step(s, sched);
        const int c = sample_context(env, t, 99);
        const double y = observe_reward(env, x, c, detail::mix_seed(99, t));
        observe(s, x, c, y, truth, 0.0);
        actions.push_back(x);
    }
    Eigen::VectorXd expected = env.f_table * truth.weights;
    Eigen::Index xstar;
    expected.maxCoeff(&xstar);
    // the peak is flat, so count near-optimal plays over an averaged window
    // instead of demanding pointwise convergence
    int hits = 0;
    for (int t = T - 50; t < T; ++t)
        if (std::abs(actions[static_cast<std::size_t>(t)] -
                     static_cast<int>(xstar)) <= 3)
            ++hits;
    CHECK(hits >= 35);
}
