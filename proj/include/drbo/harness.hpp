#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drbo/adversary.hpp"
#include "drbo/environments.hpp"
#include "drbo/errors.hpp"
#include "drbo/mmd.hpp"
#include "drbo/policies.hpp"
#include "drbo/posterior.hpp"

namespace drbo {

struct RunConfig {
    std::string environment = "benchmark1";  // benchmark1 | benchmark2 |
                                             // wind-synthetic | wind-csv
    std::string policy = "drbo-general";     // drbo-general | drbo-datadriven |
                                             // drbo-simulator | ucb | stableopt |
                                             // zero-commit
    int horizon = 200;
    std::vector<std::uint64_t> seeds = {0,  1,  2,  3,  4,  5,  6,  7,  8,  9,
                                        10, 11, 12, 13, 14, 15, 16, 17, 18, 19};

    // Regression kernel; lengthscale 0 means "per-environment default"
    // (0.04 on benchmark1, whose features are that narrow; 0.2 elsewhere).
    std::string kernel_family = "se";  // se | matern52
    double kernel_lengthscale = 0.0;
    double kernel_variance = 1.0;
    std::string mmd_kernel_family = "se";
    double mmd_kernel_lengthscale = 0.2;

    std::string beta = "2.0";  // "theoretical" or a numeric constant
    double rkhs_bound = 2.0;
    double delta = 0.05;
    int delta_denominator = 1;

    // epsilon-mode: exact (environment's own schedule) | fixed |
    // concentration | anytime
    std::string epsilon_mode = "exact";
    double epsilon0 = 0.0;
    double margin_delta = 0.1;

    double solver_tol = 1e-6;
    double noise_sigma = -1.0;  // <0: environment default
    int grid_size = 30;
    std::string out_dir = "out";

    // wind walk-forward
    std::string wind_csv;
    int synthetic_wind_length = 2000;
    int wind_window = 48;
    int sim_budget = 100;
    int sim_steps_per_hour = 1;

    void validate() const {
        if (horizon < 1) throw invalid_input("config: horizon must be >= 1");
        if (seeds.empty()) throw invalid_input("config: need at least one seed");
        if (environment != "benchmark1" && environment != "benchmark2" &&
            environment != "wind-synthetic" && environment != "wind-csv")
            throw invalid_input("config: unknown environment '" + environment + "'");
        if (policy != "drbo-general" && policy != "drbo-datadriven" &&
            policy != "drbo-simulator" && policy != "ucb" &&
            policy != "stableopt" && policy != "zero-commit")
            throw invalid_input("config: unknown policy '" + policy + "'");
        if (kernel_family != "se" && kernel_family != "matern52")
            throw invalid_input("config: unknown kernel family");
        if (mmd_kernel_family != "se" && mmd_kernel_family != "matern52")
            throw invalid_input("config: unknown mmd kernel family");
        if (epsilon_mode != "exact" && epsilon_mode != "fixed" &&
            epsilon_mode != "concentration" && epsilon_mode != "anytime")
            throw invalid_input("config: unknown epsilon mode");
        if (beta != "theoretical") {
            try {
                (void)std::stod(beta);
            } catch (...) {
                throw invalid_input("config: beta must be 'theoretical' or numeric");
            }
        }
        if (grid_size < 2) throw invalid_input("config: grid too small");
        if (environment == "wind-csv" && wind_csv.empty())
            throw invalid_input("config: wind-csv environment needs a csv path");
    }
};

struct StepRow {
    int t = 0;
    int x_idx = -1;
    int c_idx = -1;
    double y = 0.0;
    double epsilon = 0.0;
    double r_t = 0.0;
    double R_t = 0.0;
    double optimistic_value = 0.0;
    double wall_ms = 0.0;
};

struct RunRecord {
    std::string environment;
    std::string policy;
    std::uint64_t seed = 0;
    std::vector<StepRow> rows;
    int x_hat = -1;                 // simulator-mode selection, else -1
    double simple_regret = std::numeric_limits<double>::quiet_NaN();
    double realized_info_gain = 0.0;
    std::string error;              // non-empty: seed aborted by a solver failure
};

/// Worst-case expected true value of one action over the MMD ball.
inline double robust_value(const Environment& env, int x_idx,
                           const WeightVector& reference, double epsilon,
                           const GramMatrix& M, double tol = 1e-8,
                           AdversaryWorkspace* ws = nullptr) {
    AdversaryProblem prob;
    prob.values = env.f_table.row(x_idx).transpose();
    prob.reference = reference;
    prob.epsilon = epsilon;
    prob.context_gram = M;
    return solve(prob, tol, ws).value;
}

/// Caches the per-action robust values of the true function for the last
/// (reference, epsilon) seen, so constant schedules pay for one sweep total
/// and slowly drifting ones pay one warm-started sweep per change.
class RobustEvaluator {
public:
    RobustEvaluator(const Environment& env, GramMatrix M, double tol = 1e-8)
        : env_(env), M_(std::move(M)), tol_(tol) {}

    const Eigen::VectorXd& values(const WeightVector& reference, double epsilon) {
        if (!cached_ || epsilon != ceps_ ||
            cref_.size() != reference.weights.size() ||
            (cref_.array() != reference.weights.array()).any()) {
            const int nx = static_cast<int>(env_.action_grid.size());
            rv_.resize(nx);
            AdversaryProblem prob;
            prob.reference = reference;
            prob.epsilon = epsilon;
            prob.context_gram = M_;
            for (int i = 0; i < nx; ++i) {
                prob.values = env_.f_table.row(i).transpose();
                rv_[i] = solve(prob, tol_, &ws_).value;
            }
            rv_.maxCoeff(&istar_);
            cref_ = reference.weights;
            ceps_ = epsilon;
            cached_ = true;
        }
        return rv_;
    }

    int best_action(const WeightVector& reference, double epsilon) {
        values(reference, epsilon);
        return static_cast<int>(istar_);
    }

    /// r = robust_value(best) - robust_value(x); tiny negatives are solver
    /// tolerance and clamp to 0, anything past -1e-6 is a correctness bug.
    double regret(int x_idx, const WeightVector& reference, double epsilon) {
        const Eigen::VectorXd& rv = values(reference, epsilon);
        const double r = rv[istar_] - rv[x_idx];
        if (r < -1e-6)
            throw numeric_error("robust regret " + std::to_string(r) +
                                " below the -1e-6 clamp");
        return std::max(r, 0.0);
    }

private:
    const Environment& env_;
    GramMatrix M_;
    double tol_;
    AdversaryWorkspace ws_;
    Eigen::VectorXd rv_;
    Eigen::Index istar_ = 0;
    Eigen::VectorXd cref_;
    double ceps_ = -1.0;
    bool cached_ = false;
};

inline double robust_regret_step(const Environment& env, int x_idx,
                                 const WeightVector& reference, double epsilon,
                                 const GramMatrix& M) {
    RobustEvaluator ev(env, M);
    return ev.regret(x_idx, reference, epsilon);
}

inline double simple_regret(const Environment& env, int x_hat,
                            const WeightVector& reference, double epsilon,
                            const GramMatrix& M) {
    RobustEvaluator ev(env, M);
    return ev.regret(x_hat, reference, epsilon);
}

namespace detail {

inline Environment build_environment(const RunConfig& cfg) {
    KernelSpec mk = cfg.mmd_kernel_family == "se"
                        ? make_se_kernel(cfg.mmd_kernel_lengthscale)
                        : make_matern52_kernel(cfg.mmd_kernel_lengthscale);
    if (cfg.environment == "benchmark1" || cfg.environment == "benchmark2") {
        SyntheticParams p;
        p.grid_size = cfg.grid_size;
        p.mmd_kernel = mk;
        if (cfg.noise_sigma >= 0.0) p.noise_sigma = cfg.noise_sigma;
        return cfg.environment == "benchmark1" ? make_benchmark1(p)
                                               : make_benchmark2(p);
    }
    WindParams p;
    p.grid_size = cfg.grid_size;
    p.window = cfg.wind_window;
    p.mmd_kernel = mk;
    if (cfg.noise_sigma >= 0.0) p.noise_sigma = cfg.noise_sigma;
    WindSeries series = cfg.environment == "wind-csv"
                            ? ingest_wind_csv(cfg.wind_csv)
                            : synth_wind_generator(cfg.seeds.front(),
                                                   cfg.synthetic_wind_length);
    return make_wind_environment(std::move(series), p);
}

inline KernelSpec regression_kernel_for(const RunConfig& cfg) {
    double ell = cfg.kernel_lengthscale;
    if (ell <= 0.0) ell = cfg.environment == "benchmark1" ? 0.04 : 0.2;
    return cfg.kernel_family == "se"
               ? make_se_kernel(ell, cfg.kernel_variance)
               : make_matern52_kernel(ell, cfg.kernel_variance);
}

inline PosteriorOptions posterior_options_for(const RunConfig& cfg) {
    PosteriorOptions opts;
    if (cfg.beta == "theoretical") {
        opts.mode = beta_mode::theoretical;
    } else {
        opts.mode = beta_mode::fixed;
        opts.beta_fixed = std::stod(cfg.beta);
    }
    opts.delta_denominator = cfg.delta_denominator;
    return opts;
}

// Effective (reference, epsilon) for step t after the config's epsilon-mode
// override. The reference always comes from the environment; only the margin
// is overridable here (the data-driven policy builds its own reference).
inline std::pair<WeightVector, double> step_reference(const RunConfig& cfg,
                                                      const Environment& env,
                                                      int t) {
    auto [ref, eps] = env.reference_schedule(t);
    if (cfg.epsilon_mode == "fixed") {
        eps = cfg.epsilon0;
    } else if (cfg.epsilon_mode == "concentration" ||
               cfg.epsilon_mode == "anytime") {
        MarginSchedule sched;
        sched.mode = cfg.epsilon_mode == "concentration"
                         ? margin_mode::concentration
                         : margin_mode::anytime;
        sched.delta = cfg.margin_delta;
        eps = margin(sched, t);
    }
    return {std::move(ref), eps};
}

inline MarginSchedule datadriven_schedule(const RunConfig& cfg) {
    MarginSchedule sched;
    sched.mode = cfg.epsilon_mode == "anytime" ? margin_mode::anytime
                                               : margin_mode::concentration;
    if (cfg.epsilon_mode == "fixed") {
        sched.mode = margin_mode::fixed;
        sched.epsilon0 = cfg.epsilon0;
    }
    sched.delta = cfg.margin_delta;
    return sched;
}

inline RunRecord run_one_seed(const RunConfig& cfg, const Environment& env,
                              std::uint64_t seed) {
    RunRecord rec;
    rec.environment = env.name;
    rec.policy = cfg.policy;
    rec.seed = seed;
    rec.rows.reserve(static_cast<std::size_t>(cfg.horizon));

    PolicyState state = make_policy_state(
        regression_kernel_for(cfg), env.noise_sigma <= 0.0 ? 1e-12 : env.noise_sigma,
        cfg.rkhs_bound, cfg.delta, posterior_options_for(cfg), env.action_grid,
        env.context_grid, env.mmd_gram, cfg.solver_tol);
    RobustEvaluator evaluator(env, env.mmd_gram);
    const MarginSchedule dd_sched = datadriven_schedule(cfg);

    double cum = 0.0;
    for (int t = 1; t <= cfg.horizon; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        auto [ref, eps] = step_reference(cfg, env, t);
        int x_idx = -1, c_idx = -1;
        double score = 0.0;
        bool context_chosen = false;
        if (cfg.policy == "drbo-general") {
            const StepSelection sel = drbo_general_select(state, ref, eps);
            x_idx = sel.action;
            score = sel.score;
        } else if (cfg.policy == "drbo-datadriven") {
            x_idx = drbo_datadriven_step(state, dd_sched);
        } else if (cfg.policy == "drbo-simulator") {
            const auto [xi, ci] = drbo_simulator_step(state, ref, eps);
            x_idx = xi;
            c_idx = ci;
            context_chosen = true;
        } else if (cfg.policy == "ucb") {
            x_idx = ucb_baseline_step(state, ref);
        } else if (cfg.policy == "stableopt") {
            x_idx = stableopt_step(state, ref, eps);
        } else {  // zero-commit
            x_idx = 0;
        }
        if (!context_chosen) c_idx = sample_context(env, t, seed);
        const double y = observe_reward(
            env, x_idx, c_idx, mix_seed(seed, static_cast<std::uint64_t>(t)));
        observe(state, x_idx, c_idx, y, ref, eps);
        const double r = evaluator.regret(x_idx, ref, eps);
        cum += r;
        StepRow row;
        row.t = t;
        row.x_idx = x_idx;
        row.c_idx = c_idx;
        row.y = y;
        row.epsilon = eps;
        row.r_t = r;
        row.R_t = cum;
        row.optimistic_value = score;
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        rec.rows.push_back(row);
    }
    rec.realized_info_gain = state.model.realized_info_gain();
    if (cfg.policy == "drbo-simulator") {
        auto [ref, eps] = step_reference(cfg, env, cfg.horizon);
        rec.x_hat = select_solution(state, ref, eps);
        rec.simple_regret = evaluator.regret(rec.x_hat, ref, eps);
    }
    return rec;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// CSV with one row per step. Schema (v1):
/// t,x_idx,c_idx,y,epsilon,r_t,R_t,optimistic_value
/// wall_ms stays in-memory only so reruns of the same (config, seed) produce
/// byte-identical files.
inline void write_record_csv(const RunRecord& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_input("cannot write " + path);
    out << "# drbo-csv v1 run environment=" << rec.environment
        << " policy=" << rec.policy << " seed=" << rec.seed
        << " realized_info_gain=" << detail::fmt(rec.realized_info_gain);
    if (rec.x_hat >= 0)
        out << " x_hat=" << rec.x_hat
            << " simple_regret=" << detail::fmt(rec.simple_regret);
    if (!rec.error.empty()) out << " error=" << rec.error;
    out << "\n";
    out << "t,x_idx,c_idx,y,epsilon,r_t,R_t,optimistic_value\n";
    for (const auto& r : rec.rows)
        out << r.t << ',' << r.x_idx << ',' << r.c_idx << ','
            << detail::fmt(r.y) << ',' << detail::fmt(r.epsilon) << ','
            << detail::fmt(r.r_t) << ',' << detail::fmt(r.R_t) << ','
            << detail::fmt(r.optimistic_value) << "\n";
}

/// Aggregate CSV over seeds. Schema (v1):
/// t,mean_cum_regret,stderr_cum_regret,mean_cum_reward,stderr_cum_reward
inline void write_aggregate_csv(const std::vector<RunRecord>& all_records,
                                const std::string& path) {
    std::vector<RunRecord> records;
    for (const auto& r : all_records)
        if (r.error.empty()) records.push_back(r);
    if (records.empty())
        throw invalid_input("no complete records to aggregate");
    const std::size_t T = records.front().rows.size();
    for (const auto& r : records)
        if (r.rows.size() != T)
            throw invalid_input("aggregate: records have mixed horizons");
    std::ofstream out(path);
    if (!out) throw invalid_input("cannot write " + path);
    out << "# drbo-csv v1 aggregate environment=" << records.front().environment
        << " policy=" << records.front().policy
        << " seeds=" << records.size() << "\n";
    out << "t,mean_cum_regret,stderr_cum_regret,mean_cum_reward,stderr_cum_reward\n";
    const double n = static_cast<double>(records.size());
    std::vector<double> cumrew(records.size(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double mr = 0.0, mw = 0.0;
        for (std::size_t k = 0; k < records.size(); ++k) {
            cumrew[k] += records[k].rows[t].y;
            mr += records[k].rows[t].R_t;
            mw += cumrew[k];
        }
        mr /= n;
        mw /= n;
        double vr = 0.0, vw = 0.0;
        for (std::size_t k = 0; k < records.size(); ++k) {
            const double dr = records[k].rows[t].R_t - mr;
            const double dw = cumrew[k] - mw;
            vr += dr * dr;
            vw += dw * dw;
        }
        const double sr = records.size() > 1
                              ? std::sqrt(vr / (n - 1.0)) / std::sqrt(n)
                              : 0.0;
        const double sw = records.size() > 1
                              ? std::sqrt(vw / (n - 1.0)) / std::sqrt(n)
                              : 0.0;
        out << records.front().rows[t].t << ',' << detail::fmt(mr) << ','
            << detail::fmt(sr) << ',' << detail::fmt(mw) << ','
            << detail::fmt(sw) << "\n";
    }
}

/// Tidy plot-data CSV across policies. Schema (v1):
/// step,policy,mean_regret,stderr,mean_revenue
inline void emit_plot_data(const std::vector<RunRecord>& records,
                           const std::string& path) {
    std::map<std::string, std::vector<const RunRecord*>> by_policy;
    for (const auto& r : records)
        if (r.error.empty()) by_policy[r.policy].push_back(&r);
    if (by_policy.empty()) throw invalid_input("emit_plot_data: no records");
    std::ofstream out(path);
    if (!out) throw invalid_input("cannot write " + path);
    out << "# drbo-csv v1 plot\n";
    out << "step,policy,mean_regret,stderr,mean_revenue\n";
    for (const auto& [policy, recs] : by_policy) {
        const std::size_t T = recs.front()->rows.size();
        const double n = static_cast<double>(recs.size());
        std::vector<double> cumrev(recs.size(), 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            double mr = 0.0, mrev = 0.0;
            for (std::size_t k = 0; k < recs.size(); ++k) {
                mr += recs[k]->rows[t].R_t;
                cumrev[k] += recs[k]->rows[t].y;
                mrev += cumrev[k];
            }
            mr /= n;
            mrev /= n;
            double vr = 0.0;
            for (const auto* r : recs) {
                const double d = r->rows[t].R_t - mr;
                vr += d * d;
            }
            const double se =
                recs.size() > 1 ? std::sqrt(vr / (n - 1.0)) / std::sqrt(n) : 0.0;
            out << recs.front()->rows[t].t << ',' << policy << ','
                << detail::fmt(mr) << ',' << detail::fmt(se) << ','
                << detail::fmt(mrev) << "\n";
        }
    }
}

/// Run one policy over all configured seeds; one record per seed plus
/// per-seed and aggregate CSVs in out_dir. Deterministic per (config, seed).
inline std::vector<RunRecord> run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const Environment env = detail::build_environment(cfg);
    std::vector<RunRecord> records(cfg.seeds.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t batch = std::min<std::size_t>(hw, cfg.seeds.size());
    std::size_t next = 0;
    while (next < cfg.seeds.size()) {
        const std::size_t end = std::min(next + batch, cfg.seeds.size());
        std::vector<std::future<RunRecord>> futs;
        for (std::size_t k = next; k < end; ++k)
            futs.push_back(std::async(std::launch::async, [&cfg, &env, k]() {
                try {
                    return detail::run_one_seed(cfg, env, cfg.seeds[k]);
                } catch (const solver_error& e) {
                    RunRecord bad;
                    bad.environment = env.name;
                    bad.policy = cfg.policy;
                    bad.seed = cfg.seeds[k];
                    bad.error = e.what();
                    return bad;
                }
            }));
        for (std::size_t k = next; k < end; ++k)
            records[k] = futs[k - next].get();
        next = end;
    }
    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& r : records)
        write_record_csv(r, cfg.out_dir + "/" + env.name + "_" + cfg.policy +
                                "_seed" + std::to_string(r.seed) + ".csv");
    write_aggregate_csv(records, cfg.out_dir + "/" + env.name + "_" +
                                     cfg.policy + "_aggregate.csv");
    return records;
}

/// Walk-forward evaluation on the wind series: train the shared posterior
/// with `sim_budget` simulator steps at the first deployable hour, then for
/// each later hour run `sim_steps_per_hour` top-up steps, deploy the policy's
/// commitment, and score realized revenue f(x, actual) plus robust regret
/// under that hour's sliding-window reference.
inline RunRecord wind_walkforward(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.environment != "wind-synthetic" && cfg.environment != "wind-csv")
        throw invalid_input("wind_walkforward needs a wind environment");
    const Environment env = detail::build_environment(cfg);
    const int total_hours = std::min(cfg.horizon, env.series_length);
    const std::uint64_t seed = cfg.seeds.front();

    RunRecord rec;
    rec.environment = env.name;
    rec.policy = cfg.policy;
    rec.seed = seed;

    const bool is_drbo = cfg.policy.rfind("drbo", 0) == 0;
    const bool is_zero = cfg.policy == "zero-commit";

    PolicyState state = make_policy_state(
        detail::regression_kernel_for(cfg), env.noise_sigma,
        cfg.rkhs_bound, cfg.delta, detail::posterior_options_for(cfg),
        env.action_grid, env.context_grid, env.mmd_gram, cfg.solver_tol);
    RobustEvaluator evaluator(env, env.mmd_gram);
    AdversaryWorkspace deploy_ws;

    const int h0 = cfg.wind_window + 1;
    if (total_hours < h0 + 1)
        throw invalid_input("wind series shorter than the reference window");

    std::uint64_t sim_counter = 0;
    auto simulate_step = [&](const WeightVector& ref, double eps) {
        int xi, ci;
        if (is_drbo) {
            std::tie(xi, ci) = drbo_simulator_step(state, ref, eps);
        } else {
            xi = cfg.policy == "ucb" ? ucb_baseline_step(state, ref)
                                     : stableopt_step(state, ref, eps);
            const Eigen::Index nc =
                static_cast<Eigen::Index>(state.context_grid.size());
            const Eigen::Index base = static_cast<Eigen::Index>(xi) * nc;
            ci = 0;
            double sbest = -1.0;
            for (Eigen::Index j = 0; j < nc; ++j)
                if (state.model.grid_std(base + j) > sbest) {
                    sbest = state.model.grid_std(base + j);
                    ci = static_cast<int>(j);
                }
        }
        const double y = observe_reward(
            env, xi, ci, detail::mix_seed(seed, 0xabcd0000ULL + sim_counter++));
        observe(state, xi, ci, y, ref, eps);
    };

    auto deploy = [&](const WeightVector& ref, double eps) -> std::pair<int, double> {
        if (is_zero) return {0, 0.0};
        int best = -1;
        double best_val = -std::numeric_limits<double>::infinity();
        const int nx = static_cast<int>(env.action_grid.size());
        if (is_drbo) {
            AdversaryProblem prob;
            prob.reference = ref;
            prob.epsilon = eps;
            prob.context_gram = env.mmd_gram;
            for (int i = 0; i < nx; ++i) {
                ConfidenceBand band = confidence_band_row(state.model, i);
                prob.values = std::move(band.lcb);
                const double v = solve(prob, cfg.solver_tol, &deploy_ws).value;
                if (v > best_val) {
                    best_val = v;
                    best = i;
                }
            }
        } else if (cfg.policy == "ucb") {
            for (int i = 0; i < nx; ++i) {
                const ConfidenceBand band = confidence_band_row(state.model, i);
                const double v = band.ucb.dot(ref.weights);
                if (v > best_val) {
                    best_val = v;
                    best = i;
                }
            }
        } else {
            best = stableopt_step(state, ref, eps);
            best_val = 0.0;
        }
        return {best, best_val};
    };

    double cum = 0.0;
    {
        auto [ref0, eps0] = env.reference_schedule(h0);
        if (!is_zero)
            for (int k = 0; k < cfg.sim_budget; ++k) simulate_step(ref0, eps0);
    }
    for (int h = h0; h <= total_hours; ++h) {
        const auto t0 = std::chrono::steady_clock::now();
        auto [ref, eps] = env.reference_schedule(h);
        if (!is_zero && h > h0)
            for (int k = 0; k < cfg.sim_steps_per_hour; ++k)
                simulate_step(ref, eps);
        const auto [x_idx, score] = deploy(ref, eps);
        const int c_idx = sample_context(env, h, seed);  // degenerate: actual value
        const double revenue =
            env.f_table(x_idx, c_idx);
        const double r = evaluator.regret(x_idx, ref, eps);
        cum += r;
        StepRow row;
        row.t = h;
        row.x_idx = x_idx;
        row.c_idx = c_idx;
        row.y = revenue;
        row.epsilon = eps;
        row.r_t = r;
        row.R_t = cum;
        row.optimistic_value = score;
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        rec.rows.push_back(row);
    }
    rec.realized_info_gain = state.model.realized_info_gain();
    std::filesystem::create_directories(cfg.out_dir);
    write_record_csv(rec, cfg.out_dir + "/" + env.name + "_" + cfg.policy +
                              "_walkforward.csv");
    return rec;
}

}  // namespace drbo
