#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drbo/errors.hpp"
#include "drbo/kernel.hpp"
#include "drbo/mmd.hpp"

namespace drbo {

inline std::vector<Eigen::VectorXd> uniform_grid_1d(int n) {
    if (n < 2) throw invalid_input("grid needs at least 2 points");
    std::vector<Eigen::VectorXd> g;
    g.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.push_back(Eigen::VectorXd::Constant(
            1, static_cast<double>(i) / static_cast<double>(n - 1)));
    return g;
}

namespace detail {

// splitmix64: cheap, well-mixed seed derivation so per-step draws are
// independent of each other and of the platform's distribution internals.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Box-Muller on raw uniforms: bit-stable across standard libraries.
inline double normal01(std::mt19937_64& eng) {
    const double u1 = (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

/// Ground truth for one experiment: the true function on a finite grid, the
/// per-step context sampling distribution, the per-step reference
/// distribution handed to the learner with its ball radius, and the
/// observation noise level.
struct Environment {
    std::string name;
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
        true_function;
    std::vector<Eigen::VectorXd> action_grid;
    std::vector<Eigen::VectorXd> context_grid;
    std::function<WeightVector(int)> context_sampler;  // t -> P*_t
    std::function<std::pair<WeightVector, double>(int)>
        reference_schedule;                            // t -> (P_t, eps_t)
    double noise_sigma = 0.05;
    GramMatrix mmd_gram;        // M over context_grid (jittered)
    int series_length = 0;      // wind only: usable hours in the backing series
    Eigen::MatrixXd f_table;    // cached true_function on the grids

    void cache_table() {
        const Eigen::Index nx = static_cast<Eigen::Index>(action_grid.size());
        const Eigen::Index nc = static_cast<Eigen::Index>(context_grid.size());
        f_table.resize(nx, nc);
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j < nc; ++j)
                f_table(i, j) =
                    true_function(action_grid[static_cast<std::size_t>(i)],
                                  context_grid[static_cast<std::size_t>(j)]);
    }
};

inline double eval_true(const Environment& env, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& c) {
    return env.true_function(x, c);
}

/// Categorical draw from the step-t sampler via inverse CDF; deterministic in
/// (t, rng_seed).
inline int sample_context(const Environment& env, int t, std::uint64_t rng_seed) {
    const WeightVector w = env.context_sampler(t);
    w.validate(1e-7);
    std::mt19937_64 eng(detail::mix_seed(rng_seed, static_cast<std::uint64_t>(t)));
    const double u = detail::uniform01(eng);
    double acc = 0.0;
    const Eigen::Index n = w.weights.size();
    for (Eigen::Index j = 0; j < n; ++j) {
        acc += w.weights[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(n - 1);  // guard against round-off at the top end
}

/// True value plus N(0, noise_sigma^2) noise; deterministic in rng_seed.
inline double observe_reward(const Environment& env, int x_idx, int c_idx,
                             std::uint64_t rng_seed) {
    const double f =
        env.f_table(static_cast<Eigen::Index>(x_idx), static_cast<Eigen::Index>(c_idx));
    if (env.noise_sigma == 0.0) return f;
    std::mt19937_64 eng(detail::mix_seed(rng_seed, 0x5eedULL));
    return f + env.noise_sigma * detail::normal01(eng);
}

// ---------------------------------------------------------------------------
// Wind-power data
// ---------------------------------------------------------------------------

struct WindSeries {
    std::vector<std::int64_t> timestamps;  // seconds; strictly increasing
    std::vector<double> power;             // normalized to [0, 1]
};

namespace detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline bool parse_timestamp(const std::string& s, std::int64_t& out) {
    int y, mo, d, h = 0, mi = 0, se = 0;
    char sep;
    std::istringstream is(s);
    if (s.find('-') != std::string::npos) {
        if (!(is >> y)) return false;
        if (!(is >> sep) || sep != '-') return false;
        if (!(is >> mo)) return false;
        if (!(is >> sep) || sep != '-') return false;
        if (!(is >> d)) return false;
        // optional time part after 'T' or a space; peek so the space is not
        // swallowed as stream whitespace
        const int nxt = is.peek();
        if (nxt != std::istringstream::traits_type::eof()) {
            if (nxt != 'T' && nxt != 't' && nxt != ' ') return false;
            is.get();
            if (!(is >> h)) return false;
            if (!(is >> sep) || sep != ':') return false;
            if (!(is >> mi)) return false;
            if (is.peek() == ':') {
                is.get();
                if (!(is >> se)) return false;
            }
            std::string rest;
            if (is >> rest) return false;
        }
        if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
            return false;
        out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
        return true;
    }
    long long hours;
    if (!(is >> hours)) return false;
    std::string rest;
    if (is >> rest) return false;
    out = static_cast<std::int64_t>(hours) * 3600;
    return true;
}

}  // namespace detail

/// Parse a `timestamp,power` file (ISO-8601 or integer-hour timestamps,
/// optional header line) and normalize power by the series maximum.
inline WindSeries ingest_wind_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open wind csv: " + path);
    WindSeries s;
    std::string line;
    int lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw invalid_input("wind csv line " + std::to_string(lineno) +
                                ": expected 'timestamp,power'");
        const std::string ts_str = line.substr(0, comma);
        const std::string p_str = line.substr(comma + 1);
        std::int64_t ts;
        double p;
        std::istringstream ps(p_str);
        const bool ts_ok = detail::parse_timestamp(ts_str, ts);
        const bool p_ok = static_cast<bool>(ps >> p);
        if (!ts_ok || !p_ok) {
            if (first_data && lineno == 1) continue;  // header line
            throw invalid_input("wind csv line " + std::to_string(lineno) +
                                ": cannot parse '" + line + "'");
        }
        if (p < 0.0)
            throw invalid_input("wind csv line " + std::to_string(lineno) +
                                ": negative power");
        if (!s.timestamps.empty() && ts <= s.timestamps.back())
            throw invalid_input("wind csv line " + std::to_string(lineno) +
                                ": timestamps must be strictly increasing");
        s.timestamps.push_back(ts);
        s.power.push_back(p);
        first_data = false;
    }
    if (s.power.empty()) throw invalid_input("wind csv is empty: " + path);
    const double pmax = *std::max_element(s.power.begin(), s.power.end());
    if (!(pmax > 0.0))
        throw invalid_input("wind csv: maximum power must be positive");
    for (double& p : s.power) p /= pmax;
    return s;
}

inline int snap_to_grid_1d(const std::vector<Eigen::VectorXd>& grid, double v) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double d = std::abs(grid[j][0] - v);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

/// Empirical reference over the `window` most recent values before step t
/// (1-based), snapped to the context grid; the margin follows the
/// concentration schedule at the actual sample count.
inline std::pair<WeightVector, double> wind_reference(
    const WindSeries& series, int t, int window,
    const std::vector<Eigen::VectorXd>& grid, double delta = 0.1) {
    if (t < 2) throw invalid_input("wind_reference: t must be >= 2");
    if (window < 1) throw invalid_input("wind_reference: window must be >= 1");
    const int avail = std::min(t - 1, static_cast<int>(series.power.size()));
    const int m = std::min(window, avail);
    if (m < 1) throw invalid_input("wind_reference: no history available");
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(m));
    for (int k = avail - m; k < avail; ++k)
        idx.push_back(snap_to_grid_1d(grid, series.power[static_cast<std::size_t>(k)]));
    MarginSchedule sched;
    sched.mode = margin_mode::concentration;
    sched.delta = delta;
    return {empirical_weights(idx, static_cast<Eigen::Index>(grid.size())),
            margin(sched, m)};
}

/// Synthetic hourly wind: AR(1) fluctuation plus a diurnal cycle, clamped to
/// [0, 1]. Deterministic per seed.
inline WindSeries synth_wind_generator(std::uint64_t seed, int length) {
    if (length < 1) throw invalid_input("synth wind length must be >= 1");
    WindSeries s;
    s.timestamps.reserve(static_cast<std::size_t>(length));
    s.power.reserve(static_cast<std::size_t>(length));
    std::mt19937_64 eng(detail::mix_seed(seed, 0x77696e64ULL));
    double z = 0.0;
    for (int t = 0; t < length; ++t) {
        z = 0.92 * z + 0.08 * detail::normal01(eng);
        const double diurnal =
            0.25 * std::sin(2.0 * 3.14159265358979323846 *
                            static_cast<double>(t) / 24.0);
        const double p = std::clamp(0.45 + diurnal + 0.5 * z, 0.0, 1.0);
        s.timestamps.push_back(static_cast<std::int64_t>(t) * 3600);
        s.power.push_back(p);
    }
    return s;
}

/// Diagnostic distribution-shift sensitivity: max over actions of the M^-1
/// norm of the action's true-value row.
inline double complexity_bprime(const Environment& env, const GramMatrix& M) {
    Eigen::MatrixXd m = M.entries;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        m.diagonal().array() += 1e-8;
        llt.compute(m);
        if (llt.info() != Eigen::Success)
            throw numeric_error("complexity_bprime: M is not factorizable");
    }
    double best = 0.0;
    for (Eigen::Index i = 0; i < env.f_table.rows(); ++i) {
        const Eigen::VectorXd fx = env.f_table.row(i).transpose();
        best = std::max(best, std::sqrt(std::max(0.0, fx.dot(llt.solve(fx)))));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Concrete experiment environments
// ---------------------------------------------------------------------------

/// Three features whose stochastic, worst-case and distributionally robust
/// optima land on three different actions under the synthetic
/// reference/sampler pair below.  A tall peak at x = 0.2 dominates the
/// reference average but is narrow in the context, so the adversary defeats
/// it by moving mass a few context cells sideways.  A broad
/// context-insensitive bump at x = 0.5 has the best worst case over all
/// contexts.  A flat-topped shelf around x = 0.8 keeps full height for every
/// context above 0.38 and only fades below that cutoff; near-reference shifts
/// cannot hurt it, which makes it the distributionally robust winner.
inline double benchmark1_function(double x, double c) {
    const double dx3 = std::max(0.0, std::abs(x - 0.8) - 0.07);
    const double dc3 = std::max(0.0, 0.38 - c);
    return 2.6 * std::exp(-(x - 0.2) * (x - 0.2) / 0.004 -
                          (c - 0.5) * (c - 0.5) / 0.008) +
           0.45 * std::exp(-(x - 0.5) * (x - 0.5) / 0.01 -
                           (c - 0.5) * (c - 0.5) / 2.0) +
           1.65 * std::exp(-dx3 * dx3 / 0.002 - dc3 * dc3 / 0.005);
}

/// Single bump: stochastic, worst-case and robust optima coincide.
inline double benchmark2_function(double x, double c) {
    return std::exp(-((x - 0.5) * (x - 0.5) + (c - 0.5) * (c - 0.5)) / 0.1);
}

struct SyntheticParams {
    int grid_size = 30;
    int action_grid_size = 0;  // 0: same as grid_size
    double noise_sigma = 0.05;
    double reference_mean = 0.5;
    double reference_std = 0.05;
    double sampler_mean = 0.45;
    double sampler_std = 0.1;
    KernelSpec mmd_kernel = make_se_kernel(0.2);
};

inline Environment make_synthetic_environment(
    const std::string& name,
    std::function<double(double, double)> f2,
    const SyntheticParams& p = {}) {
    Environment env;
    env.name = name;
    env.true_function = [f2](const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
        if (x.size() != 1 || c.size() != 1)
            throw invalid_input("synthetic benchmarks are 1-D in x and c");
        return f2(x[0], c[0]);
    };
    env.action_grid = uniform_grid_1d(
        p.action_grid_size > 0 ? p.action_grid_size : p.grid_size);
    env.context_grid = uniform_grid_1d(p.grid_size);
    env.noise_sigma = p.noise_sigma;
    KernelSpec mk = p.mmd_kernel;
    mk.variance = std::min(mk.variance, 1.0);  // concentration margins need k <= 1
    env.mmd_gram = context_gram(mk, env.context_grid);
    const WeightVector sampler =
        discretize_gaussian(p.sampler_mean, p.sampler_std, env.context_grid);
    const WeightVector reference =
        discretize_gaussian(p.reference_mean, p.reference_std, env.context_grid);
    const double eps = mmd_distance(reference, sampler, env.mmd_gram);
    env.context_sampler = [sampler](int) { return sampler; };
    env.reference_schedule = [reference, eps](int) {
        return std::make_pair(reference, eps);
    };
    env.cache_table();
    return env;
}

inline Environment make_benchmark1(SyntheticParams p = {}) {
    // Coarse action grid, fine context grid.  The shelf needs exactly three
    // co-optimal actions on its flat top, and the adversary needs fine
    // context cells so that short-range mass transport stays cheap.
    if (p.action_grid_size == 0) p.action_grid_size = 16;
    return make_synthetic_environment("benchmark1", benchmark1_function, p);
}

inline Environment make_benchmark2(const SyntheticParams& p = {}) {
    return make_synthetic_environment("benchmark2", benchmark2_function, p);
}

/// f(x, c) = 0.1 max(c - x, 0) + min(x, c) - 5 max(x - c, 0): sell the
/// committed amount, collect 0.1 per unit of uncommitted generation, pay 5x
/// for shortfall.
inline double wind_reward(double x, double c) {
    return 0.1 * std::max(c - x, 0.0) + std::min(x, c) - 5.0 * std::max(x - c, 0.0);
}

struct WindParams {
    int grid_size = 30;
    double noise_sigma = 0.01;
    int window = 48;
    double delta = 0.1;
    KernelSpec mmd_kernel = make_se_kernel(0.2);
};

/// Wind commitment environment over a recorded (or synthetic) series. The
/// sampler at step t is the snapped actual value (degenerate, known in
/// hindsight); the reference schedule is the sliding-window empirical
/// distribution with its concentration margin.
inline Environment make_wind_environment(WindSeries series,
                                         const WindParams& p = {}) {
    Environment env;
    env.name = "wind";
    env.true_function = [](const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
        if (x.size() != 1 || c.size() != 1)
            throw invalid_input("wind environment is 1-D in x and c");
        return wind_reward(x[0], c[0]);
    };
    env.action_grid = uniform_grid_1d(p.grid_size);
    env.context_grid = uniform_grid_1d(p.grid_size);
    env.noise_sigma = p.noise_sigma;
    KernelSpec mk = p.mmd_kernel;
    mk.variance = std::min(mk.variance, 1.0);
    env.mmd_gram = context_gram(mk, env.context_grid);
    auto shared = std::make_shared<WindSeries>(std::move(series));
    auto grid = env.context_grid;
    env.context_sampler = [shared, grid](int t) {
        const int n = static_cast<int>(shared->power.size());
        if (t < 1 || t > n)
            throw invalid_input("wind sampler: step outside the series");
        return delta_weights(
            static_cast<Eigen::Index>(grid.size()),
            snap_to_grid_1d(grid, shared->power[static_cast<std::size_t>(t - 1)]));
    };
    const int window = p.window;
    const double delta = p.delta;
    env.reference_schedule = [shared, grid, window, delta](int t) {
        return wind_reference(*shared, t, window, grid, delta);
    };
    env.series_length = static_cast<int>(shared->power.size());
    env.cache_table();
    return env;
}

}  // namespace drbo
