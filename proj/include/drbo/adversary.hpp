#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "drbo/errors.hpp"
#include "drbo/kernel.hpp"
#include "drbo/mmd.hpp"

namespace drbo {

/// Inner adversarial problem for one action: minimize <w', values> over
/// probability vectors w' with ||w' - reference||_M <= epsilon.
struct AdversaryProblem {
    Eigen::VectorXd values;
    WeightVector reference;
    double epsilon = 0.0;
    GramMatrix context_gram;

    void validate() const {
        reference.validate(1e-7);
        if (values.size() != reference.weights.size() ||
            values.size() != context_gram.size())
            throw invalid_input("adversary problem: mismatched lengths");
        if (epsilon < 0.0)
            throw invalid_input("adversary problem: epsilon must be >= 0");
    }
};

struct AdversarySolution {
    WeightVector weights;
    double value = 0.0;
    double dual_gap = 0.0;
    int iterations = 0;
};

/// Scratch state reused across a sweep of solves that share the same Gram
/// matrix (e.g. the per-action loop inside one policy step). Reset or discard
/// it when the matrix changes.
struct AdversaryWorkspace {
    Eigen::VectorXd warm_weights;
    double warm_lambda = -1.0;
    double cached_lmax = -1.0;
    const double* lmax_key = nullptr;
};

namespace detail {

// Euclidean projection onto the probability simplex (sort-based, exact).
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        css += u[static_cast<std::size_t>(i)];
        const double th = (css - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - th > 0.0) theta = th;
    }
    return (v.array() - theta).cwiseMax(0.0);
}

inline double top_eigenvalue(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M,
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline void project_simplex_inplace(Eigen::VectorXd& v,
                                    std::vector<double>& sortbuf) {
    const Eigen::Index n = v.size();
    sortbuf.assign(v.data(), v.data() + n);
    std::sort(sortbuf.begin(), sortbuf.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        css += sortbuf[static_cast<std::size_t>(i)];
        const double th = (css - 1.0) / static_cast<double>(i + 1);
        if (sortbuf[static_cast<std::size_t>(i)] - th > 0.0) theta = th;
    }
    v = (v.array() - theta).cwiseMax(0.0);
}

// Accelerated projected gradient on
//   phi(u) = <v, u> + lam * (u - w)' M (u - w)
// over the simplex. Returns the Frank-Wolfe gap of the final iterate, which
// certifies min_u phi >= phi(x) - gap. All buffers live in `s`; the loop does
// not allocate.
struct ApgScratch {
    Eigen::VectorXd x, z, xn, g, diff;
    std::vector<double> sortbuf;
};

struct ApgResult {
    double fw_gap;
    int iterations;
};

inline ApgResult inner_apg(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                           double lam, const Eigen::MatrixXd& M, double lmax,
                           const Eigen::VectorXd& x0, double gap_tol,
                           int max_iter, ApgScratch& s) {
    const double L = 2.0 * lam * lmax + 1e-12;
    s.x = x0;
    s.z = x0;
    double tk = 1.0, fw_gap = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
        s.diff = s.z - w;
        s.g.noalias() = M * s.diff;
        s.xn = s.z - (v + 2.0 * lam * s.g) / L;
        project_simplex_inplace(s.xn, s.sortbuf);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        s.z = s.xn + ((tk - 1.0) / tn) * (s.xn - s.x);
        s.diff = s.xn - w;
        s.g.noalias() = M * s.diff;
        fw_gap = (v.dot(s.xn) + 2.0 * lam * s.g.dot(s.xn)) -
                 (v + 2.0 * lam * s.g).minCoeff();
        if (fw_gap <= gap_tol) {
            s.x.swap(s.xn);
            return {fw_gap, it + 1};
        }
        s.x.swap(s.xn);
        tk = tn;
    }
    return {fw_gap, it};
}

inline double mmd_of(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                     const Eigen::MatrixXd& M) {
    const Eigen::VectorXd d = u - w;
    return std::sqrt(std::max(0.0, d.dot(M * d)));
}

// Exact minimizer of phi on the face {u_A = 0, sum u = 1} suggested by the
// iterate's support, via the bordered KKT system (scaled by 1/(2 lam) so the
// block stays well conditioned for large multipliers). Components driven
// negative are dropped from the face and the system re-solved, so the result
// is the exact minimizer of some sub-face containing the iterate's support.
inline bool kkt_polish(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                       double lam, const Eigen::MatrixXd& M,
                       const Eigen::VectorXd& Mw, const Eigen::VectorXd& x,
                       Eigen::VectorXd& out) {
    const Eigen::Index n = x.size();
    if (!(lam > 0.0)) return false;
    std::vector<Eigen::Index> F;
    for (Eigen::Index j = 0; j < n; ++j)
        if (x[j] > 1e-10) F.push_back(j);
    for (int round = 0; round < 40; ++round) {
        if (F.empty()) return false;
        const Eigen::Index f = static_cast<Eigen::Index>(F.size());
        Eigen::MatrixXd A(f + 1, f + 1);
        Eigen::VectorXd rhs(f + 1);
        for (Eigen::Index a = 0; a < f; ++a) {
            for (Eigen::Index b = 0; b < f; ++b)
                A(a, b) = M(F[static_cast<std::size_t>(a)],
                            F[static_cast<std::size_t>(b)]);
            A(a, f) = 1.0;
            A(f, a) = 1.0;
            rhs[a] = Mw[F[static_cast<std::size_t>(a)]] -
                     v[F[static_cast<std::size_t>(a)]] / (2.0 * lam);
        }
        A(f, f) = 0.0;
        rhs[f] = 1.0;
        const Eigen::VectorXd sol = A.partialPivLu().solve(rhs);
        if (!sol.allFinite()) return false;
        bool clean = true;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index a = 0; a < f; ++a)
            if (sol[a] < -1e-12) clean = false;
            else keep.push_back(F[static_cast<std::size_t>(a)]);
        if (!clean) {
            if (keep.size() == F.size()) return false;  // paranoia
            F = std::move(keep);
            continue;
        }
        out.setZero(n);
        for (Eigen::Index a = 0; a < f; ++a)
            out[F[static_cast<std::size_t>(a)]] = std::max(sol[a], 0.0);
        const double s = out.sum();
        if (!(s > 0.0)) return false;
        out /= s;
        return true;
    }
    return false;
}

inline Eigen::VectorXd cleanup_simplex(Eigen::VectorXd u) {
    u = u.cwiseMax(0.0);
    const double s = u.sum();
    if (s > 0.0) u /= s;
    return u;
}

}  // namespace detail

/// Solve the inner adversarial problem to within tol * (max v - min v + 1) in
/// objective. Outer bisection on the Lagrange multiplier of the squared-ball
/// constraint; inner accelerated projected gradient; the duality gap of the
/// best feasible iterate is the returned certificate.
inline AdversarySolution solve(const AdversaryProblem& problem,
                               double tol = 1e-6,
                               AdversaryWorkspace* ws = nullptr) {
    problem.validate();
    const Eigen::VectorXd& v = problem.values;
    const Eigen::VectorXd& w = problem.reference.weights;
    const Eigen::MatrixXd& M = problem.context_gram.entries;
    const Eigen::Index n = v.size();
    const double eps = problem.epsilon;
    const double scale = v.maxCoeff() - v.minCoeff() + 1.0;
    const double target = tol * scale;

    if (eps == 0.0 || n == 1)
        return {{w}, v.dot(w), 0.0, 0};

    // Unconstrained-in-lambda vertex: min v over the simplex; if the MMD ball
    // reaches it we are done (it lower-bounds every feasible value).
    Eigen::Index jmin = 0;
    v.minCoeff(&jmin);
    {
        Eigen::VectorXd vert = Eigen::VectorXd::Zero(n);
        vert[jmin] = 1.0;
        if (detail::mmd_of(vert, w, M) <= eps + 1e-12)
            return {{vert}, v[jmin], 0.0, 0};
    }

    double lmax;
    if (ws && ws->cached_lmax > 0.0 && ws->lmax_key == M.data()) {
        lmax = ws->cached_lmax;
    } else {
        lmax = detail::top_eigenvalue(M);
        if (ws) {
            ws->cached_lmax = lmax;
            ws->lmax_key = M.data();
        }
    }

    const double eps2 = eps * eps;
    const double inner_tol = 0.1 * target;
    const int inner_cap = 5000;

    Eigen::VectorXd x0 = w;
    if (ws && ws->warm_weights.size() == n) x0 = ws->warm_weights;

    double best_p = v.dot(w);  // reference is always feasible
    Eigen::VectorXd best_u = w;
    double best_q = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    detail::ApgScratch scratch;
    const Eigen::VectorXd Mw = M * w;
    const double vw = v.dot(w);
    Eigen::VectorXd polished, pdiff, pgrad;

    auto probe = [&](double lam) {
        detail::ApgResult r = detail::inner_apg(v, w, lam, M, lmax, x0,
                                                inner_tol, inner_cap, scratch);
        iterations += r.iterations;
        // The gradient method only has to identify the optimal face; the
        // bordered KKT solve on that face delivers the exact minimizer, which
        // keeps both sides of the certificate tight as the bracket narrows.
        if (detail::kkt_polish(v, w, lam, M, Mw, scratch.x, polished)) {
            pdiff = polished - w;
            pgrad.noalias() = M * pdiff;
            const double phi_pol = v.dot(polished) + lam * pdiff.dot(pgrad);
            const double phi_apg =
                v.dot(scratch.x) + lam * scratch.diff.dot(scratch.g);
            if (phi_pol <= phi_apg) {
                scratch.x = polished;
                scratch.diff = pdiff;
                scratch.g = pgrad;
            }
        }
        x0 = scratch.x;
        // scratch.diff and scratch.g hold x - w and M (x - w).
        const double dist2 = scratch.diff.dot(scratch.g);
        const double pval = v.dot(scratch.x);
        const double phi = pval + lam * dist2;
        const double fw_gap =
            (pval + 2.0 * lam * scratch.g.dot(scratch.x)) -
            (v + 2.0 * lam * scratch.g).minCoeff();
        best_q = std::max(best_q, phi - std::max(fw_gap, 0.0) - lam * eps2);
        const bool feasible = dist2 <= eps2 * (1.0 + 1e-12) + 1e-15;
        if (feasible) {
            if (pval < best_p) {
                best_p = pval;
                best_u = scratch.x;
            }
        } else if (eps > 0.0 && dist2 > 0.0) {
            // Shrinking toward the reference is a convex combination of two
            // simplex points and lands exactly on the ball boundary, so every
            // infeasible iterate still yields a feasible primal candidate.
            const double sfac = eps / std::sqrt(dist2);
            const double pshrunk = vw + sfac * (pval - vw);
            if (pshrunk < best_p) {
                best_p = pshrunk;
                best_u = w + sfac * (scratch.x - w);
            }
        }
        return feasible;
    };

    // Bracket: grow lambda until the subproblem minimizer enters the ball.
    double lo = 0.0;
    double hi = (ws && ws->warm_lambda > 0.0) ? ws->warm_lambda : 1.0;
    bool closed = false;
    for (int k = 0; k < 80 && !closed; ++k) {
        if (probe(hi)) {
            closed = true;
        } else {
            lo = hi;
            hi *= 2.0;
        }
    }
    if (!closed)
        throw solver_error("adversary solve: failed to bracket the multiplier",
                           detail::cleanup_simplex(best_u), best_p,
                           best_p - best_q, iterations);

    double final_lambda = hi;
    for (int k = 0; k < 100 && best_p - best_q > target; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            hi = mid;
            final_lambda = mid;
        } else {
            lo = mid;
        }
    }

    const double gap = std::max(0.0, best_p - best_q);
    if (gap > target)
        throw solver_error(
            "adversary solve: duality gap " + std::to_string(gap) +
                " above tolerance " + std::to_string(target),
            detail::cleanup_simplex(best_u), best_p, gap, iterations);

    if (ws) {
        ws->warm_weights = best_u;
        ws->warm_lambda = final_lambda;
    }
    return {{detail::cleanup_simplex(best_u)}, best_p, gap, iterations};
}

/// Exhaustive verification oracle on the simplex grid of spacing
/// `resolution`, refined by pure enumeration on shrinking neighborhoods of
/// the incumbent (the feasible set is convex and the objective linear, so the
/// optimum of a finer local grid around the coarse optimum converges to the
/// true one). Independent of `solve` by construction.
inline AdversarySolution brute_force_oracle(const AdversaryProblem& problem,
                                            double resolution = 0.01) {
    problem.validate();
    const Eigen::Index n = problem.values.size();
    if (n > 4) throw invalid_input("brute_force_oracle: n must be <= 4");
    if (!(resolution > 0.0 && resolution <= 0.5))
        throw invalid_input("brute_force_oracle: bad resolution");
    const Eigen::VectorXd& v = problem.values;
    const Eigen::VectorXd& w = problem.reference.weights;
    const Eigen::MatrixXd& M = problem.context_gram.entries;
    const double eps = problem.epsilon;

    long counted = 0;
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_u;
    double near_d2 = std::numeric_limits<double>::infinity();
    Eigen::VectorXd near_u;

    Eigen::VectorXd u(n);
    auto consider = [&](long m) {
        ++counted;
        const Eigen::VectorXd d = u / static_cast<double>(m) - w;
        const double d2 = d.dot(M * d);
        if (d2 < near_d2) {
            near_d2 = d2;
            near_u = u / static_cast<double>(m);
        }
        const double slack = eps + 1e-12;
        if (d2 <= slack * slack) {
            const double val = v.dot(u) / static_cast<double>(m);
            if (val < best_val) {
                best_val = val;
                best_u = u / static_cast<double>(m);
            }
        }
    };

    // Full pass at the base resolution.
    const long m0 = std::lround(1.0 / resolution);
    {
        std::vector<long> k(static_cast<std::size_t>(n), 0);
        auto rec = [&](auto&& self, Eigen::Index i, long rem) -> void {
            if (i == n - 1) {
                k[static_cast<std::size_t>(i)] = rem;
                for (Eigen::Index j = 0; j < n; ++j)
                    u[j] = static_cast<double>(k[static_cast<std::size_t>(j)]);
                consider(m0);
                return;
            }
            for (long kk = 0; kk <= rem; ++kk) {
                k[static_cast<std::size_t>(i)] = kk;
                self(self, i + 1, rem - kk);
            }
        };
        rec(rec, 0, m0);
    }

    if (eps == 0.0) {
        // Singleton feasible set off-grid: report the nearest grid point.
        return {{near_u}, v.dot(near_u), 0.0, static_cast<int>(counted)};
    }

    // Local refinement around the incumbent (or around the nearest point when
    // nothing was feasible at this spacing yet). Doubling the denominator with
    // a +-8 window re-examines a four-cell radius of the previous grid each
    // stage, wide enough to track the curved ball boundary.
    long m = m0;
    Eigen::VectorXd center = best_u.size() ? best_u : near_u;
    for (int stage = 0; stage < 6; ++stage) {
        m *= 2;
        std::vector<long> base(static_cast<std::size_t>(n));
        long sum = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            base[static_cast<std::size_t>(j)] =
                std::lround(center[j] * static_cast<double>(m));
            sum += base[static_cast<std::size_t>(j)];
        }
        base[0] += m - sum;  // restore the exact total
        const long r = 8;
        std::vector<long> off(static_cast<std::size_t>(n), 0);
        auto rec = [&](auto&& self, Eigen::Index i, long acc) -> void {
            if (i == n - 1) {
                off[static_cast<std::size_t>(i)] = -acc;
                for (Eigen::Index j = 0; j < n; ++j) {
                    const long kj = base[static_cast<std::size_t>(j)] +
                                    off[static_cast<std::size_t>(j)];
                    if (kj < 0 || kj > m) return;
                    u[j] = static_cast<double>(kj);
                }
                consider(m);
                return;
            }
            for (long d = -r; d <= r; ++d) {
                off[static_cast<std::size_t>(i)] = d;
                self(self, i + 1, acc + d);
            }
        };
        rec(rec, 0, 0);
        center = best_u.size() ? best_u : near_u;
    }

    if (!best_u.size()) {
        // Nothing feasible even at the finest spacing: epsilon is below the
        // grid scale, so the nearest point is the honest answer.
        best_u = near_u;
        best_val = v.dot(near_u);
    }
    return {{best_u}, best_val, 0.0, static_cast<int>(counted)};
}

}  // namespace drbo
