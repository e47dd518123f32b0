#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drbo/errors.hpp"
#include "drbo/kernel.hpp"

namespace drbo {

struct Observation {
    Eigen::VectorXd x;
    Eigen::VectorXd c;
    double y = 0.0;

    JointPoint point() const { return {x, c}; }
};

inline Observation make_observation_1d(double x, double c, double y) {
    Observation o;
    o.x = Eigen::VectorXd::Constant(1, x);
    o.c = Eigen::VectorXd::Constant(1, c);
    o.y = y;
    return o;
}

enum class beta_mode { theoretical, fixed };

struct PosteriorOptions {
    beta_mode mode = beta_mode::theoretical;
    double beta_fixed = 2.0;
    // Denominator constant inside the confidence-radius log term: the bound
    // comes in 1/delta, 2/delta and 3/delta flavors depending on how many
    // events are union-bounded together. Exposed rather than chosen.
    int delta_denominator = 1;
    // Optional joint prediction grid; mean/std over it are maintained
    // incrementally so per-step band queries cost O(t * grid size) overall
    // instead of O(t^2 * grid size).
    std::shared_ptr<const std::vector<JointPoint>> prediction_grid;
    // Row length when the grid is laid out action-major (contexts fastest).
    Eigen::Index grid_row_size = 0;
};

struct ConfidenceBand {
    Eigen::VectorXd ucb;
    Eigen::VectorXd lcb;
};

/// Kernel ridge regression posterior with the unit regularizer:
///   mean(z) = k_t(z)' (K_t + I)^-1 y,
///   var(z)  = k(z, z) - k_t(z)' (K_t + I)^-1 k_t(z).
/// The lower-triangular factor L L' = K_t + I is extended by one row per
/// observation; `fit` factorizes densely from scratch and is kept as the
/// oracle path for equivalence tests.
class PosteriorModel {
public:
    PosteriorModel() = default;

    PosteriorModel(KernelSpec kernel, double noise_sigma, double rkhs_bound,
                   double delta, PosteriorOptions opts = {})
        : kernel_(std::move(kernel)),
          noise_sigma_(noise_sigma),
          rkhs_bound_(rkhs_bound),
          delta_(delta),
          opts_(std::move(opts)) {
        kernel_.validate();
        if (!(noise_sigma_ > 0.0)) throw invalid_input("noise_sigma must be > 0");
        if (rkhs_bound_ < 0.0) throw invalid_input("rkhs_bound must be >= 0");
        if (!(delta_ > 0.0) || delta_ > 1.0)
            throw invalid_input("delta must lie in (0, 1]");
        if (opts_.delta_denominator < 1)
            throw invalid_input("delta_denominator must be >= 1");
        if (opts_.prediction_grid) init_grid_cache();
    }

    const std::vector<Observation>& observations() const { return obs_; }
    Eigen::Index count() const { return t_; }
    double realized_info_gain() const { return info_gain_; }
    double noise_sigma() const { return noise_sigma_; }
    double rkhs_bound() const { return rkhs_bound_; }
    double delta() const { return delta_; }
    const KernelSpec& kernel() const { return kernel_; }
    const PosteriorOptions& options() const { return opts_; }

    /// Extend the factorization by one observation in place. O(t^2).
    void absorb(const Observation& obs) {
        if (!std::isfinite(obs.y))
            throw invalid_input("observation value must be finite");
        const JointPoint z = obs.point();
        const Eigen::Index t = t_;
        ensure_capacity(t + 1);
        Eigen::VectorXd l(t);
        for (Eigen::Index i = 0; i < t; ++i)
            l[i] = eval_kernel(kernel_, obs_[static_cast<std::size_t>(i)].point(), z);
        if (t > 0)
            Lbuf_.topLeftCorner(t, t)
                .triangularView<Eigen::Lower>()
                .solveInPlace(l);
        // Diagonal of the extended factor: k(z,z) + 1 - |l|^2 = 1 + var(z) >= 1.
        const double d2 = kernel_.variance + 1.0 - l.squaredNorm();
        if (!(d2 > 0.0))
            throw numeric_error(
                "posterior factorization failed: pivot " + std::to_string(d2) +
                " at t=" + std::to_string(t + 1) +
                " (largest diag " + std::to_string(largest_diag()) + ")");
        const double ldiag = std::sqrt(d2);
        Lbuf_.block(t, 0, 1, t) = l.transpose();
        Lbuf_(t, t) = ldiag;
        ybuf_[t] = obs.y;
        bbuf_[t] = (obs.y - l.dot(bbuf_.head(t))) / ldiag;
        info_gain_ += 2.0 * std::log(ldiag);
        obs_.push_back(obs);
        t_ = t + 1;
        refresh_alpha();
        if (opts_.prediction_grid) extend_grid_cache(z, l, ldiag);
    }

    double mean_at(const JointPoint& z) const {
        if (t_ == 0) return 0.0;
        return cross_column(z).dot(alpha_.head(t_));
    }

    double var_at(const JointPoint& z) const {
        const double prior = eval_kernel(kernel_, z, z);
        if (t_ == 0) return prior;
        Eigen::VectorXd l = cross_column(z);
        Lbuf_.topLeftCorner(t_, t_)
            .triangularView<Eigen::Lower>()
            .solveInPlace(l);
        return std::max(0.0, prior - l.squaredNorm());
    }

    double std_at(const JointPoint& z) const { return std::sqrt(var_at(z)); }

    bool has_grid() const { return static_cast<bool>(opts_.prediction_grid); }
    Eigen::Index grid_size() const {
        return has_grid() ? static_cast<Eigen::Index>(opts_.prediction_grid->size())
                          : 0;
    }
    double grid_mean(Eigen::Index i) const { return gmu_[i]; }
    double grid_var(Eigen::Index i) const { return std::max(0.0, gvar_[i]); }
    double grid_std(Eigen::Index i) const { return std::sqrt(grid_var(i)); }

    /// Dense batch fit: one Cholesky of the full (K_t + I). Deliberately
    /// independent of `absorb` so the two paths can cross-check each other.
    void batch_fit(const std::vector<Observation>& observations) {
        if (t_ != 0) throw invalid_input("batch_fit requires an empty model");
        if (observations.empty()) return;
        std::vector<JointPoint> pts;
        pts.reserve(observations.size());
        for (const auto& o : observations) {
            if (!std::isfinite(o.y))
                throw invalid_input("observation value must be finite");
            pts.push_back(o.point());
        }
        const Eigen::Index t = static_cast<Eigen::Index>(pts.size());
        // jitter = 1 bakes the unit regularizer into the diagonal.
        GramMatrix reg = gram_matrix(kernel_, pts, 1.0);
        Eigen::LLT<Eigen::MatrixXd> llt(reg.entries);
        if (llt.info() != Eigen::Success)
            throw numeric_error(
                "posterior batch factorization failed at t=" + std::to_string(t));
        ensure_capacity(t);
        Lbuf_.topLeftCorner(t, t) = llt.matrixL();
        for (Eigen::Index i = 0; i < t; ++i)
            ybuf_[i] = observations[static_cast<std::size_t>(i)].y;
        bbuf_.head(t) = ybuf_.head(t);
        Lbuf_.topLeftCorner(t, t)
            .triangularView<Eigen::Lower>()
            .solveInPlace(bbuf_.head(t));
        info_gain_ = 0.0;
        for (Eigen::Index i = 0; i < t; ++i)
            info_gain_ += 2.0 * std::log(Lbuf_(i, i));
        obs_ = observations;
        t_ = t;
        refresh_alpha();
        if (opts_.prediction_grid) {
            const auto& grid = *opts_.prediction_grid;
            const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
            Abuf_.resize(std::max<Eigen::Index>(Lbuf_.rows(), t), m);
            for (Eigen::Index i = 0; i < t; ++i)
                for (Eigen::Index j = 0; j < m; ++j)
                    Abuf_(i, j) = eval_kernel(kernel_, pts[static_cast<std::size_t>(i)],
                                              grid[static_cast<std::size_t>(j)]);
            Lbuf_.topLeftCorner(t, t)
                .triangularView<Eigen::Lower>()
                .solveInPlace(Abuf_.topRows(t));
            gmu_ = Abuf_.topRows(t).transpose() * bbuf_.head(t);
            for (Eigen::Index j = 0; j < m; ++j)
                gvar_[j] = eval_kernel(kernel_, grid[static_cast<std::size_t>(j)],
                                       grid[static_cast<std::size_t>(j)]) -
                           Abuf_.col(j).head(t).squaredNorm();
        }
    }

private:
    void ensure_capacity(Eigen::Index need) {
        if (need <= Lbuf_.rows()) return;
        Eigen::Index cap = std::max<Eigen::Index>(16, Lbuf_.rows());
        while (cap < need) cap *= 2;
        Eigen::MatrixXd L2 = Eigen::MatrixXd::Zero(cap, cap);
        L2.topLeftCorner(t_, t_) = Lbuf_.topLeftCorner(t_, t_);
        Lbuf_.swap(L2);
        Eigen::VectorXd tmp = Eigen::VectorXd::Zero(cap);
        tmp.head(t_) = ybuf_.head(t_);
        ybuf_.swap(tmp);
        tmp = Eigen::VectorXd::Zero(cap);
        tmp.head(t_) = bbuf_.head(t_);
        bbuf_.swap(tmp);
        if (opts_.prediction_grid) {
            Eigen::MatrixXd A2 = Eigen::MatrixXd::Zero(cap, gmu_.size());
            A2.topRows(t_) = Abuf_.topRows(t_);
            Abuf_.swap(A2);
        }
    }

    double largest_diag() const {
        double m = 0.0;
        for (Eigen::Index i = 0; i < t_; ++i) m = std::max(m, Lbuf_(i, i));
        return m;
    }

    void refresh_alpha() {
        alpha_ = bbuf_.head(t_);
        Lbuf_.topLeftCorner(t_, t_)
            .triangularView<Eigen::Lower>()
            .transpose()
            .solveInPlace(alpha_);
    }

    Eigen::VectorXd cross_column(const JointPoint& z) const {
        Eigen::VectorXd k(t_);
        for (Eigen::Index i = 0; i < t_; ++i)
            k[i] = eval_kernel(kernel_, obs_[static_cast<std::size_t>(i)].point(), z);
        return k;
    }

    void init_grid_cache() {
        const auto& grid = *opts_.prediction_grid;
        if (grid.empty()) throw invalid_input("prediction grid must be non-empty");
        if (opts_.grid_row_size < 0 ||
            (opts_.grid_row_size > 0 &&
             static_cast<Eigen::Index>(grid.size()) % opts_.grid_row_size != 0))
            throw invalid_input("grid_row_size must divide the grid size");
        const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
        gmu_ = Eigen::VectorXd::Zero(m);
        gvar_.resize(m);
        for (Eigen::Index j = 0; j < m; ++j)
            gvar_[j] = eval_kernel(kernel_, grid[static_cast<std::size_t>(j)],
                                   grid[static_cast<std::size_t>(j)]);
        Abuf_.resize(0, m);
    }

    // New factor row -> new cross-solve row a = (k_x - A' l) / ldiag; the
    // cached grid mean and variance then update in O(m).
    void extend_grid_cache(const JointPoint& z, const Eigen::VectorXd& l,
                           double ldiag) {
        const auto& grid = *opts_.prediction_grid;
        const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
        const Eigen::Index t = t_ - 1;  // rows already cached
        Eigen::RowVectorXd kx(m);
        for (Eigen::Index j = 0; j < m; ++j)
            kx[j] = eval_kernel(kernel_, z, grid[static_cast<std::size_t>(j)]);
        Eigen::RowVectorXd a;
        if (t > 0)
            a = (kx - l.transpose() * Abuf_.topRows(t)) / ldiag;
        else
            a = kx / ldiag;
        Abuf_.row(t) = a;
        gvar_ -= a.transpose().cwiseAbs2();
        gmu_ += bbuf_[t] * a.transpose();
    }

    KernelSpec kernel_;
    double noise_sigma_ = 1.0;
    double rkhs_bound_ = 1.0;
    double delta_ = 0.1;
    PosteriorOptions opts_;

    std::vector<Observation> obs_;
    Eigen::Index t_ = 0;
    Eigen::MatrixXd Lbuf_;   // lower factor of (K_t + I) in the top-left t x t
    Eigen::VectorXd ybuf_;
    Eigen::VectorXd bbuf_;   // L^-1 y
    Eigen::VectorXd alpha_;  // (K_t + I)^-1 y
    double info_gain_ = 0.0;

    Eigen::MatrixXd Abuf_;   // L^-1 K_cross over the registered grid
    Eigen::VectorXd gmu_, gvar_;
};

inline PosteriorModel fit(const std::vector<Observation>& observations,
                          const KernelSpec& kernel, double noise_sigma,
                          double rkhs_bound, double delta,
                          const PosteriorOptions& opts = {}) {
    PosteriorModel model(kernel, noise_sigma, rkhs_bound, delta, opts);
    model.batch_fit(observations);
    return model;
}

inline PosteriorModel update(const PosteriorModel& model, const Observation& obs) {
    PosteriorModel next = model;
    next.absorb(obs);
    return next;
}

inline double beta(const PosteriorModel& model) {
    const auto& opts = model.options();
    if (opts.mode == beta_mode::fixed) return opts.beta_fixed;
    const double log_term =
        2.0 * std::log(static_cast<double>(opts.delta_denominator) / model.delta());
    return model.noise_sigma() *
               std::sqrt(model.realized_info_gain() + log_term) +
           model.rkhs_bound();
}

inline ConfidenceBand confidence_band(
    const PosteriorModel& model, const Eigen::VectorXd& x,
    const std::vector<Eigen::VectorXd>& context_grid) {
    const Eigen::Index n = static_cast<Eigen::Index>(context_grid.size());
    if (n == 0) throw invalid_input("confidence_band: empty context grid");
    const double b = beta(model);
    ConfidenceBand band;
    band.ucb.resize(n);
    band.lcb.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        JointPoint z{x, context_grid[static_cast<std::size_t>(j)]};
        const double mu = model.mean_at(z);
        const double sd = model.std_at(z);
        band.ucb[j] = mu + b * sd;
        band.lcb[j] = mu - b * sd;
    }
    return band;
}

/// Cache-backed band for one action row of the registered grid (layout
/// action-major, `grid_row_size` contexts per action).
inline ConfidenceBand confidence_band_row(const PosteriorModel& model,
                                          Eigen::Index action_index) {
    if (!model.has_grid() || model.options().grid_row_size <= 0)
        throw invalid_input("confidence_band_row needs a registered grid");
    const Eigen::Index nc = model.options().grid_row_size;
    const Eigen::Index base = action_index * nc;
    if (base < 0 || base + nc > model.grid_size())
        throw invalid_input("confidence_band_row: action index out of range");
    const double b = beta(model);
    ConfidenceBand band;
    band.ucb.resize(nc);
    band.lcb.resize(nc);
    for (Eigen::Index j = 0; j < nc; ++j) {
        const double mu = model.grid_mean(base + j);
        const double sd = model.grid_std(base + j);
        band.ucb[j] = mu + b * sd;
        band.lcb[j] = mu - b * sd;
    }
    return band;
}

}  // namespace drbo
