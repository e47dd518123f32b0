#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drbo/errors.hpp"

namespace drbo {

enum class kernel_family { squared_exponential, matern52 };

/// Stationary kernel over points in a unit box. `lengthscales` is either one
/// entry (shared across dimensions) or one entry per dimension.
struct KernelSpec {
    kernel_family family = kernel_family::squared_exponential;
    Eigen::VectorXd lengthscales = Eigen::VectorXd::Constant(1, 0.2);
    double variance = 1.0;

    void validate() const {
        if (lengthscales.size() == 0 || (lengthscales.array() <= 0.0).any())
            throw invalid_input("kernel lengthscales must be positive");
        if (!(variance > 0.0))
            throw invalid_input("kernel variance must be positive");
    }
};

inline KernelSpec make_se_kernel(double lengthscale, double variance = 1.0) {
    KernelSpec s;
    s.family = kernel_family::squared_exponential;
    s.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
    s.variance = variance;
    s.validate();
    return s;
}

inline KernelSpec make_matern52_kernel(double lengthscale, double variance = 1.0) {
    KernelSpec s;
    s.family = kernel_family::matern52;
    s.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
    s.variance = variance;
    s.validate();
    return s;
}

/// A point in the joint action-context space. Either part may be empty when a
/// kernel is evaluated over only one of the two factors (e.g. the MMD kernel
/// sees contexts alone).
struct JointPoint {
    Eigen::VectorXd x;
    Eigen::VectorXd c;

    Eigen::VectorXd joined() const {
        Eigen::VectorXd z(x.size() + c.size());
        if (x.size() > 0) z.head(x.size()) = x;
        if (c.size() > 0) z.tail(c.size()) = c;
        return z;
    }
};

inline JointPoint make_point_1d(double x, double c) {
    JointPoint p;
    p.x = Eigen::VectorXd::Constant(1, x);
    p.c = Eigen::VectorXd::Constant(1, c);
    return p;
}

inline JointPoint make_context_point_1d(double c) {
    JointPoint p;
    p.c = Eigen::VectorXd::Constant(1, c);
    return p;
}

struct GramMatrix {
    Eigen::MatrixXd entries;
    double jitter = 0.0;  // amount actually added to the diagonal

    Eigen::Index size() const { return entries.rows(); }
};

namespace detail {

// Squared distance after per-dimension lengthscale rescaling.
inline double scaled_sqdist(const KernelSpec& spec, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw invalid_input("kernel arguments have mismatched dimensions");
    if (spec.lengthscales.size() != 1 && spec.lengthscales.size() != a.size())
        throw invalid_input("lengthscale count must be 1 or match the dimension");
    double r2 = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double ell = spec.lengthscales.size() == 1 ? spec.lengthscales[0]
                                                         : spec.lengthscales[i];
        const double d = (a[i] - b[i]) / ell;
        r2 += d * d;
    }
    return r2;
}

inline double kernel_of_sqdist(const KernelSpec& spec, double r2) {
    switch (spec.family) {
        case kernel_family::squared_exponential:
            return spec.variance * std::exp(-0.5 * r2);
        case kernel_family::matern52: {
            const double r = std::sqrt(r2);
            const double s = std::sqrt(5.0) * r;
            return spec.variance * (1.0 + s + 5.0 * r2 / 3.0) * std::exp(-s);
        }
    }
    throw invalid_input("unknown kernel family");
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& z1,
                          const Eigen::VectorXd& z2) {
    spec.validate();
    return detail::kernel_of_sqdist(spec, detail::scaled_sqdist(spec, z1, z2));
}

inline double eval_kernel(const KernelSpec& spec, const JointPoint& z1,
                          const JointPoint& z2) {
    spec.validate();
    if (z1.x.size() != z2.x.size() || z1.c.size() != z2.c.size())
        throw invalid_input("kernel arguments have mismatched dimensions");
    return detail::kernel_of_sqdist(
        spec, detail::scaled_sqdist(spec, z1.joined(), z2.joined()));
}

/// Gram matrix of `points` with `jitter` added to the diagonal. The jitter
/// keeps downstream factorizations of nearly singular matrices PSD; 1e-8 is
/// ample at desk scale.
inline GramMatrix gram_matrix(const KernelSpec& spec,
                              const std::vector<JointPoint>& points,
                              double jitter = 1e-8) {
    spec.validate();
    if (points.empty()) throw invalid_input("gram_matrix needs at least one point");
    if (jitter < 0.0) throw invalid_input("jitter must be non-negative");
    const Eigen::Index n = static_cast<Eigen::Index>(points.size());
    GramMatrix g;
    g.jitter = jitter;
    g.entries.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g.entries(i, i) = spec.variance + jitter;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = eval_kernel(spec, points[i], points[j]);
            g.entries(i, j) = v;
            g.entries(j, i) = v;
        }
    }
    return g;
}

/// Gram matrix over context coordinates only (the MMD kernel's matrix M).
inline GramMatrix context_gram(const KernelSpec& spec_M,
                               const std::vector<Eigen::VectorXd>& contexts,
                               double jitter = 1e-8) {
    std::vector<JointPoint> pts;
    pts.reserve(contexts.size());
    for (const auto& c : contexts) {
        JointPoint p;
        p.c = c;
        pts.push_back(std::move(p));
    }
    return gram_matrix(spec_M, pts, jitter);
}

}  // namespace drbo
