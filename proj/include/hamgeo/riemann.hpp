#pragma once

// Classical differential-geometry oracle: Christoffel symbols, the Riemann
// tensor, Ricci tensor, and scalar curvature of a covariant metric, computed
// directly from the metric's jet expansion.  This route never touches the
// Hamiltonian machinery, so it can serve as an independent cross-check for
// the phase-space curvature pipeline.
//
// Conventions:
//   Gamma^i_jk = 1/2 g^{im} (d_k g_jm + d_j g_km - d_m g_jk)
//   R^l_ijk    = d_j Gamma^l_ik - d_k Gamma^l_ij
//                + Gamma^l_jm Gamma^m_ik - Gamma^l_km Gamma^m_ij
//   Ric_ij     = R^m_imj,   R = g^{ij} Ric_ij
// With these signs the unit round 2-sphere has R = +2.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"
#include "hamgeo/model.hpp"

namespace hamgeo {

/// Covariant metric g_ij(q) with its dimension.
struct MetricField {
    int n = 0;
    MetricFn g;
};

/// Rank-3 array of doubles indexed (i, j, k), each 0..n-1.
struct Tensor3 {
    int n = 0;
    std::vector<double> v;

    explicit Tensor3(int n_ = 0) : n(n_), v(static_cast<std::size_t>(n_) * n_ * n_, 0.0) {}
    double& operator()(int i, int j, int k) { return v[(static_cast<std::size_t>(i) * n + j) * n + k]; }
    double operator()(int i, int j, int k) const {
        return v[(static_cast<std::size_t>(i) * n + j) * n + k];
    }
};

/// Rank-4 array of doubles indexed (l, i, j, k).
struct Tensor4 {
    int n = 0;
    std::vector<double> v;

    explicit Tensor4(int n_ = 0)
        : n(n_), v(static_cast<std::size_t>(n_) * n_ * n_ * n_, 0.0) {}
    double& operator()(int l, int i, int j, int k) {
        return v[((static_cast<std::size_t>(l) * n + i) * n + j) * n + k];
    }
    double operator()(int l, int i, int j, int k) const {
        return v[((static_cast<std::size_t>(l) * n + i) * n + j) * n + k];
    }
};

namespace detail {

/// Evaluate the metric at q with each coordinate promoted to a jet variable
/// of the given order; validates shape, symmetry, and positive-definiteness.
inline Mat<Jet> metric_jets(const MetricField& metric, std::span<const double> q, int order) {
    const int n = metric.n;
    if (n < 1 || n > kMaxJetVars) throw InvalidArgument("metric dimension out of range");
    if (static_cast<int>(q.size()) != n)
        throw InvalidArgument("point dimension does not match metric dimension");
    if (!metric.g) throw InvalidArgument("metric field has no evaluator");
    std::vector<Jet> qj;
    qj.reserve(n);
    for (int k = 0; k < n; ++k) qj.push_back(Jet::variable(n, order, k, q[k]));
    Mat<Jet> g = metric.g(qj);
    if (g.rows() != n || g.cols() != n)
        throw InvalidArgument("metric function returned wrong shape");
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(g(i, j).value()));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(g(i, j).value() - g(j, i).value()) > 1e-13 * (scale + 1.0))
                throw InvalidArgument("metric is not symmetric at the evaluation point");
    Mat<double> gval(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gval(i, j) = g(i, j).value();
    try {
        cholesky(gval);
    } catch (const NotConvex&) {
        throw DomainError("metric is not positive-definite at the evaluation point");
    }
    return g;
}

/// Gamma^i_jk as jets of order `order` (uses metric jets of order `order+1`).
inline std::vector<Jet> christoffel_jets(const MetricField& metric, std::span<const double> q,
                                         int order) {
    const int n = metric.n;
    Mat<Jet> g = metric_jets(metric, q, order + 1);
    Mat<Jet> ginv = inverse(g);
    // dg[m] holds d_m g as an order-`order` jet matrix
    std::vector<Mat<Jet>> dg(n, Mat<Jet>(n, n));
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) dg[m](i, j) = g(i, j).deriv(m);
    std::vector<Jet> gamma(static_cast<std::size_t>(n) * n * n);
    auto at = [n](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = j; k < n; ++k) {
                Jet sum = Jet::constant(n, order, 0.0);
                for (int m = 0; m < n; ++m)
                    sum += ginv(i, m) * (dg[k](j, m) + dg[j](k, m) - dg[m](j, k));
                sum = 0.5 * sum;
                gamma[at(i, j, k)] = sum;
                gamma[at(i, k, j)] = sum;
            }
        }
    }
    return gamma;
}

} // namespace detail

/// Christoffel symbols Gamma^i_jk at q.
inline Tensor3 christoffel(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    std::vector<Jet> gj = detail::christoffel_jets(metric, q, 0);
    Tensor3 out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out(i, j, k) = gj[(static_cast<std::size_t>(i) * n + j) * n + k].value();
    return out;
}

/// Riemann tensor R^l_ijk at q (first index contravariant).
inline Tensor4 riemann(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    std::vector<Jet> gj = detail::christoffel_jets(metric, q, 1);
    auto G = [&](int i, int j, int k) -> const Jet& {
        return gj[(static_cast<std::size_t>(i) * n + j) * n + k];
    };
    Tensor4 out(n);
    for (int l = 0; l < n; ++l) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k) {
                    double r = G(l, i, k).deriv(j).value() - G(l, i, j).deriv(k).value();
                    for (int m = 0; m < n; ++m)
                        r += G(l, j, m).value() * G(m, i, k).value() -
                             G(l, k, m).value() * G(m, i, j).value();
                    out(l, i, j, k) = r;
                }
            }
        }
    }
    return out;
}

/// Fully covariant Riemann tensor R_lijk = g_lm R^m_ijk.
inline Tensor4 riemann_lower(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    Tensor4 up = riemann(metric, q);
    Mat<Jet> gj = detail::metric_jets(metric, q, 0);
    Tensor4 out(n);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double r = 0.0;
                    for (int m = 0; m < n; ++m) r += gj(l, m).value() * up(m, i, j, k);
                    out(l, i, j, k) = r;
                }
    return out;
}

/// Ricci tensor R_ij = R^m_imj at q.
inline Mat<double> ricci(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    Tensor4 up = riemann(metric, q);
    Mat<double> out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double r = 0.0;
            for (int m = 0; m < n; ++m) r += up(m, i, m, j);
            out(i, j) = r;
        }
    return out;
}

/// Scalar curvature R = g^{ij} R_ij at q.
inline double scalar_curvature(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    Mat<double> ric = ricci(metric, q);
    Mat<Jet> gj = detail::metric_jets(metric, q, 0);
    Mat<double> gval(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gval(i, j) = gj(i, j).value();
    Mat<double> ginv = inverse(gval);
    double r = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r += ginv(i, j) * ric(i, j);
    return r;
}

/// Everything the cross-check formulas need at one point, in one evaluation.
struct CurvatureData {
    int n = 0;
    Mat<double> g, ginv;
    Tensor3 gamma;    // Gamma^i_jk
    Tensor4 riemann;  // R^l_ijk
    Mat<double> ricci;
    double scalar = 0.0;
};

inline CurvatureData curvature_data(const MetricField& metric, std::span<const double> q) {
    const int n = metric.n;
    CurvatureData out;
    out.n = n;
    std::vector<Jet> gj = detail::christoffel_jets(metric, q, 1);
    auto G = [&](int i, int j, int k) -> const Jet& {
        return gj[(static_cast<std::size_t>(i) * n + j) * n + k];
    };
    out.gamma = Tensor3(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) out.gamma(i, j, k) = G(i, j, k).value();
    out.riemann = Tensor4(n);
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double r = G(l, i, k).deriv(j).value() - G(l, i, j).deriv(k).value();
                    for (int m = 0; m < n; ++m)
                        r += out.gamma(l, j, m) * out.gamma(m, i, k) -
                             out.gamma(l, k, m) * out.gamma(m, i, j);
                    out.riemann(l, i, j, k) = r;
                }
    Mat<Jet> gjs = detail::metric_jets(metric, q, 0);
    out.g = Mat<double>(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.g(i, j) = gjs(i, j).value();
    out.ginv = inverse(out.g);
    out.ricci = Mat<double>(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double r = 0.0;
            for (int m = 0; m < n; ++m) r += out.riemann(m, i, m, j);
            out.ricci(i, j) = r;
        }
    out.scalar = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.scalar += out.ginv(i, j) * out.ricci(i, j);
    return out;
}

} // namespace hamgeo
