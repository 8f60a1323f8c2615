#pragma once

// Hamiltonian models: a model is a program over jets, so the same definition
// yields values, gradients, and the order-4 derivative tables used by the
// geometry layer.  Built-in families cover kinetic-on-a-metric Hamiltonians
// with optional vector and scalar potentials; arbitrary Hamiltonians come
// from parsed expressions.
//
// Magnetic built-ins take B as the physical field strength: the plane model
// and the trap use the symmetric gauge A = (-B q2 / 2, B q1 / 2, 0), so B is
// also the cyclotron frequency of the resulting orbits.

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/expr.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"

namespace hamgeo {

struct PhasePoint {
    std::vector<double> q, p;

    PhasePoint() = default;
    PhasePoint(std::vector<double> q_, std::vector<double> p_)
        : q(std::move(q_)), p(std::move(p_)) {
        if (q.size() != p.size()) throw InvalidArgument("phase point q/p size mismatch");
    }
    int dim() const { return static_cast<int>(q.size()); }
};

using MetricFn = std::function<Mat<Jet>(std::span<const Jet>)>;       // covariant g_ij(q)
using VectorFieldFn = std::function<std::vector<Jet>(std::span<const Jet>)>; // A_i(q)
using ScalarFieldFn = std::function<Jet(std::span<const Jet>)>;       // phi(q)

class HamiltonianModel {
public:
    using EvalFn = std::function<Jet(std::span<const Jet> q, std::span<const Jet> p)>;

    HamiltonianModel() = default;
    HamiltonianModel(int n, std::string family, EvalFn eval, bool quadratic_in_p,
                     bool time_reversal_symmetric)
        : n_(n), family_(std::move(family)), eval_(std::move(eval)),
          quadratic_in_p_(quadratic_in_p), time_reversal_symmetric_(time_reversal_symmetric) {
        if (n < 1 || 2 * n > kMaxJetVars)
            throw InvalidArgument("model dimension must satisfy 1 <= n <= " +
                                  std::to_string(kMaxJetVars / 2));
    }

    int dim() const { return n_; }
    const std::string& family() const { return family_; }
    bool quadratic_in_p() const { return quadratic_in_p_; }
    bool time_reversal_symmetric() const { return time_reversal_symmetric_; }

    /// Core evaluator: H over arbitrary jets (compositions included).
    Jet operator()(std::span<const Jet> q, std::span<const Jet> p) const {
        return eval_(q, p);
    }

    /// Plain numeric evaluation.
    double operator()(std::span<const double> q, std::span<const double> p) const {
        return value(PhasePoint(std::vector<double>(q.begin(), q.end()),
                                std::vector<double>(p.begin(), p.end())));
    }

    /// H as an order-`order` germ at a phase point (variables 0..n-1 are q,
    /// n..2n-1 are p).
    Jet eval_jet(const PhasePoint& x, int order) const {
        check_point(x);
        std::vector<Jet> q, p;
        q.reserve(n_);
        p.reserve(n_);
        for (int i = 0; i < n_; ++i) q.push_back(Jet::variable(2 * n_, order, i, x.q[i]));
        for (int i = 0; i < n_; ++i) p.push_back(Jet::variable(2 * n_, order, n_ + i, x.p[i]));
        return eval_(q, p);
    }

    double value(const PhasePoint& x) const { return eval_jet(x, 0).value(); }

private:
    void check_point(const PhasePoint& x) const {
        if (x.dim() != n_)
            throw InvalidArgument("phase point dimension " + std::to_string(x.dim()) +
                                  " does not match model dimension " + std::to_string(n_));
    }

    int n_ = 0;
    std::string family_;
    EvalFn eval_;
    bool quadratic_in_p_ = false;
    bool time_reversal_symmetric_ = false;
};

namespace detail {

inline Jet kinetic_on_metric(std::span<const Jet> q, std::span<const Jet> p,
                             const MetricFn& metric, const VectorFieldFn* A,
                             const ScalarFieldFn* phi) {
    const int n = static_cast<int>(q.size());
    Mat<Jet> g = metric(q);
    if (g.rows() != n || g.cols() != n)
        throw InvalidArgument("metric function returned wrong shape");
    Mat<Jet> ginv = inverse(g);
    std::vector<Jet> v(p.begin(), p.end());
    if (A && *A) {
        std::vector<Jet> a = (*A)(q);
        if (static_cast<int>(a.size()) != n)
            throw InvalidArgument("vector potential returned wrong length");
        for (int i = 0; i < n; ++i) v[i] = v[i] - a[i];
    }
    Jet h = Jet::constant(q[0].nvars(), q[0].order(), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h += 0.5 * (ginv(i, j) * (v[i] * v[j]));
    if (phi && *phi) h += (*phi)(q);
    return h;
}

} // namespace detail

/// H = sum p_i^2 / 2.
inline HamiltonianModel make_free(int n) {
    return HamiltonianModel(
        n, "free",
        [](std::span<const Jet> q, std::span<const Jet> p) {
            Jet h = Jet::constant(q[0].nvars(), q[0].order(), 0.0);
            for (const Jet& pi : p) h += 0.5 * (pi * pi);
            return h;
        },
        true, true);
}

/// H = sum (p_i^2 + w_i^2 q_i^2) / 2.
inline HamiltonianModel make_sho(int n, std::vector<double> omega) {
    if (static_cast<int>(omega.size()) != n)
        throw InvalidArgument("sho needs one frequency per degree of freedom");
    return HamiltonianModel(
        n, "sho",
        [omega](std::span<const Jet> q, std::span<const Jet> p) {
            Jet h = Jet::constant(q[0].nvars(), q[0].order(), 0.0);
            for (size_t i = 0; i < q.size(); ++i)
                h += 0.5 * (p[i] * p[i]) + 0.5 * omega[i] * omega[i] * (q[i] * q[i]);
            return h;
        },
        true, true);
}

/// H = (p^2 - w^2 q^2) / 2, one degree of freedom.
inline HamiltonianModel make_inverted_sho(double omega) {
    return HamiltonianModel(
        1, "inverted_sho",
        [omega](std::span<const Jet> q, std::span<const Jet> p) {
            return 0.5 * (p[0] * p[0]) - 0.5 * omega * omega * (q[0] * q[0]);
        },
        true, true);
}

/// H = g^{ij}(q) p_i p_j / 2 for a user-supplied covariant metric.
inline HamiltonianModel make_riemannian(int n, MetricFn metric) {
    return HamiltonianModel(
        n, "riemannian",
        [metric = std::move(metric)](std::span<const Jet> q, std::span<const Jet> p) {
            return detail::kinetic_on_metric(q, p, metric, nullptr, nullptr);
        },
        true, true);
}

/// H = g^{ij}(q) (p_i - A_i)(p_j - A_j) / 2.
inline HamiltonianModel make_magnetic_riemannian(int n, MetricFn metric, VectorFieldFn A) {
    return HamiltonianModel(
        n, "magnetic_riemannian",
        [metric = std::move(metric), A = std::move(A)](std::span<const Jet> q,
                                                       std::span<const Jet> p) {
            return detail::kinetic_on_metric(q, p, metric, &A, nullptr);
        },
        true, false);
}

/// H = g^{ij}(q) (p_i - A_i)(p_j - A_j) / 2 + phi(q).
inline HamiltonianModel make_emd(int n, MetricFn metric, VectorFieldFn A, ScalarFieldFn phi,
                                 bool has_vector_potential = true) {
    return HamiltonianModel(
        n, "emd",
        [metric = std::move(metric), A = std::move(A), phi = std::move(phi),
         has_vector_potential](std::span<const Jet> q, std::span<const Jet> p) {
            return detail::kinetic_on_metric(q, p, metric, has_vector_potential ? &A : nullptr,
                                             &phi);
        },
        true, !has_vector_potential);
}

/// Charged particle in a uniform field B along z plus a quadratic trap
/// potential phi = (k1 q1^2 + k2 q2^2 + k3 q3^2)/2, symmetric gauge.
inline HamiltonianModel make_trap(double k1, double k2, double k3, double B) {
    return HamiltonianModel(
        3, "trap",
        [k1, k2, k3, B](std::span<const Jet> q, std::span<const Jet> p) {
            Jet vx = p[0] + 0.5 * B * q[1];
            Jet vy = p[1] - 0.5 * B * q[0];
            Jet h = 0.5 * (vx * vx) + 0.5 * (vy * vy) + 0.5 * (p[2] * p[2]);
            h += 0.5 * (k1 * (q[0] * q[0]) + k2 * (q[1] * q[1]) + k3 * (q[2] * q[2]));
            return h;
        },
        true, B == 0.0);
}

/// Planar charged particle in a uniform field of strength B, symmetric gauge.
inline HamiltonianModel make_constant_b(double B) {
    return HamiltonianModel(
        2, "constant_b",
        [B](std::span<const Jet> q, std::span<const Jet> p) {
            Jet vx = p[0] + 0.5 * B * q[1];
            Jet vy = p[1] - 0.5 * B * q[0];
            return 0.5 * (vx * vx) + 0.5 * (vy * vy);
        },
        true, B == 0.0);
}

/// Hamiltonian from parsed source text.  Structure flags are declarations by
/// the caller; they are not inferred.
inline HamiltonianModel make_expression_model(std::string_view source, int n,
                                              std::map<std::string, double> params,
                                              bool quadratic_in_p = false,
                                              bool time_reversal_symmetric = false) {
    std::vector<std::string> names;
    names.reserve(params.size());
    for (const auto& [k, v] : params) names.push_back(k);
    ExprPtr ast = parse_expression(source, n, names);
    return HamiltonianModel(
        n, "expression",
        [ast, params = std::move(params)](std::span<const Jet> q, std::span<const Jet> p) {
            std::vector<Jet> vars(q.begin(), q.end());
            vars.insert(vars.end(), p.begin(), p.end());
            return eval_expression(ast, vars, params);
        },
        quadratic_in_p, time_reversal_symmetric);
}

namespace detail {
inline void reject_momentum_vars(const ExprPtr& e, int n) {
    if (e->kind == Expr::Kind::Var && e->var >= n)
        throw ParseError("field functions may not reference momenta ('" + e->name + "')", 1, 1);
    if (e->a) reject_momentum_vars(e->a, n);
    if (e->b) reject_momentum_vars(e->b, n);
}
} // namespace detail

/// Field helpers for metric/potential entries given as expression source.
inline ScalarFieldFn scalar_field_from_expression(std::string_view source, int n,
                                                  std::map<std::string, double> params = {}) {
    std::vector<std::string> names;
    for (const auto& [k, v] : params) names.push_back(k);
    ExprPtr ast = parse_expression(source, n, names);
    detail::reject_momentum_vars(ast, n);
    return [ast, params = std::move(params)](std::span<const Jet> q) {
        return eval_expression(ast, q, params);
    };
}

inline MetricFn metric_from_expressions(const std::vector<std::vector<std::string>>& entries,
                                        int n, std::map<std::string, double> params = {}) {
    if (static_cast<int>(entries.size()) != n)
        throw InvalidArgument("metric expression grid must be n rows");
    std::vector<std::vector<ExprPtr>> asts(n);
    std::vector<std::string> names;
    for (const auto& [k, v] : params) names.push_back(k);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(entries[i].size()) != n)
            throw InvalidArgument("metric expression grid must be n columns");
        for (int j = 0; j < n; ++j) {
            asts[i].push_back(parse_expression(entries[i][j], n, names));
            detail::reject_momentum_vars(asts[i][j], n);
        }
    }
    return [asts, n, params = std::move(params)](std::span<const Jet> q) {
        Mat<Jet> g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = eval_expression(asts[i][j], q, params);
        return g;
    };
}

inline VectorFieldFn vector_field_from_expressions(const std::vector<std::string>& entries, int n,
                                                   std::map<std::string, double> params = {}) {
    if (static_cast<int>(entries.size()) != n)
        throw InvalidArgument("vector field needs n component expressions");
    std::vector<ExprPtr> asts;
    std::vector<std::string> names;
    for (const auto& [k, v] : params) names.push_back(k);
    for (int i = 0; i < n; ++i) {
        asts.push_back(parse_expression(entries[i], n, names));
        detail::reject_momentum_vars(asts[i], n);
    }
    return [asts, params = std::move(params)](std::span<const Jet> q) {
        std::vector<Jet> a;
        a.reserve(asts.size());
        for (const auto& ast : asts) a.push_back(eval_expression(ast, q, params));
        return a;
    };
}

/// Flat metric helper.
inline MetricFn flat_metric(int n) {
    return [n](std::span<const Jet> q) {
        Mat<Jet> g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                g(i, j) = Jet::constant(q[0].nvars(), q[0].order(), i == j ? 1.0 : 0.0);
        return g;
    };
}

} // namespace hamgeo
