#pragma once

// Phase-space geometry of a convex Hamiltonian: derivative tables, the
// inverse momentum Hessian G, the connection-like matrix gamma, and the
// symmetric curvature matrix R_ij with its contraction ricci = H^{ij} R_ij.
//
// Index conventions (all 0-based): upper indices differentiate with respect
// to momenta, lower indices with respect to coordinates.  The curvature is
// assembled from the pre-symmetrized matrix
//
//   A_ij = G_kl gamma^k_i gamma^l_j - {H, G_ik H^k_j}
//          - 1/2 {H, {H, G_ij}} + H_ij - H^k_i H^l_j G_kl
//
// and reported as R = (A + A^T)/2; the antisymmetric remainder is kept as a
// diagnostic only.  Nested brackets are evaluated through jets of the full
// order-4 germ of H, never by numerical differencing.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"
#include "hamgeo/model.hpp"
#include "hamgeo/riemann.hpp"

namespace hamgeo {

inline constexpr double kConvexityEps = 1e-10;

/// All mixed partials of H at a phase point up to total order 4, addressed
/// by upper (momentum) and lower (coordinate) index lists.
class DerivTable {
public:
    DerivTable(const HamiltonianModel& model, PhasePoint point)
        : n_(model.dim()), point_(std::move(point)), h_(model.eval_jet(point_, 4)) {}

    int dim() const { return n_; }
    const PhasePoint& point() const { return point_; }
    const Jet& jet() const { return h_; }
    double value() const { return h_.value(); }

    /// Mixed partial with the given upper (d/dp) and lower (d/dq) indices.
    double partial(std::span<const int> upper, std::span<const int> lower) const {
        if (upper.size() + lower.size() > static_cast<std::size_t>(kMaxJetOrder))
            throw InvalidArgument("derivative table holds partials up to total order 4");
        std::vector<int> alpha(2 * n_, 0);
        for (int i : upper) {
            if (i < 0 || i >= n_) throw InvalidArgument("upper index out of range");
            alpha[n_ + i] += 1;
        }
        for (int j : lower) {
            if (j < 0 || j >= n_) throw InvalidArgument("lower index out of range");
            alpha[j] += 1;
        }
        return extract_partial(h_, alpha);
    }

    double d(std::initializer_list<int> upper, std::initializer_list<int> lower) const {
        return partial(std::span<const int>(upper.begin(), upper.size()),
                       std::span<const int>(lower.begin(), lower.size()));
    }

    /// H^i = dH/dp_i (the velocity when H is kinetic).
    std::vector<double> grad_p() const {
        std::vector<double> v(n_);
        for (int i = 0; i < n_; ++i) v[i] = d({i}, {});
        return v;
    }
    /// H_i = dH/dq^i.
    std::vector<double> grad_q() const {
        std::vector<double> v(n_);
        for (int i = 0; i < n_; ++i) v[i] = d({}, {i});
        return v;
    }
    /// H^{ij}.
    Mat<double> hess_pp() const {
        Mat<double> m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = d({i, j}, {});
        return m;
    }
    /// H_{ij}.
    Mat<double> hess_qq() const {
        Mat<double> m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = d({}, {i, j});
        return m;
    }
    /// H^i_j (row = upper momentum index, column = lower coordinate index).
    Mat<double> mixed() const {
        Mat<double> m(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m(i, j) = d({i}, {j});
        return m;
    }

private:
    int n_;
    PhasePoint point_;
    Jet h_;
};

inline DerivTable derivative_table(const HamiltonianModel& model, const PhasePoint& x) {
    return DerivTable(model, x);
}

/// G = (H^{ij})^{-1} through a symmetric eigendecomposition; rejects
/// momentum Hessians that are not positive-definite relative to eps.
inline Mat<double> mass_inverse(const Mat<double>& hess_pp, double eps = kConvexityEps) {
    const int n = hess_pp.rows();
    std::vector<double> eigs;
    Mat<double> vecs(n, n);
    symmetric_eigen(hess_pp, eigs, &vecs);
    const double largest = eigs.back();
    if (largest <= 0.0 || eigs.front() <= eps * largest)
        throw NotConvex("momentum Hessian is not positive-definite (smallest eigenvalue " +
                        std::to_string(eigs.front()) + ")");
    Mat<double> g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += vecs(i, k) * vecs(j, k) / eigs[k];
            g(i, j) = s;
        }
    return g;
}

inline Mat<double> mass_inverse(const DerivTable& table, double eps = kConvexityEps) {
    return mass_inverse(table.hess_pp(), eps);
}

/// Canonical bracket of two jets over the same 2n-variable germ; consumes
/// one derivative order: {f, k} = sum_d df/dp_d dk/dq^d - df/dq^d dk/dp_d.
inline Jet poisson_bracket_jet(const Jet& f, const Jet& k, int n) {
    if (f.order() < 1 || k.order() < 1)
        throw InvalidArgument("poisson bracket needs order >= 1 operands");
    if (f.nvars() != 2 * n || k.nvars() != 2 * n)
        throw InvalidArgument("poisson bracket operands must live on 2n variables");
    Jet out = Jet::constant(2 * n, std::min(f.order(), k.order()) - 1, 0.0);
    for (int d2 = 0; d2 < n; ++d2)
        out += f.deriv(n + d2) * k.deriv(d2) - f.deriv(d2) * k.deriv(n + d2);
    return out;
}

/// {F, K} at a phase point for any two jet-evaluatable phase functions.
/// The sign convention makes {H, q^i} = H^i and {H, p_i} = -H_i.
template <class F, class K>
double poisson_bracket(F&& f, K&& k, const PhasePoint& x) {
    const int n = x.dim();
    std::vector<Jet> q, p;
    for (int i = 0; i < n; ++i) q.push_back(Jet::variable(2 * n, 1, i, x.q[i]));
    for (int i = 0; i < n; ++i) p.push_back(Jet::variable(2 * n, 1, n + i, x.p[i]));
    Jet fj = f(std::span<const Jet>(q), std::span<const Jet>(p));
    Jet kj = k(std::span<const Jet>(q), std::span<const Jet>(p));
    return poisson_bracket_jet(fj, kj, n).value();
}

/// gamma^a_c = 1/2 [ -H^a_c + H^{ab} G_ci H^i_b + Gdot_cb H^{ba} ] with
/// Gdot = {H, G} computed through dG = -G (dH^{..}) G from table partials.
inline Mat<double> gamma(const DerivTable& t, const Mat<double>& G) {
    const int n = t.dim();
    Mat<double> mixed = t.mixed();
    Mat<double> hpp = t.hess_pp();
    std::vector<double> hp = t.grad_p(), hq = t.grad_q();

    // Gdot_cb = sum_k H^k d_k G_cb - H_k d^k G_cb, with dG = -G dHpp G.
    Mat<double> gdot(n, n);
    for (int k = 0; k < n; ++k) {
        Mat<double> dq(n, n), dp(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                dq(a, b) = t.d({a, b}, {k});
                dp(a, b) = t.d({a, b, k}, {});
            }
        Mat<double> dGq = G * dq * G, dGp = G * dp * G;
        for (int c = 0; c < n; ++c)
            for (int b = 0; b < n; ++b)
                gdot(c, b) += -hp[k] * dGq(c, b) + hq[k] * dGp(c, b);
    }

    Mat<double> out(n, n);
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) {
            double p_term = 0.0;
            for (int b = 0; b < n; ++b)
                for (int i = 0; i < n; ++i)
                    p_term += hpp(a, b) * G(c, i) * mixed(i, b);
            double gdot_term = 0.0;
            for (int b = 0; b < n; ++b) gdot_term += gdot(c, b) * hpp(b, a);
            out(a, c) = 0.5 * (-mixed(a, c) + p_term + gdot_term);
        }
    return out;
}

inline Mat<double> gamma(const DerivTable& t, double eps = kConvexityEps) {
    return gamma(t, mass_inverse(t, eps));
}

struct CurvatureResult {
    Mat<double> G;                  // inverse momentum Hessian
    Mat<double> gamma;              // gamma^a_c, upper index = row
    Mat<double> R;                  // symmetrized curvature matrix
    double ricci = 0.0;             // H^{ij} R_ij
    Mat<double> antisymmetric_part; // (A - A^T)/2, diagnostic only
};

/// Full curvature computation at a phase point.
inline CurvatureResult curvature(const HamiltonianModel& model, const PhasePoint& x,
                                 double eps = kConvexityEps) {
    const int n = model.dim();
    DerivTable t(model, x);
    Mat<double> G = mass_inverse(t, eps);
    Mat<double> gam = gamma(t, G);
    const Jet& h4 = t.jet();

    // order-2 jets of the momentum Hessian, its inverse, and H^i_j
    Mat<Jet> hpp_jet(n, n), mixed_jet(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            hpp_jet(i, j) = h4.deriv(n + i).deriv(n + j);
            mixed_jet(i, j) = h4.deriv(n + i).deriv(j);
        }
    Mat<Jet> g_jet = inverse(hpp_jet);

    Mat<double> hqq = t.hess_qq(), mixed = t.mixed(), hpp = t.hess_pp();
    Mat<double> a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double term1 = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) term1 += G(k, l) * gam(k, i) * gam(l, j);

            Jet inner = Jet::constant(2 * n, 2, 0.0);
            for (int k = 0; k < n; ++k) inner += g_jet(i, k) * mixed_jet(k, j);
            double term2 = -poisson_bracket_jet(h4, inner, n).value();

            Jet once = poisson_bracket_jet(h4, g_jet(i, j), n);
            double term3 = -0.5 * poisson_bracket_jet(h4, once, n).value();

            double term5 = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) term5 -= mixed(k, i) * mixed(l, j) * G(k, l);

            a(i, j) = term1 + term2 + term3 + hqq(i, j) + term5;
        }
    }

    CurvatureResult out;
    out.G = std::move(G);
    out.gamma = std::move(gam);
    out.R = Mat<double>(n, n);
    out.antisymmetric_part = Mat<double>(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.R(i, j) = 0.5 * (a(i, j) + a(j, i));
            out.antisymmetric_part(i, j) = 0.5 * (a(i, j) - a(j, i));
        }
    out.ricci = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.ricci += hpp(i, j) * out.R(i, j);
    return out;
}

/// Closed-form curvature for kinetic models H = g^{ij}(p_i - A_i)(p_j - A_j)/2
/// + phi, assembled from the classical-geometry oracle:
///
///   R_ij = -g_im V^k V^l Rm^m_klj + 1/4 F_ik F_jl g^{kl}
///          + 1/2 V^k (DF_jki + DF_ikj) + DDphi_ij
///
/// with V^k = g^{kl}(p_l - A_l), F = dA, and D the metric-covariant
/// derivative.  Independent of the bracket pipeline above.
inline CurvatureResult emd_curvature_closed_form(const MetricField& metric,
                                                 const VectorFieldFn& A,
                                                 const ScalarFieldFn& phi,
                                                 const PhasePoint& x) {
    const int n = metric.n;
    if (x.dim() != n) throw InvalidArgument("point dimension does not match metric");
    CurvatureData geo = curvature_data(metric, x.q);

    std::vector<Jet> qj;
    for (int k = 0; k < n; ++k) qj.push_back(Jet::variable(n, 2, k, x.q[k]));

    // velocity V^k = g^{kl}(p_l - A_l)
    std::vector<double> a_val(n, 0.0);
    std::vector<Jet> a_jet;
    if (A) {
        a_jet = A(qj);
        if (static_cast<int>(a_jet.size()) != n)
            throw InvalidArgument("vector potential returned wrong length");
        for (int k = 0; k < n; ++k) a_val[k] = a_jet[k].value();
    }
    std::vector<double> v(n, 0.0);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) v[k] += geo.ginv(k, l) * (x.p[l] - a_val[l]);

    // F_ik = d_i A_k - d_k A_i as order-1 jets, then covariant derivatives
    Mat<double> F(n, n);
    Tensor3 dF(n); // dF(j, k, i) = d_j F_ki
    if (A) {
        Mat<Jet> f_jet(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) f_jet(i, k) = a_jet[k].deriv(i) - a_jet[i].deriv(k);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                F(i, k) = f_jet(i, k).value();
                for (int j = 0; j < n; ++j) dF(j, k, i) = f_jet(k, i).deriv(j).value();
            }
    }
    auto cov_dF = [&](int j, int k, int i) {
        double r = dF(j, k, i);
        for (int m = 0; m < n; ++m)
            r -= geo.gamma(m, j, k) * F(m, i) + geo.gamma(m, j, i) * F(k, m);
        return r;
    };

    // covariant Hessian of phi
    Mat<double> ddphi(n, n);
    if (phi) {
        Jet ph = phi(qj);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                std::vector<int> alpha(n, 0);
                alpha[i] += 1;
                alpha[j] += 1;
                double r = extract_partial(ph, alpha);
                for (int k = 0; k < n; ++k) {
                    std::vector<int> beta(n, 0);
                    beta[k] = 1;
                    r -= geo.gamma(k, i, j) * extract_partial(ph, beta);
                }
                ddphi(i, j) = r;
            }
        }
    }

    CurvatureResult out;
    out.R = Mat<double>(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double r = 0.0;
            for (int m = 0; m < n; ++m) {
                double c = 0.0;
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) c += v[k] * v[l] * geo.riemann(m, k, l, j);
                r -= geo.g(i, m) * c;
            }
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    r += 0.25 * F(i, k) * F(j, l) * geo.ginv(k, l);
            for (int k = 0; k < n; ++k)
                r += 0.5 * v[k] * (cov_dF(j, k, i) + cov_dF(i, k, j));
            r += ddphi(i, j);
            out.R(i, j) = r;
        }

    out.ricci = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.ricci += geo.ginv(i, j) * out.R(i, j);

    // gamma comes from the derivative-table route; the curvature above never
    // uses it, so the cross-pipeline comparison stays meaningful.
    HamiltonianModel model = make_emd(n, metric.g, A, phi, static_cast<bool>(A));
    DerivTable t(model, x);
    out.G = mass_inverse(t);
    out.gamma = gamma(t, out.G);
    out.antisymmetric_part = Mat<double>(n, n);
    return out;
}

/// Coordinate change q -> qt with a jet-evaluatable forward map and its
/// analytic Jacobian d(qt)/dq.
struct Diffeo {
    int n = 0;
    std::function<std::vector<Jet>(std::span<const Jet>)> forward;
    std::function<Mat<Jet>(std::span<const Jet>)> jacobian;
};

namespace detail {

/// Jacobian values of the coordinate change at q, rejecting singular maps.
inline Mat<double> diffeo_jacobian_values(const Diffeo& diffeo, std::span<const double> q) {
    const int n = diffeo.n;
    std::vector<Jet> q0;
    for (int k = 0; k < n; ++k) q0.push_back(Jet::constant(n, 0, q[k]));
    Mat<Jet> m_jet = diffeo.jacobian(q0);
    Mat<double> M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = m_jet(i, j).value();
    Mat<double> mtm(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += M(k, i) * M(k, j);
            mtm(i, j) = s;
        }
    std::vector<double> eigs;
    symmetric_eigen(mtm, eigs, nullptr);
    if (eigs.front() <= 1e-16 * eigs.back())
        throw DomainError("coordinate change has an ill-conditioned Jacobian");
    return M;
}

} // namespace detail

/// Image of a phase point under the coordinate change: qt = forward(q),
/// pt = M^-T p (covariant momentum law).
inline PhasePoint transform_point(const Diffeo& diffeo, const PhasePoint& x) {
    const int n = diffeo.n;
    if (x.dim() != n) throw InvalidArgument("point dimension does not match diffeo");
    Mat<double> Minv = inverse(detail::diffeo_jacobian_values(diffeo, x.q));
    std::vector<Jet> q0c;
    for (int k = 0; k < n; ++k) q0c.push_back(Jet::constant(n, 0, x.q[k]));
    std::vector<Jet> qt0 = diffeo.forward(q0c);
    PhasePoint xt;
    xt.q.resize(n);
    xt.p.assign(n, 0.0);
    for (int i = 0; i < n; ++i) xt.q[i] = qt0[i].value();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) xt.p[i] += Minv(j, i) * x.p[j];
    return xt;
}

/// The Hamiltonian in the new coordinates, valid near the image of `base`:
/// Ht(qt, pt) = H(q(qt), M(q)^T pt), with q(qt) recovered by a fixed-slope
/// Newton iteration that gains one jet order per pass.
inline HamiltonianModel transformed_model(const HamiltonianModel& model, const PhasePoint& base,
                                          const Diffeo& diffeo) {
    const int n = model.dim();
    if (diffeo.n != n) throw InvalidArgument("diffeo dimension does not match model");
    if (!diffeo.forward || !diffeo.jacobian)
        throw InvalidArgument("diffeo needs forward and jacobian callables");
    Mat<double> Minv = inverse(detail::diffeo_jacobian_values(diffeo, base.q));
    auto base_q = base.q;
    auto fwd = diffeo.forward;
    auto jac = diffeo.jacobian;
    return HamiltonianModel(
        n, "transformed",
        [model, fwd, jac, Minv, base_q, n](std::span<const Jet> qt, std::span<const Jet> pt) {
            const int nv = qt[0].nvars();
            const int ord = qt[0].order();
            std::vector<Jet> q(n, Jet::constant(nv, ord, 0.0));
            for (int i = 0; i < n; ++i) q[i] = Jet::constant(nv, ord, base_q[i]);
            for (int pass = 0; pass < kMaxJetOrder + 2; ++pass) {
                std::vector<Jet> r = fwd(q);
                for (int i = 0; i < n; ++i) r[i] = qt[i] - r[i];
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) q[i] += Minv(i, j) * r[j];
            }
            Mat<Jet> mj = jac(q);
            std::vector<Jet> p(n, Jet::constant(nv, ord, 0.0));
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) p[j] += mj(i, j) * pt[i];
            return model(q, p);
        },
        model.quadratic_in_p(), model.time_reversal_symmetric());
}

struct TransformCheck {
    double curvature_residual = 0.0; // max_ij |Rt_ij - (J^T R J)_ij|
    double gamma_residual = 0.0;     // max_ij |gt - (M g M^-1 - Mdot M^-1)|_ij
    PhasePoint transformed_point;
};

/// Verifies that curvature transforms as a covariant 2-tensor and gamma by
/// the connection law under the given coordinate change.
inline TransformCheck transform_check(const HamiltonianModel& model, const PhasePoint& x,
                                      const Diffeo& diffeo) {
    const int n = model.dim();
    if (diffeo.n != n) throw InvalidArgument("diffeo dimension does not match model");
    if (!diffeo.forward || !diffeo.jacobian)
        throw InvalidArgument("diffeo needs forward and jacobian callables");

    std::vector<Jet> q0;
    for (int k = 0; k < n; ++k) q0.push_back(Jet::variable(n, 1, k, x.q[k]));
    Mat<Jet> m_jet = diffeo.jacobian(q0);
    Mat<double> M = detail::diffeo_jacobian_values(diffeo, x.q);
    Mat<double> Minv = inverse(M);
    PhasePoint xt = transform_point(diffeo, x);
    HamiltonianModel transformed = transformed_model(model, x, diffeo);

    CurvatureResult orig = curvature(model, x);
    CurvatureResult trans = curvature(transformed, xt);

    // curvature law: Rt = J^T R J with J = dq/d(qt) = M^-1
    double cres = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double expect = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) expect += Minv(k, i) * Minv(l, j) * orig.R(k, l);
            cres = std::max(cres, std::abs(trans.R(i, j) - expect));
        }

    // gamma law: gt = M g M^-1 - Mdot M^-1, Mdot^l_a = d_k M^l_a * H^k
    DerivTable t(model, x);
    std::vector<double> hp = t.grad_p();
    Mat<double> mdot(n, n);
    for (int l = 0; l < n; ++l)
        for (int a2 = 0; a2 < n; ++a2) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += m_jet(l, a2).deriv(k).value() * hp[k];
            mdot(l, a2) = s;
        }
    Mat<double> expect_gamma = M * orig.gamma * Minv;
    Mat<double> inhom = mdot * Minv;
    double gres = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            gres = std::max(gres,
                            std::abs(trans.gamma(i, j) - (expect_gamma(i, j) - inhom(i, j))));

    TransformCheck out;
    out.curvature_residual = cres;
    out.gamma_residual = gres;
    out.transformed_point = xt;
    return out;
}

} // namespace hamgeo
