// Momentum-space averages against the Boltzmann weight e^{-H}: the volume
// element, the momentum-averaged curvature density, its closed form for
// kinetic models, and a periodic-box comparison of the three ways to write
// the resulting field action.
//
// Every route assumes H is quadratic and convex in the momenta, so that
// e^{-H(q,.)} is a Gaussian profile: the quadratic data (center, inverse
// covariance, minimum value) is extracted once per configuration point and
// the integral is whitened through its Cholesky factor.  Models without that
// structure are rejected rather than silently mis-integrated.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/geometry.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"
#include "hamgeo/model.hpp"
#include "hamgeo/riemann.hpp"

namespace hamgeo {

enum class QuadratureMethod { analytic_gaussian, gauss_hermite, monte_carlo };

inline const char* to_string(QuadratureMethod m) {
    switch (m) {
        case QuadratureMethod::analytic_gaussian: return "analytic_gaussian";
        case QuadratureMethod::gauss_hermite: return "gauss_hermite";
        case QuadratureMethod::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

/// How to evaluate a momentum integral.  `nodes` applies to gauss_hermite
/// (per axis), `samples` and `seed` to monte_carlo.  A fixed seed makes the
/// Monte Carlo estimate bit-reproducible.
struct QuadratureSpec {
    QuadratureMethod method = QuadratureMethod::gauss_hermite;
    int nodes = 20;
    std::int64_t samples = 1'000'000;
    std::uint64_t seed = 0;
    double tolerance = 1e-8;

    static QuadratureSpec analytic() {
        QuadratureSpec s;
        s.method = QuadratureMethod::analytic_gaussian;
        return s;
    }
    static QuadratureSpec hermite(int nodes_per_axis) {
        QuadratureSpec s;
        s.method = QuadratureMethod::gauss_hermite;
        s.nodes = nodes_per_axis;
        return s;
    }
    static QuadratureSpec mc(std::int64_t samples, std::uint64_t seed) {
        QuadratureSpec s;
        s.method = QuadratureMethod::monte_carlo;
        s.samples = samples;
        s.seed = seed;
        return s;
    }
};

/// One evaluated momentum integral.  The error field means: Monte Carlo -> one
/// standard error of the estimate; Gauss-Hermite -> the change under one node
/// refinement; analytic -> rounding scale.
struct DensityResult {
    double value = 0.0;
    double estimated_error = 0.0;
    QuadratureMethod method = QuadratureMethod::gauss_hermite;
};

namespace detail {

inline void validate_spec(const QuadratureSpec& spec) {
    if (spec.method == QuadratureMethod::gauss_hermite && spec.nodes < 2)
        throw InvalidArgument("gauss_hermite needs at least 2 nodes per axis");
    if (spec.method == QuadratureMethod::monte_carlo && spec.samples < 2)
        throw InvalidArgument("monte_carlo needs at least 2 samples for an error estimate");
    if (!(spec.tolerance > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
}

/// Nodes and weights for integrals against e^{-x^2} (weights sum to sqrt(pi)),
/// by eigendecomposition of the tridiagonal recurrence matrix with
/// off-diagonal entries sqrt(k/2).
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline HermiteRule hermite_rule(int m) {
    if (m < 2) throw InvalidArgument("gauss_hermite needs at least 2 nodes per axis");
    Mat<double> jac(m, m);
    for (int k = 1; k < m; ++k) {
        jac(k - 1, k) = std::sqrt(0.5 * k);
        jac(k, k - 1) = jac(k - 1, k);
    }
    std::vector<double> eigs;
    Mat<double> vecs(m, m);
    symmetric_eigen(jac, eigs, &vecs);
    HermiteRule rule;
    rule.nodes = std::move(eigs);
    rule.weights.resize(m);
    const double mu0 = std::sqrt(M_PI); // total mass of e^{-x^2}
    for (int i = 0; i < m; ++i) rule.weights[i] = mu0 * vecs(0, i) * vecs(0, i);
    return rule;
}

/// Quadratic-in-p data of H at fixed q: H(q,p) = phi_min + (p-center)^T M
/// (p-center)/2 with M = chol * chol^T.  `prefactor` is the Gaussian volume
/// e^{-phi_min} det(M)^{-1/2}, i.e. the integral of e^{-H} dp/(2pi)^{n/2}.
struct GaussianFactors {
    std::vector<double> center;
    Mat<double> chol;
    double phi_min = 0.0;
    double prefactor = 0.0;
};

/// Solve chol^T x = u by back substitution (whitening map u -> p - center).
inline std::vector<double> unwhiten(const Mat<double>& chol, std::span<const double> u) {
    const int n = chol.rows();
    std::vector<double> x(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = u[i];
        for (int j = i + 1; j < n; ++j) s -= chol(j, i) * x[j];
        x[i] = s / chol(i, i);
    }
    return x;
}

inline GaussianFactors gaussian_factors(const HamiltonianModel& model,
                                        std::span<const double> q) {
    const int n = model.dim();
    if (static_cast<int>(q.size()) != n)
        throw InvalidArgument("configuration point dimension does not match the model");
    if (!model.quadratic_in_p())
        throw NotIntegrable(
            "model is not flagged quadratic in momentum; e^{-H} has no Gaussian "
            "profile to integrate against");
    PhasePoint origin{std::vector<double>(q.begin(), q.end()), std::vector<double>(n, 0.0)};
    Jet h = model.eval_jet(origin, 2);

    Mat<double> m(n, n);
    std::vector<double> grad(n, 0.0);
    std::vector<int> alpha(2 * n, 0);
    for (int i = 0; i < n; ++i) {
        alpha.assign(2 * n, 0);
        alpha[n + i] = 1;
        grad[i] = extract_partial(h, alpha);
        for (int j = 0; j <= i; ++j) {
            alpha.assign(2 * n, 0);
            alpha[n + i] += 1;
            alpha[n + j] += 1;
            m(i, j) = extract_partial(h, alpha);
            m(j, i) = m(i, j);
        }
    }

    GaussianFactors fac;
    try {
        fac.chol = cholesky(m);
    } catch (const NotConvex& e) {
        throw NotIntegrable(std::string("momentum Hessian is not positive-definite, the "
                                        "Boltzmann weight diverges (") +
                            e.what() + ")");
    }
    // minimizer of the quadratic: M * center = -grad_p H(q, 0)
    Mat<double> lu = m;
    std::vector<int> perm;
    lu_factor(lu, perm);
    std::vector<double> rhs = grad;
    for (double& v : rhs) v = -v;
    fac.center = lu_solve(lu, perm, rhs);
    fac.phi_min = model.value(PhasePoint{origin.q, fac.center});
    double root_det = 1.0;
    for (int i = 0; i < n; ++i) root_det *= fac.chol(i, i);
    fac.prefactor = std::exp(-fac.phi_min) / root_det;

    // Divergence probe: at whitened radius r the value of a genuinely
    // quadratic H is phi_min + r^2/2 exactly; a mis-flagged model (say a
    // quartic momentum term) shows up as a large residual here instead of a
    // silently wrong integral.
    const double r = 6.0;
    const double expected = fac.phi_min + 0.5 * r * r;
    const double scale = 1.0 + std::abs(fac.phi_min) + 0.5 * r * r;
    std::vector<double> u(n, 0.0);
    for (int dir = 0; dir <= n; ++dir) {
        u.assign(n, 0.0);
        if (dir < n)
            u[dir] = r;
        else
            for (int i = 0; i < n; ++i) u[i] = r / std::sqrt(static_cast<double>(n));
        std::vector<double> p = unwhiten(fac.chol, u);
        for (int i = 0; i < n; ++i) p[i] += fac.center[i];
        double value = model(origin.q, p);
        if (std::abs(value - expected) > 1e-6 * scale)
            throw NotIntegrable("momentum dependence is not quadratic (value at whitened "
                                "radius 6 deviates by " +
                                std::to_string(std::abs(value - expected)) + ")");
    }
    return fac;
}

using MomentumFn = std::function<double(std::span<const double>)>;

/// E[f(p)] under the Gaussian profile of `fac` by a tensor Gauss-Hermite rule
/// with m nodes per axis.  Exact for f polynomial in p of degree <= 2m-1.
inline double gauss_hermite_average(const GaussianFactors& fac, const MomentumFn& f, int m) {
    const int n = static_cast<int>(fac.center.size());
    HermiteRule rule = hermite_rule(m);
    const double inv_mu0 = 1.0 / std::sqrt(M_PI);
    std::vector<int> idx(n, 0);
    std::vector<double> u(n, 0.0), p(n, 0.0);
    double sum = 0.0;
    for (;;) {
        double w = 1.0;
        for (int k = 0; k < n; ++k) {
            w *= rule.weights[idx[k]] * inv_mu0;
            u[k] = std::sqrt(2.0) * rule.nodes[idx[k]];
        }
        p = unwhiten(fac.chol, u);
        for (int k = 0; k < n; ++k) p[k] += fac.center[k];
        sum += w * f(p);
        int k = 0;
        while (k < n && ++idx[k] == m) idx[k++] = 0;
        if (k == n) break;
    }
    return sum;
}

/// splitmix64 output function: a counter keyed by (seed, index) gives an
/// order-independent, bit-reproducible stream.
inline std::uint64_t counter_rand(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Two standard normals from counters (2*k, 2*k+1) of the keyed stream.
inline std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t k) {
    const double to_unit = 0x1.0p-53;
    double u1 = (static_cast<double>(counter_rand(seed, 2 * k) >> 11) + 0.5) * to_unit;
    double u2 = (static_cast<double>(counter_rand(seed, 2 * k + 1) >> 11) + 0.5) * to_unit;
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * M_PI * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

/// E[f(p)] and its standard error by importance sampling from the Gaussian
/// profile itself (exact proposal for quadratic H, so weights are uniform).
inline std::pair<double, double> monte_carlo_average(const GaussianFactors& fac,
                                                     const MomentumFn& f,
                                                     std::int64_t samples, std::uint64_t seed) {
    const int n = static_cast<int>(fac.center.size());
    const std::uint64_t pairs = static_cast<std::uint64_t>((n + 1) / 2);
    std::vector<double> u(n, 0.0), p(n, 0.0);
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t s = 0; s < samples; ++s) {
        for (std::uint64_t j = 0; j < pairs; ++j) {
            auto [z0, z1] = counter_normal_pair(seed, static_cast<std::uint64_t>(s) * pairs + j);
            u[2 * j] = z0;
            if (static_cast<int>(2 * j + 1) < n) u[2 * j + 1] = z1;
        }
        p = unwhiten(fac.chol, u);
        for (int k = 0; k < n; ++k) p[k] += fac.center[k];
        double v = f(p);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(samples);
    double var = (sumsq - static_cast<double>(samples) * mean * mean) /
                 static_cast<double>(samples - 1);
    if (var < 0.0) var = 0.0;
    return {mean, std::sqrt(var / static_cast<double>(samples))};
}

/// Shared driver: prefactor * E[f] with the method-appropriate error estimate.
/// Pass f = nullptr for the plain volume element (f == 1).
inline DensityResult momentum_average(const HamiltonianModel& model, std::span<const double> q,
                                      const MomentumFn& f, const QuadratureSpec& spec) {
    validate_spec(spec);
    GaussianFactors fac = gaussian_factors(model, q);
    DensityResult out;
    out.method = spec.method;
    const MomentumFn one = [](std::span<const double>) { return 1.0; };
    const MomentumFn& fn = f ? f : one;
    switch (spec.method) {
        case QuadratureMethod::analytic_gaussian: {
            if (f)
                throw InvalidArgument(
                    "the analytic route integrates the volume element only; use "
                    "gauss_hermite or monte_carlo for weighted integrands");
            out.value = fac.prefactor;
            out.estimated_error = 8.0 * std::numeric_limits<double>::epsilon() *
                                  std::abs(out.value);
            break;
        }
        case QuadratureMethod::gauss_hermite: {
            double coarse = fac.prefactor * gauss_hermite_average(fac, fn, spec.nodes);
            double fine = fac.prefactor * gauss_hermite_average(fac, fn, spec.nodes + 2);
            out.value = fine;
            out.estimated_error = std::abs(fine - coarse);
            break;
        }
        case QuadratureMethod::monte_carlo: {
            auto [mean, stderr_of_mean] = monte_carlo_average(fac, fn, spec.samples, spec.seed);
            out.value = fac.prefactor * mean;
            out.estimated_error = fac.prefactor * stderr_of_mean;
            break;
        }
    }
    return out;
}

} // namespace detail

/// Integral of e^{-H(q,p)} d^n p / (2 pi)^{n/2} at fixed q.  For kinetic
/// models H = g^{ij}(p_i - A_i)(p_j - A_j)/2 + phi this is e^{-phi} sqrt(g).
inline DensityResult boltzmann_volume(const HamiltonianModel& model, std::span<const double> q,
                                      const QuadratureSpec& spec = QuadratureSpec::analytic()) {
    return detail::momentum_average(model, q, nullptr, spec);
}

/// Momentum average of the curvature contraction: the integral of
/// ricci(q,p) e^{-H} d^n p / (2 pi)^{n/2}.  The integrand is polynomial of
/// degree <= 2 in p for kinetic models, so small Gauss-Hermite rules are
/// already exact there.
inline DensityResult ricci_density(const HamiltonianModel& model, std::span<const double> q,
                                   const QuadratureSpec& spec = QuadratureSpec::hermite(20)) {
    if (spec.method == QuadratureMethod::analytic_gaussian)
        throw InvalidArgument(
            "the analytic route integrates the volume element only; use gauss_hermite "
            "or monte_carlo for the curvature density");
    std::vector<double> qv(q.begin(), q.end());
    detail::MomentumFn f = [&model, &qv](std::span<const double> p) {
        return curvature(model, PhasePoint{qv, std::vector<double>(p.begin(), p.end())}).ricci;
    };
    return detail::momentum_average(model, q, f, spec);
}

/// Closed form of the same density for kinetic models, assembled from the
/// classical geometry of (g, A, phi):
///
///   [ R + 1/4 F_ik F_jl g^{kl} g^{ij} + lap(phi) ] e^{-phi} sqrt(det g)
///
/// with F = dA and lap the metric Laplacian g^{ij}(d_i d_j - Gamma^k_ij d_k).
/// Null A or phi mean zero fields.
inline double emd_density_closed_form(const MetricField& metric, const VectorFieldFn& A,
                                      const ScalarFieldFn& phi, std::span<const double> q) {
    const int n = metric.n;
    if (static_cast<int>(q.size()) != n)
        throw InvalidArgument("configuration point dimension does not match the metric");
    CurvatureData geo = curvature_data(metric, q);

    std::vector<Jet> q1, q2;
    for (int k = 0; k < n; ++k) {
        q1.push_back(Jet::variable(n, 1, k, q[k]));
        q2.push_back(Jet::variable(n, 2, k, q[k]));
    }

    double maxwell = 0.0;
    if (A) {
        std::vector<Jet> a = A(q1);
        if (static_cast<int>(a.size()) != n)
            throw InvalidArgument("vector potential returned wrong length");
        Mat<double> f(n, n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) f(i, k) = a[k].deriv(i).value() - a[i].deriv(k).value();
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l)
                        maxwell += 0.25 * f(i, k) * f(j, l) * geo.ginv(k, l) * geo.ginv(i, j);
    }

    double lap = 0.0;
    double phi_val = 0.0;
    if (phi) {
        Jet pj = phi(q2);
        phi_val = pj.value();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double cov = pj.deriv(i).deriv(j).value();
                for (int k = 0; k < n; ++k) cov -= geo.gamma(k, i, j) * pj.deriv(k).value();
                lap += geo.ginv(i, j) * cov;
            }
    }

    const double sqrt_g = std::sqrt(determinant(geo.g));
    return (geo.scalar + maxwell + lap) * std::exp(-phi_val) * sqrt_g;
}

/// Periodic box for comparing the action integrals: the fields must be
/// periodic with the given length in every coordinate.  `momentum` controls
/// the per-point momentum quadrature of the slow route.
struct TorusGridSpec {
    int points_per_axis = 8;
    double length = 2.0 * M_PI;
    QuadratureSpec momentum = QuadratureSpec::hermite(3);
    double tolerance = 1e-5;
};

/// The three evaluations of the field action on the torus, with residuals.
///
/// conformal_route rescales the metric by e^{2 a phi} with a = -1/(n-2) and
/// assembles curvature + gauge + dilaton-kinetic terms using the coefficient
/// (2n-1)/(n-2) for the kinetic piece; that coefficient is a hypothesis this
/// function reports on rather than asserts.  fitted_coefficient is the value
/// that would reconcile the conformal route with the closed form exactly
/// (NaN when the kinetic integral degenerates, e.g. constant phi).
struct ActionCompareResult {
    double momentum_route = 0.0;      // grid sum of per-point momentum averages
    double closed_form_route = 0.0;   // grid sum of emd_density_closed_form
    double conformal_route = 0.0;     // rescaled-metric assembly, stated coefficient
    double conformal_base = 0.0;      // conformal curvature + gauge terms only
    double dilaton_kinetic = 0.0;     // grid sum of sqrt(gt) gt^{ij} dphi_i dphi_j
    double conformal_coefficient = 0.0;
    double fitted_coefficient = 0.0;
    double momentum_vs_closed = 0.0;
    double closed_vs_conformal = 0.0;
    double grid_refinement_delta = 0.0; // closed-form route vs half-cell-shifted grid
};

inline ActionCompareResult action_integral_compare(const MetricField& metric,
                                                   const VectorFieldFn& A,
                                                   const ScalarFieldFn& phi,
                                                   const TorusGridSpec& grid) {
    const int n = metric.n;
    if (n < 3)
        throw InvalidArgument(
            "conformal comparison needs at least three coordinates (rescaling exponent "
            "is -1/(n-2))");
    if (grid.points_per_axis < 4 || grid.points_per_axis % 2 != 0)
        throw InvalidArgument("points_per_axis must be even and at least 4");
    if (!(grid.length > 0.0)) throw InvalidArgument("torus length must be positive");
    detail::validate_spec(grid.momentum);
    if (grid.momentum.method == QuadratureMethod::analytic_gaussian)
        throw InvalidArgument(
            "the analytic route integrates the volume element only; choose gauss_hermite "
            "or monte_carlo for the momentum route");

    HamiltonianModel model = make_emd(n, metric.g, A, phi, static_cast<bool>(A));

    const double alpha = -1.0 / (n - 2);
    MetricFn tilde_fn = [g = metric.g, phi, alpha](std::span<const Jet> qj) {
        Mat<Jet> m = g(qj);
        if (phi) {
            Jet s = exp(phi(qj) * (2.0 * alpha));
            for (int i = 0; i < m.rows(); ++i)
                for (int j = 0; j < m.cols(); ++j) m(i, j) = m(i, j) * s;
        }
        return m;
    };
    MetricField tilde{n, tilde_fn};

    const int npts = grid.points_per_axis;
    const double h = grid.length / npts;
    double cell = 1.0;
    for (int k = 0; k < n; ++k) cell *= h;

    ActionCompareResult out;
    out.conformal_coefficient = (2.0 * n - 1.0) / (n - 2.0);

    // Cheap pass first: the closed-form route on the grid and on the same
    // grid shifted by half a cell.  The periodic rectangle rule errs only
    // through harmonics aliasing to zero frequency, and the leading alias
    // (at one grid frequency per axis) enters the two offset sums with
    // opposite sign, so their difference measures this grid's own error.
    // Bail out before the expensive momentum pass if it is too large.
    std::vector<int> idx(n, 0);
    std::vector<double> q(n, 0.0);
    double closed_shifted = 0.0;
    for (;;) {
        for (int k = 0; k < n; ++k) q[k] = idx[k] * h;
        out.closed_form_route += emd_density_closed_form(metric, A, phi, q) * cell;
        for (int k = 0; k < n; ++k) q[k] += 0.5 * h;
        closed_shifted += emd_density_closed_form(metric, A, phi, q) * cell;
        int k = 0;
        while (k < n && ++idx[k] == npts) idx[k++] = 0;
        if (k == n) break;
    }
    out.grid_refinement_delta = std::abs(out.closed_form_route - closed_shifted);
    if (out.grid_refinement_delta > grid.tolerance * (1.0 + std::abs(out.closed_form_route)))
        throw NoConvergence("periodic grid too coarse: a half-cell shift moves the "
                            "closed-form integral by " +
                                std::to_string(out.grid_refinement_delta) +
                                "; refine points_per_axis",
                            out.grid_refinement_delta);

    idx.assign(n, 0);
    std::vector<Jet> q1;
    for (;;) {
        for (int k = 0; k < n; ++k) q[k] = idx[k] * h;

        // slow route: momentum average of the curvature at this point
        {
            detail::GaussianFactors fac = detail::gaussian_factors(model, q);
            detail::MomentumFn f = [&model, &q](std::span<const double> p) {
                return curvature(model,
                                 PhasePoint{q, std::vector<double>(p.begin(), p.end())})
                    .ricci;
            };
            double avg = grid.momentum.method == QuadratureMethod::gauss_hermite
                             ? detail::gauss_hermite_average(fac, f, grid.momentum.nodes)
                             : detail::monte_carlo_average(fac, f, grid.momentum.samples,
                                                           grid.momentum.seed)
                                   .first;
            out.momentum_route += fac.prefactor * avg * cell;
        }

        // conformal route: curvature of the rescaled metric, rescaled gauge
        // term, and the dilaton kinetic density accumulated separately
        {
            CurvatureData geo = curvature_data(tilde, q);
            const double sqrt_gt = std::sqrt(determinant(geo.g));

            q1.clear();
            for (int k = 0; k < n; ++k) q1.push_back(Jet::variable(n, 1, k, q[k]));

            double maxwell = 0.0;
            if (A) {
                std::vector<Jet> a = A(q1);
                Mat<double> f(n, n);
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k)
                        f(i, k) = a[k].deriv(i).value() - a[i].deriv(k).value();
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k)
                        for (int j = 0; j < n; ++j)
                            for (int l = 0; l < n; ++l)
                                maxwell += 0.25 * f(i, k) * f(j, l) * geo.ginv(k, l) *
                                           geo.ginv(i, j);
            }

            double gauge_factor = 1.0;
            double kinetic = 0.0;
            if (phi) {
                Jet pj = phi(q1);
                gauge_factor = std::exp(2.0 * alpha * pj.value());
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        kinetic += geo.ginv(i, j) * pj.deriv(i).value() * pj.deriv(j).value();
            }
            out.conformal_base += (geo.scalar + maxwell * gauge_factor) * sqrt_gt * cell;
            out.dilaton_kinetic += kinetic * sqrt_gt * cell;
        }

        int k = 0;
        while (k < n && ++idx[k] == npts) idx[k++] = 0;
        if (k == n) break;
    }

    out.conformal_route = out.conformal_base + out.conformal_coefficient * out.dilaton_kinetic;
    if (std::abs(out.dilaton_kinetic) > 1e-12 * (1.0 + std::abs(out.conformal_base)))
        out.fitted_coefficient =
            (out.closed_form_route - out.conformal_base) / out.dilaton_kinetic;
    else
        out.fitted_coefficient = std::numeric_limits<double>::quiet_NaN();
    out.momentum_vs_closed = std::abs(out.momentum_route - out.closed_form_route);
    out.closed_vs_conformal = std::abs(out.closed_form_route - out.conformal_route);
    return out;
}

} // namespace hamgeo
