#pragma once

// A registry of named verification cases, each pinning one family of library
// results against an independently known closed form.  The CLI `verify`
// command and the acceptance suite both run these; a case reports a single
// worst-case residual and passes when it stays under the case tolerance.
//
// Cases draw any sampled inputs from a counter-based generator keyed on the
// caller's seed, so a run is a pure function of (registry, seed, tolerance):
// identical inputs give bit-identical outcomes.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "hamgeo/boltzmann.hpp"
#include "hamgeo/eikonal.hpp"
#include "hamgeo/geometry.hpp"
#include "hamgeo/model.hpp"
#include "hamgeo/riemann.hpp"
#include "hamgeo/stability.hpp"

namespace hamgeo {

struct VerifyCase {
    std::string name;
    std::string tags;  ///< space-separated, matched by the filter along with the name
    double tolerance;  ///< pass iff residual <= tolerance
    std::function<double(std::uint64_t seed)> residual;
};

struct VerifyOutcome {
    std::string name;
    std::string tags;
    double residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct VerifyOptions {
    std::string filter;                        ///< substring of name or tags; empty = all
    std::optional<double> tolerance_override;  ///< replaces every case tolerance
    std::uint64_t seed = 0;
};

namespace detail {

/// Uniform draw in [lo, hi) from the counter generator.
inline double verify_uniform(std::uint64_t seed, std::uint64_t index, double lo, double hi) {
    const std::uint64_t r = counter_rand(seed, index);
    const double u = (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline MetricField verify_sphere_metric() {
    return {2, metric_from_expressions({{"1", "0"}, {"0", "sin(q1)^2"}}, 2)};
}

inline MetricField verify_half_plane_metric() {
    return {2, metric_from_expressions({{"1/q2^2", "0"}, {"0", "1/q2^2"}}, 2)};
}

/// Worst deviation of the kinetic-model curvature from the classical tensor
/// contraction -g_im v^k v^l R^m_klj at `points` sampled configuration points.
inline double reduction_residual(const MetricField& metric, std::uint64_t seed, int points,
                                 double q1_lo, double q1_hi, double q2_lo, double q2_hi) {
    auto model = make_riemannian(2, metric.g);
    double worst = 0.0;
    std::uint64_t ctr = 0;
    for (int rep = 0; rep < points; ++rep) {
        PhasePoint x;
        x.q = {verify_uniform(seed, ctr++, q1_lo, q1_hi),
               verify_uniform(seed, ctr++, q2_lo, q2_hi)};
        x.p = {verify_uniform(seed, ctr++, -1.5, 1.5), verify_uniform(seed, ctr++, -1.5, 1.5)};
        CurvatureData geo = curvature_data(metric, x.q);
        CurvatureResult c = curvature(model, x);
        std::vector<double> v(2, 0.0);
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) v[k] += geo.ginv(k, l) * x.p[l];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double red = 0.0;
                for (int m = 0; m < 2; ++m) {
                    double s = 0.0;
                    for (int k = 0; k < 2; ++k)
                        for (int l = 0; l < 2; ++l) s += v[k] * v[l] * geo.riemann(m, k, l, j);
                    red += geo.g(i, m) * s;
                }
                worst = std::max(worst, std::abs(c.R(i, j) + red));
            }
        double ric = 0.0;
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) ric += v[k] * v[l] * geo.ricci(k, l);
        worst = std::max(worst, std::abs(c.ricci - ric));
    }
    return worst;
}

/// Uniform-field action from start to end in time T on the branch B*T in
/// (0, 2*pi), symmetric gauge.
inline double uniform_field_action(double B, const std::vector<double>& zend,
                                   const std::vector<double>& zstart, double T) {
    const double dx = zend[0] - zstart[0], dy = zend[1] - zstart[1];
    const double cross = zend[0] * zstart[1] - zend[1] * zstart[0];
    return 0.25 * B * (dx * dx + dy * dy) / std::tan(0.5 * B * T) - 0.5 * B * cross;
}

/// Uniform-field fixed-energy distance on the short arc.
inline double uniform_field_sigma(double B, const std::vector<double>& zend,
                                  const std::vector<double>& zstart, double E) {
    const double dx = zend[0] - zstart[0], dy = zend[1] - zstart[1];
    const double d = std::hypot(dx, dy);
    const double cross = zend[0] * zstart[1] - zend[1] * zstart[0];
    const double u = B * d / (2.0 * std::sqrt(2.0 * E));
    return 2.0 * E / B * std::asin(u) +
           0.5 * d * std::sqrt(2.0 * E - 0.25 * B * B * d * d) - 0.5 * B * cross;
}

} // namespace detail

/// The registry of verification cases, in fixed execution order.
inline const std::vector<VerifyCase>& verify_registry() {
    static const std::vector<VerifyCase> cases = [] {
        std::vector<VerifyCase> reg;

        reg.push_back(
            {"sho-curvature", "oscillator curvature closed-form", 1e-10,
             [](std::uint64_t seed) {
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (double w : {0.5, 1.0, 2.0, 10.0}) {
                     auto model = make_sho(1, {w});
                     for (int rep = 0; rep < 5; ++rep) {
                         PhasePoint x{{detail::verify_uniform(seed, ctr++, -1.0, 1.0)},
                                      {detail::verify_uniform(seed, ctr++, -1.0, 1.0)}};
                         worst = std::max(worst, std::abs(curvature(model, x).R(0, 0) - w * w));
                     }
                 }
                 return worst;
             }});

        reg.push_back(
            {"inverted-sho-curvature", "oscillator curvature closed-form", 1e-10,
             [](std::uint64_t seed) {
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (double w : {0.5, 1.0, 2.0, 10.0}) {
                     auto model = make_inverted_sho({w});
                     for (int rep = 0; rep < 5; ++rep) {
                         PhasePoint x{{detail::verify_uniform(seed, ctr++, -1.0, 1.0)},
                                      {detail::verify_uniform(seed, ctr++, -1.0, 1.0)}};
                         worst = std::max(worst, std::abs(curvature(model, x).R(0, 0) + w * w));
                     }
                 }
                 return worst;
             }});

        reg.push_back(
            {"constant-b-curvature", "magnetic curvature closed-form", 1e-10,
             [](std::uint64_t seed) {
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (double B : {0.1, 1.0, 5.0}) {
                     auto model = make_constant_b(B);
                     for (int rep = 0; rep < 10; ++rep) {
                         PhasePoint x;
                         for (int i = 0; i < 2; ++i)
                             x.q.push_back(detail::verify_uniform(seed, ctr++, -1.0, 1.0));
                         for (int i = 0; i < 2; ++i)
                             x.p.push_back(detail::verify_uniform(seed, ctr++, -1.0, 1.0));
                         CurvatureResult c = curvature(model, x);
                         for (int i = 0; i < 2; ++i)
                             for (int j = 0; j < 2; ++j) {
                                 const double want = i == j ? 0.25 * B * B : 0.0;
                                 worst = std::max(worst, std::abs(c.R(i, j) - want));
                             }
                     }
                 }
                 return worst;
             }});

        reg.push_back(
            {"free-eikonal", "free eikonal action closed-form", 1e-7,
             [](std::uint64_t seed) {
                 auto model = make_free(2);
                 // pinned point: unit separation at E = 1/2 gives distance 1
                 EikonalValue pin = eikonal_sigma(model, std::vector<double>{1.0, 0.0},
                                                  std::vector<double>{0.0, 0.0}, 0.5);
                 double worst = std::abs(pin.sigma - 1.0);
                 std::uint64_t ctr = 0;
                 for (int rep = 0; rep < 4; ++rep) {
                     std::vector<double> a{detail::verify_uniform(seed, ctr++, -0.5, 0.5),
                                           detail::verify_uniform(seed, ctr++, -0.5, 0.5)};
                     std::vector<double> b{a[0] + detail::verify_uniform(seed, ctr++, 0.3, 1.0),
                                           a[1] + detail::verify_uniform(seed, ctr++, 0.3, 1.0)};
                     const double E = detail::verify_uniform(seed, ctr++, 0.3, 1.2);
                     const double d = std::hypot(b[0] - a[0], b[1] - a[1]);
                     EikonalValue ev = eikonal_sigma(model, b, a, E);
                     const double closed = std::sqrt(2.0 * E) * d;
                     worst = std::max(worst, std::abs(ev.sigma - closed) / closed);
                 }
                 return worst;
             }});

        reg.push_back(
            {"constant-b-action", "magnetic eikonal action closed-form", 1e-6,
             [](std::uint64_t seed) {
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (double B : {0.8, 1.3}) {
                     auto model = make_constant_b(B);
                     for (int rep = 0; rep < 3; ++rep) {
                         std::vector<double> zs{detail::verify_uniform(seed, ctr++, -0.4, 0.4),
                                                detail::verify_uniform(seed, ctr++, -0.4, 0.4)};
                         std::vector<double> ze{
                             zs[0] + detail::verify_uniform(seed, ctr++, 0.2, 0.6),
                             zs[1] + detail::verify_uniform(seed, ctr++, 0.2, 0.6)};
                         const double T = detail::verify_uniform(seed, ctr++, 0.5, 1.2);
                         const double got = action_s(model, ze, zs, T);
                         worst = std::max(
                             worst, std::abs(got - detail::uniform_field_action(B, ze, zs, T)));
                         const double E = detail::verify_uniform(seed, ctr++, 0.6, 1.0);
                         EikonalValue ev = eikonal_sigma(model, ze, zs, E);
                         worst = std::max(
                             worst, std::abs(ev.sigma - detail::uniform_field_sigma(B, ze, zs, E)));
                     }
                 }
                 return worst;
             }});

        reg.push_back(
            {"sho-eikonal-bound", "oscillator eikonal bound", 1e-8,
             [](std::uint64_t seed) {
                 const double w = 1.2, E = 0.9;
                 auto model = make_sho(1, {w});
                 const double turn = std::sqrt(2.0 * E) / w;
                 const double cap = std::numbers::pi * E / w;
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (int rep = 0; rep < 6; ++rep) {
                     double a = detail::verify_uniform(seed, ctr++, -0.85 * turn, 0.85 * turn);
                     double b = detail::verify_uniform(seed, ctr++, -0.85 * turn, 0.85 * turn);
                     if (std::abs(a - b) < 0.1) b = a + (b >= a ? 0.1 : -0.1);
                     EikonalValue ev = eikonal_sigma(model, std::vector<double>{b},
                                                     std::vector<double>{a}, E);
                     worst = std::max(worst, ev.sigma - cap);
                 }
                 return std::max(worst, 0.0);
             }});

        reg.push_back({"riemannian-reduction-sphere", "riemannian sphere curvature reduction",
                       1e-8, [](std::uint64_t seed) {
                           return detail::reduction_residual(detail::verify_sphere_metric(), seed,
                                                             25, 0.6, 2.4, 0.0, 3.0);
                       }});

        reg.push_back({"riemannian-reduction-hyperbolic",
                       "riemannian hyperbolic curvature reduction", 1e-8,
                       [](std::uint64_t seed) {
                           return detail::reduction_residual(detail::verify_half_plane_metric(),
                                                             seed, 25, -1.0, 1.0, 0.5, 2.5);
                       }});

        reg.push_back(
            {"emd-density", "emd density quadrature closed-form", 1e-6,
             [](std::uint64_t seed) {
                 MetricField metric{2, metric_from_expressions({{"1 + q2^2", "sin(q1*q2)/4"},
                                                                {"sin(q1*q2)/4", "2 + cos(q1)"}},
                                                               2)};
                 auto A = vector_field_from_expressions({"sin(q2)/3", "q1*q2/5"}, 2);
                 auto phi = scalar_field_from_expression("cos(q1)*q2 + q1^2/4", 2);
                 auto model = make_emd(2, metric.g, A, phi, true);
                 double worst = 0.0;
                 std::uint64_t ctr = 0;
                 for (int rep = 0; rep < 6; ++rep) {
                     std::vector<double> q{detail::verify_uniform(seed, ctr++, -1.2, 1.2),
                                           detail::verify_uniform(seed, ctr++, -1.2, 1.2)};
                     DensityResult r = ricci_density(model, q, QuadratureSpec::hermite(6));
                     worst = std::max(
                         worst, std::abs(r.value - emd_density_closed_form(metric, A, phi, q)));
                 }
                 return worst;
             }});

        reg.push_back(
            {"stability-grid", "stability trap grid witness", 0.5,
             [](std::uint64_t) {
                 // counted violations; any nonzero count fails
                 double violations = 0.0;
                 for (int i = 0; i < 10; ++i)
                     for (int j = 0; j < 10; ++j)
                         for (int k = 0; k < 10; ++k)
                             for (int l = 0; l < 8; ++l) {
                                 const double k1 = -3.0 + 2.95 * i / 9.0;
                                 const double k2 = -3.0 + 2.95 * j / 9.0;
                                 const double k3 = -2.0 + 4.6 * k / 9.0;
                                 const double B = 4.0 * l / 7.0;
                                 StabilityReport r = assess(k1, k2, k3, B);
                                 if (r.curvature_positive && !r.marginal && !r.spectrally_stable)
                                     violations += 1.0;
                                 if (k3 < 0.0 && r.spectrally_stable) violations += 1.0;
                                 if (r.gyroscopic_criterion_met && !r.marginal &&
                                     !r.spectrally_stable)
                                     violations += 1.0;
                             }
                 StabilityReport witness = assess(-3.0, -0.5, 3.5, std::sqrt(8.0));
                 if (!witness.gyroscopic_criterion_met) violations += 1.0;
                 if (witness.curvature_positive) violations += 1.0;
                 if (!witness.spectrally_stable) violations += 1.0;
                 return violations;
             }});

        return reg;
    }();
    return cases;
}

/// Run every registry case whose name or tags contain the filter substring.
inline std::vector<VerifyOutcome> run_verification(const VerifyOptions& opt = {}) {
    std::vector<VerifyOutcome> out;
    for (const VerifyCase& c : verify_registry()) {
        if (!opt.filter.empty() && c.name.find(opt.filter) == std::string::npos &&
            c.tags.find(opt.filter) == std::string::npos)
            continue;
        VerifyOutcome o;
        o.name = c.name;
        o.tags = c.tags;
        o.tolerance = opt.tolerance_override.value_or(c.tolerance);
        o.residual = c.residual(opt.seed);
        o.passed = o.residual <= o.tolerance;
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace hamgeo
