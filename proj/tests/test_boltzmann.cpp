#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hamgeo/boltzmann.hpp"

using namespace hamgeo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

MetricField wavy2() {
    return {2, metric_from_expressions({{"1 + q2^2", "sin(q1*q2)/4"},
                                        {"sin(q1*q2)/4", "2 + cos(q1)"}}, 2)};
}

double sqrt_det_g(const MetricField& m, std::span<const double> q) {
    return std::sqrt(determinant(curvature_data(m, q).g));
}

double scalar_at(const ScalarFieldFn& phi, std::span<const double> q) {
    std::vector<Jet> qj;
    for (std::size_t k = 0; k < q.size(); ++k)
        qj.push_back(Jet::variable(static_cast<int>(q.size()), 0, static_cast<int>(k), q[k]));
    return phi(qj).value();
}

// Independent assembly of [R + F^2/4 + lap(phi)] e^{-phi} sqrt(g) from the
// classical-geometry oracle, duplicating nothing from the shipped closed form
// beyond curvature_data itself.
double density_by_hand(const MetricField& m, const VectorFieldFn& A, const ScalarFieldFn& phi,
                       std::span<const double> q) {
    const int n = m.n;
    CurvatureData geo = curvature_data(m, q);
    std::vector<Jet> q1, q2;
    for (int k = 0; k < n; ++k) {
        q1.push_back(Jet::variable(n, 1, k, q[k]));
        q2.push_back(Jet::variable(n, 2, k, q[k]));
    }
    double total = geo.scalar;
    if (A) {
        std::vector<Jet> a = A(q1);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l)
                        total += 0.25 * (a[k].deriv(i).value() - a[i].deriv(k).value()) *
                                 (a[l].deriv(j).value() - a[j].deriv(l).value()) *
                                 geo.ginv(k, l) * geo.ginv(i, j);
    }
    double weight = 1.0;
    if (phi) {
        Jet pj = phi(q2);
        weight = std::exp(-pj.value());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double cov = pj.deriv(i).deriv(j).value();
                for (int k = 0; k < n; ++k) cov -= geo.gamma(k, i, j) * pj.deriv(k).value();
                total += geo.ginv(i, j) * cov;
            }
    }
    return total * weight * std::sqrt(determinant(geo.g));
}

// Random smooth periodic field configurations: diagonally dominant metric
// plus gentle trigonometric vector and scalar fields.
struct FieldConfig {
    MetricField metric;
    VectorFieldFn a;
    ScalarFieldFn phi;
};

FieldConfig random_fields(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> amp(0.08, 0.2), base(1.2, 1.8), ph(0.0, 6.28);
    std::uniform_int_distribution<int> var(0, n - 1);

    std::vector<double> da(n), dph(n), db(n);
    std::vector<int> dv(n);
    for (int i = 0; i < n; ++i) {
        da[i] = amp(rng);
        dph[i] = ph(rng);
        db[i] = base(rng);
        dv[i] = var(rng);
    }
    std::vector<double> oa(n * n, 0.0), oph(n * n, 0.0);
    std::vector<int> ov(n * n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            oa[i * n + j] = 0.5 * amp(rng);
            oph[i * n + j] = ph(rng);
            ov[i * n + j] = var(rng);
        }
    MetricFn g = [=](std::span<const Jet> q) {
        Mat<Jet> m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = Jet::constant(q[0].nvars(), q[0].order(), 0.0);
        for (int i = 0; i < n; ++i) m(i, i) = db[i] + da[i] * cos(q[dv[i]] + dph[i]);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Jet off = oa[i * n + j] * sin(q[i] + q[ov[i * n + j]] + oph[i * n + j]);
                m(i, j) = off;
                m(j, i) = off;
            }
        return m;
    };

    std::vector<double> aa(n), aph(n);
    std::vector<int> av(n);
    for (int i = 0; i < n; ++i) {
        aa[i] = amp(rng);
        aph[i] = ph(rng);
        av[i] = var(rng);
    }
    VectorFieldFn a = [=](std::span<const Jet> q) {
        std::vector<Jet> out;
        for (int i = 0; i < n; ++i) out.push_back(aa[i] * sin(q[av[i]] + aph[i]));
        return out;
    };

    double pa = amp(rng), pph = ph(rng), pb = amp(rng), pph2 = ph(rng);
    int pv = var(rng), pv2 = var(rng);
    ScalarFieldFn phi = [=](std::span<const Jet> q) {
        return pa * cos(q[pv] + pph) + pb * sin(q[pv2] + pph2);
    };

    return {MetricField{n, g}, a, phi};
}

std::vector<double> rand_config_point(std::mt19937& rng, int n, double span = 1.2) {
    std::uniform_real_distribution<double> d(-span, span);
    std::vector<double> q(n);
    for (double& v : q) v = d(rng);
    return q;
}

} // namespace

TEST_CASE("hermite rule reproduces tabulated nodes and weights") {
    // Frozen oracle: roots of the degree-m recurrence polynomial located by
    // sign-scan bisection, weights from 2^{m-1} m! sqrt(pi) / (m H')^2-form;
    // the two smallest rules also verified by hand algebra.
    auto rule2 = detail::hermite_rule(2);
    CHECK(rule2.nodes[0] == Catch::Approx(-0.7071067811865476).margin(1e-14));
    CHECK(rule2.nodes[1] == Catch::Approx(0.7071067811865476).margin(1e-14));
    CHECK(rule2.weights[0] == Catch::Approx(0.8862269254527582).margin(1e-14));
    CHECK(rule2.weights[1] == Catch::Approx(0.8862269254527582).margin(1e-14));

    auto rule3 = detail::hermite_rule(3);
    CHECK(rule3.nodes[0] == Catch::Approx(-1.2247448713915892).margin(1e-13));
    CHECK(rule3.nodes[1] == Catch::Approx(0.0).margin(1e-13));
    CHECK(rule3.nodes[2] == Catch::Approx(1.2247448713915892).margin(1e-13));
    CHECK(rule3.weights[0] == Catch::Approx(0.2954089751509192).margin(1e-13));
    CHECK(rule3.weights[1] == Catch::Approx(1.1816359006036774).margin(1e-13));
    CHECK(rule3.weights[2] == Catch::Approx(0.2954089751509192).margin(1e-13));

    auto rule5 = detail::hermite_rule(5);
    CHECK(rule5.nodes[0] == Catch::Approx(-2.0201828704560856).margin(1e-13));
    CHECK(rule5.nodes[1] == Catch::Approx(-0.9585724646138185).margin(1e-13));
    CHECK(rule5.nodes[2] == Catch::Approx(0.0).margin(1e-13));
    CHECK(rule5.weights[0] == Catch::Approx(0.0199532420590459).margin(1e-13));
    CHECK(rule5.weights[1] == Catch::Approx(0.3936193231522411).margin(1e-13));
    CHECK(rule5.weights[2] == Catch::Approx(0.9453087204829418).margin(1e-13));

    // Gaussian moment ladder: E[y^{2k}] = (2k-1)!! for y ~ N(0,1), exact for
    // 2k <= 2m-1; odd moments vanish by symmetry.
    auto rule8 = detail::hermite_rule(8);
    const double dfact[8] = {1.0, 1.0, 3.0, 15.0, 105.0, 945.0, 10395.0, 135135.0};
    for (int k = 0; k <= 7; ++k) {
        double even = 0.0, odd = 0.0;
        for (int i = 0; i < 8; ++i) {
            double y = std::sqrt(2.0) * rule8.nodes[i];
            double w = rule8.weights[i] / std::sqrt(M_PI);
            even += w * std::pow(y, 2 * k);
            if (k > 0) odd += w * std::pow(y, 2 * k - 1);
        }
        CHECK(even == Catch::Approx(dfact[k]).epsilon(1e-12));
        // odd moments vanish by cancellation of +/- node pairs, so the
        // roundoff floor scales with the size of the cancelled terms
        CHECK(std::abs(odd) < 1e-12 * (1.0 + dfact[k]));
    }

    CHECK_THROWS_AS(detail::hermite_rule(1), InvalidArgument);
}

TEST_CASE("volume element matches kinetic closed forms") {
    std::mt19937 rng(19);

    SECTION("pure kinetic term: the metric volume factor") {
        MetricField m = wavy2();
        auto model = make_riemannian(2, m.g);
        for (int rep = 0; rep < 5; ++rep) {
            auto q = rand_config_point(rng, 2);
            double expected = sqrt_det_g(m, q);
            DensityResult analytic = boltzmann_volume(model, q);
            DensityResult hermite = boltzmann_volume(model, q, QuadratureSpec::hermite(4));
            CHECK(analytic.value == Catch::Approx(expected).epsilon(1e-12));
            CHECK(hermite.value == Catch::Approx(expected).epsilon(1e-12));
            CHECK(analytic.method == QuadratureMethod::analytic_gaussian);
            CHECK(hermite.method == QuadratureMethod::gauss_hermite);
            CHECK(hermite.estimated_error < 1e-10);
        }
    }

    SECTION("kinetic term with gauge and scalar fields") {
        MetricField m = wavy2();
        auto A = vector_field_from_expressions({"sin(q2)/3", "q1*q2/5"}, 2);
        auto phi = scalar_field_from_expression("cos(q1)*q2 + q1^2/4", 2);
        auto model = make_emd(2, m.g, A, phi, true);
        for (int rep = 0; rep < 5; ++rep) {
            auto q = rand_config_point(rng, 2);
            double expected = std::exp(-scalar_at(phi, q)) * sqrt_det_g(m, q);
            CHECK(boltzmann_volume(model, q).value == Catch::Approx(expected).epsilon(1e-12));
        }
    }

    SECTION("one-dimensional oscillator weight") {
        double w = 1.3;
        auto sho = make_sho(1, {w});
        for (double q : {-1.0, 0.0, 0.7, 2.0}) {
            std::vector<double> qv{q};
            double expected = std::exp(-0.5 * w * w * q * q);
            CHECK(boltzmann_volume(sho, qv).value == Catch::Approx(expected).epsilon(1e-13));
        }
    }
}

TEST_CASE("momentum integrals reject what they cannot integrate") {
    std::vector<double> q{0.3};

    SECTION("quartic momentum dependence is detected, not mis-integrated") {
        // pure quartic: the momentum Hessian at the center is singular
        auto quartic = make_expression_model("p1^4/4 + q1^2/2", 1, {}, true);
        CHECK_THROWS_MATCHES(boltzmann_volume(quartic, q), NotIntegrable,
                             MessageMatches(ContainsSubstring("positive-definite")));
        // quartic hiding behind a healthy quadratic part: only the far-point
        // probe can see it
        auto hidden = make_expression_model("p1^2/2 + p1^4/4 + q1^2/2", 1, {}, true);
        CHECK_THROWS_MATCHES(boltzmann_volume(hidden, q), NotIntegrable,
                             MessageMatches(ContainsSubstring("not quadratic")));
    }

    SECTION("models without the quadratic flag are rejected up front") {
        auto unflagged = make_expression_model("p1^2/2 + q1^2/2", 1, {}, false);
        CHECK_THROWS_MATCHES(boltzmann_volume(unflagged, q), NotIntegrable,
                             MessageMatches(ContainsSubstring("flagged")));
    }

    SECTION("concave momentum direction means a divergent weight") {
        auto concave = make_expression_model("-p1^2/2 + q1^2/2", 1, {}, true);
        CHECK_THROWS_MATCHES(boltzmann_volume(concave, q), NotIntegrable,
                             MessageMatches(ContainsSubstring("positive-definite")));
    }

    SECTION("spec validation") {
        auto sho = make_sho(1, {1.0});
        CHECK_THROWS_AS(boltzmann_volume(sho, q, QuadratureSpec::hermite(1)), InvalidArgument);
        CHECK_THROWS_AS(boltzmann_volume(sho, q, QuadratureSpec::mc(1, 0)), InvalidArgument);
        QuadratureSpec bad;
        bad.tolerance = 0.0;
        CHECK_THROWS_AS(boltzmann_volume(sho, q, bad), InvalidArgument);
        CHECK_THROWS_AS(ricci_density(sho, q, QuadratureSpec::analytic()), InvalidArgument);
        std::vector<double> wrong{0.1, 0.2};
        CHECK_THROWS_AS(boltzmann_volume(sho, wrong), InvalidArgument);
    }
}

TEST_CASE("gaussian second moments reproduce the metric") {
    // The spread of p - A under e^{-H} is the covariant metric itself,
    // weighted by the volume factor: E-integral = e^{-phi} sqrt(g) g_kl.
    MetricField m = wavy2();
    auto A = vector_field_from_expressions({"sin(q2)/3", "q1*q2/5"}, 2);
    auto phi = scalar_field_from_expression("cos(q1)*q2 + q1^2/4", 2);
    auto model = make_emd(2, m.g, A, phi, true);
    std::mt19937 rng(23);
    for (int rep = 0; rep < 3; ++rep) {
        auto q = rand_config_point(rng, 2);
        CurvatureData geo = curvature_data(m, q);
        double weight = std::exp(-scalar_at(phi, q)) * std::sqrt(determinant(geo.g));
        std::vector<Jet> qj{Jet::variable(2, 0, 0, q[0]), Jet::variable(2, 0, 1, q[1])};
        std::vector<Jet> aj = A(qj);
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) {
                detail::MomentumFn f = [&aj, k, l](std::span<const double> p) {
                    return (p[k] - aj[k].value()) * (p[l] - aj[l].value());
                };
                DensityResult r =
                    detail::momentum_average(model, q, f, QuadratureSpec::hermite(4));
                CHECK(r.value == Catch::Approx(weight * geo.g(k, l)).margin(1e-10));
            }
    }
}

TEST_CASE("ricci density reduces to classical densities") {
    std::mt19937 rng(29);

    SECTION("pure kinetic term: curvature scalar times the volume factor") {
        for (MetricField m : {wavy2(),
                              MetricField{2, metric_from_expressions(
                                                 {{"1", "0"}, {"0", "sin(q1)^2"}}, 2)}}) {
            auto model = make_riemannian(2, m.g);
            for (int rep = 0; rep < 3; ++rep) {
                auto q = rand_config_point(rng, 2);
                if (m.g(std::vector<Jet>{Jet::variable(2, 0, 0, q[0]),
                                         Jet::variable(2, 0, 1, q[1])})(1, 1)
                        .value() < 0.05)
                    continue; // keep clear of the coordinate degeneracy
                double expected = scalar_curvature(m, q) * sqrt_det_g(m, q);
                DensityResult r = ricci_density(model, q, QuadratureSpec::hermite(4));
                CHECK(r.value == Catch::Approx(expected).margin(
                                     std::max(1e-8, 10.0 * r.estimated_error)));
            }
        }
    }

    SECTION("gauge field adds the quarter field-strength square") {
        MetricField m = wavy2();
        auto A = vector_field_from_expressions({"sin(q2)/3", "q1*q2/5"}, 2);
        auto model = make_magnetic_riemannian(2, m.g, A);
        for (int rep = 0; rep < 3; ++rep) {
            auto q = rand_config_point(rng, 2);
            double expected = density_by_hand(m, A, nullptr, q);
            DensityResult r = ricci_density(model, q, QuadratureSpec::hermite(4));
            CHECK(r.value == Catch::Approx(expected).margin(
                                 std::max(1e-8, 10.0 * r.estimated_error)));
        }
    }

    SECTION("oscillator: constant curvature times its own weight") {
        double w = 1.7;
        auto sho = make_sho(1, {w});
        for (double q : {-1.0, 0.3, 2.0}) {
            std::vector<double> qv{q};
            DensityResult r = ricci_density(sho, qv, QuadratureSpec::hermite(3));
            CHECK(r.value ==
                  Catch::Approx(w * w * std::exp(-0.5 * w * w * q * q)).epsilon(1e-10));
        }
    }
}

TEST_CASE("ricci density matches the kinetic closed form on random fields") {
    std::mt19937 rng(31);
    for (int n : {2, 3}) {
        for (int config = 0; config < 10; ++config) {
            FieldConfig fc = random_fields(rng, n);
            auto model = make_emd(n, fc.metric.g, fc.a, fc.phi, true);
            const int points = n == 2 ? 2 : 1;
            for (int rep = 0; rep < points; ++rep) {
                auto q = rand_config_point(rng, n, 2.0);
                double closed = emd_density_closed_form(fc.metric, fc.a, fc.phi, q);
                CHECK(closed == Catch::Approx(density_by_hand(fc.metric, fc.a, fc.phi, q))
                                    .margin(1e-10));
                DensityResult r = ricci_density(model, q, QuadratureSpec::hermite(4));
                CHECK(r.value == Catch::Approx(closed).margin(
                                     std::max(1e-6, 10.0 * r.estimated_error)));
            }
        }
    }
}

TEST_CASE("monte carlo estimates are reproducible and consistent") {
    MetricField m = wavy2();
    auto A = vector_field_from_expressions({"sin(q2)/3", "q1*q2/5"}, 2);
    auto phi = scalar_field_from_expression("cos(q1)*q2/4 + q1^2/8", 2);
    auto model = make_emd(2, m.g, A, phi, true);
    std::vector<double> q{0.4, -0.6};

    SECTION("same seed, same bits") {
        DensityResult a = ricci_density(model, q, QuadratureSpec::mc(20000, 42));
        DensityResult b = ricci_density(model, q, QuadratureSpec::mc(20000, 42));
        CHECK(a.value == b.value);
        CHECK(a.estimated_error == b.estimated_error);
        DensityResult c = ricci_density(model, q, QuadratureSpec::mc(20000, 43));
        CHECK(c.value != a.value);
    }

    SECTION("estimate sits within three standard errors of the exact rule") {
        DensityResult gh = ricci_density(model, q, QuadratureSpec::hermite(6));
        DensityResult mc = ricci_density(model, q, QuadratureSpec::mc(40000, 7));
        CHECK(mc.estimated_error > 0.0);
        CHECK(std::abs(mc.value - gh.value) < 3.0 * mc.estimated_error);

        // the volume integrand is constant once the Gaussian profile is
        // factored out, so sampling reproduces it exactly with zero spread
        DensityResult va = boltzmann_volume(model, q);
        DensityResult vm = boltzmann_volume(model, q, QuadratureSpec::mc(40000, 7));
        CHECK(std::abs(vm.value - va.value) <= 3.0 * vm.estimated_error);
    }
}

TEST_CASE("closed-form density special cases") {
    SECTION("flat space, no fields") {
        MetricField flat{2, flat_metric(2)};
        std::vector<double> q{0.3, -1.1};
        CHECK(std::abs(emd_density_closed_form(flat, nullptr, nullptr, q)) < 1e-12);
    }

    SECTION("flat space, quadratic well: the spring constant survives") {
        double k = 0.8;
        MetricField flat{1, flat_metric(1)};
        auto phi = scalar_field_from_expression("w*q1^2/2", 1, {{"w", k}});
        for (double q : {-0.5, 0.0, 1.2}) {
            std::vector<double> qv{q};
            CHECK(emd_density_closed_form(flat, nullptr, phi, qv) ==
                  Catch::Approx(k * std::exp(-0.5 * k * q * q)).epsilon(1e-12));
        }
    }

    SECTION("planar well: the trace of the spring matrix") {
        double k = 0.8;
        MetricField flat{2, flat_metric(2)};
        auto phi = scalar_field_from_expression("w*(q1^2 + q2^2)/2", 2, {{"w", k}});
        std::vector<double> q{0.4, -0.2};
        double expected = 2.0 * k * std::exp(-0.5 * k * (q[0] * q[0] + q[1] * q[1]));
        CHECK(emd_density_closed_form(flat, nullptr, phi, q) ==
              Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("action comparison on a periodic box") {
    auto metric3 = metric_from_expressions({{"1.4 + cos(q2)/5", "sin(q1 + q2)/10", "0"},
                                            {"sin(q1 + q2)/10", "1.3 + sin(q3)/6", "0"},
                                            {"0", "0", "1.5 + cos(q1)/7"}}, 3);
    auto A3 = vector_field_from_expressions({"sin(q2)/5", "cos(q3)/4", "sin(q1)/6"}, 3);

    SECTION("constant scalar field: the rescaling is exact, no kinetic term") {
        auto phi0 = scalar_field_from_expression("2/5", 3);
        TorusGridSpec grid;
        grid.points_per_axis = 8;
        grid.momentum = QuadratureSpec::hermite(2);
        ActionCompareResult r = action_integral_compare({3, metric3}, A3, phi0, grid);
        CHECK(r.closed_vs_conformal < 1e-8 * (1.0 + std::abs(r.closed_form_route)));
        CHECK(r.momentum_vs_closed < 1e-8 * (1.0 + std::abs(r.closed_form_route)));
        CHECK(std::isnan(r.fitted_coefficient));
    }

    SECTION("flat box with a gentle scalar field") {
        auto phi = scalar_field_from_expression("cos(q1)/3 + sin(q2)/4", 3);
        TorusGridSpec grid;
        grid.points_per_axis = 8;
        grid.momentum = QuadratureSpec::hermite(2);
        ActionCompareResult r =
            action_integral_compare({3, flat_metric(3)}, nullptr, phi, grid);
        CHECK(r.momentum_vs_closed < 1e-6 * (1.0 + std::abs(r.closed_form_route)));
        // Independent conformal-identity oracle: after the rescaling, the
        // kinetic coefficient that reproduces the closed form is -1/(n-2),
        // from the standard curvature transformation plus one integration by
        // parts; the stated (2n-1)/(n-2) assembly is reported, not asserted.
        CHECK(r.fitted_coefficient == Catch::Approx(-1.0).margin(1e-5));
        CHECK(r.conformal_coefficient == Catch::Approx(5.0).margin(1e-14));
    }

    SECTION("full configuration: all three routes reported") {
        auto phi = scalar_field_from_expression("cos(q1)/4 + sin(q2)/5", 3);
        TorusGridSpec grid;
        grid.points_per_axis = 8;
        grid.momentum = QuadratureSpec::hermite(2);
        ActionCompareResult r = action_integral_compare({3, metric3}, A3, phi, grid);
        CHECK(r.momentum_vs_closed < 1e-8 * (1.0 + std::abs(r.closed_form_route)));
        CHECK(r.fitted_coefficient == Catch::Approx(-1.0).margin(1e-5));
        CHECK(r.grid_refinement_delta < 1e-4);
        // the reported numbers stay internally consistent
        double identity = (r.conformal_route - r.closed_form_route) -
                          (r.conformal_coefficient - r.fitted_coefficient) * r.dilaton_kinetic;
        CHECK(std::abs(identity) < 1e-10 * (1.0 + std::abs(r.closed_form_route)));
        // the stated-coefficient residual is genuinely nonzero here; record it
        CHECK_NOFAIL(r.closed_vs_conformal < 1e-6);
    }

    SECTION("aliased fields are rejected before the expensive pass") {
        auto phi = scalar_field_from_expression("4*cos(2*q1)/5", 3);
        TorusGridSpec grid;
        grid.points_per_axis = 4;
        CHECK_THROWS_MATCHES(
            action_integral_compare({3, flat_metric(3)}, nullptr, phi, grid), NoConvergence,
            MessageMatches(ContainsSubstring("too coarse")));
    }

    SECTION("input guards") {
        TorusGridSpec grid;
        CHECK_THROWS_AS(action_integral_compare(wavy2(), nullptr, nullptr, grid),
                        InvalidArgument);
        grid.points_per_axis = 7;
        CHECK_THROWS_AS(
            action_integral_compare({3, flat_metric(3)}, nullptr, nullptr, grid),
            InvalidArgument);
        grid.points_per_axis = 8;
        grid.length = 0.0;
        CHECK_THROWS_AS(
            action_integral_compare({3, flat_metric(3)}, nullptr, nullptr, grid),
            InvalidArgument);
        grid.length = 2.0 * M_PI;
        grid.momentum = QuadratureSpec::analytic();
        CHECK_THROWS_AS(
            action_integral_compare({3, flat_metric(3)}, nullptr, nullptr, grid),
            InvalidArgument);
    }
}
