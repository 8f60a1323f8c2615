#pragma once

// Two-point boundary problems for convex Hamiltonians: find the orbit from
// Q' to Q in time T (shooting with linearized-flow sensitivities), evaluate
// the time-dependent action s_T(Q,Q'), and minimize E*T + s_T over T to get
// the fixed-energy distance sigma_E(Q,Q').  Also provides finite-difference
// residuals of the two Hamilton-Jacobi equations these functions satisfy,
// and a probe of the directional asymmetry of sigma.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgeo/dynamics.hpp"
#include "hamgeo/errors.hpp"
#include "hamgeo/geometry.hpp"
#include "hamgeo/model.hpp"

namespace hamgeo {

struct ShootOptions {
    double tol = 1e-10;       // terminal miss |q(T) - Q|
    int max_newton = 40;      // iterations per start
    bool multi_start = true;  // sphere ladder fallback when the guess fails
    IntegrateOptions integrate{}; // inner integrator settings
};

struct ShootingResult {
    std::vector<double> p0; // initial momentum at Q'
    Trajectory trajectory;  // orbit from (Q', p0) over [0, T]
    double miss = 0.0;      // terminal |q(T) - Q|
    int iterations = 0;     // Newton iterations used (all starts combined)
};

namespace detail {

/// Initial momentum giving velocity v at q: solves dH/dp(q, p) = v by a
/// damped Newton iteration on the strictly convex momentum map.
inline std::vector<double> momentum_for_velocity(const HamiltonianModel& m,
                                                 std::span<const double> q,
                                                 std::span<const double> v) {
    const int n = m.dim();
    std::vector<double> p(n, 0.0);
    for (int it = 0; it < 50; ++it) {
        DerivTable t(m, PhasePoint{std::vector<double>(q.begin(), q.end()), p});
        std::vector<double> r = t.grad_p();
        double rn = 0.0;
        for (int i = 0; i < n; ++i) {
            r[i] -= v[i];
            rn = std::max(rn, std::abs(r[i]));
        }
        if (rn < 1e-12) break;
        Mat<double> hpp = t.hess_pp();
        std::vector<int> perm;
        lu_factor(hpp, perm);
        for (double& x : r) x = -x;
        const std::vector<double> step = lu_solve(hpp, perm, r);
        for (int i = 0; i < n; ++i) p[i] += step[i];
    }
    return p;
}

/// Terminal state of one shot; the sensitivity matrix is computed lazily,
/// only when a Newton step is actually taken.
struct ShotState {
    Trajectory trajectory;
    std::vector<double> qT;
};

inline ShotState shoot_once(const HamiltonianModel& m, std::span<const double> q0,
                            std::span<const double> p0, double T,
                            const IntegrateOptions& opt) {
    Trajectory traj = integrate(
        m, PhasePoint{std::vector<double>(q0.begin(), q0.end()),
                      std::vector<double>(p0.begin(), p0.end())},
        T, opt);
    std::vector<double> qT = traj.final_state().q;
    return ShotState{std::move(traj), std::move(qT)};
}

/// d q(T) / d p0 from n linearized-flow columns along the shot orbit.
inline Mat<double> terminal_sensitivity(const Trajectory& traj) {
    const int n = traj.dim();
    std::vector<std::pair<std::vector<double>, std::vector<double>>> fields;
    for (int k = 0; k < n; ++k) {
        std::vector<double> xi(n, 0.0), pi(n, 0.0);
        pi[k] = 1.0;
        fields.push_back({xi, pi});
    }
    std::vector<JacobiField> jf = jacobi_evolve_many(traj, fields);
    Mat<double> S(n, n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) S(i, k) = jf[k].xi.back()[i];
    return S;
}

inline void check_sensitivity_rank(const Mat<double>& S) {
    const int n = S.rows();
    Mat<double> sts(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += S(k, i) * S(k, j);
            sts(i, j) = s;
        }
    std::vector<double> eigs;
    symmetric_eigen(sts, eigs, nullptr);
    double smin = std::sqrt(std::max(eigs.front(), 0.0));
    double smax = std::sqrt(std::max(eigs.back(), 0.0));
    if (smin <= 1e-10 * std::max(1.0, smax))
        throw SingularSensitivity(
            "terminal position is insensitive to some momentum direction "
            "(conjugate point); smallest singular value " +
            std::to_string(smin));
}

} // namespace detail

/// Solves q(0) = Q', q(T) = Q by Newton iteration on the initial momentum,
/// using linearized-flow columns as the Jacobian.  When the velocity-match
/// guess fails, retries from momenta on spheres of increasing radius.
inline ShootingResult shoot(const HamiltonianModel& model, std::span<const double> q_start,
                            std::span<const double> q_end, double T,
                            std::optional<std::vector<double>> p0_guess = std::nullopt,
                            const ShootOptions& opt = {}) {
    const int n = model.dim();
    if (static_cast<int>(q_start.size()) != n || static_cast<int>(q_end.size()) != n)
        throw InvalidArgument("endpoint dimension does not match the model");
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("duration must be positive");
    if (p0_guess && static_cast<int>(p0_guess->size()) != n)
        throw InvalidArgument("momentum guess dimension does not match the model");

    IntegrateOptions iopt = opt.integrate;
    if (iopt.h_max <= 0.0) iopt.h_max = T / 8;

    // Candidate starting momenta: the caller's guess or the velocity-match
    // guess first, then a deterministic ladder of spheres.
    std::vector<std::vector<double>> starts;
    if (p0_guess) {
        starts.push_back(*p0_guess);
    } else {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) v[i] = (q_end[i] - q_start[i]) / T;
        starts.push_back(detail::momentum_for_velocity(model, q_start, v));
    }
    if (opt.multi_start) {
        double vnorm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = (q_end[i] - q_start[i]) / T;
            vnorm2 += v * v;
        }
        double base = std::max(0.5 * vnorm2, 1e-2);
        std::vector<std::vector<double>> dirs;
        for (int i = 0; i < n; ++i)
            for (double s : {1.0, -1.0}) {
                std::vector<double> d(n, 0.0);
                d[i] = s;
                dirs.push_back(d);
            }
        {
            std::vector<double> d(n, 1.0 / std::sqrt(double(n)));
            dirs.push_back(d);
            if (n > 1) {
                d[0] = -d[0];
                dirs.push_back(d);
            }
        }
        for (double mult : {1.0, 2.0, 4.0, 8.0, 0.5, 0.25}) {
            double r = std::sqrt(2.0 * base * mult);
            for (const auto& d : dirs) {
                std::vector<double> p(n);
                for (int i = 0; i < n; ++i) p[i] = r * d[i];
                starts.push_back(std::move(p));
            }
        }
    }

    double best_miss = std::numeric_limits<double>::infinity();
    int total_iters = 0;
    bool singular_seen = false;
    for (const auto& start : starts) {
        std::vector<double> p0 = start;
        int budget = opt.max_newton;
        std::optional<detail::ShotState> shot;
        try {
            shot = detail::shoot_once(model, q_start, p0, T, iopt);
        } catch (const Error&) {
            continue; // integration failed from this start
        }
        while (budget-- > 0) {
            ++total_iters;
            std::vector<double> missv(n);
            double miss = 0.0;
            for (int i = 0; i < n; ++i) {
                missv[i] = shot->qT[i] - q_end[i];
                miss += missv[i] * missv[i];
            }
            miss = std::sqrt(miss);
            best_miss = std::min(best_miss, miss);
            if (miss <= opt.tol)
                return ShootingResult{p0, std::move(shot->trajectory), miss, total_iters};
            Mat<double> S = detail::terminal_sensitivity(shot->trajectory);
            try {
                detail::check_sensitivity_rank(S);
            } catch (const SingularSensitivity&) {
                singular_seen = true;
                break;
            }
            std::vector<int> perm;
            lu_factor(S, perm);
            std::vector<double> rhs = missv;
            for (double& x : rhs) x = -x;
            const std::vector<double> delta = lu_solve(S, perm, rhs);
            // Backtracking: accept the first scaled update that reduces the miss.
            bool improved = false;
            double scale = 1.0;
            for (int bt = 0; bt < 8; ++bt, scale *= 0.5) {
                std::vector<double> trial = p0;
                for (int i = 0; i < n; ++i) trial[i] += scale * delta[i];
                std::optional<detail::ShotState> next;
                try {
                    next = detail::shoot_once(model, q_start, trial, T, iopt);
                } catch (const Error&) {
                    continue;
                }
                double trial_miss = 0.0;
                for (int i = 0; i < n; ++i) {
                    double d = next->qT[i] - q_end[i];
                    trial_miss += d * d;
                }
                trial_miss = std::sqrt(trial_miss);
                if (trial_miss < miss || trial_miss <= opt.tol) {
                    p0 = std::move(trial);
                    shot = std::move(next);
                    improved = true;
                    break;
                }
            }
            if (!improved) break; // stalled; try the next start
        }
        if (!opt.multi_start) break;
    }
    if (singular_seen)
        throw SingularSensitivity(
            "terminal position is insensitive to the initial momentum "
            "(conjugate point) for the requested time");
    throw NoConvergence("shooting failed to meet the endpoint; best miss " +
                            std::to_string(best_miss),
                        best_miss);
}

/// Action s_T(Q, Q') of the orbit from Q' to Q in time T.
inline double action_s(const HamiltonianModel& model, std::span<const double> q_end,
                       std::span<const double> q_start, double T,
                       std::optional<std::vector<double>> p0_guess = std::nullopt,
                       const ShootOptions& opt = {}) {
    return action_integral(shoot(model, q_start, q_end, T, std::move(p0_guess), opt).trajectory);
}

struct EikonalValue {
    double sigma = 0.0;      // E*T + s_T at the stationary time
    double t_star = 0.0;     // stationary time
    double s_t = 0.0;        // action at the stationary time
    double bracket_lo = 0.0; // time bracket the minimizer was found in
    double bracket_hi = 0.0;
    std::vector<double> p0;  // initial momentum of the minimizing orbit
};

struct EikonalOptions {
    double scan_lo = 0.25;     // scan starts at scan_lo * (free-flight time)
    double scan_factor = 1.35; // geometric scan spacing
    int scan_points = 28;
    double stationarity_tol = 1e-6;
    ShootOptions shoot{};
};

/// Fixed-energy distance sigma_E(Q,Q') = min_T [E T + s_T(Q,Q')], following
/// a single smooth branch of s_T by warm-started continuation in T.
inline EikonalValue eikonal_sigma(const HamiltonianModel& model, std::span<const double> q_end,
                                  std::span<const double> q_start, double E,
                                  const EikonalOptions& opt = {}) {
    const int n = model.dim();
    if (static_cast<int>(q_start.size()) != n || static_cast<int>(q_end.size()) != n)
        throw InvalidArgument("endpoint dimension does not match the model");
    if (!(E > 0.0) || !std::isfinite(E)) throw InvalidArgument("energy must be positive");
    double dist = 0.0;
    for (int i = 0; i < n; ++i) dist += (q_end[i] - q_start[i]) * (q_end[i] - q_start[i]);
    dist = std::sqrt(dist);
    if (dist < 1e-12) throw InvalidArgument("endpoints coincide");

    const double t_scale = dist / std::sqrt(2.0 * E);
    std::optional<std::vector<double>> warm;

    struct Eval {
        double f = 0.0, s = 0.0, energy = 0.0;
        std::vector<double> p0;
    };
    auto evaluate = [&](double T) -> std::optional<Eval> {
        try {
            // Globalize only the cold first shot; warm-started evaluations
            // must stay on the smooth branch reached by continuation.
            ShootOptions so = opt.shoot;
            if (warm) so.multi_start = false;
            ShootingResult r = shoot(model, q_start, q_end, T, warm, so);
            warm = r.p0;
            Eval e;
            e.s = action_integral(r.trajectory);
            e.f = E * T + e.s;
            e.energy = r.trajectory.energies().front();
            e.p0 = r.p0;
            return e;
        } catch (const Error&) {
            return std::nullopt;
        }
    };

    // Scan a geometric grid of times for an interior minimum of E T + s_T.
    std::vector<double> ts;
    std::vector<std::optional<Eval>> fs;
    int bracket = -1;
    for (int k = 0; k < opt.scan_points; ++k) {
        double T = t_scale * opt.scan_lo * std::pow(opt.scan_factor, k);
        ts.push_back(T);
        fs.push_back(evaluate(T));
        std::size_t i = fs.size();
        if (i >= 3 && fs[i - 3] && fs[i - 2] && fs[i - 1] &&
            fs[i - 2]->f < fs[i - 3]->f && fs[i - 2]->f < fs[i - 1]->f) {
            bracket = static_cast<int>(i) - 2;
            break;
        }
        // Once the branch has ended (two consecutive failures after a
        // success), scanning further only wastes shots.
        if (i >= 3 && fs[i - 3] && !fs[i - 2] && !fs[i - 1]) break;
    }
    if (bracket < 0)
        throw NoBracket("no stationary time for the requested energy in the scan range");

    double a = ts[bracket - 1], b = ts[bracket + 1];
    const double lo = a, hi = b;

    // Golden-section localization on the bracket.
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    std::optional<Eval> f1 = evaluate(x1), f2 = evaluate(x2);
    for (int it = 0; it < 40 && (b - a) > 1e-3 * t_scale; ++it) {
        if (!f1 || !f2) throw NoBracket("branch of the action ended inside the bracket");
        if (f1->f < f2->f) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = evaluate(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = evaluate(x2);
        }
    }

    // The minimizer satisfies E = E_shot(T): polish by a bracketed secant on
    // the orbit energy, which equals -ds_T/dT.
    double ta = a, tb = b;
    std::optional<Eval> ea = evaluate(ta), eb = evaluate(tb);
    if (!ea || !eb) throw NoBracket("branch of the action ended inside the bracket");
    double t_star = 0.5 * (ta + tb);
    std::optional<Eval> best;
    for (int it = 0; it < 30; ++it) {
        double ga = ea->energy - E, gb = eb->energy - E;
        double tn;
        if (std::abs(gb - ga) > 1e-300) {
            tn = tb - gb * (tb - ta) / (gb - ga);
            if (!(tn > std::min(ta, tb) && tn < std::max(ta, tb)))
                tn = 0.5 * (ta + tb);
        } else {
            tn = 0.5 * (ta + tb);
        }
        std::optional<Eval> en = evaluate(tn);
        if (!en) break;
        best = en;
        t_star = tn;
        if (std::abs(en->energy - E) <= 1e-9 * (1.0 + std::abs(E))) break;
        // keep the sign change between the endpoints
        if ((en->energy - E) * ga < 0.0) {
            tb = tn;
            eb = en;
        } else {
            ta = tn;
            ea = en;
        }
        if (std::abs(tb - ta) < 1e-14 * t_scale) break;
    }
    if (!best) throw NoBracket("stationary-time refinement could not hold the branch");
    // A bracket around a branch discontinuity has no stationary point: the
    // orbit energy never matches the requested energy there.
    if (std::abs(best->energy - E) > 1e-6 * (1.0 + std::abs(E)))
        throw NoBracket("no stationary time on the smooth branch for the requested energy");

    // Stationarity of E T + s_T, by central differences of s_T.
    const double h = 1e-4 * t_star;
    std::optional<Eval> sp = evaluate(t_star + h), sm = evaluate(t_star - h);
    if (sp && sm) {
        double dsdt = (sp->s - sm->s) / (2 * h);
        if (std::abs(E + dsdt) > opt.stationarity_tol * (1.0 + std::abs(E)))
            throw NoConvergence("stationarity residual " + std::to_string(std::abs(E + dsdt)) +
                                    " exceeds tolerance at the minimizing time",
                                std::abs(E + dsdt));
    }

    EikonalValue out;
    out.t_star = t_star;
    out.s_t = best->s;
    out.sigma = E * t_star + best->s;
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    out.p0 = best->p0;
    return out;
}

enum class HjMode { timedep, stationary };

/// Residual of the Hamilton-Jacobi equation satisfied by an action function,
/// from central differences of the supplied field around Q.
///   timedep:    |ds/dt + H(Q, ds/dQ)|   for s(q, t) at fixed t
///   stationary: |H(Q, dsigma/dQ) - E|   for sigma(q), t argument ignored
inline double hj_residual(const HamiltonianModel& model,
                          const std::function<double(std::span<const double>, double)>& field,
                          std::span<const double> Q, double t_or_E, HjMode mode,
                          double h = 1e-4) {
    const int n = model.dim();
    if (static_cast<int>(Q.size()) != n)
        throw InvalidArgument("stencil point dimension does not match the model");
    if (!field) throw InvalidArgument("hj_residual needs a field callable");
    const double t = (mode == HjMode::timedep) ? t_or_E : 0.0;
    std::vector<double> grad(n), qp(Q.begin(), Q.end());
    for (int i = 0; i < n; ++i) {
        qp[i] = Q[i] + h;
        double fp = field(qp, t);
        qp[i] = Q[i] - h;
        double fm = field(qp, t);
        qp[i] = Q[i];
        grad[i] = (fp - fm) / (2 * h);
    }
    double hval = model(Q, grad);
    if (mode == HjMode::timedep) {
        double dsdt = (field(Q, t + h) - field(Q, t - h)) / (2 * h);
        return std::abs(dsdt + hval);
    }
    return std::abs(hval - t_or_E);
}

struct SymmetryProbe {
    double forward = 0.0;  // sigma_E(Q, Q')
    double reverse = 0.0;  // sigma_E(Q', Q)
    double difference = 0.0;
};

/// Compares the two orientations of the fixed-energy distance.  Models with
/// H(q,p) = H(q,-p) must give a symmetric distance; magnetic terms break it.
inline SymmetryProbe symmetry_probe(const HamiltonianModel& model, std::span<const double> q_end,
                                    std::span<const double> q_start, double E,
                                    const EikonalOptions& opt = {}) {
    SymmetryProbe probe;
    probe.forward = eikonal_sigma(model, q_end, q_start, E, opt).sigma;
    probe.reverse = eikonal_sigma(model, q_start, q_end, E, opt).sigma;
    probe.difference = std::abs(probe.forward - probe.reverse);
    return probe;
}

} // namespace hamgeo
