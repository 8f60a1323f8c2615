#pragma once

// Hamiltonian flow: adaptive high-order integration of q' = dH/dp,
// p' = -dH/dq, linearized (Jacobi) fields along a stored orbit, the
// covariant rate of a variation vector, and the second-variation functional
// in raw and covariant forms.
//
// The workhorse is an embedded Runge-Kutta pair of orders 7 and 8
// (thirteen stages), advanced on the order-8 solution.  Dense output
// re-integrates a single step from the nearest stored grid node, so queried
// states carry the same accuracy as the grid itself.  A fixed-step implicit
// midpoint integrator is available for long-horizon runs where symplectic
// behaviour matters more than raw order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/geometry.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"
#include "hamgeo/model.hpp"

namespace hamgeo {

namespace detail {

struct Rk78Tableau {
    static constexpr int stages = 13;
    double c[13];
    double a[13][12];
    double b7[13];
    double b8[13];
};

inline const Rk78Tableau& rk78() {
    static const Rk78Tableau t = [] {
        Rk78Tableau t{};
        const double c[13] = {0.0,       2.0 / 27, 1.0 / 9, 1.0 / 6, 5.0 / 12, 0.5,
                              5.0 / 6,   1.0 / 6,  2.0 / 3, 1.0 / 3, 1.0,      0.0,
                              1.0};
        std::copy(std::begin(c), std::end(c), std::begin(t.c));
        auto& a = t.a;
        a[1][0] = 2.0 / 27;
        a[2][0] = 1.0 / 36, a[2][1] = 1.0 / 12;
        a[3][0] = 1.0 / 24, a[3][2] = 1.0 / 8;
        a[4][0] = 5.0 / 12, a[4][2] = -25.0 / 16, a[4][3] = 25.0 / 16;
        a[5][0] = 1.0 / 20, a[5][3] = 0.25, a[5][4] = 0.2;
        a[6][0] = -25.0 / 108, a[6][3] = 125.0 / 108, a[6][4] = -65.0 / 27,
        a[6][5] = 125.0 / 54;
        a[7][0] = 31.0 / 300, a[7][4] = 61.0 / 225, a[7][5] = -2.0 / 9,
        a[7][6] = 13.0 / 900;
        a[8][0] = 2.0, a[8][3] = -53.0 / 6, a[8][4] = 704.0 / 45, a[8][5] = -107.0 / 9,
        a[8][6] = 67.0 / 90, a[8][7] = 3.0;
        a[9][0] = -91.0 / 108, a[9][3] = 23.0 / 108, a[9][4] = -976.0 / 135,
        a[9][5] = 311.0 / 54, a[9][6] = -19.0 / 60, a[9][7] = 17.0 / 6,
        a[9][8] = -1.0 / 12;
        a[10][0] = 2383.0 / 4100, a[10][3] = -341.0 / 164, a[10][4] = 4496.0 / 1025,
        a[10][5] = -301.0 / 82, a[10][6] = 2133.0 / 4100, a[10][7] = 45.0 / 82,
        a[10][8] = 45.0 / 164, a[10][9] = 18.0 / 41;
        a[11][0] = 3.0 / 205, a[11][5] = -6.0 / 41, a[11][6] = -3.0 / 205,
        a[11][7] = -3.0 / 41, a[11][8] = 3.0 / 41, a[11][9] = 6.0 / 41;
        a[12][0] = -1777.0 / 4100, a[12][3] = -341.0 / 164, a[12][4] = 4496.0 / 1025,
        a[12][5] = -289.0 / 82, a[12][6] = 2193.0 / 4100, a[12][7] = 51.0 / 82,
        a[12][8] = 33.0 / 164, a[12][9] = 12.0 / 41, a[12][11] = 1.0;
        const double b7[13] = {41.0 / 840, 0, 0, 0, 0, 34.0 / 105, 9.0 / 35,
                               9.0 / 35,   9.0 / 280, 9.0 / 280, 41.0 / 840, 0, 0};
        const double b8[13] = {0, 0, 0, 0, 0, 34.0 / 105, 9.0 / 35, 9.0 / 35,
                               9.0 / 280, 9.0 / 280, 0, 41.0 / 840, 41.0 / 840};
        std::copy(std::begin(b7), std::end(b7), std::begin(t.b7));
        std::copy(std::begin(b8), std::end(b8), std::begin(t.b8));
        return t;
    }();
    return t;
}

/// One embedded step: fills the order-8 update and the (8 minus 7)
/// difference used as the local error estimate.
template <class Rhs>
void rk78_step(Rhs&& rhs, double t, std::span<const double> y, double h,
               std::span<double> y8, std::span<double> err) {
    const auto& tb = rk78();
    const std::size_t dim = y.size();
    std::vector<std::vector<double>> k(Rk78Tableau::stages, std::vector<double>(dim));
    std::vector<double> work(dim);
    rhs(t, y, std::span<double>(k[0]));
    for (int s = 1; s < Rk78Tableau::stages; ++s) {
        for (std::size_t i = 0; i < dim; ++i) {
            double acc = y[i];
            for (int j = 0; j < s; ++j)
                if (tb.a[s][j] != 0.0) acc += h * tb.a[s][j] * k[j][i];
            work[i] = acc;
        }
        rhs(t + tb.c[s] * h, std::span<const double>(work), std::span<double>(k[s]));
    }
    for (std::size_t i = 0; i < dim; ++i) {
        double v8 = y[i], v7 = y[i];
        for (int s = 0; s < Rk78Tableau::stages; ++s) {
            if (tb.b8[s] != 0.0) v8 += h * tb.b8[s] * k[s][i];
            if (tb.b7[s] != 0.0) v7 += h * tb.b7[s] * k[s][i];
        }
        y8[i] = v8;
        err[i] = v8 - v7;
    }
}

/// Gradients of H at a raw state vector [q, p]; dy = (dH/dp, -dH/dq).
inline void hamilton_rhs(const HamiltonianModel& m, std::span<const double> y,
                         std::span<double> dy) {
    const int n = m.dim();
    PhasePoint x{std::vector<double>(y.begin(), y.begin() + n),
                 std::vector<double>(y.begin() + n, y.end())};
    Jet h = m.eval_jet(x, 1);
    std::span<const double> c = h.coeffs();
    for (int i = 0; i < n; ++i) {
        dy[i] = c[1 + n + i];  // degree-1 coefficient of p_i
        dy[n + i] = -c[1 + i]; // degree-1 coefficient of q_i
    }
}

inline double energy_of_state(const HamiltonianModel& m, std::span<const double> y) {
    const int n = m.dim();
    return m(std::span<const double>(y.data(), n), std::span<const double>(y.data() + n, n));
}

inline constexpr double kGl5Nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                        0.5384693101056831, 0.9061798459386640};
inline constexpr double kGl5Weights[5] = {0.2369268850561891, 0.4786286704993665,
                                          0.5688888888888889, 0.4786286704993665,
                                          0.2369268850561891};

} // namespace detail

struct IntegrateOptions {
    double tol = 1e-12;       // local error tolerance (absolute and relative)
    double energy_tol = 1e-9; // allowed drift of H relative to 1 + |H(0)|
    bool check_energy = true;
    double h_init = 0.0; // 0 picks a heuristic start
    double h_min = 1e-13;
    double h_max = 0.0; // 0 means unbounded
    std::size_t max_steps = 200000;
};

/// An integrated orbit: accepted grid, states, energies, and dense output.
class Trajectory {
public:
    Trajectory(HamiltonianModel model, std::vector<double> times,
               std::vector<std::vector<double>> states)
        : model_(std::move(model)), times_(std::move(times)), states_(std::move(states)) {
        energies_.reserve(times_.size());
        for (const auto& y : states_) energies_.push_back(detail::energy_of_state(model_, y));
    }

    const HamiltonianModel& model() const { return model_; }
    int dim() const { return model_.dim(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<std::vector<double>>& states() const { return states_; }
    const std::vector<double>& energies() const { return energies_; }
    double start_time() const { return times_.front(); }
    double end_time() const { return times_.back(); }
    double duration() const { return times_.back() - times_.front(); }

    PhasePoint point_at_node(std::size_t k) const {
        const int n = dim();
        return PhasePoint{std::vector<double>(states_[k].begin(), states_[k].begin() + n),
                          std::vector<double>(states_[k].begin() + n, states_[k].end())};
    }
    PhasePoint initial() const { return point_at_node(0); }
    PhasePoint final_state() const { return point_at_node(times_.size() - 1); }

    double max_energy_drift() const {
        double m = 0.0;
        for (double e : energies_) m = std::max(m, std::abs(e - energies_.front()));
        return m;
    }

    /// Dense output: one fresh integrator step from the grid node at or
    /// before t, so accuracy matches the accepted grid.
    PhasePoint state_at(double t) const {
        const double t0 = times_.front(), t1 = times_.back();
        const double slack = 1e-9 * (1.0 + std::abs(t1 - t0));
        if (t < t0 - slack || t > t1 + slack)
            throw InvalidArgument("time outside the integrated range");
        t = std::clamp(t, t0, t1);
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t k = (it == times_.begin()) ? 0 : (it - times_.begin() - 1);
        if (k >= times_.size() - 1) k = times_.size() - 2;
        if (t == times_[k]) return point_at_node(k);
        if (t == times_[k + 1]) return point_at_node(k + 1);
        const std::size_t dim2 = states_[k].size();
        std::vector<double> out(dim2), err(dim2);
        auto rhs = [this](double, std::span<const double> y, std::span<double> dy) {
            detail::hamilton_rhs(model_, y, dy);
        };
        detail::rk78_step(rhs, times_[k], std::span<const double>(states_[k]), t - times_[k],
                          std::span<double>(out), std::span<double>(err));
        const int n = dim();
        return PhasePoint{std::vector<double>(out.begin(), out.begin() + n),
                          std::vector<double>(out.begin() + n, out.end())};
    }

private:
    HamiltonianModel model_;
    std::vector<double> times_;
    std::vector<std::vector<double>> states_;
    std::vector<double> energies_;
};

/// Adaptive integration of Hamilton's equations over [0, T].
inline Trajectory integrate(const HamiltonianModel& model, const PhasePoint& x0, double T,
                            const IntegrateOptions& opt = {}) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("duration must be positive");
    if (x0.dim() != model.dim()) throw InvalidArgument("initial point dimension mismatch");
    const int n = model.dim();
    const std::size_t dim = 2 * static_cast<std::size_t>(n);

    std::vector<double> y(dim);
    std::copy(x0.q.begin(), x0.q.end(), y.begin());
    std::copy(x0.p.begin(), x0.p.end(), y.begin() + n);
    auto rhs = [&model](double, std::span<const double> yy, std::span<double> dy) {
        detail::hamilton_rhs(model, yy, dy);
    };

    double t = 0.0;
    double h = opt.h_init;
    if (h <= 0.0) {
        std::vector<double> f(dim);
        rhs(0.0, y, std::span<double>(f));
        double ny = 0.0, nf = 0.0;
        for (double v : y) ny = std::max(ny, std::abs(v));
        for (double v : f) nf = std::max(nf, std::abs(v));
        h = std::min(T, 0.05 * (1.0 + ny) / (1.0 + nf));
    }

    std::vector<double> times{0.0};
    std::vector<std::vector<double>> states{y};
    std::vector<double> ynew(dim), err(dim);
    std::size_t steps = 0;
    while (t < T) {
        if (++steps > opt.max_steps)
            throw StepFailure("step budget exhausted at t=" + std::to_string(t));
        if (opt.h_max > 0.0) h = std::min(h, opt.h_max);
        h = std::min(h, T - t);
        detail::rk78_step(rhs, t, std::span<const double>(y), h, std::span<double>(ynew),
                          std::span<double>(err));
        bool finite = true;
        for (double v : ynew)
            if (!std::isfinite(v)) finite = false;
        double norm = 0.0;
        if (finite) {
            for (std::size_t i = 0; i < dim; ++i) {
                double scale = opt.tol * (1.0 + std::max(std::abs(y[i]), std::abs(ynew[i])));
                double r = err[i] / scale;
                norm += r * r;
            }
            norm = std::sqrt(norm / static_cast<double>(dim));
        }
        if (finite && norm <= 1.0) {
            t += h;
            if (T - t <= 1e-15 * (1.0 + std::abs(T))) t = T;
            y = ynew;
            times.push_back(t);
            states.push_back(y);
            double grow = (norm > 0.0) ? 0.9 * std::pow(norm, -1.0 / 8.0) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            double shrink = finite ? std::clamp(0.9 * std::pow(norm, -1.0 / 8.0), 0.1, 0.7)
                                   : 0.1;
            h *= shrink;
            if (h < opt.h_min)
                throw StepFailure("step size underflow at t=" + std::to_string(t) +
                                  " (possible singularity or blow-up)");
        }
    }

    Trajectory traj(model, std::move(times), std::move(states));
    if (opt.check_energy) {
        double allowed = opt.energy_tol * (1.0 + std::abs(traj.energies().front()));
        if (traj.max_energy_drift() > allowed)
            throw StepFailure("energy drift " + std::to_string(traj.max_energy_drift()) +
                              " exceeds tolerance; tighten tol");
    }
    return traj;
}

/// Fixed-step implicit midpoint rule (symplectic, order 2); Newton solves
/// each stage with the analytic flow Jacobian.
inline Trajectory integrate_midpoint(const HamiltonianModel& model, const PhasePoint& x0,
                                     double T, int steps) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("duration must be positive");
    if (steps < 1) throw InvalidArgument("step count must be positive");
    if (x0.dim() != model.dim()) throw InvalidArgument("initial point dimension mismatch");
    const int n = model.dim();
    const int dim = 2 * n;
    const double h = T / steps;

    std::vector<double> y(dim);
    std::copy(x0.q.begin(), x0.q.end(), y.begin());
    std::copy(x0.p.begin(), x0.p.end(), y.begin() + n);
    std::vector<double> times{0.0};
    std::vector<std::vector<double>> states{y};

    std::vector<double> ynext(dim), mid(dim), f(dim), res(dim);
    for (int s = 0; s < steps; ++s) {
        ynext = y;
        bool converged = false;
        for (int it = 0; it < 50; ++it) {
            for (int i = 0; i < dim; ++i) mid[i] = 0.5 * (y[i] + ynext[i]);
            PhasePoint xm{std::vector<double>(mid.begin(), mid.begin() + n),
                          std::vector<double>(mid.begin() + n, mid.end())};
            Jet hj = model.eval_jet(xm, 2);
            detail::hamilton_rhs(model, mid, std::span<double>(f));
            double rmax = 0.0, ymax = 0.0;
            for (int i = 0; i < dim; ++i) {
                res[i] = ynext[i] - y[i] - h * f[i];
                rmax = std::max(rmax, std::abs(res[i]));
                ymax = std::max(ymax, std::abs(ynext[i]));
            }
            if (rmax <= 1e-13 * (1.0 + ymax)) {
                converged = true;
                break;
            }
            // flow Jacobian Df = [[H^i_j, H^{ij}], [-H_ij, -H^j_i]] at mid
            Mat<double> J(dim, dim);
            for (int i = 0; i < dim; ++i) J(i, i) = 1.0;
            auto pd = [&](std::initializer_list<int> up, std::initializer_list<int> lo) {
                std::vector<int> alpha(2 * n, 0);
                for (int u : up) alpha[n + u] += 1;
                for (int l : lo) alpha[l] += 1;
                return extract_partial(hj, alpha);
            };
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    J(i, j) -= 0.5 * h * pd({i}, {j});
                    J(i, n + j) -= 0.5 * h * pd({i, j}, {});
                    J(n + i, j) -= 0.5 * h * (-pd({}, {i, j}));
                    J(n + i, n + j) -= 0.5 * h * (-pd({j}, {i}));
                }
            std::vector<int> perm;
            lu_factor(J, perm);
            std::vector<double> rhs = res;
            for (double& v : rhs) v = -v;
            const std::vector<double> delta = lu_solve(J, perm, rhs);
            for (int i = 0; i < dim; ++i) ynext[i] += delta[i];
        }
        if (!converged)
            throw StepFailure("implicit midpoint Newton stalled at t=" +
                              std::to_string(times.back()));
        y = ynext;
        times.push_back(h * (s + 1));
        states.push_back(y);
    }
    return Trajectory(model, std::move(times), std::move(states));
}

/// A linearized-flow solution sampled on the trajectory grid.
struct JacobiField {
    std::vector<double> times;
    std::vector<std::vector<double>> xi; // xi(t_k), length n each
    std::vector<std::vector<double>> pi; // pi(t_k), length n each
};

/// Propagates m linearized fields along the stored orbit by re-integrating
/// each accepted step with the base and all variations coupled, so the
/// second derivatives of H are always evaluated on the true orbit.
inline std::vector<JacobiField> jacobi_evolve_many(
    const Trajectory& traj, std::span<const std::pair<std::vector<double>, std::vector<double>>>
                                initial_fields) {
    const int n = traj.dim();
    const std::size_t m = initial_fields.size();
    for (const auto& [xi0, pi0] : initial_fields)
        if (static_cast<int>(xi0.size()) != n || static_cast<int>(pi0.size()) != n)
            throw InvalidArgument("jacobi field initial data has wrong dimension");
    const HamiltonianModel& model = traj.model();
    const std::size_t dim = 2 * static_cast<std::size_t>(n) * (1 + m);

    auto rhs = [&model, n, m](double, std::span<const double> y, std::span<double> dy) {
        PhasePoint x{std::vector<double>(y.begin(), y.begin() + n),
                     std::vector<double>(y.begin() + n, y.begin() + 2 * n)};
        Jet h = model.eval_jet(x, 2);
        auto pd = [&](int a, int b, bool a_up, bool b_up) {
            std::vector<int> alpha(2 * n, 0);
            alpha[a_up ? n + a : a] += 1;
            alpha[b_up ? n + b : b] += 1;
            return extract_partial(h, alpha);
        };
        std::span<const double> c = h.coeffs();
        for (int i = 0; i < n; ++i) {
            dy[i] = c[1 + n + i];
            dy[n + i] = -c[1 + i];
        }
        for (std::size_t f = 0; f < m; ++f) {
            const double* xi = y.data() + 2 * n * (1 + f);
            const double* pi = xi + n;
            double* dxi = dy.data() + 2 * n * (1 + f);
            double* dpi = dxi + n;
            for (int i = 0; i < n; ++i) {
                double sx = 0.0, sp = 0.0;
                for (int j = 0; j < n; ++j) {
                    sx += pd(i, j, true, false) * xi[j] + pd(i, j, true, true) * pi[j];
                    sp += -pd(i, j, false, false) * xi[j] - pd(j, i, true, false) * pi[j];
                }
                dxi[i] = sx;
                dpi[i] = sp;
            }
        }
    };

    const auto& times = traj.times();
    const auto& states = traj.states();
    std::vector<double> y(dim), ynew(dim), err(dim);
    std::copy(states[0].begin(), states[0].end(), y.begin());
    for (std::size_t f = 0; f < m; ++f) {
        std::copy(initial_fields[f].first.begin(), initial_fields[f].first.end(),
                  y.begin() + 2 * n * (1 + f));
        std::copy(initial_fields[f].second.begin(), initial_fields[f].second.end(),
                  y.begin() + 2 * n * (1 + f) + n);
    }

    std::vector<JacobiField> out(m);
    auto record = [&](const std::vector<double>& state) {
        for (std::size_t f = 0; f < m; ++f) {
            out[f].xi.emplace_back(state.begin() + 2 * n * (1 + f),
                                   state.begin() + 2 * n * (1 + f) + n);
            out[f].pi.emplace_back(state.begin() + 2 * n * (1 + f) + n,
                                   state.begin() + 2 * n * (1 + f) + 2 * n);
        }
    };
    for (std::size_t f = 0; f < m; ++f) out[f].times = times;
    record(y);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        detail::rk78_step(rhs, times[k], std::span<const double>(y), times[k + 1] - times[k],
                          std::span<double>(ynew), std::span<double>(err));
        // keep the base part exactly on the stored orbit
        std::copy(states[k + 1].begin(), states[k + 1].end(), ynew.begin());
        y = ynew;
        record(y);
    }
    return out;
}

inline JacobiField jacobi_evolve(const Trajectory& traj, std::vector<double> xi0,
                                 std::vector<double> pi0) {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> fields{
        {std::move(xi0), std::move(pi0)}};
    return jacobi_evolve_many(traj, fields)[0];
}

/// Covariant rate of a variation vector: xi_ring = xi_dot + gamma xi.
inline std::vector<double> covariant_rate(const HamiltonianModel& model, const PhasePoint& x,
                                          std::span<const double> xi,
                                          std::span<const double> xi_dot) {
    const int n = model.dim();
    if (static_cast<int>(xi.size()) != n || static_cast<int>(xi_dot.size()) != n)
        throw InvalidArgument("variation vector has wrong dimension");
    DerivTable t(model, x);
    Mat<double> g = gamma(t);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        double s = xi_dot[i];
        for (int j = 0; j < n; ++j) s += g(i, j) * xi[j];
        out[i] = s;
    }
    return out;
}

/// A variation field along an orbit, as time-callables for xi and its rate.
struct VariationField {
    std::function<std::vector<double>(double)> xi;
    std::function<std::vector<double>(double)> xi_dot;
};

enum class VariationForm { raw, covariant };

/// Second variation of the action along the orbit:
///   raw:        int [ 1/2 G_ij xi'^i xi'^j - xi'^i xi^j G_ik H^k_j
///                     + 1/2 xi^i xi^j (-H_ij + H^k_i H^l_j G_kl) ] dt
///   covariant:  int [ 1/2 G_ij xiring^i xiring^j - 1/2 xi^i xi^j R_ij ] dt
/// by five-point Gauss-Legendre panels on each accepted step.
inline double second_variation(const Trajectory& traj, const VariationField& field,
                               VariationForm form) {
    if (!field.xi || !field.xi_dot) throw InvalidArgument("variation field needs xi and xi_dot");
    const int n = traj.dim();
    const HamiltonianModel& model = traj.model();
    double total = 0.0;
    const auto& times = traj.times();
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double t0 = times[k], t1 = times[k + 1];
        const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
        for (int g5 = 0; g5 < 5; ++g5) {
            const double t = mid + half * detail::kGl5Nodes[g5];
            PhasePoint x = traj.state_at(t);
            std::vector<double> xi = field.xi(t);
            std::vector<double> xd = field.xi_dot(t);
            if (static_cast<int>(xi.size()) != n || static_cast<int>(xd.size()) != n)
                throw GridMismatch("variation field dimension does not match the orbit");
            double integrand = 0.0;
            if (form == VariationForm::raw) {
                DerivTable tab(model, x);
                Mat<double> G = mass_inverse(tab);
                Mat<double> mixed = tab.mixed(), hqq = tab.hess_qq();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        integrand += 0.5 * G(i, j) * xd[i] * xd[j];
                        double gh = 0.0, hh = 0.0;
                        for (int kk = 0; kk < n; ++kk) {
                            gh += G(i, kk) * mixed(kk, j);
                            for (int l = 0; l < n; ++l)
                                hh += mixed(kk, i) * mixed(l, j) * G(kk, l);
                        }
                        integrand += -xd[i] * xi[j] * gh +
                                     0.5 * xi[i] * xi[j] * (-hqq(i, j) + hh);
                    }
            } else {
                CurvatureResult c = curvature(model, x);
                std::vector<double> ring(n);
                for (int i = 0; i < n; ++i) {
                    double s = xd[i];
                    for (int j = 0; j < n; ++j) s += c.gamma(i, j) * xi[j];
                    ring[i] = s;
                }
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        integrand += 0.5 * c.G(i, j) * ring[i] * ring[j] -
                                     0.5 * xi[i] * xi[j] * c.R(i, j);
            }
            total += half * detail::kGl5Weights[g5] * integrand;
        }
    }
    return total;
}

/// Action integral along the stored orbit: int (p q' - H) dt by the same
/// panel quadrature as the second variation.
inline double action_integral(const Trajectory& traj) {
    const int n = traj.dim();
    const HamiltonianModel& model = traj.model();
    const auto& times = traj.times();
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double t0 = times[k], t1 = times[k + 1];
        const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
        for (int g5 = 0; g5 < 5; ++g5) {
            const double t = mid + half * detail::kGl5Nodes[g5];
            PhasePoint x = traj.state_at(t);
            Jet h = model.eval_jet(x, 1);
            std::span<const double> c = h.coeffs();
            double val = -h.value();
            for (int i = 0; i < n; ++i) val += x.p[i] * c[1 + n + i];
            total += half * detail::kGl5Weights[g5] * val;
        }
    }
    return total;
}

} // namespace hamgeo
