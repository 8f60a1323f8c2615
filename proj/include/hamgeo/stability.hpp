#pragma once

// Spectral stability of equilibria.
//
// Two independent routes answer the same question:
//
//   * linearize() builds the constant-coefficient deviation system
//     at an equilibrium of any model and takes its spectrum with a dense
//     eigensolver; semisimplicity is estimated from SVD ranks.
//
//   * assess() treats the quadratic trap family (springs k1,k2,k3 and a
//     uniform field B along the third axis) in closed form: the planar block
//     reduces to a quadratic in lambda^2 and the axial block decouples, so the
//     six eigenvalues and the Jordan structure are known exactly.
//
// Stability here means spectral stability: every eigenvalue purely imaginary
// within tolerance AND semisimple, so all solutions of the linear system stay
// bounded.  Boundary configurations (eigenvalue collisions, zero eigenvalues,
// real parts at the decision threshold) are flagged `marginal` rather than
// silently forced into a boolean.
//
// The trap report also carries the curvature eigenvalues
// (k1 + B^2/4, k2 + B^2/4, k3) and two sufficient conditions:
// `curvature_positive` and the gyroscopic bound
// k3>0, k1<0, k2<0, B^2/2 > sqrt(k1 k2) + (|k1|+|k2|)/2.
// Within that sign pattern (both planar springs repelling), curvature
// positivity implies the gyroscopic bound, hence stability.  The scope
// matters: with springs of mixed sign the planar eigenvalue product k1*k2 is
// negative, a real eigenvalue always exists, and no field strength can
// stabilize the motion even where the curvature is positive.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "hamgeo/errors.hpp"
#include "hamgeo/jet.hpp"
#include "hamgeo/linalg.hpp"
#include "hamgeo/model.hpp"

namespace hamgeo {

namespace detail {

/// |Re lambda| <= this * scale counts as purely imaginary.
inline constexpr double kImaginaryAxisTol = 1e-9;
/// Numerically computed eigenvalues closer than this * scale are treated as
/// one eigenvalue when comparing multiplicity against eigenspace dimension.
inline constexpr double kClusterTol = 1e-7;
/// Relative singular-value threshold for rank estimation.
inline constexpr double kRankTol = 1e-7;
/// Distinct eigenvalues closer than this * scale mean the semisimplicity
/// verdict is unreliable; the result is flagged marginal.
inline constexpr double kNearResonanceTol = 1e-4;

inline void sort_spectrum(std::vector<std::complex<double>>& ev) {
    std::sort(ev.begin(), ev.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  if (a.real() != b.real()) return a.real() < b.real();
                  return a.imag() < b.imag();
              });
}

inline double spectrum_scale(const std::vector<std::complex<double>>& ev) {
    double s = 1.0;
    for (const auto& l : ev) s = std::max(s, std::abs(l));
    return s;
}

inline double max_real_part(const std::vector<std::complex<double>>& ev) {
    double r = 0.0;
    for (const auto& l : ev) r = std::max(r, std::abs(l.real()));
    return r;
}

/// True when the real-part magnitude sits too close to the imaginary-axis
/// threshold (within two decades either side) to call confidently.
inline bool near_axis_boundary(double re_max, double scale) {
    const double t = re_max / scale;
    return t > 1e-11 && t < 1e-7;
}

struct SpectralVerdict {
    bool stable = false;
    bool semisimple = false;
    bool marginal = false;
};

/// Decide stability of a numerically computed spectrum.  Eigenvalues are
/// merged into clusters of radius kClusterTol * scale; for every cluster of
/// multiplicity m the rank of (M - lambda I) is estimated by SVD and
/// semisimplicity requires the nullity to equal m.  Nearly-touching distinct
/// clusters make that rank estimate unreliable, so they flag `marginal`.
inline SpectralVerdict classify_spectrum(const Eigen::MatrixXd& m,
                                         const std::vector<std::complex<double>>& ev) {
    const int dim = static_cast<int>(m.rows());
    const double scale = spectrum_scale(ev);

    // single-linkage clustering
    std::vector<int> cluster(ev.size());
    for (std::size_t i = 0; i < ev.size(); ++i) cluster[i] = static_cast<int>(i);
    auto find = [&](int i) {
        while (cluster[i] != i) i = cluster[i] = cluster[cluster[i]];
        return i;
    };
    for (std::size_t i = 0; i < ev.size(); ++i)
        for (std::size_t j = i + 1; j < ev.size(); ++j)
            if (std::abs(ev[i] - ev[j]) <= kClusterTol * scale)
                cluster[find(static_cast<int>(i))] = find(static_cast<int>(j));

    SpectralVerdict v;
    v.semisimple = true;
    bool resonant = false;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (find(static_cast<int>(i)) != static_cast<int>(i)) continue;
        std::complex<double> mean = 0.0;
        int mult = 0;
        for (std::size_t j = 0; j < ev.size(); ++j)
            if (find(static_cast<int>(j)) == static_cast<int>(i)) {
                mean += ev[j];
                ++mult;
            }
        mean /= static_cast<double>(mult);
        if (mult == 1) continue;  // a simple eigenvalue always has its eigenvector
        resonant = true;          // a genuine collision: the verdict is boundary territory
        Eigen::MatrixXcd shifted = m.cast<std::complex<double>>();
        for (int d = 0; d < dim; ++d) shifted(d, d) -= mean;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
        const auto& sv = svd.singularValues();
        const double cut = kRankTol * std::max(sv(0), 1e-300);
        int rank = 0;
        for (int d = 0; d < dim; ++d)
            if (sv(d) > cut) ++rank;
        if (dim - rank < mult) v.semisimple = false;
    }

    // smallest gap between representatives of distinct clusters
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ev.size(); ++i)
        for (std::size_t j = i + 1; j < ev.size(); ++j)
            if (find(static_cast<int>(i)) != find(static_cast<int>(j)))
                min_gap = std::min(min_gap, std::abs(ev[i] - ev[j]));

    const double re_max = max_real_part(ev);
    v.stable = re_max <= kImaginaryAxisTol * scale && v.semisimple;
    v.marginal =
        resonant || min_gap < kNearResonanceTol * scale || near_axis_boundary(re_max, scale);
    return v;
}

} // namespace detail

/// The deviation system at an equilibrium: d/dt (xi, pi) = matrix * (xi, pi),
/// with xi the configuration deviation and pi the momentum deviation.
struct LinearizedFlow {
    Mat<double> matrix;                            ///< 2n x 2n
    std::vector<std::complex<double>> eigenvalues; ///< sorted by (Re, Im)
    bool spectrally_stable = false;
    bool semisimple = false;
    bool marginal = false;
};

/// Build the linearized flow at `equilibrium` and classify its spectrum.
/// Throws NotEquilibrium unless every first derivative of H vanishes there
/// (max |dH| <= equilibrium_tol).
inline LinearizedFlow linearize(const HamiltonianModel& model, const PhasePoint& equilibrium,
                                double equilibrium_tol = 1e-10) {
    const int n = model.dim();
    if (static_cast<int>(equilibrium.q.size()) != n ||
        static_cast<int>(equilibrium.p.size()) != n)
        throw InvalidArgument("phase point dimension does not match the model");

    Jet h = model.eval_jet(equilibrium, 2);
    std::vector<int> alpha(2 * n, 0);
    double residual = 0.0;
    for (int i = 0; i < 2 * n; ++i) {
        alpha.assign(2 * n, 0);
        alpha[i] = 1;
        residual = std::max(residual, std::abs(extract_partial(h, alpha)));
    }
    if (residual > equilibrium_tol)
        throw NotEquilibrium("the flow does not vanish at the proposed point: max |dH| = " +
                             std::to_string(residual) + " exceeds " +
                             std::to_string(equilibrium_tol));

    auto second = [&](int a, int b) {
        alpha.assign(2 * n, 0);
        alpha[a] += 1;
        alpha[b] += 1;
        return extract_partial(h, alpha);
    };

    // xi_dot = Hpq^T xi + Hpp pi ; pi_dot = -Hqq xi - Hqp pi
    Mat<double> m(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            m(i, j) = second(n + i, j);
            m(i, n + j) = second(n + i, n + j);
            m(n + i, j) = -second(i, j);
            m(n + i, n + j) = -second(i, n + j);
        }

    Eigen::MatrixXd em(2 * n, 2 * n);
    for (int i = 0; i < 2 * n; ++i)
        for (int j = 0; j < 2 * n; ++j) em(i, j) = m(i, j);

    LinearizedFlow out;
    out.matrix = m;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(em);
    if (solver.info() != Eigen::Success)
        throw NoConvergence("eigensolver failed on the linearized flow matrix", 0.0);
    out.eigenvalues.reserve(2 * n);
    for (int i = 0; i < 2 * n; ++i) out.eigenvalues.push_back(solver.eigenvalues()(i));
    detail::sort_spectrum(out.eigenvalues);

    detail::SpectralVerdict v = detail::classify_spectrum(em, out.eigenvalues);
    out.spectrally_stable = v.stable;
    out.semisimple = v.semisimple;
    out.marginal = v.marginal;
    return out;
}

/// Closed-form stability report for the quadratic trap family.
struct StabilityReport {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;
    double field_strength = 0.0;
    std::vector<std::complex<double>> eigenvalues;  ///< the six roots, sorted by (Re, Im)
    bool spectrally_stable = false;
    bool semisimple = false;
    bool marginal = false;
    std::array<double, 3> curvature_eigs{};  ///< k1 + B^2/4, k2 + B^2/4, k3
    bool curvature_positive = false;
    bool gyroscopic_criterion_met = false;  ///< k3>0, k1<0, k2<0, B^2/2 > sqrt(k1 k2) + (|k1|+|k2|)/2
    bool harmonic = false;                  ///< k1 + k2 + k3 = 0 within 1e-12
};

/// Spectral verdict for the trap with springs (k1, k2, k3) and uniform field
/// B along the third axis, from the exact root structure: the axial pair is
/// lambda^2 = -k3 and the planar quartet solves
/// lambda^4 + (B^2 + k1 + k2) lambda^2 + k1 k2 = 0.
inline StabilityReport assess(double k1, double k2, double k3, double B) {
    StabilityReport r;
    r.k1 = k1;
    r.k2 = k2;
    r.k3 = k3;
    r.field_strength = B;

    const double b = B * B + k1 + k2;
    const double c = k1 * k2;
    const double disc = b * b - 4.0 * c;
    const std::complex<double> root = std::sqrt(std::complex<double>(disc));
    const std::complex<double> mu[3] = {0.5 * (-b + root), 0.5 * (-b - root),
                                        std::complex<double>(-k3)};
    for (const auto& m : mu) {
        const std::complex<double> l = std::sqrt(m);
        r.eigenvalues.push_back(l);
        r.eigenvalues.push_back(-l);
    }
    detail::sort_spectrum(r.eigenvalues);

    const double scale = detail::spectrum_scale(r.eigenvalues);
    const double re_max = detail::max_real_part(r.eigenvalues);

    // Jordan structure from the root pattern.  A planar double root couples
    // the two axes into a chain unless the field vanishes and the springs
    // match (two independent oscillators); a zero root chains position with
    // momentum along a drift direction.
    const double kscale = 1.0 + std::abs(k1) + std::abs(k2) + std::abs(k3) + B * B;
    const bool decoupled_equal =
        std::abs(B) <= 1e-12 * std::sqrt(kscale) && std::abs(k1 - k2) <= 1e-12 * kscale;
    bool semisimple = true;
    if (std::abs(disc) <= 1e-9 * kscale * kscale && !decoupled_equal) semisimple = false;
    if (std::abs(c) <= 1e-12 * kscale * kscale) semisimple = false;
    if (std::abs(k3) <= 1e-12 * kscale) semisimple = false;

    r.semisimple = semisimple;
    r.spectrally_stable = re_max <= detail::kImaginaryAxisTol * scale && semisimple;
    r.marginal = std::abs(disc) <= 1e-6 * kscale * kscale ||
                 std::abs(c) <= 1e-9 * kscale * kscale || std::abs(k3) <= 1e-9 * kscale ||
                 detail::near_axis_boundary(re_max, scale);

    r.curvature_eigs = {k1 + 0.25 * B * B, k2 + 0.25 * B * B, k3};
    r.curvature_positive = r.curvature_eigs[0] > 0.0 && r.curvature_eigs[1] > 0.0 &&
                           r.curvature_eigs[2] > 0.0;
    r.gyroscopic_criterion_met =
        k3 > 0.0 && k1 < 0.0 && k2 < 0.0 &&
        0.5 * B * B > std::sqrt(k1 * k2) + 0.5 * (std::abs(k1) + std::abs(k2));
    r.harmonic = std::abs(k1 + k2 + k3) <= 1e-12;
    return r;
}

} // namespace hamgeo
