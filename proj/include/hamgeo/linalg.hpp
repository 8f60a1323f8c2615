#pragma once

// Small dense matrices templated on the scalar type so the same LU inverse
// works for doubles and for jet-valued matrices (pivoting compares the
// constant term).  Sizes here are phase-space sized (n <= 6 or so), nothing
// is tuned beyond that.

#include <algorithm>
#include <cmath>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/jet.hpp"

namespace hamgeo {

namespace detail {
inline double pivot_magnitude(double x) { return std::abs(x); }
inline double pivot_magnitude(const Jet& x) { return std::abs(x.value()); }
inline double zero_like(double) { return 0.0; }
inline double one_like(double) { return 1.0; }
inline Jet zero_like(const Jet& proto) { return Jet::constant(proto.nvars(), proto.order(), 0.0); }
inline Jet one_like(const Jet& proto) { return Jet::constant(proto.nvars(), proto.order(), 1.0); }
} // namespace detail

template <class T>
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}
    Mat(int rows, int cols, const T& fill)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    T& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    const T& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    Mat transposed() const {
        Mat r(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<T> a_;
};

inline Mat<double> identity_matrix(int n) {
    Mat<double> m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

template <class T>
Mat<T> operator*(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols() != b.rows()) throw InvalidArgument("matrix product shape mismatch");
    Mat<T> r(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            T acc = a(i, 0) * b(0, j);
            for (int k = 1; k < a.cols(); ++k) acc = acc + a(i, k) * b(k, j);
            r(i, j) = acc;
        }
    return r;
}

template <class T>
std::vector<T> operator*(const Mat<T>& a, const std::vector<T>& x) {
    if (a.cols() != static_cast<int>(x.size())) throw InvalidArgument("matrix-vector shape mismatch");
    std::vector<T> r;
    r.reserve(a.rows());
    for (int i = 0; i < a.rows(); ++i) {
        T acc = a(i, 0) * x[0];
        for (int k = 1; k < a.cols(); ++k) acc = acc + a(i, k) * x[k];
        r.push_back(acc);
    }
    return r;
}

/// In-place LU decomposition with partial pivoting; returns permutation sign,
/// fills perm with row swaps.  Throws DomainError on a (numerically) singular
/// pivot.  Works for T = double and T = Jet.
template <class T>
void lu_factor(Mat<T>& m, std::vector<int>& perm) {
    const int n = m.rows();
    if (m.cols() != n) throw InvalidArgument("lu_factor requires a square matrix");
    perm.resize(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int col = 0; col < n; ++col) {
        int best = col;
        double mag = detail::pivot_magnitude(m(col, col));
        for (int r = col + 1; r < n; ++r) {
            const double cand = detail::pivot_magnitude(m(r, col));
            if (cand > mag) {
                mag = cand;
                best = r;
            }
        }
        if (mag == 0.0) throw DomainError("singular matrix in LU factorization");
        if (best != col) {
            for (int j = 0; j < n; ++j) std::swap(m(col, j), m(best, j));
            std::swap(perm[col], perm[best]);
        }
        for (int r = col + 1; r < n; ++r) {
            T f = m(r, col) / m(col, col);
            m(r, col) = f;
            for (int j = col + 1; j < n; ++j) m(r, j) = m(r, j) - f * m(col, j);
        }
    }
}

template <class T>
std::vector<T> lu_solve(const Mat<T>& lu, const std::vector<int>& perm, const std::vector<T>& b) {
    const int n = lu.rows();
    std::vector<T> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) x[i] = x[i] - lu(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) x[i] = x[i] - lu(i, j) * x[j];
        x[i] = x[i] / lu(i, i);
    }
    return x;
}

template <class T>
Mat<T> inverse(const Mat<T>& m) {
    const int n = m.rows();
    Mat<T> lu = m;
    std::vector<int> perm;
    lu_factor(lu, perm);
    Mat<T> inv(n, n);
    const T zero = detail::zero_like(m(0, 0));
    const T one = detail::one_like(m(0, 0));
    std::vector<T> e(n, zero), col;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) e[i] = (i == j) ? one : zero;
        col = lu_solve(lu, perm, e);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

inline double determinant(Mat<double> m) {
    std::vector<int> perm;
    const int n = m.rows();
    // track sign through the pivoting done by lu_factor
    std::vector<int> before(n);
    for (int i = 0; i < n; ++i) before[i] = i;
    lu_factor(m, perm);
    int swaps = 0;
    std::vector<int> p = perm;
    for (int i = 0; i < n; ++i)
        while (p[i] != i) {
            std::swap(p[i], p[p[i]]);
            ++swaps;
        }
    double det = (swaps % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) det *= m(i, i);
    return det;
}

/// Cholesky factor L (lower triangular, m = L L^T) of a symmetric positive
/// definite matrix.  Throws NotConvex when a pivot is not positive.
inline Mat<double> cholesky(const Mat<double>& m) {
    const int n = m.rows();
    if (m.cols() != n) throw InvalidArgument("cholesky requires a square matrix");
    Mat<double> L(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (s <= 0.0) throw NotConvex("Cholesky pivot " + std::to_string(i) + " is not positive");
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return L;
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix, by cyclic Jacobi rotations.
inline void symmetric_eigen(const Mat<double>& m, std::vector<double>& eigenvalues,
                            Mat<double>* eigenvectors = nullptr) {
    const int n = m.rows();
    if (m.cols() != n) throw InvalidArgument("symmetric_eigen requires a square matrix");
    Mat<double> a = m;
    Mat<double> v = identity_matrix(n);
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (int i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off <= 1e-32 * (diag + 1e-300)) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    eigenvalues.resize(n);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a(i, i);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) { return diag[x] < diag[y]; });
    for (int i = 0; i < n; ++i) eigenvalues[i] = diag[idx[i]];
    if (eigenvectors) {
        *eigenvectors = Mat<double>(n, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) (*eigenvectors)(i, j) = v(i, idx[j]);
    }
}

} // namespace hamgeo
