#pragma once

// Dense truncated Taylor arithmetic ("jets") in up to 12 variables, total
// order up to 4.  A Jet stores every Taylor coefficient of a germ around the
// expansion point, indexed by multi-index in graded lexicographic order:
// multi-indices are sorted by total degree, ties broken lexicographically
// with the first variable most significant (so for two variables the order
// is (0,0); (1,0),(0,1); (2,0),(1,1),(0,2); ...).  Slot 0 is the value and
// slots 1..nvars are the first-order coefficients in variable order.  The
// enumeration for a lower order is a prefix of the enumeration for a higher
// order, which lets mixed-order arithmetic operate on prefixes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "hamgeo/errors.hpp"

namespace hamgeo {

inline constexpr int kMaxJetOrder = 4;
inline constexpr int kMaxJetVars = 12;

namespace detail {

struct MulTriple {
    int32_t a, b, c; // slot(alpha), slot(beta), slot(alpha+beta)
};

/// Shared per-nvars lookup tables (built once, read-only afterwards).
struct JetTables {
    int nvars = 0;
    std::vector<std::array<uint8_t, kMaxJetVars>> exps; // graded-lex multi-indices
    std::vector<int> degree;                            // total degree per slot
    std::array<int, kMaxJetOrder + 2> count_to_order{}; // slots with degree <= d
    std::vector<MulTriple> mul;                         // grouped by degree(a)+degree(b)
    std::array<int, kMaxJetOrder + 2> mul_to_degsum{};  // prefix boundaries of `mul`
    std::vector<std::vector<int32_t>> shift_up;         // [k][slot] -> slot of alpha+e_k
    double factorial[kMaxJetOrder + 1] = {1, 1, 2, 6, 24};

    int slot_count(int order) const { return count_to_order[order + 1]; }
};

inline uint64_t pack_exps(const std::array<uint8_t, kMaxJetVars>& e, int nvars) {
    uint64_t key = 0;
    for (int i = 0; i < nvars; ++i) key = (key << 4) | e[i];
    return key;
}

inline const JetTables& jet_tables(int nvars) {
    static std::mutex mtx;
    static std::array<std::unique_ptr<JetTables>, kMaxJetVars + 1> cache;
    if (nvars < 1 || nvars > kMaxJetVars)
        throw InvalidArgument("jet variable count must be in [1, " + std::to_string(kMaxJetVars) +
                              "], got " + std::to_string(nvars));
    std::lock_guard<std::mutex> lock(mtx);
    auto& slot = cache[nvars];
    if (slot) return *slot;

    auto t = std::make_unique<JetTables>();
    t->nvars = nvars;
    t->count_to_order[0] = 0;
    std::array<uint8_t, kMaxJetVars> cur{};
    // enumerate degree d multi-indices in lex order, first variable most significant
    auto emit = [&](auto&& self, int var, int remaining) -> void {
        if (var == nvars - 1) {
            cur[var] = static_cast<uint8_t>(remaining);
            t->exps.push_back(cur);
            cur[var] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[var] = static_cast<uint8_t>(e);
            self(self, var + 1, remaining - e);
        }
        cur[var] = 0;
    };
    for (int d = 0; d <= kMaxJetOrder; ++d) {
        emit(emit, 0, d);
        t->count_to_order[d + 1] = static_cast<int>(t->exps.size());
    }
    const int total = static_cast<int>(t->exps.size());
    t->degree.resize(total);
    std::map<uint64_t, int> pos;
    for (int i = 0; i < total; ++i) {
        int d = 0;
        for (int v = 0; v < nvars; ++v) d += t->exps[i][v];
        t->degree[i] = d;
        pos[pack_exps(t->exps[i], nvars)] = i;
    }
    // multiplication triples grouped by degree(a)+degree(b)
    t->mul_to_degsum[0] = 0;
    for (int dsum = 0; dsum <= kMaxJetOrder; ++dsum) {
        for (int ia = 0; ia < total; ++ia) {
            if (t->degree[ia] > dsum) continue;
            for (int ib = 0; ib < total; ++ib) {
                if (t->degree[ia] + t->degree[ib] != dsum) continue;
                std::array<uint8_t, kMaxJetVars> sum{};
                for (int v = 0; v < nvars; ++v)
                    sum[v] = static_cast<uint8_t>(t->exps[ia][v] + t->exps[ib][v]);
                t->mul.push_back({ia, ib, pos.at(pack_exps(sum, nvars))});
            }
        }
        t->mul_to_degsum[dsum + 1] = static_cast<int>(t->mul.size());
    }
    // derivative shifts
    t->shift_up.assign(nvars, std::vector<int32_t>(total, -1));
    for (int k = 0; k < nvars; ++k) {
        for (int i = 0; i < total; ++i) {
            if (t->degree[i] >= kMaxJetOrder) continue;
            std::array<uint8_t, kMaxJetVars> up = t->exps[i];
            up[k] += 1;
            t->shift_up[k][i] = pos.at(pack_exps(up, nvars));
        }
    }
    slot = std::move(t);
    return *slot;
}

} // namespace detail

class Jet {
public:
    Jet() = default; // invalid placeholder; any arithmetic on it throws

    static Jet constant(int nvars, int order, double value) {
        Jet j(nvars, order);
        j.c_[0] = value;
        return j;
    }

    /// Seed for independent variable k: value plus unit first-order coefficient.
    static Jet variable(int nvars, int order, int k, double value) {
        Jet j(nvars, order);
        if (k < 0 || k >= nvars)
            throw InvalidArgument("jet variable index " + std::to_string(k) + " out of range for " +
                                  std::to_string(nvars) + " variables");
        j.c_[0] = value;
        if (order >= 1) j.c_[1 + k] = 1.0;
        return j;
    }

    bool valid() const { return nvars_ > 0; }
    int nvars() const { return nvars_; }
    int order() const { return order_; }
    double value() const { return c_.empty() ? 0.0 : c_[0]; }
    std::span<const double> coeffs() const { return c_; }

    /// Raw Taylor coefficient for the given multi-index.
    double coeff(std::span<const int> alpha) const {
        return c_[slot_of(alpha)];
    }

    /// Mixed partial derivative: alpha! times the Taylor coefficient.
    double partial(std::span<const int> alpha) const {
        const int slot = slot_of(alpha); // validates entries first
        double fact = 1.0;
        for (int a : alpha) fact *= tables().factorial[a];
        return fact * c_[slot];
    }

    Jet truncated(int new_order) const {
        check_valid();
        if (new_order < 0 || new_order > order_)
            throw InvalidArgument("truncation order " + std::to_string(new_order) +
                                  " outside [0, " + std::to_string(order_) + "]");
        Jet r(nvars_, new_order);
        std::copy(c_.begin(), c_.begin() + r.c_.size(), r.c_.begin());
        return r;
    }

    /// Derivative with respect to variable k, as a germ of one lower order.
    Jet deriv(int k) const {
        check_valid();
        if (order_ == 0)
            throw InvalidArgument("cannot differentiate an order-0 jet");
        if (k < 0 || k >= nvars_)
            throw InvalidArgument("derivative variable index out of range");
        const auto& t = tables();
        Jet r(nvars_, order_ - 1);
        const auto& up = t.shift_up[k];
        for (size_t i = 0; i < r.c_.size(); ++i) {
            const int src = up[i];
            r.c_[i] = c_[src] * static_cast<double>(t.exps[src][k]);
        }
        return r;
    }

    Jet operator-() const {
        check_valid();
        Jet r = *this;
        for (double& x : r.c_) x = -x;
        return r;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        auto [x, y] = Jet::aligned(a, b);
        for (size_t i = 0; i < x.c_.size(); ++i) x.c_[i] += y.c_[i];
        return x;
    }
    friend Jet operator-(const Jet& a, const Jet& b) {
        auto [x, y] = Jet::aligned(a, b);
        for (size_t i = 0; i < x.c_.size(); ++i) x.c_[i] -= y.c_[i];
        return x;
    }
    friend Jet operator*(const Jet& a, const Jet& b) {
        a.check_valid();
        b.check_valid();
        a.check_same_vars(b);
        const int ord = std::min(a.order_, b.order_);
        const auto& t = a.tables();
        Jet r(a.nvars_, ord);
        const auto& mul = t.mul;
        const int end = t.mul_to_degsum[ord + 1];
        for (int i = 0; i < end; ++i) {
            const auto& m = mul[i];
            r.c_[m.c] += a.c_[m.a] * b.c_[m.b];
        }
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) { return a * b.reciprocal(); }

    friend Jet operator+(const Jet& a, double s) { Jet r = a; r.check_valid(); r.c_[0] += s; return r; }
    friend Jet operator+(double s, const Jet& a) { return a + s; }
    friend Jet operator-(const Jet& a, double s) { return a + (-s); }
    friend Jet operator-(double s, const Jet& a) { return (-a) + s; }
    friend Jet operator*(const Jet& a, double s) {
        Jet r = a;
        r.check_valid();
        for (double& x : r.c_) x *= s;
        return r;
    }
    friend Jet operator*(double s, const Jet& a) { return a * s; }
    friend Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
    friend Jet operator/(double s, const Jet& a) { return a.reciprocal() * s; }

    Jet& operator+=(const Jet& o) { *this = *this + o; return *this; }
    Jet& operator-=(const Jet& o) { *this = *this - o; return *this; }
    Jet& operator*=(const Jet& o) { *this = *this * o; return *this; }
    Jet& operator/=(const Jet& o) { *this = *this / o; return *this; }

    /// 1/x for a jet with nonzero constant term.
    Jet reciprocal() const {
        check_valid();
        const double v = c_[0];
        if (v == 0.0) throw DomainError("division by jet with zero constant term");
        double coef[kMaxJetOrder + 1];
        double p = 1.0 / v;
        for (int k = 0; k <= order_; ++k) {
            coef[k] = (k % 2 == 0 ? p : -p); // d^k/dx^k (1/x) / k! = (-1)^k / x^{k+1}
            p /= v;
        }
        return compose_series(coef);
    }

private:
    Jet(int nvars, int order) : nvars_(nvars), order_(order) {
        if (order < 0 || order > kMaxJetOrder)
            throw InvalidArgument("jet order must be in [0, " + std::to_string(kMaxJetOrder) +
                                  "], got " + std::to_string(order));
        const auto& t = detail::jet_tables(nvars);
        c_.assign(t.slot_count(order), 0.0);
    }

    const detail::JetTables& tables() const { return detail::jet_tables(nvars_); }

    void check_valid() const {
        if (!valid()) throw InvalidArgument("use of default-constructed jet");
    }
    void check_same_vars(const Jet& o) const {
        if (nvars_ != o.nvars_)
            throw InvalidArgument("jet variable count mismatch: " + std::to_string(nvars_) +
                                  " vs " + std::to_string(o.nvars_));
    }

    static std::pair<Jet, Jet> aligned(const Jet& a, const Jet& b) {
        a.check_valid();
        b.check_valid();
        a.check_same_vars(b);
        const int ord = std::min(a.order_, b.order_);
        return {a.truncated(ord), b.truncated(ord)};
    }

    int slot_of(std::span<const int> alpha) const {
        check_valid();
        if (static_cast<int>(alpha.size()) != nvars_)
            throw InvalidArgument("multi-index length does not match jet variable count");
        const auto& t = tables();
        std::array<uint8_t, kMaxJetVars> e{};
        int d = 0;
        for (int i = 0; i < nvars_; ++i) {
            if (alpha[i] < 0) throw InvalidArgument("negative multi-index entry");
            e[i] = static_cast<uint8_t>(alpha[i]);
            d += alpha[i];
        }
        if (d > order_)
            throw InvalidArgument("multi-index degree " + std::to_string(d) +
                                  " exceeds jet order " + std::to_string(order_));
        // slots are few; linear scan within the degree block
        for (int i = t.count_to_order[d]; i < t.count_to_order[d + 1]; ++i)
            if (t.exps[i] == e) return i;
        throw InvalidArgument("multi-index not found"); // unreachable
    }

    /// Evaluate sum_k coef[k] * u^k where u = *this with constant term zeroed.
    Jet compose_series(const double* coef) const {
        Jet u = *this;
        u.c_[0] = 0.0;
        Jet r = Jet::constant(nvars_, order_, coef[order_]);
        for (int k = order_ - 1; k >= 0; --k) {
            r = r * u;
            r.c_[0] += coef[k];
        }
        return r;
    }

    friend Jet sin(const Jet&);
    friend Jet cos(const Jet&);
    friend Jet exp(const Jet&);
    friend Jet log(const Jet&);
    friend Jet sqrt(const Jet&);

    int nvars_ = 0;
    int order_ = 0;
    std::vector<double> c_;
};

inline Jet sin(const Jet& x) {
    x.check_valid();
    const double v = x.value();
    const double s = std::sin(v), c = std::cos(v);
    const double coef[kMaxJetOrder + 1] = {s, c, -s / 2.0, -c / 6.0, s / 24.0};
    return x.compose_series(coef);
}

inline Jet cos(const Jet& x) {
    x.check_valid();
    const double v = x.value();
    const double s = std::sin(v), c = std::cos(v);
    const double coef[kMaxJetOrder + 1] = {c, -s, -c / 2.0, s / 6.0, c / 24.0};
    return x.compose_series(coef);
}

inline Jet exp(const Jet& x) {
    x.check_valid();
    const double e = std::exp(x.value());
    const double coef[kMaxJetOrder + 1] = {e, e, e / 2.0, e / 6.0, e / 24.0};
    return x.compose_series(coef);
}

inline Jet log(const Jet& x) {
    x.check_valid();
    const double v = x.value();
    if (v <= 0.0) throw DomainError("log of jet with nonpositive constant term");
    const double coef[kMaxJetOrder + 1] = {std::log(v), 1.0 / v, -1.0 / (2.0 * v * v),
                                           1.0 / (3.0 * v * v * v), -1.0 / (4.0 * v * v * v * v)};
    return x.compose_series(coef);
}

inline Jet sqrt(const Jet& x) {
    x.check_valid();
    const double v = x.value();
    if (v <= 0.0) throw DomainError("sqrt of jet with nonpositive constant term");
    const double r = std::sqrt(v);
    // (1+u)^(1/2) series coefficients scaled by sqrt(v) / v^k
    const double coef[kMaxJetOrder + 1] = {r, r / (2.0 * v), -r / (8.0 * v * v),
                                           r / (16.0 * v * v * v), -5.0 * r / (128.0 * v * v * v * v)};
    return x.compose_series(coef);
}

inline Jet pow_int(const Jet& x, int n) {
    if (n == 0) return Jet::constant(x.nvars(), x.order(), 1.0);
    Jet base = n < 0 ? x.reciprocal() : x;
    unsigned e = static_cast<unsigned>(n < 0 ? -static_cast<long long>(n) : n);
    Jet acc = base;
    --e;
    while (e > 0) {
        acc = acc * base;
        --e;
    }
    return acc;
}

/// alpha! times the Taylor coefficient: the mixed partial of the germ.
inline double extract_partial(const Jet& j, std::span<const int> alpha) {
    return j.partial(alpha);
}

} // namespace hamgeo
