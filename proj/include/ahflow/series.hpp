/*
   Copyright 2026 The ahflow Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#ifndef AHFLOW_SERIES_HPP
#define AHFLOW_SERIES_HPP

#include "boundary.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// TruncatedSeries: a polynomial jet a_0 + a_1 x + ... + a_N x^N whose
// coefficients are boundary fields of one valence on one backend.
//
// Truncation contract: arithmetic never reads or writes powers above the
// stored order, results carry the minimum order of their inputs, and every
// stored coefficient is the exact image of the defining operation.  The
// dependence of coefficient k on input coefficients <= k is what makes the
// jet flow exact.
// ---------------------------------------------------------------------------

class TruncatedSeries {
  public:
    TruncatedSeries() = default;

    static TruncatedSeries zeros(BoundaryPtr b, Valence v, int trunc) {
        TruncatedSeries s;
        s.coef_.reserve(static_cast<size_t>(trunc) + 1);
        for (int k = 0; k <= trunc; ++k) s.coef_.push_back(BoundaryField::zeros(b, v));
        return s;
    }

    static TruncatedSeries constant(BoundaryField c0, int trunc) {
        TruncatedSeries s = zeros(c0.boundary(), c0.valence(), trunc);
        s.coef_[0] = std::move(c0);
        return s;
    }

    int trunc_order() const { return static_cast<int>(coef_.size()) - 1; }
    Valence valence() const { return coef_.empty() ? Valence::Scalar : coef_[0].valence(); }
    const BoundaryPtr& boundary() const { return coef_.at(0).boundary(); }
    bool empty() const { return coef_.empty(); }

    BoundaryField& operator[](int k) { return coef_.at(static_cast<size_t>(k)); }
    const BoundaryField& operator[](int k) const { return coef_.at(static_cast<size_t>(k)); }

    void set(int k, BoundaryField f) {
        require_same_boundary(boundary(), f.boundary());
        if (f.valence() != valence()) throw valence_error("coefficient valence mismatch");
        coef_.at(static_cast<size_t>(k)) = std::move(f);
    }

    // Drop coefficients above `order` (or extend with zeros).
    TruncatedSeries truncated(int order) const {
        TruncatedSeries s = zeros(boundary(), valence(), order);
        for (int k = 0; k <= std::min(order, trunc_order()); ++k) s.coef_[static_cast<size_t>(k)] = coef_[static_cast<size_t>(k)];
        return s;
    }

    TruncatedSeries& operator+=(const TruncatedSeries& o) {
        binary_check(o);
        resize_to(std::min(trunc_order(), o.trunc_order()));
        for (int k = 0; k <= trunc_order(); ++k) coef_[static_cast<size_t>(k)] += o[k];
        return *this;
    }
    TruncatedSeries& operator-=(const TruncatedSeries& o) {
        binary_check(o);
        resize_to(std::min(trunc_order(), o.trunc_order()));
        for (int k = 0; k <= trunc_order(); ++k) coef_[static_cast<size_t>(k)] -= o[k];
        return *this;
    }
    TruncatedSeries& operator*=(double c) {
        for (auto& f : coef_) f *= c;
        return *this;
    }
    friend TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b) { return a += b; }
    friend TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b) { return a -= b; }
    friend TruncatedSeries operator*(double c, TruncatedSeries a) { return a *= c; }

    void axpy(double c, const TruncatedSeries& o) {
        binary_check(o);
        resize_to(std::min(trunc_order(), o.trunc_order()));
        for (int k = 0; k <= trunc_order(); ++k) coef_[static_cast<size_t>(k)].axpy(c, o[k]);
    }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& f : coef_) m = std::max(m, f.sup_norm());
        return m;
    }

    bool all_finite() const {
        for (const auto& f : coef_)
            if (!f.all_finite()) return false;
        return true;
    }

    // Multiply by x^j.  The shift is exact, so the stored order grows by j.
    TruncatedSeries shifted_up(int j) const {
        TruncatedSeries s = zeros(boundary(), valence(), trunc_order() + j);
        for (int k = 0; k <= trunc_order(); ++k) s.coef_[static_cast<size_t>(k + j)] = coef_[static_cast<size_t>(k)];
        return s;
    }

    // Divide by x^j; coefficients below j must not exceed tol.
    TruncatedSeries shifted_down(int j, double tol = 0.0) const {
        for (int k = 0; k < j; ++k)
            if (coef_[static_cast<size_t>(k)].sup_norm() > tol)
                throw error("shifted_down would drop nonzero coefficients");
        TruncatedSeries s = zeros(boundary(), valence(), trunc_order() - j);
        for (int k = j; k <= trunc_order(); ++k) s.coef_[static_cast<size_t>(k - j)] = coef_[static_cast<size_t>(k)];
        return s;
    }

    // d/dx, one order shorter.
    TruncatedSeries deriv_x() const {
        if (trunc_order() < 1) throw error("deriv_x needs order >= 1");
        TruncatedSeries s = zeros(boundary(), valence(), trunc_order() - 1);
        for (int k = 1; k <= trunc_order(); ++k) {
            s.coef_[static_cast<size_t>(k - 1)] = coef_[static_cast<size_t>(k)];
            s.coef_[static_cast<size_t>(k - 1)] *= static_cast<double>(k);
        }
        return s;
    }

    // Horner evaluation of the jet polynomial.
    BoundaryField eval(double x) const {
        BoundaryField r = coef_.back();
        for (int k = trunc_order() - 1; k >= 0; --k) {
            r *= x;
            r += coef_[static_cast<size_t>(k)];
        }
        return r;
    }

  private:
    void binary_check(const TruncatedSeries& o) const {
        require_same_boundary(boundary(), o.boundary());
        if (valence() != o.valence()) throw valence_error("series valence mismatch");
    }
    void resize_to(int order) { coef_.resize(static_cast<size_t>(order) + 1); }

    std::vector<BoundaryField> coef_;
};

namespace series {

// c_k = sum_{i+j=k} kernel(a_i, b_j) for k <= min(Na, Nb).
template <class K>
TruncatedSeries convolve(const TruncatedSeries& a, const TruncatedSeries& b, Valence out, K&& kernel) {
    require_same_boundary(a.boundary(), b.boundary());
    const int n = std::min(a.trunc_order(), b.trunc_order());
    TruncatedSeries c = TruncatedSeries::zeros(a.boundary(), out, n);
    for (int k = 0; k <= n; ++k) {
        for (int i = 0; i <= k; ++i) c[k] += kernel(a[i], b[k - i]);
    }
    return c;
}

template <class F>
TruncatedSeries map(const TruncatedSeries& a, Valence out, F&& f) {
    TruncatedSeries c = TruncatedSeries::zeros(a.boundary(), out, a.trunc_order());
    for (int k = 0; k <= a.trunc_order(); ++k) c[k] = f(a[k]);
    return c;
}

// Per-coefficient combination (no convolution): c_k = kernel(a_k, b_k).
template <class K>
TruncatedSeries zip(const TruncatedSeries& a, const TruncatedSeries& b, Valence out, K&& kernel) {
    require_same_boundary(a.boundary(), b.boundary());
    const int n = std::min(a.trunc_order(), b.trunc_order());
    TruncatedSeries c = TruncatedSeries::zeros(a.boundary(), out, n);
    for (int k = 0; k <= n; ++k) c[k] = kernel(a[k], b[k]);
    return c;
}

inline TruncatedSeries tangential_derivative(const TruncatedSeries& a, int axis) {
    return map(a, a.valence(), [axis](const BoundaryField& f) { return ahflow::tangential_derivative(f, axis); });
}

inline TruncatedSeries scalar_mul(const TruncatedSeries& s, const TruncatedSeries& t) {
    return convolve(s, t, t.valence(), [](const BoundaryField& x, const BoundaryField& y) {
        return field::scalar_mul(x, y);
    });
}

}  // namespace series

// ---------------------------------------------------------------------------
// series_mul: the public product with the defined valence pairings
//   scalar * T            -> T
//   covector x covector   -> sym2 (symmetrized)
// Other pairings throw; the curvature kernels use explicit contractions.
// ---------------------------------------------------------------------------

inline TruncatedSeries series_mul(const TruncatedSeries& a, const TruncatedSeries& b) {
    require_same_boundary(a.boundary(), b.boundary());
    if (a.valence() == Valence::Scalar) return series::scalar_mul(a, b);
    if (b.valence() == Valence::Scalar) return series::scalar_mul(b, a);
    if (a.valence() == Valence::Covector && b.valence() == Valence::Covector)
        return series::convolve(a, b, Valence::Sym2, [](const BoundaryField& x, const BoundaryField& y) {
            return field::outer_sym(x, y);
        });
    throw valence_error(std::string("undefined valence pairing: ") + valence_name(a.valence()) + " * " +
                        valence_name(b.valence()));
}

// ---------------------------------------------------------------------------
// Inverses.  Scalar series need an invertible leading coefficient, sym2
// series a positive definite one.  The recursion reproduces the exact
// coefficients of the inverse through the stored order.
// ---------------------------------------------------------------------------

inline TruncatedSeries series_inverse(const TruncatedSeries& a) {
    const int n = a.trunc_order();
    if (a.valence() == Valence::Scalar) {
        TruncatedSeries b = TruncatedSeries::zeros(a.boundary(), Valence::Scalar, n);
        b[0] = field::scalar_recip(a[0]);
        for (int k = 1; k <= n; ++k) {
            BoundaryField acc = BoundaryField::zeros(a.boundary(), Valence::Scalar);
            for (int j = 1; j <= k; ++j) acc += field::scalar_mul(a[j], b[k - j]);
            b[k] = field::scalar_mul(b[0], acc);
            b[k] *= -1.0;
        }
        return b;
    }
    if (a.valence() == Valence::Sym2) {
        TruncatedSeries b = TruncatedSeries::zeros(a.boundary(), Valence::Sym2, n);
        b[0] = field::sym2_inverse(a[0]);
        for (int k = 1; k <= n; ++k) {
            // acc_i^l = sum_{j>=1} (a_j)_{i m} (b_{k-j})^{m l}
            BoundaryField acc = BoundaryField::zeros(a.boundary(), Valence::Mat);
            for (int j = 1; j <= k; ++j) acc += field::sym2_matmul(a[j], b[k - j]);
            // b_k = -b_0 * acc, symmetrized
            BoundaryField m = field::mat_mul(field::sym2_to_mat(b[0]), acc);
            b[k] = field::mat_sym(m);
            b[k] *= -1.0;
        }
        return b;
    }
    throw valence_error("series_inverse defined for scalar and sym2 only");
}

// ---------------------------------------------------------------------------
// Scalar-series transcendental kernels (pointwise recursions).
// ---------------------------------------------------------------------------

namespace series {

inline void require_scalar(const TruncatedSeries& a, const char* who) {
    if (a.valence() != Valence::Scalar) throw valence_error(std::string(who) + " needs a scalar series");
}

inline TruncatedSeries exp(const TruncatedSeries& a) {
    require_scalar(a, "series::exp");
    const int n = a.trunc_order();
    TruncatedSeries e = TruncatedSeries::zeros(a.boundary(), Valence::Scalar, n);
    e[0] = field::map(a[0], Valence::Scalar, [](int, const double* x, double* o) { o[0] = std::exp(x[0]); });
    for (int k = 1; k <= n; ++k) {
        BoundaryField acc = BoundaryField::zeros(a.boundary(), Valence::Scalar);
        for (int j = 1; j <= k; ++j) {
            BoundaryField t = field::scalar_mul(a[j], e[k - j]);
            t *= static_cast<double>(j);
            acc += t;
        }
        acc *= 1.0 / k;
        e[k] = acc;
    }
    return e;
}

inline TruncatedSeries log(const TruncatedSeries& a) {
    require_scalar(a, "series::log");
    const int n = a.trunc_order();
    TruncatedSeries l = TruncatedSeries::zeros(a.boundary(), Valence::Scalar, n);
    l[0] = field::map(a[0], Valence::Scalar, [](int, const double* x, double* o) {
        if (x[0] <= 0.0) throw singular_error("series::log needs a positive leading coefficient");
        o[0] = std::log(x[0]);
    });
    const BoundaryField inv0 = field::scalar_recip(a[0]);
    for (int k = 1; k <= n; ++k) {
        BoundaryField acc = a[k];
        for (int j = 1; j < k; ++j) {
            BoundaryField t = field::scalar_mul(l[j], a[k - j]);
            t *= -static_cast<double>(j) / k;
            acc += t;
        }
        l[k] = field::scalar_mul(inv0, acc);
    }
    return l;
}

inline TruncatedSeries sqrt(const TruncatedSeries& a) {
    require_scalar(a, "series::sqrt");
    const int n = a.trunc_order();
    TruncatedSeries s = TruncatedSeries::zeros(a.boundary(), Valence::Scalar, n);
    s[0] = field::map(a[0], Valence::Scalar, [](int, const double* x, double* o) {
        if (x[0] <= 0.0) throw singular_error("series::sqrt needs a positive leading coefficient");
        o[0] = std::sqrt(x[0]);
    });
    BoundaryField half_recip = field::scalar_recip(s[0]);
    half_recip *= 0.5;
    for (int k = 1; k <= n; ++k) {
        BoundaryField acc = a[k];
        for (int j = 1; j < k; ++j) {
            BoundaryField t = field::scalar_mul(s[j], s[k - j]);
            t *= -1.0;
            acc += t;
        }
        s[k] = field::scalar_mul(half_recip, acc);
    }
    return s;
}

// f(s(x)) for a scalar substitution s with s(0) = 0, by Horner.  Exact
// through the common truncation order.
inline TruncatedSeries compose(const TruncatedSeries& f, const TruncatedSeries& s) {
    require_scalar(s, "series::compose");
    if (s[0].sup_norm() != 0.0) throw error("series::compose needs s(0) = 0");
    const int n = std::min(f.trunc_order(), s.trunc_order());
    TruncatedSeries r = TruncatedSeries::constant(f[n], n);
    for (int k = n - 1; k >= 0; --k) {
        r = scalar_mul(s.truncated(n), r);
        r[0] += f[k];
    }
    return r;
}

}  // namespace series

// ---------------------------------------------------------------------------
// Parity machinery
// ---------------------------------------------------------------------------

enum class Parity { Even, Odd };

// Projection onto the even/odd coefficients at powers <= j, zero elsewhere.
inline TruncatedSeries parity_project(const TruncatedSeries& a, int j, Parity p) {
    if (j < 0 || j > a.trunc_order()) throw config_error("parity_project: j out of range");
    TruncatedSeries r = TruncatedSeries::zeros(a.boundary(), a.valence(), a.trunc_order());
    for (int k = 0; k <= j; ++k) {
        const bool odd = (k % 2) == 1;
        if ((p == Parity::Odd) == odd) r[k] = a[k];
    }
    return r;
}

struct ParityReport {
    int evenness_order = 0;           // largest even 2l with odd coefficients below zero
    int first_odd_power = -1;         // -1 means none within the stored order
    std::vector<double> odd_norms;    // sup-norms of odd coefficients, by odd power
};

// Default classifier threshold: relative to the sup-norm of the even part.
inline double default_parity_tol(const TruncatedSeries& a, double rel = 1e-10) {
    double even_sup = 0.0;
    for (int k = 0; k <= a.trunc_order(); k += 2) even_sup = std::max(even_sup, a[k].sup_norm());
    return rel * even_sup;
}

// Largest even order 2l such that all odd coefficients at powers <= 2l-1
// stay below tol.
inline ParityReport evenness_order(const TruncatedSeries& a, double tol) {
    if (tol < 0.0) throw config_error("evenness tolerance must be >= 0");
    ParityReport rep;
    const int n = a.trunc_order();
    for (int k = 1; k <= n; k += 2) rep.odd_norms.push_back(a[k].sup_norm());
    int first_bad = -1;
    for (int k = 1; k <= n; k += 2) {
        if (a[k].sup_norm() > tol) {
            first_bad = k;
            break;
        }
    }
    rep.first_odd_power = first_bad;
    if (first_bad < 0) {
        rep.evenness_order = (n + 1) % 2 == 0 ? n + 1 : n;
    } else {
        rep.evenness_order = first_bad - 1;
    }
    return rep;
}

}  // namespace ahflow

#endif  // AHFLOW_SERIES_HPP
