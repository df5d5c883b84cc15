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

#ifndef AHFLOW_BOUNDARY_HPP
#define AHFLOW_BOUNDARY_HPP

#include <cassert>
#include <span>

#include "core.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// Boundary: discretization descriptor for the model boundary, the flat
// d-torus with coordinates y in [0, 2*pi)^d.  Two backends are supported:
//   * constant — fields carry a single tensor value, tangential derivatives
//     vanish identically;
//   * grid — periodic grid, per-axis resolution (>= 8 and even).
// ---------------------------------------------------------------------------

enum class DerivScheme { FiniteDifference4, Spectral };

class Boundary;
using BoundaryPtr = std::shared_ptr<const Boundary>;

class Boundary {
  public:
    static BoundaryPtr constant(int dim) {
        return std::shared_ptr<const Boundary>(new Boundary(dim, {}, DerivScheme::FiniteDifference4));
    }

    static BoundaryPtr grid(std::vector<int> res, DerivScheme scheme = DerivScheme::FiniteDifference4) {
        for (int r : res) {
            if (r < 8 || r % 2 != 0)
                throw config_error("grid resolutions must be even and >= 8");
        }
        if (res.empty()) throw config_error("grid backend needs at least one axis");
        return std::shared_ptr<const Boundary>(new Boundary(0, std::move(res), scheme));
    }

    int dim() const { return dim_; }
    bool is_grid() const { return !res_.empty(); }
    const std::vector<int>& resolution() const { return res_; }
    DerivScheme scheme() const { return scheme_; }
    int points() const { return points_; }

    double spacing(int axis) const { return kTwoPi / res_[static_cast<size_t>(axis)]; }

    // Coordinates of grid point p (undefined for the constant backend).
    void coords(int p, double* y) const {
        for (int a = dim_ - 1; a >= 0; --a) {
            const int r = res_[static_cast<size_t>(a)];
            const int i = p % r;
            p /= r;
            y[a] = kTwoPi * i / r;
        }
    }

    // Neighbour of p shifted by `offset` grid steps along `axis` (periodic).
    int shift(int p, int axis, int offset) const {
        const int r = res_[static_cast<size_t>(axis)];
        const int stride = stride_[static_cast<size_t>(axis)];
        const int i = (p / stride) % r;
        int j = (i + offset) % r;
        if (j < 0) j += r;
        return p + (j - i) * stride;
    }

    bool operator==(const Boundary& o) const {
        return dim_ == o.dim_ && res_ == o.res_ && scheme_ == o.scheme_;
    }

  private:
    Boundary(int dim, std::vector<int> res, DerivScheme scheme)
        : dim_(res.empty() ? dim : static_cast<int>(res.size())),
          res_(std::move(res)),
          scheme_(scheme) {
        if (dim_ < 1) throw config_error("boundary dimension must be >= 1");
        points_ = 1;
        stride_.assign(res_.size(), 1);
        if (!res_.empty()) {
            for (int a = static_cast<int>(res_.size()) - 1; a >= 0; --a) {
                stride_[static_cast<size_t>(a)] = points_;
                points_ *= res_[static_cast<size_t>(a)];
            }
        }
    }

    int dim_;
    std::vector<int> res_;
    DerivScheme scheme_;
    int points_ = 1;
    std::vector<int> stride_;
};

inline bool same_boundary(const BoundaryPtr& a, const BoundaryPtr& b) {
    return a == b || (a && b && *a == *b);
}

inline void require_same_boundary(const BoundaryPtr& a, const BoundaryPtr& b) {
    if (!same_boundary(a, b)) throw backend_mismatch("boundary backends differ");
}

// ---------------------------------------------------------------------------
// BoundaryField: tensor-valued field on the boundary.  Storage is
// point-major, `comps` values per point.
// ---------------------------------------------------------------------------

class BoundaryField {
  public:
    BoundaryField() = default;

    static BoundaryField zeros(BoundaryPtr b, Valence v) {
        BoundaryField f;
        f.bnd_ = std::move(b);
        f.val_ = v;
        f.data_.assign(static_cast<size_t>(f.bnd_->points()) * f.comps(), 0.0);
        return f;
    }

    // Same tensor value at every point.
    static BoundaryField uniform(BoundaryPtr b, Valence v, const std::vector<double>& comps) {
        BoundaryField f = zeros(std::move(b), v);
        if (static_cast<int>(comps.size()) != f.comps())
            throw valence_error("component count mismatch");
        for (int p = 0; p < f.points(); ++p)
            std::copy(comps.begin(), comps.end(), f.at(p));
        return f;
    }

    static BoundaryField uniform_scalar(BoundaryPtr b, double v) {
        return uniform(std::move(b), Valence::Scalar, {v});
    }

    // Sample a function of the grid coordinates (constant backend evaluates
    // at the origin).
    template <class F>
    static BoundaryField sample(BoundaryPtr b, Valence v, F&& fn) {
        BoundaryField f = zeros(b, v);
        std::vector<double> y(static_cast<size_t>(b->dim()), 0.0);
        for (int p = 0; p < f.points(); ++p) {
            if (b->is_grid()) b->coords(p, y.data());
            fn(y.data(), f.at(p));
        }
        return f;
    }

    const BoundaryPtr& boundary() const { return bnd_; }
    Valence valence() const { return val_; }
    int dim() const { return bnd_->dim(); }
    int points() const { return bnd_->points(); }
    int comps() const { return valence_comps(val_, bnd_->dim()); }
    bool empty() const { return !bnd_; }

    double* at(int p) { return data_.data() + static_cast<size_t>(p) * comps(); }
    const double* at(int p) const { return data_.data() + static_cast<size_t>(p) * comps(); }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    BoundaryField& operator+=(const BoundaryField& o) {
        check_compat(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    BoundaryField& operator-=(const BoundaryField& o) {
        check_compat(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    BoundaryField& operator*=(double c) {
        for (double& x : data_) x *= c;
        return *this;
    }

    friend BoundaryField operator+(BoundaryField a, const BoundaryField& b) { return a += b; }
    friend BoundaryField operator-(BoundaryField a, const BoundaryField& b) { return a -= b; }
    friend BoundaryField operator*(double c, BoundaryField a) { return a *= c; }

    // y += c * o
    void axpy(double c, const BoundaryField& o) {
        check_compat(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += c * o.data_[i];
    }

    double sup_norm() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

  private:
    void check_compat(const BoundaryField& o) const {
        require_same_boundary(bnd_, o.bnd_);
        if (val_ != o.val_) throw valence_error("valence mismatch");
    }

    BoundaryPtr bnd_;
    Valence val_ = Valence::Scalar;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Pointwise tensor kernels.  Each helper states its index convention; no
// general einsum machinery is attempted.
// ---------------------------------------------------------------------------

namespace field {

template <class K>
BoundaryField zip(const BoundaryField& a, const BoundaryField& b, Valence out, K&& kernel) {
    require_same_boundary(a.boundary(), b.boundary());
    BoundaryField r = BoundaryField::zeros(a.boundary(), out);
    const int d = a.dim();
    const int n = a.points();
    parallel_for(n, [&](int p) { kernel(d, a.at(p), b.at(p), r.at(p)); });
    return r;
}

template <class K>
BoundaryField map(const BoundaryField& a, Valence out, K&& kernel) {
    BoundaryField r = BoundaryField::zeros(a.boundary(), out);
    const int d = a.dim();
    parallel_for(a.points(), [&](int p) { kernel(d, a.at(p), r.at(p)); });
    return r;
}

// scalar * T, componentwise.
inline BoundaryField scalar_mul(const BoundaryField& s, const BoundaryField& t) {
    if (s.valence() != Valence::Scalar) throw valence_error("scalar_mul needs a scalar left factor");
    require_same_boundary(s.boundary(), t.boundary());
    BoundaryField r = t;
    const int c = t.comps();
    parallel_for(t.points(), [&](int p) {
        const double v = *s.at(p);
        double* o = r.at(p);
        for (int k = 0; k < c; ++k) o[k] *= v;
    });
    return r;
}

// Symmetrized product of two covectors: (a b + b a)/2 -> Sym2.
inline BoundaryField outer_sym(const BoundaryField& a, const BoundaryField& b) {
    return zip(a, b, Valence::Sym2, [](int d, const double* x, const double* y, double* o) {
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                o[sym2_index(i, j, d)] = 0.5 * (x[i] * y[j] + x[j] * y[i]);
    });
}

// inv^{ij} c_j -> Vector (inv is a contravariant Sym2).
inline BoundaryField raise(const BoundaryField& inv, const BoundaryField& c) {
    return zip(inv, c, Valence::Vector, [](int d, const double* s, const double* x, double* o) {
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += s[sym2_index(i, j, d)] * x[j];
            o[i] = acc;
        }
    });
}

// S_{ij} v^j -> Covector.
inline BoundaryField lower(const BoundaryField& s, const BoundaryField& v) {
    return zip(s, v, Valence::Covector, [](int d, const double* m, const double* x, double* o) {
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += m[sym2_index(i, j, d)] * x[j];
            o[i] = acc;
        }
    });
}

// v^i c_i -> Scalar.
inline BoundaryField dot(const BoundaryField& v, const BoundaryField& c) {
    return zip(v, c, Valence::Scalar, [](int d, const double* x, const double* y, double* o) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += x[i] * y[i];
        o[0] = acc;
    });
}

// inv^{ij} S_{ij} -> Scalar (full trace against a contravariant Sym2).
inline BoundaryField trace(const BoundaryField& inv, const BoundaryField& s) {
    return zip(inv, s, Valence::Scalar, [](int d, const double* a, const double* b, double* o) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) acc += a[sym2_index(i, j, d)] * b[sym2_index(i, j, d)];
        o[0] = acc;
    });
}

// A^{i?} B_{?j} as full matrices; both arguments unpacked from Sym2.
inline BoundaryField sym2_matmul(const BoundaryField& a, const BoundaryField& b) {
    return zip(a, b, Valence::Mat, [](int d, const double* pa, const double* pb, double* o) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k)
                    acc += pa[sym2_index(i, k, d)] * pb[sym2_index(k, j, d)];
                o[i * d + j] = acc;
            }
    });
}

inline BoundaryField mat_mul(const BoundaryField& a, const BoundaryField& b) {
    return zip(a, b, Valence::Mat, [](int d, const double* x, const double* y, double* o) {
        dense::matmul(x, y, d, o);
    });
}

inline BoundaryField mat_trace(const BoundaryField& m) {
    return map(m, Valence::Scalar, [](int d, const double* x, double* o) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += x[i * d + i];
        o[0] = acc;
    });
}

inline BoundaryField mat_sym(const BoundaryField& m) {
    return map(m, Valence::Sym2, [](int d, const double* x, double* o) { dense::sym2_pack(x, d, o); });
}

inline BoundaryField sym2_to_mat(const BoundaryField& s) {
    return map(s, Valence::Mat, [](int d, const double* x, double* o) { dense::sym2_unpack(x, d, o); });
}

// Pointwise inverse of a positive definite Sym2 field.
inline BoundaryField sym2_inverse(const BoundaryField& s) {
    return map(s, Valence::Sym2, [](int d, const double* x, double* o) { dense::sym2_inverse(x, d, o); });
}

inline BoundaryField scalar_recip(const BoundaryField& s) {
    return map(s, Valence::Scalar, [](int, const double* x, double* o) {
        if (x[0] == 0.0) throw singular_error("scalar field has a zero value");
        o[0] = 1.0 / x[0];
    });
}

}  // namespace field

// ---------------------------------------------------------------------------
// Tangential derivatives
// ---------------------------------------------------------------------------

namespace detail {

// Dense spectral differentiation matrix on an even periodic grid.
inline std::vector<double> spectral_matrix(int n) {
    std::vector<double> m(static_cast<size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            const int diff = j - k;
            const double sgn = (diff % 2 == 0) ? 1.0 : -1.0;
            m[static_cast<size_t>(j) * n + k] = 0.5 * sgn / std::tan(0.5 * diff * kTwoPi / n);
        }
    return m;
}

}  // namespace detail

// d/dy^axis of each component.  Constant backend: zero.  Grid backend:
// 4th-order centered differences by default, or the dense spectral matrix.
inline BoundaryField tangential_derivative(const BoundaryField& f, int axis) {
    const BoundaryPtr& b = f.boundary();
    if (axis < 0 || axis >= b->dim()) throw config_error("derivative axis out of range");
    if (!b->is_grid()) return BoundaryField::zeros(b, f.valence());

    BoundaryField out = BoundaryField::zeros(b, f.valence());
    const int c = f.comps();
    if (b->scheme() == DerivScheme::FiniteDifference4) {
        const double h = b->spacing(axis);
        parallel_for(b->points(), [&](int p) {
            const double* fm2 = f.at(b->shift(p, axis, -2));
            const double* fm1 = f.at(b->shift(p, axis, -1));
            const double* fp1 = f.at(b->shift(p, axis, 1));
            const double* fp2 = f.at(b->shift(p, axis, 2));
            double* o = out.at(p);
            for (int k = 0; k < c; ++k)
                o[k] = (-fp2[k] + 8.0 * fp1[k] - 8.0 * fm1[k] + fm2[k]) / (12.0 * h);
        });
    } else {
        const int n = b->resolution()[static_cast<size_t>(axis)];
        static thread_local std::vector<std::pair<int, std::vector<double>>> cache;
        const std::vector<double>* dm = nullptr;
        for (auto& e : cache)
            if (e.first == n) dm = &e.second;
        if (!dm) {
            cache.emplace_back(n, detail::spectral_matrix(n));
            dm = &cache.back().second;
        }
        // The matrix is circulant, so rows can be applied along the periodic
        // line through each point regardless of where the line is entered.
        const int npts = b->points();
        std::vector<char> done(static_cast<size_t>(npts), 0);
        std::vector<int> line(static_cast<size_t>(n));
        for (int p = 0; p < npts; ++p) {
            if (done[static_cast<size_t>(p)]) continue;
            int q = p;
            for (int m = 0; m < n; ++m) {
                line[static_cast<size_t>(m)] = q;
                q = b->shift(q, axis, 1);
            }
            for (int r = 0; r < n; ++r) {
                double* o = out.at(line[static_cast<size_t>(r)]);
                for (int k = 0; k < c; ++k) {
                    double acc = 0.0;
                    for (int s = 0; s < n; ++s)
                        acc += (*dm)[static_cast<size_t>(r) * n + s] * f.at(line[static_cast<size_t>(s)])[k];
                    o[k] = acc;
                }
            }
            for (int m = 0; m < n; ++m) done[static_cast<size_t>(line[static_cast<size_t>(m)])] = 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// BoundaryMetric: a positive definite Sym2 field with cached inverse and
// volume density.
// ---------------------------------------------------------------------------

class BoundaryMetric {
  public:
    BoundaryMetric() = default;

    explicit BoundaryMetric(BoundaryField h0) : h0_(std::move(h0)) {
        if (h0_.valence() != Valence::Sym2) throw valence_error("boundary metric must be sym2");
        const int d = h0_.dim();
        for (int p = 0; p < h0_.points(); ++p)
            if (!dense::sym2_posdef(h0_.at(p), d))
                throw singular_error("boundary metric not positive definite");
        inv_ = field::sym2_inverse(h0_);
        sqrt_det_ = field::map(h0_, Valence::Scalar, [](int dd, const double* x, double* o) {
            o[0] = std::sqrt(dense::sym2_det(x, dd));
        });
    }

    static BoundaryMetric euclidean(const BoundaryPtr& b) {
        const int d = b->dim();
        std::vector<double> id(static_cast<size_t>(sym2_comps(d)), 0.0);
        for (int i = 0; i < d; ++i) id[static_cast<size_t>(sym2_index(i, i, d))] = 1.0;
        return BoundaryMetric(BoundaryField::uniform(b, Valence::Sym2, id));
    }

    const BoundaryField& metric() const { return h0_; }
    const BoundaryField& inverse() const { return inv_; }
    const BoundaryField& sqrt_det() const { return sqrt_det_; }
    const BoundaryPtr& boundary() const { return h0_.boundary(); }
    bool empty() const { return h0_.empty(); }

    // tr^{h0} S for a covariant Sym2 field.
    BoundaryField trace(const BoundaryField& s) const { return field::trace(inv_, s); }

  private:
    BoundaryField h0_;
    BoundaryField inv_;
    BoundaryField sqrt_det_;
};

// Integral of a scalar field over the boundary against dV_{h0}.  The
// periodic rectangle rule is spectrally accurate for band-limited data; the
// constant backend reduces to f * (2*pi)^d * sqrt(det h0).
inline double boundary_integral(const BoundaryField& f, const BoundaryMetric& h0) {
    if (f.valence() != Valence::Scalar) throw valence_error("boundary_integral needs a scalar");
    require_same_boundary(f.boundary(), h0.boundary());
    const BoundaryPtr& b = f.boundary();
    double cell = 1.0;
    if (b->is_grid()) {
        for (int a = 0; a < b->dim(); ++a) cell *= b->spacing(a);
    } else {
        for (int a = 0; a < b->dim(); ++a) cell *= kTwoPi;
    }
    const BoundaryField& w = h0.sqrt_det();
    const double s = deterministic_sum(b->points(), [&](int p) { return f.at(p)[0] * w.at(p)[0]; });
    return s * cell;
}

}  // namespace ahflow

#endif  // AHFLOW_BOUNDARY_HPP
