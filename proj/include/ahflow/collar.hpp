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

#ifndef AHFLOW_COLLAR_HPP
#define AHFLOW_COLLAR_HPP

#include <random>

#include "series.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// BlockedSym2: a symmetric 2-tensor on the collar stored as the three blocks
// relative to (dx, dy^alpha):  T_xx (scalar), T_xa (covector), T_ab (sym2).
// Used for x^2 g itself, for Ebar, and for flow right-hand sides.
// ---------------------------------------------------------------------------

struct BlockedSym2 {
    TruncatedSeries xx;
    TruncatedSeries xa;
    TruncatedSeries ab;

    static BlockedSym2 zeros(const BoundaryPtr& b, int trunc) {
        return {TruncatedSeries::zeros(b, Valence::Scalar, trunc),
                TruncatedSeries::zeros(b, Valence::Covector, trunc),
                TruncatedSeries::zeros(b, Valence::Sym2, trunc)};
    }

    int trunc_order() const { return xx.trunc_order(); }
    const BoundaryPtr& boundary() const { return xx.boundary(); }

    BlockedSym2& operator+=(const BlockedSym2& o) {
        xx += o.xx;
        xa += o.xa;
        ab += o.ab;
        return *this;
    }
    BlockedSym2& operator-=(const BlockedSym2& o) {
        xx -= o.xx;
        xa -= o.xa;
        ab -= o.ab;
        return *this;
    }
    BlockedSym2& operator*=(double c) {
        xx *= c;
        xa *= c;
        ab *= c;
        return *this;
    }
    friend BlockedSym2 operator+(BlockedSym2 a, const BlockedSym2& b) { return a += b; }
    friend BlockedSym2 operator-(BlockedSym2 a, const BlockedSym2& b) { return a -= b; }
    friend BlockedSym2 operator*(double c, BlockedSym2 a) { return a *= c; }

    void axpy(double c, const BlockedSym2& o) {
        xx.axpy(c, o.xx);
        xa.axpy(c, o.xa);
        ab.axpy(c, o.ab);
    }

    double sup_norm() const { return std::max({xx.sup_norm(), xa.sup_norm(), ab.sup_norm()}); }
    bool all_finite() const { return xx.all_finite() && xa.all_finite() && ab.all_finite(); }

    BlockedSym2 truncated(int order) const {
        return {xx.truncated(order), xa.truncated(order), ab.truncated(order)};
    }

    BlockedSym2 shifted_up(int j) const {
        return {xx.shifted_up(j), xa.shifted_up(j), ab.shifted_up(j)};
    }
};

// ---------------------------------------------------------------------------
// CollarMetric: the blocks of gbar = x^2 g in collar coordinates, with the
// bulk dimension n = 2m (even).  In normal form gxx = 1 and gxa = 0 exactly
// and the tangential block is the family h(x).
// ---------------------------------------------------------------------------

class CollarMetric {
  public:
    CollarMetric() = default;

    CollarMetric(int n, BlockedSym2 blocks, bool normal_form = false)
        : n_(n), g_(std::move(blocks)), normal_form_(normal_form) {
        if (n_ < 4 || n_ % 2 != 0) throw config_error("bulk dimension must be even and >= 4");
        if (g_.boundary()->dim() != n_ - 1)
            throw config_error("boundary dimension must equal n - 1");
        if (g_.xa.trunc_order() != g_.xx.trunc_order() || g_.ab.trunc_order() != g_.xx.trunc_order())
            throw config_error("block truncation orders must agree");
        h0_ = BoundaryMetric(g_.ab[0]);
        if (normal_form_) {
            BoundaryField one = BoundaryField::uniform_scalar(g_.boundary(), 1.0);
            if ((g_.xx[0] - one).sup_norm() > 0.0 || g_.xa.sup_norm() > 0.0)
                throw config_error("normal form requires gxx = 1 and gxa = 0");
            for (int k = 1; k <= g_.xx.trunc_order(); ++k)
                if (g_.xx[k].sup_norm() > 0.0) throw config_error("normal form requires gxx = 1");
        }
    }

    // Normal-form constructor from the tangential family h(x).
    static CollarMetric normal_form(int n, TruncatedSeries h) {
        const BoundaryPtr b = h.boundary();
        BlockedSym2 blocks = BlockedSym2::zeros(b, h.trunc_order());
        blocks.ab = std::move(h);
        blocks.xx[0] = BoundaryField::uniform_scalar(b, 1.0);
        return CollarMetric(n, std::move(blocks), true);
    }

    int n() const { return n_; }
    int m() const { return n_ / 2; }
    int trunc_order() const { return g_.trunc_order(); }
    const BoundaryPtr& boundary() const { return g_.boundary(); }
    const BlockedSym2& blocks() const { return g_; }
    bool is_normal_form() const { return normal_form_; }
    const BoundaryMetric& h0() const { return h0_; }

    const TruncatedSeries& gxx() const { return g_.xx; }
    const TruncatedSeries& gxa() const { return g_.xa; }
    const TruncatedSeries& gab() const { return g_.ab; }

    CollarMetric with_blocks(BlockedSym2 blocks, bool normal = false) const {
        return CollarMetric(n_, std::move(blocks), normal);
    }

  private:
    int n_ = 0;
    BlockedSym2 g_;
    bool normal_form_ = false;
    BoundaryMetric h0_;
};

// ---------------------------------------------------------------------------
// Inverse metric blocks via the Schur complement:
//   A = gbar^{xx} (scalar), B = gbar^{x alpha} (vector), K = gbar^{ab} (sym2).
// ---------------------------------------------------------------------------

struct CollarInverse {
    TruncatedSeries A;  // scalar
    TruncatedSeries B;  // vector
    TruncatedSeries K;  // sym2, contravariant
};

inline CollarInverse inverse_blocks(const BlockedSym2& g) {
    CollarInverse inv;
    TruncatedSeries Hinv = series_inverse(g.ab);
    TruncatedSeries V = series::convolve(Hinv, g.xa, Valence::Vector, [](const BoundaryField& hi, const BoundaryField& c) {
        return field::raise(hi, c);
    });
    TruncatedSeries bv = series::convolve(V, g.xa, Valence::Scalar, [](const BoundaryField& v, const BoundaryField& c) {
        return field::dot(v, c);
    });
    TruncatedSeries S = g.xx - bv;
    inv.A = series_inverse(S);
    inv.B = series::scalar_mul(inv.A, V);
    inv.B *= -1.0;
    TruncatedSeries W = series::convolve(V, V, Valence::Sym2, [](const BoundaryField& a, const BoundaryField& b) {
        return field::outer_sym(a, b);
    });
    inv.K = Hinv + series::scalar_mul(inv.A, W);
    return inv;
}

inline CollarInverse inverse_blocks(const CollarMetric& g) { return inverse_blocks(g.blocks()); }

// ---------------------------------------------------------------------------
// Evenness in the block sense: a collar metric is even to order 2l when the
// xx and ab blocks have no odd coefficients at powers <= 2l-1 and the cross
// block has no even coefficients at powers <= 2l.
// ---------------------------------------------------------------------------

struct MetricParityReport {
    int evenness_order = 0;
    int first_violation_power = -1;   // power of the first violating coefficient
    std::string first_violation_block;
};

inline double default_metric_parity_tol(const CollarMetric& g, double rel = 1e-10) {
    double scale = std::max(default_parity_tol(g.gxx(), 1.0), default_parity_tol(g.gab(), 1.0));
    return rel * std::max(scale, 1e-300);
}

inline MetricParityReport metric_evenness(const CollarMetric& g, double tol) {
    MetricParityReport rep;
    const int n = g.trunc_order();
    auto diag_bad = [&](int p) { return p % 2 == 1 && (g.gxx()[p].sup_norm() > tol || g.gab()[p].sup_norm() > tol); };
    auto cross_bad = [&](int p) { return p % 2 == 0 && g.gxa()[p].sup_norm() > tol; };
    int order = n + 1 - (n + 1) % 2;  // largest even <= N+1
    for (int p = 0; p <= n; ++p) {
        if (diag_bad(p)) {
            order = p - 1;
            rep.first_violation_power = p;
            rep.first_violation_block = g.gxx()[p].sup_norm() > tol ? "xx" : "ab";
            break;
        }
        if (cross_bad(p)) {
            // an even cross coefficient at power p caps evenness below p
            order = p - 2 < 0 ? 0 : p - 2;
            rep.first_violation_power = p;
            rep.first_violation_block = "xa";
            break;
        }
    }
    if (order < 0) order = 0;
    rep.evenness_order = order - order % 2;
    return rep;
}

// ---------------------------------------------------------------------------
// Construction helpers and named presets
// ---------------------------------------------------------------------------

inline BoundaryField identity_sym2(const BoundaryPtr& b) {
    const int d = b->dim();
    std::vector<double> id(static_cast<size_t>(sym2_comps(d)), 0.0);
    for (int i = 0; i < d; ++i) id[static_cast<size_t>(sym2_index(i, i, d))] = 1.0;
    return BoundaryField::uniform(b, Valence::Sym2, id);
}

// The cusp model: h(x) = h0 frozen, hyperbolic and stationary.
inline CollarMetric preset_cusp(int n, int trunc, const BoundaryPtr& b) {
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), trunc);
    return CollarMetric::normal_form(n, std::move(h));
}

namespace detail {

inline BoundaryField random_sym2(const BoundaryPtr& b, std::mt19937_64& rng, double amp) {
    const int d = b->dim();
    std::uniform_real_distribution<double> u(-amp, amp);
    std::vector<double> v(static_cast<size_t>(sym2_comps(d)));
    for (auto& x : v) x = u(rng);
    return BoundaryField::uniform(b, Valence::Sym2, v);
}

inline BoundaryField random_covector(const BoundaryPtr& b, std::mt19937_64& rng, double amp) {
    const int d = b->dim();
    std::uniform_real_distribution<double> u(-amp, amp);
    std::vector<double> v(static_cast<size_t>(d));
    for (auto& x : v) x = u(rng);
    return BoundaryField::uniform(b, Valence::Covector, v);
}

inline BoundaryField remove_h0_trace(const BoundaryField& s, const BoundaryMetric& h0) {
    // subtract (tr^{h0} s / d) h0 so that tr^{h0} of the result vanishes
    BoundaryField tr = h0.trace(s);
    tr *= -1.0 / s.dim();
    return s + field::scalar_mul(tr, h0.metric());
}

}  // namespace detail

// Partially even model with a traced first odd term: h = h0 + x^2 h2 + x^3 h3,
// tr^{h0} h3 != 0.  Not volume renormalizable.
inline CollarMetric preset_pe_model(int n, int trunc, const BoundaryPtr& b, unsigned seed = 1) {
    std::mt19937_64 rng(seed);
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), trunc);
    if (trunc < n - 1) throw config_error("trunc_order too small for preset");
    h.set(2, detail::random_sym2(b, rng, 0.05));
    BoundaryField h3 = detail::random_sym2(b, rng, 0.05);
    // make sure the trace part is really there
    BoundaryField bump = identity_sym2(b);
    bump *= 0.05;
    h3 += bump;
    h.set(n - 1, h3);
    return CollarMetric::normal_form(n, std::move(h));
}

// Volume renormalizable, non-Einstein: h = h0 + x^2 h2 + x^3 h3 + x^4 h4 with
// tr^{h0} h3 = 0 pointwise and h3 != 0.
inline CollarMetric preset_vr_generic(int n, int trunc, const BoundaryPtr& b, unsigned seed = 1) {
    std::mt19937_64 rng(seed);
    if (trunc < n) throw config_error("trunc_order too small for preset");
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), trunc);
    BoundaryMetric h0(h[0]);
    h.set(2, detail::random_sym2(b, rng, 0.05));
    h.set(n - 1, detail::remove_h0_trace(detail::random_sym2(b, rng, 0.08), h0));
    h.set(n, detail::random_sym2(b, rng, 0.03));
    return CollarMetric::normal_form(n, std::move(h));
}

// First odd coefficient at power one: not even to any positive order.
inline CollarMetric preset_odd_seeded(int n, int trunc, const BoundaryPtr& b, unsigned seed = 1) {
    std::mt19937_64 rng(seed);
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), trunc);
    h.set(1, detail::random_sym2(b, rng, 0.05));
    if (trunc >= 2) h.set(2, detail::random_sym2(b, rng, 0.05));
    return CollarMetric::normal_form(n, std::move(h));
}

struct RandomMetricOptions {
    int n = 4;
    int trunc = 8;
    double amplitude = 0.05;
    bool with_cross = false;     // random odd cross block
    bool normal_form = true;     // otherwise gxx gets random even coefficients
    int evenness = -1;           // target evenness order; default n - 2
    unsigned seed = 1;
};

// Random metric that is even to the requested order in the block sense, with
// a free first odd coefficient above it.
inline CollarMetric random_even_metric(const BoundaryPtr& b, const RandomMetricOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    const int n = opt.n;
    const int two_l = opt.evenness >= 0 ? opt.evenness : n - 2;
    if (two_l % 2 != 0) throw config_error("evenness order must be even");
    BlockedSym2 g = BlockedSym2::zeros(b, opt.trunc);
    g.xx[0] = BoundaryField::uniform_scalar(b, 1.0);
    g.ab[0] = identity_sym2(b);
    std::uniform_real_distribution<double> u(-opt.amplitude, opt.amplitude);
    for (int p = 1; p <= opt.trunc; ++p) {
        const bool odd = p % 2 == 1;
        const bool diag_allowed = !odd || p > two_l;   // odd powers appear above the evenness order
        if (diag_allowed && p >= 2) {
            g.ab[p] = detail::random_sym2(b, rng, opt.amplitude);
            if (!opt.normal_form) g.xx[p] = BoundaryField::uniform_scalar(b, u(rng));
        }
        if (opt.with_cross && !opt.normal_form) {
            const bool cross_allowed = odd || p > two_l + 1;  // cross block odd to 2l+1
            if (cross_allowed) g.xa[p] = detail::random_covector(b, rng, opt.amplitude);
        }
    }
    return CollarMetric(n, std::move(g), false);
}

}  // namespace ahflow

#endif  // AHFLOW_COLLAR_HPP
