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

#ifndef AHFLOW_RENORM_HPP
#define AHFLOW_RENORM_HPP

#include "gauge.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// Scalar quadrature
// ---------------------------------------------------------------------------

namespace quad {

template <class F>
double composite_simpson(F&& f, double a, double b, int intervals) {
    if (intervals < 2) intervals = 2;
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

namespace detail {
template <class F>
double adaptive_step(F&& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                     int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 24) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace quad

struct QuadratureSpec {
    double fixed_step = 0.0;   // > 0 selects composite Simpson at this step
    double adaptive_tol = 1e-12;

    template <class F>
    double integrate(F&& f, double a, double b) const {
        if (b <= a) return 0.0;
        if (fixed_step > 0.0) {
            int intervals = static_cast<int>(std::ceil((b - a) / fixed_step));
            return quad::composite_simpson(f, a, b, intervals);
        }
        return quad::adaptive_simpson(f, a, b, adaptive_tol);
    }
};

// ---------------------------------------------------------------------------
// PhgExpansion: integer-power expansion with integer log powers, plus an
// optional exact-integrand tail for the interior of the collar.  A term
// (p, l, c) stands for c(y) x^p (log x)^l against dx dV_{h0}.
// ---------------------------------------------------------------------------

struct PhgTerm {
    int power = 0;
    int logpow = 0;
    BoundaryField coeff;  // scalar field
};

struct PhgExpansion {
    std::vector<PhgTerm> terms;
    // Exact integrand field at a given x (everything except dV_{h0}).
    std::function<BoundaryField(double)> interior_tail;
    double x_max = 1.0;
    int max_logpow = 2;

    void add_term(int power, int logpow, BoundaryField c) {
        if (logpow < 0 || logpow > max_logpow) throw config_error("log power out of range");
        for (auto& t : terms)
            if (t.power == power && t.logpow == logpow) {
                t.coeff += c;
                return;
            }
        terms.push_back({power, logpow, std::move(c)});
    }

    // Series part evaluated pointwise (used for the tail correction).
    BoundaryField eval_terms(double x, const BoundaryPtr& b) const {
        BoundaryField acc = BoundaryField::zeros(b, Valence::Scalar);
        const double lx = std::log(x);
        for (const auto& t : terms) {
            double w = std::pow(x, t.power);
            for (int l = 0; l < t.logpow; ++l) w *= lx;
            acc.axpy(w, t.coeff);
        }
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Riesz finite part.  Each term integrates in closed form over [0, x_cut]:
//   int_0^c x^{z+p} (log x)^l dx = d^l/ds^l [ c^{s+1}/(s+1) ],  s = z + p,
// which is analytic at z = 0 unless p = -1, where the pole has order l+1.
// The interior piece and the series-vs-exact correction are ordinary
// quadrature and contribute analytically.
// ---------------------------------------------------------------------------

struct PoleEntry {
    int order = 0;      // 1 = simple pole
    double coeff = 0.0; // Laurent coefficient of z^{-order}
};

struct AuditRow {
    int power = 0;
    int logpow = 0;
    double boundary_weight = 0.0;  // integral of the coefficient over the boundary
    int pole_order = 0;
    double fp_contribution = 0.0;
};

struct FinitePartResult {
    double finite_part = 0.0;
    std::vector<PoleEntry> poles;
    std::vector<AuditRow> audit;
    double interior_value = 0.0;
    double correction_value = 0.0;
};

struct RieszOptions {
    double x_cut = 0.4;
    double x_max = 1.0;
    QuadratureSpec quadrature;
    double diff_floor = 0.05;  // lower end of the series-vs-exact correction
};

namespace detail {

inline double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

inline double binom(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

}  // namespace detail

inline FinitePartResult riesz_fp(const PhgExpansion& u, const BoundaryMetric& h0, const RieszOptions& opt) {
    if (opt.x_cut <= 0.0 || opt.x_cut > opt.x_max) throw config_error("need 0 < x_cut <= x_max");
    FinitePartResult res;
    const double X = opt.x_cut;
    const double logX = std::log(X);
    std::vector<double> pole_acc(16, 0.0);

    for (const auto& t : u.terms) {
        const double w = boundary_integral(t.coeff, h0);
        AuditRow row;
        row.power = t.power;
        row.logpow = t.logpow;
        row.boundary_weight = w;
        const int l = t.logpow;
        double fp = 0.0;
        if (t.power != -1) {
            const double s1 = t.power + 1.0;
            for (int i = 0; i <= l; ++i)
                fp += detail::binom(l, i) * std::pow(logX, l - i) * std::pow(X, s1) *
                      (i % 2 == 0 ? 1.0 : -1.0) * detail::factorial(i) / std::pow(s1, i + 1);
        } else {
            // finite part of d^l/dz^l [X^z / z] at z = 0
            fp = std::pow(logX, l + 1) / (l + 1.0);
            row.pole_order = l + 1;
            for (int m = 1; m <= l + 1; ++m) {
                double c = 0.0;
                for (int i = m - 1; i <= l; ++i)
                    c += detail::binom(l, i) * (i % 2 == 0 ? 1.0 : -1.0) * detail::factorial(i) *
                         std::pow(logX, l + 1 - m) / detail::factorial(i + 1 - m);
                pole_acc[static_cast<size_t>(m)] += w * c;
            }
        }
        row.fp_contribution = w * fp;
        res.finite_part += row.fp_contribution;
        res.audit.push_back(row);
    }

    if (u.interior_tail) {
        const BoundaryPtr b = h0.boundary();
        auto f = [&](double x) { return boundary_integral(u.interior_tail(x), h0); };
        res.interior_value = opt.quadrature.integrate(f, X, u.x_max);
        res.finite_part += res.interior_value;

        // series-vs-exact correction below the cut; the neglected piece below
        // diff_floor is of the order of the first untracked series term.  The
        // integrand sits near roundoff, so a fixed-step rule is used (an
        // adaptive one would chase noise).
        const double lo = std::min(opt.diff_floor, X);
        if (lo < X) {
            auto fd = [&](double x) {
                BoundaryField diff = u.interior_tail(x) - u.eval_terms(x, b);
                return boundary_integral(diff, h0);
            };
            int intervals = 256;
            if (opt.quadrature.fixed_step > 0.0)
                intervals = std::max(intervals, static_cast<int>(std::ceil((X - lo) / opt.quadrature.fixed_step)));
            res.correction_value = quad::composite_simpson(fd, lo, X, intervals);
            res.finite_part += res.correction_value;
        }
    }

    for (int m = 1; m < static_cast<int>(pole_acc.size()); ++m)
        if (pole_acc[static_cast<size_t>(m)] != 0.0) res.poles.push_back({m, pole_acc[static_cast<size_t>(m)]});
    return res;
}

// ---------------------------------------------------------------------------
// Volume Jacobian.  For a normal-form metric J = sqrt(det h_x / det h0); in
// general the Schur factor enters: J = sqrt(det H / det h0) * sqrt(S) with
// S = gxx - gxa . H^{-1} gxa.  Computed through tr log, so coefficient k of
// J depends only on metric coefficients <= k.
// ---------------------------------------------------------------------------

inline TruncatedSeries jacobian_series(const CollarMetric& g) {
    const int N = g.trunc_order();
    const BoundaryPtr& b = g.boundary();
    const BoundaryField h0inv = g.h0().inverse();

    // K = h0^{-1} h_x - Id as a Mat series (starts at power 1)
    TruncatedSeries Kser = TruncatedSeries::zeros(b, Valence::Mat, N);
    for (int k = 1; k <= N; ++k)
        Kser[k] = field::sym2_matmul(h0inv, g.gab()[k]);

    // tr log(Id + K) = sum_q (-1)^{q+1} tr(K^q)/q
    TruncatedSeries logdet = TruncatedSeries::zeros(b, Valence::Scalar, N);
    TruncatedSeries P = Kser;
    for (int q = 1; q <= N; ++q) {
        TruncatedSeries trP = series::map(P, Valence::Scalar, field::mat_trace);
        trP *= (q % 2 == 1 ? 1.0 : -1.0) / q;
        logdet += trP;
        if (q < N) P = series::convolve(P, Kser, Valence::Mat, field::mat_mul);
    }
    logdet *= 0.5;
    TruncatedSeries J = series::exp(logdet);

    if (!g.is_normal_form()) {
        TruncatedSeries Hinv = series_inverse(g.gab());
        TruncatedSeries V = series::convolve(Hinv, g.gxa(), Valence::Vector,
                                             [](const BoundaryField& hi, const BoundaryField& c) {
                                                 return field::raise(hi, c);
                                             });
        TruncatedSeries S = g.gxx() - series::convolve(V, g.gxa(), Valence::Scalar,
                                                       [](const BoundaryField& v, const BoundaryField& c) {
                                                           return field::dot(v, c);
                                                       });
        J = series::scalar_mul(J, series::sqrt(S));
    }
    return J;
}

// Pointwise exact Jacobian of the jet-polynomial metric at a sample x.
inline BoundaryField jacobian_at(const CollarMetric& g, double x) {
    BoundaryField H = g.gab().eval(x);
    const BoundaryField& h0 = g.h0().metric();
    BoundaryField J = field::zip(H, h0, Valence::Scalar, [](int dd, const double* hh, const double* h00, double* o) {
        o[0] = std::sqrt(dense::sym2_det(hh, dd) / dense::sym2_det(h00, dd));
    });
    if (!g.is_normal_form()) {
        BoundaryField a = g.gxx().eval(x);
        BoundaryField bb = g.gxa().eval(x);
        BoundaryField s = field::zip(H, bb, Valence::Scalar, [&](int dd, const double* hh, const double* bv, double* o) {
            std::vector<double> hinv(static_cast<size_t>(sym2_comps(dd)));
            dense::sym2_inverse(hh, dd, hinv.data());
            double acc = 0.0;
            for (int i = 0; i < dd; ++i)
                for (int j = 0; j < dd; ++j) acc += hinv[static_cast<size_t>(sym2_index(i, j, dd))] * bv[i] * bv[j];
            o[0] = acc;
        });
        J = field::zip(J, field::zip(a, s, Valence::Scalar,
                                     [](int, const double* av, const double* sv, double* o) {
                                         o[0] = std::sqrt(av[0] - sv[0]);
                                     }),
                       Valence::Scalar,
                       [](int, const double* jv, const double* fv, double* o) { o[0] = jv[0] * fv[0]; });
    }
    return J;
}

// The spec-level operation: PhgExpansion of dV_g / (dx dV_{h0}) = x^{-n} J.
inline PhgExpansion volume_jacobian(const CollarMetric& g) {
    if (!g.is_normal_form()) throw config_error("volume_jacobian needs a normal-form metric");
    TruncatedSeries J = jacobian_series(g);
    PhgExpansion u;
    for (int k = 0; k <= J.trunc_order(); ++k) u.add_term(k - g.n(), 0, J[k]);
    return u;
}

// ---------------------------------------------------------------------------
// Renormalized volume and renormalized curvature integrals
// ---------------------------------------------------------------------------

struct RenormResult {
    double value = 0.0;
    FinitePartResult fp;
};

inline RenormResult renormalized_volume(const CollarMetric& g, const RieszOptions& opt) {
    const int n = g.n();
    TruncatedSeries J = jacobian_series(g);
    PhgExpansion u;
    for (int k = 0; k <= J.trunc_order(); ++k) u.add_term(k - n, 0, J[k]);
    u.x_max = opt.x_max;
    u.interior_tail = [g, n](double x) {
        BoundaryField j = jacobian_at(g, x);
        j *= std::pow(x, -n);
        return j;
    };
    RenormResult r;
    r.fp = riesz_fp(u, g.h0(), opt);
    r.value = r.fp.finite_part;
    return r;
}

// FP of int u dV_g for a scalar series integrand u (the curvature case);
// the exact interior integrand pairs the jet polynomial of u with the
// pointwise Jacobian.
inline RenormResult renormalized_integral(const CollarMetric& g, const TruncatedSeries& useries,
                                          const RieszOptions& opt) {
    const int n = g.n();
    TruncatedSeries J = jacobian_series(g);
    TruncatedSeries prod = series::scalar_mul(useries, J);
    PhgExpansion u;
    for (int k = 0; k <= prod.trunc_order(); ++k) u.add_term(k - n, 0, prod[k]);
    u.x_max = opt.x_max;
    TruncatedSeries ucopy = useries;
    u.interior_tail = [g, ucopy, n](double x) {
        BoundaryField j = jacobian_at(g, x);
        BoundaryField uval = ucopy.eval(x);
        BoundaryField out = field::scalar_mul(uval, j);
        out *= std::pow(x, -n);
        return out;
    };
    RenormResult r;
    r.fp = riesz_fp(u, g.h0(), opt);
    r.value = r.fp.finite_part;
    return r;
}

// FP of int u dV_g for a general PhgExpansion integrand (integer powers,
// integer log powers, no own tail).
inline RenormResult renormalized_integral(const CollarMetric& g, const PhgExpansion& uphg,
                                          const RieszOptions& opt) {
    const int n = g.n();
    TruncatedSeries J = jacobian_series(g);
    PhgExpansion u;
    u.max_logpow = uphg.max_logpow;
    for (const auto& t : uphg.terms)
        for (int k = 0; k <= J.trunc_order(); ++k)
            u.add_term(t.power + k - n, t.logpow, field::scalar_mul(t.coeff, J[k]));
    u.x_max = opt.x_max;
    PhgExpansion ucopy = uphg;
    u.interior_tail = [g, ucopy, n](double x) {
        BoundaryField j = jacobian_at(g, x);
        BoundaryField uval = ucopy.eval_terms(x, g.boundary());
        BoundaryField out = field::scalar_mul(uval, j);
        out *= std::pow(x, -n);
        return out;
    };
    RenormResult r;
    r.fp = riesz_fp(u, g.h0(), opt);
    r.value = r.fp.finite_part;
    return r;
}

// Residue at z = 0 of int x^z s dV_g for a scalar series s: the boundary
// integral of coefficient n-1 of s J.
inline double riesz_residue(const CollarMetric& g, const TruncatedSeries& s) {
    TruncatedSeries J = jacobian_series(g);
    TruncatedSeries prod = series::scalar_mul(s, J);
    if (prod.trunc_order() < g.n() - 1) throw config_error("series too short for residue");
    return boundary_integral(prod[g.n() - 1], g.h0());
}

// ---------------------------------------------------------------------------
// Change-of-bdf discrepancy of a renormalized integral, two routes:
//  (a) direct difference of the regularizations relative to x and
//      x' = e^{omega} x over the same collar region;
//  (b) the boundary residue formula: the difference equals
//      sum_{i+j+k = n-1} int u_i omega_j J_k dV_{h0},
//      the pole-interaction limit of (e^{z omega} - 1) against the simple
//      poles; under the evenness hypotheses it collapses to
//      (1/2) u_0 omega_0 tr^{h0} h_{n-1} (+ u_{n-1} omega_0 when present).
// ---------------------------------------------------------------------------

struct DiscrepancyResult {
    double direct = 0.0;            // route (a)
    double boundary_formula = 0.0;  // route (b)
    double gap = 0.0;
    double base_value = 0.0;        // I(0) with the original bdf
    double transformed_value = 0.0; // I(0) with the new bdf
};

inline DiscrepancyResult bdf_discrepancy(const CollarMetric& g, const TruncatedSeries& useries,
                                         const ConformalFactor& w, const RieszOptions& opt) {
    if (g.boundary()->is_grid())
        throw config_error("two-route bdf discrepancy requires the constant backend (moving wall)");
    DiscrepancyResult out;

    // route (b)
    {
        TruncatedSeries J = jacobian_series(g);
        const int n = g.n();
        BoundaryField acc = BoundaryField::zeros(g.boundary(), Valence::Scalar);
        for (int i = 0; i <= n - 1; ++i)
            for (int j = 0; i + j <= n - 1; ++j) {
                const int k = n - 1 - i - j;
                if (i > useries.trunc_order() || j > w.omega.trunc_order() || k > J.trunc_order()) continue;
                acc += field::scalar_mul(useries[i], field::scalar_mul(w.omega[j], J[k]));
            }
        out.boundary_formula = boundary_integral(acc, g.h0());
    }

    // route (a)
    {
        RenormResult base = renormalized_integral(g, useries, opt);
        out.base_value = base.value;

        CollarMetric gp = change_bdf(g, w);
        TruncatedSeries s = detail::invert_bdf_substitution(w.omega.truncated(g.trunc_order()));
        TruncatedSeries up = series::compose(useries, s);

        // the wall and the cut move with the new defining function
        const double scale_at_wall = std::exp(w.omega.eval(opt.x_max).raw()[0]);
        const double scale_at_cut = std::exp(w.omega.eval(opt.x_cut).raw()[0]);
        RieszOptions opt2 = opt;
        opt2.x_max = scale_at_wall * opt.x_max;
        opt2.x_cut = scale_at_cut * opt.x_cut;
        RenormResult tr = renormalized_integral(gp, up, opt2);
        out.transformed_value = tr.value;
        out.direct = tr.value - base.value;
    }

    out.gap = std::abs(out.direct - out.boundary_formula);
    return out;
}

}  // namespace ahflow

#endif  // AHFLOW_RENORM_HPP
