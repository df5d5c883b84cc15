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

#ifndef AHFLOW_GAUGE_HPP
#define AHFLOW_GAUGE_HPP

#include "geometry.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// ConformalFactor: omega with x' = e^{omega} x.  The boundary value omega_0
// selects the conformal representative e^{2 omega_0} h0.
// ---------------------------------------------------------------------------

struct ConformalFactor {
    TruncatedSeries omega;  // scalar series

    const BoundaryField& boundary_value() const { return omega[0]; }

    static ConformalFactor zero(const BoundaryPtr& b, int trunc) {
        return {TruncatedSeries::zeros(b, Valence::Scalar, trunc)};
    }
};

// ---------------------------------------------------------------------------
// Hamilton-Jacobi solvers.  Both are order-by-order sweeps against the exact
// equation assembled with the series engine itself: the residual coefficient
// at x^{j-1} is affine in omega_j with a known slope, so each order is
// eliminated exactly.
// ---------------------------------------------------------------------------

namespace detail {

// (d omega)^2 contracted tangentially: h^{ab} d_a w d_b w as a series.
inline TruncatedSeries tangential_energy(const TruncatedSeries& hinv, const TruncatedSeries& w) {
    TruncatedSeries grad = series::grad_tan(w);
    TruncatedSeries outer = series::convolve(grad, grad, Valence::Sym2,
                                             [](const BoundaryField& a, const BoundaryField& b) {
                                                 return field::outer_sym(a, b);
                                             });
    return series::convolve(hinv, outer, Valence::Scalar,
                            [](const BoundaryField& k, const BoundaryField& s) { return field::trace(k, s); });
}

}  // namespace detail

// Residual of dx w + (x/2)((dx w)^2 + h^{ab} da w db w) for a normal-form
// metric, as a series of truncation order N-1.
inline TruncatedSeries hj_normal_residual(const CollarMetric& g, const TruncatedSeries& w) {
    TruncatedSeries hinv = series_inverse(g.gab());
    TruncatedSeries dw = w.deriv_x();
    TruncatedSeries quad = series::scalar_mul(dw, dw);
    quad += detail::tangential_energy(hinv, w).truncated(quad.trunc_order());
    TruncatedSeries r = dw;
    r += (0.5 * quad.shifted_up(1)).truncated(dw.trunc_order());
    return r;
}

// Solves the normal-form eikonal recursion with boundary value omega0.
// omega_1 = 0 always; with constant coefficients the solution is omega0
// itself.
inline ConformalFactor solve_hj_normal(const CollarMetric& g, const BoundaryField& omega0) {
    if (!g.is_normal_form()) throw config_error("solve_hj_normal needs a normal-form metric");
    if (g.trunc_order() < 2) throw config_error("solve_hj_normal needs truncation order >= 2");
    const int N = g.trunc_order();
    TruncatedSeries w = TruncatedSeries::zeros(g.boundary(), Valence::Scalar, N);
    w.set(0, omega0);
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 1; j <= N; ++j) {
            TruncatedSeries r = hj_normal_residual(g, w);
            BoundaryField corr = r[j - 1];
            corr *= -1.0 / j;
            w[j] += corr;
        }
    }
    return {std::move(w)};
}

// Residual of 2 <dx, dw>_gbar + x |dw|^2_gbar - (1 - gbar^{xx})/x for a
// general collar metric.
inline TruncatedSeries hj_general_residual(const CollarMetric& g, const TruncatedSeries& w) {
    CollarInverse inv = inverse_blocks(g);
    TruncatedSeries dw = w.deriv_x();
    TruncatedSeries grad = series::grad_tan(w);
    auto dot_k = [](const BoundaryField& v, const BoundaryField& c) { return field::dot(v, c); };

    TruncatedSeries pair = series::scalar_mul(inv.A, dw);
    pair += series::convolve(inv.B, grad, Valence::Scalar, dot_k).truncated(pair.trunc_order());
    pair *= 2.0;

    TruncatedSeries energy = series::scalar_mul(inv.A, series::scalar_mul(dw, dw));
    {
        TruncatedSeries cross = series::scalar_mul(dw, series::convolve(inv.B, grad, Valence::Scalar, dot_k));
        cross *= 2.0;
        energy += cross.truncated(energy.trunc_order());
        energy += detail::tangential_energy(inv.K, w).truncated(energy.trunc_order());
    }

    // (1 - A)/x ; the order-zero part must vanish for an AH metric.
    TruncatedSeries one_minus_A = inv.A;
    one_minus_A *= -1.0;
    one_minus_A[0] += BoundaryField::uniform_scalar(g.boundary(), 1.0);
    const double ah_defect = one_minus_A[0].sup_norm();
    if (ah_defect > 1e-8)
        throw config_error("metric is not AH relative to its defining function (gbar^{xx}(0) != 1)");
    one_minus_A[0] *= 0.0;
    TruncatedSeries rhs = one_minus_A.shifted_down(1, 1e-8);

    TruncatedSeries r = pair;
    r += energy.shifted_up(1).truncated(r.trunc_order());
    r -= rhs.truncated(r.trunc_order());
    return r;
}

// Solves for the special boundary defining function of an AH collar metric:
// x' = e^{omega} x with omega|_{x=0} = 0.  Normal-form input returns zero.
inline ConformalFactor solve_hj_general(const CollarMetric& g) {
    const int N = g.trunc_order();
    if (N < 2) throw config_error("solve_hj_general needs truncation order >= 2");
    TruncatedSeries w = TruncatedSeries::zeros(g.boundary(), Valence::Scalar, N);
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 1; j <= N; ++j) {
            TruncatedSeries r = hj_general_residual(g, w);
            BoundaryField corr = r[j - 1];
            corr *= -1.0 / (2.0 * j);
            w[j] += corr;
        }
    }
    return {std::move(w)};
}

// Pointwise residual of the exact eikonal equation at a sample x, using the
// jet polynomials as the metric data.  Used for the order-of-accuracy fits.
inline double hj_residual_at(const CollarMetric& g, const TruncatedSeries& w, double x) {
    // evaluate blocks and omega pointwise
    BoundaryField a = g.gxx().eval(x);
    BoundaryField b = g.gxa().eval(x);
    BoundaryField H = g.gab().eval(x);
    BoundaryField dw = w.deriv_x().eval(x);
    TruncatedSeries gradw_series = series::grad_tan(w);
    BoundaryField gradw = gradw_series.eval(x);

    const int d = g.boundary()->dim();
    double worst = 0.0;
    std::vector<double> full((size_t)(d + 1) * (d + 1)), inv_full((size_t)(d + 1) * (d + 1));
    std::vector<double> l((size_t)(d + 1) * (d + 1)), col((size_t)(d + 1));
    for (int p = 0; p < a.points(); ++p) {
        // assemble the (d+1) x (d+1) matrix of gbar at this point
        const int D = d + 1;
        full[0] = a.at(p)[0];
        for (int i = 0; i < d; ++i) {
            full[(size_t)(i + 1)] = b.at(p)[i];
            full[(size_t)(i + 1) * D] = b.at(p)[i];
            for (int j = 0; j < d; ++j) full[(size_t)(i + 1) * D + (j + 1)] = H.at(p)[sym2_index(i, j, d)];
        }
        l = full;
        if (!dense::cholesky(l.data(), D)) throw singular_error("collar metric not positive definite");
        for (int j = 0; j < D; ++j) {
            std::fill(col.begin(), col.begin() + D, 0.0);
            col[(size_t)j] = 1.0;
            dense::cholesky_solve(l.data(), D, col.data());
            for (int i = 0; i < D; ++i) inv_full[(size_t)i * D + j] = col[(size_t)i];
        }
        const double Axx = inv_full[0];
        double pair = Axx * dw.at(p)[0];
        for (int i = 0; i < d; ++i) pair += inv_full[(size_t)(i + 1)] * gradw.at(p)[i];
        double energy = Axx * dw.at(p)[0] * dw.at(p)[0];
        for (int i = 0; i < d; ++i) energy += 2.0 * inv_full[(size_t)(i + 1)] * dw.at(p)[0] * gradw.at(p)[i];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                energy += inv_full[(size_t)(i + 1) * D + (j + 1)] * gradw.at(p)[i] * gradw.at(p)[j];
        const double rhs = (1.0 - Axx) / x;
        worst = std::max(worst, std::abs(2.0 * pair + x * energy - rhs));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Change of boundary defining function, x' = e^{omega} x (forward factor).
// The blocks relative to x' are assembled exactly:
//   P = (1 + x dx omega)^{-1},  Q_a = x da omega,
//   g'_{x'x'} = gxx P^2
//   g'_{x'a}  = e^{omega} P (gxa - gxx P Q)
//   g'_{ab}   = e^{2 omega} (gab + gxx P^2 Q Q - P Q gxa - P Q gxb)
// followed by the substitution x = s(x'), the series reversal of
// x' = e^{omega(x)} x.  Everything is pointwise in y, so any backend works.
// ---------------------------------------------------------------------------

namespace detail {

// Series reversal: find s(x') with s(0) = 0 and s * exp(omega o s) = x'.
// Each coefficient is fixed by an affine solve.
inline TruncatedSeries invert_bdf_substitution(const TruncatedSeries& omega) {
    const int N = omega.trunc_order();
    const BoundaryPtr& b = omega.boundary();
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, N);
    TruncatedSeries xprime = TruncatedSeries::zeros(b, Valence::Scalar, N);
    if (N >= 1) xprime[1] = BoundaryField::uniform_scalar(b, 1.0);

    auto forward = [&](const TruncatedSeries& sub) {
        return series::scalar_mul(sub, series::exp(series::compose(omega, sub)));
    };

    for (int k = 1; k <= N; ++k) {
        TruncatedSeries r0 = forward(s);
        r0 -= xprime;
        TruncatedSeries s1 = s;
        s1[k] += BoundaryField::uniform_scalar(b, 1.0);
        TruncatedSeries r1 = forward(s1);
        r1 -= xprime;
        // affine in s_k: pick the root pointwise
        BoundaryField num = r0[k];
        BoundaryField den = r1[k] - r0[k];
        BoundaryField corr = field::zip(num, den, Valence::Scalar,
                                        [](int, const double* nn, const double* dd, double* o) {
                                            if (dd[0] == 0.0) throw singular_error("degenerate bdf substitution");
                                            o[0] = -nn[0] / dd[0];
                                        });
        s[k] += corr;
    }
    return s;
}

}  // namespace detail

inline CollarMetric change_bdf(const CollarMetric& g, const ConformalFactor& w) {
    const int N = g.trunc_order();
    if (w.omega.trunc_order() < N) throw config_error("conformal factor series too short");
    require_same_boundary(g.boundary(), w.omega.boundary());
    const TruncatedSeries omega = w.omega.truncated(N);
    const BoundaryPtr& b = g.boundary();

    TruncatedSeries xdw = omega.deriv_x().shifted_up(1).truncated(N);
    TruncatedSeries onep = xdw;
    onep[0] += BoundaryField::uniform_scalar(b, 1.0);
    TruncatedSeries P = series_inverse(onep);
    TruncatedSeries Q = series::grad_tan(omega).shifted_up(1).truncated(N);
    TruncatedSeries PQ = series::scalar_mul(P, Q);

    TruncatedSeries expw = series::exp(omega);
    TruncatedSeries exp2w = series::scalar_mul(expw, expw);
    const BlockedSym2& gb = g.blocks();

    TruncatedSeries P2 = series::scalar_mul(P, P);
    TruncatedSeries new_xx = series::scalar_mul(gb.xx, P2);

    TruncatedSeries inner = gb.xa - series::scalar_mul(gb.xx, PQ);
    TruncatedSeries new_xa = series::scalar_mul(series::scalar_mul(expw, P), inner);

    auto outer_k = [](const BoundaryField& u, const BoundaryField& v) { return field::outer_sym(u, v); };
    TruncatedSeries qq = series::convolve(PQ, PQ, Valence::Sym2, outer_k);
    TruncatedSeries cross = series::convolve(PQ, gb.xa, Valence::Sym2, outer_k);
    cross *= 2.0;
    TruncatedSeries new_ab = gb.ab + series::scalar_mul(gb.xx, qq) - cross;
    new_ab = series::scalar_mul(exp2w, new_ab);

    TruncatedSeries s = detail::invert_bdf_substitution(omega);
    BlockedSym2 out;
    out.xx = series::compose(new_xx, s);
    out.xa = series::compose(new_xa, s);
    out.ab = series::compose(new_ab, s);
    return g.with_blocks(std::move(out), false);
}

// ---------------------------------------------------------------------------
// Normal-form reduction.  After passing to the special bdf the remaining
// cross block is eliminated order by order with a fibered diffeomorphism
// y = ytilde + psi(x, ytilde); the tangential composition is a truncated
// Taylor sum in the displacement.
// ---------------------------------------------------------------------------

namespace detail {

// c(x, y + psi(x,y)) as a truncated series; psi holds d scalar displacement
// series, each O(x).
inline TruncatedSeries compose_tangential_shift(const TruncatedSeries& c,
                                                const std::vector<TruncatedSeries>& psi) {
    const int N = c.trunc_order();
    const BoundaryPtr& b = c.boundary();
    const int d = b->dim();
    if (!b->is_grid()) return c;  // constant fields do not move

    // lowest order of each displacement (for pruning)
    std::vector<int> low(static_cast<size_t>(d), N + 1);
    for (int gdx = 0; gdx < d; ++gdx)
        for (int k = 1; k <= psi[static_cast<size_t>(gdx)].trunc_order(); ++k)
            if (psi[static_cast<size_t>(gdx)][k].sup_norm() > 0.0) {
                low[static_cast<size_t>(gdx)] = k;
                break;
            }

    TruncatedSeries out = c;
    std::vector<int> mi(static_cast<size_t>(d), 0);

    // enumerate multi-indices with sum of (m_g * low_g) <= N
    std::function<void(int, int, double, const TruncatedSeries&)> rec =
        [&](int axis, int used, double factorial, const TruncatedSeries& deriv) {
            if (axis == d) {
                if (used == 0) return;  // the identity term is already in `out`
                TruncatedSeries t = deriv;
                for (int gdx = 0; gdx < d; ++gdx)
                    for (int rep = 0; rep < mi[static_cast<size_t>(gdx)]; ++rep)
                        t = series::scalar_mul(psi[static_cast<size_t>(gdx)], t).truncated(N);
                t *= 1.0 / factorial;
                out += t;
                return;
            }
            // m_axis = 0 branch
            rec(axis + 1, used, factorial, deriv);
            TruncatedSeries dcur = deriv;
            int m = 1;
            double fact = factorial;
            for (;; ++m) {
                if (used + m * low[static_cast<size_t>(axis)] > N) break;
                dcur = series::tangential_derivative(dcur, axis);
                fact = factorial;
                for (int q = 2; q <= m; ++q) fact *= q;
                mi[static_cast<size_t>(axis)] = m;
                rec(axis + 1, used + m * low[static_cast<size_t>(axis)], fact, dcur);
            }
            mi[static_cast<size_t>(axis)] = 0;
        };
    rec(0, 0, 1.0, c);
    return out;
}

}  // namespace detail

struct NormalFormResult {
    CollarMetric metric;          // normal form, flag set
    ConformalFactor omega;        // the special-bdf factor that was applied
    double gxx_residual = 0.0;    // deviation of the xx block from 1 before snapping
    double gxa_residual = 0.0;    // deviation of the cross block from 0 before snapping
};

inline NormalFormResult to_normal_form(const CollarMetric& g, double snap_tol = 1e-7) {
    const int N = g.trunc_order();
    ConformalFactor w = solve_hj_general(g);
    CollarMetric ga = change_bdf(g, w);
    const BoundaryPtr& b = g.boundary();
    const int d = b->dim();

    // fibered diffeomorphism jet killing the cross block
    std::vector<TruncatedSeries> psi(static_cast<size_t>(d),
                                     TruncatedSeries::zeros(b, Valence::Scalar, N));
    BoundaryField h0inv = field::sym2_inverse(ga.gab()[0]);

    auto transformed = [&](void) -> BlockedSym2 {
        // dPsi^g_b = delta + partial_b psi^g ; dx psi^g
        std::vector<TruncatedSeries> dxpsi;
        dxpsi.reserve(static_cast<size_t>(d));
        for (int gdx = 0; gdx < d; ++gdx)
            dxpsi.push_back(psi[static_cast<size_t>(gdx)].deriv_x().truncated(N - 1));

        // Composed source blocks
        TruncatedSeries cxx = detail::compose_tangential_shift(ga.gxx(), psi);
        TruncatedSeries cxa = detail::compose_tangential_shift(ga.gxa(), psi);
        TruncatedSeries cab = detail::compose_tangential_shift(ga.gab(), psi);

        // jac[g][b] = partial_b psi^g; psi lives in the new coordinates, so
        // its tangential derivative needs no composition.
        TruncatedSeries jac = TruncatedSeries::zeros(b, Valence::Mat, N);
        for (int gdx = 0; gdx < d; ++gdx) {
            TruncatedSeries grad = series::grad_tan(psi[static_cast<size_t>(gdx)]);
            for (int k = 0; k <= N; ++k)
                for (int p = 0; p < jac[k].points(); ++p)
                    for (int bb = 0; bb < d; ++bb)
                        jac[k].at(p)[gdx * d + bb] = grad[k].at(p)[bb];
        }

        // vx^g = dx psi^g as a vector series
        TruncatedSeries vx = TruncatedSeries::zeros(b, Valence::Vector, N - 1);
        for (int gdx = 0; gdx < d; ++gdx)
            for (int k = 0; k <= N - 1; ++k)
                for (int p = 0; p < vx[k].points(); ++p)
                    vx[k].at(p)[gdx] = dxpsi[static_cast<size_t>(gdx)][k].at(p)[0];

        auto dot_k = [](const BoundaryField& v, const BoundaryField& c) { return field::dot(v, c); };

        BlockedSym2 outb = BlockedSym2::zeros(b, N - 1);
        // g~_xx = cxx + 2 cxa_g vx^g + cab_{gd} vx^g vx^d
        {
            TruncatedSeries t = cxx.truncated(N - 1);
            TruncatedSeries t2 = series::convolve(vx, cxa, Valence::Scalar, dot_k);
            t2 *= 2.0;
            t += t2;
            TruncatedSeries vv = series::convolve(vx, vx, Valence::Sym2,
                                                  [](const BoundaryField& u, const BoundaryField& v2) {
                                                      return field::outer_sym(u, v2);
                                                  });
            t += series::convolve(cab, vv, Valence::Scalar,
                                  [](const BoundaryField& s, const BoundaryField& m) {
                                      // s_{gd} m^{gd}, both sym2
                                      return field::zip(s, m, Valence::Scalar,
                                                        [](int dd, const double* xs, const double* xm, double* o) {
                                                            double acc = 0.0;
                                                            for (int i = 0; i < dd; ++i)
                                                                for (int j = 0; j < dd; ++j)
                                                                    acc += xs[sym2_index(i, j, dd)] *
                                                                           xm[sym2_index(i, j, dd)];
                                                            o[0] = acc;
                                                        });
                                  })
                     .truncated(N - 1);
            outb.xx = t;
        }
        // g~_xb = cxa_g dPsi^g_b + cab_{gd} vx^g dPsi^d_b
        {
            // dPsi^g_b = delta^g_b + jac[g][b]
            TruncatedSeries t = cxa.truncated(N - 1);
            t += series::convolve(cxa, jac, Valence::Covector,
                                  [](const BoundaryField& cv, const BoundaryField& jm) {
                                      return field::zip(cv, jm, Valence::Covector,
                                                        [](int dd, const double* xc, const double* xj, double* o) {
                                                            for (int bb = 0; bb < dd; ++bb) {
                                                                double acc = 0.0;
                                                                for (int gg = 0; gg < dd; ++gg)
                                                                    acc += xc[gg] * xj[gg * dd + bb];
                                                                o[bb] = acc;
                                                            }
                                                        });
                                  })
                     .truncated(N - 1);
            // cab_{gd} vx^g (delta + jac)^d_b
            TruncatedSeries lowered = series::convolve(cab, vx, Valence::Covector,
                                                       [](const BoundaryField& s, const BoundaryField& v) {
                                                           return field::lower(s, v);
                                                       });
            t += lowered.truncated(N - 1);
            t += series::convolve(lowered, jac, Valence::Covector,
                                  [](const BoundaryField& cv, const BoundaryField& jm) {
                                      return field::zip(cv, jm, Valence::Covector,
                                                        [](int dd, const double* xc, const double* xj, double* o) {
                                                            for (int bb = 0; bb < dd; ++bb) {
                                                                double acc = 0.0;
                                                                for (int gg = 0; gg < dd; ++gg)
                                                                    acc += xc[gg] * xj[gg * dd + bb];
                                                                o[bb] = acc;
                                                            }
                                                        });
                                  })
                     .truncated(N - 1);
            outb.xa = t;
        }
        // g~_ab = cab_{gd} dPsi^g_a dPsi^d_b
        {
            TruncatedSeries t = cab.truncated(N - 1);
            // one-jac terms: cab_{gd} jac^g_a delta^d_b + sym
            TruncatedSeries onej = series::convolve(cab, jac, Valence::Sym2,
                                                    [](const BoundaryField& s, const BoundaryField& jm) {
                                                        return field::zip(s, jm, Valence::Sym2,
                                                                          [](int dd, const double* xs, const double* xj,
                                                                             double* o) {
                                                                              for (int a2 = 0; a2 < dd; ++a2)
                                                                                  for (int b2 = a2; b2 < dd; ++b2) {
                                                                                      double acc = 0.0;
                                                                                      for (int gg = 0; gg < dd; ++gg)
                                                                                          acc += xs[sym2_index(gg, b2, dd)] *
                                                                                                     xj[gg * dd + a2] +
                                                                                                 xs[sym2_index(gg, a2, dd)] *
                                                                                                     xj[gg * dd + b2];
                                                                                      o[sym2_index(a2, b2, dd)] = acc;
                                                                                  }
                                                                          });
                                                    })
                                      .truncated(N - 1);
            t += onej;
            // two-jac terms: cab_{gd} jac^g_a jac^d_b — assemble via Mat
            TruncatedSeries half = series::convolve(cab, jac, Valence::Mat,
                                                    [](const BoundaryField& s, const BoundaryField& jm) {
                                                        return field::zip(s, jm, Valence::Mat,
                                                                          [](int dd, const double* xs, const double* xj,
                                                                             double* o) {
                                                                              // o[d2][a] = s_{g d2} jac^g_a
                                                                              for (int d2 = 0; d2 < dd; ++d2)
                                                                                  for (int a2 = 0; a2 < dd; ++a2) {
                                                                                      double acc = 0.0;
                                                                                      for (int gg = 0; gg < dd; ++gg)
                                                                                          acc += xs[sym2_index(gg, d2, dd)] *
                                                                                                 xj[gg * dd + a2];
                                                                                      o[d2 * dd + a2] = acc;
                                                                                  }
                                                                          });
                                                    });
            t += series::convolve(half, jac, Valence::Sym2,
                                  [](const BoundaryField& hm, const BoundaryField& jm) {
                                      return field::zip(hm, jm, Valence::Sym2,
                                                        [](int dd, const double* xh, const double* xj, double* o) {
                                                            for (int a2 = 0; a2 < dd; ++a2)
                                                                for (int b2 = a2; b2 < dd; ++b2) {
                                                                    double acc = 0.0;
                                                                    for (int d2 = 0; d2 < dd; ++d2)
                                                                        acc += 0.5 * (xh[d2 * dd + a2] * xj[d2 * dd + b2] +
                                                                                      xh[d2 * dd + b2] * xj[d2 * dd + a2]);
                                                                    o[sym2_index(a2, b2, dd)] = acc;
                                                                }
                                                        });
                                  })
                     .truncated(N - 1);
            outb.ab = t;
        }
        return outb;
    };

    // order-by-order elimination of the cross block
    for (int k = 1; k <= N - 1; ++k) {
        BlockedSym2 cur = transformed();
        BoundaryField resid = cur.xa[k - 1];
        if (resid.sup_norm() == 0.0) continue;
        BoundaryField corr = field::raise(h0inv, resid);
        corr *= -1.0 / k;
        for (int gdx = 0; gdx < d; ++gdx)
            for (int p = 0; p < corr.points(); ++p)
                psi[static_cast<size_t>(gdx)][k].at(p)[0] += corr.at(p)[gdx];
    }

    // the sweep controls the cross block through power N-2; the last stored
    // order is dropped
    BlockedSym2 fin = transformed().truncated(N - 2);
    NormalFormResult res;
    res.omega = std::move(w);

    // snap to exact normal form and record the deviations
    BoundaryField one = BoundaryField::uniform_scalar(b, 1.0);
    double gxx_dev = (fin.xx[0] - one).sup_norm();
    for (int k = 1; k <= fin.trunc_order(); ++k) gxx_dev = std::max(gxx_dev, fin.xx[k].sup_norm());
    res.gxx_residual = gxx_dev;
    res.gxa_residual = fin.xa.sup_norm();
    if (gxx_dev > snap_tol || res.gxa_residual > snap_tol)
        throw error("normal-form reduction left a residual above tolerance");

    TruncatedSeries h = fin.ab;
    res.metric = CollarMetric::normal_form(g.n(), std::move(h));
    return res;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ClassificationResult {
    bool is_AH = false;
    int evenness_order = 0;
    bool is_partially_even = false;
    double vr_trace_norm = 0.0;
    bool is_VR = false;
    int ape_defect_order = 0;
};

struct ClassifyOptions {
    double parity_rel_tol = 1e-10;
    double vr_tol = 1e-9;
    double defect_rel_tol = 1e-10;
};

inline ClassificationResult classify(const CollarMetric& g, const ClassifyOptions& opt = {}) {
    ClassificationResult r;
    const int n = g.n();
    if (g.trunc_order() < n) throw config_error("classify needs truncation order >= n");

    CollarInverse inv = inverse_blocks(g);
    BoundaryField a0 = inv.A[0];
    a0 -= BoundaryField::uniform_scalar(g.boundary(), 1.0);
    r.is_AH = a0.sup_norm() <= 1e-8;

    const double ptol = default_metric_parity_tol(g, opt.parity_rel_tol);
    r.evenness_order = metric_evenness(g, ptol).evenness_order;
    r.is_partially_even = r.is_AH && r.evenness_order >= n - 2;

    if (g.is_normal_form()) {
        r.vr_trace_norm = g.h0().trace(g.gab()[n - 1]).sup_norm();
    } else {
        ConformalFactor w = solve_hj_general(g);
        CollarMetric gp = change_bdf(g, w);
        BoundaryMetric h0p(gp.gab()[0]);
        r.vr_trace_norm = h0p.trace(gp.gab()[n - 1]).sup_norm();
    }
    r.is_VR = r.is_partially_even && r.vr_trace_norm <= opt.vr_tol * std::max(1.0, g.blocks().sup_norm());

    const double dtol = opt.defect_rel_tol * std::max(1.0, g.blocks().sup_norm());
    r.ape_defect_order = einstein_defect_order(g, dtol);
    return r;
}

}  // namespace ahflow

#endif  // AHFLOW_GAUGE_HPP
