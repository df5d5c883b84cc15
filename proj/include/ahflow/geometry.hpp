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

#ifndef AHFLOW_GEOMETRY_HPP
#define AHFLOW_GEOMETRY_HPP

#include "collar.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// Tangential derivative stacks at series level
// ---------------------------------------------------------------------------

namespace series {

// partial_alpha of a scalar series, stacked into a covector series.
inline TruncatedSeries grad_tan(const TruncatedSeries& s) {
    const int d = s.boundary()->dim();
    TruncatedSeries out = TruncatedSeries::zeros(s.boundary(), Valence::Covector, s.trunc_order());
    for (int a = 0; a < d; ++a) {
        TruncatedSeries da = tangential_derivative(s, a);
        for (int k = 0; k <= s.trunc_order(); ++k) {
            for (int p = 0; p < out[k].points(); ++p) out[k].at(p)[a] = da[k].at(p)[0];
        }
    }
    return out;
}

// J[a][b] = partial_a b_b for a covector series.
inline TruncatedSeries jac_tan(const TruncatedSeries& b) {
    const int d = b.boundary()->dim();
    TruncatedSeries out = TruncatedSeries::zeros(b.boundary(), Valence::Mat, b.trunc_order());
    for (int a = 0; a < d; ++a) {
        TruncatedSeries da = tangential_derivative(b, a);
        for (int k = 0; k <= b.trunc_order(); ++k)
            for (int p = 0; p < out[k].points(); ++p)
                for (int j = 0; j < d; ++j) out[k].at(p)[a * d + j] = da[k].at(p)[j];
    }
    return out;
}

// T[mu][sym(a,b)] = partial_mu H_ab for a sym2 series.
inline TruncatedSeries grad_tan_sym2(const TruncatedSeries& h) {
    const int d = h.boundary()->dim();
    const int s2 = sym2_comps(d);
    TruncatedSeries out = TruncatedSeries::zeros(h.boundary(), Valence::Tan3, h.trunc_order());
    for (int a = 0; a < d; ++a) {
        TruncatedSeries da = tangential_derivative(h, a);
        for (int k = 0; k <= h.trunc_order(); ++k)
            for (int p = 0; p < out[k].points(); ++p)
                for (int c = 0; c < s2; ++c) out[k].at(p)[a * s2 + c] = da[k].at(p)[c];
    }
    return out;
}

// sum_mu partial_mu v^mu of a vector series.
inline TruncatedSeries div_tan(const TruncatedSeries& v) {
    const int d = v.boundary()->dim();
    TruncatedSeries out = TruncatedSeries::zeros(v.boundary(), Valence::Scalar, v.trunc_order());
    for (int a = 0; a < d; ++a) {
        TruncatedSeries da = tangential_derivative(v, a);
        for (int k = 0; k <= v.trunc_order(); ++k)
            for (int p = 0; p < out[k].points(); ++p) out[k].at(p)[0] += da[k].at(p)[a];
    }
    return out;
}

// sum_mu partial_mu T[mu][sym(a,b)] of a Tan3 series.
inline TruncatedSeries div_tan3(const TruncatedSeries& t) {
    const int d = t.boundary()->dim();
    const int s2 = sym2_comps(d);
    TruncatedSeries out = TruncatedSeries::zeros(t.boundary(), Valence::Sym2, t.trunc_order());
    for (int a = 0; a < d; ++a) {
        TruncatedSeries da = tangential_derivative(t, a);
        for (int k = 0; k <= t.trunc_order(); ++k)
            for (int p = 0; p < out[k].points(); ++p)
                for (int c = 0; c < s2; ++c) out[k].at(p)[c] += da[k].at(p)[a * s2 + c];
    }
    return out;
}

}  // namespace series

// ---------------------------------------------------------------------------
// Pointwise contraction kernels used in the curvature assembly.  Indices are
// spelled out per kernel; Tan3 layout is [gamma][sym(alpha,beta)].
// ---------------------------------------------------------------------------

namespace geom {

// out_b = sum_a P[b][a] v^a
inline BoundaryField mat_vec(const BoundaryField& v, const BoundaryField& p) {
    return field::zip(v, p, Valence::Covector, [](int d, const double* x, const double* m, double* o) {
        for (int b = 0; b < d; ++b) {
            double acc = 0.0;
            for (int a = 0; a < d; ++a) acc += m[b * d + a] * x[a];
            o[b] = acc;
        }
    });
}

// out[g][b] = sum_a K^{ga} P[b][a]
inline BoundaryField k_contract_mat(const BoundaryField& k, const BoundaryField& p) {
    return field::zip(k, p, Valence::Mat, [](int d, const double* kk, const double* m, double* o) {
        for (int g = 0; g < d; ++g)
            for (int b = 0; b < d; ++b) {
                double acc = 0.0;
                for (int a = 0; a < d; ++a) acc += kk[sym2_index(g, a, d)] * m[b * d + a];
                o[g * d + b] = acc;
            }
    });
}

// out[g][b] = v^g c_b
inline BoundaryField outer_vec_cov(const BoundaryField& v, const BoundaryField& c) {
    return field::zip(v, c, Valence::Mat, [](int d, const double* x, const double* y, double* o) {
        for (int g = 0; g < d; ++g)
            for (int b = 0; b < d; ++b) o[g * d + b] = x[g] * y[b];
    });
}

// out[g][sym(a,b)] = v^g S_{ab}
inline BoundaryField outer_vec_sym2(const BoundaryField& v, const BoundaryField& s) {
    return field::zip(v, s, Valence::Tan3, [](int d, const double* x, const double* y, double* o) {
        const int s2 = sym2_comps(d);
        for (int g = 0; g < d; ++g)
            for (int c = 0; c < s2; ++c) o[g * s2 + c] = x[g] * y[c];
    });
}

// out[sym(a,b)] = sum_mu v^mu (T[a][sym(b,mu)] + T[b][sym(a,mu)] - T[mu][sym(a,b)])
inline BoundaryField vec_gradh_comb(const BoundaryField& v, const BoundaryField& t) {
    return field::zip(v, t, Valence::Sym2, [](int d, const double* x, const double* tt, double* o) {
        const int s2 = sym2_comps(d);
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) {
                double acc = 0.0;
                for (int mu = 0; mu < d; ++mu)
                    acc += x[mu] * (tt[a * s2 + sym2_index(b, mu, d)] + tt[b * s2 + sym2_index(a, mu, d)] -
                                    tt[mu * s2 + sym2_index(a, b, d)]);
                o[sym2_index(a, b, d)] = acc;
            }
    });
}

// out[g][sym(a,b)] = sum_mu K^{g mu} (T[a][sym(b,mu)] + T[b][sym(a,mu)] - T[mu][sym(a,b)])
inline BoundaryField k_gradh_comb(const BoundaryField& k, const BoundaryField& t) {
    return field::zip(k, t, Valence::Tan3, [](int d, const double* kk, const double* tt, double* o) {
        const int s2 = sym2_comps(d);
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) {
                    double acc = 0.0;
                    for (int mu = 0; mu < d; ++mu)
                        acc += kk[sym2_index(g, mu, d)] *
                               (tt[a * s2 + sym2_index(b, mu, d)] + tt[b * s2 + sym2_index(a, mu, d)] -
                                tt[mu * s2 + sym2_index(a, b, d)]);
                    o[g * s2 + sym2_index(a, b, d)] = acc;
                }
    });
}

// trace of the product of two full matrices: sum_{ab} M[a][b] N[b][a]
inline BoundaryField mat_trace_prod(const BoundaryField& m, const BoundaryField& n) {
    return field::zip(m, n, Valence::Scalar, [](int d, const double* x, const double* y, double* o) {
        double acc = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) acc += x[a * d + b] * y[b * d + a];
        o[0] = acc;
    });
}

// out_b = sum_mu u_mu M[mu][b]
inline BoundaryField cov_contract_mat(const BoundaryField& u, const BoundaryField& m) {
    return field::zip(u, m, Valence::Covector, [](int d, const double* x, const double* mm, double* o) {
        for (int b = 0; b < d; ++b) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu) acc += x[mu] * mm[mu * d + b];
            o[b] = acc;
        }
    });
}

// out_b = sum_mu M[mu][b] t_mu  (same as cov_contract_mat, kept for intent)
inline BoundaryField matT_vec(const BoundaryField& m, const BoundaryField& t) {
    return cov_contract_mat(t, m);
}

// out[sym(a,b)] = sum_mu u_mu T[mu][sym(a,b)]
inline BoundaryField cov_contract_tan3(const BoundaryField& u, const BoundaryField& t) {
    return field::zip(u, t, Valence::Sym2, [](int d, const double* x, const double* tt, double* o) {
        const int s2 = sym2_comps(d);
        for (int c = 0; c < s2; ++c) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu) acc += x[mu] * tt[mu * s2 + c];
            o[c] = acc;
        }
    });
}

// out_b = sum_{mu nu} T[mu][sym(b,nu)] M[nu][mu]
inline BoundaryField tan3_mat_contract(const BoundaryField& t, const BoundaryField& m) {
    return field::zip(t, m, Valence::Covector, [](int d, const double* tt, const double* mm, double* o) {
        const int s2 = sym2_comps(d);
        for (int b = 0; b < d; ++b) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu)
                for (int nu = 0; nu < d; ++nu) acc += tt[mu * s2 + sym2_index(b, nu, d)] * mm[nu * d + mu];
            o[b] = acc;
        }
    });
}

// out[a][b] = sum_{mu nu} T[mu][sym(b,nu)] T[nu][sym(a,mu)]
inline BoundaryField tan3_tan3_contract(const BoundaryField& t1, const BoundaryField& t2) {
    return field::zip(t1, t2, Valence::Mat, [](int d, const double* x, const double* y, double* o) {
        const int s2 = sym2_comps(d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double acc = 0.0;
                for (int mu = 0; mu < d; ++mu)
                    for (int nu = 0; nu < d; ++nu)
                        acc += x[mu * s2 + sym2_index(b, nu, d)] * y[nu * s2 + sym2_index(a, mu, d)];
                o[a * d + b] = acc;
            }
    });
}

// out[a][b] = sum_mu ( S[sym(b,mu)] M[mu][a] + M[mu][b] S[sym(a,mu)] )
inline BoundaryField cross_pair(const BoundaryField& s, const BoundaryField& m) {
    return field::zip(s, m, Valence::Mat, [](int d, const double* ss, const double* mm, double* o) {
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double acc = 0.0;
                for (int mu = 0; mu < d; ++mu)
                    acc += ss[sym2_index(b, mu, d)] * mm[mu * d + a] + mm[mu * d + b] * ss[sym2_index(a, mu, d)];
                o[a * d + b] = acc;
            }
    });
}

// trace over the upper index against the matching lower one:
// out_b = sum_mu T[mu][sym(b,mu)]
inline BoundaryField tan3_trace(const BoundaryField& t) {
    return field::map(t, Valence::Covector, [](int d, const double* tt, double* o) {
        const int s2 = sym2_comps(d);
        for (int b = 0; b < d; ++b) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu) acc += tt[mu * s2 + sym2_index(b, mu, d)];
            o[b] = acc;
        }
    });
}

}  // namespace geom

// ---------------------------------------------------------------------------
// CurvatureBundle: Christoffel blocks with the x prefactor, Ricci blocks and
// the scalar curvature with the x^2 prefactor.
// ---------------------------------------------------------------------------

struct CurvatureBundle {
    // x * Gamma^x_{xx}, x * Gamma^x_{x alpha}, x * Gamma^x_{alpha beta}
    TruncatedSeries xG_x_xx, xG_x_xa, xG_x_ab;
    // x * Gamma^gamma_{xx}, x * Gamma^gamma_{x alpha}, x * Gamma^gamma_{alpha beta}
    TruncatedSeries xG_c_xx, xG_c_xa, xG_c_ab;
    // x^2 Rc blocks and x^2 * scalar curvature
    TruncatedSeries x2Rc_xx, x2Rc_xa, x2Rc_ab;
    TruncatedSeries x2S;
    double ricci_asymmetry = 0.0;
    bool has_ricci = false;
};

namespace detail {

// Christoffel blocks without the x prefactor, truncation order N-1.
struct ChristoffelBlocks {
    TruncatedSeries G_x_xx;  // scalar
    TruncatedSeries G_x_xa;  // covector
    TruncatedSeries G_x_ab;  // sym2
    TruncatedSeries G_c_xx;  // vector
    TruncatedSeries G_c_xa;  // mat [gamma][beta]
    TruncatedSeries G_c_ab;  // tan3 [gamma][sym(alpha,beta)]
    CollarInverse inv;
};

inline ChristoffelBlocks christoffel_blocks(const CollarMetric& g) {
    const BlockedSym2& gb = g.blocks();
    const int ng = g.trunc_order() - 1;
    if (ng < 0) throw config_error("christoffel needs truncation order >= 1");

    ChristoffelBlocks out;
    out.inv = inverse_blocks(gb);
    const TruncatedSeries& A = out.inv.A;
    const TruncatedSeries& B = out.inv.B;
    const TruncatedSeries& K = out.inv.K;

    TruncatedSeries da = gb.xx.deriv_x();                     // scalar, N-1
    TruncatedSeries ta = series::grad_tan(gb.xx);             // covector, N
    TruncatedSeries dxb = gb.xa.deriv_x();                    // covector, N-1
    TruncatedSeries jacb = series::jac_tan(gb.xa);            // mat, N
    TruncatedSeries dxH = gb.ab.deriv_x();                    // sym2, N-1
    TruncatedSeries gradH = series::grad_tan_sym2(gb.ab);     // tan3, N

    // P[b][a] = dxH_{ba} + partial_b b_a - partial_a b_b
    TruncatedSeries P = series::zip(dxH, jacb, Valence::Mat,
                                    [](const BoundaryField& s, const BoundaryField& j) {
                                        return field::zip(s, j, Valence::Mat,
                                                          [](int d, const double* ss, const double* jj, double* o) {
                                                              for (int b = 0; b < d; ++b)
                                                                  for (int a = 0; a < d; ++a)
                                                                      o[b * d + a] = ss[sym2_index(b, a, d)] +
                                                                                     jj[b * d + a] - jj[a * d + b];
                                                          });
                                    });

    // Q_{ab} = partial_a b_b + partial_b b_a - dxH_{ab}
    TruncatedSeries Q = series::zip(dxH, jacb, Valence::Sym2,
                                    [](const BoundaryField& s, const BoundaryField& j) {
                                        return field::zip(s, j, Valence::Sym2,
                                                          [](int d, const double* ss, const double* jj, double* o) {
                                                              for (int a = 0; a < d; ++a)
                                                                  for (int b = a; b < d; ++b)
                                                                      o[sym2_index(a, b, d)] =
                                                                          jj[a * d + b] + jj[b * d + a] -
                                                                          ss[sym2_index(a, b, d)];
                                                          });
                                    });

    // two_dxb_minus_ta = 2 dx b - grad a
    TruncatedSeries two_dxb = dxb;
    two_dxb *= 2.0;
    TruncatedSeries tdm = two_dxb - ta.truncated(ng);

    auto dot_k = [](const BoundaryField& v, const BoundaryField& c) { return field::dot(v, c); };
    auto raise_k = [](const BoundaryField& k, const BoundaryField& c) { return field::raise(k, c); };

    out.G_x_xx = series::scalar_mul(A, da) + series::convolve(B, tdm, Valence::Scalar, dot_k);
    out.G_x_xx *= 0.5;

    out.G_x_xa = series::scalar_mul(A, ta).truncated(ng) +
                 series::convolve(B, P, Valence::Covector, geom::mat_vec);
    out.G_x_xa *= 0.5;

    out.G_x_ab = series::scalar_mul(A, Q).truncated(ng) +
                 series::convolve(B, gradH, Valence::Sym2, geom::vec_gradh_comb);
    out.G_x_ab *= 0.5;

    out.G_c_xx = series::scalar_mul(da, B) + series::convolve(K, tdm, Valence::Vector, raise_k);
    out.G_c_xx *= 0.5;

    out.G_c_xa = series::convolve(B, ta, Valence::Mat, geom::outer_vec_cov).truncated(ng) +
                 series::convolve(K, P, Valence::Mat, geom::k_contract_mat);
    out.G_c_xa *= 0.5;

    out.G_c_ab = series::convolve(B, Q, Valence::Tan3, geom::outer_vec_sym2).truncated(ng) +
                 series::convolve(K, gradH, Valence::Tan3, geom::k_gradh_comb);
    out.G_c_ab *= 0.5;

    return out;
}

}  // namespace detail

// The six Christoffel series with the x prefactor; the power-0 coefficients
// vanish by construction of the shift.
inline CurvatureBundle christoffel(const CollarMetric& g) {
    detail::ChristoffelBlocks cb = detail::christoffel_blocks(g);
    CurvatureBundle out;
    out.xG_x_xx = cb.G_x_xx.shifted_up(1);
    out.xG_x_xa = cb.G_x_xa.shifted_up(1);
    out.xG_x_ab = cb.G_x_ab.shifted_up(1);
    out.xG_c_xx = cb.G_c_xx.shifted_up(1);
    out.xG_c_xa = cb.G_c_xa.shifted_up(1);
    out.xG_c_ab = cb.G_c_ab.shifted_up(1);
    return out;
}

namespace detail {

struct RicciBlocks {
    TruncatedSeries Rc_xx;   // scalar
    TruncatedSeries Rc_xa;   // covector
    TruncatedSeries Rc_ab;   // sym2 (symmetrized)
    TruncatedSeries S;       // scalar curvature of gbar
    double asymmetry = 0.0;
    ChristoffelBlocks chr;
};

inline RicciBlocks ricci_blocks(const CollarMetric& g) {
    if (g.trunc_order() < 2) throw config_error("ricci needs truncation order >= 2");
    RicciBlocks out;
    out.chr = christoffel_blocks(g);
    const ChristoffelBlocks& c = out.chr;
    const int nr = g.trunc_order() - 2;

    // T = Gamma^k_{xk}, U_b = Gamma^k_{bk}
    TruncatedSeries T = c.G_x_xx + series::map(c.G_c_xa, Valence::Scalar, field::mat_trace);
    TruncatedSeries U = c.G_x_xa + series::map(c.G_c_ab, Valence::Covector, geom::tan3_trace);

    auto dot_k = [](const BoundaryField& v, const BoundaryField& cf) { return field::dot(v, cf); };

    // Rc_xx = dx G^x_xx + div G^c_xx - dx T
    //         + G^x_xx T + <G^c_xx, U>
    //         - [ (G^x_xx)^2 + 2 <G^c_xx, G^x_xa> + tr(G^c_xa G^c_xa) ]
    {
        TruncatedSeries r = c.G_x_xx.deriv_x() + series::div_tan(c.G_c_xx).truncated(nr) - T.deriv_x();
        r += series::scalar_mul(c.G_x_xx, T).truncated(nr);
        r += series::convolve(c.G_c_xx, U, Valence::Scalar, dot_k).truncated(nr);
        r -= series::scalar_mul(c.G_x_xx, c.G_x_xx).truncated(nr);
        TruncatedSeries t2 = series::convolve(c.G_c_xx, c.G_x_xa, Valence::Scalar, dot_k).truncated(nr);
        t2 *= 2.0;
        r -= t2;
        r -= series::convolve(c.G_c_xa, c.G_c_xa, Valence::Scalar, geom::mat_trace_prod).truncated(nr);
        out.Rc_xx = r;
    }

    // Rc_xb = dx G^x_xb + div_mu G^mu_xb - grad_b T
    //         + T G^x_xb + U_mu G^mu_xb
    //         - [ G^x_xx G^x_bx + (G^x_ab . G^c_xx)_b + (G^c_xa^T . G^x_xa)_b
    //             + (G^c_ab : G^c_xa)_b ]
    {
        // div over the upper index of the Mat block G^c_xa
        const int d = g.boundary()->dim();
        TruncatedSeries divm = TruncatedSeries::zeros(g.boundary(), Valence::Covector, c.G_c_xa.trunc_order());
        for (int a = 0; a < d; ++a) {
            TruncatedSeries dmu = series::tangential_derivative(c.G_c_xa, a);
            for (int k = 0; k <= divm.trunc_order(); ++k)
                for (int p = 0; p < divm[k].points(); ++p)
                    for (int b = 0; b < d; ++b) divm[k].at(p)[b] += dmu[k].at(p)[a * d + b];
        }
        TruncatedSeries r = c.G_x_xa.deriv_x() + divm.truncated(nr) - series::grad_tan(T).truncated(nr);
        r += series::scalar_mul(T, c.G_x_xa).truncated(nr);
        r += series::convolve(U, c.G_c_xa, Valence::Covector, geom::cov_contract_mat).truncated(nr);
        r -= series::scalar_mul(c.G_x_xx, c.G_x_xa).truncated(nr);
        r -= series::convolve(c.G_x_ab, c.G_c_xx, Valence::Covector,
                              [](const BoundaryField& s, const BoundaryField& v) { return field::lower(s, v); })
                 .truncated(nr);
        r -= series::convolve(c.G_x_xa, c.G_c_xa, Valence::Covector,
                              [](const BoundaryField& t, const BoundaryField& m) { return geom::matT_vec(m, t); })
                 .truncated(nr);
        r -= series::convolve(c.G_c_ab, c.G_c_xa, Valence::Covector, geom::tan3_mat_contract).truncated(nr);
        out.Rc_xa = r;
    }

    // Rc_ab as a full matrix [a][b], then symmetrized.
    {
        TruncatedSeries r = series::map(c.G_x_ab.deriv_x() + series::div_tan3(c.G_c_ab).truncated(nr),
                                        Valence::Mat, field::sym2_to_mat)
                                .truncated(nr);
        // - partial_b U_a : jac_tan(U)[b][a] -> transpose into [a][b]
        TruncatedSeries jU = series::jac_tan(U).truncated(nr);
        r -= series::map(jU, Valence::Mat, [](const BoundaryField& m) {
            return field::map(m, Valence::Mat, [](int d, const double* x, double* o) {
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) o[a * d + b] = x[b * d + a];
            });
        });
        r += series::map(series::scalar_mul(T, c.G_x_ab).truncated(nr), Valence::Mat, field::sym2_to_mat);
        r += series::map(series::convolve(U, c.G_c_ab, Valence::Sym2, geom::cov_contract_tan3).truncated(nr),
                         Valence::Mat, field::sym2_to_mat);
        // - G^x_bx G^x_ax
        r -= series::convolve(c.G_x_xa, c.G_x_xa, Valence::Mat, geom::outer_vec_cov).truncated(nr);
        // - sum_mu ( G^x_{b mu} G^mu_{ax} + G^mu_{bx} G^x_{a mu} )
        r -= series::convolve(c.G_x_ab, c.G_c_xa, Valence::Mat, geom::cross_pair).truncated(nr);
        // - sum_{mu nu} G^mu_{b nu} G^nu_{a mu}
        r -= series::convolve(c.G_c_ab, c.G_c_ab, Valence::Mat, geom::tan3_tan3_contract).truncated(nr);

        double asym = 0.0;
        for (int k = 0; k <= r.trunc_order(); ++k) {
            BoundaryField antisym = field::map(r[k], Valence::Mat, [](int d, const double* x, double* o) {
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) o[a * d + b] = 0.5 * (x[a * d + b] - x[b * d + a]);
            });
            asym = std::max(asym, antisym.sup_norm());
        }
        out.asymmetry = asym;
        out.Rc_ab = series::map(r, Valence::Sym2, field::mat_sym);
    }

    // scalar curvature of gbar
    out.S = series::scalar_mul(out.chr.inv.A, out.Rc_xx).truncated(nr);
    {
        TruncatedSeries t = series::convolve(out.chr.inv.B, out.Rc_xa, Valence::Scalar, dot_k).truncated(nr);
        t *= 2.0;
        out.S += t;
        out.S += series::convolve(out.chr.inv.K, out.Rc_ab, Valence::Scalar,
                                  [](const BoundaryField& k, const BoundaryField& s) { return field::trace(k, s); })
                     .truncated(nr);
    }
    return out;
}

}  // namespace detail

inline CurvatureBundle ricci(const CollarMetric& g) {
    detail::RicciBlocks rb = detail::ricci_blocks(g);
    CurvatureBundle out;
    out.xG_x_xx = rb.chr.G_x_xx.shifted_up(1);
    out.xG_x_xa = rb.chr.G_x_xa.shifted_up(1);
    out.xG_x_ab = rb.chr.G_x_ab.shifted_up(1);
    out.xG_c_xx = rb.chr.G_c_xx.shifted_up(1);
    out.xG_c_xa = rb.chr.G_c_xa.shifted_up(1);
    out.xG_c_ab = rb.chr.G_c_ab.shifted_up(1);
    out.x2Rc_xx = rb.Rc_xx.shifted_up(2);
    out.x2Rc_xa = rb.Rc_xa.shifted_up(2);
    out.x2Rc_ab = rb.Rc_ab.shifted_up(2);
    out.x2S = rb.S.shifted_up(2);
    out.ricci_asymmetry = rb.asymmetry;
    out.has_ricci = true;
    return out;
}

// ---------------------------------------------------------------------------
// Ebar(gbar) = -(n-1)(|dx|^2 - 1) gbar + ((n-2) Hess(x) + (Lap x) gbar) x
//              + Rc(gbar) x^2
// with Hess(x)_{ij} = -Gamma^x_{ij} and |dx|^2 = gbar^{xx}.  The assembly is
// exact through the stored truncation order: coefficient k depends only on
// metric coefficients <= k.
// ---------------------------------------------------------------------------

inline BlockedSym2 ebar(const CollarMetric& g) {
    const int n = g.n();
    const int N = g.trunc_order();
    detail::RicciBlocks rb = detail::ricci_blocks(g);
    const detail::ChristoffelBlocks& c = rb.chr;

    // A - 1
    TruncatedSeries Am1 = c.inv.A;
    BoundaryField one = BoundaryField::uniform_scalar(g.boundary(), 1.0);
    Am1[0] -= one;

    // Lap x = -( A G^x_xx + 2 B.G^x_xa + K : G^x_ab )
    auto dot_k = [](const BoundaryField& v, const BoundaryField& cf) { return field::dot(v, cf); };
    TruncatedSeries lap = series::scalar_mul(c.inv.A, c.G_x_xx);
    {
        TruncatedSeries t = series::convolve(c.inv.B, c.G_x_xa, Valence::Scalar, dot_k);
        t *= 2.0;
        lap += t;
        lap += series::convolve(c.inv.K, c.G_x_ab, Valence::Scalar,
                                [](const BoundaryField& k, const BoundaryField& s) { return field::trace(k, s); });
        lap *= -1.0;
    }

    const BlockedSym2& gb = g.blocks();
    BlockedSym2 out = BlockedSym2::zeros(g.boundary(), N);

    auto assemble = [&](const TruncatedSeries& gblock, const TruncatedSeries& gamma_x,
                        const TruncatedSeries& rc) {
        // -(n-1) (A-1) gblock
        TruncatedSeries r = series::scalar_mul(Am1, gblock);
        r *= -(n - 1.0);
        // + x ( (n-2) (-gamma_x) + lap * gblock )
        TruncatedSeries hess_part = gamma_x;
        hess_part *= -(n - 2.0);
        hess_part += series::scalar_mul(lap, gblock).truncated(gamma_x.trunc_order());
        r += hess_part.shifted_up(1).truncated(N);
        // + x^2 rc
        r += rc.shifted_up(2).truncated(N);
        return r.truncated(N);
    };

    out.xx = assemble(gb.xx, c.G_x_xx, rb.Rc_xx);
    out.xa = assemble(gb.xa, c.G_x_xa, rb.Rc_xa);
    out.ab = assemble(gb.ab, c.G_x_ab, rb.Rc_ab);
    return out;
}

// tr^{gbar} of a blocked symmetric 2-tensor.
inline TruncatedSeries blocked_trace(const CollarInverse& inv, const BlockedSym2& t) {
    auto dot_k = [](const BoundaryField& v, const BoundaryField& cf) { return field::dot(v, cf); };
    TruncatedSeries r = series::scalar_mul(inv.A, t.xx);
    TruncatedSeries m = series::convolve(inv.B, t.xa, Valence::Scalar, dot_k);
    m *= 2.0;
    r += m;
    r += series::convolve(inv.K, t.ab, Valence::Scalar,
                          [](const BoundaryField& k, const BoundaryField& s) { return field::trace(k, s); });
    return r;
}

// S(g) + n(n-1) for the uncompactified metric equals tr^{gbar} Ebar(gbar).
inline TruncatedSeries einstein_trace(const CollarMetric& g) {
    return blocked_trace(inverse_blocks(g), ebar(g));
}

// Largest k <= N+1 such that all Ebar coefficients below power k stay under
// tol.  The metric is APE when the defect order reaches n.
inline int einstein_defect_order(const CollarMetric& g, double tol) {
    BlockedSym2 e = ebar(g);
    int k = 0;
    while (k <= e.trunc_order()) {
        double m = std::max({e.xx[k].sup_norm(), e.xa[k].sup_norm(), e.ab[k].sup_norm()});
        if (m > tol) break;
        ++k;
    }
    return k;
}

// ---------------------------------------------------------------------------
// Finite-difference linearization of a metric operator in the direction
// x^j v.  A Richardson pass removes the leading quadratic error of the
// centered difference.
// ---------------------------------------------------------------------------

template <class Op>
auto fd_linearize(Op&& op, const CollarMetric& g, const BlockedSym2& v, int j)
    -> decltype(op(g)) {
    const int N = g.trunc_order();
    BlockedSym2 dir = v.shifted_up(j).truncated(N);
    const double eps0 = 1e-5 * (1.0 + g.blocks().sup_norm()) / (1.0 + v.sup_norm());
    auto central = [&](double eps) {
        BlockedSym2 gp = g.blocks();
        gp.axpy(eps, dir);
        BlockedSym2 gm = g.blocks();
        gm.axpy(-eps, dir);
        auto ep = op(g.with_blocks(std::move(gp)));
        auto em = op(g.with_blocks(std::move(gm)));
        ep -= em;
        ep *= 1.0 / (2.0 * eps);
        return ep;
    };
    if (eps0 <= 0.0 || !std::isfinite(eps0)) throw error("linearization step underflow");
    auto d1 = central(eps0);
    auto d2 = central(0.5 * eps0);
    // Richardson: (4 D(eps/2) - D(eps)) / 3
    d2 *= 4.0 / 3.0;
    d1 *= -1.0 / 3.0;
    d2 += d1;
    return d2;
}

inline BlockedSym2 linearize_ebar(const CollarMetric& g, const BlockedSym2& v, int j) {
    return fd_linearize([](const CollarMetric& gg) { return ebar(gg); }, g, v, j);
}

// ---------------------------------------------------------------------------
// Coefficient-table report: measured parity orders and first odd coefficients of the
// derivative and Christoffel tables, the two Ricci identities, and the
// inverse-metric relation a_{2m-1} = -A_{2m-1}.
// ---------------------------------------------------------------------------

struct AppendixRow {
    std::string component;
    std::string parity;          // "even" or "odd"
    int parity_to_order = 0;     // claimed order
    double parity_violation = 0.0;
    bool has_final = false;
    double final_measured = 0.0;   // sup-norm of measured first-odd coefficient
    double final_rel_err = 0.0;    // vs closed-form prediction
    bool ok = false;
};

struct AppendixReport {
    std::vector<AppendixRow> rows;
    bool all_ok = true;
    double parity_tol = 0.0;
    double final_rel_tol = 0.0;
};

namespace detail {

// Opposite-parity content at powers <= order-1.
inline double parity_violation(const TruncatedSeries& s, bool even, int order) {
    double m = 0.0;
    for (int k = 0; k < std::min(order, s.trunc_order() + 1); ++k) {
        const bool k_even = k % 2 == 0;
        if (k_even != even) m = std::max(m, s[k].sup_norm());
    }
    return m;
}

}  // namespace detail

inline AppendixReport appendix_report(const CollarMetric& g) {
    const int n = g.n();
    const int m = g.m();
    const int p = 2 * m - 1;  // first odd power
    if (g.trunc_order() < p + 1) throw config_error("appendix_report needs trunc order >= n");

    AppendixReport rep;
    const double scale = std::max(1.0, g.blocks().sup_norm());
    rep.parity_tol = 1e-11 * scale;
    rep.final_rel_tol = 1e-9;

    detail::RicciBlocks rb = detail::ricci_blocks(g);
    const detail::ChristoffelBlocks& c = rb.chr;
    const BlockedSym2& gb = g.blocks();
    const BoundaryMetric& h0 = g.h0();

    auto x_dx = [](const TruncatedSeries& s) {  // x d/dx
        return s.deriv_x().shifted_up(1);
    };

    auto add_row = [&](const std::string& name, const TruncatedSeries& s, bool even, int order,
                       const BoundaryField* predicted) {
        AppendixRow row;
        row.component = name;
        row.parity = even ? "even" : "odd";
        row.parity_to_order = order;
        row.parity_violation = detail::parity_violation(s, even, order);
        row.ok = row.parity_violation <= rep.parity_tol;
        if (predicted) {
            row.has_final = true;
            BoundaryField diff = s[p];
            row.final_measured = diff.sup_norm();
            diff -= *predicted;
            const double denom = std::max(predicted->sup_norm(), 1e-30);
            row.final_rel_err = diff.sup_norm() / denom;
            row.ok = row.ok && row.final_rel_err <= rep.final_rel_tol;
        }
        rep.all_ok = rep.all_ok && row.ok;
        rep.rows.push_back(std::move(row));
    };

    const double cp = static_cast<double>(p);

    // Table of 0-derivatives of the metric components.
    {
        BoundaryField pred = gb.xx[p];
        pred *= cp;
        add_row("x dx gxx", x_dx(gb.xx), true, n - 2, &pred);
    }
    add_row("x dal gxx", series::grad_tan(gb.xx).shifted_up(1), false, p, nullptr);
    add_row("x dx gxa", x_dx(gb.xa), false, p, nullptr);
    add_row("x dal gxa", series::jac_tan(gb.xa).shifted_up(1), true, 2 * m, nullptr);
    {
        BoundaryField pred = gb.ab[p];
        pred *= cp;
        add_row("x dx gab", x_dx(gb.ab), true, n - 2, &pred);
    }
    add_row("x dal gab", series::grad_tan_sym2(gb.ab).shifted_up(1), false, p, nullptr);

    // Christoffel table (components carry the x prefactor).
    {
        BoundaryField pred = gb.xx[p];
        pred *= 0.5 * cp;
        add_row("x G^x_xx", c.G_x_xx.shifted_up(1), true, n - 2, &pred);
    }
    {
        BoundaryField pred = gb.ab[p];
        pred *= -0.5 * cp;
        add_row("x G^x_ab", c.G_x_ab.shifted_up(1), true, n - 2, &pred);
    }
    add_row("x G^x_xa", c.G_x_xa.shifted_up(1), false, p, nullptr);
    {
        // (1/2) p h0^{gb} {gab}_{p, ab} as a Mat [g][a]
        BoundaryField pred = field::zip(h0.inverse(), gb.ab[p], Valence::Mat,
                                        [](int d, const double* hi, const double* s, double* o) {
                                            for (int gg = 0; gg < d; ++gg)
                                                for (int a = 0; a < d; ++a) {
                                                    double acc = 0.0;
                                                    for (int b = 0; b < d; ++b)
                                                        acc += hi[sym2_index(gg, b, d)] * s[sym2_index(a, b, d)];
                                                    o[gg * d + a] = acc;
                                                }
                                        });
        pred *= 0.5 * cp;
        add_row("x G^c_xa", c.G_c_xa.shifted_up(1), true, n - 2, &pred);
    }
    add_row("x G^c_xx", c.G_c_xx.shifted_up(1), false, p, nullptr);
    add_row("x G^c_ab", c.G_c_ab.shifted_up(1), false, p, nullptr);

    // Ricci identities.
    {
        BoundaryField tr = h0.trace(gb.ab[p]);
        tr *= -cp * (m - 1.0);
        add_row("x^2 Rc_xx", rb.Rc_xx.shifted_up(2), true, n - 2, &tr);
    }
    {
        BoundaryField pred = gb.ab[p];
        pred *= -cp * (m - 1.0);
        add_row("x^2 Rc_ab", rb.Rc_ab.shifted_up(2), true, n - 2, &pred);
    }

    // Inverse relation: {gbar^{xx}}_p = -{gbar_xx}_p.
    {
        AppendixRow row;
        row.component = "a_p = -A_p";
        row.parity = "even";
        row.parity_to_order = n - 2;
        row.parity_violation = detail::parity_violation(c.inv.A, true, n - 2);
        row.has_final = true;
        BoundaryField diff = c.inv.A[p] + gb.xx[p];
        row.final_measured = c.inv.A[p].sup_norm();
        const double denom = std::max(gb.xx[p].sup_norm(), 1e-30);
        row.final_rel_err = diff.sup_norm() / denom;
        row.ok = row.parity_violation <= rep.parity_tol && row.final_rel_err <= rep.final_rel_tol;
        rep.all_ok = rep.all_ok && row.ok;
        rep.rows.push_back(std::move(row));
    }

    return rep;
}

}  // namespace ahflow

#endif  // AHFLOW_GEOMETRY_HPP
