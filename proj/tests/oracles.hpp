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

// Test-only oracles, kept independent of the implementation paths they
// check.

#ifndef AHFLOW_TESTS_ORACLES_HPP
#define AHFLOW_TESTS_ORACLES_HPP

#include <functional>
#include <vector>

#include "ahflow/gauge.hpp"

namespace oracles {

using namespace ahflow;

// ---------------------------------------------------------------------------
// Brute-force convolution of two coefficient lists (componentwise products
// assembled by the caller's kernel), for checking series_mul.
// ---------------------------------------------------------------------------

template <class K>
std::vector<BoundaryField> brute_convolution(const std::vector<BoundaryField>& a,
                                             const std::vector<BoundaryField>& b, Valence out, K&& kernel) {
    const int n = static_cast<int>(std::min(a.size(), b.size())) - 1;
    std::vector<BoundaryField> c;
    for (int k = 0; k <= n; ++k) {
        BoundaryField acc = BoundaryField::zeros(a[0].boundary(), out);
        for (int i = 0; i <= k; ++i) acc += kernel(a[static_cast<size_t>(i)], b[static_cast<size_t>(k - i)]);
        c.push_back(acc);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Dense finite-difference curvature oracle for x-only collar metrics on the
// constant backend.  Christoffel symbols are formed from finite differences
// of the sampled metric, and their derivatives from finite differences of
// the Christoffel samples — a different discretization route than any
// analytic chain rule.
// ---------------------------------------------------------------------------

struct XOnlyMetric {
    int n = 4;
    // full (d+1) x (d+1) matrix at a given x, row-major
    std::function<void(double, double*)> eval;
};

inline XOnlyMetric sample_metric(const CollarMetric& g) {
    XOnlyMetric m;
    m.n = g.n();
    const int d = g.n() - 1;
    m.eval = [g, d](double x, double* G) {
        const int D = d + 1;
        BoundaryField a = g.gxx().eval(x);
        BoundaryField b = g.gxa().eval(x);
        BoundaryField H = g.gab().eval(x);
        G[0] = a.raw()[0];
        for (int i = 0; i < d; ++i) {
            G[static_cast<size_t>(i + 1)] = b.raw()[static_cast<size_t>(i)];
            G[static_cast<size_t>(i + 1) * D] = b.raw()[static_cast<size_t>(i)];
            for (int j = 0; j < d; ++j)
                G[static_cast<size_t>(i + 1) * D + (j + 1)] = H.raw()[static_cast<size_t>(sym2_index(i, j, d))];
        }
    };
    return m;
}

// Ebar at的点 x0 via nested 4th-order finite differences with step h.
inline std::vector<double> fd_ebar_at(const XOnlyMetric& m, double x0, double h) {
    const int n = m.n;
    const int D = n;  // bulk dimension counts collar + boundary directions
    const int DD = D * D;

    auto metric_at = [&](double x) {
        std::vector<double> G(static_cast<size_t>(DD));
        m.eval(x, G.data());
        return G;
    };
    auto inverse = [&](const std::vector<double>& G) {
        std::vector<double> L = G, inv(static_cast<size_t>(DD)), col(static_cast<size_t>(D));
        if (!dense::cholesky(L.data(), D)) throw singular_error("oracle metric not positive definite");
        for (int j = 0; j < D; ++j) {
            std::fill(col.begin(), col.end(), 0.0);
            col[static_cast<size_t>(j)] = 1.0;
            dense::cholesky_solve(L.data(), D, col.data());
            for (int i = 0; i < D; ++i) inv[static_cast<size_t>(i) * D + j] = col[static_cast<size_t>(i)];
        }
        return inv;
    };

    // 4th-order centered first derivative of a vector-valued function
    auto fd1 = [&](auto&& f, double x) {
        auto fp2 = f(x + 2 * h), fp1 = f(x + h), fm1 = f(x - h), fm2 = f(x - 2 * h);
        std::vector<double> out(fp1.size());
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = (-fp2[i] + 8.0 * fp1[i] - 8.0 * fm1[i] + fm2[i]) / (12.0 * h);
        return out;
    };

    auto christoffel_at = [&](double x) {
        std::vector<double> G = metric_at(x);
        std::vector<double> Ginv = inverse(G);
        std::vector<double> dG = fd1(metric_at, x);
        std::vector<double> Gam(static_cast<size_t>(D) * DD, 0.0);
        for (int k = 0; k < D; ++k)
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) {
                    double acc = 0.0;
                    for (int l = 0; l < D; ++l) {
                        double s = 0.0;
                        if (i == 0) s += dG[static_cast<size_t>(j) * D + l];
                        if (j == 0) s += dG[static_cast<size_t>(i) * D + l];
                        if (l == 0) s -= dG[static_cast<size_t>(i) * D + j];
                        acc += Ginv[static_cast<size_t>(k) * D + l] * s;
                    }
                    Gam[(static_cast<size_t>(k) * D + i) * D + j] = 0.5 * acc;
                }
        return Gam;
    };

    std::vector<double> G = metric_at(x0);
    std::vector<double> Ginv = inverse(G);
    std::vector<double> Gam = christoffel_at(x0);
    std::vector<double> dGam = fd1(christoffel_at, x0);

    std::vector<double> Rc(static_cast<size_t>(DD), 0.0);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double r = dGam[(0 * static_cast<size_t>(D) + i) * D + j];
            if (j == 0)
                for (int k = 0; k < D; ++k) r -= dGam[(static_cast<size_t>(k) * D + i) * D + k];
            for (int k = 0; k < D; ++k)
                for (int l = 0; l < D; ++l) {
                    r += Gam[(static_cast<size_t>(k) * D + k) * D + l] * Gam[(static_cast<size_t>(l) * D + i) * D + j];
                    r -= Gam[(static_cast<size_t>(k) * D + j) * D + l] * Gam[(static_cast<size_t>(l) * D + i) * D + k];
                }
            Rc[static_cast<size_t>(i) * D + j] = r;
        }
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) {
            const double s = 0.5 * (Rc[static_cast<size_t>(i) * D + j] + Rc[static_cast<size_t>(j) * D + i]);
            Rc[static_cast<size_t>(i) * D + j] = s;
            Rc[static_cast<size_t>(j) * D + i] = s;
        }

    const double A = Ginv[0];
    double lap = 0.0;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            lap -= Ginv[static_cast<size_t>(i) * D + j] * Gam[(0 * static_cast<size_t>(D) + i) * D + j];

    std::vector<double> Eb(static_cast<size_t>(DD));
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            const double hess = -Gam[(0 * static_cast<size_t>(D) + i) * D + j];
            Eb[static_cast<size_t>(i) * D + j] = -(n - 1.0) * (A - 1.0) * G[static_cast<size_t>(i) * D + j] +
                                                 x0 * ((n - 2.0) * hess + lap * G[static_cast<size_t>(i) * D + j]) +
                                                 x0 * x0 * Rc[static_cast<size_t>(i) * D + j];
        }
    return Eb;
}

// ---------------------------------------------------------------------------
// Intrinsic curvature of a boundary metric on the torus via the library's
// tangential derivatives (spectral for accuracy); used to cross-check the
// numerically determined second expansion coefficient against the classical
// curvature formula.
// ---------------------------------------------------------------------------

struct BoundaryCurvature {
    BoundaryField ricci;   // sym2
    BoundaryField scalar;  // scalar
};

inline BoundaryCurvature boundary_curvature(const BoundaryMetric& h0) {
    const BoundaryPtr& b = h0.boundary();
    const int d = b->dim();
    const int s2 = sym2_comps(d);

    // dh[c][sym(a,b)] = partial_c h_ab
    std::vector<BoundaryField> dh;
    for (int c = 0; c < d; ++c) dh.push_back(tangential_derivative(h0.metric(), c));

    // Christoffel of h0: Gam[g][sym(a,b)]
    BoundaryField gam = BoundaryField::zeros(b, Valence::Tan3);
    for (int p = 0; p < gam.points(); ++p) {
        for (int g = 0; g < d; ++g)
            for (int a = 0; a < d; ++a)
                for (int bb = a; bb < d; ++bb) {
                    double acc = 0.0;
                    for (int l = 0; l < d; ++l) {
                        const double s = dh[static_cast<size_t>(a)].at(p)[sym2_index(bb, l, d)] +
                                         dh[static_cast<size_t>(bb)].at(p)[sym2_index(a, l, d)] -
                                         dh[static_cast<size_t>(l)].at(p)[sym2_index(a, bb, d)];
                        acc += h0.inverse().at(p)[sym2_index(g, l, d)] * s;
                    }
                    gam.at(p)[g * s2 + sym2_index(a, bb, d)] = 0.5 * acc;
                }
    }

    std::vector<BoundaryField> dgam;
    for (int c = 0; c < d; ++c) dgam.push_back(tangential_derivative(gam, c));

    BoundaryCurvature out;
    out.ricci = BoundaryField::zeros(b, Valence::Sym2);
    out.scalar = BoundaryField::zeros(b, Valence::Scalar);
    for (int p = 0; p < gam.points(); ++p) {
        for (int a = 0; a < d; ++a)
            for (int bb = a; bb < d; ++bb) {
                double r = 0.0;
                for (int c = 0; c < d; ++c) r += dgam[static_cast<size_t>(c)].at(p)[c * s2 + sym2_index(a, bb, d)];
                for (int c = 0; c < d; ++c) r -= dgam[static_cast<size_t>(a)].at(p)[c * s2 + sym2_index(c, bb, d)];
                for (int c = 0; c < d; ++c)
                    for (int l = 0; l < d; ++l) {
                        r += gam.at(p)[c * s2 + sym2_index(c, l, d)] * gam.at(p)[l * s2 + sym2_index(a, bb, d)];
                        r -= gam.at(p)[c * s2 + sym2_index(bb, l, d)] * gam.at(p)[l * s2 + sym2_index(a, c, d)];
                    }
                out.ricci.at(p)[sym2_index(a, bb, d)] = r;
            }
        double s = 0.0;
        for (int a = 0; a < d; ++a)
            for (int bb = 0; bb < d; ++bb)
                s += h0.inverse().at(p)[sym2_index(a, bb, d)] * out.ricci.at(p)[sym2_index(a, bb, d)];
        out.scalar.at(p)[0] = s;
    }
    return out;
}

// Schouten tensor of a boundary metric (boundary dimension >= 3).
inline BoundaryField schouten(const BoundaryMetric& h0) {
    const int d = h0.boundary()->dim();
    if (d < 3) throw config_error("schouten needs boundary dimension >= 3");
    BoundaryCurvature c = boundary_curvature(h0);
    BoundaryField s = c.scalar;
    s *= -1.0 / (2.0 * (d - 1.0));
    BoundaryField out = c.ricci + field::scalar_mul(s, h0.metric());
    out *= 1.0 / (d - 2.0);
    return out;
}

}  // namespace oracles

#endif  // AHFLOW_TESTS_ORACLES_HPP
