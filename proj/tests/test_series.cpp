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

#include <doctest.h>

#include <random>

#include "ahflow/collar.hpp"
#include "oracles.hpp"

using namespace ahflow;

namespace {

TruncatedSeries random_scalar_series(const BoundaryPtr& b, int trunc, unsigned seed, double amp = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, trunc);
    for (int k = 0; k <= trunc; ++k) s[k] = BoundaryField::uniform_scalar(b, u(rng));
    return s;
}

TruncatedSeries geometric_1px2(const BoundaryPtr& b, int trunc) {
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, trunc);
    s[0] = BoundaryField::uniform_scalar(b, 1.0);
    if (trunc >= 2) s[2] = BoundaryField::uniform_scalar(b, 1.0);
    return s;
}

}  // namespace

TEST_CASE("polynomial square (1+x^2)^2") {
    auto b = Boundary::constant(3);
    TruncatedSeries s = geometric_1px2(b, 6);
    TruncatedSeries p = series_mul(s, s);
    CHECK(p[0].raw()[0] == 1.0);
    CHECK(p[1].sup_norm() == 0.0);
    CHECK(p[2].raw()[0] == 2.0);
    CHECK(p[3].sup_norm() == 0.0);
    CHECK(p[4].raw()[0] == 1.0);
    CHECK(p[5].sup_norm() == 0.0);
    CHECK(p[6].sup_norm() == 0.0);
}

TEST_CASE("series_mul agrees with the brute-force convolution") {
    SUBCASE("scalars on the constant backend") {
        auto b = Boundary::constant(3);
        TruncatedSeries a = random_scalar_series(b, 7, 11);
        TruncatedSeries c = random_scalar_series(b, 7, 12);
        TruncatedSeries p = series_mul(a, c);
        std::vector<BoundaryField> av, cv;
        for (int k = 0; k <= 7; ++k) {
            av.push_back(a[k]);
            cv.push_back(c[k]);
        }
        auto brute = oracles::brute_convolution(av, cv, Valence::Scalar, [](const BoundaryField& x, const BoundaryField& y) {
            return field::scalar_mul(x, y);
        });
        for (int k = 0; k <= 7; ++k) {
            BoundaryField d = p[k] - brute[static_cast<size_t>(k)];
            CHECK(d.sup_norm() <= 1e-14);
        }
    }
    SUBCASE("covector pair on a grid backend") {
        auto b = Boundary::grid({8, 8, 8});
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        auto rnd_cov = [&](unsigned) {
            double c0 = u(rng), c1 = u(rng), c2 = u(rng);
            return BoundaryField::sample(b, Valence::Covector, [&, c0, c1, c2](const double* y, double* o) {
                o[0] = c0 * std::cos(y[0]);
                o[1] = c1;
                o[2] = c2 * std::sin(y[1]);
            });
        };
        TruncatedSeries a = TruncatedSeries::zeros(b, Valence::Covector, 5);
        TruncatedSeries c = TruncatedSeries::zeros(b, Valence::Covector, 5);
        std::vector<BoundaryField> av, cv;
        for (int k = 0; k <= 5; ++k) {
            a[k] = rnd_cov(1);
            c[k] = rnd_cov(2);
            av.push_back(a[k]);
            cv.push_back(c[k]);
        }
        TruncatedSeries p = series_mul(a, c);
        CHECK(p.valence() == Valence::Sym2);
        auto brute = oracles::brute_convolution(av, cv, Valence::Sym2, [](const BoundaryField& x, const BoundaryField& y) {
            return field::outer_sym(x, y);
        });
        for (int k = 0; k <= 5; ++k) {
            BoundaryField d = p[k] - brute[static_cast<size_t>(k)];
            CHECK(d.sup_norm() <= 1e-14);
        }
    }
}

TEST_CASE("product parity rule for even factors") {
    auto b = Boundary::constant(3);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int N = 7, two_k = 2;
    TruncatedSeries f = TruncatedSeries::zeros(b, Valence::Scalar, N);
    TruncatedSeries g = TruncatedSeries::zeros(b, Valence::Scalar, N);
    for (int k = 0; k <= N; ++k) {
        const bool allowed = k % 2 == 0 || k > two_k;
        f[k] = BoundaryField::uniform_scalar(b, allowed ? u(rng) : 0.0);
        g[k] = BoundaryField::uniform_scalar(b, allowed ? u(rng) : 0.0);
    }
    TruncatedSeries p = series_mul(f, g);
    // even to the same order
    CHECK(p[1].sup_norm() == 0.0);
    // the first odd coefficient splits as f_{2k+1} g_0 + f_0 g_{2k+1}
    const double lhs = p[two_k + 1].raw()[0];
    const double rhs = f[two_k + 1].raw()[0] * g[0].raw()[0] + f[0].raw()[0] * g[two_k + 1].raw()[0];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-15));
}

TEST_CASE("products of x^3-multiples vanish below power six") {
    auto b = Boundary::constant(3);
    TruncatedSeries a = random_scalar_series(b, 4, 5).shifted_up(3);
    TruncatedSeries c = random_scalar_series(b, 4, 6).shifted_up(3);
    TruncatedSeries p = series_mul(a, c);
    for (int k = 0; k < 6; ++k) CHECK(p[k].sup_norm() == 0.0);
    CHECK(p[6].sup_norm() > 0.0);
}

TEST_CASE("scalar inverse: geometric series") {
    auto b = Boundary::constant(3);
    TruncatedSeries s = geometric_1px2(b, 8);
    TruncatedSeries inv = series_inverse(s);
    for (int k = 0; k <= 8; ++k) {
        const double expect = (k % 2 == 0) ? ((k / 2) % 2 == 0 ? 1.0 : -1.0) : 0.0;
        CHECK(inv[k].raw()[0] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("sym2 inverse multiplies back to the identity") {
    auto b = Boundary::constant(3);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Sym2, 6);
    s[0] = identity_sym2(b);
    for (int k = 1; k <= 6; ++k) {
        std::vector<double> m(static_cast<size_t>(sym2_comps(3)));
        for (auto& v : m) v = u(rng);
        s[k] = BoundaryField::uniform(b, Valence::Sym2, m);
    }
    TruncatedSeries inv = series_inverse(s);
    TruncatedSeries prod = series::convolve(s, inv, Valence::Mat, field::sym2_matmul);
    BoundaryField id_mat = field::sym2_to_mat(identity_sym2(b));
    BoundaryField d0 = prod[0] - id_mat;
    CHECK(d0.sup_norm() <= 1e-13);
    for (int k = 1; k <= 6; ++k) CHECK(prod[k].sup_norm() <= 1e-13);
}

TEST_CASE("block-parity pattern survives inversion of the collar matrix") {
    // diagonal blocks even to 2l, cross block odd to 2l+1: the inverse blocks
    // satisfy the same pattern
    auto b = Boundary::constant(3);
    RandomMetricOptions mo;
    mo.n = 4;
    mo.trunc = 7;
    mo.amplitude = 0.1;
    mo.with_cross = true;
    mo.normal_form = false;
    mo.evenness = 2;
    mo.seed = 9;
    CollarMetric g = random_even_metric(b, mo);
    CollarInverse inv = inverse_blocks(g);
    // evenness to 2l = 2 means: no odd diagonal content at power 1, no even
    // cross content at powers 0, 2
    CHECK(inv.A[1].sup_norm() <= 1e-12);
    CHECK(inv.K[1].sup_norm() <= 1e-12);
    CHECK(inv.B[0].sup_norm() <= 1e-12);
    CHECK(inv.B[2].sup_norm() <= 1e-12);
}

TEST_CASE("parity projections") {
    auto b = Boundary::constant(3);
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, 4);
    for (int k = 0; k <= 3; ++k) s[k] = BoundaryField::uniform_scalar(b, 1.0);

    SUBCASE("odd part of 1 + x + x^2 + x^3 up to order 3") {
        TruncatedSeries o = parity_project(s, 3, Parity::Odd);
        CHECK(o[0].sup_norm() == 0.0);
        CHECK(o[1].raw()[0] == 1.0);
        CHECK(o[2].sup_norm() == 0.0);
        CHECK(o[3].raw()[0] == 1.0);
    }
    SUBCASE("projector algebra on random input") {
        TruncatedSeries r = random_scalar_series(b, 6, 31);
        for (int j = 0; j <= 6; ++j) {
            TruncatedSeries e = parity_project(r, j, Parity::Even);
            TruncatedSeries o = parity_project(r, j, Parity::Odd);
            // idempotence
            TruncatedSeries ee = parity_project(e, j, Parity::Even);
            ee -= e;
            CHECK(ee.sup_norm() == 0.0);
            // complementary on powers <= j
            TruncatedSeries sum = e + o;
            for (int k = 0; k <= j; ++k) {
                BoundaryField d = sum[k] - r[k];
                CHECK(d.sup_norm() == 0.0);
            }
            // cross projection vanishes
            CHECK(parity_project(o, j, Parity::Even).sup_norm() == 0.0);
        }
    }
    SUBCASE("odd projection annihilates even series") {
        TruncatedSeries e = geometric_1px2(b, 6);
        for (int j = 0; j <= 6; ++j) CHECK(parity_project(e, j, Parity::Odd).sup_norm() == 0.0);
    }
}

TEST_CASE("evenness classification") {
    auto b = Boundary::constant(3);
    SUBCASE("first odd power found") {
        TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, 5);
        s[0] = BoundaryField::uniform_scalar(b, 1.0);
        s[2] = BoundaryField::uniform_scalar(b, 0.3);
        s[3] = BoundaryField::uniform_scalar(b, 0.2);
        ParityReport rep = evenness_order(s, 0.0);
        CHECK(rep.evenness_order == 2);
        CHECK(rep.first_odd_power == 3);
    }
    SUBCASE("fully even series saturates the bound") {
        TruncatedSeries s = geometric_1px2(b, 5);
        ParityReport rep = evenness_order(s, 0.0);
        CHECK(rep.evenness_order == 6);
        CHECK(rep.first_odd_power == -1);
        TruncatedSeries s2 = geometric_1px2(b, 6);
        CHECK(evenness_order(s2, 0.0).evenness_order == 6);
    }
    SUBCASE("partially even model has order two") {
        CollarMetric g = preset_pe_model(4, 8, b, 1);
        ParityReport rep = evenness_order(g.gab(), default_parity_tol(g.gab()));
        CHECK(rep.evenness_order == 2);
        CHECK(rep.first_odd_power == 3);
    }
}

TEST_CASE("scalar transcendental kernels") {
    auto b = Boundary::constant(3);
    SUBCASE("exp and log invert each other") {
        TruncatedSeries s = random_scalar_series(b, 6, 41, 0.4);
        s[0] = BoundaryField::uniform_scalar(b, 0.7);
        TruncatedSeries back = series::log(series::exp(s));
        back -= s;
        CHECK(back.sup_norm() <= 1e-13);
    }
    SUBCASE("sqrt squares back") {
        TruncatedSeries s = random_scalar_series(b, 6, 43, 0.3);
        s[0] = BoundaryField::uniform_scalar(b, 1.5);
        TruncatedSeries r = series::sqrt(s);
        TruncatedSeries sq = series_mul(r, r);
        sq -= s;
        CHECK(sq.sup_norm() <= 1e-13);
    }
    SUBCASE("composition against direct evaluation") {
        TruncatedSeries f = random_scalar_series(b, 6, 47, 0.5);
        TruncatedSeries sub = TruncatedSeries::zeros(b, Valence::Scalar, 6);
        sub[1] = BoundaryField::uniform_scalar(b, 0.8);
        sub[2] = BoundaryField::uniform_scalar(b, -0.2);
        TruncatedSeries comp = series::compose(f, sub);
        // evaluate both sides at a small x where truncation effects match
        const double x = 0.05;
        const double inner = 0.8 * x - 0.2 * x * x;
        double direct = 0.0;
        for (int k = 6; k >= 0; --k) direct = direct * inner + f[k].raw()[0];
        // the composed series evaluated at x differs from direct only above
        // the truncation order
        CHECK(comp.eval(x).raw()[0] == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("mismatched backends and valences are rejected") {
    auto b1 = Boundary::constant(3);
    auto b2 = Boundary::grid({8, 8, 8});
    TruncatedSeries s1 = TruncatedSeries::zeros(b1, Valence::Scalar, 3);
    TruncatedSeries s2 = TruncatedSeries::zeros(b2, Valence::Scalar, 3);
    CHECK_THROWS_AS(series_mul(s1, s2), backend_mismatch);
    TruncatedSeries v = TruncatedSeries::zeros(b1, Valence::Sym2, 3);
    TruncatedSeries w = TruncatedSeries::zeros(b1, Valence::Covector, 3);
    CHECK_THROWS_AS(series_mul(v, w), valence_error);
    TruncatedSeries sing = TruncatedSeries::zeros(b1, Valence::Scalar, 3);
    CHECK_THROWS_AS(series_inverse(sing), singular_error);
}
