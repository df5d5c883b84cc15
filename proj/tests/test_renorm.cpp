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

#include "ahflow/renorm.hpp"

using namespace ahflow;

namespace {

const double kTorusVol = std::pow(kTwoPi, 3);

}  // namespace

TEST_CASE("volume Jacobian") {
    auto b = Boundary::constant(3);
    SUBCASE("frozen family gives the constant Jacobian") {
        CollarMetric g = preset_cusp(4, 8, b);
        TruncatedSeries J = jacobian_series(g);
        CHECK(J[0].raw()[0] == doctest::Approx(1.0).epsilon(1e-15));
        for (int k = 1; k <= 8; ++k) CHECK(J[k].sup_norm() == 0.0);
    }
    SUBCASE("conformally flat family reproduces the binomial series") {
        // h = (1+x^2) h0 in three boundary dimensions: J = (1+x^2)^{3/2}
        TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 8);
        h.set(2, identity_sym2(b));
        CollarMetric g = CollarMetric::normal_form(4, std::move(h));
        TruncatedSeries J = jacobian_series(g);
        const double expect[] = {1.0, 0.0, 1.5, 0.0, 0.375, 0.0, -0.0625, 0.0, 0.0234375};
        for (int k = 0; k <= 8; ++k)
            CHECK(J[k].raw()[0] == doctest::Approx(expect[k]).epsilon(1e-13));
    }
    SUBCASE("first odd coefficient is half the trace") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-0.2, 0.2);
        std::vector<double> m(static_cast<size_t>(sym2_comps(3)));
        for (auto& v : m) v = u(rng);
        TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 6);
        h.set(3, BoundaryField::uniform(b, Valence::Sym2, m));
        CollarMetric g = CollarMetric::normal_form(4, std::move(h));
        TruncatedSeries J = jacobian_series(g);
        double tr = 0.0;
        for (int i = 0; i < 3; ++i) tr += m[static_cast<size_t>(sym2_index(i, i, 3))];
        CHECK(J[3].raw()[0] == doctest::Approx(0.5 * tr).epsilon(1e-13));
        CHECK(J[1].sup_norm() == 0.0);
        CHECK(J[2].sup_norm() == 0.0);
    }
    SUBCASE("normal form required by the spec-level operation") {
        RandomMetricOptions mo;
        mo.n = 4;
        mo.trunc = 6;
        mo.with_cross = true;
        mo.normal_form = false;
        CollarMetric g = random_even_metric(b, mo);
        CHECK_THROWS_AS(volume_jacobian(g), config_error);
        CHECK_NOTHROW(jacobian_series(g));
    }
}

TEST_CASE("finite part linearity") {
    auto b = Boundary::constant(3);
    BoundaryMetric h0 = BoundaryMetric::euclidean(b);
    RieszOptions opt;
    opt.x_cut = 0.7;
    opt.x_max = 0.7;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> du(-1.0, 1.0);
    PhgExpansion u, v, w;
    for (int p = -4; p <= 2; ++p) {
        const double cu = du(rng), cv = du(rng);
        u.add_term(p, 0, BoundaryField::uniform_scalar(b, cu));
        v.add_term(p, 0, BoundaryField::uniform_scalar(b, cv));
        w.add_term(p, 0, BoundaryField::uniform_scalar(b, 2.0 * cu - 3.0 * cv));
    }
    u.add_term(-1, 1, BoundaryField::uniform_scalar(b, 0.4));
    w.add_term(-1, 1, BoundaryField::uniform_scalar(b, 0.8));
    const double lhs = riesz_fp(w, h0, opt).finite_part;
    const double rhs = 2.0 * riesz_fp(u, h0, opt).finite_part - 3.0 * riesz_fp(v, h0, opt).finite_part;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("cut independence on an exact-series metric") {
    auto b = Boundary::constant(3);
    // h = (1+x^2)^2 h0 has a polynomial Jacobian (1+x^2)^3, so the series
    // and the pointwise tail agree identically
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 8);
    h.set(2, 2.0 * identity_sym2(b));
    h.set(4, identity_sym2(b));
    CollarMetric g = CollarMetric::normal_form(4, std::move(h));
    RieszOptions opt;
    opt.x_max = 1.0;
    std::vector<double> vals;
    for (double c : {0.2, 0.4, 0.6}) {
        opt.x_cut = c;
        vals.push_back(renormalized_volume(g, opt).value);
    }
    CHECK(std::abs(vals[0] - vals[1]) <= 1e-9);
    CHECK(std::abs(vals[1] - vals[2]) <= 1e-9);
}

TEST_CASE("renormalized integrals") {
    auto b = Boundary::constant(3);
    RieszOptions opt;
    opt.x_cut = 0.4;
    opt.x_max = 1.0;
    SUBCASE("unit integrand reduces to the renormalized volume") {
        CollarMetric g = preset_vr_generic(4, 8, b, 4);
        TruncatedSeries one = TruncatedSeries::zeros(b, Valence::Scalar, 8);
        one[0] = BoundaryField::uniform_scalar(b, 1.0);
        const double a = renormalized_integral(g, one, opt).value;
        const double v = renormalized_volume(g, opt).value;
        CHECK(a == doctest::Approx(v).epsilon(1e-12));
    }
    SUBCASE("vanishing integrand on the stationary model") {
        CollarMetric g = preset_cusp(4, 8, b);
        TruncatedSeries u = einstein_trace(g);
        CHECK(u.sup_norm() == 0.0);
        CHECK(renormalized_integral(g, u, opt).value == 0.0);
    }
    SUBCASE("classically convergent integrand matches direct quadrature") {
        CollarMetric g = preset_vr_generic(4, 8, b, 2);
        // base power 2 - 4 = -2 < -1 is still singular; use a x^4 profile so
        // the full integrand x^{-4} * x^4 * J is integrable
        TruncatedSeries u = TruncatedSeries::zeros(b, Valence::Scalar, 8);
        u[4] = BoundaryField::uniform_scalar(b, 1.3);
        u[6] = BoundaryField::uniform_scalar(b, -0.4);
        const double fp = renormalized_integral(g, u, opt).value;
        auto f = [&](double x) {
            BoundaryField j = jacobian_at(g, x);
            BoundaryField uval = u.eval(x);
            return boundary_integral(field::scalar_mul(uval, j), g.h0()) * std::pow(x, -4);
        };
        const double direct = quad::adaptive_simpson(f, 1e-12, 1.0, 1e-11);
        CHECK(std::abs(fp - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("pole bookkeeping and the audit trail") {
    auto b = Boundary::constant(3);
    BoundaryMetric h0 = BoundaryMetric::euclidean(b);
    RieszOptions opt;
    opt.x_cut = 0.5;
    opt.x_max = 0.5;
    PhgExpansion u;
    u.add_term(-1, 0, BoundaryField::uniform_scalar(b, 1.0 / kTorusVol));
    u.add_term(-1, 2, BoundaryField::uniform_scalar(b, 0.5 / kTorusVol));
    u.add_term(-3, 1, BoundaryField::uniform_scalar(b, 1.0 / kTorusVol));
    FinitePartResult r = riesz_fp(u, h0, opt);
    // pole orders up to logpow+1 at power -1 only
    bool has3 = false;
    for (const auto& p : r.poles) {
        CHECK(p.order <= 3);
        has3 = has3 || p.order == 3;
    }
    CHECK(has3);
    CHECK(r.audit.size() == 3);
    // FP of the log-free term over [0, 1/2] is log(1/2)
    CHECK(r.audit[0].fp_contribution == doctest::Approx(std::log(0.5)).epsilon(1e-13));
    // analytic value for the p = -3, l = 1 term: d/ds [X^{s+1}/(s+1)] at s=-3
    const double X = 0.5;
    const double expect = std::log(X) * std::pow(X, -2) / (-2.0) - std::pow(X, -2) / 4.0;
    CHECK(r.audit[2].fp_contribution == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("bdf discrepancy, two routes") {
    auto b = Boundary::constant(3);
    RieszOptions opt;
    opt.x_cut = 0.4;
    opt.x_max = 0.9;
    opt.quadrature.adaptive_tol = 1e-13;
    SUBCASE("vanishing trace means no discrepancy") {
        CollarMetric g = preset_vr_generic(4, 8, b, 8);
        TruncatedSeries u = TruncatedSeries::zeros(b, Valence::Scalar, 8);
        u[0] = BoundaryField::uniform_scalar(b, 1.0);
        ConformalFactor w = solve_hj_normal(g, BoundaryField::uniform_scalar(b, 0.2));
        DiscrepancyResult d = bdf_discrepancy(g, u, w, opt);
        CHECK(std::abs(d.boundary_formula) <= 1e-12);
        CHECK(std::abs(d.direct) <= 1e-9);
    }
    SUBCASE("unit integrand against the closed boundary formula") {
        CollarMetric g = preset_pe_model(4, 8, b, 9);
        TruncatedSeries u = TruncatedSeries::zeros(b, Valence::Scalar, 8);
        u[0] = BoundaryField::uniform_scalar(b, 1.0);
        const double w0 = 0.18;
        ConformalFactor w = solve_hj_normal(g, BoundaryField::uniform_scalar(b, w0));
        DiscrepancyResult d = bdf_discrepancy(g, u, w, opt);
        // (1/2) A0 int tr^{h0} h_3 dV with A0 the first variation weight w0
        const double tr3 = g.h0().trace(g.gab()[3]).raw()[0];
        const double expect = 0.5 * w0 * tr3 * kTorusVol;
        CHECK(d.boundary_formula == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(d.direct - d.boundary_formula) <= 1e-8);
    }
    SUBCASE("the retained first-odd integrand term matters") {
        CollarMetric g = preset_vr_generic(4, 8, b, 10);  // trace-free h3
        TruncatedSeries u = TruncatedSeries::zeros(b, Valence::Scalar, 8);
        u[0] = BoundaryField::uniform_scalar(b, 1.0);
        u[3] = BoundaryField::uniform_scalar(b, 0.6);
        const double w0 = -0.12;
        ConformalFactor w = solve_hj_normal(g, BoundaryField::uniform_scalar(b, w0));
        DiscrepancyResult d = bdf_discrepancy(g, u, w, opt);
        const double expect = w0 * 0.6 * kTorusVol;  // u_{n-1} omega_0 J_0 term
        CHECK(d.boundary_formula == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(d.direct - d.boundary_formula) <= 1e-8);
    }
    SUBCASE("grid backends are rejected for the two-route driver") {
        auto bg = Boundary::grid({8, 8, 8});
        CollarMetric g = preset_cusp(4, 6, bg);
        TruncatedSeries u = TruncatedSeries::zeros(bg, Valence::Scalar, 6);
        u[0] = BoundaryField::uniform_scalar(bg, 1.0);
        ConformalFactor w = ConformalFactor::zero(bg, 6);
        CHECK_THROWS_AS(bdf_discrepancy(g, u, w, RieszOptions{}), config_error);
    }
}

TEST_CASE("Hadamard regularization agrees with the Riesz finite part") {
    // h = (1+x^2)^2 h0 has Jacobian (1+x^2)^3, so the epsilon expansion of
    // the truncated volume terminates: fit it and compare the constant term
    auto b = Boundary::constant(3);
    TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 8);
    h.set(2, 2.0 * identity_sym2(b));
    h.set(4, identity_sym2(b));
    CollarMetric g = CollarMetric::normal_form(4, std::move(h));
    RieszOptions opt;
    opt.x_cut = 0.4;
    opt.x_max = 1.0;
    const double renv = renormalized_volume(g, opt).value;

    auto vol_from = [&](double eps) {
        auto f = [&](double s) {
            const double x = std::exp(s);
            BoundaryField j = jacobian_at(g, x);
            return boundary_integral(j, g.h0()) * std::pow(x, -3);
        };
        return quad::adaptive_simpson(f, std::log(eps), std::log(1.0), 1e-10);
    };
    const std::vector<double> eps = {0.4, 0.3, 0.2, 0.15, 0.1};
    const int nb = 5;
    auto basis = [](double e, int c) {
        switch (c) {
            case 0: return std::pow(e, -3);
            case 1: return 1.0 / e;
            case 2: return 1.0;
            case 3: return e;
            default: return e * e * e;
        }
    };
    std::vector<double> A(static_cast<size_t>(nb) * nb, 0.0), rhs(static_cast<size_t>(nb), 0.0), scale(nb, 0.0);
    for (double e : eps)
        for (int c = 0; c < nb; ++c) scale[static_cast<size_t>(c)] = std::max(scale[static_cast<size_t>(c)], std::abs(basis(e, c)));
    for (double e : eps) {
        const double v = vol_from(e);
        std::vector<double> row(static_cast<size_t>(nb));
        for (int c = 0; c < nb; ++c) row[static_cast<size_t>(c)] = basis(e, c) / scale[static_cast<size_t>(c)];
        for (int p = 0; p < nb; ++p) {
            rhs[static_cast<size_t>(p)] += row[static_cast<size_t>(p)] * v;
            for (int q = 0; q < nb; ++q) A[static_cast<size_t>(p) * nb + q] += row[static_cast<size_t>(p)] * row[static_cast<size_t>(q)];
        }
    }
    REQUIRE(dense::cholesky(A.data(), nb));
    dense::cholesky_solve(A.data(), nb, rhs.data());
    const double hadamard = rhs[2] / scale[2];
    CHECK(std::abs(hadamard - renv) <= 1e-6);
}

TEST_CASE("pole residue of an even shifted integrand vanishes") {
    auto b = Boundary::constant(3);
    CollarMetric g = preset_vr_generic(4, 8, b, 12);
    // even series with no content below x^2, like the time derivative of a
    // special-bdf factor
    TruncatedSeries s = TruncatedSeries::zeros(b, Valence::Scalar, 8);
    s[2] = BoundaryField::uniform_scalar(b, 0.7);
    s[4] = BoundaryField::uniform_scalar(b, -0.2);
    CHECK(std::abs(riesz_residue(g, s)) <= 1e-13);
}
