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

#include "ahflow/flow.hpp"

using namespace ahflow;

TEST_CASE("jet right-hand side") {
    auto b = Boundary::constant(3);
    SUBCASE("stationary at the cusp") {
        CHECK(jet_rhs(preset_cusp(4, 8, b)).sup_norm() == 0.0);
    }
    SUBCASE("the boundary restriction never moves") {
        CollarMetric g = preset_vr_generic(4, 8, b, 3);
        BlockedSym2 rhs = jet_rhs(g);
        CHECK(rhs.xx[0].sup_norm() == 0.0);
        CHECK(rhs.xa[0].sup_norm() == 0.0);
        CHECK(rhs.ab[0].sup_norm() == 0.0);
    }
    SUBCASE("restriction formula for non-AH normalization") {
        // with gxx(0) = c != 1 the restriction is 2(n-1)(A0 - 1) gbar|0
        BlockedSym2 blocks = BlockedSym2::zeros(b, 6);
        blocks.ab = TruncatedSeries::constant(identity_sym2(b), 6);
        blocks.xx = TruncatedSeries::constant(BoundaryField::uniform_scalar(b, 1.25), 6);
        CollarMetric g(4, blocks, false);
        BlockedSym2 rhs = jet_rhs(g);
        const double A0 = 1.0 / 1.25;
        const double factor = 2.0 * 3.0 * (A0 - 1.0);
        CHECK(rhs.xx[0].raw()[0] == doctest::Approx(factor * 1.25).epsilon(1e-14));
        BoundaryField expect_ab = identity_sym2(b);
        expect_ab *= factor;
        BoundaryField d = rhs.ab[0] - expect_ab;
        CHECK(d.sup_norm() <= 1e-14);
    }
    SUBCASE("right-hand side of a partially even metric is even to order two") {
        RandomMetricOptions mo;
        mo.n = 4;
        mo.trunc = 8;
        mo.normal_form = true;
        mo.evenness = 2;
        mo.seed = 5;
        CollarMetric g = random_even_metric(b, mo);
        BlockedSym2 rhs = jet_rhs(g);
        CHECK(rhs.xx[1].sup_norm() == 0.0);
        CHECK(rhs.ab[1].sup_norm() == 0.0);
        CHECK(rhs.xa[0].sup_norm() == 0.0);
        CHECK(rhs.xa[2].sup_norm() == 0.0);
    }
}

TEST_CASE("mu/nu extraction") {
    auto b = Boundary::constant(3);
    SUBCASE("cusp gives zero") {
        CollarMetric g = preset_cusp(4, 8, b);
        auto [mu, nu] = mu_nu_extract(g, g);
        CHECK(mu.sup_norm() == 0.0);
        CHECK(nu.sup_norm() == 0.0);
    }
    SUBCASE("synthetic blocks reproduce the trace split") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-0.4, 0.4);
        const double nu0 = u(rng);
        std::vector<double> m(static_cast<size_t>(sym2_comps(3)));
        for (auto& v : m) v = u(rng);
        BlockedSym2 blocks = BlockedSym2::zeros(b, 6);
        blocks.ab = TruncatedSeries::constant(identity_sym2(b), 6);
        blocks.xx = TruncatedSeries::zeros(b, Valence::Scalar, 6);
        blocks.xx[0] = BoundaryField::uniform_scalar(b, 1.0);
        blocks.xx[3] = BoundaryField::uniform_scalar(b, nu0);
        blocks.ab.set(3, BoundaryField::uniform(b, Valence::Sym2, m));
        CollarMetric g(4, blocks, false);
        CollarMetric G0 = preset_cusp(4, 6, b);
        auto [mu, nu] = mu_nu_extract(g, G0);
        double tr = 0.0;
        for (int i = 0; i < 3; ++i) tr += m[static_cast<size_t>(sym2_index(i, i, 3))];
        CHECK(nu.raw()[0] == doctest::Approx(nu0).epsilon(1e-15));
        CHECK(mu.raw()[0] == doctest::Approx(nu0 + tr).epsilon(1e-15));
    }
    SUBCASE("VR normal form has mu = nu = 0") {
        CollarMetric g = preset_vr_generic(4, 8, b, 6);
        auto [mu, nu] = mu_nu_extract(g, g);
        CHECK(nu.sup_norm() == 0.0);
        CHECK(mu.sup_norm() <= 1e-15);
    }
}

TEST_CASE("closed-form linear system") {
    auto z = mu_nu_closed_form(0.0, 0.0, 2, 0.7);
    CHECK(z.first == 0.0);
    CHECK(z.second == 0.0);
    auto m2 = mu_nu_closed_form(1.0, 0.0, 2, 0.25);
    CHECK(m2.first == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
    CHECK(m2.second == doctest::Approx(0.5 * (1.0 - std::exp(-1.5))).epsilon(1e-15));
}

TEST_CASE("jet flow") {
    auto b = Boundary::constant(3);
    SUBCASE("cusp trajectory is constant") {
        CollarMetric g = preset_cusp(4, 8, b);
        JetFlowOptions opt;
        opt.dt = 1e-2;
        opt.T = 0.5;
        opt.output_stride = 10;
        opt.gauge_diagnostics = false;
        JetTrajectory traj = jet_flow_run(g, opt);
        for (const auto& st : traj.states) {
            BlockedSym2 d = st;
            d -= g.blocks();
            CHECK(d.sup_norm() <= 1e-12);
        }
    }
    SUBCASE("odd slots stay identically zero while even ones move") {
        CollarMetric g = preset_vr_generic(4, 8, b, 4);
        JetFlowOptions opt;
        opt.dt = 1e-3;
        opt.T = 0.25;
        opt.output_stride = 50;
        opt.gauge_diagnostics = false;
        JetTrajectory traj = jet_flow_run(g, opt);
        CHECK(traj.states.back().xx[1].sup_norm() == 0.0);
        CHECK(traj.states.back().ab[1].sup_norm() == 0.0);
        BlockedSym2 d = traj.states.back();
        d -= g.blocks();
        CHECK(d.sup_norm() > 1e-4);
        for (const auto& row : traj.rows) CHECK(row.evenness_order >= 2);
    }
    SUBCASE("blow-up guard") {
        TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 8);
        h.set(2, 60.0 * identity_sym2(b));
        CollarMetric g = CollarMetric::normal_form(4, std::move(h));
        JetFlowOptions opt;
        opt.dt = 0.05;
        opt.T = 5.0;
        opt.gauge_diagnostics = false;
        CHECK_THROWS_AS(jet_flow_run(g, opt), blowup_error);
    }
}

TEST_CASE("grid engine") {
    auto b = Boundary::constant(3);
    SUBCASE("stencils differentiate quartics exactly") {
        // compare the engine's stencil-based RHS against the same pointwise
        // evaluator driven by exact polynomial derivatives: on degree-four
        // data the 4th-order stencils are exact, so only roundoff remains
        TruncatedSeries h = TruncatedSeries::constant(identity_sym2(b), 4);
        h.set(2, 0.05 * identity_sym2(b));
        h.set(4, 0.02 * identity_sym2(b));
        CollarMetric g = CollarMetric::normal_form(4, std::move(h));
        GridEngine eng(g, 101, 1.0);
        GridState rhs = eng.rhs(eng.initial());
        TruncatedSeries d1 = g.gab().deriv_x();
        TruncatedSeries d2 = d1.deriv_x();
        pointwise::Scratch scratch(4);
        std::vector<double> G(16, 0.0), dG(16, 0.0), ddG(16, 0.0), Eb(16);
        double worst = 0.0;
        const int s2 = sym2_comps(3);
        for (int i = 1; i < 100; ++i) {
            const double x = i * eng.dx();
            G[0] = 1.0;
            BoundaryField hv = g.gab().eval(x), h1 = d1.eval(x), h2v = d2.eval(x);
            for (int a2 = 0; a2 < 3; ++a2)
                for (int b2 = 0; b2 < 3; ++b2) {
                    G[static_cast<size_t>(a2 + 1) * 4 + (b2 + 1)] = hv.raw()[static_cast<size_t>(sym2_index(a2, b2, 3))];
                    dG[static_cast<size_t>(a2 + 1) * 4 + (b2 + 1)] = h1.raw()[static_cast<size_t>(sym2_index(a2, b2, 3))];
                    ddG[static_cast<size_t>(a2 + 1) * 4 + (b2 + 1)] = h2v.raw()[static_cast<size_t>(sym2_index(a2, b2, 3))];
                }
            pointwise::ebar_xonly(4, x, G.data(), dG.data(), ddG.data(), Eb.data(), scratch);
            worst = std::max(worst, std::abs(rhs.a[static_cast<size_t>(i)] + 2.0 * Eb[0]));
            for (int a2 = 0; a2 < 3; ++a2)
                for (int b2 = a2; b2 < 3; ++b2) {
                    const int c = sym2_index(a2, b2, 3);
                    worst = std::max(worst, std::abs(rhs.H[static_cast<size_t>(i) * s2 + c] +
                                                     2.0 * Eb[static_cast<size_t>(a2 + 1) * 4 + (b2 + 1)]));
                }
        }
        CHECK(worst <= 1e-10);
    }
    SUBCASE("cusp is stationary on the grid") {
        CollarMetric g = preset_cusp(4, 8, b);
        GridEngine eng(g, 81, 1.0);
        GridFlowOptions opt;
        opt.T = 0.02;
        opt.output_stride = 100;
        auto states = eng.run(opt);
        double worst = 0.0;
        for (const auto& st : states) {
            for (size_t i = 0; i < st.a.size(); ++i) worst = std::max(worst, std::abs(st.a[i] - 1.0));
        }
        CHECK(worst <= 1e-10);
    }
    SUBCASE("cfl guard") {
        CollarMetric g = preset_cusp(4, 8, b);
        GridEngine eng(g, 81, 1.0);
        GridFlowOptions opt;
        opt.dt = 1.0;
        opt.T = 1.0;
        CHECK_THROWS_AS(eng.run(opt), config_error);
    }
    SUBCASE("short-time agreement with the jet engine") {
        CollarMetric g = preset_vr_generic(4, 12, b, 7);
        const double T = 0.01;
        GridEngine eng(g, 101, 1.0);
        GridFlowOptions gopt;
        gopt.T = T;
        gopt.output_stride = 1 << 20;
        auto states = eng.run(gopt);
        JetFlowOptions jopt;
        jopt.dt = 1e-4;
        jopt.T = T;
        jopt.output_stride = 100;
        jopt.gauge_diagnostics = false;
        JetTrajectory jt = jet_flow_run(g, jopt);
        CollarMetric gj = g.with_blocks(jt.states.back());
        double worst = 0.0;
        for (int i = 0; i < 40; ++i) {
            const double x = i * eng.dx();
            worst = std::max(worst, std::abs(states.back().a[static_cast<size_t>(i)] - gj.gxx().eval(x).raw()[0]));
        }
        CHECK(worst <= 1e-7);
    }
}

TEST_CASE("volume-variation harness on the stationary model") {
    auto b = Boundary::constant(3);
    CollarMetric g = preset_cusp(4, 8, b);
    JetFlowOptions opt;
    opt.dt = 1e-3;
    opt.T = 0.05;
    opt.output_stride = 10;
    opt.gauge_diagnostics = true;
    JetTrajectory traj = jet_flow_run(g, opt);
    VariationOptions topt;
    topt.renorm.x_cut = 0.4;
    topt.renorm.x_max = 1.0;
    VariationReport rep = volume_variation_residual(traj, topt);
    CHECK(rep.max_residual <= 1e-12);
    CHECK(rep.residue_check <= 1e-12);
    for (const auto& s : rep.samples) CHECK(s.renv == doctest::Approx(-std::pow(kTwoPi, 3) / 3.0).epsilon(1e-12));
}

TEST_CASE("diagnostics rows carry the renormalized volume when asked") {
    auto b = Boundary::constant(3);
    CollarMetric g = preset_vr_generic(4, 8, b, 9);
    JetFlowOptions opt;
    opt.dt = 1e-3;
    opt.T = 0.02;
    opt.output_stride = 10;
    opt.compute_renv = true;
    opt.renorm.x_cut = 0.3;
    opt.renorm.x_max = 0.8;
    JetTrajectory traj = jet_flow_run(g, opt);
    for (const auto& row : traj.rows) CHECK(std::isfinite(row.renv));
}
