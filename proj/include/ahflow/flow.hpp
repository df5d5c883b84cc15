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

#ifndef AHFLOW_FLOW_HPP
#define AHFLOW_FLOW_HPP

#include <limits>

#include "renorm.hpp"

namespace ahflow {

// ---------------------------------------------------------------------------
// Jet flow: the evolution d/dt gbar = -2 Ebar(gbar) closes exactly on the
// truncated jet because coefficient k of Ebar depends only on metric
// coefficients <= k.  Classical fixed-step RK4 with a blow-up guard.
// ---------------------------------------------------------------------------

inline BlockedSym2 jet_rhs(const CollarMetric& g) {
    BlockedSym2 e = ebar(g);
    e *= -2.0;
    return e;
}

// mu = {gbar_xx}_{2m-1} + h0^{ab} {gbar_ab}_{2m-1},  nu = {gbar_xx}_{2m-1},
// both relative to the frozen truncation G0 = (dx^2 + h0)/x^2.
inline std::pair<BoundaryField, BoundaryField> mu_nu_extract(const CollarMetric& g, const CollarMetric& G0) {
    const int p = g.n() - 1;
    if (g.trunc_order() < p) throw config_error("truncation order too small for mu/nu extraction");
    BoundaryField nu = g.gxx()[p];
    BoundaryField mu = nu + G0.h0().trace(g.gab()[p]);
    return {mu, nu};
}

// Closed-form solution of mu' = -2(2m-1) mu, nu' = (2m-3)(2m-1) mu.
inline std::pair<double, double> mu_nu_closed_form(double mu0, double nu0, int m, double t) {
    if (m < 2) throw config_error("mu_nu_closed_form needs m >= 2");
    const double rate = 2.0 * (2.0 * m - 1.0);
    const double decay = std::exp(-rate * t);
    const double mu = mu0 * decay;
    const double nu = nu0 + 0.5 * (2.0 * m - 3.0) * mu0 * (1.0 - decay);
    return {mu, nu};
}

// Representative scalar for CSV output: the value itself on the constant
// backend, the sup-norm on grids.
inline double rep_value(const BoundaryField& f) {
    if (!f.boundary()->is_grid() && f.comps() == 1) return f.raw()[0];
    return f.sup_norm();
}

struct DiagnosticsRow {
    double t = 0.0;
    double mu = 0.0;
    double nu = 0.0;
    double renv = std::numeric_limits<double>::quiet_NaN();
    double variation_residual = std::numeric_limits<double>::quiet_NaN();
    int evenness_order = 0;
    double vr_trace_norm = 0.0;
};

struct JetFlowOptions {
    double dt = 1e-3;
    double T = 0.5;
    int output_stride = 10;
    double blowup_norm = 1e8;
    bool gauge_diagnostics = true;   // recover the VR trace via the HJ + bdf chain
    bool compute_renv = false;
    RieszOptions renorm;
};

struct JetTrajectory {
    int n = 0;
    double dt = 0.0;
    int output_stride = 0;
    std::vector<double> times;
    std::vector<BlockedSym2> states;
    std::vector<ConformalFactor> gauge;  // special-bdf factors per sample (when diagnostics on)
    std::vector<DiagnosticsRow> rows;
};

namespace detail {

// VR trace of a possibly non-normal metric through the gauge chain; also
// hands back the factor for wall bookkeeping.
inline std::pair<BoundaryField, ConformalFactor> vr_trace_via_gauge(const CollarMetric& g) {
    ConformalFactor w = solve_hj_general(g);
    CollarMetric gp = change_bdf(g, w);
    BoundaryMetric h0p(gp.gab()[0]);
    return {h0p.trace(gp.gab()[g.n() - 1]), std::move(w)};
}

}  // namespace detail

inline JetTrajectory jet_flow_run(const CollarMetric& g0, const JetFlowOptions& opt) {
    if (opt.dt <= 0.0 || opt.T < 0.0) throw config_error("flow needs dt > 0 and T >= 0");
    const int n = g0.n();
    JetTrajectory traj;
    traj.n = n;
    traj.dt = opt.dt;
    traj.output_stride = std::max(1, opt.output_stride);

    const CollarMetric G0 = CollarMetric::normal_form(
        n, TruncatedSeries::constant(g0.gab()[0], g0.trunc_order()));

    BlockedSym2 y = g0.blocks();
    const int steps = static_cast<int>(std::llround(opt.T / opt.dt));

    auto rhs = [&](const BlockedSym2& state) { return jet_rhs(g0.with_blocks(state)); };

    auto record = [&](double t, const BlockedSym2& state) {
        CollarMetric g = g0.with_blocks(state);
        DiagnosticsRow row;
        row.t = t;
        auto mn = mu_nu_extract(g, G0);
        row.mu = rep_value(mn.first);
        row.nu = rep_value(mn.second);
        row.evenness_order = metric_evenness(g, default_metric_parity_tol(g)).evenness_order;
        ConformalFactor w = ConformalFactor::zero(g.boundary(), g.trunc_order());
        if (opt.gauge_diagnostics) {
            auto [trf, wf] = detail::vr_trace_via_gauge(g);
            row.vr_trace_norm = trf.sup_norm();
            w = std::move(wf);
        } else {
            row.vr_trace_norm = G0.h0().trace(g.gab()[n - 1]).sup_norm();
        }
        if (opt.compute_renv) row.renv = renormalized_volume(g, opt.renorm).value;
        traj.times.push_back(t);
        traj.states.push_back(state);
        traj.gauge.push_back(std::move(w));
        traj.rows.push_back(row);
    };

    record(0.0, y);
    for (int s = 1; s <= steps; ++s) {
        BlockedSym2 k1 = rhs(y);
        BlockedSym2 y2 = y;
        y2.axpy(0.5 * opt.dt, k1);
        BlockedSym2 k2 = rhs(y2);
        BlockedSym2 y3 = y;
        y3.axpy(0.5 * opt.dt, k2);
        BlockedSym2 k3 = rhs(y3);
        BlockedSym2 y4 = y;
        y4.axpy(opt.dt, k3);
        BlockedSym2 k4 = rhs(y4);
        y.axpy(opt.dt / 6.0, k1);
        y.axpy(opt.dt / 3.0, k2);
        y.axpy(opt.dt / 3.0, k3);
        y.axpy(opt.dt / 6.0, k4);
        if (!y.all_finite() || y.sup_norm() > opt.blowup_norm)
            throw blowup_error("jet flow blow-up at t = " + std::to_string(s * opt.dt));
        if (s % traj.output_stride == 0) record(s * opt.dt, y);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Pointwise curvature for x-only collar data: the full (d+1)-dimensional
// metric, its first and second x-derivatives in, Ebar out.  Shared by the
// grid engine and by cross-checks.
// ---------------------------------------------------------------------------

namespace pointwise {

// G, dG, ddG, Eb are D x D row-major; work arrays are allocated by the
// caller via the scratch struct to keep the hot loop allocation-free.
struct Scratch {
    int D = 0;
    std::vector<double> Ginv, L, col, Gam, dGam, Rc, dGinv, tmp;
    explicit Scratch(int Dd)
        : D(Dd),
          Ginv(static_cast<size_t>(Dd) * Dd),
          L(static_cast<size_t>(Dd) * Dd),
          col(static_cast<size_t>(Dd)),
          Gam(static_cast<size_t>(Dd) * Dd * Dd),
          dGam(static_cast<size_t>(Dd) * Dd * Dd),
          Rc(static_cast<size_t>(Dd) * Dd),
          dGinv(static_cast<size_t>(Dd) * Dd),
          tmp(static_cast<size_t>(Dd) * Dd) {}
};

inline void ebar_xonly(int n, double x, const double* G, const double* dG, const double* ddG, double* Eb,
                       Scratch& w, double* trE = nullptr) {
    const int D = w.D;
    auto S3 = [&](const double* M, int l, int i, int j) {
        double v = 0.0;
        if (i == 0) v += M[j * D + l];
        if (j == 0) v += M[i * D + l];
        if (l == 0) v -= M[i * D + j];
        return v;
    };
    // inverse metric
    w.L.assign(G, G + D * D);
    if (!dense::cholesky(w.L.data(), D)) throw singular_error("grid metric not positive definite");
    for (int j = 0; j < D; ++j) {
        std::fill(w.col.begin(), w.col.end(), 0.0);
        w.col[static_cast<size_t>(j)] = 1.0;
        dense::cholesky_solve(w.L.data(), D, w.col.data());
        for (int i = 0; i < D; ++i) w.Ginv[static_cast<size_t>(i) * D + j] = w.col[static_cast<size_t>(i)];
    }
    // dGinv = -Ginv dG Ginv
    dense::matmul(w.Ginv.data(), dG, D, w.tmp.data());
    dense::matmul(w.tmp.data(), w.Ginv.data(), D, w.dGinv.data());
    for (auto& v : w.dGinv) v = -v;

    // Gamma and its x-derivative
    for (int k = 0; k < D; ++k)
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) {
                double g1 = 0.0, g2 = 0.0;
                for (int l = 0; l < D; ++l) {
                    const double s = S3(dG, l, i, j);
                    g1 += w.Ginv[static_cast<size_t>(k) * D + l] * s;
                    g2 += w.dGinv[static_cast<size_t>(k) * D + l] * s +
                          w.Ginv[static_cast<size_t>(k) * D + l] * S3(ddG, l, i, j);
                }
                w.Gam[(static_cast<size_t>(k) * D + i) * D + j] = 0.5 * g1;
                w.dGam[(static_cast<size_t>(k) * D + i) * D + j] = 0.5 * g2;
            }

    // Ricci for x-only data:
    //   Rc_ij = dGam[0][i][j] - delta_{j0} sum_k dGam[k][i][k]
    //           + Gam^k_{kl} Gam^l_{ij} - Gam^k_{jl} Gam^l_{ik}
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            double r = w.dGam[(0 * static_cast<size_t>(D) + i) * D + j];
            if (j == 0)
                for (int k = 0; k < D; ++k) r -= w.dGam[(static_cast<size_t>(k) * D + i) * D + k];
            for (int k = 0; k < D; ++k)
                for (int l = 0; l < D; ++l) {
                    r += w.Gam[(static_cast<size_t>(k) * D + k) * D + l] *
                         w.Gam[(static_cast<size_t>(l) * D + i) * D + j];
                    r -= w.Gam[(static_cast<size_t>(k) * D + j) * D + l] *
                         w.Gam[(static_cast<size_t>(l) * D + i) * D + k];
                }
            w.Rc[static_cast<size_t>(i) * D + j] = r;
        }
    // symmetry of mixed partials holds for x-only data; symmetrize to kill
    // the delta_{j0} bookkeeping asymmetry
    for (int i = 0; i < D; ++i)
        for (int j = i + 1; j < D; ++j) {
            const double s = 0.5 * (w.Rc[static_cast<size_t>(i) * D + j] + w.Rc[static_cast<size_t>(j) * D + i]);
            w.Rc[static_cast<size_t>(i) * D + j] = s;
            w.Rc[static_cast<size_t>(j) * D + i] = s;
        }

    const double A = w.Ginv[0];
    double lap = 0.0;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            lap -= w.Ginv[static_cast<size_t>(i) * D + j] * w.Gam[(0 * static_cast<size_t>(D) + i) * D + j];

    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
            const double hess = -w.Gam[(0 * static_cast<size_t>(D) + i) * D + j];
            Eb[static_cast<size_t>(i) * D + j] = -(n - 1.0) * (A - 1.0) * G[static_cast<size_t>(i) * D + j] +
                                                 x * ((n - 2.0) * hess + lap * G[static_cast<size_t>(i) * D + j]) +
                                                 x * x * w.Rc[static_cast<size_t>(i) * D + j];
        }
    if (trE) {
        double tr = 0.0;
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) tr += w.Ginv[static_cast<size_t>(i) * D + j] * Eb[static_cast<size_t>(i) * D + j];
        *trE = tr;
    }
}

}  // namespace pointwise

// ---------------------------------------------------------------------------
// Grid flow: method-of-lines on [0, x_max] for homogeneous (x-only) data on
// the constant backend.  4th-order finite differences in x, RK4 in time,
// values pinned at x = 0 and x = x_max.
// ---------------------------------------------------------------------------

struct GridFlowOptions {
    double dt = 0.0;       // 0 selects cfl * dx^2
    double T = 0.1;
    double cfl = 0.2;
    int output_stride = 10;
    double blowup_norm = 1e8;
};

struct GridState {
    double t = 0.0;
    // per node: gxx and the packed tangential block
    std::vector<double> a;
    std::vector<double> H;
};

class GridEngine {
  public:
    GridEngine(const CollarMetric& g, int nodes, double x_max)
        : n_(g.n()), d_(g.n() - 1), s2_(sym2_comps(d_)), nodes_(nodes), x_max_(x_max) {
        if (g.boundary()->is_grid()) throw config_error("grid engine needs the constant backend");
        if (g.gxa().sup_norm() != 0.0) throw config_error("grid engine needs a vanishing cross block");
        if (nodes_ < 8) throw config_error("grid engine needs at least 8 nodes");
        dx_ = x_max_ / (nodes_ - 1);
        init_.t = 0.0;
        init_.a.resize(static_cast<size_t>(nodes_));
        init_.H.resize(static_cast<size_t>(nodes_) * s2_);
        for (int i = 0; i < nodes_; ++i) {
            const double x = i * dx_;
            init_.a[static_cast<size_t>(i)] = g.gxx().eval(x).raw()[0];
            BoundaryField h = g.gab().eval(x);
            for (int c = 0; c < s2_; ++c) init_.H[static_cast<size_t>(i) * s2_ + c] = h.raw()[static_cast<size_t>(c)];
        }
    }

    int nodes() const { return nodes_; }
    double dx() const { return dx_; }
    double x_max() const { return x_max_; }
    int dim() const { return d_; }
    const GridState& initial() const { return init_; }

    // d/dt (a, H) = -2 (Ebar_xx, Ebar_ab) pointwise; boundary nodes pinned.
    GridState rhs(const GridState& s) const {
        GridState r;
        r.t = 1.0;  // velocity of time
        r.a.assign(s.a.size(), 0.0);
        r.H.assign(s.H.size(), 0.0);
        const int D = d_ + 1;
        pointwise::Scratch scratch(D);
        std::vector<double> G(static_cast<size_t>(D) * D), dG(static_cast<size_t>(D) * D),
            ddG(static_cast<size_t>(D) * D), Eb(static_cast<size_t>(D) * D);

        for (int i = 1; i < nodes_ - 1; ++i) {
            const double x = i * dx_;
            assemble(s, i, G.data());
            derivative1(s, i, dG.data());
            derivative2(s, i, ddG.data());
            pointwise::ebar_xonly(n_, x, G.data(), dG.data(), ddG.data(), Eb.data(), scratch);
            r.a[static_cast<size_t>(i)] = -2.0 * Eb[0];
            for (int c = 0; c < s2_; ++c) {
                int ii = 0, jj = 0;
                unpack_index(c, ii, jj);
                r.H[static_cast<size_t>(i) * s2_ + c] = -2.0 * Eb[static_cast<size_t>(ii + 1) * D + (jj + 1)];
            }
        }
        return r;
    }

    std::vector<GridState> run(const GridFlowOptions& opt) const {
        const double dt = opt.dt > 0.0 ? opt.dt : opt.cfl * dx_ * dx_;
        if (dt > opt.cfl * dx_ * dx_ * (1.0 + 1e-12))
            throw config_error("grid flow time step violates the cfl * dx^2 bound");
        const int steps = static_cast<int>(std::llround(opt.T / dt));
        const int stride = std::max(1, opt.output_stride);
        std::vector<GridState> out;
        GridState y = init_;
        out.push_back(y);
        auto axpy = [&](GridState& dst, double c, const GridState& src) {
            for (size_t k = 0; k < dst.a.size(); ++k) dst.a[k] += c * src.a[k];
            for (size_t k = 0; k < dst.H.size(); ++k) dst.H[k] += c * src.H[k];
            dst.t += c * src.t;
        };
        for (int s = 1; s <= steps; ++s) {
            GridState k1 = rhs(y);
            GridState y2 = y;
            axpy(y2, 0.5 * dt, k1);
            GridState k2 = rhs(y2);
            GridState y3 = y;
            axpy(y3, 0.5 * dt, k2);
            GridState k3 = rhs(y3);
            GridState y4 = y;
            axpy(y4, dt, k3);
            GridState k4 = rhs(y4);
            axpy(y, dt / 6.0, k1);
            axpy(y, dt / 3.0, k2);
            axpy(y, dt / 3.0, k3);
            axpy(y, dt / 6.0, k4);
            double m = 0.0;
            bool finite = true;
            for (double v : y.a) {
                if (!std::isfinite(v)) finite = false;
                m = std::max(m, std::abs(v));
            }
            for (double v : y.H) {
                if (!std::isfinite(v)) finite = false;
                m = std::max(m, std::abs(v));
            }
            if (!finite) throw blowup_error("grid flow produced a non-finite value");
            if (m > opt.blowup_norm) throw blowup_error("grid flow blow-up");
            if (s % stride == 0 || s == steps) out.push_back(y);
        }
        return out;
    }

    // Evaluate the stored state at node i as full matrices (for tests).
    void assemble(const GridState& s, int i, double* G) const {
        const int D = d_ + 1;
        std::fill(G, G + D * D, 0.0);
        G[0] = s.a[static_cast<size_t>(i)];
        for (int c = 0; c < s2_; ++c) {
            int ii = 0, jj = 0;
            unpack_index(c, ii, jj);
            G[static_cast<size_t>(ii + 1) * D + (jj + 1)] = s.H[static_cast<size_t>(i) * s2_ + c];
            G[static_cast<size_t>(jj + 1) * D + (ii + 1)] = s.H[static_cast<size_t>(i) * s2_ + c];
        }
    }

  private:
    void unpack_index(int c, int& i, int& j) const {
        for (int a2 = 0; a2 < d_; ++a2)
            for (int b2 = a2; b2 < d_; ++b2)
                if (sym2_index(a2, b2, d_) == c) {
                    i = a2;
                    j = b2;
                    return;
                }
    }

    template <class Get>
    double stencil1(Get&& get, int i) const {
        // 4th-order first derivative, centered where possible
        if (i >= 2 && i <= nodes_ - 3)
            return (-get(i + 2) + 8.0 * get(i + 1) - 8.0 * get(i - 1) + get(i - 2)) / (12.0 * dx_);
        if (i == 1)
            return (-3.0 * get(0) - 10.0 * get(1) + 18.0 * get(2) - 6.0 * get(3) + get(4)) / (12.0 * dx_);
        if (i == nodes_ - 2) {
            const int e = nodes_ - 1;
            return -(-3.0 * get(e) - 10.0 * get(e - 1) + 18.0 * get(e - 2) - 6.0 * get(e - 3) + get(e - 4)) /
                   (12.0 * dx_);
        }
        throw config_error("stencil at pinned node");
    }

    template <class Get>
    double stencil2(Get&& get, int i) const {
        if (i >= 2 && i <= nodes_ - 3)
            return (-get(i + 2) + 16.0 * get(i + 1) - 30.0 * get(i) + 16.0 * get(i - 1) - get(i - 2)) /
                   (12.0 * dx_ * dx_);
        if (i == 1)
            return (10.0 * get(0) - 15.0 * get(1) - 4.0 * get(2) + 14.0 * get(3) - 6.0 * get(4) + get(5)) /
                   (12.0 * dx_ * dx_);
        if (i == nodes_ - 2) {
            const int e = nodes_ - 1;
            return (10.0 * get(e) - 15.0 * get(e - 1) - 4.0 * get(e - 2) + 14.0 * get(e - 3) - 6.0 * get(e - 4) +
                    get(e - 5)) /
                   (12.0 * dx_ * dx_);
        }
        throw config_error("stencil at pinned node");
    }

    void derivative1(const GridState& s, int i, double* dG) const {
        const int D = d_ + 1;
        std::fill(dG, dG + D * D, 0.0);
        dG[0] = stencil1([&](int k) { return s.a[static_cast<size_t>(k)]; }, i);
        for (int c = 0; c < s2_; ++c) {
            int ii = 0, jj = 0;
            unpack_index(c, ii, jj);
            const double v = stencil1([&](int k) { return s.H[static_cast<size_t>(k) * s2_ + c]; }, i);
            dG[static_cast<size_t>(ii + 1) * D + (jj + 1)] = v;
            dG[static_cast<size_t>(jj + 1) * D + (ii + 1)] = v;
        }
    }

    void derivative2(const GridState& s, int i, double* ddG) const {
        const int D = d_ + 1;
        std::fill(ddG, ddG + D * D, 0.0);
        ddG[0] = stencil2([&](int k) { return s.a[static_cast<size_t>(k)]; }, i);
        for (int c = 0; c < s2_; ++c) {
            int ii = 0, jj = 0;
            unpack_index(c, ii, jj);
            const double v = stencil2([&](int k) { return s.H[static_cast<size_t>(k) * s2_ + c]; }, i);
            ddG[static_cast<size_t>(ii + 1) * D + (jj + 1)] = v;
            ddG[static_cast<size_t>(jj + 1) * D + (ii + 1)] = v;
        }
    }

    int n_, d_, s2_, nodes_;
    double x_max_, dx_ = 0.0;
    GridState init_;
};

// ---------------------------------------------------------------------------
// Volume-variation harness: along a jet trajectory compare the centered difference
// of RenV against -FP int (S + n(n-1)) dV.
//
// For a volume renormalizable trajectory the finite part taken in the fixed
// chart equals the invariant renormalized volume: the change-of-bdf
// discrepancy sum_{j+k=n-1} int omega_j J_k dV dies term by term because
// omega is even and O(x^2) while the odd Jacobian coefficient carries the
// trace mu, which vanishes.  Both sides are therefore evaluated in the fixed
// chart, and the interior tail of the right-hand side is the exact pointwise
// trace of the truncated Ebar, the actual velocity of the jet system.
// ---------------------------------------------------------------------------

struct VariationOptions {
    RieszOptions renorm;
};

// tr^{gbar(x)} E(x) with the exact pointwise inverse of the evaluated
// blocks.
inline BoundaryField blocked_trace_at(const CollarMetric& g, const BlockedSym2& e, double x) {
    const int d = g.boundary()->dim();
    const int D = d + 1;
    BoundaryField a = g.gxx().eval(x), bb = g.gxa().eval(x), H = g.gab().eval(x);
    BoundaryField exx = e.xx.eval(x), exa = e.xa.eval(x), eab = e.ab.eval(x);
    BoundaryField out = BoundaryField::zeros(g.boundary(), Valence::Scalar);
    std::vector<double> full(static_cast<size_t>(D) * D), l(static_cast<size_t>(D) * D),
        col(static_cast<size_t>(D)), inv(static_cast<size_t>(D) * D);
    for (int p = 0; p < out.points(); ++p) {
        full[0] = a.at(p)[0];
        for (int i = 0; i < d; ++i) {
            full[static_cast<size_t>(i + 1)] = bb.at(p)[i];
            full[static_cast<size_t>(i + 1) * D] = bb.at(p)[i];
            for (int j = 0; j < d; ++j)
                full[static_cast<size_t>(i + 1) * D + (j + 1)] = H.at(p)[sym2_index(i, j, d)];
        }
        l = full;
        if (!dense::cholesky(l.data(), D)) throw singular_error("collar metric not positive definite");
        for (int j = 0; j < D; ++j) {
            std::fill(col.begin(), col.end(), 0.0);
            col[static_cast<size_t>(j)] = 1.0;
            dense::cholesky_solve(l.data(), D, col.data());
            for (int i = 0; i < D; ++i) inv[static_cast<size_t>(i) * D + j] = col[static_cast<size_t>(i)];
        }
        double tr = inv[0] * exx.at(p)[0];
        for (int i = 0; i < d; ++i) tr += 2.0 * inv[static_cast<size_t>(i + 1)] * exa.at(p)[i];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                tr += inv[static_cast<size_t>(i + 1) * D + (j + 1)] * eab.at(p)[sym2_index(i, j, d)];
        out.at(p)[0] = tr;
    }
    return out;
}

struct VariationSample {
    double t = 0.0;
    double renv = 0.0;
    double drenv_dt = 0.0;
    double rhs_fp = 0.0;       // FP int (S + n(n-1)) dV
    double residual = 0.0;     // drenv_dt + rhs_fp
};

struct VariationReport {
    std::vector<VariationSample> samples;
    double max_residual = 0.0;
    double scale = 0.0;          // max |dRenV/dt|
    double residue_check = 0.0;  // pole coefficient of int x^z wdot u dV
};

inline VariationReport volume_variation_residual(const JetTrajectory& traj, const VariationOptions& opt) {
    VariationReport rep;
    const size_t ns = traj.times.size();
    if (ns < 3) throw config_error("the variation harness needs at least three trajectory samples");
    const double h = traj.times[1] - traj.times[0];

    // RenV and the curvature FP at every sample, both in the fixed chart
    std::vector<double> renv(ns), rhs(ns);
    std::vector<CollarMetric> metrics;
    metrics.reserve(ns);
    for (size_t i = 0; i < ns; ++i) {
        CollarMetric g(traj.n, traj.states[i]);
        metrics.push_back(g);
        renv[i] = renormalized_volume(g, opt.renorm).value;

        BlockedSym2 e = ebar(g);
        TruncatedSeries u = blocked_trace(inverse_blocks(g), e);
        TruncatedSeries J = jacobian_series(g);
        TruncatedSeries prod = series::scalar_mul(u, J);
        PhgExpansion phg;
        const int n = g.n();
        for (int k = 0; k <= prod.trunc_order(); ++k) phg.add_term(k - n, 0, prod[k]);
        phg.x_max = opt.renorm.x_max;
        phg.interior_tail = [g, e, n](double x) {
            BoundaryField tr = blocked_trace_at(g, e, x);
            BoundaryField j = jacobian_at(g, x);
            BoundaryField out = field::scalar_mul(tr, j);
            out *= std::pow(x, -n);
            return out;
        };
        rhs[i] = riesz_fp(phg, g.h0(), opt.renorm).finite_part;
    }

    for (size_t i = 1; i + 1 < ns; ++i) {
        VariationSample s;
        s.t = traj.times[i];
        s.renv = renv[i];
        s.drenv_dt = (renv[i + 1] - renv[i - 1]) / (2.0 * h);
        s.rhs_fp = rhs[i];
        s.residual = s.drenv_dt + s.rhs_fp;
        rep.max_residual = std::max(rep.max_residual, std::abs(s.residual));
        rep.scale = std::max(rep.scale, std::abs(s.drenv_dt));
        rep.samples.push_back(s);
    }

    // Residue term: d/dt of the special-bdf factor against u has no pole at
    // z = 0; measured at the middle sample.
    if (!traj.gauge.empty() && traj.gauge.size() == ns) {
        const size_t mid = ns / 2;
        if (mid >= 1 && mid + 1 < ns) {
            TruncatedSeries wdot = traj.gauge[mid + 1].omega - traj.gauge[mid - 1].omega;
            wdot *= 1.0 / (2.0 * h);
            TruncatedSeries u = einstein_trace(metrics[mid]);
            TruncatedSeries s = series::scalar_mul(wdot, u.truncated(wdot.trunc_order()));
            rep.residue_check = std::abs(riesz_residue(metrics[mid], s));
        }
    }
    return rep;
}

}  // namespace ahflow

#endif  // AHFLOW_FLOW_HPP
