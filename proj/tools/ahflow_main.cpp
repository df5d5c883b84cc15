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

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "ahflow/acceptance.hpp"
#include "ahflow/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 2;
constexpr int kExitBlowup = 3;
constexpr int kExitConfig = 4;

struct CommonArgs {
    std::string spec_path;
    ahflow::io::RunConfig rc;
};

void add_run_flags(CLI::App* cmd, CommonArgs& a, bool need_spec = true) {
    auto* o = cmd->add_option("--spec", a.spec_path, "metric specification file (JSON)");
    if (need_spec) o->required();
    cmd->add_option("--dt", a.rc.dt, "time step");
    cmd->add_option("--T", a.rc.T, "final time");
    cmd->add_option("--dx", a.rc.dx, "collar grid spacing (grid engine / quadrature step)");
    cmd->add_option("--x-max", a.rc.x_max, "wall position of the collar");
    cmd->add_option("--x-cut", a.rc.x_cut, "matching point between closed forms and quadrature");
    cmd->add_option("--stride", a.rc.output_stride, "output every k-th step");
    cmd->add_option("--seed", a.rc.seed, "seed for randomized constructions");
    cmd->add_option("--out", a.rc.out_dir, "output directory");
    cmd->add_option("--format", a.rc.format, "csv or json");
    cmd->add_option_function<std::vector<std::string>>(
           "--engine",
           [&a](const std::vector<std::string>& engines) {
               bool jet = false, grid = false;
               for (const auto& e : engines) {
                   if (e == "jet") jet = true;
                   else if (e == "grid") grid = true;
                   else if (e == "both") jet = grid = true;
                   else throw CLI::ValidationError("--engine", "engine must be jet, grid or both");
               }
               a.rc.engine = jet && grid ? "both" : (grid ? "grid" : "jet");
           },
           "jet, grid or both (repeatable)")
        ->take_all();
    cmd->add_flag("--strict", a.rc.strict, "escalate warnings to errors");
}

ahflow::CollarMetric load_metric(const CommonArgs& a, ahflow::io::MetricSpec& spec_out) {
    spec_out = ahflow::io::load_metric_spec(a.spec_path);
    if (a.rc.seed != 1 && spec_out.seed == 1) spec_out.seed = a.rc.seed;
    return ahflow::io::build_metric(spec_out);
}

std::string out_path(const ahflow::io::RunConfig& rc, const std::string& name) {
    std::filesystem::create_directories(rc.out_dir);
    return (std::filesystem::path(rc.out_dir) / name).string();
}

int cmd_classify(const CommonArgs& a) {
    ahflow::io::MetricSpec spec;
    ahflow::CollarMetric g = load_metric(a, spec);
    ahflow::ClassificationResult res = ahflow::classify(g);
    ahflow::io::json j = ahflow::io::classification_to_json(res);
    std::cout << j.dump(2) << "\n";
    if (a.rc.format != "json") {
        std::cout << "summary: " << (res.is_AH ? "AH" : "not AH") << ", even to order " << res.evenness_order
                  << (res.is_partially_even ? ", partially even" : "")
                  << (res.is_VR ? ", volume renormalizable" : "") << ", Einstein defect order "
                  << res.ape_defect_order << (res.ape_defect_order >= g.n() ? " (APE)" : "") << "\n";
    }
    return kExitOk;
}

int cmd_normal_form(const CommonArgs& a) {
    ahflow::io::MetricSpec spec;
    ahflow::CollarMetric g = load_metric(a, spec);
    ahflow::NormalFormResult nf = ahflow::to_normal_form(g);
    ahflow::io::json j;
    j["metric"] = ahflow::io::normal_form_to_json(nf.metric);
    j["gxx_residual"] = nf.gxx_residual;
    j["gxa_residual"] = nf.gxa_residual;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_renvol(const CommonArgs& a) {
    ahflow::io::MetricSpec spec;
    ahflow::CollarMetric g = load_metric(a, spec);
    ahflow::ClassificationResult cls = ahflow::classify(g);
    if (!cls.is_VR) {
        if (a.rc.strict) {
            std::cerr << "error: metric is not volume renormalizable; the value depends on the defining function\n";
            return kExitInvariant;
        }
        std::cerr << "warning: metric is not volume renormalizable; the value depends on the defining function\n";
    }
    ahflow::RieszOptions opt;
    opt.x_cut = a.rc.x_cut;
    opt.x_max = a.rc.x_max;
    ahflow::RenormResult res = ahflow::renormalized_volume(g, opt);
    ahflow::io::json j;
    j["renv"] = res.value;
    j["is_VR"] = cls.is_VR;
    j["poles"] = ahflow::io::json::array();
    for (const auto& p : res.fp.poles) j["poles"].push_back({{"order", p.order}, {"coeff", p.coeff}});
    std::cout << j.dump(2) << "\n";
    const std::string audit = ahflow::io::audit_csv(res.fp);
    ahflow::io::write_file(out_path(a.rc, "renvol_audit.csv"), audit);
    return kExitOk;
}

// near-boundary polynomial fit of a grid state, reused for grid diagnostics
std::vector<double> fit_nodes(const ahflow::GridEngine& eng, const std::vector<double>& vals, double x_fit,
                              int deg) {
    std::vector<double> xs, ys;
    for (int i = 0; i < eng.nodes(); ++i) {
        const double x = i * eng.dx();
        if (x <= x_fit) {
            xs.push_back(x);
            ys.push_back(vals[static_cast<size_t>(i)]);
        }
    }
    return ahflow::acceptance::detail::polyfit(xs, ys, deg);
}

int cmd_flow(const CommonArgs& a) {
    ahflow::io::MetricSpec spec;
    ahflow::CollarMetric g0 = load_metric(a, spec);
    a.rc.validate();

    int exit_code = kExitOk;
    ahflow::io::json extra;

    if (a.rc.engine == "jet" || a.rc.engine == "both") {
        ahflow::JetFlowOptions opt;
        opt.dt = a.rc.dt;
        opt.T = a.rc.T;
        opt.output_stride = a.rc.output_stride;
        opt.compute_renv = true;
        opt.renorm.x_cut = a.rc.x_cut;
        opt.renorm.x_max = a.rc.x_max;
        ahflow::JetTrajectory traj = ahflow::jet_flow_run(g0, opt);
        ahflow::VariationOptions topt;
        topt.renorm = opt.renorm;
        if (traj.times.size() >= 3) {
            ahflow::VariationReport rep = ahflow::volume_variation_residual(traj, topt);
            for (size_t i = 0; i < rep.samples.size(); ++i) traj.rows[i + 1].variation_residual = rep.samples[i].residual;
        }
        ahflow::io::write_file(out_path(a.rc, "flow_jet.csv"), ahflow::io::diagnostics_csv(traj.rows));

        // invariant guards
        const double even0 = traj.rows.front().evenness_order;
        double conf_drift = 0.0;
        for (const auto& st : traj.states) {
            ahflow::BoundaryField d = st.ab[0];
            d -= g0.gab()[0];
            conf_drift = std::max(conf_drift, d.sup_norm());
        }
        bool guard_even = true;
        for (const auto& row : traj.rows) guard_even = guard_even && row.evenness_order >= even0;
        extra["conformal_infinity_drift"] = conf_drift;
        extra["evenness_preserved"] = guard_even;
        if (conf_drift > 1e-9) {
            std::cerr << "invariant failed: conformal infinity drift " << conf_drift << "\n";
            exit_code = kExitInvariant;
        }
        if (!guard_even) {
            std::cerr << "invariant failed: evenness order dropped along the flow\n";
            exit_code = kExitInvariant;
        }
    }

    if (a.rc.engine == "grid" || a.rc.engine == "both") {
        const int nodes = static_cast<int>(std::llround(a.rc.x_max / a.rc.dx)) + 1;
        ahflow::GridEngine eng(g0, nodes, a.rc.x_max);
        ahflow::GridFlowOptions gopt;
        gopt.T = a.rc.T;
        gopt.output_stride = a.rc.output_stride;
        auto states = eng.run(gopt);

        // diagnostics from the near-boundary fit
        const int deg = 5;
        const double x_fit = std::min(0.3, 0.5 * a.rc.x_max);
        const int s2 = ahflow::sym2_comps(eng.dim());
        const double dt_eff = gopt.dt > 0.0 ? gopt.dt : gopt.cfl * eng.dx() * eng.dx();
        std::vector<ahflow::DiagnosticsRow> rows;
        double cross_gap = 0.0;
        ahflow::CollarMetric gjet = g0;
        if (a.rc.engine == "both") {
            ahflow::JetFlowOptions jopt;
            jopt.dt = a.rc.dt;
            jopt.T = a.rc.T;
            jopt.output_stride = std::max(1, static_cast<int>(std::llround(a.rc.T / a.rc.dt)));
            ahflow::JetTrajectory jt = ahflow::jet_flow_run(g0, jopt);
            gjet = g0.with_blocks(jt.states.back());
        }
        for (size_t si = 0; si < states.size(); ++si) {
            const auto& st = states[si];
            ahflow::DiagnosticsRow row;
            row.t = si == 0 ? 0.0 : dt_eff * a.rc.output_stride * static_cast<double>(si);
            auto ca = fit_nodes(eng, st.a, x_fit, deg);
            std::vector<double> trH(static_cast<size_t>(eng.nodes()), 0.0);
            const ahflow::BoundaryField h0inv = g0.h0().inverse();
            for (int i = 0; i < eng.nodes(); ++i) {
                double tr = 0.0;
                for (int p = 0; p < eng.dim(); ++p)
                    for (int q = 0; q < eng.dim(); ++q)
                        tr += h0inv.raw()[static_cast<size_t>(ahflow::sym2_index(p, q, eng.dim()))] *
                              st.H[static_cast<size_t>(i) * s2 + ahflow::sym2_index(p, q, eng.dim())];
                trH[static_cast<size_t>(i)] = tr;
            }
            auto ctr = fit_nodes(eng, trH, x_fit, deg);
            row.nu = ca.size() > 3 ? ca[3] : 0.0;
            row.mu = row.nu + (ctr.size() > 3 ? ctr[3] : 0.0);
            row.vr_trace_norm = std::abs(row.mu - row.nu);
            row.evenness_order = std::abs(ca.size() > 1 ? ca[1] : 0.0) + std::abs(ctr.size() > 1 ? ctr[1] : 0.0) <
                                         1e3 * std::pow(eng.dx(), 4)
                                     ? 2
                                     : 0;
            rows.push_back(row);
        }
        if (a.rc.engine == "both") {
            const auto& fin = states.back();
            for (int i = 0; i < eng.nodes(); ++i) {
                const double x = i * eng.dx();
                if (x > x_fit) continue;
                cross_gap = std::max(cross_gap, std::abs(fin.a[static_cast<size_t>(i)] -
                                                         gjet.gxx().eval(x).raw()[0]));
                ahflow::BoundaryField hj = gjet.gab().eval(x);
                for (int c = 0; c < s2; ++c)
                    cross_gap = std::max(cross_gap, std::abs(fin.H[static_cast<size_t>(i) * s2 + c] -
                                                             hj.raw()[static_cast<size_t>(c)]));
            }
            extra["cross_validation_gap"] = cross_gap;
            std::ostringstream csv;
            csv << ahflow::io::kDiagnosticsHeader << ",cross_gap\n";
            for (const auto& row : rows) {
                csv << ahflow::io::format_double(row.t) << ',' << ahflow::io::format_double(row.mu) << ','
                    << ahflow::io::format_double(row.nu) << ',' << ahflow::io::format_double(row.renv) << ','
                    << ahflow::io::format_double(row.variation_residual) << ',' << row.evenness_order << ','
                    << ahflow::io::format_double(row.vr_trace_norm) << ',' << ahflow::io::format_double(cross_gap)
                    << "\n";
            }
            ahflow::io::write_file(out_path(a.rc, "flow_grid.csv"), csv.str());
        } else {
            ahflow::io::write_file(out_path(a.rc, "flow_grid.csv"), ahflow::io::diagnostics_csv(rows));
        }
    }

    ahflow::io::json manifest = ahflow::io::run_manifest(spec, a.rc, extra);
    ahflow::io::write_file(out_path(a.rc, "manifest.json"), manifest.dump(2) + "\n");
    std::cout << manifest.dump(2) << "\n";
    return exit_code;
}

int cmd_discrepancy(const CommonArgs& a, double omega0, double u2, double u3) {
    ahflow::io::MetricSpec spec;
    ahflow::CollarMetric g = load_metric(a, spec);
    if (!g.is_normal_form()) {
        std::cerr << "error: the discrepancy driver expects a normal-form spec\n";
        return kExitConfig;
    }
    ahflow::TruncatedSeries u = ahflow::TruncatedSeries::zeros(g.boundary(), ahflow::Valence::Scalar,
                                                               g.trunc_order());
    u[0] = ahflow::BoundaryField::uniform_scalar(g.boundary(), 1.0);
    if (g.trunc_order() >= 2) u[2] = ahflow::BoundaryField::uniform_scalar(g.boundary(), u2);
    if (g.trunc_order() >= 3) u[3] = ahflow::BoundaryField::uniform_scalar(g.boundary(), u3);
    ahflow::ConformalFactor w =
        ahflow::solve_hj_normal(g, ahflow::BoundaryField::uniform_scalar(g.boundary(), omega0));
    ahflow::RieszOptions opt;
    opt.x_cut = a.rc.x_cut;
    opt.x_max = a.rc.x_max;
    ahflow::DiscrepancyResult res = ahflow::bdf_discrepancy(g, u, w, opt);
    ahflow::io::json j;
    j["direct"] = res.direct;
    j["boundary_formula"] = res.boundary_formula;
    j["gap"] = res.gap;
    j["base_value"] = res.base_value;
    j["transformed_value"] = res.transformed_value;
    std::cout << j.dump(2) << "\n";
    if (a.rc.strict && res.gap > 1e-8) {
        std::cerr << "invariant failed: two-route gap " << res.gap << " above 1e-8\n";
        return kExitInvariant;
    }
    return kExitOk;
}

int cmd_appendix(const CommonArgs& a, int n) {
    auto b = ahflow::Boundary::constant(n - 1);
    ahflow::RandomMetricOptions mo;
    mo.n = n;
    mo.trunc = n + 2;
    mo.amplitude = 0.05;
    mo.with_cross = true;
    mo.normal_form = false;
    mo.seed = a.rc.seed;
    ahflow::CollarMetric g = ahflow::random_even_metric(b, mo);
    ahflow::AppendixReport rep = ahflow::appendix_report(g);
    if (a.rc.format == "json") {
        ahflow::io::json rows = ahflow::io::json::array();
        for (const auto& row : rep.rows) {
            rows.push_back({{"component", row.component},
                            {"parity", row.parity},
                            {"parity_to_order", row.parity_to_order},
                            {"parity_violation", row.parity_violation},
                            {"has_final", row.has_final},
                            {"final_rel_err", row.final_rel_err},
                            {"ok", row.ok}});
        }
        ahflow::io::json j;
        j["rows"] = rows;
        j["all_ok"] = rep.all_ok;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "component      parity           violation   final rel err  ok\n";
        for (const auto& row : rep.rows) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-14s %-5s to %-7d %.3e   %s  %s\n", row.component.c_str(),
                          row.parity.c_str(), row.parity_to_order, row.parity_violation,
                          row.has_final ? ahflow::acceptance::detail::fmt(row.final_rel_err).c_str() : "    --    ",
                          row.ok ? "yes" : "NO");
            std::cout << buf;
        }
        std::cout << (rep.all_ok ? "all rows reproduce" : "MISMATCH") << "\n";
    }
    return rep.all_ok ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ahflow: collar metrics as truncated series, normalized Ricci flow, renormalized volume"};
    app.require_subcommand(1);

    CommonArgs a_classify, a_nf, a_renvol, a_flow, a_disc, a_appendix;
    double omega0 = 0.1, u2 = 0.0, u3 = 0.0;
    int appendix_n = 4;
    std::vector<int> criteria;

    auto* c1 = app.add_subcommand("classify", "classify a collar metric");
    add_run_flags(c1, a_classify);
    auto* c2 = app.add_subcommand("normal-form", "re-express a metric relative to its special bdf");
    add_run_flags(c2, a_nf);
    auto* c3 = app.add_subcommand("renvol", "renormalized volume with an audit trail");
    add_run_flags(c3, a_renvol);
    auto* c4 = app.add_subcommand("flow", "normalized Ricci flow with diagnostics CSV + manifest");
    add_run_flags(c4, a_flow);
    auto* c5 = app.add_subcommand("discrepancy", "change-of-bdf discrepancy, two routes");
    add_run_flags(c5, a_disc);
    c5->add_option("--omega0", omega0, "constant boundary value of the conformal factor");
    c5->add_option("--u2", u2, "x^2 coefficient of the integrand");
    c5->add_option("--u3", u3, "x^3 coefficient of the integrand");
    auto* c6 = app.add_subcommand("appendix-check", "verify the coefficient tables on a random even metric");
    add_run_flags(c6, a_appendix, false);
    c6->add_option("--n", appendix_n, "bulk dimension (even)");
    auto* c7 = app.add_subcommand("verify", "run the acceptance suite");
    c7->add_option("--criterion", criteria, "run only the listed criteria");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (c1->parsed()) return cmd_classify(a_classify);
        if (c2->parsed()) return cmd_normal_form(a_nf);
        if (c3->parsed()) return cmd_renvol(a_renvol);
        if (c4->parsed()) return cmd_flow(a_flow);
        if (c5->parsed()) return cmd_discrepancy(a_disc, omega0, u2, u3);
        if (c6->parsed()) return cmd_appendix(a_appendix, appendix_n);
        if (c7->parsed()) {
            int failures = ahflow::acceptance::run_all(std::cout, criteria);
            return failures == 0 ? kExitOk : kExitInvariant;
        }
    } catch (const ahflow::blowup_error& e) {
        std::cerr << "blow-up: " << e.what() << "\n";
        return kExitBlowup;
    } catch (const ahflow::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvariant;
    }
    return kExitOk;
}
