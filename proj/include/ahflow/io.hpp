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

#ifndef AHFLOW_IO_HPP
#define AHFLOW_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flow.hpp"

namespace ahflow::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metric specification files.  Human-readable JSON: tensors as row-major
// matrices, grid fields as truncated Fourier expressions.  The parsed
// structure is kept verbatim so that parse -> emit round-trips exactly.
// ---------------------------------------------------------------------------

struct FourierTerm {
    double amplitude = 0.0;
    std::vector<int> mode;    // wave vector
    std::string fn = "cos";   // cos | sin
    std::vector<double> tensor;  // row-major; size depends on the block
};

struct ValueSpec {
    std::vector<double> constant;      // row-major tensor, may be empty
    std::vector<FourierTerm> fourier;  // grid backends only
    bool identity = false;
};

struct CoefficientSpec {
    int power = 0;
    std::string block = "ab";  // xx | xa | ab
    ValueSpec value;
};

struct BackendSpec {
    std::string type = "constant";  // constant | grid
    std::vector<int> resolution;
    std::string derivative = "fd4";  // fd4 | spectral
};

struct MetricSpec {
    int n = 4;
    int trunc_order = 8;
    BackendSpec backend;
    std::string preset;  // empty means explicit coefficients
    unsigned seed = 1;
    ValueSpec h0;        // defaults to identity
    std::vector<CoefficientSpec> coefficients;
};

namespace detail {

inline std::vector<double> parse_matrix(const json& j) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array() && !j.empty() && j[0].is_array()) {
        for (const auto& row : j)
            for (const auto& v : row) out.push_back(v.get<double>());
    } else if (j.is_array()) {
        for (const auto& v : j) out.push_back(v.get<double>());
    } else {
        throw config_error("expected a number, vector or matrix");
    }
    return out;
}

inline json emit_matrix(const std::vector<double>& v, int rows, int cols) {
    if (rows == 1 && cols == 1) return json(v.at(0));
    if (rows == 1) return json(v);
    json out = json::array();
    for (int r = 0; r < rows; ++r) {
        json row = json::array();
        for (int c = 0; c < cols; ++c) row.push_back(v.at(static_cast<size_t>(r) * cols + c));
        out.push_back(row);
    }
    return out;
}

inline ValueSpec parse_value(const json& j) {
    ValueSpec v;
    if (j.is_string()) {
        if (j.get<std::string>() == "identity") {
            v.identity = true;
            return v;
        }
        throw config_error("unknown field expression: " + j.get<std::string>());
    }
    if (j.is_object()) {
        if (j.contains("constant")) v.constant = parse_matrix(j.at("constant"));
        if (j.contains("fourier")) {
            for (const auto& t : j.at("fourier")) {
                FourierTerm ft;
                ft.amplitude = t.at("amplitude").get<double>();
                ft.mode = t.at("mode").get<std::vector<int>>();
                ft.fn = t.value("fn", std::string("cos"));
                if (ft.fn != "cos" && ft.fn != "sin") throw config_error("fourier fn must be cos or sin");
                ft.tensor = parse_matrix(t.at("tensor"));
                v.fourier.push_back(std::move(ft));
            }
        }
        return v;
    }
    v.constant = parse_matrix(j);
    return v;
}

inline json emit_value(const ValueSpec& v, int rows, int cols) {
    if (v.identity) return json("identity");
    if (v.fourier.empty()) return emit_matrix(v.constant, rows, cols);
    json out = json::object();
    if (!v.constant.empty()) out["constant"] = emit_matrix(v.constant, rows, cols);
    json terms = json::array();
    for (const auto& t : v.fourier) {
        json jt;
        jt["amplitude"] = t.amplitude;
        jt["mode"] = t.mode;
        jt["fn"] = t.fn;
        jt["tensor"] = emit_matrix(t.tensor, rows, cols);
        terms.push_back(jt);
    }
    out["fourier"] = terms;
    return out;
}

// Build a boundary field from a value spec.
inline BoundaryField build_field(const ValueSpec& v, const BoundaryPtr& b, Valence val) {
    const int d = b->dim();
    const int nc = valence_comps(val, d);
    auto unpack = [&](const std::vector<double>& raw) {
        // accept packed (nc) or full row-major (d*d for sym2)
        std::vector<double> comps(static_cast<size_t>(nc), 0.0);
        if (val == Valence::Sym2 && static_cast<int>(raw.size()) == d * d) {
            dense::sym2_pack(raw.data(), d, comps.data());
            // symmetry check
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    if (std::abs(raw[static_cast<size_t>(i) * d + j] - raw[static_cast<size_t>(j) * d + i]) > 1e-14)
                        throw config_error("sym2 tensor is not symmetric");
        } else if (static_cast<int>(raw.size()) == nc) {
            comps = raw;
        } else {
            throw config_error("tensor has the wrong number of entries");
        }
        return comps;
    };

    BoundaryField f = BoundaryField::zeros(b, val);
    if (v.identity) {
        if (val != Valence::Sym2) throw config_error("identity only makes sense for sym2 blocks");
        return identity_sym2(b);
    }
    if (!v.constant.empty()) {
        auto comps = unpack(v.constant);
        f = BoundaryField::uniform(b, val, comps);
    }
    for (const auto& t : v.fourier) {
        if (!b->is_grid()) {
            bool zero_mode = true;
            for (int k : t.mode) zero_mode = zero_mode && k == 0;
            if (!zero_mode) throw config_error("fourier modes need a grid backend");
        }
        if (static_cast<int>(t.mode.size()) != d) throw config_error("fourier mode has wrong dimension");
        auto comps = unpack(t.tensor);
        BoundaryField wave = BoundaryField::sample(b, val, [&](const double* y, double* out) {
            double phase = 0.0;
            for (int a = 0; a < d; ++a) phase += t.mode[static_cast<size_t>(a)] * y[a];
            const double w = t.amplitude * (t.fn == "cos" ? std::cos(phase) : std::sin(phase));
            for (int c = 0; c < nc; ++c) out[c] = w * comps[static_cast<size_t>(c)];
        });
        f += wave;
    }
    return f;
}

}  // namespace detail

inline MetricSpec parse_metric_spec(const json& j) {
    MetricSpec s;
    s.n = j.value("n", 4);
    s.trunc_order = j.value("trunc_order", 8);
    if (j.contains("backend")) {
        const auto& bj = j.at("backend");
        s.backend.type = bj.value("type", std::string("constant"));
        if (bj.contains("resolution")) s.backend.resolution = bj.at("resolution").get<std::vector<int>>();
        s.backend.derivative = bj.value("derivative", std::string("fd4"));
    }
    s.preset = j.value("preset", std::string());
    s.seed = j.value("seed", 1u);
    if (j.contains("h0")) s.h0 = detail::parse_value(j.at("h0"));
    else s.h0.identity = true;
    if (j.contains("coefficients")) {
        for (const auto& cj : j.at("coefficients")) {
            CoefficientSpec c;
            c.power = cj.at("power").get<int>();
            c.block = cj.value("block", std::string("ab"));
            if (c.block != "xx" && c.block != "xa" && c.block != "ab")
                throw config_error("block must be xx, xa or ab");
            if (c.power < 1) throw config_error("coefficient powers start at 1 (power 0 comes from h0)");
            c.value = detail::parse_value(cj.at("value"));
            s.coefficients.push_back(std::move(c));
        }
    }
    return s;
}

inline MetricSpec load_metric_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open spec file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error(std::string("spec parse error: ") + e.what());
    }
    return parse_metric_spec(j);
}

inline json to_json(const MetricSpec& s) {
    json j;
    j["n"] = s.n;
    j["trunc_order"] = s.trunc_order;
    json bj;
    bj["type"] = s.backend.type;
    if (!s.backend.resolution.empty()) bj["resolution"] = s.backend.resolution;
    bj["derivative"] = s.backend.derivative;
    j["backend"] = bj;
    if (!s.preset.empty()) j["preset"] = s.preset;
    j["seed"] = s.seed;
    const int d = s.n - 1;
    j["h0"] = detail::emit_value(s.h0, d, d);
    if (!s.coefficients.empty()) {
        json arr = json::array();
        for (const auto& c : s.coefficients) {
            json cj;
            cj["power"] = c.power;
            cj["block"] = c.block;
            const int rows = c.block == "xx" ? 1 : (c.block == "xa" ? 1 : d);
            const int cols = c.block == "xx" ? 1 : d;
            cj["value"] = detail::emit_value(c.value, rows, cols);
            arr.push_back(cj);
        }
        j["coefficients"] = arr;
    }
    return j;
}

inline CollarMetric build_metric(const MetricSpec& s) {
    if (s.n < 4 || s.n % 2 != 0) throw config_error("n must be even and >= 4");
    const int d = s.n - 1;
    BoundaryPtr b;
    if (s.backend.type == "constant") {
        b = Boundary::constant(d);
    } else if (s.backend.type == "grid") {
        auto res = s.backend.resolution;
        if (res.empty()) res.assign(static_cast<size_t>(d), 16);
        if (static_cast<int>(res.size()) != d) throw config_error("grid resolution needs n-1 axes");
        DerivScheme scheme = DerivScheme::FiniteDifference4;
        if (s.backend.derivative == "spectral") scheme = DerivScheme::Spectral;
        else if (s.backend.derivative != "fd4") throw config_error("derivative must be fd4 or spectral");
        b = Boundary::grid(res, scheme);
    } else {
        throw config_error("backend type must be constant or grid");
    }

    CollarMetric base;
    if (!s.preset.empty()) {
        if (s.preset == "cusp") base = preset_cusp(s.n, s.trunc_order, b);
        else if (s.preset == "pe-model") base = preset_pe_model(s.n, s.trunc_order, b, s.seed);
        else if (s.preset == "vr-generic") base = preset_vr_generic(s.n, s.trunc_order, b, s.seed);
        else if (s.preset == "odd-seeded") base = preset_odd_seeded(s.n, s.trunc_order, b, s.seed);
        else throw config_error("unknown preset: " + s.preset);
    } else {
        TruncatedSeries h = TruncatedSeries::constant(detail::build_field(s.h0, b, Valence::Sym2), s.trunc_order);
        base = CollarMetric::normal_form(s.n, std::move(h));
    }

    if (s.coefficients.empty()) return base;

    BlockedSym2 blocks = base.blocks();
    bool still_normal = base.is_normal_form();
    for (const auto& c : s.coefficients) {
        if (c.power > s.trunc_order) throw config_error("coefficient power exceeds trunc_order");
        if (c.block == "ab") {
            blocks.ab.set(c.power, detail::build_field(c.value, b, Valence::Sym2));
        } else if (c.block == "xx") {
            blocks.xx.set(c.power, detail::build_field(c.value, b, Valence::Scalar));
            still_normal = false;
        } else {
            blocks.xa.set(c.power, detail::build_field(c.value, b, Valence::Covector));
            still_normal = false;
        }
    }
    return CollarMetric(s.n, std::move(blocks), still_normal);
}

// Emit the tangential family of a normal-form metric as a spec (used by the
// normal-form subcommand).
inline json normal_form_to_json(const CollarMetric& g, double drop_tol = 1e-14) {
    if (!g.is_normal_form()) throw config_error("metric is not in normal form");
    MetricSpec s;
    s.n = g.n();
    s.trunc_order = g.trunc_order();
    s.backend.type = g.boundary()->is_grid() ? "grid" : "constant";
    if (g.boundary()->is_grid()) {
        s.backend.resolution = g.boundary()->resolution();
        s.backend.derivative = g.boundary()->scheme() == DerivScheme::Spectral ? "spectral" : "fd4";
        throw config_error("normal-form emission for grid backends is not supported");
    }
    const int d = g.n() - 1;
    auto to_matrix = [&](const BoundaryField& f) {
        std::vector<double> full(static_cast<size_t>(d) * d);
        dense::sym2_unpack(f.at(0), d, full.data());
        return full;
    };
    s.h0.constant = to_matrix(g.gab()[0]);
    for (int k = 1; k <= g.trunc_order(); ++k) {
        if (g.gab()[k].sup_norm() <= drop_tol) continue;
        CoefficientSpec c;
        c.power = k;
        c.block = "ab";
        c.value.constant = to_matrix(g.gab()[k]);
        s.coefficients.push_back(std::move(c));
    }
    return to_json(s);
}

// ---------------------------------------------------------------------------
// Run configuration, CSV and manifest output
// ---------------------------------------------------------------------------

struct RunConfig {
    double dt = 1e-3;
    double T = 0.5;
    double dx = 0.01;
    double x_max = 1.0;
    double x_cut = 0.4;
    int output_stride = 10;
    bool strict = false;
    unsigned seed = 1;
    std::string engine = "jet";
    std::string out_dir = ".";
    std::string format = "csv";

    void validate() const {
        if (dt <= 0.0 || T < 0.0 || dx <= 0.0) throw config_error("steps must be positive");
        if (x_cut <= 0.0 || x_cut >= x_max) throw config_error("need 0 < x_cut < x_max");
        if (engine != "jet" && engine != "grid" && engine != "both") throw config_error("engine must be jet, grid or both");
        if (format != "csv" && format != "json") throw config_error("format must be csv or json");
    }
};

inline json to_json(const RunConfig& c) {
    json j;
    j["dt"] = c.dt;
    j["T"] = c.T;
    j["dx"] = c.dx;
    j["x_max"] = c.x_max;
    j["x_cut"] = c.x_cut;
    j["output_stride"] = c.output_stride;
    j["strict"] = c.strict;
    j["seed"] = c.seed;
    j["engine"] = c.engine;
    return j;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kDiagnosticsHeader = "t,mu,nu,renv,residual,evenness_order,vr_trace_norm";

inline std::string diagnostics_csv(const std::vector<DiagnosticsRow>& rows) {
    std::ostringstream out;
    out << kDiagnosticsHeader << "\n";
    for (const auto& r : rows) {
        out << format_double(r.t) << ',' << format_double(r.mu) << ',' << format_double(r.nu) << ','
            << format_double(r.renv) << ',' << format_double(r.variation_residual) << ',' << r.evenness_order << ','
            << format_double(r.vr_trace_norm) << "\n";
    }
    return out.str();
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline json run_manifest(const MetricSpec& ms, const RunConfig& rc, const json& extra = {}) {
    json j;
    j["metric"] = to_json(ms);
    j["config"] = to_json(rc);
    j["columns"] = json::array({"t", "mu", "nu", "renv", "residual", "evenness_order", "vr_trace_norm"});
    json tol;
    tol["parity_rel"] = 1e-10;
    tol["vr"] = 1e-9;
    tol["classifier_ah"] = 1e-8;
    j["tolerances"] = tol;
    if (!extra.is_null() && !extra.empty()) j["extra"] = extra;
    std::string canon = j.dump();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    j["config_hash"] = buf;
    return j;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write file: " + path);
    out << content;
}

inline json classification_to_json(const ClassificationResult& r) {
    json j;
    j["is_AH"] = r.is_AH;
    j["evenness_order"] = r.evenness_order;
    j["is_partially_even"] = r.is_partially_even;
    j["vr_trace_norm"] = r.vr_trace_norm;
    j["is_VR"] = r.is_VR;
    j["ape_defect_order"] = r.ape_defect_order;
    return j;
}

inline std::string audit_csv(const FinitePartResult& fp) {
    std::ostringstream out;
    out << "term,power,logpow,pole_order,boundary_weight,contribution\n";
    int idx = 0;
    for (const auto& row : fp.audit) {
        out << idx++ << ',' << row.power << ',' << row.logpow << ',' << row.pole_order << ','
            << format_double(row.boundary_weight) << ',' << format_double(row.fp_contribution) << "\n";
    }
    out << idx++ << ",interior,0,0," << format_double(0.0) << ',' << format_double(fp.interior_value) << "\n";
    out << idx++ << ",correction,0,0," << format_double(0.0) << ',' << format_double(fp.correction_value) << "\n";
    return out.str();
}

}  // namespace ahflow::io

#endif  // AHFLOW_IO_HPP
