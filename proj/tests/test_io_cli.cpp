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

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ahflow/io.hpp"

using namespace ahflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AHFLOW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "ahflow_test";
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("metric spec round-trip is value-identical") {
    const char* text = R"({
      "n": 4,
      "trunc_order": 8,
      "backend": {"type": "grid", "resolution": [16, 8, 8], "derivative": "spectral"},
      "seed": 3,
      "h0": "identity",
      "coefficients": [
        {"power": 2, "block": "ab",
         "value": {"constant": [[0.05, 0.0, 0.0], [0.0, 0.05, 0.0], [0.0, 0.0, 0.04]],
                   "fourier": [{"amplitude": 0.02, "mode": [1, 0, 0], "fn": "cos",
                                "tensor": [[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.25]]}]}},
        {"power": 3, "block": "xx", "value": 0.125}
      ]
    })";
    io::json j = io::json::parse(text);
    io::MetricSpec s1 = io::parse_metric_spec(j);
    io::json j1 = io::to_json(s1);
    io::MetricSpec s2 = io::parse_metric_spec(j1);
    io::json j2 = io::to_json(s2);
    CHECK(j1 == j2);
    CHECK(j1.dump() == j2.dump());

    CollarMetric g = io::build_metric(s1);
    CHECK(g.n() == 4);
    CHECK(g.trunc_order() == 8);
    CHECK(g.boundary()->is_grid());
    CHECK_FALSE(g.is_normal_form());
    CHECK(g.gxx()[3].sup_norm() == doctest::Approx(0.125));
    CHECK(g.gab()[2].sup_norm() > 0.05);
}

TEST_CASE("preset specs classify as promised") {
    auto build = [](const std::string& preset) {
        io::json j;
        j["n"] = 4;
        j["trunc_order"] = 8;
        j["preset"] = preset;
        return io::build_metric(io::parse_metric_spec(j));
    };
    CHECK(classify(build("cusp")).is_VR);
    CHECK(classify(build("vr-generic")).is_VR);
    CHECK_FALSE(classify(build("pe-model")).is_VR);
    CHECK(classify(build("pe-model")).is_partially_even);
    CHECK_FALSE(classify(build("odd-seeded")).is_partially_even);
}

TEST_CASE("diagnostics csv formatting") {
    std::vector<DiagnosticsRow> rows(1);
    rows[0].t = 0.125;
    rows[0].mu = 1.0 / 3.0;
    rows[0].evenness_order = 2;
    const std::string csv = io::diagnostics_csv(rows);
    CHECK(csv.find("t,mu,nu,renv,residual,evenness_order,vr_trace_norm\n") == 0);
    CHECK(csv.find("0.125,0.33333333333333331,") != std::string::npos);
    CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("cli driver") {
    const fs::path dir = temp_dir();
    const fs::path spec = dir / "vr.json";
    {
        io::json j;
        j["n"] = 4;
        j["trunc_order"] = 8;
        j["preset"] = "vr-generic";
        std::ofstream out(spec);
        out << j.dump(2);
    }

    SUBCASE("classify runs clean") {
        CHECK(run_cli("classify --spec " + spec.string()) == 0);
    }
    SUBCASE("flow output is deterministic byte for byte") {
        const fs::path out1 = dir / "run1";
        const fs::path out2 = dir / "run2";
        const std::string base = "flow --spec " + spec.string() + " --dt 1e-3 --T 0.05 --stride 10 --out ";
        REQUIRE(run_cli(base + out1.string()) == 0);
        REQUIRE(run_cli(base + out2.string()) == 0);
        CHECK(slurp((out1 / "flow_jet.csv").string()) == slurp((out2 / "flow_jet.csv").string()));
        CHECK(slurp((out1 / "manifest.json").string()) == slurp((out2 / "manifest.json").string()));
        CHECK(slurp((out1 / "flow_jet.csv").string()).rfind("t,mu,nu,", 0) == 0);
    }
    SUBCASE("dual engine run emits both CSVs and the gap column") {
        const fs::path out = dir / "both";
        const std::string cmd = "flow --spec " + spec.string() +
                                " --engine both --dt 1e-3 --T 0.002 --dx 0.02 --stride 2 --out " + out.string();
        REQUIRE(run_cli(cmd) == 0);
        CHECK(fs::exists(out / "flow_jet.csv"));
        CHECK(fs::exists(out / "flow_grid.csv"));
        CHECK(slurp((out / "flow_grid.csv").string()).find("cross_gap") != std::string::npos);
    }
    SUBCASE("renvol writes an audit trail and honors --strict") {
        const fs::path out = dir / "renvol";
        CHECK(run_cli("renvol --spec " + spec.string() + " --out " + out.string()) == 0);
        CHECK(fs::exists(out / "renvol_audit.csv"));
        const fs::path pe = dir / "pe.json";
        {
            io::json j;
            j["n"] = 4;
            j["trunc_order"] = 8;
            j["preset"] = "pe-model";
            std::ofstream o(pe);
            o << j.dump();
        }
        CHECK(run_cli("renvol --spec " + pe.string() + " --out " + out.string()) == 0);
        CHECK(run_cli("renvol --strict --spec " + pe.string() + " --out " + out.string()) == 2);
    }
    SUBCASE("config errors exit with code four") {
        CHECK(run_cli("classify --spec /nonexistent/file.json") == 4);
        const fs::path bad = dir / "bad.json";
        {
            std::ofstream o(bad);
            o << "{\"n\": 5, \"preset\": \"cusp\"}";
        }
        CHECK(run_cli("classify --spec " + bad.string()) == 4);
        CHECK(run_cli("flow --spec " + spec.string() + " --engine warp") == 4);
    }
    SUBCASE("blow-up exits with code three") {
        const fs::path wild = dir / "wild.json";
        {
            io::json j;
            j["n"] = 4;
            j["trunc_order"] = 8;
            j["preset"] = "cusp";
            j["coefficients"] = io::json::array();
            io::json c;
            c["power"] = 2;
            c["block"] = "ab";
            c["value"] = io::json::parse(R"([[60.0,0,0],[0,60.0,0],[0,0,60.0]])");
            j["coefficients"].push_back(c);
            std::ofstream o(wild);
            o << j.dump();
        }
        CHECK(run_cli("flow --spec " + wild.string() + " --dt 0.05 --T 5 --engine jet") == 3);
    }
    SUBCASE("discrepancy and appendix-check drivers") {
        CHECK(run_cli("discrepancy --spec " + spec.string() + " --omega0 0.2 --u3 0.4 --strict") == 0);
        CHECK(run_cli("appendix-check --n 4 --seed 2") == 0);
        CHECK(run_cli("appendix-check --n 6 --seed 3") == 0);
    }
    SUBCASE("normal-form emits a spec") {
        const fs::path gen = dir / "general.json";
        {
            io::json j;
            j["n"] = 4;
            j["trunc_order"] = 8;
            j["h0"] = "identity";
            j["coefficients"] = io::json::array();
            io::json c1;
            c1["power"] = 2;
            c1["block"] = "xx";
            c1["value"] = 0.25;
            j["coefficients"].push_back(c1);
            io::json c2;
            c2["power"] = 2;
            c2["block"] = "ab";
            c2["value"] = io::json::parse(R"([[0.1,0,0],[0,0.1,0],[0,0,0.1]])");
            j["coefficients"].push_back(c2);
            std::ofstream o(gen);
            o << j.dump();
        }
        CHECK(run_cli("normal-form --spec " + gen.string()) == 0);
    }
}

TEST_CASE("round-trip through build and normal-form emission") {
    auto b = Boundary::constant(3);
    CollarMetric g = preset_vr_generic(4, 8, b, 5);
    io::json j = io::normal_form_to_json(g);
    io::MetricSpec s = io::parse_metric_spec(j);
    CollarMetric g2 = io::build_metric(s);
    BlockedSym2 d = g2.blocks();
    d -= g.blocks();
    CHECK(d.sup_norm() <= 1e-15);
}
