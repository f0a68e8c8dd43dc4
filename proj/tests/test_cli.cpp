#include <catch2/catch_amalgamated.hpp>

#include "tempus/cli/runner.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace tempus;
using namespace tempus::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = TEMPUS_SCENARIO_DIR;
const fs::path kData = fs::path(TEMPUS_SCENARIO_DIR).parent_path() / "tests" / "data";

bool has_error(const ValidationResult& r, const std::string& text) {
    return std::any_of(r.errors.begin(), r.errors.end(), [&](const std::string& e) { return e == text; });
}

bool mentions(const ValidationResult& r, const std::string& text) {
    return std::any_of(r.errors.begin(), r.errors.end(),
                       [&](const std::string& e) { return e.find(text) != std::string::npos; });
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("tempus_cli_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ScenarioConfig load(const fs::path& p) {
    auto r = load_config(p, std::nullopt);
    INFO(p.string());
    for (const auto& e : r.errors) UNSCOPED_INFO(e);
    REQUIRE(r.ok());
    return *r.config;
}

std::vector<fs::path> curated() {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(kScenarios)) {
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

const char* kMinimal = R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero", "dim": 2}, "run": "solve"})";

}  // namespace

TEST_CASE("validate_config examples", "[cli]") {
    const auto empty = validate_config("");
    CHECK_FALSE(empty.ok());
    CHECK(has_error(empty, "missing field: scale"));

    const auto bad = validate_config(
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "check", "schedule": [100, 50]})");
    CHECK_FALSE(bad.ok());
    CHECK(has_error(bad, "schedule not increasing"));

    const auto minimal = validate_config(kMinimal);
    REQUIRE(minimal.ok());
    const json echo = minimal.config->echo;
    const auto again = validate_config(echo.dump());
    REQUIRE(again.ok());
    CHECK(again.config->echo == echo);
    CHECK(again.config->echo.dump() == echo.dump());
}

TEST_CASE("normalized configs echo unchanged", "[cli]") {
    for (const auto& file : curated()) {
        const ScenarioConfig cfg = load(file);
        const auto again = validate_config(cfg.echo.dump(2), {std::nullopt, "other", file.parent_path()});
        REQUIRE(again.ok());
        CHECK(again.config->echo.dump() == cfg.echo.dump());
    }
}

TEST_CASE("validate_config never throws on malformed input", "[cli]") {
    const std::vector<std::string> docs = {
        "{",
        "[]",
        "42",
        "null",
        R"({"scale": 5, "system": "zero"})",
        R"({"scale": {"kind": "hZ", "h": -1}, "system": {"builtin": "zero"}, "run": "solve"})",
        R"({"scale": {"kind": "W"}, "system": {"builtin": "nope"}, "run": "fly"})",
        R"({"scale": {"kind": "explicit", "segments": [{"interval": [2, 1]}]}, "system": {"builtin": "zero"}, "run": "solve"})",
        R"({"scale": {"kind": "explicit", "segments": [{"point": 0}, {"point": 1}]}, "system": {"builtin": "zero"}, "run": "solve"})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "constant", "matrix": [[1, 2]]}, "run": "solve"})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "oscillator", "alpha": 4, "g": "sin"}, "run": "oscillator"})",
        R"({"scale": {"kind": "Z"}, "system": {"table": "missing.csv"}, "run": "solve"})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "solve", "schedule": "soon"})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "solve", "start": 0.5})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "solve", "tolerances": {"h_max": 0, "x": 1}})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "solve", "name": "../up"})",
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "check", "x0": [1]})",
        R"({"scale": {"kind": "R"}, "system": {"builtin": "oscillator", "alpha": 1, "g": "zero"}, "run": "oscillator"})",
        "\x01\x02\xff",
    };
    for (const auto& d : docs) {
        INFO(d);
        ValidationResult r;
        REQUIRE_NOTHROW(r = validate_config(d));
        CHECK_FALSE(r.ok());
        CHECK_FALSE(r.errors.empty());
    }
}

TEST_CASE("validation messages name the field", "[cli]") {
    CHECK(has_error(validate_config(R"({"scale": {"kind": "Z"}})"), "missing field: system"));
    CHECK(has_error(validate_config(R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}})"), "missing field: run"));
    CHECK(has_error(validate_config(R"({"scale": {"kind": "hZ"}, "system": {"builtin": "zero"}, "run": "solve"})"),
                    "missing field: scale.h"));
    CHECK(has_error(validate_config(R"({"scale": {"kind": "Z", "h": 1}, "system": {"builtin": "zero"}, "run": "solve"})"),
                    "scale.h: unknown field"));
    CHECK(mentions(validate_config(R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "check", "x0": [1]})"),
                   "x0: unknown field"));
    CHECK(mentions(validate_config(kMinimal, {RunKind::Check}), "conflicts with the requested verb"));
    const auto from_verb = validate_config(R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}})", {RunKind::Check});
    REQUIRE(from_verb.ok());
    CHECK(from_verb.config->run == RunKind::Check);
    CHECK(from_verb.config->echo["run"] == "check");
}

TEST_CASE("scale descriptions", "[cli]") {
    std::vector<std::string> errors;
    json norm;
    const auto hz = parse_scale(json::parse(R"({"kind": "hZ", "h": 0.5})"), errors, norm);
    REQUIRE(hz);
    CHECK(hz->sigma(1.0) == 1.5);
    CHECK(norm == json::parse(R"({"kind": "hZ", "h": 0.5, "start": 0.0})"));

    const auto qn = parse_scale(json::parse(R"({"kind": "qN", "q": 2.0, "t0": 1.0})"), errors, norm);
    REQUIRE(qn);
    CHECK(qn->sigma(4.0) == 8.0);

    const auto r = parse_scale(json::parse(R"({"kind": "R", "a": 1.0})"), errors, norm);
    REQUIRE(r);
    CHECK(r->mu(3.7) == 0.0);
    CHECK(r->start() == 1.0);

    const auto ex = parse_scale(json::parse(R"({"kind": "explicit", "segments": [{"interval": [0, 1]}, {"point": 2},
                                               {"point": 3.5}, {"interval": [5, null]}]})"),
                                errors, norm);
    REQUIRE(ex);
    CHECK(ex->mu(1.0) == 1.0);
    CHECK(ex->mu(2.0) == 1.5);
    CHECK(ex->mu(100.0) == 0.0);

    const auto per = parse_scale(
        json::parse(R"({"kind": "explicit", "segments": [{"point": 0}, {"interval": [0.5, 1.5]}], "period": 2})"), errors,
        norm);
    REQUIRE(per);
    CHECK(per->sigma(0.0) == 0.5);
    CHECK(per->mu(1.5) == 0.5);
    CHECK(per->sigma(4.0) == 4.5);
    CHECK(errors.empty());
}

TEST_CASE("builtin systems", "[cli]") {
    std::vector<std::string> errors;
    const auto alt = parse_system(json::parse(R"({"builtin": "alternating-harmonic", "matrix": [[1, 2], [3, 4]]})"), ".", errors);
    REQUIRE(alt);
    const MatrixSignal a = alt->make();
    CHECK(a(3.0)(1, 0) == -3.0 / 4.0);
    CHECK(a(4.0)(0, 1) == 2.0 / 5.0);

    const auto dd = parse_system(json::parse(R"({"builtin": "diagonal-decay", "p": 2, "coefficients": [1, -2]})"), ".", errors);
    REQUIRE(dd);
    const MatrixSignal d = dd->make();
    CHECK(d(1.0)(1, 1) == -0.5);
    CHECK(d(1.0)(0, 1) == 0.0);
    REQUIRE(d.envelope);
    CHECK(d.envelope->bound(1.0) >= d(1.0).norm());

    const auto c = parse_system(json::parse(R"({"builtin": "constant", "value": 0.25, "dim": 3})"), ".", errors);
    REQUIRE(c);
    CHECK(c->make()(9.0) == 0.25 * identity(3));

    const auto osc = parse_system(json::parse(R"({"builtin": "oscillator", "alpha": 1.0, "g": "inverse-square"})"), ".", errors);
    REQUIRE(osc);
    REQUIRE(osc->oscillator);
    CHECK(osc->oscillator->g(1.0) == 0.25);
    CHECK(osc->dim == 2);

    const auto table = parse_system(json::parse(R"({"table": "table_system.csv"})"), kData, errors);
    REQUIRE(table);
    const MatrixSignal tab = table->make();
    CHECK(tab(0.0)(0, 0) == 0.5);
    CHECK(tab(1.0)(0, 0) == 0.5);
    CHECK(tab(2.0)(0, 0) == 0.25);
    CHECK(tab(100.0)(0, 0) == 0.0);
    CHECK(errors.empty());
}

TEST_CASE("sha256 digests", "[cli]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("curated scenarios produce documented results", "[cli]") {
    TempDir dir;
    const auto zero = run_scenario(load(kScenarios / "zero_solve.json"), dir.path);
    const auto record = json::parse(slurp(zero.directory / "verdict.json"));
    CHECK(record["class_s"]["verdict"] == "ClassS");
    std::istringstream csv(slurp(zero.directory / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t,component_0,component_1");
    int rows = 0;
    while (std::getline(csv, line)) {
        CHECK(line.substr(line.find(',')) == ",1,2");
        ++rows;
    }
    CHECK(rows == 101);

    const auto check = run_scenario(load(kScenarios / "alternating_check.json"), dir.path);
    const auto report = json::parse(slurp(check.directory / "report.json"))["conditions"];
    CHECK(report["implied_class_s"] == "Yes");
    CHECK(report["first_absolute_order"] == 2);

    const auto osc = run_scenario(load(kScenarios / "oscillator_half_pi.json"), dir.path);
    const auto osc_record = json::parse(slurp(osc.directory / "oscillator.json"));
    CHECK(osc_record["final_window_drift"].get<double>() < 1e-4);
    CHECK(osc_record["roundtrip_error"].get<double>() < 1e-10);

    const auto tr = run_scenario(load(kScenarios / "transform_alternating.json"), dir.path);
    const auto tr_record = json::parse(slurp(tr.directory / "transform.json"));
    CHECK(tr_record["max_residual"].get<double>() < 1e-10);
    CHECK(tr_record["transformed_theorem1"]["implied_class_s"] == "Yes");

    const auto growth = run_scenario(load(kScenarios / "growth_solve.json"), dir.path);
    CHECK(json::parse(slurp(growth.directory / "verdict.json"))["class_s"]["verdict"] == "NotClassS");

    const auto table = run_scenario(load(kData / "table_solve.json"), dir.path);
    std::istringstream tcsv(slurp(table.directory / "trajectory.csv"));
    std::getline(tcsv, line);
    for (int n = 0; n <= 3; ++n) std::getline(tcsv, line);
    CHECK(line == "3,2.8125");

    try {
        run_scenario(load(kScenarios / "nonregressive_solve.json"), dir.path);
        FAIL("expected NotRegressive");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotRegressive);
    }
}

TEST_CASE("CSV cells carry 17 significant digits and round-trip", "[cli]") {
    TempDir dir;
    const auto m = run_scenario(load(kScenarios / "mixed_scale_solve.json"), dir.path);
    std::istringstream csv(slurp(m.directory / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "t,X_00,X_01,X_10,X_11");
    std::size_t cells = 0, long_cells = 0;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            REQUIRE(ec == std::errc());
            REQUIRE(ptr == cell.data() + cell.size());
            REQUIRE(io::format_double(v) == cell);
            std::size_t digits = 0;
            for (char ch : cell.substr(0, cell.find('e'))) digits += std::isdigit(static_cast<unsigned char>(ch)) ? 1 : 0;
            CHECK(digits <= 18);
            long_cells += digits >= 17 ? 1 : 0;
            ++cells;
        }
    }
    CHECK(cells > 1000);
    CHECK(long_cells > 0);
}

TEST_CASE("repeated runs are byte-identical", "[cli]") {
    TempDir a, b;
    for (const auto& file : curated()) {
        if (file.stem() == "nonregressive_solve") continue;
        const ScenarioConfig cfg = load(file);
        const auto m1 = run_scenario(cfg, a.path);
        const auto m2 = run_scenario(cfg, b.path);
        REQUIRE(m1.outputs.size() == m2.outputs.size());
        CHECK_FALSE(m1.outputs.empty());
        for (std::size_t i = 0; i < m1.outputs.size(); ++i) {
            CHECK(m1.outputs[i].name == m2.outputs[i].name);
            CHECK(m1.outputs[i].sha256 == m2.outputs[i].sha256);
            CHECK(sha256_hex(slurp(m1.directory / m1.outputs[i].name)) == m1.outputs[i].sha256);
        }
        const auto manifest = json::parse(slurp(m1.directory / "manifest.json"));
        CHECK(manifest["config"] == cfg.echo);
        CHECK(manifest["outputs"].size() == m1.outputs.size());
    }
}

TEST_CASE("record format skips tables", "[cli]") {
    TempDir dir;
    const auto r = validate_config(
        R"({"scale": {"kind": "Z"}, "system": {"builtin": "zero"}, "run": "solve", "output": {"format": "record"}})");
    REQUIRE(r.ok());
    const auto m = run_scenario(*r.config, dir.path);
    REQUIRE(m.outputs.size() == 1);
    CHECK(m.outputs[0].name == "verdict.json");
}

TEST_CASE("exit codes", "[cli]") {
    TempDir dir;
    std::ostringstream log, err;
    const auto code = [&](std::optional<RunKind> verb, std::optional<fs::path> config, std::optional<fs::path> batch = {}) {
        return run_command({verb, std::move(config), std::move(batch), dir.path}, log, err);
    };
    CHECK(code(RunKind::Solve, kScenarios / "zero_solve.json") == kExitOk);
    CHECK(code(RunKind::Solve, kScenarios / "growth_solve.json") == kExitOk);
    CHECK(code(RunKind::Solve, kScenarios / "nonregressive_solve.json") == kExitNumerical);
    CHECK(err.str().find("NotRegressive") != std::string::npos);
    CHECK(code(RunKind::Solve, kData / "bad_schedule.json") == kExitConfig);
    CHECK(err.str().find("schedule not increasing") != std::string::npos);
    CHECK(code(RunKind::Check, kScenarios / "zero_solve.json") == kExitConfig);
    CHECK(code(RunKind::Solve, dir.path / "absent.json") == kExitConfig);
    CHECK(code(std::nullopt, std::nullopt) == kExitConfig);
    CHECK(code(std::nullopt, std::nullopt, kScenarios) == kExitNumerical);
    CHECK(code(std::nullopt, std::nullopt, kData) == kExitConfig);
}
