#pragma once

#include "tempus/bocher.hpp"
#include "tempus/cli/config.hpp"
#include "tempus/io/csv.hpp"
#include "tempus/io/records.hpp"
#include "tempus/oscillator.hpp"
#include "tempus/solver.hpp"
#include "tempus/version.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tempus::cli {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

struct OutputFile {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

struct StageTime {
    std::string name;
    double seconds = 0.0;
};

struct RunManifest {
    json config;
    std::string tool_version = kVersion;
    std::vector<StageTime> stages;
    std::vector<OutputFile> outputs;
    fs::path directory;

    json to_json() const {
        json files = json::array();
        for (const auto& f : outputs) files.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        json stage_list = json::array();
        for (const auto& s : stages) stage_list.push_back({{"stage", s.name}, {"wall_seconds", s.seconds}});
        return {{"tool", "tempus"}, {"version", tool_version}, {"config", config}, {"stages", stage_list},
                {"outputs", files}};
    }
};

namespace detail {

class OutputWriter {
public:
    explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    void write_record(const std::string& name, const json& record) { write(name, record.dump(2) + "\n"); }

    std::vector<OutputFile> files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<OutputFile> files_;
};

class StageClock {
public:
    explicit StageClock(std::vector<StageTime>& sink) : sink_(sink) {}

    template <class F>
    decltype(auto) run(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            std::vector<StageTime>& sink;
            std::string name;
            std::chrono::steady_clock::time_point t0;
            ~Record() {
                sink.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
            }
        } record{sink_, name, t0};
        return f();
    }

private:
    std::vector<StageTime>& sink_;
};

inline bool tables(const ScenarioConfig& cfg) { return cfg.output.format == OutputFormat::Csv; }

inline void run_solve(const ScenarioConfig& cfg, OutputWriter& out, StageClock& clock) {
    const MatrixSignal a = cfg.system.make();
    const GridSpec spec{cfg.schedule.back(), cfg.tolerances.h_max};
    const Trajectory traj = clock.run("solve", [&] {
        return cfg.x0 ? solve_linear(cfg.scale, a, *cfg.x0, cfg.start, spec, cfg.tolerances)
                      : fundamental_matrix(cfg.scale, a, cfg.start, spec, cfg.tolerances);
    });
    const ClassSVerdict verdict = clock.run("limit", [&] { return limit_estimate(traj, cfg.schedule, cfg.tolerances); });
    if (tables(cfg)) {
        std::ostringstream csv;
        io::write_trajectory_csv(csv, traj);
        out.write("trajectory.csv", csv.str());
    }
    out.write_record("verdict.json", {{"run", "solve"},
                                      {"trajectory", traj.kind == TrajectoryKind::Vector ? "vector" : "fundamental"},
                                      {"grid_points", traj.size()},
                                      {"class_s", io::to_json(verdict)}});
}

inline ConditionReport full_report(BocherAnalysis& analysis, int k_max) {
    ConditionReport report = check_order_k(analysis, k_max);
    ConvergenceVerdict om = analysis.ominus_verdict();
    report.ominus_implies_class_s = !report.orders_convergent.empty() &&
                                    report.orders_convergent.front().verdict.convergent() &&
                                    om.kind == ConvergenceKind::AbsolutelyConvergent;
    report.ominus_variant = std::move(om);
    return report;
}

inline void run_check(const ScenarioConfig& cfg, OutputWriter& out, StageClock& clock) {
    BocherAnalysis analysis(cfg.scale, cfg.system.make(), cfg.start, cfg.schedule, cfg.tolerances);
    const ConditionReport report = clock.run("conditions", [&] { return full_report(analysis, cfg.k_max); });
    out.write_record("report.json", {{"run", "check"}, {"k_max", cfg.k_max}, {"conditions", io::to_json(report)}});
}

inline void run_transform(const ScenarioConfig& cfg, OutputWriter& out, StageClock& clock) {
    const MatrixSignal a = cfg.system.make();
    BocherAnalysis analysis(cfg.scale, a, cfg.start, cfg.schedule, cfg.tolerances);
    const Transform tr = clock.run("transform", [&] { return higher_transform(analysis, cfg.order, cfg.inverse); });
    const double end = cfg.schedule.back();
    if (!(tr.t_star < end)) fail(ErrorKind::NoValidityWindow, "validity window starts at the last horizon");

    const GridSpec spec{end, cfg.tolerances.h_max};
    const Trajectory y = clock.run("transformed_solve", [&] {
        return fundamental_matrix(cfg.scale, tr.coefficient, tr.t_star, spec, cfg.tolerances);
    });

    // x = backmap * y must satisfy x(sigma t) = (I + mu A) x(t) at isolated points
    std::ostringstream coeff_csv, residual_csv;
    const auto dim = a.dim;
    io::write_header(coeff_csv, "t", io::value_columns(TrajectoryKind::Fundamental, dim, dim, "B"));
    io::write_header(residual_csv, "t", {"mu", "residual"});
    double max_residual = 0.0;
    std::size_t checked = 0;
    clock.run("residual", [&] {
        std::vector<double> row;
        for (std::size_t i = 0; i < y.size(); ++i) {
            row.assign(1, y.t(i));
            io::append_flat(row, tr.coefficient(y.t(i)));
            io::write_row(coeff_csv, row);
            const double mu = y.grid[i].mu;
            if (mu > 0.0 && i + 1 < y.size()) {
                const Matrix x = tr.backmap(y.t(i)) * y.values[i];
                const Matrix next = tr.backmap(y.t(i + 1)) * y.values[i + 1];
                const Matrix expected = (identity(dim) + mu * a(y.t(i))) * x;
                const double r = norm(next - expected) / std::max(1.0, norm(expected));
                max_residual = std::max(max_residual, r);
                ++checked;
                io::write_row(residual_csv, {y.t(i), mu, r});
            }
        }
        return 0;
    });

    json summable = nullptr;
    std::vector<double> from_star = doubling_schedule(cfg.scale, tr.t_star, 62);
    std::erase_if(from_star, [&](double h) { return h > tr.table->horizon; });
    if (from_star.size() >= 2) {
        const ConditionReport b = check_theorem1(cfg.scale, tr.coefficient, tr.t_star, from_star, cfg.tolerances);
        summable = {{"implied_class_s", to_string(b.implied_class_s)},
                    {"verdict", io::to_json(b.orders_convergent.front().verdict)}};
    }
    json prerequisites = json::array();
    for (int j = 1; j <= cfg.order; ++j) {
        json v = io::to_json(analysis.order_verdict(j));
        v["order"] = j;
        prerequisites.push_back(std::move(v));
    }
    if (tables(cfg)) {
        out.write("coefficient.csv", coeff_csv.str());
        out.write("residual.csv", residual_csv.str());
    }
    out.write_record("transform.json",
                     {{"run", "transform"},
                      {"order", tr.order},
                      {"inverse_argument", tr.inverse_argument == InverseArgument::Sigma ? "sigma" : "printed"},
                      {"t_star", tr.t_star},
                      {"tail_horizon", tr.table->horizon},
                      {"prerequisites", prerequisites},
                      {"residual_points", checked},
                      {"max_residual", io::number(max_residual)},
                      {"transformed_theorem1", summable}});
}

inline void run_oscillator_scenario(const ScenarioConfig& cfg, OutputWriter& out, StageClock& clock) {
    const OscillatorSpec& spec = *cfg.system.oscillator;
    const auto& o = cfg.oscillator;
    const OscillatorRun run = clock.run("amplitudes", [&] { return run_oscillator(spec, o.x0, o.x1, o.horizon, cfg.tolerances); });
    BocherAnalysis analysis(cfg.scale, oscillator_reduce(spec), cfg.start, cfg.schedule, cfg.tolerances);
    const ConditionReport report = clock.run("conditions", [&] { return full_report(analysis, cfg.k_max); });
    if (tables(cfg)) {
        std::ostringstream csv;
        io::write_header(csv, "n", {"C1", "C2", "norm_u"});
        for (std::size_t n = 0; n < run.amplitudes.size(); ++n) {
            const Matrix& u = run.amplitudes.values[n];
            io::write_row(csv, {double(n), u(0), u(1), norm(u)});
        }
        out.write("amplitudes.csv", csv.str());
    }
    out.write_record("oscillator.json", {{"run", "oscillator"},
                                         {"alpha", spec.alpha},
                                         {"horizon", o.horizon},
                                         {"final_amplitudes", io::matrix(run.amplitudes.values.back())},
                                         {"roundtrip_error", io::number(run.roundtrip_error)},
                                         {"final_window_drift", io::number(run.final_window_drift)},
                                         {"conditions", io::to_json(report)}});
}

}  // namespace detail

/// Executes one validated scenario into out_base/<name>/ and writes manifest.json there.
inline RunManifest run_scenario(const ScenarioConfig& cfg, const fs::path& out_base) {
    RunManifest manifest;
    manifest.config = cfg.echo;
    manifest.directory = out_base / cfg.name;
    detail::OutputWriter out(manifest.directory);
    detail::StageClock clock(manifest.stages);
    switch (cfg.run) {
        case RunKind::Solve: detail::run_solve(cfg, out, clock); break;
        case RunKind::Check: detail::run_check(cfg, out, clock); break;
        case RunKind::Transform: detail::run_transform(cfg, out, clock); break;
        case RunKind::Oscillator: detail::run_oscillator_scenario(cfg, out, clock); break;
    }
    manifest.outputs = out.files();
    std::ofstream(manifest.directory / "manifest.json", std::ios::trunc) << manifest.to_json().dump(2) << '\n';
    return manifest;
}

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2 };

struct CommandOptions {
    /// Run kind from the verb; empty for `run`, which takes it from each config.
    std::optional<RunKind> verb;
    std::optional<fs::path> config;
    std::optional<fs::path> batch;
    std::optional<fs::path> out;
};

inline ValidationResult load_config(const fs::path& file, std::optional<RunKind> verb) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return {std::nullopt, {"cannot read " + file.string()}};
    std::ostringstream text;
    text << in.rdbuf();
    return validate_config(text.str(), {verb, file.stem().string(), file.parent_path()});
}

/// Runs one config or every *.json in a batch directory (sorted by name). Returns the
/// largest exit code over all scenarios: 0 ok, 1 config error, 2 numerical error.
inline int run_command(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
    std::vector<fs::path> files;
    if (opts.config.has_value() == opts.batch.has_value()) {
        err << "tempus: give exactly one of --config or --batch\n";
        return kExitConfig;
    }
    if (opts.config) {
        files.push_back(*opts.config);
    } else {
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(*opts.batch, ec)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
        if (ec) {
            err << "tempus: cannot list " << opts.batch->string() << ": " << ec.message() << '\n';
            return kExitConfig;
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            err << "tempus: no .json configs in " << opts.batch->string() << '\n';
            return kExitConfig;
        }
    }

    int code = kExitOk;
    for (const auto& file : files) {
        const ValidationResult v = load_config(file, opts.verb);
        if (!v.ok()) {
            for (const auto& e : v.errors) err << "tempus: " << file.string() << ": ConfigInvalid: " << e << '\n';
            code = std::max<int>(code, kExitConfig);
            continue;
        }
        const fs::path base = opts.out ? *opts.out : fs::path(v.config->output.dir.value_or("tempus-out"));
        try {
            const RunManifest m = run_scenario(*v.config, base);
            log << v.config->name << ": " << to_string(v.config->run) << " -> " << m.directory.string() << " ("
                << m.outputs.size() << " files)\n";
        } catch (const Error& e) {
            err << "tempus: " << v.config->name << ": " << e.what() << '\n';
            code = std::max<int>(code, e.is_numerical() ? kExitNumerical : kExitConfig);
        } catch (const std::exception& e) {
            err << "tempus: " << v.config->name << ": " << e.what() << '\n';
            code = std::max<int>(code, kExitConfig);
        }
    }
    return code;
}

}  // namespace tempus::cli
