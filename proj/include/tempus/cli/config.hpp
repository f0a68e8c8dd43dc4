#pragma once

#include "tempus/bocher.hpp"
#include "tempus/cli/fields.hpp"
#include "tempus/cli/registry.hpp"
#include "tempus/convergence.hpp"
#include "tempus/timescale.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempus::cli {

enum class RunKind { Solve, Check, Transform, Oscillator };

constexpr std::string_view to_string(RunKind k) noexcept {
    switch (k) {
        case RunKind::Solve: return "solve";
        case RunKind::Check: return "check";
        case RunKind::Transform: return "transform";
        case RunKind::Oscillator: return "oscillator";
    }
    return "unknown";
}

inline std::optional<RunKind> parse_run_kind(std::string_view s) {
    for (RunKind k : {RunKind::Solve, RunKind::Check, RunKind::Transform, RunKind::Oscillator}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

enum class OutputFormat { Csv, Record };

struct OutputConfig {
    std::optional<std::string> dir;
    /// Csv writes tables and records; Record writes the structured records only.
    OutputFormat format = OutputFormat::Csv;
};

struct OscillatorRunConfig {
    double x0 = 1.0;
    double x1 = 0.0;
    int horizon = 10'000;
};

struct ScenarioConfig {
    std::string name;
    RunKind run = RunKind::Solve;
    TimeScale scale = TimeScale::integers();
    System system;
    double start = 0.0;
    std::vector<double> schedule;
    Tolerances tolerances;
    OutputConfig output;

    std::optional<Vector> x0;  ///< solve: vector trajectory instead of the fundamental matrix
    int k_max = 2;             ///< check, oscillator
    int order = 1;             ///< transform
    InverseArgument inverse = InverseArgument::Sigma;
    OscillatorRunConfig oscillator;

    /// Canonical form with every default filled in; validating it again yields the same echo.
    json echo;
};

struct ValidateOptions {
    /// Run kind requested by the command verb; a config `run` field must agree with it.
    std::optional<RunKind> verb;
    std::string default_name = "scenario";
    /// Directory that relative table paths are resolved against.
    std::filesystem::path base_dir = ".";
};

struct ValidationResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;

    bool ok() const noexcept { return config.has_value(); }
};

namespace detail {

inline std::optional<Segment> parse_segment(const json& node, const std::string& path, std::vector<std::string>& errors,
                                            json& normalized) {
    FieldReader f(node, path, errors);
    if (!f.valid()) return std::nullopt;
    const std::size_t before = errors.size();
    std::optional<Segment> out;
    if (const auto p = f.number("point")) {
        out = Segment::point(*p);
        normalized = {{"point", *p}};
    } else if (const json* iv = f.find("interval")) {
        const bool shape = iv->is_array() && iv->size() == 2 && (*iv)[0].is_number() &&
                           ((*iv)[1].is_number() || (*iv)[1].is_null());
        if (!shape) {
            f.error("interval", "expected [a, b] with b a number or null for +infinity");
        } else {
            const double a = (*iv)[0].get<double>();
            const double b = (*iv)[1].is_null() ? kInfinity : (*iv)[1].get<double>();
            if (!(a < b)) {
                f.error("interval", "requires a < b");
            } else {
                out = Segment::interval(a, b);
                normalized = {{"interval", {a, std::isfinite(b) ? json(b) : json(nullptr)}}};
            }
        }
    } else if (errors.size() == before) {
        errors.push_back(path + ": expected {\"point\": t} or {\"interval\": [a, b]}");
    }
    f.reject_unknown();
    return errors.size() == before ? out : std::nullopt;
}

inline std::optional<std::vector<Segment>> parse_segments(FieldReader& f, std::string_view key, bool required,
                                                          std::vector<std::string>& errors, json& normalized) {
    const json* list = required ? f.require(key) : f.find(key);
    if (!list) return std::nullopt;
    if (!list->is_array()) {
        f.error(key, "expected a list of segments");
        return std::nullopt;
    }
    std::vector<Segment> out;
    normalized = json::array();
    bool ok = true;
    for (std::size_t i = 0; i < list->size(); ++i) {
        json seg;
        const auto s = parse_segment((*list)[i], f.path(key) + "[" + std::to_string(i) + "]", errors, seg);
        if (s) {
            out.push_back(*s);
            normalized.push_back(std::move(seg));
        } else {
            ok = false;
        }
    }
    if (!ok) return std::nullopt;
    return out;
}

}  // namespace detail

/// Scale sub-format: {"kind": "Z" | "hZ" | "qN" | "R" | "explicit", ...}.
inline std::optional<TimeScale> parse_scale(const json& node, std::vector<std::string>& errors, json& normalized) {
    FieldReader f(node, "scale", errors);
    if (!f.valid()) return std::nullopt;
    const std::size_t before = errors.size();
    const auto kind = f.string("kind", true);
    std::optional<TimeScale> out;
    const auto build = [&](auto&& make) {
        try {
            out = make();
        } catch (const Error& e) {
            errors.push_back(std::string("scale: ") + e.what());
        }
    };
    if (!kind) {
        // reported as missing
    } else if (*kind == "Z") {
        const auto start = f.integer("start").value_or(0);
        normalized = {{"kind", "Z"}, {"start", start}};
        build([&] { return TimeScale::integers(start); });
    } else if (*kind == "hZ") {
        const double h = f.number("h", true).value_or(1.0);
        const double start = f.number("start").value_or(0.0);
        if (!(h > 0.0)) f.error("h", "must be positive");
        normalized = {{"kind", "hZ"}, {"h", h}, {"start", start}};
        if (errors.size() == before) build([&] { return TimeScale::h_integers(h, start); });
    } else if (*kind == "qN") {
        const double q = f.number("q", true).value_or(2.0);
        const double t0 = f.number("t0").value_or(1.0);
        if (!(q > 1.0)) f.error("q", "must exceed 1");
        if (!(t0 > 0.0)) f.error("t0", "must be positive");
        normalized = {{"kind", "qN"}, {"q", q}, {"t0", t0}};
        if (errors.size() == before) build([&] { return TimeScale::q_naturals(q, t0); });
    } else if (*kind == "R") {
        const double a = f.number("a").value_or(0.0);
        normalized = {{"kind", "R"}, {"a", a}};
        build([&] { return TimeScale::real_line(a); });
    } else if (*kind == "explicit") {
        json segs_norm, head_norm;
        const auto segments = detail::parse_segments(f, "segments", true, errors, segs_norm);
        const auto head = detail::parse_segments(f, "head", false, errors, head_norm);
        const auto period = f.number("period");
        if (period && !(*period > 0.0)) f.error("period", "must be positive");
        normalized = {{"kind", "explicit"}};
        if (head) normalized["head"] = head_norm;
        normalized["segments"] = segs_norm;
        if (period) normalized["period"] = *period;
        if (segments && errors.size() == before) {
            if (period) {
                build([&] { return TimeScale::periodic(*segments, *period, head.value_or(std::vector<Segment>{})); });
            } else {
                if (head) f.error("head", "only allowed together with period");
                std::vector<Segment> all = *segments;
                if (errors.size() == before) build([&] { return TimeScale(std::move(all)); });
            }
        }
    } else {
        f.error("kind", "unknown scale kind '" + *kind + "' (known: Z, hZ, qN, R, explicit)");
    }
    f.reject_unknown();
    if (errors.size() != before) return std::nullopt;
    return out;
}

namespace detail {

inline bool safe_name(const std::string& s) {
    return !s.empty() && s != "." && s != ".." && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
}

inline void parse_tolerances(FieldReader& top, Tolerances& tol, std::vector<std::string>& errors, json& normalized) {
    if (const json* node = top.find("tolerances")) {
        FieldReader f(*node, "tolerances", errors);
        const auto positive = [&](std::string_view key, double& slot) {
            if (const auto v = f.number(key)) {
                if (*v > 0.0) {
                    slot = *v;
                } else {
                    f.error(key, "must be positive");
                }
            }
        };
        positive("cauchy_abs", tol.cauchy_abs);
        positive("cauchy_rel", tol.cauchy_rel);
        positive("singular", tol.singular);
        positive("regress", tol.regress);
        positive("h_max", tol.h_max);
        f.reject_unknown();
    }
    normalized = {{"cauchy_abs", tol.cauchy_abs},
                  {"cauchy_rel", tol.cauchy_rel},
                  {"singular", tol.singular},
                  {"regress", tol.regress},
                  {"h_max", tol.h_max}};
}

}  // namespace detail

/// Parses and checks one scenario document. Never throws: every problem is returned
/// as a field-level message.
inline ValidationResult validate_config(std::string_view text, const ValidateOptions& options = {}) {
    ValidationResult result;
    auto& errors = result.errors;
    json doc;
    const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
    if (blank) {
        doc = json::object();
    } else {
        doc = json::parse(text.begin(), text.end(), nullptr, false);
        if (doc.is_discarded()) {
            errors.push_back("document: not valid JSON");
            return result;
        }
    }
    try {
        FieldReader top(doc, "", errors);
        if (!top.valid()) return result;
        ScenarioConfig cfg;
        json echo = json::object();

        cfg.name = top.string("name").value_or(options.default_name);
        if (!detail::safe_name(cfg.name)) top.error("name", "use letters, digits, '_', '-' or '.'");

        std::optional<TimeScale> scale;
        json scale_norm;
        if (const json* node = top.require("scale")) scale = parse_scale(*node, errors, scale_norm);

        std::optional<System> system;
        if (const json* node = top.require("system")) system = parse_system(*node, options.base_dir, errors);

        std::optional<RunKind> run;
        if (const auto r = top.string("run")) {
            run = parse_run_kind(*r);
            if (!run) top.error("run", "unknown run kind '" + *r + "' (known: solve, check, transform, oscillator)");
            if (run && options.verb && *run != *options.verb) {
                top.error("run", "'" + *r + "' conflicts with the requested verb '" + std::string(to_string(*options.verb)) + "'");
            }
        } else if (options.verb) {
            run = options.verb;
        } else {
            top.missing("run");
        }

        const auto start_field = top.number("start");
        const auto schedule_field = top.numbers("schedule");
        json tol_norm;
        detail::parse_tolerances(top, cfg.tolerances, errors, tol_norm);

        json output_norm = json::object();
        if (const json* node = top.find("output")) {
            FieldReader f(*node, "output", errors);
            cfg.output.dir = f.string("dir");
            if (const auto fmt = f.string("format")) {
                if (*fmt == "csv") {
                    cfg.output.format = OutputFormat::Csv;
                } else if (*fmt == "record") {
                    cfg.output.format = OutputFormat::Record;
                } else {
                    f.error("format", "expected csv or record");
                }
            }
            f.reject_unknown();
        }
        if (cfg.output.dir) output_norm["dir"] = *cfg.output.dir;
        output_norm["format"] = cfg.output.format == OutputFormat::Csv ? "csv" : "record";

        // run-specific parameters; reading a key marks it as known, so only the ones
        // that belong to the run kind are read
        json run_norm = json::object();
        if (run == RunKind::Solve) {
            if (const auto x0 = top.numbers("x0")) {
                if (system && static_cast<Eigen::Index>(x0->size()) != system->dim) {
                    top.error("x0", "expected " + std::to_string(system->dim) + " entries");
                } else {
                    cfg.x0 = Eigen::Map<const Vector>(x0->data(), static_cast<Eigen::Index>(x0->size()));
                    run_norm["x0"] = *x0;
                }
            }
        }
        if (run == RunKind::Check || run == RunKind::Oscillator) {
            const auto k = top.integer("k_max").value_or(2);
            if (k < 1 || k > 16) top.error("k_max", "must lie in [1, 16]");
            cfg.k_max = static_cast<int>(k);
            run_norm["k_max"] = k;
        }
        if (run == RunKind::Transform) {
            const auto k = top.integer("order").value_or(1);
            if (k < 1 || k > 16) top.error("order", "must lie in [1, 16]");
            cfg.order = static_cast<int>(k);
            const std::string inv = top.string("inverse").value_or("sigma");
            if (inv == "sigma") {
                cfg.inverse = InverseArgument::Sigma;
            } else if (inv == "printed") {
                cfg.inverse = InverseArgument::Printed;
            } else {
                top.error("inverse", "expected sigma or printed");
            }
            run_norm["order"] = k;
            run_norm["inverse"] = inv;
        }
        if (run == RunKind::Oscillator) {
            if (system && !system->oscillator) top.error("system", "oscillator runs need the oscillator builtin");
            if (const json* node = top.find("oscillator")) {
                FieldReader f(*node, "oscillator", errors);
                cfg.oscillator.x0 = f.number("x0").value_or(cfg.oscillator.x0);
                cfg.oscillator.x1 = f.number("x1").value_or(cfg.oscillator.x1);
                const auto h = f.integer("horizon").value_or(cfg.oscillator.horizon);
                if (h < 2 || h > 100'000'000) f.error("horizon", "must lie in [2, 1e8]");
                cfg.oscillator.horizon = static_cast<int>(h);
                f.reject_unknown();
            }
            run_norm["oscillator"] = {{"x0", cfg.oscillator.x0},
                                      {"x1", cfg.oscillator.x1},
                                      {"horizon", cfg.oscillator.horizon}};
            if (scale && !(scale_norm.value("kind", "") == "Z" && scale_norm.value("start", 1) == 0)) {
                top.error("scale", "oscillator runs use the integers starting at 0");
            }
        }
        top.reject_unknown();

        if (scale) {
            try {
                const double start = start_field.value_or(scale->start());
                const auto snapped = scale->snap(start);
                if (!snapped) {
                    top.error("start", "not a scale member");
                } else {
                    cfg.start = *snapped;
                }
            } catch (const Error& e) {
                top.error("start", e.what());
            }
        }
        if (schedule_field) {
            cfg.schedule = *schedule_field;
            for (std::size_t i = 1; i < cfg.schedule.size(); ++i) {
                if (!(cfg.schedule[i] > cfg.schedule[i - 1])) {
                    errors.push_back("schedule not increasing");
                    break;
                }
            }
            if (!cfg.schedule.empty() && !(cfg.schedule.front() > cfg.start)) {
                top.error("schedule", "horizons must exceed the start");
            }
        } else if (scale) {
            try {
                cfg.schedule = default_schedule(*scale, cfg.start);
            } catch (const Error& e) {
                top.error("schedule", e.what());
            }
        }
        const std::size_t needed = run == RunKind::Solve ? 3 : 2;
        if (cfg.schedule.size() < needed) top.error("schedule", "needs at least " + std::to_string(needed) + " horizons");

        if (!errors.empty() || !scale || !system || !run) return result;

        cfg.run = *run;
        cfg.scale = *scale;
        cfg.system = std::move(*system);
        echo["name"] = cfg.name;
        echo["run"] = to_string(cfg.run);
        echo["scale"] = scale_norm;
        echo["system"] = cfg.system.normalized;
        echo["start"] = cfg.start;
        echo["schedule"] = cfg.schedule;
        for (auto& [key, value] : run_norm.items()) echo[key] = value;
        echo["tolerances"] = tol_norm;
        echo["output"] = output_norm;
        cfg.echo = std::move(echo);
        result.config = std::move(cfg);
    } catch (const std::exception& e) {
        errors.push_back(std::string("document: ") + e.what());
        result.config.reset();
    }
    return result;
}

}  // namespace tempus::cli
