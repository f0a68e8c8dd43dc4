#pragma once

#include "tempus/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tempus::cli {

using json = nlohmann::ordered_json;

/// Reads typed fields from one JSON object and records problems as
/// "missing field: a.b" or "a.b: <reason>" instead of throwing.
class FieldReader {
public:
    FieldReader(const json& node, std::string path, std::vector<std::string>& errors)
        : node_(node), path_(std::move(path)), errors_(errors) {
        if (!node_.is_object()) {
            errors_.push_back((path_.empty() ? std::string("document") : path_) + ": expected an object");
            valid_ = false;
        }
    }

    bool valid() const noexcept { return valid_; }
    std::string path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
    void error(std::string_view key, const std::string& reason) { errors_.push_back(path(key) + ": " + reason); }
    void missing(std::string_view key) { errors_.push_back("missing field: " + path(key)); }

    const json* find(std::string_view key) {
        if (!valid_) return nullptr;
        used_.insert(std::string(key));
        const auto it = node_.find(std::string(key));
        if (it == node_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    const json* require(std::string_view key) {
        const json* v = find(key);
        if (!v && valid_) missing(key);
        return v;
    }

    std::optional<double> number(std::string_view key, bool required = false) {
        const json* v = required ? require(key) : find(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            error(key, "expected a number");
            return std::nullopt;
        }
        const double d = v->get<double>();
        if (!std::isfinite(d)) {
            error(key, "must be finite");
            return std::nullopt;
        }
        return d;
    }

    std::optional<long long> integer(std::string_view key, bool required = false) {
        const json* v = required ? require(key) : find(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            error(key, "expected an integer");
            return std::nullopt;
        }
        return v->get<long long>();
    }

    std::optional<std::string> string(std::string_view key, bool required = false) {
        const json* v = required ? require(key) : find(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            error(key, "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<std::vector<double>> numbers(std::string_view key, bool required = false) {
        const json* v = required ? require(key) : find(key);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            error(key, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                error(key, "expected an array of finite numbers");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    /// Square matrix given as a list of rows.
    std::optional<Matrix> matrix(std::string_view key, bool required = false) {
        const json* v = required ? require(key) : find(key);
        if (!v) return std::nullopt;
        const auto bad = [&] {
            error(key, "expected a square matrix as a list of rows");
            return std::nullopt;
        };
        if (!v->is_array() || v->empty()) return bad();
        const auto n = static_cast<Eigen::Index>(v->size());
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const json& row = (*v)[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) return bad();
            for (Eigen::Index j = 0; j < n; ++j) {
                const json& e = row[static_cast<std::size_t>(j)];
                if (!e.is_number() || !std::isfinite(e.get<double>())) return bad();
                m(i, j) = e.get<double>();
            }
        }
        return m;
    }

    /// Reports every key that no accessor asked for.
    void reject_unknown() {
        if (!valid_) return;
        for (const auto& [key, value] : node_.items()) {
            if (!used_.contains(key)) error(key, "unknown field");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
    bool valid_ = true;
};

inline json matrix_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace tempus::cli
