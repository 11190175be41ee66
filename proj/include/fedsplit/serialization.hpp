#pragma once

// JSON reading and writing for problems, algorithm specs, and ensemble specs.
//
// Output uses dump_json rather than nlohmann's dump so every floating-point value is
// written with 17 significant digits ("%.17g"); object keys come out sorted, which
// keeps files byte-stable across runs.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "fedsplit/algorithms.hpp"
#include "fedsplit/datagen.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/format.hpp"
#include "fedsplit/problem.hpp"
#include "fedsplit/prox.hpp"

namespace fedsplit
{

using json = nlohmann::json;

namespace detail
{
inline void dump_json_impl(const json& value, std::string& out, int indent, int depth)
{
    const auto newline = [&](int level) {
        if (indent >= 0) {
            out += '\n';
            out.append(static_cast<std::size_t>(indent * level), ' ');
        }
    };
    switch (value.type()) {
    case json::value_t::object: {
        if (value.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (!first) out += ',';
            first = false;
            newline(depth + 1);
            out += json(it.key()).dump();
            out += indent >= 0 ? ": " : ":";
            dump_json_impl(it.value(), out, indent, depth + 1);
        }
        newline(depth);
        out += '}';
        return;
    }
    case json::value_t::array: {
        if (value.empty()) {
            out += "[]";
            return;
        }
        // Numeric arrays stay on one line; they can be long (design matrices).
        bool scalar = true;
        for (const auto& v : value) {
            scalar = scalar && !v.is_structured();
        }
        out += '[';
        bool first = true;
        for (const auto& v : value) {
            if (!first) out += scalar ? (indent >= 0 ? ", " : ",") : ",";
            first = false;
            if (!scalar) newline(depth + 1);
            dump_json_impl(v, out, indent, depth + 1);
        }
        if (!scalar) newline(depth);
        out += ']';
        return;
    }
    case json::value_t::number_float: {
        const double v = value.get<double>();
        out += std::isfinite(v) ? format_double(v) : "null";
        return;
    }
    default:
        out += value.dump();
        return;
    }
}
} // namespace detail

inline std::string dump_json(const json& value, int indent = 2)
{
    std::string out;
    detail::dump_json_impl(value, out, indent, 0);
    out += '\n';
    return out;
}

inline json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

/// Writes via a temporary file and rename so readers never observe partial output.
inline void write_text_file(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write " + path.string());
        }
        out << contents;
        if (!out) {
            throw ConfigError("write failed for " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Strict field access

inline void expect_object(const json& j, const std::string& context)
{
    if (!j.is_object()) {
        throw ConfigError(context + " must be a JSON object");
    }
}

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& context)
{
    expect_object(j, context);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            known = known || it.key() == key;
        }
        if (!known) {
            throw ConfigError("unknown key '" + it.key() + "' in " + context);
        }
    }
}

template <class T>
T get_field(const json& j, const char* key, const std::string& context)
{
    if (!j.contains(key)) {
        throw ConfigError("missing key '" + std::string(key) + "' in " + context);
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + context + ": " + e.what());
    }
}

template <class T>
T get_field_or(const json& j, const char* key, T fallback, const std::string& context)
{
    return j.contains(key) ? get_field<T>(j, key, context) : fallback;
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key, const std::string& context)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return get_field<T>(j, key, context);
}

inline Vector vector_from_json(const json& j, const std::string& context)
{
    if (!j.is_array()) {
        throw ConfigError(context + " must be an array of numbers");
    }
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ConfigError(context + " must contain only numbers");
        }
        out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return out;
}

inline json vector_to_json(const Vector& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Problem files: {d, m, clients: [{kind, A (row-major), b}], x_true?, seed?}

inline json problem_to_json(const FederatedProblem& problem)
{
    json clients = json::array();
    for (const auto& f : problem.clients()) {
        const bool quadratic = std::holds_alternative<QuadraticLoss>(f);
        const Matrix& a = std::visit([](const auto& l) -> const Matrix& { return l.design(); }, f);
        const Vector& b = std::visit([](const auto& l) -> const Vector& { return l.response(); }, f);
        json flat = json::array();
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                flat.push_back(a(r, c));
            }
        }
        clients.push_back({{"kind", quadratic ? "quadratic" : "logistic"},
                           {"A", std::move(flat)},
                           {"b", vector_to_json(b)}});
    }
    json out = {{"d", problem.dim()}, {"m", problem.num_clients()}, {"clients", std::move(clients)}};
    if (problem.x_true()) {
        out["x_true"] = vector_to_json(*problem.x_true());
    }
    if (problem.seed()) {
        out["seed"] = *problem.seed();
    }
    return out;
}

inline FederatedProblem problem_from_json(const json& j)
{
    const std::string ctx = "problem";
    expect_keys(j, {"d", "m", "clients", "x_true", "seed"}, ctx);
    const auto d = get_field<long>(j, "d", ctx);
    const auto m = get_field<long>(j, "m", ctx);
    if (d < 1 || m < 1) {
        throw ConfigError("problem requires d >= 1 and m >= 1");
    }
    if (!j.contains("clients")) {
        throw ConfigError("missing key 'clients' in problem");
    }
    const json& list = j.at("clients");
    if (!list.is_array() || static_cast<long>(list.size()) != m) {
        throw ConfigError("problem.clients must be an array of m entries");
    }
    std::vector<LocalLoss> clients;
    for (std::size_t idx = 0; idx < list.size(); ++idx) {
        const std::string cctx = "problem.clients[" + std::to_string(idx) + "]";
        const json& c = list[idx];
        expect_keys(c, {"kind", "A", "b"}, cctx);
        const auto kind = get_field<std::string>(c, "kind", cctx);
        if (!c.contains("A") || !c.contains("b")) {
            throw ConfigError(cctx + " requires A and b");
        }
        const Vector b = vector_from_json(c.at("b"), cctx + ".b");
        const Vector flat = vector_from_json(c.at("A"), cctx + ".A");
        const Eigen::Index n = b.size();
        if (n < 1 || flat.size() != n * d) {
            throw ConfigError(cctx + ".A must hold len(b) * d = " + std::to_string(n * d) + " values");
        }
        Matrix a(n, d);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index col = 0; col < d; ++col) {
                a(r, col) = flat[r * d + col];
            }
        }
        if (kind == "quadratic") {
            clients.emplace_back(QuadraticLoss(std::move(a), b));
        } else if (kind == "logistic") {
            clients.emplace_back(LogisticLoss(std::move(a), b));
        } else {
            throw ConfigError(cctx + ".kind must be \"quadratic\" or \"logistic\"");
        }
    }
    std::optional<Vector> x_true;
    if (j.contains("x_true") && !j.at("x_true").is_null()) {
        x_true = vector_from_json(j.at("x_true"), "problem.x_true");
        if (x_true->size() != d) {
            throw ConfigError("problem.x_true must have d entries");
        }
    }
    return FederatedProblem(std::move(clients), std::move(x_true),
                            get_optional<std::uint64_t>(j, "seed", ctx));
}

inline FederatedProblem load_problem(const std::filesystem::path& path)
{
    return problem_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Prox solver and algorithm specs

inline json prox_spec_to_json(const ProxSolverSpec& spec)
{
    json out = std::visit(
        [](const auto& mode) -> json {
            using M = std::decay_t<decltype(mode)>;
            if constexpr (std::is_same_v<M, ExactProx>) {
                return {{"mode", "exact"}};
            } else if constexpr (std::is_same_v<M, InexactGradientProx>) {
                return {{"mode", "inexact_gradient"}, {"e", mode.steps}};
            } else {
                return {{"mode", "newton"}, {"tol", mode.tol}, {"max_iter", mode.max_iter}};
            }
        },
        spec.mode);
    out["warm_start"] = spec.warm_start == WarmStart::ProxArgument ? "prox_argument" : "server_iterate";
    return out;
}

inline ProxSolverSpec prox_spec_from_json(const json& j, const std::string& ctx)
{
    expect_keys(j, {"mode", "e", "tol", "max_iter", "warm_start"}, ctx);
    ProxSolverSpec spec;
    const auto mode = get_field_or<std::string>(j, "mode", "exact", ctx);
    if (mode == "exact") {
        spec.mode = ExactProx{};
    } else if (mode == "inexact_gradient") {
        spec.mode = InexactGradientProx{get_field<int>(j, "e", ctx)};
    } else if (mode == "newton") {
        spec.mode = InexactNewtonProx{get_field_or<double>(j, "tol", 1e-10, ctx),
                                      get_field_or<int>(j, "max_iter", 100, ctx)};
    } else {
        throw ConfigError(ctx + ".mode must be exact, inexact_gradient or newton");
    }
    const auto warm = get_field_or<std::string>(j, "warm_start", "prox_argument", ctx);
    if (warm == "prox_argument") {
        spec.warm_start = WarmStart::ProxArgument;
    } else if (warm == "server_iterate") {
        spec.warm_start = WarmStart::ServerIterate;
    } else {
        throw ConfigError(ctx + ".warm_start must be prox_argument or server_iterate");
    }
    spec.validate();
    return spec;
}

inline json algorithm_spec_to_json(const AlgorithmSpec& spec)
{
    json out = std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            json o;
            if constexpr (std::is_same_v<K, FedGDSpec>) {
                o = {{"kind", "fedgd"}, {"e", k.epochs}};
                if (k.s) o["s"] = *k.s;
            } else if constexpr (std::is_same_v<K, FedProxSpec>) {
                o = {{"kind", "fedprox"}};
                if (k.s) o["s"] = *k.s;
            } else if constexpr (std::is_same_v<K, FedSplitSpec>) {
                o = {{"kind", "fedsplit"}, {"prox", prox_spec_to_json(k.prox)}};
                if (k.s) o["s"] = *k.s;
            } else {
                o = {{"kind", "fedsplit_regularized"}, {"eps", k.eps}};
                if (k.lambda_override) o["lambda"] = *k.lambda_override;
            }
            return o;
        },
        spec.kind);
    out["rounds"] = spec.rounds;
    if (spec.init) out["init"] = vector_to_json(*spec.init);
    if (!spec.label.empty()) out["label"] = spec.label;
    return out;
}

inline AlgorithmSpec algorithm_spec_from_json(const json& j, const std::string& ctx = "algorithm")
{
    expect_keys(j, {"kind", "s", "e", "prox", "eps", "lambda", "rounds", "init", "label"}, ctx);
    AlgorithmSpec spec;
    const auto kind = get_field<std::string>(j, "kind", ctx);
    const auto reject = [&](std::initializer_list<const char*> keys) {
        for (const char* key : keys) {
            if (j.contains(key)) {
                throw ConfigError("key '" + std::string(key) + "' does not apply to " + kind +
                                  " in " + ctx);
            }
        }
    };
    if (kind == "fedgd") {
        reject({"prox", "eps", "lambda"});
        spec.kind = FedGDSpec{get_optional<double>(j, "s", ctx), get_field_or<int>(j, "e", 1, ctx)};
    } else if (kind == "fedprox") {
        reject({"e", "prox", "eps", "lambda"});
        spec.kind = FedProxSpec{get_optional<double>(j, "s", ctx)};
    } else if (kind == "fedsplit") {
        reject({"e", "eps", "lambda"});
        ProxSolverSpec prox;
        if (j.contains("prox")) {
            prox = prox_spec_from_json(j.at("prox"), ctx + ".prox");
        }
        spec.kind = FedSplitSpec{get_optional<double>(j, "s", ctx), prox};
    } else if (kind == "fedsplit_regularized") {
        reject({"s", "e", "prox"});
        spec.kind = FedSplitRegularizedSpec{get_field<double>(j, "eps", ctx),
                                            get_optional<double>(j, "lambda", ctx)};
    } else {
        throw ConfigError(ctx + ".kind must be fedgd, fedprox, fedsplit or fedsplit_regularized");
    }
    spec.rounds = get_field_or<int>(j, "rounds", 100, ctx);
    if (j.contains("init") && !j.at("init").is_null()) {
        spec.init = vector_from_json(j.at("init"), ctx + ".init");
    }
    spec.label = get_field_or<std::string>(j, "label", "", ctx);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Ensemble specs: {kind, m, d, n, sigma2?, kappa?}; the seed lives beside it.

inline json ensemble_to_json(const EnsembleKind& kind)
{
    return std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, IsotropicLSQ>) {
                return {{"kind", "isotropic_lsq"}, {"m", k.m}, {"d", k.d}, {"n", k.n}, {"sigma2", k.sigma2}};
            } else if constexpr (std::is_same_v<K, ConditionedLSQ>) {
                return {{"kind", "conditioned_lsq"}, {"m", k.m}, {"d", k.d}, {"n", k.n},
                        {"kappa", k.kappa}, {"sigma2", k.sigma2}};
            } else {
                return {{"kind", "logistic_gauss"}, {"m", k.m}, {"d", k.d}, {"n", k.n}};
            }
        },
        kind);
}

inline EnsembleKind ensemble_from_json(const json& j, const std::string& ctx = "ensemble")
{
    const auto kind = get_field<std::string>(j, "kind", ctx);
    if (kind == "isotropic_lsq") {
        expect_keys(j, {"kind", "m", "d", "n", "sigma2"}, ctx);
        return IsotropicLSQ{get_field<int>(j, "m", ctx), get_field<int>(j, "d", ctx),
                            get_field<int>(j, "n", ctx), get_field_or<double>(j, "sigma2", 0.0, ctx)};
    }
    if (kind == "conditioned_lsq") {
        expect_keys(j, {"kind", "m", "d", "n", "kappa", "sigma2"}, ctx);
        return ConditionedLSQ{get_field<int>(j, "m", ctx), get_field<int>(j, "d", ctx),
                              get_field<int>(j, "n", ctx), get_field_or<double>(j, "kappa", 1.0, ctx),
                              get_field_or<double>(j, "sigma2", 0.0, ctx)};
    }
    if (kind == "logistic_gauss") {
        expect_keys(j, {"kind", "m", "d", "n"}, ctx);
        return LogisticGauss{get_field<int>(j, "m", ctx), get_field<int>(j, "d", ctx),
                             get_field<int>(j, "n", ctx)};
    }
    throw ConfigError(ctx + ".kind must be isotropic_lsq, conditioned_lsq or logistic_gauss");
}

// ---------------------------------------------------------------------------
// Dotted-path overrides: "algorithm.s=0.05" sets j["algorithm"]["s"] = 0.05.

inline json parse_override_value(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

inline void apply_override(json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must have the form key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const json value = parse_override_value(assignment.substr(eq + 1));
    json* node = &root;
    std::stringstream parts(path);
    std::string part;
    std::vector<std::string> keys;
    while (std::getline(parts, part, '.')) {
        if (part.empty()) {
            throw ConfigError("override key '" + path + "' has an empty segment");
        }
        keys.push_back(part);
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::string& key = keys[i];
        const bool last = i + 1 == keys.size();
        if (node->is_array()) {
            std::size_t index = 0;
            try {
                index = std::stoul(key);
            } catch (const std::exception&) {
                throw ConfigError("override key '" + path + "': '" + key + "' is not an index");
            }
            if (index >= node->size()) {
                throw ConfigError("override key '" + path + "': index out of range");
            }
            node = &(*node)[index];
        } else {
            if (node->is_null()) {
                *node = json::object();
            }
            if (!node->is_object()) {
                throw ConfigError("override key '" + path + "' descends into a non-object");
            }
            node = &(*node)[key];
        }
        if (last) {
            *node = value;
        }
    }
}

} // namespace fedsplit
