#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigidkit/errors.hpp"
#include "rigidkit/framework.hpp"

namespace rigidkit {

enum class Integrator { rk4, euler };

inline const char* to_string(Integrator m) { return m == Integrator::rk4 ? "rk4" : "euler"; }

struct SimSettings {
    double dt = 1e-3;
    double t_end = 50.0;
    Integrator method = Integrator::rk4;
    // Every `stride`-th step is recorded in the trajectory.
    std::size_t stride = 10;

    void validate() const {
        if (!(dt > 0.0)) throw ValidationError("sim.dt", "step size must be positive");
        if (!(t_end > 0.0)) throw ValidationError("sim.t_end", "horizon must be positive");
        if (stride == 0) throw ValidationError("sim.stride", "must be positive");
    }

    std::size_t num_steps() const {
        return static_cast<std::size_t>(t_end / dt + 0.5);
    }
};

struct ToleranceOverrides {
    std::optional<double> rank;
    std::optional<double> subspace;
};

/// A framework plus everything needed to run one actuation/measurement experiment.
/// Node indices are 0-based here; files use 1-based indices.
struct Scenario {
    Framework framework;
    std::size_t actuator = 0;
    std::size_t sensor = 0;
    Vector w0;
    double impulse = 1.0;
    SimSettings sim;
    ToleranceOverrides tol;

    void validate() const {
        const auto n = framework.num_nodes();
        if (actuator >= n) throw ValidationError("actuator", "node index out of range");
        if (sensor >= n) throw ValidationError("sensor", "node index out of range");
        if (static_cast<std::size_t>(w0.size()) != framework.dim())
            throw ValidationError("w0", "length must equal d");
        if (!w0.allFinite()) throw ValidationError("w0", "non-finite entry");
        if (!(impulse > 0.0)) throw ValidationError("impulse", "magnitude must be positive");
        sim.validate();
        if (tol.rank && !(*tol.rank > 0.0)) throw ValidationError("tol.rank", "must be positive");
        if (tol.subspace && !(*tol.subspace > 0.0)) throw ValidationError("tol.subspace", "must be positive");
    }
};

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(key, "missing required key");
    return j.at(key);
}

inline std::size_t node_from_file(long long one_based, std::size_t n, const std::string& field) {
    if (one_based < 1 || static_cast<std::size_t>(one_based) > n)
        throw ValidationError(field, "node index " + std::to_string(one_based) + " outside [1, " +
                                         std::to_string(n) + "]");
    return static_cast<std::size_t>(one_based - 1);
}

inline Vector parse_positions(const json& j, std::size_t n, std::size_t d) {
    if (!j.is_array()) throw ParseError("positions: expected an array");
    std::vector<double> flat;
    bool nested = !j.empty() && j.front().is_array();
    if (nested) {
        if (j.size() != n)
            throw ValidationError("positions", "positions length " + std::to_string(j.size()) +
                                                   " does not equal n = " + std::to_string(n));
        for (const auto& row : j) {
            if (!row.is_array() || row.size() != d)
                throw ValidationError("positions", "positions length: every agent needs exactly d coordinates");
            for (const auto& x : row) flat.push_back(x.get<double>());
        }
    } else {
        for (const auto& x : j) flat.push_back(x.get<double>());
        if (flat.size() != n * d)
            throw ValidationError("positions", "positions length " + std::to_string(flat.size()) +
                                                   " does not equal n*d = " + std::to_string(n * d));
    }
    return Eigen::Map<Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

}  // namespace detail

/// Builds a validated Scenario from the JSON scenario schema.
inline Scenario scenario_from_json(const nlohmann::json& j) {
    using detail::require;
    try {
        if (!j.is_object()) throw ParseError("scenario: top-level value must be an object");
        const auto n_raw = require(j, "n").get<long long>();
        const auto d_raw = require(j, "d").get<long long>();
        if (n_raw < 1) throw ValidationError("n", "must be positive");
        if (d_raw < 2) throw ValidationError("d", "must be at least 2");
        const auto n = static_cast<std::size_t>(n_raw);
        const auto d = static_cast<std::size_t>(d_raw);

        std::vector<Edge> edges;
        for (const auto& e : require(j, "edges")) {
            if (!e.is_array() || e.size() != 2) throw ValidationError("edges", "each edge must be a pair");
            const auto a = e[0].get<long long>();
            const auto b = e[1].get<long long>();
            if (a == b) throw ValidationError("edges", "self-loop at node " + std::to_string(a));
            edges.push_back({detail::node_from_file(a, n, "edges"), detail::node_from_file(b, n, "edges")});
        }
        Framework fw(n, d, std::move(edges), detail::parse_positions(require(j, "positions"), n, d));

        const auto actuator = detail::node_from_file(require(j, "actuator").get<long long>(), n, "actuator");
        const auto sensor = detail::node_from_file(require(j, "sensor").get<long long>(), n, "sensor");
        const auto w = require(j, "w0").get<std::vector<double>>();
        Vector w0 = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));

        SimSettings sim;
        if (j.contains("sim")) {
            const auto& s = j.at("sim");
            sim.dt = s.value("dt", sim.dt);
            sim.t_end = s.value("t_end", sim.t_end);
            sim.stride = s.value("stride", sim.stride);
            const auto method = s.value("method", std::string("rk4"));
            if (method == "rk4") sim.method = Integrator::rk4;
            else if (method == "euler") sim.method = Integrator::euler;
            else throw ValidationError("sim.method", "expected \"rk4\" or \"euler\", got \"" + method + "\"");
        }
        ToleranceOverrides tol;
        if (j.contains("tol")) {
            const auto& t = j.at("tol");
            if (t.contains("rank")) tol.rank = t.at("rank").get<double>();
            if (t.contains("subspace")) tol.subspace = t.at("subspace").get<double>();
        }
        Scenario sc{std::move(fw), actuator, sensor, std::move(w0), j.value("impulse", 1.0), sim, tol};
        sc.validate();
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
}

/// Serializes with 1-based node indices and canonical edge order.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    nlohmann::json j;
    const auto& fw = sc.framework;
    j["n"] = fw.num_nodes();
    j["d"] = fw.dim();
    auto edges = nlohmann::json::array();
    for (const auto& e : fw.edges()) edges.push_back({e.i + 1, e.j + 1});
    j["edges"] = edges;
    auto pos = nlohmann::json::array();
    for (std::size_t k = 0; k < fw.num_nodes(); ++k) {
        const Vector p = fw.position(k);
        pos.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    }
    j["positions"] = pos;
    j["actuator"] = sc.actuator + 1;
    j["sensor"] = sc.sensor + 1;
    j["w0"] = std::vector<double>(sc.w0.data(), sc.w0.data() + sc.w0.size());
    j["impulse"] = sc.impulse;
    j["sim"] = {{"dt", sc.sim.dt}, {"t_end", sc.sim.t_end}, {"method", to_string(sc.sim.method)},
                {"stride", sc.sim.stride}};
    if (sc.tol.rank || sc.tol.subspace) {
        nlohmann::json t = nlohmann::json::object();
        if (sc.tol.rank) t["rank"] = *sc.tol.rank;
        if (sc.tol.subspace) t["subspace"] = *sc.tol.subspace;
        j["tol"] = t;
    }
    return j;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << scenario_to_json(sc).dump(2) << '\n';
}

}  // namespace rigidkit
