#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rigidkit/dynamics.hpp"
#include "rigidkit/hidden_modes.hpp"
#include "rigidkit/rigidity.hpp"
#include "rigidkit/subspace.hpp"

namespace rigidkit {

using json = nlohmann::json;

// 17 significant digits, '.' decimal separator.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json to_json(const std::vector<double>& v) { return v; }

inline json to_json(const Subspace& s) {
    json cols = json::array();
    for (Eigen::Index c = 0; c < s.dim(); ++c) cols.push_back(to_json(Vector(s.basis().col(c))));
    return {{"dim", s.dim()}, {"ambient_dim", s.ambient_dim()}, {"tol", s.tol()}, {"basis", cols}};
}

inline json to_json(const RigidityDecomposition& dec, RigidityClass cls) {
    return {{"classification", to_string(cls)},
            {"rank", dec.rank},
            {"rank_tolerance", dec.rank_tolerance},
            {"singular_values", to_json(dec.singular_values)},
            {"flex_dim", dec.flex.dim()},
            {"self_stress_dim", dec.self_stress.dim()},
            {"deformation_dim", dec.deformation.dim()}};
}

inline json to_json(const Prop2Report& r) {
    return {{"uncontrollable_dim", r.uncontrollable.dim()},
            {"rbm_part_dim", r.rbm_part.dim()},
            {"deformation_part_dim", r.deformation_part.dim()},
            {"holds", r.holds},
            {"ambient_deformation_part_dim", r.ambient_deformation_part.dim()},
            {"ambient_form_holds", r.ambient_holds},
            {"principal_angles_sum_vs_uncontrollable", r.angles_sum_vs_uncontrollable}};
}

inline json to_json(const TheoremReport& r) {
    return {{"uncontrollable_dim", r.dim_uncontrollable},
            {"Ti_dim", r.dim_Ti},
            {"Ri_dim", r.dim_Ri},
            {"Ti_contains_uncontrollable", r.Ti_contains_uncontrollable},
            {"uncontrollable_contains_Ti", r.uncontrollable_contains_Ti},
            {"uncontrollable_equals_Ti", r.equal},
            {"Ti_contains_Ri", r.Ti_contains_Ri},
            {"uncontrollable_contains_Ri", r.uncontrollable_contains_Ri},
            {"Ti_contains_uncontrollable_rbm", r.Ti_contains_uncontrollable_rbm},
            {"principal_angles_uncontrollable_vs_Ti", r.angles_uncontrollable_vs_Ti},
            {"principal_angles_uncontrollable_vs_Ri", r.angles_uncontrollable_vs_Ri},
            {"principal_angles_Ti_vs_Ri", r.angles_Ti_vs_Ri}};
}

inline json to_json(const CorollaryReport& r) {
    json out;
    if (r.rigid) {
        out["rigid"] = {{"uncontrollable_dim", r.dim_uncontrollable},
                        {"Ri_dim", r.dim_Ri},
                        {"Ti_deformation_dim", r.dim_Ti_deformation},
                        {"components_orthogonal", r.rigid_components_orthogonal},
                        {"decomposition_holds", r.rigid_decomposition_holds},
                        {"sum_contains_uncontrollable", r.rigid_sum_contains_uncontrollable},
                        {"uncontrollable_contains_sum", r.uncontrollable_contains_rigid_sum},
                        {"principal_angles_sum_vs_uncontrollable", r.angles_rigid_sum_vs_uncontrollable}};
    } else {
        out["rigid"] = {{"skipped", r.rigid_skip_reason}};
    }
    if (r.complete_applicable) {
        out["complete"] = {{"Ti_dim", r.dim_Ti},
                           {"Ri_dim", r.dim_Ri},
                           {"Ti_equals_Ri", r.Ti_equals_Ri},
                           {"uncontrollable_equals_Ri", r.uncontrollable_equals_Ri},
                           {"principal_angles_Ti_vs_Ri", r.angles_Ti_vs_Ri}};
    } else {
        out["complete_skipped"] = r.complete_skip_reason;
    }
    return out;
}

inline json to_json(const ModeReport& r) {
    json groups = json::array();
    for (const auto& g : r.groups) {
        groups.push_back({{"eigenvalue", g.eigenvalue},
                          {"multiplicity", g.eigenspace.dim()},
                          {"uncontrollable_dim", g.uncontrollable.dim()},
                          {"unobservable_dim", g.unobservable.dim()},
                          {"controllable_observable_dim", g.controllable_observable.dim()},
                          {"uncontrollable_observable_dim", g.uncontrollable_observable.dim()},
                          {"controllable_unobservable_dim", g.controllable_unobservable.dim()},
                          {"uncontrollable_unobservable_dim", g.uncontrollable_unobservable.dim()}});
    }
    return {{"actuator", r.actuator + 1},
            {"sensor", r.sensor + 1},
            {"tol", r.tol},
            {"eigenvalues", r.eigenvalues},
            {"eigenspaces", groups},
            {"uncontrollable_dim", r.uncontrollable.dim()},
            {"unobservable_dim", r.unobservable.dim()},
            {"four_way",
             {{"controllable_observable", r.dim_controllable_observable},
              {"uncontrollable_observable", r.dim_uncontrollable_observable},
              {"controllable_unobservable", r.dim_controllable_unobservable},
              {"uncontrollable_unobservable", r.dim_uncontrollable_unobservable}}}};
}

inline json to_json(const ImpulseOutcome& o) {
    return {{"w0", to_json(o.w0)},
            {"w0_normalized", o.w0_normalized},
            {"impulse", to_json(o.impulse)},
            {"alignment", o.alignment},
            {"local_rotation", to_json(o.local_rotation)},
            {"coefficients", {{"c_x", o.coefficients.c_x}, {"c_y", o.coefficients.c_y}, {"c_r", o.coefficients.c_r}}},
            {"steady_state", to_json(o.steady_state)},
            {"simulated_steady_state", to_json(o.simulated_steady_state)},
            {"predicted_edge_sq_lengths", to_json(o.predicted_edge_sq_lengths)},
            {"predicted_edge_errors", to_json(o.predicted_edge_errors)},
            {"simulated_final_edge_errors", to_json(o.simulated_final_edge_errors)},
            {"simulated_final_linearized_edge_errors", to_json(o.simulated_final_linearized_edge_errors)},
            {"flex_excitation", o.flex_excitation},
            {"verdict", to_string(o.verdict)},
            {"warnings", o.warnings}};
}

inline json to_json(const ControllablePlane& p) {
    return {{"n_c", {p.normal[0], p.normal[1], p.normal[2]}},
            {"basis",
             {{p.plane_basis(0, 0), p.plane_basis(1, 0), p.plane_basis(2, 0)},
              {p.plane_basis(0, 1), p.plane_basis(1, 1), p.plane_basis(2, 1)}}},
            {"recovery_line", {p.recovery_line[0], p.recovery_line[1], p.recovery_line[2]}},
            {"local_rotation", {p.local_rotation[0], p.local_rotation[1]}}};
}

/// Minimal CSV writer: header row, comma separator, doubles at 17 digits.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path);
        for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
        out_ << '\n';
    }

    CsvWriter& cell(double x) { return raw(format_double(x)); }
    CsvWriter& cell(std::size_t x) { return raw(std::to_string(x)); }

    CsvWriter& cells(const Vector& v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) cell(v[k]);
        return *this;
    }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        out_ << (first_ ? "" : ",") << s;
        first_ = false;
        return *this;
    }

    std::ofstream out_;
    bool first_ = true;
};

inline std::string axis_name(std::size_t a) {
    static const char* names[] = {"x", "y", "z"};
    return a < 3 ? names[a] : std::to_string(a + 1);
}

/// Columns t, p_1x, p_1y, ..., e_1, ..., e_m, V. Linearized trajectories are
/// written as absolute positions p* + dp.
inline void write_trajectory_csv(const std::string& path, const Framework& fw, const Trajectory& traj) {
    std::vector<std::string> header{"t"};
    for (std::size_t k = 0; k < fw.num_nodes(); ++k)
        for (std::size_t a = 0; a < fw.dim(); ++a) header.push_back("p_" + std::to_string(k + 1) + axis_name(a));
    for (std::size_t e = 0; e < fw.num_edges(); ++e) header.push_back("e_" + std::to_string(e + 1));
    header.push_back("V");
    CsvWriter csv(path, header);
    for (std::size_t s = 0; s < traj.size(); ++s) {
        const Vector p = traj.kind == TrajectoryKind::linearized ? Vector(fw.positions() + traj.states[s]) : traj.states[s];
        csv.cell(traj.times[s]).cells(p).cells(traj.edge_errors[s]).cell(traj.potential[s]);
        csv.end_row();
    }
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace rigidkit
