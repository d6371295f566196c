#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rigidkit/dynamics.hpp"
#include "rigidkit/hidden_modes.hpp"
#include "rigidkit/report.hpp"
#include "rigidkit/rigidity.hpp"
#include "rigidkit/scenario.hpp"

namespace rigidkit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kInputError = 2, kNumericalError = 3 };

struct Options {
    std::string input;
    std::string out_dir;
    std::size_t sweep = 0;
    bool nonlinear = false;
    bool check = false;
    std::optional<double> tol_rank;
    std::optional<double> tol_subspace;
    std::optional<double> dt;
    std::optional<double> t_end;
};

/// Files written by a command plus scalar metrics that `--check` recomputes.
struct RunResult {
    std::vector<std::string> files;
    std::map<std::string, double> metrics;
};

inline std::string default_out_dir() {
    if (const char* env = std::getenv("RIGIDKIT_OUT"); env && *env) return env;
    return "rigidkit-out";
}

inline Scenario load_with_overrides(const std::string& path, const Options& opt) {
    Scenario sc = load_scenario(path);
    if (opt.tol_rank) sc.tol.rank = opt.tol_rank;
    if (opt.tol_subspace) sc.tol.subspace = opt.tol_subspace;
    if (opt.dt) sc.sim.dt = *opt.dt;
    if (opt.t_end) sc.sim.t_end = *opt.t_end;
    sc.validate();
    return sc;
}

inline double subspace_tol(const Scenario& sc) { return sc.tol.subspace.value_or(kDefaultSubspaceTol); }

inline json tolerances_json(const Scenario& sc, const RigidityDecomposition& dec) {
    return {{"rank", dec.rank_tolerance},
            {"rank_overridden", sc.tol.rank.has_value()},
            {"subspace", subspace_tol(sc)},
            {"eigen_grouping_relative", kEigenGroupingRelTol}};
}

inline json checks_json(const Scenario& sc) {
    const auto& fw = sc.framework;
    const double tol = subspace_tol(sc);
    const auto sys = linearize(fw, sc.actuator, sc.sensor);
    const auto ri = rotational_subspace_Ri(fw, sc.actuator, tol);
    const auto ti = local_rotational_subspace_Ti(fw, sc.actuator, tol);
    json inclusion = {{"Ti_contains_Ri", contains(ti, ri)}, {"principal_angles_Ti_vs_Ri", principal_angles(ti, ri)}};
    return {{"uncontrollable_split", to_json(check_prop2_decomposition(sys, fw, tol, sc.tol.rank))},
            {"Ti_contains_Ri", inclusion},
            {"unified_theorem", to_json(check_unified_theorem(sys, fw, tol, sc.tol.rank))},
            {"corollaries", to_json(check_corollaries(fw, sc.actuator, tol, sc.tol.rank))}};
}

inline void write_rigidity_csv(const std::string& path, const Framework& fw, const RigidityMatrix& rm) {
    std::vector<std::string> header{"edge", "i", "j"};
    for (std::size_t k = 0; k < fw.num_nodes(); ++k)
        for (std::size_t a = 0; a < fw.dim(); ++a) header.push_back("p_" + std::to_string(k + 1) + axis_name(a));
    CsvWriter csv(path, header);
    for (std::size_t e = 0; e < fw.num_edges(); ++e) {
        csv.cell(e + 1).cell(fw.edges()[e].i + 1).cell(fw.edges()[e].j + 1);
        csv.cells(Vector(rm.entries.row(static_cast<Eigen::Index>(e)).transpose()));
        csv.end_row();
    }
}

inline RunResult run_analyze(const Scenario& sc, const fs::path& out, bool write) {
    const auto& fw = sc.framework;
    const double tol = subspace_tol(sc);
    const auto rm = rigidity_matrix(fw);
    const auto dec = decompose(rm, sc.tol.rank, tol);
    const auto cls = classify_rigidity(fw, sc.tol.rank);
    const auto sys = linearize(fw, sc.actuator, sc.sensor);
    const auto modes = classify_modes(sys, tol);

    RunResult res;
    res.metrics = {{"rank", static_cast<double>(dec.rank)},
                   {"flex_dim", static_cast<double>(dec.flex.dim())},
                   {"self_stress_dim", static_cast<double>(dec.self_stress.dim())},
                   {"deformation_dim", static_cast<double>(dec.deformation.dim())},
                   {"uncontrollable_dim", static_cast<double>(modes.uncontrollable.dim())}};
    if (!write) return res;

    json report;
    report["scenario"] = scenario_to_json(sc);
    report["tolerances"] = tolerances_json(sc, dec);
    report["rigidity"] = to_json(dec, cls);
    report["modes"] = to_json(modes);
    report["checks"] = checks_json(sc);
    if (fw.dim() == 2) {
        report["impulse"] = to_json(dichotomy_experiment(sc, false));
    } else {
        report["impulse"] = nullptr;
    }
    res.files = {"scenario.json", "report.json", "rigidity_matrix.csv", "subspaces.json"};
    report["manifest"] = res.files;

    json subspaces = {{"flex", to_json(dec.flex)},
                      {"self_stress", to_json(dec.self_stress)},
                      {"deformation", to_json(dec.deformation)},
                      {"Ri", to_json(rotational_subspace_Ri(fw, sc.actuator, tol))},
                      {"Ti", to_json(local_rotational_subspace_Ti(fw, sc.actuator, tol))},
                      {"uncontrollable", to_json(modes.uncontrollable)},
                      {"unobservable", to_json(modes.unobservable)}};
    try {
        subspaces["rbm"] = to_json(rbm_basis(fw).span(tol));
    } catch (const NumericalError&) {
        subspaces["rbm"] = nullptr;
    }

    save_scenario(sc, (out / "scenario.json").string());
    write_json((out / "report.json").string(), report);
    write_rigidity_csv((out / "rigidity_matrix.csv").string(), fw, rm);
    write_json((out / "subspaces.json").string(), subspaces);
    return res;
}

inline RunResult run_modes(const Scenario& sc, const fs::path& out, bool write) {
    const auto& fw = sc.framework;
    const double tol = subspace_tol(sc);
    const auto sys = linearize(fw, sc.actuator, sc.sensor);
    const auto modes = classify_modes(sys, tol);
    RunResult res;
    res.metrics = {{"uncontrollable_dim", static_cast<double>(modes.uncontrollable.dim())},
                   {"unobservable_dim", static_cast<double>(modes.unobservable.dim())},
                   {"controllable_observable", static_cast<double>(modes.dim_controllable_observable)},
                   {"uncontrollable_observable", static_cast<double>(modes.dim_uncontrollable_observable)},
                   {"controllable_unobservable", static_cast<double>(modes.dim_controllable_unobservable)},
                   {"uncontrollable_unobservable", static_cast<double>(modes.dim_uncontrollable_unobservable)}};
    if (!write) return res;

    json j = to_json(modes);
    j["uncontrollable_equals_unobservable"] =
        contains(modes.uncontrollable, modes.unobservable) && contains(modes.unobservable, modes.uncontrollable);
    j["checks"] = checks_json(sc);
    res.files = {"scenario.json", "modes.json"};
    save_scenario(sc, (out / "scenario.json").string());
    write_json((out / "modes.json").string(), j);
    return res;
}

inline RunResult run_dichotomy(const Scenario& sc, const Options& opt, const fs::path& out, bool write) {
    const auto& fw = sc.framework;
    if (fw.dim() != 2) throw ValidationError("d", "dichotomy requires a planar scenario (d = 2)");
    const auto outcome = dichotomy_experiment(sc, true);
    RunResult res;
    res.metrics = {{"alignment", outcome.alignment},
                   {"c_x", outcome.coefficients.c_x},
                   {"c_y", outcome.coefficients.c_y},
                   {"c_r", outcome.coefficients.c_r},
                   {"max_final_edge_error", outcome.simulated_final_edge_errors.cwiseAbs().maxCoeff()}};
    std::vector<SweepRow> sweep;
    if (opt.sweep > 0) {
        sweep = dichotomy_sweep(sc, opt.sweep);
        double worst = 0.0;
        for (const auto& row : sweep) worst = std::max(worst, row.max_final_edge_error);
        res.metrics["sweep_max_final_edge_error"] = worst;
    }
    std::optional<Trajectory> nonlinear;
    if (opt.nonlinear) {
        const Vector p0 = fw.positions() + selector(fw.num_nodes(), 2, sc.actuator) * outcome.impulse;
        nonlinear = simulate_nonlinear(fw, p0, sc.sim);
        res.metrics["nonlinear_final_potential"] = nonlinear->potential.back();
    }
    if (!write) return res;

    json j = to_json(outcome);
    j["scenario"] = scenario_to_json(sc);
    j["model"] = "linearized";
    res.files = {"scenario.json", "outcome.json", "trajectory_lti.csv"};
    write_trajectory_csv((out / "trajectory_lti.csv").string(), fw, outcome.trajectory);
    if (opt.sweep > 0) {
        CsvWriter csv((out / "sweep.csv").string(), {"angle", "alignment", "c_r", "max_final_edge_error"});
        for (const auto& row : sweep) {
            csv.cell(row.angle).cell(row.alignment).cell(row.c_r).cell(row.max_final_edge_error);
            csv.end_row();
        }
        res.files.push_back("sweep.csv");
    }
    if (nonlinear) {
        write_trajectory_csv((out / "trajectory_nonlinear.csv").string(), fw, *nonlinear);
        j["nonlinear"] = {{"final_edge_errors", to_json(nonlinear->edge_errors.back())},
                          {"final_potential", nonlinear->potential.back()},
                          {"warnings", nonlinear->warnings}};
        res.files.push_back("trajectory_nonlinear.csv");
    }
    save_scenario(sc, (out / "scenario.json").string());
    write_json((out / "outcome.json").string(), j);
    return res;
}

inline RunResult run_plotdata(const Scenario& sc, const fs::path& out, bool write) {
    const auto& fw = sc.framework;
    if (fw.dim() != 2) throw ValidationError("d", "plot data requires a planar scenario (d = 2)");
    const double tol = subspace_tol(sc);
    const auto ri = rotational_subspace_Ri(fw, sc.actuator, tol);
    const auto rbm = rbm_basis(fw);
    const auto plane = controllable_plane(rbm, fw, sc.actuator);
    const auto outcome = dichotomy_experiment(sc, true);
    const auto series = edge_error_series(fw, outcome.trajectory);
    RunResult res;
    res.metrics = {{"samples", static_cast<double>(outcome.trajectory.size())},
                   {"n_c_x", plane.normal[0]},
                   {"n_c_y", plane.normal[1]}};
    if (!write) return res;

    const Vector rot = ri.vector(0);
    {
        CsvWriter csv((out / "arrows_Ri.csv").string(), {"node", "x", "y", "dx", "dy"});
        for (std::size_t k = 0; k < fw.num_nodes(); ++k) {
            csv.cell(k + 1).cells(fw.position(k)).cells(block(rot, k, 2));
            csv.end_row();
        }
    }
    {
        CsvWriter csv((out / "arrows_Ti.csv").string(), {"node", "x", "y", "dx", "dy"});
        const auto nbrs = fw.neighbors(sc.actuator);
        for (std::size_t k = 0; k < fw.num_nodes(); ++k) {
            Vector arrow = Vector::Zero(2);
            if (std::binary_search(nbrs.begin(), nbrs.end(), k)) arrow = block(elementary_rotation(fw, sc.actuator, k), k, 2);
            csv.cell(k + 1).cells(fw.position(k)).cells(arrow);
            csv.end_row();
        }
    }
    {
        std::vector<std::string> header{"t"};
        for (std::size_t e = 0; e < fw.num_edges(); ++e) header.push_back("linearized_" + std::to_string(e + 1));
        for (std::size_t e = 0; e < fw.num_edges(); ++e) header.push_back("exact_" + std::to_string(e + 1));
        CsvWriter csv((out / "edge_errors.csv").string(), header);
        for (std::size_t s = 0; s < outcome.trajectory.size(); ++s) {
            csv.cell(outcome.trajectory.times[s]).cells((*series.linearized)[s]).cells(series.exact[s]);
            csv.end_row();
        }
    }
    write_json((out / "plane.json").string(), to_json(plane));
    res.files = {"arrows_Ri.csv", "arrows_Ti.csv", "edge_errors.csv", "plane.json"};
    return res;
}

/// Compares recomputed metrics with a stored manifest. Returns the mismatches.
inline std::vector<std::string> compare_manifest(const json& manifest, const RunResult& res) {
    std::vector<std::string> bad;
    const auto& stored = manifest.at("metrics");
    for (const auto& [key, value] : res.metrics) {
        if (!stored.contains(key)) {
            bad.push_back(key + ": missing from manifest");
            continue;
        }
        const double old = stored.at(key).get<double>();
        if (std::abs(old - value) > 1e-9 * std::max(1.0, std::abs(old)))
            bad.push_back(key + ": stored " + format_double(old) + ", recomputed " + format_double(value));
    }
    for (const auto& f : manifest.at("files")) {
        if (!fs::exists(fs::path(manifest.value("out_dir", std::string("."))) / f.get<std::string>()))
            bad.push_back("missing artifact " + f.get<std::string>());
    }
    return bad;
}

inline int run_command(const std::string& command, const Options& opt, std::ostream& log, std::ostream& err) {
    try {
        fs::path out = opt.out_dir.empty() ? fs::path(default_out_dir()) : fs::path(opt.out_dir);
        Scenario sc = [&] {
            if (command == "plotdata" && fs::is_directory(opt.input)) {
                const auto stored = fs::path(opt.input) / "scenario.json";
                if (!fs::exists(stored)) throw ValidationError("run-dir", "missing run artifact scenario.json in " + opt.input);
                if (opt.out_dir.empty()) out = opt.input;
                return load_with_overrides(stored.string(), opt);
            }
            return load_with_overrides(opt.input, opt);
        }();

        const bool write = !opt.check;
        if (write) fs::create_directories(out);
        RunResult res;
        if (command == "analyze") res = run_analyze(sc, out, write);
        else if (command == "modes") res = run_modes(sc, out, write);
        else if (command == "dichotomy") res = run_dichotomy(sc, opt, out, write);
        else if (command == "plotdata") res = run_plotdata(sc, out, write);
        else throw ValidationError("command", "unknown command " + command);

        const auto manifest_path = out / ("manifest_" + command + ".json");
        if (opt.check) {
            if (!fs::exists(manifest_path)) {
                err << "error: no manifest at " << manifest_path.string() << '\n';
                return kInputError;
            }
            std::ifstream in(manifest_path);
            json manifest = json::parse(in);
            manifest["out_dir"] = out.string();
            const auto bad = compare_manifest(manifest, res);
            for (const auto& b : bad) err << "check mismatch: " << b << '\n';
            if (!bad.empty()) return kNumericalError;
            log << "check passed: " << res.metrics.size() << " metrics match " << manifest_path.string() << '\n';
            return kSuccess;
        }

        json manifest = {{"command", command}, {"files", res.files}, {"metrics", res.metrics}};
        write_json(manifest_path.string(), manifest);
        for (const auto& f : res.files) log << (out / f).string() << '\n';
        log << manifest_path.string() << '\n';
        return kSuccess;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericalError;
    }
}

/// Parses argv and dispatches. Usage:
///   rigidkit analyze|modes|dichotomy|plotdata <scenario.json | run-dir> [options]
inline int main(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Rigidity, hidden-mode and shape-recovery analysis of distance-based formations"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&opt](CLI::App* sub, const char* what) {
        sub->add_option("input", opt.input, what)->required();
        sub->add_option("--out", opt.out_dir, "Output directory (default $RIGIDKIT_OUT or ./rigidkit-out)");
        sub->add_option("--tol-rank", opt.tol_rank, "Rank tolerance override");
        sub->add_option("--tol-subspace", opt.tol_subspace, "Subspace comparison tolerance override");
        sub->add_option("--dt", opt.dt, "Integrator step size");
        sub->add_option("--t-end", opt.t_end, "Simulation horizon");
        sub->add_flag("--check", opt.check, "Recompute and compare against the stored manifest");
    };
    add_common(app.add_subcommand("analyze", "Rigidity classification, subspaces and all checks"), "Scenario file");
    add_common(app.add_subcommand("modes", "Four-way controllability/observability mode report"), "Scenario file");
    auto* dich = app.add_subcommand("dichotomy", "Impulse response and shape-recovery verdict");
    add_common(dich, "Scenario file");
    dich->add_option("--sweep", opt.sweep, "Number of input angles swept over [0, 2pi)");
    dich->add_flag("--nonlinear", opt.nonlinear, "Also run the nonlinear gradient flow");
    add_common(app.add_subcommand("plotdata", "Plot-ready arrow fields, edge errors and plane geometry"),
               "Run directory (or scenario file)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return kInputError;
    }
    return run_command(app.get_subcommands().front()->get_name(), opt, log, err);
}

}  // namespace rigidkit::cli
