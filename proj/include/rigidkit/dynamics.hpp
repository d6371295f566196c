#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "rigidkit/framework.hpp"
#include "rigidkit/hidden_modes.hpp"
#include "rigidkit/rigidity.hpp"
#include "rigidkit/scenario.hpp"
#include "rigidkit/subspace.hpp"

namespace rigidkit {

enum class TrajectoryKind { nonlinear, linearized };

/// Sampled solution. For nonlinear runs `states` holds p(t) and `edge_errors`
/// r(p(t)) - r(p*); for linearized runs `states` holds dp(t) and `edge_errors`
/// the first-order change R(p*) dp(t). `potential` is 1/2 ||edge_errors||^2.
struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::nonlinear;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> edge_errors;
    std::vector<double> potential;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return times.size(); }
    const Vector& final_state() const { return states.back(); }
};

/// Fixed-step explicit integration of x' = f(x). `observe(step, x)` is called
/// at step 0 and then every `settings.stride` steps (and at the last step).
template <typename Rhs, typename Observer>
void integrate(Rhs&& f, Vector x, const SimSettings& settings, Observer&& observe) {
    settings.validate();
    const std::size_t steps = settings.num_steps();
    const double h = settings.dt;
    observe(std::size_t{0}, x);
    for (std::size_t s = 1; s <= steps; ++s) {
        if (settings.method == Integrator::rk4) {
            const Vector k1 = f(x);
            const Vector k2 = f(Vector(x + 0.5 * h * k1));
            const Vector k3 = f(Vector(x + 0.5 * h * k2));
            const Vector k4 = f(Vector(x + h * k3));
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            x += h * f(x);
        }
        if (!x.allFinite()) throw NonFiniteState(s);
        if (s % settings.stride == 0 || s == steps) observe(s, x);
    }
}

inline double potential(const Vector& edge_error) { return 0.5 * edge_error.squaredNorm(); }

/// Gradient formation flow p' = -R(p)^T (r(p) - r(p*)).
inline Vector gradient_flow(const Framework& fw, const Vector& target, const Vector& p) {
    return -(rigidity_matrix(fw, p).entries.transpose() * (rigidity_function(fw, p) - target));
}

inline Trajectory simulate_nonlinear(const Framework& fw, const Vector& p0, const SimSettings& settings) {
    if (static_cast<std::size_t>(p0.size()) != fw.state_dim())
        throw std::invalid_argument("simulate_nonlinear: initial state length mismatch");
    const Vector target = rigidity_function(fw, fw.positions());
    Trajectory traj;
    traj.kind = TrajectoryKind::nonlinear;
    integrate([&](const Vector& p) { return gradient_flow(fw, target, p); }, p0, settings,
              [&](std::size_t step, const Vector& p) {
                  Vector err = rigidity_function(fw, p) - target;
                  traj.times.push_back(static_cast<double>(step) * settings.dt);
                  traj.potential.push_back(potential(err));
                  traj.edge_errors.push_back(std::move(err));
                  traj.states.push_back(p);
              });
    for (std::size_t k = 1; k < traj.potential.size(); ++k) {
        if (traj.potential[k] > traj.potential[k - 1] + 1e-12) {
            traj.warnings.push_back("potential increased at t = " + std::to_string(traj.times[k]) +
                                    "; consider a smaller dt");
            break;
        }
    }
    return traj;
}

/// Linearized flow dp' = A dp from dp(0+) = dp0.
inline Trajectory simulate_lti(const LinearizedSystem& sys, const Vector& dp0, const SimSettings& settings) {
    if (dp0.size() != sys.A.rows()) throw std::invalid_argument("simulate_lti: initial state length mismatch");
    Trajectory traj;
    traj.kind = TrajectoryKind::linearized;
    integrate([&](const Vector& x) -> Vector { return sys.A * x; }, dp0, settings,
              [&](std::size_t step, const Vector& x) {
                  Vector err = sys.R * x;
                  traj.times.push_back(static_cast<double>(step) * settings.dt);
                  traj.potential.push_back(potential(err));
                  traj.edge_errors.push_back(std::move(err));
                  traj.states.push_back(x);
              });
    return traj;
}

/// Mean state over the last 5% of samples (at least one).
inline Vector tail_mean(const Trajectory& traj) {
    if (traj.states.empty()) throw std::invalid_argument("tail_mean: empty trajectory");
    const std::size_t count = std::max<std::size_t>(1, traj.states.size() / 20);
    Vector acc = Vector::Zero(traj.states.front().size());
    for (std::size_t k = traj.states.size() - count; k < traj.states.size(); ++k) acc += traj.states[k];
    return acc / static_cast<double>(count);
}

/// lim dp(t) = P_0 B w0, the projection of the impulse onto ker R(p*).
inline Vector steady_state(const LinearizedSystem& sys, const Framework& fw, const Vector& w0,
                           std::optional<double> rank_tol = std::nullopt) {
    if (static_cast<std::size_t>(w0.size()) != fw.dim()) throw std::invalid_argument("steady_state: w0 length must equal d");
    const auto flex = flex_space(rigidity_matrix(fw), rank_tol);
    return project(flex, Vector(sys.B * w0));
}

struct RbmCoefficients {
    double c_x = 0.0;
    double c_y = 0.0;
    double c_r = 0.0;
};

namespace detail {

inline void require_planar(const Framework& fw, const char* op) {
    if (fw.dim() != 2) throw std::invalid_argument(std::string(op) + ": only d = 2 is supported");
}

}  // namespace detail

/// Coordinates of P_0 B w0 in the orthonormal basis {v_x, v_y, v_r}:
/// c = <[v]_i, w0> for each basis vector.
inline RbmCoefficients rbm_coefficients(const RbmBasis& rbm, const Framework& fw, std::size_t node, const Vector& w0) {
    detail::require_planar(fw, "rbm_coefficients");
    if (w0.size() != 2) throw std::invalid_argument("rbm_coefficients: w0 length must be 2");
    return {block(rbm.translations[0], node, 2).dot(w0), block(rbm.translations[1], node, 2).dot(w0),
            block(rbm.rotations[0], node, 2).dot(w0)};
}

/// Local velocity [v_r]_i of the unit rotational mode at a node.
inline Vector local_rotation_vector(const RbmBasis& rbm, std::size_t node, std::size_t d = 2) {
    return block(rbm.rotations.front(), node, d);
}

/// Skew generator of the unit rotational mode, v_r = omega (p*_k - p_cm).
inline Matrix unit_rotation_generator(const RbmBasis& rbm) {
    return planar_rotation_generator() / rbm.rotation_scales.front();
}

/// Geometry of the input-to-RBM map in the rescaled basis where the
/// translation blocks at the actuator are (1, 0) and (0, 1).
struct ControllablePlane {
    Eigen::Vector3d normal;        // n_c = (-[v_r]_i, 1)
    Eigen::Matrix<double, 3, 2> plane_basis;
    Eigen::Vector3d recovery_line; // plane ∩ {c_r = 0}, unit length
    Eigen::Vector2d local_rotation;
};

inline ControllablePlane controllable_plane(const RbmBasis& rbm, const Framework& fw, std::size_t node) {
    detail::require_planar(fw, "controllable_plane");
    ControllablePlane out;
    out.local_rotation = local_rotation_vector(rbm, node);
    out.normal << -out.local_rotation, 1.0;
    const Eigen::Vector3d unit = out.normal.normalized();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(Eigen::Matrix3d(unit * unit.transpose()), Eigen::ComputeFullU);
    out.plane_basis = svd.matrixU().rightCols<2>();
    out.recovery_line = out.normal.cross(Eigen::Vector3d::UnitZ()).normalized();
    return out;
}

/// Translation fields with unit blocks, ṽ_x and ṽ_y.
inline std::pair<Vector, Vector> rescaled_translations(const RbmBasis& rbm) {
    const double scale = 1.0 / std::abs(rbm.translations[0].maxCoeff());
    return {rbm.translations[0] * scale, rbm.translations[1] * scale};
}

/// Reachable RBM coordinates c(w0) = (<ṽ_x, B w0>, <ṽ_y, B w0>, <v_r, B w0>).
inline Eigen::Vector3d reachable_coordinates(const RbmBasis& rbm, const Framework& fw, std::size_t node,
                                             const Vector& w0) {
    detail::require_planar(fw, "reachable_coordinates");
    const Vector bw = selector(fw.num_nodes(), 2, node) * w0;
    const auto [tx, ty] = rescaled_translations(rbm);
    return {tx.dot(bw), ty.dot(bw), rbm.rotations[0].dot(bw)};
}

/// Motion with RBM coordinates c in the rescaled basis.
inline Vector rbm_motion(const RbmBasis& rbm, const Eigen::Vector3d& c) {
    const auto [tx, ty] = rescaled_translations(rbm);
    return c[0] * tx + c[1] * ty + c[2] * rbm.rotations[0];
}

enum class Verdict { recovery, distortion, withheld };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::recovery: return "recovery";
        case Verdict::distortion: return "distortion";
        case Verdict::withheld: return "withheld";
    }
    return "unknown";
}

struct ImpulseOutcome {
    Vector w0;                       // as supplied
    bool w0_normalized = false;      // true when w0 was rescaled to unit length
    Vector impulse;                  // applied jump direction * magnitude
    double alignment = 0.0;          // <[v_r]_i, w0 / |w0|>
    Vector local_rotation;           // [v_r]_i
    RbmCoefficients coefficients;    // of the applied impulse
    Vector steady_state;             // P_0 B impulse
    Vector simulated_steady_state;   // tail mean of the LTI run
    Vector predicted_edge_sq_lengths;
    Vector predicted_edge_errors;    // c_r^2 ||omega x||^2
    Vector simulated_final_edge_errors;             // exact, r(p* + tail) - r(p*)
    Vector simulated_final_linearized_edge_errors;  // R(p*) tail
    double flex_excitation = 0.0;    // norm of the non-rigid part of the steady state
    Verdict verdict = Verdict::withheld;
    std::vector<std::string> warnings;
    Trajectory trajectory;
};

/// Exact edge errors r(p* + dp) - r(p*).
inline Vector exact_edge_errors(const Framework& fw, const Vector& dp) {
    return rigidity_function(fw, Vector(fw.positions() + dp)) - rigidity_function(fw, fw.positions());
}

/// Impulse at the actuator, linearized response, and the recovery/distortion verdict.
inline ImpulseOutcome dichotomy_experiment(const Scenario& sc, bool keep_trajectory = true) {
    const auto& fw = sc.framework;
    detail::require_planar(fw, "dichotomy_experiment");
    const double tol = sc.tol.subspace.value_or(kDefaultSubspaceTol);
    const auto sys = linearize(fw, sc.actuator, sc.sensor);
    const auto dec = decompose(rigidity_matrix(fw), sc.tol.rank, tol);
    const auto rbm = rbm_basis(fw);

    ImpulseOutcome out;
    out.w0 = sc.w0;
    const double norm = sc.w0.norm();
    Vector direction = sc.w0;
    if (norm > 0.0 && norm != 1.0) {
        direction /= norm;
        out.w0_normalized = true;
    }
    out.impulse = direction * sc.impulse;
    out.local_rotation = local_rotation_vector(rbm, sc.actuator);
    out.alignment = out.local_rotation.dot(direction);
    out.coefficients = rbm_coefficients(rbm, fw, sc.actuator, out.impulse);

    const Vector bw = sys.B * out.impulse;
    out.steady_state = project(dec.flex, bw);
    const Vector rigid_part = project(rbm.span(tol), out.steady_state);
    out.flex_excitation = (out.steady_state - rigid_part).norm();

    out.trajectory = simulate_lti(sys, bw, sc.sim);
    out.simulated_steady_state = tail_mean(out.trajectory);
    out.simulated_final_edge_errors = exact_edge_errors(fw, out.simulated_steady_state);
    out.simulated_final_linearized_edge_errors = sys.R * out.simulated_steady_state;

    const Matrix omega = unit_rotation_generator(rbm);
    const auto m = static_cast<Eigen::Index>(fw.num_edges());
    out.predicted_edge_sq_lengths.resize(m);
    out.predicted_edge_errors.resize(m);
    const double cr2 = out.coefficients.c_r * out.coefficients.c_r;
    for (Eigen::Index k = 0; k < m; ++k) {
        const Vector x = fw.edge_vector(static_cast<std::size_t>(k));
        out.predicted_edge_errors[k] = cr2 * (omega * x).squaredNorm();
        out.predicted_edge_sq_lengths[k] = x.squaredNorm() + out.predicted_edge_errors[k];
    }

    if (static_cast<std::size_t>(dec.flex.dim()) != rbm_dimension(2)) {
        out.verdict = Verdict::withheld;
        out.warnings.push_back("framework is not infinitesimally rigid; verdict withheld, see flex_excitation");
    } else {
        out.verdict = std::abs(out.alignment) <= tol ? Verdict::recovery : Verdict::distortion;
    }
    if (!keep_trajectory) out.trajectory = Trajectory{};
    return out;
}

struct SweepRow {
    double angle = 0.0;
    double alignment = 0.0;
    double c_r = 0.0;
    double max_final_edge_error = 0.0;
};

/// N input directions at angles 2 pi k / N. Runs on a bounded worker pool; rows
/// are returned in angle order.
inline std::vector<SweepRow> dichotomy_sweep(const Scenario& sc, std::size_t count, std::size_t workers = 0) {
    std::vector<SweepRow> rows(count);
    if (count == 0) return rows;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t k = next++; k < count; k = next++) {
                Scenario local = sc;
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
                local.w0 = Vector(2);
                local.w0 << std::cos(angle), std::sin(angle);
                const auto res = dichotomy_experiment(local, false);
                rows[k] = {angle, res.alignment, res.coefficients.c_r,
                           res.simulated_final_edge_errors.cwiseAbs().maxCoeff()};
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

struct EdgeErrorSeries {
    std::vector<Vector> exact;
    std::optional<std::vector<Vector>> linearized;
};

/// Per-sample edge errors. Linearized trajectories yield both the first-order
/// R(p*) dp and the exact r(p* + dp) - r(p*) variants.
inline EdgeErrorSeries edge_error_series(const Framework& fw, const Trajectory& traj) {
    EdgeErrorSeries out;
    const Vector target = rigidity_function(fw, fw.positions());
    if (traj.kind == TrajectoryKind::nonlinear) {
        for (const auto& p : traj.states) out.exact.push_back(rigidity_function(fw, p) - target);
    } else {
        const Matrix r = rigidity_matrix(fw).entries;
        out.linearized.emplace();
        for (const auto& dp : traj.states) {
            out.exact.push_back(exact_edge_errors(fw, dp));
            out.linearized->push_back(r * dp);
        }
    }
    return out;
}

/// Rigid motion of a configuration: rotate by `angle` about `center` (d = 2),
/// then translate.
inline Vector rigid_transform(const Vector& p, double angle, const Vector& center, const Vector& shift) {
    Eigen::Matrix2d rot;
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    Vector out(p.size());
    for (Eigen::Index k = 0; k < p.size() / 2; ++k)
        out.segment(2 * k, 2) = rot * (p.segment(2 * k, 2) - center) + center + shift;
    return out;
}

}  // namespace rigidkit
