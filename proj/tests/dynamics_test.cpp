#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rigidkit/dynamics.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace rk = rigidkit;
namespace rt = rigidkit::testing;
using rk::Matrix;
using rk::Vector;

namespace {

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

rk::Scenario case_study(Vector w0, double t_end = 20.0) {
    rk::SimSettings sim;
    sim.t_end = t_end;
    sim.stride = 100;
    return {rt::square_with_diagonal(), 0, 0, std::move(w0), 1.0, sim, {}};
}

}  // namespace

TEST(Integrate, ScalarDecayAccuracy) {
    auto run = [](rk::Integrator method, double dt) {
        rk::SimSettings s;
        s.dt = dt;
        s.t_end = 1.0;
        s.method = method;
        s.stride = 1;
        double last = 0.0;
        std::size_t count = 0;
        rk::integrate([](const Vector& x) -> Vector { return -x; }, Vector::Ones(1), s,
                      [&](std::size_t, const Vector& x) {
                          last = x[0];
                          ++count;
                      });
        EXPECT_EQ(count, s.num_steps() + 1);
        return std::abs(last - std::exp(-1.0));
    };
    const double rk4_coarse = run(rk::Integrator::rk4, 0.1);
    const double rk4_fine = run(rk::Integrator::rk4, 0.05);
    EXPECT_LT(rk4_coarse, 1e-6);
    EXPECT_NEAR(rk4_coarse / rk4_fine, 16.0, 2.0);
    const double euler_coarse = run(rk::Integrator::euler, 0.01);
    const double euler_fine = run(rk::Integrator::euler, 0.005);
    EXPECT_NEAR(euler_coarse / euler_fine, 2.0, 0.1);
}

TEST(Integrate, StrideKeepsFirstAndLastSample) {
    rk::SimSettings s;
    s.dt = 0.1;
    s.t_end = 1.05;
    s.stride = 4;
    std::vector<std::size_t> steps;
    rk::integrate([](const Vector& x) -> Vector { return x; }, Vector::Zero(1), s,
                  [&](std::size_t k, const Vector&) { steps.push_back(k); });
    ASSERT_FALSE(steps.empty());
    EXPECT_EQ(steps.front(), 0u);
    EXPECT_EQ(steps.back(), s.num_steps());
}

TEST(Integrate, BlowUpIsReported) {
    rk::SimSettings s;
    s.dt = 1.0;
    s.t_end = 2000.0;
    s.method = rk::Integrator::euler;
    EXPECT_THROW(rk::integrate([](const Vector& x) -> Vector { return -3.0 * x; }, Vector::Ones(2), s,
                               [](std::size_t, const Vector&) {}),
                 rk::NonFiniteState);
}

TEST(SimSettings, RejectsNonsense) {
    rk::SimSettings s;
    s.dt = 0.0;
    EXPECT_THROW(s.validate(), rk::ValidationError);
    s.dt = 1e-3;
    s.t_end = -1.0;
    EXPECT_THROW(s.validate(), rk::ValidationError);
}

TEST(GradientFlow, LinearizationIsA) {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fw = rt::random_framework(rng, 3 + trial % 5, 2 + trial % 2, 0.6);
        const Vector target = rk::rigidity_function(fw, fw.positions());
        const auto sys = rk::linearize(fw, 0, 0);
        const double eps = 1e-6;
        Matrix jac(sys.A.rows(), sys.A.cols());
        for (Eigen::Index c = 0; c < jac.cols(); ++c) {
            Vector plus = fw.positions(), minus = fw.positions();
            plus[c] += eps;
            minus[c] -= eps;
            jac.col(c) = (rk::gradient_flow(fw, target, plus) - rk::gradient_flow(fw, target, minus)) / (2 * eps);
        }
        EXPECT_LT((jac - sys.A).norm(), 1e-6 * std::max(1.0, sys.A.norm()));
    }
}

TEST(SimulateLti, MatchesMatrixExponential) {
    std::mt19937_64 rng(89);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const auto fw = rt::random_rigid(rng, 3 + trial % 4, 2, trial % 2);
        const auto sys = rk::linearize(fw, 0, 0);
        Vector x0(sys.A.rows());
        for (Eigen::Index k = 0; k < x0.size(); ++k) x0[k] = g(rng);
        rk::SimSettings s;
        s.t_end = 2.0;
        s.dt = 1e-3;
        const auto traj = rk::simulate_lti(sys, x0, s);
        const Vector exact = rt::symmetric_expm_apply(sys.A, traj.times.back(), x0);
        EXPECT_LT((traj.final_state() - exact).norm(), 1e-8 * std::max(1.0, x0.norm()));
        EXPECT_EQ(traj.kind, rk::TrajectoryKind::linearized);
    }
}

TEST(SimulateLti, ConvergesToFlexProjection) {
    std::mt19937_64 rng(97);
    for (int trial = 0; trial < 10; ++trial) {
        const auto fw = rt::random_rigid(rng, 3 + trial % 5, 2, trial % 3);
        const std::size_t node = static_cast<std::size_t>(trial) % fw.num_nodes();
        const auto sys = rk::linearize(fw, node, node);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sys.A, Eigen::EigenvaluesOnly);
        // Smallest-magnitude nonzero eigenvalue sets the slowest decay.
        const double slow = std::abs(es.eigenvalues()[sys.A.rows() - 4]);
        rk::SimSettings s;
        s.t_end = std::max(20.0, 25.0 / slow);
        s.stride = 100;
        const Vector w0 = vec2(std::cos(trial), std::sin(trial));
        const auto traj = rk::simulate_lti(sys, sys.B * w0, s);
        const Vector expected = rk::steady_state(sys, fw, w0);
        EXPECT_LT((rk::tail_mean(traj) - expected).norm(), 1e-6);
    }
}

TEST(SimulateNonlinear, PotentialNeverIncreases) {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int trial = 0; trial < 8; ++trial) {
        const auto fw = rt::random_rigid(rng, 4 + trial % 3, 2, 1);
        Vector p0 = fw.positions();
        for (Eigen::Index k = 0; k < p0.size(); ++k) p0[k] += g(rng);
        rk::SimSettings s;
        s.t_end = 5.0;
        s.dt = 1e-3;
        s.stride = 10;
        const auto traj = rk::simulate_nonlinear(fw, p0, s);
        EXPECT_TRUE(traj.warnings.empty());
        for (std::size_t k = 1; k < traj.potential.size(); ++k)
            EXPECT_LE(traj.potential[k], traj.potential[k - 1] + 1e-12);
    }
}

TEST(SimulateNonlinear, RigidMotionOfTargetIsEquilibrium) {
    const auto fw = rt::k4_generic();
    const Vector p0 = rk::rigid_transform(fw.positions(), 0.7, fw.center_of_mass(), vec2(2.0, -1.0));
    EXPECT_LT((rk::rigidity_function(fw, p0) - rk::rigidity_function(fw, fw.positions())).norm(), 1e-12);
    rk::SimSettings s;
    s.t_end = 1.0;
    const auto traj = rk::simulate_nonlinear(fw, p0, s);
    EXPECT_LT((traj.final_state() - p0).norm(), 1e-12);
    EXPECT_LT(traj.potential.back(), 1e-24);
}

TEST(RbmCoefficients, ReconstructSteadyStateOnRigidFrameworks) {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 30; ++trial) {
        const auto fw = rt::random_rigid(rng, 3 + trial % 6, 2, trial % 2);
        const std::size_t node = static_cast<std::size_t>(trial) % fw.num_nodes();
        const auto rbm = rk::rbm_basis(fw);
        const Vector w0 = vec2(std::cos(0.3 * trial), std::sin(0.3 * trial));
        const auto c = rk::rbm_coefficients(rbm, fw, node, w0);
        const Vector rebuilt = c.c_x * rbm.translations[0] + c.c_y * rbm.translations[1] + c.c_r * rbm.rotations[0];
        const auto sys = rk::linearize(fw, node, node);
        EXPECT_LT((rebuilt - rk::steady_state(sys, fw, w0)).norm(), 1e-10);
    }
}

TEST(ControllablePlane, ReachableCoordinatesLieOnPlane) {
    std::mt19937_64 rng(107);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const auto fw = rt::random_rigid(rng, 3 + trial % 5, 2);
        const std::size_t node = static_cast<std::size_t>(trial) % fw.num_nodes();
        const auto rbm = rk::rbm_basis(fw);
        const auto plane = rk::controllable_plane(rbm, fw, node);
        EXPECT_LT((plane.plane_basis.transpose() * plane.normal).norm(), 1e-14);
        EXPECT_NEAR(plane.recovery_line[2], 0.0, 1e-15);
        EXPECT_NEAR(plane.recovery_line.dot(plane.normal), 0.0, 1e-15);
        for (int k = 0; k < 10; ++k) {
            const Vector w0 = vec2(g(rng), g(rng));
            const Eigen::Vector3d c = rk::reachable_coordinates(rbm, fw, node, w0);
            EXPECT_LE(std::abs(c.dot(plane.normal)), 1e-12 * std::max(1.0, w0.norm()));
            // The pinned block of the reconstructed motion is the input itself.
            EXPECT_LT((rk::block(rk::rbm_motion(rbm, c), node, 2) - (w0 + c[2] * plane.local_rotation)).norm(), 1e-12);
        }
    }
}

TEST(Dichotomy, CaseStudyLocalRotation) {
    const auto out = rk::dichotomy_experiment(case_study(vec2(1, 0), 1.0));
    // p1 - p_cm = (-1/2, -1/2), rotated by Ω and scaled by 1/sqrt(2).
    EXPECT_NEAR(out.local_rotation[0], 0.5 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(out.local_rotation[1], -0.5 / std::sqrt(2.0), 1e-15);
}

TEST(Dichotomy, OrthogonalInputRecovers) {
    const auto out = rk::dichotomy_experiment(case_study(vec2(1, 1)));
    EXPECT_EQ(out.verdict, rk::Verdict::recovery);
    EXPECT_TRUE(out.w0_normalized);
    EXPECT_NEAR(out.impulse.norm(), 1.0, 1e-15);
    EXPECT_LT(std::abs(out.coefficients.c_r), 1e-15);
    EXPECT_LT(out.simulated_final_edge_errors.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(out.predicted_edge_errors.cwiseAbs().maxCoeff(), 1e-20);
    // Pure translation: all agents end with the same displacement.
    const Vector first = out.simulated_steady_state.segment(0, 2);
    for (Eigen::Index k = 1; k < 4; ++k) EXPECT_LT((out.simulated_steady_state.segment(2 * k, 2) - first).norm(), 1e-8);
}

TEST(Dichotomy, AlignedInputDistorts) {
    const auto out = rk::dichotomy_experiment(case_study(vec2(1, 0)));
    EXPECT_EQ(out.verdict, rk::Verdict::distortion);
    EXPECT_FALSE(out.w0_normalized);
    EXPECT_NEAR(out.coefficients.c_r, 0.5 / std::sqrt(2.0), 1e-15);
    for (Eigen::Index k = 0; k < out.predicted_edge_errors.size(); ++k) {
        EXPECT_GT(out.predicted_edge_errors[k], 0.0);
        EXPECT_NEAR(out.simulated_final_edge_errors[k], out.predicted_edge_errors[k], 0.01 * out.predicted_edge_errors[k]);
    }
    // c_r^2 ||Ω x||^2 with unit-norm rotational mode: (1/8) * |x|^2 / 2.
    EXPECT_NEAR(out.predicted_edge_errors[0], 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(out.simulated_final_linearized_edge_errors.norm(), 0.0, 1e-8);
}

TEST(Dichotomy, FlexibleFrameworkWithholdsVerdict) {
    rk::SimSettings sim;
    sim.t_end = 5.0;
    sim.stride = 100;
    const rk::Scenario sc{rt::four_cycle(), 1, 1, vec2(0, 1), 1.0, sim, {}};
    const auto out = rk::dichotomy_experiment(sc);
    EXPECT_EQ(out.verdict, rk::Verdict::withheld);
    EXPECT_FALSE(out.warnings.empty());
    EXPECT_GT(out.flex_excitation, 1e-3);
}

TEST(Dichotomy, SpatialFrameworksAreRejected) {
    std::mt19937_64 rng(109);
    const rk::Scenario sc{rt::random_rigid(rng, 5, 3), 0, 0, Vector::Ones(3), 1.0, {}, {}};
    EXPECT_THROW(rk::dichotomy_experiment(sc), std::invalid_argument);
}

TEST(Dichotomy, VerdictMatchesAlignmentSign) {
    std::mt19937_64 rng(113);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = angle(rng);
        const auto out = rk::dichotomy_experiment(case_study(vec2(std::cos(a), std::sin(a)), 1.0), false);
        EXPECT_NEAR(out.alignment, out.coefficients.c_r, 1e-15);
        EXPECT_EQ(out.verdict, std::abs(out.alignment) <= 1e-8 ? rk::Verdict::recovery : rk::Verdict::distortion);
        EXPECT_TRUE(out.trajectory.states.empty());
    }
}

TEST(DichotomySweep, CaseStudyHasTwoRecoveryDirections) {
    const auto rows = rk::dichotomy_sweep(case_study(vec2(1, 0), 5.0), 360, 2);
    ASSERT_EQ(rows.size(), 360u);
    std::vector<std::size_t> zeros;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k > 0) {
            EXPECT_GT(rows[k].angle, rows[k - 1].angle);
        }
        if (std::abs(rows[k].alignment) < 1e-12) zeros.push_back(k);
    }
    EXPECT_EQ(zeros, (std::vector<std::size_t>{45, 225}));
}

TEST(DichotomySweep, DeterministicAcrossWorkerCounts) {
    const auto sc = case_study(vec2(1, 0), 2.0);
    const auto a = rk::dichotomy_sweep(sc, 12, 1);
    const auto b = rk::dichotomy_sweep(sc, 12, 3);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].alignment, b[k].alignment);
        EXPECT_EQ(a[k].max_final_edge_error, b[k].max_final_edge_error);
    }
}

TEST(EdgeErrorSeries, LinearizedAgreesToFirstOrder) {
    auto sc = case_study(vec2(1, 0), 2.0);
    for (double scale : {1e-2, 1e-3}) {
        sc.impulse = scale;
        const auto out = rk::dichotomy_experiment(sc);
        const auto series = rk::edge_error_series(sc.framework, out.trajectory);
        ASSERT_TRUE(series.linearized.has_value());
        double worst = 0.0;
        for (std::size_t k = 0; k < series.exact.size(); ++k)
            worst = std::max(worst, (series.exact[k] - (*series.linearized)[k]).cwiseAbs().maxCoeff());
        // Second-order remainder: |dp|^2 scaling.
        EXPECT_LT(worst, 2.0 * scale * scale);
    }
}

TEST(RigidTransform, PreservesEdgeLengths) {
    std::mt19937_64 rng(127);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto fw = rt::random_framework(rng, 5, 2, 0.7);
        const Vector moved = rk::rigid_transform(fw.positions(), u(rng), vec2(u(rng), u(rng)), vec2(u(rng), u(rng)));
        EXPECT_LT((rk::rigidity_function(fw, moved) - rk::rigidity_function(fw, fw.positions())).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}
