#include <random>

#include <gtest/gtest.h>

#include "rigidkit/rigidity.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

namespace rk = rigidkit;
namespace rt = rigidkit::testing;
using rk::Matrix;
using rk::RigidityClass;
using rk::Vector;

TEST(RigidityMatrix, TriangleEntries) {
    const auto fw = rt::triangle();
    Matrix expected(3, 6);
    // edges (1,2), (1,3), (2,3) with p = (0,0), (1,0), (0,1)
    expected << -2, 0, 2, 0, 0, 0,
                0, -2, 0, 0, 0, 2,
                0, 0, 2, -2, -2, 2;
    EXPECT_EQ(rk::rigidity_matrix(fw).entries, expected);
    EXPECT_EQ(rk::rigidity_matrix(fw).framework_hash, fw.hash());
}

TEST(RigidityMatrix, MatchesFiniteDifferences) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const auto fw = rt::random_framework(rng, 2 + trial % 7, 2 + trial % 2, 0.6);
        const Matrix r = rk::rigidity_matrix(fw).entries;
        const Matrix fd = rt::finite_difference_jacobian(fw, fw.positions());
        if (r.size() == 0) continue;
        EXPECT_LE((r - fd).norm(), 1e-6 * std::max(1.0, r.norm()));
    }
}

TEST(RigidityMatrix, NoEdgesGivesEmptyMatrix) {
    const auto fw = rt::no_edges(3);
    const auto rm = rk::rigidity_matrix(fw);
    EXPECT_EQ(rm.rows(), 0);
    EXPECT_EQ(rm.cols(), 6);
    const auto dec = rk::decompose(rm);
    EXPECT_EQ(dec.rank, 0);
    EXPECT_EQ(dec.flex.dim(), 6);
    EXPECT_EQ(dec.deformation.dim(), 0);
    EXPECT_EQ(rk::classify_rigidity(fw), RigidityClass::flexible);
}

struct ClassCase {
    const char* name;
    rk::Framework fw;
    Eigen::Index rank;
    Eigen::Index self_stress;
    RigidityClass cls;
};

TEST(ClassifyRigidity, ReferenceFrameworks) {
    const std::vector<ClassCase> cases{
        {"triangle", rt::triangle(), 3, 0, RigidityClass::minimally_rigid},
        {"square_with_diagonal", rt::square_with_diagonal(), 5, 0, RigidityClass::minimally_rigid},
        {"four_cycle", rt::four_cycle(), 4, 0, RigidityClass::flexible},
        {"k4", rt::k4_generic(), 5, 1, RigidityClass::rigid_with_redundancy},
        {"single_edge", rt::single_edge(), 1, 0, RigidityClass::minimally_rigid},
        {"collinear_path", rt::collinear_path(), 2, 0, RigidityClass::flexible},
    };
    for (const auto& c : cases) {
        SCOPED_TRACE(c.name);
        const auto dec = rk::decompose(rk::rigidity_matrix(c.fw));
        EXPECT_EQ(dec.rank, c.rank);
        EXPECT_EQ(dec.self_stress.dim(), c.self_stress);
        EXPECT_EQ(rk::classify_rigidity(c.fw), c.cls);
    }
}

TEST(ClassifyRigidity, FourCycleFlexHasOneNontrivialDirection) {
    const auto fw = rt::four_cycle();
    const auto flex = rk::flex_space(rk::rigidity_matrix(fw));
    EXPECT_EQ(flex.dim(), 4);
    const auto rbm = rk::rbm_basis(fw).span();
    EXPECT_TRUE(rk::contains(flex, rbm));
    EXPECT_EQ(rk::complement_in(flex, rbm).dim(), 1);
}

TEST(Decompose, RankAgreesWithQrOracle) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 80; ++trial) {
        const auto fw = rt::random_framework(rng, 3 + trial % 6, 2 + trial % 2, 0.5);
        const auto rm = rk::rigidity_matrix(fw);
        const auto dec = rk::decompose(rm);
        EXPECT_EQ(dec.rank, rt::qr_rank(rm.entries));
    }
}

TEST(Decompose, FundamentalSubspaceInvariants) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 60; ++trial) {
        const auto fw = rt::random_framework(rng, 3 + trial % 6, 2 + trial % 2, 0.6);
        const auto rm = rk::rigidity_matrix(fw);
        const auto dec = rk::decompose(rm);
        const auto nd = static_cast<Eigen::Index>(fw.state_dim());
        const auto m = static_cast<Eigen::Index>(fw.num_edges());
        EXPECT_EQ(dec.rank + dec.flex.dim(), nd);
        EXPECT_EQ(dec.rank + dec.self_stress.dim(), m);
        EXPECT_EQ(dec.deformation.dim(), dec.rank);
        if (m > 0) {
            EXPECT_LT((rm.entries * dec.flex.basis()).norm(), 1e-10 * std::max(1.0, rm.entries.norm()));
            if (dec.self_stress.dim() > 0) {
                EXPECT_LT((rm.entries.transpose() * dec.self_stress.basis()).norm(),
                          1e-10 * std::max(1.0, rm.entries.norm()));
            }
        }
        EXPECT_TRUE(rk::direct_sum_check(dec.flex, dec.deformation, rk::Subspace::whole(nd)));
        // Rigid-body motions are always infinitesimal flexes.
        EXPECT_TRUE(rk::contains(dec.flex, rk::rbm_basis(fw).span()));
    }
}

TEST(Decompose, RankToleranceOverride) {
    const auto rm = rk::rigidity_matrix(rt::square_with_diagonal());
    EXPECT_EQ(rk::decompose(rm).rank, 5);
    EXPECT_EQ(rk::decompose(rm, 1e6).rank, 0);
    EXPECT_EQ(rk::decompose(rm, 1e6).flex.dim(), 8);
}

TEST(RbmBasis, OrthonormalAndAnnihilatedByR) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + trial % 2;
        const auto fw = rt::random_framework(rng, d + 2 + trial % 4, d, 0.7);
        const auto rbm = rk::rbm_basis(fw);
        EXPECT_EQ(rbm.translations.size(), d);
        EXPECT_EQ(rbm.rotations.size(), d * (d - 1) / 2);
        const Matrix q = rbm.span().basis();
        EXPECT_EQ(q.cols(), static_cast<Eigen::Index>(rk::rbm_dimension(d)));
        const auto rm = rk::rigidity_matrix(fw);
        if (rm.rows() > 0) {
            EXPECT_LT((rm.entries * q).norm(), 1e-12 * std::max(1.0, rm.entries.norm()));
        }
    }
}

TEST(RbmBasis, PlanarRotationScale) {
    const auto fw = rt::square_with_diagonal();
    const auto rbm = rk::rbm_basis(fw);
    ASSERT_EQ(rbm.rotations.size(), 1u);
    // Four corners at distance sqrt(1/2) from the centre.
    EXPECT_NEAR(rbm.rotation_scales[0], std::sqrt(2.0), 1e-15);
    const Vector vr = rk::rotation_field(fw, rk::planar_rotation_generator(), rbm.center) / rbm.rotation_scales[0];
    EXPECT_LT((vr - rbm.rotations[0]).norm(), 1e-15);
    EXPECT_EQ(rk::planar_rotation_generator(), (Matrix(2, 2) << 0, -1, 1, 0).finished());
}

TEST(RbmBasis, CoincidentCentreIsNumericalError) {
    EXPECT_THROW(rk::rbm_basis(rt::make_framework(1, 2, {}, {0.3, 0.4})), rk::NumericalError);
}

TEST(SkewBasis, GeneratorsAreSkewAndIndependent) {
    for (std::size_t d = 2; d <= 5; ++d) {
        const auto gens = rk::skew_basis(d);
        ASSERT_EQ(gens.size(), d * (d - 1) / 2);
        Matrix stacked(static_cast<Eigen::Index>(d * d), static_cast<Eigen::Index>(gens.size()));
        for (std::size_t k = 0; k < gens.size(); ++k) {
            EXPECT_EQ(gens[k].transpose(), -gens[k]);
            stacked.col(static_cast<Eigen::Index>(k)) = gens[k].reshaped();
        }
        EXPECT_EQ(rt::qr_rank(stacked), static_cast<Eigen::Index>(gens.size()));
    }
}

TEST(IsInfinitesimallyRigid, HennebergGrowthIsRigid) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + trial % 2;
        const auto fw = rt::random_rigid(rng, d + 1 + trial % 6, d, trial % 3);
        EXPECT_TRUE(rk::is_infinitesimally_rigid(fw));
        EXPECT_NE(rk::classify_rigidity(fw), RigidityClass::flexible);
    }
}
