#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rigidkit/framework.hpp"
#include "rigidkit/subspace.hpp"

namespace rigidkit {

/// Squared edge lengths ||p_i - p_j||^2 in canonical edge order.
inline Vector rigidity_function(const Framework& fw, const Vector& p) {
    if (static_cast<std::size_t>(p.size()) != fw.state_dim())
        throw std::invalid_argument("rigidity_function: configuration length mismatch");
    const auto d = fw.dim();
    Vector r(static_cast<Eigen::Index>(fw.num_edges()));
    for (std::size_t k = 0; k < fw.num_edges(); ++k) {
        const auto& e = fw.edges()[k];
        r[static_cast<Eigen::Index>(k)] = (block(p, e.i, d) - block(p, e.j, d)).squaredNorm();
    }
    return r;
}

/// Jacobian of the rigidity function, kept with its factor 2 so that
/// -R^T R is exactly the stiffness matrix.
struct RigidityMatrix {
    Matrix entries;
    std::uint64_t framework_hash = 0;

    Eigen::Index rows() const noexcept { return entries.rows(); }
    Eigen::Index cols() const noexcept { return entries.cols(); }
};

inline RigidityMatrix rigidity_matrix(const Framework& fw, const Vector& p) {
    if (static_cast<std::size_t>(p.size()) != fw.state_dim())
        throw std::invalid_argument("rigidity_matrix: configuration length mismatch");
    const auto d = static_cast<Eigen::Index>(fw.dim());
    Matrix r = Matrix::Zero(static_cast<Eigen::Index>(fw.num_edges()), p.size());
    for (std::size_t k = 0; k < fw.num_edges(); ++k) {
        const auto& e = fw.edges()[k];
        const Vector x = block(p, e.i, fw.dim()) - block(p, e.j, fw.dim());
        const auto row = static_cast<Eigen::Index>(k);
        r.block(row, static_cast<Eigen::Index>(e.i) * d, 1, d) = 2.0 * x.transpose();
        r.block(row, static_cast<Eigen::Index>(e.j) * d, 1, d) = -2.0 * x.transpose();
    }
    return {std::move(r), fw.hash()};
}

inline RigidityMatrix rigidity_matrix(const Framework& fw) { return rigidity_matrix(fw, fw.positions()); }

/// Elementary generators e_b e_a^T - e_a e_b^T for a < b. For d = 2 this is the
/// single matrix [[0, -1], [1, 0]].
inline std::vector<Matrix> skew_basis(std::size_t d) {
    std::vector<Matrix> out;
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a + 1; b < d; ++b) {
            Matrix w = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
            w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = -1.0;
            out.push_back(std::move(w));
        }
    }
    return out;
}

inline Matrix planar_rotation_generator() { return skew_basis(2).front(); }

/// Stacked motion with block k equal to omega * (p*_k - center).
inline Vector rotation_field(const Framework& fw, const Matrix& omega, const Vector& center) {
    Vector v(static_cast<Eigen::Index>(fw.state_dim()));
    const auto d = static_cast<Eigen::Index>(fw.dim());
    for (std::size_t k = 0; k < fw.num_nodes(); ++k)
        v.segment(static_cast<Eigen::Index>(k) * d, d) = omega * (fw.position(k) - center);
    return v;
}

/// Orthonormal basis of the infinitesimal rigid-body motions.
///
/// Translations are the normalized uniform shifts along each axis. Rotations
/// are the centered fields omega (p*_k - p_cm) for each skew generator,
/// Gram-Schmidt orthonormalized in generator order. For d = 2, `rotation_scale`
/// is the norm of the unnormalized rotation field, so v_r = (omega / scale)(p*_k - p_cm).
struct RbmBasis {
    std::vector<Vector> translations;
    std::vector<Vector> rotations;
    std::vector<double> rotation_scales;
    Vector center;

    Subspace span(double tol = kDefaultSubspaceTol) const {
        Matrix m(translations.front().size(), static_cast<Eigen::Index>(translations.size() + rotations.size()));
        Eigen::Index c = 0;
        for (const auto& t : translations) m.col(c++) = t;
        for (const auto& r : rotations) m.col(c++) = r;
        return Subspace(std::move(m), tol);
    }
};

inline RbmBasis rbm_basis(const Framework& fw) {
    const auto n = fw.num_nodes();
    const auto d = fw.dim();
    const auto nd = static_cast<Eigen::Index>(fw.state_dim());
    RbmBasis out;
    out.center = fw.center_of_mass();
    for (std::size_t a = 0; a < d; ++a) {
        Vector t = Vector::Zero(nd);
        for (std::size_t k = 0; k < n; ++k) t[static_cast<Eigen::Index>(k * d + a)] = 1.0;
        out.translations.push_back(t / std::sqrt(static_cast<double>(n)));
    }
    double scale_ref = 0.0;
    for (std::size_t k = 0; k < n; ++k) scale_ref = std::max(scale_ref, (fw.position(k) - out.center).norm());
    for (const auto& omega : skew_basis(d)) {
        Vector v = rotation_field(fw, omega, out.center);
        for (const auto& prev : out.rotations) v -= prev.dot(v) * prev;
        const double norm = v.norm();
        if (!(norm > 1e-12 * std::max(1.0, scale_ref)))
            throw NumericalError("rbm_basis: degenerate configuration, a centered rotation vanishes");
        out.rotations.push_back(v / norm);
        out.rotation_scales.push_back(norm);
    }
    return out;
}

/// Rank tolerance max(m, nd) * sigma_max * eps unless overridden.
inline double default_rank_tolerance(const Matrix& r, const Vector& singular_values) {
    const double smax = singular_values.size() ? singular_values[0] : 0.0;
    return static_cast<double>(std::max(r.rows(), r.cols())) * smax * std::numeric_limits<double>::epsilon();
}

/// SVD-based view of the four fundamental subspaces of R(p*).
struct RigidityDecomposition {
    Vector singular_values;
    double rank_tolerance = 0.0;
    Eigen::Index rank = 0;
    Subspace flex;          // ker R
    Subspace self_stress;   // ker R^T
    Subspace deformation;   // Im R^T
};

inline RigidityDecomposition decompose(const RigidityMatrix& rm, std::optional<double> rank_tol = std::nullopt,
                                       double subspace_tol = kDefaultSubspaceTol) {
    const Matrix& r = rm.entries;
    const auto m = r.rows();
    const auto nd = r.cols();
    RigidityDecomposition out;
    if (m == 0) {
        out.singular_values = Vector(0);
        out.rank_tolerance = rank_tol.value_or(0.0);
        out.flex = Subspace::whole(nd, subspace_tol);
        out.self_stress = Subspace(Matrix(0, 0), subspace_tol);
        out.deformation = Subspace::zero(nd, subspace_tol);
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.singular_values = svd.singularValues();
    out.rank_tolerance = rank_tol.value_or(default_rank_tolerance(r, out.singular_values));
    while (out.rank < out.singular_values.size() && out.singular_values[out.rank] > out.rank_tolerance) ++out.rank;
    out.flex = Subspace(svd.matrixV().rightCols(nd - out.rank), subspace_tol);
    out.deformation = Subspace(svd.matrixV().leftCols(out.rank), subspace_tol);
    out.self_stress = Subspace(svd.matrixU().rightCols(m - out.rank), subspace_tol);
    return out;
}

inline Subspace flex_space(const RigidityMatrix& rm, std::optional<double> rank_tol = std::nullopt) {
    return decompose(rm, rank_tol).flex;
}

inline Subspace self_stress_space(const RigidityMatrix& rm, std::optional<double> rank_tol = std::nullopt) {
    return decompose(rm, rank_tol).self_stress;
}

inline Subspace deformation_space(const RigidityMatrix& rm, std::optional<double> rank_tol = std::nullopt) {
    return decompose(rm, rank_tol).deformation;
}

enum class RigidityClass { flexible, infinitesimally_rigid, minimally_rigid, rigid_with_redundancy };

inline const char* to_string(RigidityClass c) {
    switch (c) {
        case RigidityClass::flexible: return "flexible";
        case RigidityClass::infinitesimally_rigid: return "infinitesimally_rigid";
        case RigidityClass::minimally_rigid: return "minimally_rigid";
        case RigidityClass::rigid_with_redundancy: return "rigid_with_redundancy";
    }
    return "unknown";
}

inline std::size_t rbm_dimension(std::size_t d) { return d * (d + 1) / 2; }

inline bool is_infinitesimally_rigid(const Framework& fw, std::optional<double> rank_tol = std::nullopt) {
    const auto flex = decompose(rigidity_matrix(fw), rank_tol).flex;
    return static_cast<std::size_t>(flex.dim()) == rbm_dimension(fw.dim());
}

/// Classification by numerical rank. Frameworks with n <= d cannot reach the
/// full rigid-body count and land in `flexible` unless their flex space
/// happens to match d(d+1)/2.
inline RigidityClass classify_rigidity(const Framework& fw, std::optional<double> rank_tol = std::nullopt) {
    const auto dec = decompose(rigidity_matrix(fw), rank_tol);
    const auto d = fw.dim();
    if (static_cast<std::size_t>(dec.flex.dim()) != rbm_dimension(d)) return RigidityClass::flexible;
    const auto nd = fw.state_dim();
    const auto minimal_edges = nd > rbm_dimension(d) ? nd - rbm_dimension(d) : 0;
    if (fw.num_edges() == minimal_edges) return RigidityClass::minimally_rigid;
    if (fw.num_edges() > minimal_edges) return RigidityClass::rigid_with_redundancy;
    return RigidityClass::infinitesimally_rigid;
}

}  // namespace rigidkit
