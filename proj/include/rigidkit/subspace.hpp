#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rigidkit/framework.hpp"

namespace rigidkit {

inline constexpr double kDefaultSubspaceTol = 1e-8;

/// A linear subspace held as an orthonormal basis (ambient x r) with the
/// tolerance used when comparing it against other subspaces.
class Subspace {
public:
    Subspace() = default;

    /// `basis` must already have orthonormal columns.
    Subspace(Matrix basis, double tol = kDefaultSubspaceTol) : basis_(std::move(basis)), tol_(tol) {}

    static Subspace zero(Eigen::Index ambient, double tol = kDefaultSubspaceTol) {
        return Subspace(Matrix(ambient, 0), tol);
    }

    static Subspace whole(Eigen::Index ambient, double tol = kDefaultSubspaceTol) {
        return Subspace(Matrix::Identity(ambient, ambient), tol);
    }

    const Matrix& basis() const noexcept { return basis_; }
    Eigen::Index dim() const noexcept { return basis_.cols(); }
    Eigen::Index ambient_dim() const noexcept { return basis_.rows(); }
    double tol() const noexcept { return tol_; }
    bool empty() const noexcept { return basis_.cols() == 0; }

    Vector vector(Eigen::Index k) const { return basis_.col(k); }

private:
    Matrix basis_;
    double tol_ = kDefaultSubspaceTol;
};

/// Side-by-side concatenation; either operand may have zero columns.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("hcat: row count mismatch");
    Matrix out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

namespace detail {

inline void require_same_ambient(const Subspace& a, const Subspace& b, const char* op) {
    if (a.ambient_dim() != b.ambient_dim())
        throw std::invalid_argument(std::string(op) + ": ambient dimension mismatch");
}

// Left singular vectors of `m` whose singular value exceeds `threshold`.
inline Matrix range_basis(const Matrix& m, double threshold) {
    if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s[r] > threshold) ++r;
    return svd.matrixU().leftCols(r);
}

}  // namespace detail

/// Null space of `m` (columns of V whose singular value is <= threshold, plus
/// the directions beyond rank when m is wide).
inline Matrix null_space(const Matrix& m, double threshold) {
    const auto cols = m.cols();
    if (cols == 0) return Matrix(0, 0);
    if (m.rows() == 0) return Matrix::Identity(cols, cols);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s[r] > threshold) ++r;
    return svd.matrixV().rightCols(cols - r);
}

/// Orthonormal basis of the span of the columns of `vectors`. Directions whose
/// singular value falls below tol * max(1, sigma_max) are dropped.
inline Subspace orthonormalize(const Matrix& vectors, double tol = kDefaultSubspaceTol) {
    if (vectors.cols() == 0) return Subspace::zero(vectors.rows(), tol);
    Eigen::JacobiSVD<Matrix> svd(vectors, Eigen::ComputeThinU);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    return Subspace(detail::range_basis(vectors, tol * std::max(1.0, smax)), tol);
}

inline Subspace orthonormalize(std::span<const Vector> vectors, Eigen::Index ambient, double tol = kDefaultSubspaceTol) {
    Matrix m(ambient, static_cast<Eigen::Index>(vectors.size()));
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (vectors[k].size() != ambient) throw std::invalid_argument("orthonormalize: vector length mismatch");
        m.col(static_cast<Eigen::Index>(k)) = vectors[k];
    }
    return orthonormalize(m, tol);
}

/// Orthogonal projection of v onto S.
inline Vector project(const Subspace& s, const Vector& v) {
    if (v.size() != s.ambient_dim()) throw std::invalid_argument("project: dimension mismatch");
    if (s.empty()) return Vector::Zero(v.size());
    return s.basis() * (s.basis().transpose() * v);
}

inline Matrix projector(const Subspace& s) {
    if (s.empty()) return Matrix::Zero(s.ambient_dim(), s.ambient_dim());
    return s.basis() * s.basis().transpose();
}

/// Principal angles in ascending order, min(dim S1, dim S2) of them.
///
/// Cosines come from the singular values of Q1^T Q2. Angles below pi/4 are
/// taken from the sines, i.e. the singular values of (I - Q1 Q1^T) Q2 with Q1
/// the larger basis; arccos alone loses half the digits near zero.
inline std::vector<double> principal_angles(const Subspace& s1, const Subspace& s2) {
    detail::require_same_ambient(s1, s2, "principal_angles");
    if (s1.empty() || s2.empty()) throw std::invalid_argument("principal_angles: zero-dimensional operand");
    const Matrix& big = s1.dim() >= s2.dim() ? s1.basis() : s2.basis();
    const Matrix& small = s1.dim() >= s2.dim() ? s2.basis() : s1.basis();
    const Matrix cross = big.transpose() * small;
    const Vector cosines = Eigen::JacobiSVD<Matrix>(cross).singularValues();  // descending
    const Matrix residual = small - big * cross;
    Vector sines = Eigen::JacobiSVD<Matrix>(residual).singularValues();       // descending
    std::reverse(sines.data(), sines.data() + sines.size());                  // ascending
    std::vector<double> angles(static_cast<std::size_t>(small.cols()));
    for (Eigen::Index k = 0; k < small.cols(); ++k) {
        const double c = std::clamp(cosines[k], -1.0, 1.0);
        const double s = std::clamp(sines[k], 0.0, 1.0);
        angles[static_cast<std::size_t>(k)] = c * c > 0.5 ? std::asin(s) : std::acos(c);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

inline double max_principal_angle(const Subspace& s1, const Subspace& s2) {
    if (s1.empty() || s2.empty()) return 0.0;
    const auto a = principal_angles(s1, s2);
    return a.back();
}

/// S1 ∩ S2: the principal vectors of the smaller operand whose distance to the
/// other operand (sine of the principal angle) is at most the tolerance.
inline Subspace intersect(const Subspace& s1, const Subspace& s2) {
    detail::require_same_ambient(s1, s2, "intersect");
    const double tol = std::max(s1.tol(), s2.tol());
    if (s1.empty() || s2.empty()) return Subspace::zero(s1.ambient_dim(), tol);
    const Matrix& big = s1.dim() >= s2.dim() ? s1.basis() : s2.basis();
    const Matrix& small = s1.dim() >= s2.dim() ? s2.basis() : s1.basis();
    const Matrix residual = small - big * (big.transpose() * small);
    const Matrix coeffs = null_space(residual, tol);
    return orthonormalize(Matrix(small * coeffs), tol);
}

/// True iff every basis vector of `inner` lies in `outer` up to the tolerance.
inline bool contains(const Subspace& outer, const Subspace& inner) {
    detail::require_same_ambient(outer, inner, "contains");
    const double tol = std::max(outer.tol(), inner.tol());
    for (Eigen::Index k = 0; k < inner.dim(); ++k) {
        const Vector v = inner.basis().col(k);
        if ((v - project(outer, v)).norm() > tol) return false;
    }
    return true;
}

/// Largest |<u, v>| over unit vectors u in S1, v in S2 (cosine of the smallest
/// principal angle). Zero when either is trivial.
inline double overlap(const Subspace& s1, const Subspace& s2) {
    detail::require_same_ambient(s1, s2, "overlap");
    if (s1.empty() || s2.empty()) return 0.0;
    return Eigen::JacobiSVD<Matrix>(Matrix(s1.basis().transpose() * s2.basis())).singularValues()[0];
}

inline bool orthogonal(const Subspace& s1, const Subspace& s2) {
    return overlap(s1, s2) <= std::max(s1.tol(), s2.tol());
}

/// S1 ⊕ S2 = whole as an orthogonal direct sum.
inline bool direct_sum_check(const Subspace& s1, const Subspace& s2, const Subspace& whole) {
    detail::require_same_ambient(s1, s2, "direct_sum_check");
    detail::require_same_ambient(s1, whole, "direct_sum_check");
    return orthogonal(s1, s2) && s1.dim() + s2.dim() == whole.dim() && contains(whole, s1) && contains(whole, s2);
}

/// Orthogonal direct sum of mutually orthogonal subspaces.
inline Subspace direct_sum(std::span<const Subspace> parts, Eigen::Index ambient, double tol = kDefaultSubspaceTol) {
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.dim();
    Matrix m(ambient, total);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        if (p.ambient_dim() != ambient) throw std::invalid_argument("direct_sum: ambient dimension mismatch");
        m.middleCols(c, p.dim()) = p.basis();
        c += p.dim();
    }
    return orthonormalize(m, tol);
}

/// Orthogonal complement of `inner` inside `outer` (inner assumed contained).
inline Subspace complement_in(const Subspace& outer, const Subspace& inner) {
    detail::require_same_ambient(outer, inner, "complement_in");
    const double tol = std::max(outer.tol(), inner.tol());
    if (inner.empty()) return Subspace(outer.basis(), tol);
    const Matrix coeffs = null_space(Matrix(inner.basis().transpose() * outer.basis()), tol);
    return orthonormalize(Matrix(outer.basis() * coeffs), tol);
}

}  // namespace rigidkit
