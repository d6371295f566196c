#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rigidkit/framework.hpp"
#include "rigidkit/rigidity.hpp"
#include "rigidkit/subspace.hpp"

namespace rigidkit {

inline constexpr double kEigenGroupingRelTol = 1e-7;

/// Linearized gradient formation dynamics about p*:
///   d(dp)/dt = A dp + B dw,  dy = C dp,  A = -R(p*)^T R(p*).
struct LinearizedSystem {
    Matrix R;  // rigidity matrix at p*
    Matrix A;
    Matrix B;  // nd x d, e_i (x) I_d
    Matrix C;  // d x nd, e_j^T (x) I_d
    std::size_t actuator = 0;
    std::size_t sensor = 0;
    std::size_t dim = 2;

    std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(A.rows()) / dim; }
};

inline LinearizedSystem linearize(const Framework& fw, std::size_t actuator, std::size_t sensor) {
    const auto n = fw.num_nodes();
    if (actuator >= n) throw std::out_of_range("linearize: actuator node out of range");
    if (sensor >= n) throw std::out_of_range("linearize: sensor node out of range");
    LinearizedSystem sys;
    sys.R = rigidity_matrix(fw).entries;
    sys.A = -(sys.R.transpose() * sys.R);
    sys.B = selector(n, fw.dim(), actuator);
    sys.C = selector(n, fw.dim(), sensor).transpose();
    sys.actuator = actuator;
    sys.sensor = sensor;
    sys.dim = fw.dim();
    return sys;
}

struct Eigenspace {
    double eigenvalue = 0.0;
    Subspace space;
};

/// Eigenspaces of a symmetric matrix, ascending. Consecutive eigenvalues closer
/// than rel_tol * max|lambda| are merged into one eigenspace.
inline std::vector<Eigenspace> eigenspaces(const Matrix& a, double subspace_tol = kDefaultSubspaceTol,
                                           double rel_tol = kEigenGroupingRelTol) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    const Vector& values = es.eigenvalues();
    const Matrix& vectors = es.eigenvectors();
    const double gap = rel_tol * values.cwiseAbs().maxCoeff();
    std::vector<Eigenspace> out;
    Eigen::Index start = 0;
    for (Eigen::Index k = 1; k <= values.size(); ++k) {
        if (k == values.size() || values[k] - values[k - 1] > gap) {
            const auto count = k - start;
            out.push_back({values.segment(start, count).mean(),
                           orthonormalize(Matrix(vectors.middleCols(start, count)), subspace_tol)});
            start = k;
        }
    }
    return out;
}

/// Part of `s` whose block at `node` vanishes: the null space of the d x r
/// restriction of the block rows to the basis of `s`.
inline Subspace pinned_part(const Subspace& s, std::size_t node, std::size_t d) {
    if (s.empty()) return s;
    const auto rows = static_cast<Eigen::Index>(d);
    const auto first = static_cast<Eigen::Index>(node * d);
    if (first + rows > s.ambient_dim()) throw std::out_of_range("pinned_part: node index out of range");
    const Matrix restricted = s.basis().middleRows(first, rows);
    const Matrix coeffs = null_space(restricted, s.tol());
    return orthonormalize(Matrix(s.basis() * coeffs), s.tol());
}

/// PBH split of one eigenspace by pinning at the actuator and sensor nodes.
struct ModeGroup {
    double eigenvalue = 0.0;
    Subspace eigenspace;
    Subspace uncontrollable;            // E ∩ ker B^T
    Subspace unobservable;              // E ∩ ker C
    Subspace uncontrollable_unobservable;
    Subspace uncontrollable_observable;
    Subspace controllable_unobservable;
    Subspace controllable_observable;
};

inline ModeGroup split_eigenspace(const Eigenspace& e, const LinearizedSystem& sys) {
    ModeGroup g;
    g.eigenvalue = e.eigenvalue;
    g.eigenspace = e.space;
    g.uncontrollable = pinned_part(e.space, sys.actuator, sys.dim);
    g.unobservable = pinned_part(e.space, sys.sensor, sys.dim);
    g.uncontrollable_unobservable = intersect(g.uncontrollable, g.unobservable);
    g.uncontrollable_observable = complement_in(g.uncontrollable, g.uncontrollable_unobservable);
    g.controllable_unobservable = complement_in(g.unobservable, g.uncontrollable_unobservable);
    const Subspace hidden = orthonormalize(hcat(g.uncontrollable.basis(), g.unobservable.basis()), e.space.tol());
    g.controllable_observable = complement_in(e.space, hidden);
    return g;
}

inline std::vector<ModeGroup> pbh_split(const LinearizedSystem& sys, double tol = kDefaultSubspaceTol) {
    std::vector<ModeGroup> out;
    for (const auto& e : eigenspaces(sys.A, tol)) out.push_back(split_eigenspace(e, sys));
    return out;
}

namespace detail {

template <typename Member>
Subspace sum_over_groups(const std::vector<ModeGroup>& groups, Member member, Eigen::Index ambient, double tol) {
    std::vector<Subspace> parts;
    for (const auto& g : groups) parts.push_back(g.*member);
    return direct_sum(parts, ambient, tol);
}

}  // namespace detail

/// ⊕_λ (E_λ ∩ ker B^T).
inline Subspace uncontrollable_subspace(const LinearizedSystem& sys, double tol = kDefaultSubspaceTol) {
    return detail::sum_over_groups(pbh_split(sys, tol), &ModeGroup::uncontrollable, sys.A.rows(), tol);
}

/// ⊕_λ (E_λ ∩ ker C).
inline Subspace unobservable_subspace(const LinearizedSystem& sys, double tol = kDefaultSubspaceTol) {
    return detail::sum_over_groups(pbh_split(sys, tol), &ModeGroup::unobservable, sys.A.rows(), tol);
}

/// Rotations of the whole framework about node i: blocks omega (p*_k - p*_i).
inline Subspace rotational_subspace_Ri(const Framework& fw, std::size_t node, double tol = kDefaultSubspaceTol) {
    if (node >= fw.num_nodes()) throw std::out_of_range("rotational_subspace_Ri: node out of range");
    const auto gens = skew_basis(fw.dim());
    Matrix m(static_cast<Eigen::Index>(fw.state_dim()), static_cast<Eigen::Index>(gens.size()));
    for (std::size_t g = 0; g < gens.size(); ++g)
        m.col(static_cast<Eigen::Index>(g)) = rotation_field(fw, gens[g], fw.position(node));
    Subspace out = orthonormalize(m, tol);
    if (out.empty()) throw NumericalError("rotational_subspace_Ri: every agent coincides with the pivot node");
    return out;
}

/// Motions that fix node i and keep every incident edge length to first order.
/// Built block by block: each neighbour k gets the d-1 directions orthogonal to
/// p*_k - p*_i (for d = 2 the elementary rotation omega (p*_k - p*_i)), every
/// other node except i moves freely.
inline Subspace local_rotational_subspace_Ti(const Framework& fw, std::size_t node, double tol = kDefaultSubspaceTol) {
    if (node >= fw.num_nodes()) throw std::out_of_range("local_rotational_subspace_Ti: node out of range");
    const auto d = static_cast<Eigen::Index>(fw.dim());
    const auto nd = static_cast<Eigen::Index>(fw.state_dim());
    const auto nbrs = fw.neighbors(node);
    std::vector<Vector> cols;
    for (std::size_t k = 0; k < fw.num_nodes(); ++k) {
        if (k == node) continue;
        const auto off = static_cast<Eigen::Index>(k) * d;
        if (std::binary_search(nbrs.begin(), nbrs.end(), k)) {
            const Vector x = fw.position(k) - fw.position(node);
            Matrix dirs;
            if (d == 2) {
                dirs = planar_rotation_generator() * x.normalized();
            } else {
                dirs = null_space(Matrix(x.transpose()), 0.0);
            }
            for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
                Vector v = Vector::Zero(nd);
                v.segment(off, d) = dirs.col(c).normalized();
                cols.push_back(std::move(v));
            }
        } else {
            for (Eigen::Index a = 0; a < d; ++a) {
                Vector v = Vector::Zero(nd);
                v[off + a] = 1.0;
                cols.push_back(std::move(v));
            }
        }
    }
    Matrix m(nd, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
    return Subspace(std::move(m), tol);
}

/// The elementary rotation τ_{i→k} = (e_k ⊗ I_2) Ω (p*_k - p*_i), d = 2 only.
inline Vector elementary_rotation(const Framework& fw, std::size_t node, std::size_t neighbor) {
    if (fw.dim() != 2) throw std::invalid_argument("elementary_rotation: planar frameworks only");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(fw.state_dim()));
    v.segment(static_cast<Eigen::Index>(neighbor * 2), 2) =
        planar_rotation_generator() * (fw.position(neighbor) - fw.position(node));
    return v;
}

/// Constraint matrix [v_i = 0; (p*_k - p*_i)^T v_k = 0 for neighbours k].
inline Matrix local_constraint_matrix(const Framework& fw, std::size_t node) {
    const auto d = static_cast<Eigen::Index>(fw.dim());
    const auto nbrs = fw.neighbors(node);
    Matrix m = Matrix::Zero(d + static_cast<Eigen::Index>(nbrs.size()), static_cast<Eigen::Index>(fw.state_dim()));
    m.block(0, static_cast<Eigen::Index>(node) * d, d, d).setIdentity();
    for (std::size_t r = 0; r < nbrs.size(); ++r) {
        const auto k = nbrs[r];
        m.block(d + static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k) * d, 1, d) =
            (fw.position(k) - fw.position(node)).transpose();
    }
    return m;
}

/// 𝓣ᵢ as the numerical null space of the stacked constraint matrix; the
/// independent route against which the explicit construction is checked.
inline Subspace local_rotational_subspace_constraints(const Framework& fw, std::size_t node,
                                                      double tol = kDefaultSubspaceTol) {
    const Matrix m = local_constraint_matrix(fw, node);
    Eigen::JacobiSVD<Matrix> svd(m);
    const double thr = static_cast<double>(std::max(m.rows(), m.cols())) * svd.singularValues()[0] *
                       std::numeric_limits<double>::epsilon();
    return Subspace(null_space(m, thr), tol);
}

struct Prop2Report {
    Subspace uncontrollable;            // C̄
    Subspace rbm_part;                  // ker R ∩ ker B^T
    Subspace deformation_part;          // C̄ ∩ Im R^T = ⊕_{λ≠0} (E_λ ∩ ker B^T)
    Subspace ambient_deformation_part;  // Im R^T ∩ ker B^T taken in the full space
    bool holds = false;                 // C̄ = rbm_part ⊕ deformation_part
    bool ambient_holds = false;         // C̄ = rbm_part ⊕ ambient_deformation_part
    std::vector<double> angles_sum_vs_uncontrollable;
};

/// Splits C̄ into its rigid-body and deformational components and checks the
/// orthogonal direct sum. The ambient intersection Im R^T ∩ ker B^T is also
/// reported; in general it is strictly larger than the deformational
/// component of C̄.
inline Prop2Report check_prop2_decomposition(const LinearizedSystem& sys, const Framework& fw,
                                             double tol = kDefaultSubspaceTol,
                                             std::optional<double> rank_tol = std::nullopt) {
    Prop2Report rep;
    const auto groups = pbh_split(sys, tol);
    const auto nd = sys.A.rows();
    rep.uncontrollable = detail::sum_over_groups(groups, &ModeGroup::uncontrollable, nd, tol);
    const auto dec = decompose(rigidity_matrix(fw), rank_tol, tol);
    rep.rbm_part = pinned_part(dec.flex, sys.actuator, sys.dim);
    rep.ambient_deformation_part = pinned_part(dec.deformation, sys.actuator, sys.dim);
    std::vector<Subspace> nonzero;
    for (const auto& g : groups)
        if (contains(dec.deformation, g.eigenspace)) nonzero.push_back(g.uncontrollable);
    rep.deformation_part = direct_sum(nonzero, nd, tol);
    rep.holds = direct_sum_check(rep.rbm_part, rep.deformation_part, rep.uncontrollable);
    rep.ambient_holds = direct_sum_check(rep.rbm_part, rep.ambient_deformation_part, rep.uncontrollable);
    const std::vector<Subspace> parts{rep.rbm_part, rep.deformation_part};
    const Subspace sum = direct_sum(parts, nd, tol);
    if (!sum.empty() && !rep.uncontrollable.empty())
        rep.angles_sum_vs_uncontrollable = principal_angles(sum, rep.uncontrollable);
    return rep;
}

struct TheoremReport {
    Eigen::Index dim_uncontrollable = 0;
    Eigen::Index dim_Ti = 0;
    Eigen::Index dim_Ri = 0;
    bool Ti_contains_uncontrollable = false;
    bool uncontrollable_contains_Ti = false;
    bool equal = false;
    bool Ti_contains_Ri = false;
    bool uncontrollable_contains_Ri = false;
    bool Ti_contains_uncontrollable_rbm = false;  // C̄ ∩ E_0 ⊆ 𝓣ᵢ
    std::vector<double> angles_uncontrollable_vs_Ti;
    std::vector<double> angles_uncontrollable_vs_Ri;
    std::vector<double> angles_Ti_vs_Ri;
};

/// Compares C̄ with 𝓣ᵢ and 𝓡ᵢ. Nothing is asserted; verdicts are data.
inline TheoremReport check_unified_theorem(const LinearizedSystem& sys, const Framework& fw,
                                           double tol = kDefaultSubspaceTol,
                                           std::optional<double> rank_tol = std::nullopt) {
    TheoremReport rep;
    const auto cbar = uncontrollable_subspace(sys, tol);
    const auto ti = local_rotational_subspace_Ti(fw, sys.actuator, tol);
    const auto ri = rotational_subspace_Ri(fw, sys.actuator, tol);
    const auto flex = decompose(rigidity_matrix(fw), rank_tol, tol).flex;
    rep.dim_uncontrollable = cbar.dim();
    rep.dim_Ti = ti.dim();
    rep.dim_Ri = ri.dim();
    rep.Ti_contains_uncontrollable = contains(ti, cbar);
    rep.uncontrollable_contains_Ti = contains(cbar, ti);
    rep.equal = rep.Ti_contains_uncontrollable && rep.uncontrollable_contains_Ti;
    rep.Ti_contains_Ri = contains(ti, ri);
    rep.uncontrollable_contains_Ri = contains(cbar, ri);
    rep.Ti_contains_uncontrollable_rbm = contains(ti, intersect(cbar, flex));
    if (!cbar.empty()) {
        rep.angles_uncontrollable_vs_Ti = principal_angles(cbar, ti);
        rep.angles_uncontrollable_vs_Ri = principal_angles(cbar, ri);
    }
    rep.angles_Ti_vs_Ri = principal_angles(ti, ri);
    return rep;
}

struct CorollaryReport {
    bool rigid = false;
    // Infinitesimally rigid case: C̄ vs 𝓡ᵢ ⊕ (𝓣ᵢ ∩ Im Rᵀ).
    Eigen::Index dim_uncontrollable = 0;
    Eigen::Index dim_Ri = 0;
    Eigen::Index dim_Ti_deformation = 0;
    bool rigid_components_orthogonal = false;
    bool rigid_decomposition_holds = false;
    bool rigid_sum_contains_uncontrollable = false;
    bool uncontrollable_contains_rigid_sum = false;
    std::vector<double> angles_rigid_sum_vs_uncontrollable;
    std::string rigid_skip_reason;
    // Complete-graph case: 𝓣ᵢ vs 𝓡ᵢ.
    bool complete_applicable = false;
    std::string complete_skip_reason;
    Eigen::Index dim_Ti = 0;
    bool Ti_equals_Ri = false;
    bool uncontrollable_equals_Ri = false;
    std::vector<double> angles_Ti_vs_Ri;
};

inline CorollaryReport check_corollaries(const Framework& fw, std::size_t node, double tol = kDefaultSubspaceTol,
                                         std::optional<double> rank_tol = std::nullopt) {
    CorollaryReport rep;
    const auto nd = static_cast<Eigen::Index>(fw.state_dim());
    const auto sys = linearize(fw, node, node);
    const auto cbar = uncontrollable_subspace(sys, tol);
    const auto dec = decompose(rigidity_matrix(fw), rank_tol, tol);
    const auto ri = rotational_subspace_Ri(fw, node, tol);
    const auto ti = local_rotational_subspace_Ti(fw, node, tol);
    rep.dim_uncontrollable = cbar.dim();
    rep.dim_Ri = ri.dim();
    rep.dim_Ti = ti.dim();
    rep.rigid = static_cast<std::size_t>(dec.flex.dim()) == rbm_dimension(fw.dim());

    if (rep.rigid) {
        const auto ti_def = intersect(ti, dec.deformation);
        rep.dim_Ti_deformation = ti_def.dim();
        rep.rigid_components_orthogonal = orthogonal(ri, ti_def);
        const std::vector<Subspace> parts{ri, ti_def};
        const auto sum = direct_sum(parts, nd, tol);
        rep.rigid_decomposition_holds = direct_sum_check(ri, ti_def, cbar);
        rep.rigid_sum_contains_uncontrollable = contains(sum, cbar);
        rep.uncontrollable_contains_rigid_sum = contains(cbar, sum);
        if (!cbar.empty()) rep.angles_rigid_sum_vs_uncontrollable = principal_angles(sum, cbar);
    } else {
        rep.rigid_skip_reason = "framework is not infinitesimally rigid";
    }

    if (!fw.is_complete()) {
        rep.complete_skip_reason = "graph is not complete";
    } else if (fw.num_nodes() < fw.dim() + 1) {
        rep.complete_skip_reason = "complete graph needs n >= d + 1";
    } else {
        rep.complete_applicable = true;
        rep.Ti_equals_Ri = contains(ti, ri) && contains(ri, ti);
        rep.uncontrollable_equals_Ri = contains(cbar, ri) && contains(ri, cbar);
        rep.angles_Ti_vs_Ri = principal_angles(ti, ri);
    }
    return rep;
}

/// Four-way controllability/observability classification of the spectrum.
struct ModeReport {
    std::vector<double> eigenvalues;  // ascending, with multiplicity
    std::vector<ModeGroup> groups;
    Subspace uncontrollable;
    Subspace unobservable;
    Eigen::Index dim_controllable_observable = 0;
    Eigen::Index dim_uncontrollable_observable = 0;
    Eigen::Index dim_controllable_unobservable = 0;
    Eigen::Index dim_uncontrollable_unobservable = 0;
    std::size_t actuator = 0;
    std::size_t sensor = 0;
    double tol = kDefaultSubspaceTol;

    Eigen::Index total_dim() const {
        return dim_controllable_observable + dim_uncontrollable_observable + dim_controllable_unobservable +
               dim_uncontrollable_unobservable;
    }
};

inline ModeReport classify_modes(const LinearizedSystem& sys, double tol = kDefaultSubspaceTol) {
    ModeReport rep;
    rep.actuator = sys.actuator;
    rep.sensor = sys.sensor;
    rep.tol = tol;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.A, Eigen::EigenvaluesOnly);
    rep.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    rep.groups = pbh_split(sys, tol);
    const auto nd = sys.A.rows();
    rep.uncontrollable = detail::sum_over_groups(rep.groups, &ModeGroup::uncontrollable, nd, tol);
    rep.unobservable = detail::sum_over_groups(rep.groups, &ModeGroup::unobservable, nd, tol);
    for (const auto& g : rep.groups) {
        rep.dim_controllable_observable += g.controllable_observable.dim();
        rep.dim_uncontrollable_observable += g.uncontrollable_observable.dim();
        rep.dim_controllable_unobservable += g.controllable_unobservable.dim();
        rep.dim_uncontrollable_unobservable += g.uncontrollable_unobservable.dim();
    }
    return rep;
}

}  // namespace rigidkit
