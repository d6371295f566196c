#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rigidkit/errors.hpp"

namespace rigidkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Undirected edge between two agents, stored 0-based with i < j.
struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Returns the d entries belonging to agent `node` of a stacked vector.
inline Vector block(const Vector& v, std::size_t node, std::size_t d) {
    if (d == 0 || v.size() % static_cast<Eigen::Index>(d) != 0)
        throw std::invalid_argument("block: vector length is not a multiple of d");
    const auto n = static_cast<std::size_t>(v.size()) / d;
    if (node >= n) throw std::out_of_range("block: node index out of range");
    return v.segment(static_cast<Eigen::Index>(node * d), static_cast<Eigen::Index>(d));
}

/// A graph together with a reference configuration p* in R^{nd}.
///
/// Edges are canonicalized on construction: each pair is oriented i < j and the
/// list is sorted lexicographically. That order fixes the row order of every
/// edge-indexed vector or matrix in the library. Instances are immutable.
class Framework {
public:
    /// Validates and canonicalizes. `edges` may use either orientation; node
    /// indices are 0-based. Throws ValidationError naming the failing field.
    Framework(std::size_t n, std::size_t d, std::vector<Edge> edges, Vector positions)
        : n_(n), d_(d), edges_(std::move(edges)), positions_(std::move(positions)) {
        if (n_ == 0) throw ValidationError("n", "must be positive");
        if (d_ < 2) throw ValidationError("d", "must be at least 2");
        if (static_cast<std::size_t>(positions_.size()) != n_ * d_)
            throw ValidationError("positions", "positions length " + std::to_string(positions_.size()) +
                                                   " does not equal n*d = " + std::to_string(n_ * d_));
        if (!positions_.allFinite()) throw ValidationError("positions", "non-finite coordinate");
        for (auto& e : edges_) {
            if (e.i >= n_ || e.j >= n_) throw ValidationError("edges", "node index out of range");
            if (e.i == e.j) throw ValidationError("edges", "self-loop at node " + std::to_string(e.i + 1));
            if (e.i > e.j) std::swap(e.i, e.j);
        }
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw ValidationError("edges", "duplicate edge");
        for (const auto& e : edges_) {
            if ((position(e.i) - position(e.j)).squaredNorm() == 0.0)
                throw ValidationError("positions", "zero-length edge (" + std::to_string(e.i + 1) + "," +
                                                       std::to_string(e.j + 1) + ")");
        }
    }

    std::size_t num_nodes() const noexcept { return n_; }
    std::size_t dim() const noexcept { return d_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    std::size_t state_dim() const noexcept { return n_ * d_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Vector& positions() const noexcept { return positions_; }

    Vector position(std::size_t node) const { return block(positions_, node, d_); }

    /// p*_i - p*_j for edge k = (i, j) in canonical orientation.
    Vector edge_vector(std::size_t k) const {
        if (k >= edges_.size()) throw std::out_of_range("edge_vector: edge index out of range");
        return position(edges_[k].i) - position(edges_[k].j);
    }

    std::vector<std::size_t> neighbors(std::size_t node) const {
        std::vector<std::size_t> out;
        for (const auto& e : edges_) {
            if (e.i == node) out.push_back(e.j);
            if (e.j == node) out.push_back(e.i);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t degree(std::size_t node) const { return neighbors(node).size(); }

    bool is_complete() const noexcept { return edges_.size() == n_ * (n_ - 1) / 2; }

    Vector center_of_mass() const {
        Vector c = Vector::Zero(static_cast<Eigen::Index>(d_));
        for (std::size_t k = 0; k < n_; ++k) c += position(k);
        return c / static_cast<double>(n_);
    }

    // FNV-1a over the canonical edge list and the raw position bits.
    std::uint64_t hash() const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint64_t x) {
            for (int b = 0; b < 8; ++b) {
                h ^= (x >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        };
        mix(n_);
        mix(d_);
        for (const auto& e : edges_) {
            mix(e.i);
            mix(e.j);
        }
        for (Eigen::Index k = 0; k < positions_.size(); ++k) {
            std::uint64_t bits = 0;
            const double x = positions_[k];
            std::memcpy(&bits, &x, sizeof bits);
            mix(bits);
        }
        return h;
    }

    /// Same graph, different reference configuration.
    Framework with_positions(Vector positions) const { return Framework(n_, d_, edges_, std::move(positions)); }

private:
    std::size_t n_;
    std::size_t d_;
    std::vector<Edge> edges_;
    Vector positions_;
};

inline Vector edge_vector(const Framework& fw, std::size_t k) { return fw.edge_vector(k); }

/// Input selector e_i (x) I_d as an nd x d matrix.
inline Matrix selector(std::size_t n, std::size_t d, std::size_t node) {
    if (node >= n) throw std::out_of_range("selector: node index out of range");
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n * d), static_cast<Eigen::Index>(d));
    s.block(static_cast<Eigen::Index>(node * d), 0, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))
        .setIdentity();
    return s;
}

}  // namespace rigidkit
