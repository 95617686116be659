#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <utility>
#include <vector>

namespace fedgcv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/*
 * Undirected simple graph over nodes [0, n). Edges are stored once as (u, v)
 * with u < v; the CSR adjacency is symmetric and carries no self-loops
 * (self-loops only ever appear in the augmented propagation matrix).
 */
class SparseGraph {
public:
    SparseGraph() = default;

    // Symmetrizes and deduplicates; rejects self-loops and out-of-range ids.
    static SparseGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges);

    int n() const { return n_; }
    std::int64_t edge_count() const { return static_cast<std::int64_t>(edges_.size()); }

    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    int degree(int u) const { return offsets_[u + 1] - offsets_[u]; }

    std::span<const int> neighbors(int u) const {
        return {neighbors_.data() + offsets_[u],
                static_cast<std::size_t>(offsets_[u + 1] - offsets_[u])};
    }

    bool has_edge(int u, int v) const;

    // 0/1 symmetric adjacency, zero diagonal.
    SpMat adjacency() const;

private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_; // u < v, sorted, unique
    std::vector<int> offsets_;               // size n+1
    std::vector<int> neighbors_;             // sorted per row
};

// A_hat = D~^{-1/2} (A + I) D~^{-1/2}; an isolated node gets A_hat[i][i] = 1.
SpMat normalized_adjacency(const SparseGraph& g);

enum class IsolatedNodePolicy {
    identity_row, // D^{-1/2} entry treated as 0; the node's row/col becomes e_i
    reject,       // throw DegreeZeroError
};

// L = I - D^{-1/2} A D^{-1/2}, degrees without self-loops.
SpMat normalized_laplacian(const SparseGraph& g,
                           IsolatedNodePolicy policy = IsolatedNodePolicy::identity_row);

} // namespace fedgcv
