#include "fedgcv/graph.hpp"

#include <algorithm>
#include <cmath>

#include "fedgcv/errors.hpp"

namespace fedgcv {

SparseGraph SparseGraph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 1) fail(ErrorCode::validation, "graph must have at least one node");
    SparseGraph g;
    g.n_ = n;
    g.edges_.reserve(edges.size());
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
            fail(ErrorCode::validation, "edge endpoint out of range");
        if (u == v)
            fail(ErrorCode::validation, "self-loops are not allowed");
        if (u > v) std::swap(u, v);
        g.edges_.emplace_back(u, v);
    }
    std::sort(g.edges_.begin(), g.edges_.end());
    g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

    std::vector<int> deg(n, 0);
    for (auto [u, v] : g.edges_) {
        ++deg[u];
        ++deg[v];
    }
    g.offsets_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
    g.neighbors_.resize(g.offsets_[n]);
    std::vector<int> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (auto [u, v] : g.edges_) {
        g.neighbors_[cursor[u]++] = v;
        g.neighbors_[cursor[v]++] = u;
    }
    for (int i = 0; i < n; ++i)
        std::sort(g.neighbors_.begin() + g.offsets_[i], g.neighbors_.begin() + g.offsets_[i + 1]);
    return g;
}

bool SparseGraph::has_edge(int u, int v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

SpMat SparseGraph::adjacency() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges_.size() * 2);
    for (auto [u, v] : edges_) {
        trips.emplace_back(u, v, 1.0);
        trips.emplace_back(v, u, 1.0);
    }
    SpMat a(n_, n_);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

SpMat normalized_adjacency(const SparseGraph& g) {
    const int n = g.n();
    std::vector<double> dinv(n);
    for (int i = 0; i < n; ++i) dinv[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.edge_count() * 2 + n);
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, dinv[i] * dinv[i]);
    for (auto [u, v] : g.edges()) {
        const double w = dinv[u] * dinv[v];
        trips.emplace_back(u, v, w);
        trips.emplace_back(v, u, w);
    }
    SpMat a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

SpMat normalized_laplacian(const SparseGraph& g, IsolatedNodePolicy policy) {
    const int n = g.n();
    std::vector<double> dinv(n);
    for (int i = 0; i < n; ++i) {
        const int d = g.degree(i);
        if (d == 0) {
            if (policy == IsolatedNodePolicy::reject)
                fail(ErrorCode::degree_zero, "isolated node " + std::to_string(i) +
                                                 " has no normalized Laplacian row");
            dinv[i] = 0.0;
        } else {
            dinv[i] = 1.0 / std::sqrt(static_cast<double>(d));
        }
    }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.edge_count() * 2 + n);
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
    for (auto [u, v] : g.edges()) {
        const double w = -dinv[u] * dinv[v];
        trips.emplace_back(u, v, w);
        trips.emplace_back(v, u, w);
    }
    SpMat l(n, n);
    l.setFromTriplets(trips.begin(), trips.end());
    return l;
}

} // namespace fedgcv
