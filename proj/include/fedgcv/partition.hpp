#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedgcv/graph.hpp"

namespace fedgcv {

/*
 * Balanced edge-cut partitioner: farthest-first seeding, multi-source BFS
 * growth, balance repair to within +/-20% of n/K, then one Kernighan-Lin
 * style boundary pass. Deterministic for a fixed (graph, K, seed).
 */
std::vector<int> partition_graph(const SparseGraph& g, int num_parts, std::uint64_t seed);

std::int64_t edge_cut(const SparseGraph& g, const std::vector<int>& assignment);

// Accepts either a bare JSON array or {"format_version":1,"assignment":[...]}.
std::vector<int> load_assignment(const std::string& path, int n, int num_parts);
void save_assignment(const std::vector<int>& assignment, const std::string& path);

} // namespace fedgcv
