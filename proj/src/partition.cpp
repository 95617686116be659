#include "fedgcv/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

std::vector<int> bfs_distances(const SparseGraph& g, const std::vector<int>& sources) {
    std::vector<int> dist(g.n(), kUnreached);
    std::deque<int> q;
    for (int s : sources) {
        dist[s] = 0;
        q.push_back(s);
    }
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : g.neighbors(u))
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
    }
    return dist;
}

// Edges from `node` into each part; parts indexed 0..K-1, -1 = unassigned.
std::vector<int> part_links(const SparseGraph& g, const std::vector<int>& assign, int node,
                            int num_parts) {
    std::vector<int> links(num_parts, 0);
    for (int v : g.neighbors(node))
        if (assign[v] >= 0) ++links[assign[v]];
    return links;
}

} // namespace

std::vector<int> partition_graph(const SparseGraph& g, int num_parts, std::uint64_t seed) {
    const int n = g.n();
    if (num_parts < 2) fail(ErrorCode::partition, "K must be >= 2");
    if (n < num_parts) fail(ErrorCode::partition, "fewer nodes than parts");

    const double ideal = static_cast<double>(n) / num_parts;
    const int lo = std::max(1, static_cast<int>(std::floor(0.8 * ideal)));
    const int hi = std::max(lo, static_cast<int>(std::ceil(1.2 * ideal)));

    // Farthest-first seeds; unreachable nodes count as infinitely far, so
    // separate components attract seeds before anything else.
    Rng rng(seed_mix(seed, stream_tag("partition")));
    std::vector<int> seeds{rng.uniform_int(n)};
    while (static_cast<int>(seeds.size()) < num_parts) {
        auto dist = bfs_distances(g, seeds);
        int best = -1;
        long long best_d = -1;
        for (int i = 0; i < n; ++i) {
            if (std::find(seeds.begin(), seeds.end(), i) != seeds.end()) continue;
            const long long d = dist[i] == kUnreached ? (1LL << 40) : dist[i];
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        seeds.push_back(best);
    }

    // Multi-source BFS growth: each node joins the part that reaches it first.
    std::vector<int> assign(n, -1);
    std::deque<int> q;
    for (int p = 0; p < num_parts; ++p) {
        assign[seeds[p]] = p;
        q.push_back(seeds[p]);
    }
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : g.neighbors(u))
            if (assign[v] < 0) {
                assign[v] = assign[u];
                q.push_back(v);
            }
    }

    std::vector<int> sizes(num_parts, 0);
    for (int a : assign)
        if (a >= 0) ++sizes[a];

    // Components no seed reached: hand each whole component to the currently
    // smallest part, scanning components by their smallest node id.
    for (int i = 0; i < n; ++i) {
        if (assign[i] >= 0) continue;
        int target = 0;
        for (int p = 1; p < num_parts; ++p)
            if (sizes[p] < sizes[target]) target = p;
        std::deque<int> cq{i};
        assign[i] = target;
        ++sizes[target];
        while (!cq.empty()) {
            const int u = cq.front();
            cq.pop_front();
            for (int v : g.neighbors(u))
                if (assign[v] < 0) {
                    assign[v] = target;
                    ++sizes[target];
                    cq.push_back(v);
                }
        }
    }

    // Balance repair: move boundary nodes from the largest part to the
    // smallest until all sizes are inside [lo, hi].
    for (int guard = 0; guard < n * num_parts; ++guard) {
        int big = 0, small = 0;
        for (int p = 1; p < num_parts; ++p) {
            if (sizes[p] > sizes[big]) big = p;
            if (sizes[p] < sizes[small]) small = p;
        }
        if (sizes[big] <= hi && sizes[small] >= lo) break;
        if (big == small) break;

        // Prefer the donor node with the most links into the receiver.
        int pick = -1, pick_links = -1;
        for (int i = 0; i < n; ++i) {
            if (assign[i] != big) continue;
            int links = 0;
            for (int v : g.neighbors(i))
                if (assign[v] == small) ++links;
            if (links > pick_links) {
                pick_links = links;
                pick = i;
            }
        }
        if (pick < 0) break;
        assign[pick] = small;
        --sizes[big];
        ++sizes[small];
    }

    for (int p = 0; p < num_parts; ++p)
        if (sizes[p] < lo || sizes[p] > hi)
            fail(ErrorCode::partition, "balance within +/-20% of n/K is unreachable");

    // One KL-style boundary pass: strict-gain moves that keep balance.
    for (int i = 0; i < n; ++i) {
        const int own = assign[i];
        if (sizes[own] - 1 < lo) continue;
        auto links = part_links(g, assign, i, num_parts);
        int best_part = own, best_gain = 0;
        for (int p = 0; p < num_parts; ++p) {
            if (p == own || sizes[p] + 1 > hi) continue;
            const int gain = links[p] - links[own];
            if (gain > best_gain) {
                best_gain = gain;
                best_part = p;
            }
        }
        if (best_part != own) {
            assign[i] = best_part;
            --sizes[own];
            ++sizes[best_part];
        }
    }

    return assign;
}

std::int64_t edge_cut(const SparseGraph& g, const std::vector<int>& assignment) {
    std::int64_t cut = 0;
    for (auto [u, v] : g.edges())
        if (assignment[u] != assignment[v]) ++cut;
    return cut;
}

std::vector<int> load_assignment(const std::string& path, int n, int num_parts) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open assignment file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, "malformed assignment JSON: " + std::string(e.what()));
    }
    const nlohmann::json* arr = &j;
    if (j.is_object()) {
        if (j.value("format_version", 0) != 1 || !j.contains("assignment"))
            fail(ErrorCode::parse, "assignment object must carry format_version 1 and assignment");
        arr = &j["assignment"];
    }
    if (!arr->is_array() || static_cast<int>(arr->size()) != n)
        fail(ErrorCode::validation, "assignment must be a length-n integer array");
    std::vector<int> assign(n);
    for (int i = 0; i < n; ++i) {
        assign[i] = (*arr)[i].get<int>();
        if (assign[i] < 0 || assign[i] >= num_parts)
            fail(ErrorCode::validation, "assignment entry out of [0, K) at node " + std::to_string(i));
    }
    return assign;
}

void save_assignment(const std::vector<int>& assignment, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write assignment file: " + path);
    out << "{\"format_version\":1,\"assignment\":[";
    for (std::size_t i = 0; i < assignment.size(); ++i)
        out << (i ? "," : "") << assignment[i];
    out << "]}\n";
}

} // namespace fedgcv
