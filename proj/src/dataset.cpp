#include "fedgcv/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fedgcv/errors.hpp"

namespace fedgcv {

using nlohmann::json;

int ClientShard::train_count() const { return count_mask(local.train_mask); }

int count_mask(const Mask& m) {
    int c = 0;
    for (auto b : m) c += (b != 0);
    return c;
}

std::vector<int> mask_indices(const Mask& m) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(m.size()); ++i)
        if (m[i]) out.push_back(i);
    return out;
}

namespace {

Mask parse_mask(const json& j, const char* name, int n) {
    if (!j.contains(name) || !j[name].is_array() || static_cast<int>(j[name].size()) != n)
        fail(ErrorCode::validation, std::string(name) + " must be a length-n boolean array");
    Mask m(n, 0);
    for (int i = 0; i < n; ++i) {
        const auto& e = j[name][i];
        if (!e.is_boolean()) fail(ErrorCode::validation, std::string(name) + " entries must be booleans");
        m[i] = e.get<bool>() ? 1 : 0;
    }
    return m;
}

} // namespace

void validate_dataset(const Dataset& ds, bool require_class_coverage) {
    const int n = ds.graph.n();
    if (static_cast<int>(ds.X.rows()) != n)
        fail(ErrorCode::validation, "feature row count does not match node count");
    if (static_cast<int>(ds.y.size()) != n)
        fail(ErrorCode::validation, "label count does not match node count");
    if (ds.num_classes < 1) fail(ErrorCode::validation, "C must be >= 1");
    for (int i = 0; i < n; ++i)
        if (ds.y[i] < 0 || ds.y[i] >= ds.num_classes)
            fail(ErrorCode::validation,
                 "label out of range at node " + std::to_string(i));
    if (static_cast<int>(ds.train_mask.size()) != n ||
        static_cast<int>(ds.val_mask.size()) != n ||
        static_cast<int>(ds.test_mask.size()) != n)
        fail(ErrorCode::validation, "mask length does not match node count");
    for (int i = 0; i < n; ++i) {
        const int hits = (ds.train_mask[i] != 0) + (ds.val_mask[i] != 0) + (ds.test_mask[i] != 0);
        if (hits > 1)
            fail(ErrorCode::validation, "masks overlap at node " + std::to_string(i));
    }
    if (require_class_coverage) {
        std::vector<char> seen(ds.num_classes, 0);
        for (int i = 0; i < n; ++i) seen[ds.y[i]] = 1;
        for (int c = 0; c < ds.num_classes; ++c)
            if (!seen[c])
                fail(ErrorCode::validation, "class " + std::to_string(c) + " has no labeled node");
    }
    if (!ds.X.allFinite()) fail(ErrorCode::validation, "features contain non-finite values");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open dataset file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, "malformed dataset JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || j.value("format_version", 0) != 1)
        fail(ErrorCode::parse, "dataset file must carry format_version 1");

    Dataset ds;
    try {
        const int n = j.at("n").get<int>();
        const int d = j.at("d").get<int>();
        ds.num_classes = j.at("C").get<int>();
        if (n < 1 || d < 1) fail(ErrorCode::validation, "n and d must be >= 1");

        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                fail(ErrorCode::parse, "edges must be [u, v] pairs");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        ds.graph = SparseGraph::from_edges(n, edges);

        const auto& x = j.at("x");
        if (static_cast<int>(x.size()) != n)
            fail(ErrorCode::validation, "feature row count does not match node count");
        ds.X.resize(n, d);
        for (int i = 0; i < n; ++i) {
            const auto& row = x[i];
            if (static_cast<int>(row.size()) != d)
                fail(ErrorCode::validation, "feature row " + std::to_string(i) + " has wrong width");
            for (int f = 0; f < d; ++f) ds.X(i, f) = row[f].get<double>();
        }

        ds.y.resize(n);
        const auto& y = j.at("y");
        if (static_cast<int>(y.size()) != n)
            fail(ErrorCode::validation, "label count does not match node count");
        for (int i = 0; i < n; ++i) ds.y[i] = y[i].get<int>();

        ds.train_mask = parse_mask(j, "train_mask", n);
        ds.val_mask = parse_mask(j, "val_mask", n);
        ds.test_mask = parse_mask(j, "test_mask", n);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, "dataset JSON missing or mistyped field: " + std::string(e.what()));
    }

    validate_dataset(ds, /*require_class_coverage=*/true);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    // Streamed by hand: benchmark-sized feature matrices are too large to
    // build as an in-memory JSON document first.
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write dataset file: " + path);
    const int n = ds.n(), d = ds.d();
    out << "{\"format_version\":1,\"n\":" << n << ",\"d\":" << d
        << ",\"C\":" << ds.num_classes << ",\n\"edges\":[";
    bool first = true;
    for (auto [u, v] : ds.graph.edges()) {
        if (!first) out << ',';
        out << '[' << u << ',' << v << ']';
        first = false;
    }
    out << "],\n\"x\":[";
    char buf[64];
    for (int i = 0; i < n; ++i) {
        out << (i ? ",[" : "[");
        for (int f = 0; f < d; ++f) {
            const double val = ds.X(i, f);
            if (val == static_cast<std::int64_t>(val) && std::abs(val) < 1e15) {
                std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(val));
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", val);
            }
            if (f) out << ',';
            out << buf;
        }
        out << ']';
    }
    out << "],\n\"y\":[";
    for (int i = 0; i < n; ++i) out << (i ? "," : "") << ds.y[i];
    auto write_mask = [&](const char* name, const Mask& m) {
        out << "],\n\"" << name << "\":[";
        for (int i = 0; i < n; ++i) out << (i ? "," : "") << (m[i] ? "true" : "false");
    };
    write_mask("train_mask", ds.train_mask);
    write_mask("val_mask", ds.val_mask);
    write_mask("test_mask", ds.test_mask);
    out << "]}\n";
    if (!out) fail(ErrorCode::io, "write failed: " + path);
}

std::vector<ClientShard> induce_shards(const Dataset& ds, const std::vector<int>& assignment) {
    const int n = ds.n();
    if (static_cast<int>(assignment.size()) != n)
        fail(ErrorCode::validation, "assignment length does not match node count");
    int num_parts = 0;
    for (int a : assignment) {
        if (a < 0) fail(ErrorCode::validation, "negative part id in assignment");
        num_parts = std::max(num_parts, a + 1);
    }

    std::vector<std::vector<int>> members(num_parts);
    for (int i = 0; i < n; ++i) members[assignment[i]].push_back(i);

    std::vector<int> local_of(n, -1);
    std::vector<ClientShard> shards;
    shards.reserve(num_parts);
    for (int p = 0; p < num_parts; ++p) {
        ClientShard s;
        s.client_id = p;
        s.global_ids = members[p]; // already ascending
        const int m = static_cast<int>(members[p].size());
        if (m == 0) fail(ErrorCode::validation, "part " + std::to_string(p) + " is empty");
        for (int i = 0; i < m; ++i) local_of[members[p][i]] = i;

        std::vector<std::pair<int, int>> local_edges;
        for (int gi : members[p])
            for (int gj : ds.graph.neighbors(gi))
                if (gj > gi && assignment[gj] == p)
                    local_edges.emplace_back(local_of[gi], local_of[gj]);

        s.local.graph = SparseGraph::from_edges(m, local_edges);
        s.local.num_classes = ds.num_classes;
        s.local.X.resize(m, ds.d());
        s.local.y.resize(m);
        s.local.train_mask.resize(m);
        s.local.val_mask.resize(m);
        s.local.test_mask.resize(m);
        for (int i = 0; i < m; ++i) {
            const int g = members[p][i];
            s.local.X.row(i) = ds.X.row(g);
            s.local.y[i] = ds.y[g];
            s.local.train_mask[i] = ds.train_mask[g];
            s.local.val_mask[i] = ds.val_mask[g];
            s.local.test_mask[i] = ds.test_mask[g];
        }
        s.ahat = normalized_adjacency(s.local.graph);
        shards.push_back(std::move(s));
    }
    return shards;
}

} // namespace fedgcv
