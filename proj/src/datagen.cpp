#include "fedgcv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

BenchmarkSpec benchmark_spec(const std::string& name) {
    BenchmarkSpec s;
    if (name == "cora") {
        s = {2708, 1433, 7, 5429, 0.81, 0.80, 18, 160, 3, 0.14, true, 11};
    } else if (name == "citeseer") {
        s = {3327, 3703, 6, 4732, 0.74, 0.80, 32, 380, 3, 0.22, true, 12};
    } else if (name == "pubmed") {
        s = {19717, 500, 3, 44338, 0.80, 0.72, 50, 120, 2, 0.10, false, 13};
    } else if (name == "tolokers") {
        s = {8000, 500, 2, 40000, 0.60, 0.70, 40, 150, 2, 0.18, false, 14};
    } else if (name == "toy") {
        s = {48, 16, 3, 96, 0.85, 0.85, 5, 5, 1, 0.05, true, 15};
    } else {
        fail(ErrorCode::validation, "unknown benchmark name: " + name);
    }
    return s;
}

Dataset generate_benchmark(const std::string& name, std::uint64_t seed) {
    const BenchmarkSpec spec = benchmark_spec(name);
    return generate_from_spec(spec, seed ? seed : spec.canonical_seed);
}

Dataset generate_from_spec(const BenchmarkSpec& spec, std::uint64_t seed) {
    const int n = spec.n, d = spec.d, C = spec.num_classes;
    Rng rng(seed_mix(seed, stream_tag("datagen")));

    // Latent classes: uneven sizes, shuffled over nodes. Edges and topic
    // words follow the latent class; the observed label may be flipped.
    std::vector<int> y(n);
    {
        std::vector<double> props(C);
        double total = 0.0;
        for (int c = 0; c < C; ++c) {
            props[c] = 1.0 + 0.6 * std::cos(1.7 * c); // mild imbalance
            total += props[c];
        }
        int filled = 0;
        for (int c = 0; c < C; ++c) {
            int cnt = (c + 1 == C) ? n - filled
                                   : std::max(1, static_cast<int>(std::round(n * props[c] / total)));
            cnt = std::min(cnt, n - filled);
            for (int i = 0; i < cnt; ++i) y[filled++] = c;
        }
        while (filled < n) y[filled++] = C - 1;
        rng.shuffle(y);
    }
    std::vector<std::vector<int>> by_class(C);
    for (int i = 0; i < n; ++i) by_class[y[i]].push_back(i);

    // Homophilous edges up to the target count.
    std::set<std::pair<int, int>> edge_set;
    std::int64_t guard = spec.edges * 60;
    while (static_cast<std::int64_t>(edge_set.size()) < spec.edges && guard-- > 0) {
        const int u = rng.uniform_int(n);
        int v;
        if (rng.bernoulli(spec.homophily)) {
            const auto& pool = by_class[y[u]];
            v = pool[rng.uniform_int(static_cast<int>(pool.size()))];
        } else {
            v = rng.uniform_int(n);
        }
        if (u == v) continue;
        edge_set.emplace(std::min(u, v), std::max(u, v));
    }
    std::vector<std::pair<int, int>> edges(edge_set.begin(), edge_set.end());

    Dataset ds;
    ds.graph = SparseGraph::from_edges(n, edges);
    ds.num_classes = C;
    ds.y = y;

    // Per-class topic vocabularies; nodes draw most words from their topic.
    std::vector<std::vector<int>> topics(C);
    for (int c = 0; c < C; ++c) {
        Rng trng(seed_mix(seed, stream_tag("topics"), static_cast<std::uint64_t>(c)));
        topics[c] = trng.sample_without_replacement(d, std::min(spec.class_words, d));
    }
    ds.X = Matrix::Zero(n, d);
    for (int i = 0; i < n; ++i) {
        const auto& topic = topics[y[i]];
        int words = std::max(1, spec.words_per_node +
                                    static_cast<int>(std::round(3.0 * rng.normal())));
        words = std::min(words, d);
        for (int w = 0; w < words; ++w) {
            const int f = rng.bernoulli(spec.class_word_rate)
                              ? topic[rng.uniform_int(static_cast<int>(topic.size()))]
                              : rng.uniform_int(d);
            if (spec.binary_features)
                ds.X(i, f) = 1.0;
            else
                ds.X(i, f) += 0.25 + 0.75 * rng.uniform();
        }
        // node-specific rare words
        Rng idrng(seed_mix(seed, stream_tag("idwords"), static_cast<std::uint64_t>(i)));
        for (int w = 0; w < spec.id_words; ++w) {
            const int f = idrng.uniform_int(d);
            if (spec.binary_features)
                ds.X(i, f) = 1.0;
            else
                ds.X(i, f) += 1.0;
        }
    }

    // Observed-label noise after structure and features are fixed.
    if (spec.label_noise > 0.0) {
        Rng nrng(seed_mix(seed, stream_tag("labelnoise")));
        for (int i = 0; i < n; ++i)
            if (nrng.bernoulli(spec.label_noise)) {
                const int shift = 1 + nrng.uniform_int(C - 1);
                ds.y[i] = (ds.y[i] + shift) % C;
            }
    }

    // Stratified 20/20/60 split per class.
    ds.train_mask.assign(n, 0);
    ds.val_mask.assign(n, 0);
    ds.test_mask.assign(n, 0);
    for (int c = 0; c < C; ++c) {
        auto nodes = by_class[c];
        rng.shuffle(nodes);
        const int m = static_cast<int>(nodes.size());
        const int n_train = std::max(1, static_cast<int>(std::round(0.2 * m)));
        const int n_val = std::max(1, static_cast<int>(std::round(0.2 * m)));
        for (int i = 0; i < m; ++i) {
            if (i < n_train)
                ds.train_mask[nodes[i]] = 1;
            else if (i < n_train + n_val)
                ds.val_mask[nodes[i]] = 1;
            else
                ds.test_mask[nodes[i]] = 1;
        }
    }

    validate_dataset(ds, /*require_class_coverage=*/true);
    return ds;
}

} // namespace fedgcv
