#pragma once

#include <cstdint>
#include <string>

#include "fedgcv/dataset.hpp"

namespace fedgcv {

/*
 * Deterministic synthetic benchmark generator. Each named dataset matches the
 * published node/feature/class/edge counts of its namesake citation or
 * crowdsourcing graph and is built from a homophilous class-structured edge
 * model plus a per-class bag-of-words feature model, with stratified
 * 20/20/60 train/val/test splits. `seed = 0` selects the canonical seed for
 * the name, so files regenerate byte-identically.
 */
Dataset generate_benchmark(const std::string& name, std::uint64_t seed = 0);

struct BenchmarkSpec {
    int n = 0, d = 0, num_classes = 0;
    std::int64_t edges = 0;
    double homophily = 0.8;       // same-class endpoint probability
    double class_word_rate = 0.8; // word drawn from the class topic vs anywhere
    int words_per_node = 18;
    int class_words = 160;        // topic vocabulary per class
    // Per-node rare identifier words and observed-label noise: the noise caps
    // attainable test accuracy while the identifiers keep noisy train nodes
    // memorizable, the regime loss-threshold membership inference needs.
    int id_words = 3;
    double label_noise = 0.0;
    bool binary_features = true;
    std::uint64_t canonical_seed = 0;
};

BenchmarkSpec benchmark_spec(const std::string& name);

Dataset generate_from_spec(const BenchmarkSpec& spec, std::uint64_t seed);

} // namespace fedgcv
