#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedgcv {

// splitmix64 finalizer; used to derive independent seed streams from
// (seed, tag, indices...) tuples so client/round/component RNGs never alias.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t seed_mix(std::uint64_t a) { return mix64(a); }

template <typename... Rest>
std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return seed_mix(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL), rest...);
}

// FNV-1a over a short tag string, so streams can be named.
inline std::uint64_t stream_tag(const char* tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char* p = tag; *p; ++p) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*p));
        h *= 1099511628211ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    double normal() { return normal_(gen_); }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        return static_cast<int>(std::uniform_int_distribution<std::uint64_t>(
            0, static_cast<std::uint64_t>(n) - 1)(gen_));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // k distinct values from [0, n), ascending
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + uniform_int(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace fedgcv
