#include "fedgcv/federation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

std::vector<double> compute_weights(const std::vector<ClientShard>& shards, WeightRule rule) {
    if (shards.empty()) fail(ErrorCode::validation, "no shards to weight");
    std::vector<double> w(shards.size());
    if (rule == WeightRule::uniform) {
        std::fill(w.begin(), w.end(), 1.0 / shards.size());
        return w;
    }
    double total = 0.0;
    for (const auto& s : shards) total += s.n();
    for (std::size_t i = 0; i < shards.size(); ++i) w[i] = shards[i].n() / total;
    return w;
}

ParamVector aggregate_params(const std::vector<ParamVector>& updates,
                             const std::vector<double>& weights) {
    if (updates.empty() || updates.size() != weights.size())
        fail(ErrorCode::validation, "updates and weights must be non-empty and aligned");
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) fail(ErrorCode::validation, "weights must sum to a positive value");

    // Anchored form of the weighted mean: base + sum_i p_i (u_i - base).
    // Identical updates aggregate to themselves bit-exactly (the FedAvg
    // fixed point), which a direct weighted sum cannot guarantee.
    const ParamVector& base = updates[0];
    ParamVector acc = zeros_like(base.shape);
    for (std::size_t i = 0; i < updates.size(); ++i) {
        if (!(updates[i].shape == base.shape))
            fail(ErrorCode::shape, "client update shapes disagree");
        acc.v += (weights[i] / total) * (updates[i].v - base.v);
    }
    acc.v += base.v;
    return acc;
}

std::uint64_t client_round_seed(std::uint64_t seed, int client_id, int round,
                                const char* stage) {
    return seed_mix(seed, stream_tag(stage), static_cast<std::uint64_t>(client_id),
                    static_cast<std::uint64_t>(round));
}

namespace {

std::vector<int> sample_participants(std::size_t count, double participation,
                                     std::uint64_t seed, int round) {
    std::vector<int> all(count);
    std::iota(all.begin(), all.end(), 0);
    if (participation >= 1.0) return all;
    const int take = std::max(1, static_cast<int>(participation * count));
    Rng rng(seed_mix(seed, stream_tag("participation"), static_cast<std::uint64_t>(round)));
    return rng.sample_without_replacement(static_cast<int>(count), take);
}

RoundMetrics evaluate_round(const ParamVector& global, const std::vector<ClientShard>& shards,
                            int round) {
    RoundMetrics m;
    m.round = round;
    m.global_norm = global.norm();
    const GcnParams p = unflatten(global);
    long tr_c = 0, tr_t = 0, va_c = 0, va_t = 0, te_c = 0, te_t = 0;
    for (const auto& s : shards) {
        const Matrix logits = gcn_forward(p, s.ahat, s.local.X, std::nullopt, 0.0);
        for (int i = 0; i < s.n(); ++i) {
            int best = 0;
            for (int c = 1; c < logits.cols(); ++c)
                if (logits(i, c) > logits(i, best)) best = c;
            const bool ok = best == s.local.y[i];
            if (s.local.train_mask[i]) { ++tr_t; tr_c += ok; }
            if (s.local.val_mask[i]) { ++va_t; va_c += ok; }
            if (s.local.test_mask[i]) { ++te_t; te_c += ok; }
        }
    }
    m.train_acc = tr_t ? static_cast<double>(tr_c) / tr_t : 0.0;
    m.val_acc = va_t ? static_cast<double>(va_c) / va_t : 0.0;
    m.test_acc = te_t ? static_cast<double>(te_c) / te_t : 0.0;
    return m;
}

} // namespace

void fed_round(ServerState& state, const FedConfig& cfg, const char* stage) {
    auto participants =
        sample_participants(state.shards.size(), cfg.participation, cfg.seed, state.round);
    // Canonical client-id order: the aggregation sum is bit-identical no
    // matter how the shard list is arranged or scheduled.
    std::sort(participants.begin(), participants.end(), [&](int a, int b) {
        return state.shards[a].client_id < state.shards[b].client_id;
    });

    std::vector<ParamVector> updates;
    std::vector<double> weights;
    updates.reserve(participants.size());
    for (int idx : participants) {
        const ClientShard& shard = state.shards[idx];
        TrainConfig local = cfg.local;
        local.seed = client_round_seed(cfg.seed, shard.client_id, state.round, stage);
        auto result = local_train(shard, state.global, local);
        updates.push_back(std::move(result.params));
        weights.push_back(state.weights[idx]);
    }
    state.global = aggregate_params(updates, weights);
    state.round += 1;
    state.history.push_back(evaluate_round(state.global, state.shards, state.round));
}

FedRunResult run_federated(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& cfg) {
    if (cfg.rounds < 0) fail(ErrorCode::validation, "rounds must be >= 0");
    ServerState state;
    state.shards = induce_shards(ds, assignment);
    state.weights = compute_weights(state.shards, cfg.weight_rule);
    state.global =
        flatten(glorot_init(ds.d(), cfg.hidden, ds.num_classes, seed_mix(cfg.seed, stream_tag("init"))));
    for (int r = 0; r < cfg.rounds; ++r) fed_round(state, cfg, "train");
    ParamVector trained = state.global;
    return {std::move(state), std::move(trained)};
}

ServerState run_federated_over_shards(std::vector<ClientShard> shards, const ParamVector& start,
                                      int rounds, const FedConfig& cfg, const char* stage) {
    ServerState state;
    state.shards = std::move(shards);
    state.weights = compute_weights(state.shards, cfg.weight_rule);
    state.global = start;
    for (int r = 0; r < rounds; ++r) fed_round(state, cfg, stage);
    return state;
}

double global_accuracy(const ParamVector& params, const std::vector<ClientShard>& shards,
                       Split split) {
    const GcnParams p = unflatten(params);
    long correct = 0, total = 0;
    for (const auto& s : shards) {
        const Mask& mask = split == Split::train  ? s.local.train_mask
                           : split == Split::val ? s.local.val_mask
                                                 : s.local.test_mask;
        if (count_mask(mask) == 0) continue;
        const Matrix logits = gcn_forward(p, s.ahat, s.local.X, std::nullopt, 0.0);
        for (int i = 0; i < s.n(); ++i) {
            if (!mask[i]) continue;
            int best = 0;
            for (int c = 1; c < logits.cols(); ++c)
                if (logits(i, c) > logits(i, best)) best = c;
            ++total;
            correct += (best == s.local.y[i]);
        }
    }
    if (total == 0) fail(ErrorCode::empty_split, "no nodes in the requested split");
    return static_cast<double>(correct) / total;
}

std::string history_jsonl(const std::vector<RoundMetrics>& history) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& m : history) {
        out << "{\"round\": " << m.round << ", \"train_acc\": " << m.train_acc
            << ", \"val_acc\": " << m.val_acc << ", \"test_acc\": " << m.test_acc
            << ", \"global_norm\": " << m.global_norm << "}\n";
    }
    return out.str();
}

} // namespace fedgcv
