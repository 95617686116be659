#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedgcv/nn.hpp"

namespace fedgcv {

enum class WeightRule { by_node_count, uniform };

struct FedConfig {
    int rounds = 30;
    int num_clients = 10;
    double participation = 1.0; // fraction of clients sampled per round
    TrainConfig local;          // local.seed is ignored; per-client seeds are derived
    WeightRule weight_rule = WeightRule::by_node_count;
    std::uint64_t seed = 2025;
    int hidden = 64;
};

struct RoundMetrics {
    int round = 0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double global_norm = 0.0;
};

struct ServerState {
    ParamVector global;
    int round = 0;
    std::vector<ClientShard> shards;
    std::vector<double> weights; // simplex over shards
    std::vector<RoundMetrics> history;
};

std::vector<double> compute_weights(const std::vector<ClientShard>& shards, WeightRule rule);

// Order-fixed weighted sum; weights renormalized over the given subset.
ParamVector aggregate_params(const std::vector<ParamVector>& updates,
                             const std::vector<double>& weights);

// Per-client local training seed for (global seed, client, round); keying by
// client id keeps every other client's stream unchanged when one is removed.
std::uint64_t client_round_seed(std::uint64_t seed, int client_id, int round,
                                const char* stage);

// One synchronous round: broadcast, local train on sampled participants,
// weighted aggregation, metrics appended to history.
void fed_round(ServerState& state, const FedConfig& cfg, const char* stage = "train");

struct FedRunResult {
    ServerState state;
    ParamVector trained;
};

FedRunResult run_federated(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& cfg);

// Rounds over an explicit shard set from an explicit start; used by the
// retrain oracle and the post-unlearning repair phase.
ServerState run_federated_over_shards(std::vector<ClientShard> shards, const ParamVector& start,
                                      int rounds, const FedConfig& cfg, const char* stage);

// Micro-averaged accuracy of the global model over every shard's split mask.
enum class Split { train, val, test };
double global_accuracy(const ParamVector& params, const std::vector<ClientShard>& shards,
                       Split split);

std::string history_jsonl(const std::vector<RoundMetrics>& history);

} // namespace fedgcv
