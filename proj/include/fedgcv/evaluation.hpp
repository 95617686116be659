#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedgcv/federation.hpp"
#include "fedgcv/unlearning.hpp"
#include "fedgcv/virtual_client.hpp"

namespace fedgcv {

// A (shard index, local node) evaluation sample.
struct SampleRef {
    int shard = 0;
    int node = 0;
};

/*
 * Membership evaluation sets: members are the target client's train nodes,
 * non-members are held-out test nodes of the retained clients, which never
 * entered training. Disjoint by construction.
 */
struct MiaSets {
    std::vector<SampleRef> members;    // indices into `shards`
    std::vector<SampleRef> nonmembers;
};

MiaSets build_mia_sets(const std::vector<ClientShard>& shards, int target_client);

// Per-sample CE losses of the model on the given refs, dropout off.
std::vector<double> sample_losses(const ParamVector& params,
                                  const std::vector<ClientShard>& shards,
                                  const std::vector<SampleRef>& refs);

double sample_loss(const ParamVector& params, const ClientShard& shard, int node);

/*
 * Fits the fixed decision threshold: the midpoint between consecutive values
 * of the sorted loss union that maximizes balanced accuracy, predicting
 * "member" when loss < threshold. Ties break toward the smaller threshold.
 */
MiaThreshold fit_threshold(const std::vector<double>& member_losses,
                           const std::vector<double>& nonmember_losses);

MiaThreshold fit_threshold(const ParamVector& theta_pre, const std::vector<ClientShard>& shards,
                           const MiaSets& sets);

// Fraction of member losses strictly below the frozen threshold.
double mia_rate(const std::vector<double>& member_losses, const MiaThreshold& thr);
double mia_rate(const ParamVector& params, const std::vector<ClientShard>& shards,
                const std::vector<SampleRef>& members, const MiaThreshold& thr);

// Fresh-init full federated retraining over the retain shards only.
ParamVector retrain_oracle(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& cfg, int exclude_client);

enum class AblationVariant { full, no_gru, no_virtual };

AblationVariant parse_variant(const std::string& name);
const char* variant_name(AblationVariant v);

struct MetricsReport {
    double accuracy = 0.0;     // final retained-test accuracy for the variant
    double mia_rate_pre = 0.0; // at theta_pre, with tau_pre
    double mia_rate_post = 0.0; // right after unlearning
    double mia_rate_final = 0.0; // after repair (== post when repair skipped)
    double accuracy_pre = 0.0;
    double accuracy_unlearned = 0.0;
    MiaThreshold threshold;
    std::vector<RoundMetrics> train_curve;
    std::vector<UnlearnEpochLog> unlearn_curve;
    std::vector<RoundMetrics> repair_curve;
};

/*
 * Train -> unlearn -> (repair unless no_virtual) with the named component
 * disabled; pre-trained state can be supplied so variants share the same
 * starting model.
 */
struct PipelineInputs {
    const Dataset* ds = nullptr;
    std::vector<int> assignment;
    FedConfig fed;
    UnlearnConfig unlearn;
    VirtualConfig virt;
    int target_client = 0;
};

MetricsReport run_variant_pipeline(const PipelineInputs& in, AblationVariant variant,
                                   const ServerState* pretrained = nullptr);

MetricsReport run_ablation(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& fed, const UnlearnConfig& un,
                           const VirtualConfig& virt, int target_client,
                           AblationVariant variant);

} // namespace fedgcv
