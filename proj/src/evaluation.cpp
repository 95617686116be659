#include "fedgcv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

MiaSets build_mia_sets(const std::vector<ClientShard>& shards, int target_client) {
    MiaSets sets;
    for (int s = 0; s < static_cast<int>(shards.size()); ++s) {
        const ClientShard& shard = shards[s];
        if (shard.client_id == target_client) {
            for (int i = 0; i < shard.n(); ++i)
                if (shard.local.train_mask[i]) sets.members.push_back({s, i});
        } else {
            for (int i = 0; i < shard.n(); ++i)
                if (shard.local.test_mask[i]) sets.nonmembers.push_back({s, i});
        }
    }
    if (sets.members.empty()) fail(ErrorCode::validation, "target client has no member samples");
    if (sets.nonmembers.empty()) fail(ErrorCode::validation, "no non-member samples available");
    return sets;
}

std::vector<double> sample_losses(const ParamVector& params,
                                  const std::vector<ClientShard>& shards,
                                  const std::vector<SampleRef>& refs) {
    const GcnParams p = unflatten(params);
    std::map<int, Vector> per_shard; // shard index -> all-node CE, computed once
    std::vector<double> out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        auto it = per_shard.find(r.shard);
        if (it == per_shard.end()) {
            const ClientShard& s = shards[r.shard];
            it = per_shard.emplace(r.shard, per_node_ce(p, s.ahat, s.local.X, s.local.y)).first;
        }
        out.push_back(it->second(r.node));
    }
    return out;
}

double sample_loss(const ParamVector& params, const ClientShard& shard, int node) {
    const GcnParams p = unflatten(params);
    return per_node_ce(p, shard.ahat, shard.local.X, shard.local.y)(node);
}

MiaThreshold fit_threshold(const std::vector<double>& member_losses,
                           const std::vector<double>& nonmember_losses) {
    if (member_losses.empty() || nonmember_losses.empty())
        fail(ErrorCode::validation, "threshold fit needs non-empty member and non-member sets");

    MiaThreshold thr;
    double msum = 0.0, nsum = 0.0;
    for (double v : member_losses) msum += v;
    for (double v : nonmember_losses) nsum += v;
    thr.member_loss_mean = msum / member_losses.size();
    thr.nonmember_loss_mean = nsum / nonmember_losses.size();

    std::vector<double> all;
    all.reserve(member_losses.size() + nonmember_losses.size());
    all.insert(all.end(), member_losses.begin(), member_losses.end());
    all.insert(all.end(), nonmember_losses.begin(), nonmember_losses.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    if (all.size() == 1) { // every loss identical: no separating midpoint exists
        thr.tau_pre = all[0];
        thr.balanced_accuracy = 0.5;
        thr.separability = 0.5;
        thr.degenerate = true;
        return thr;
    }

    auto balanced_accuracy = [&](double t) {
        int tp = 0, tn = 0;
        for (double v : member_losses) tp += (v < t);
        for (double v : nonmember_losses) tn += (v >= t);
        return 0.5 * (static_cast<double>(tp) / member_losses.size() +
                      static_cast<double>(tn) / nonmember_losses.size());
    };

    double best_t = 0.5 * (all[0] + all[1]);
    double best_ba = balanced_accuracy(best_t);
    double sep = 0.5;
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        const double t = 0.5 * (all[i] + all[i + 1]);
        const double ba = balanced_accuracy(t);
        if (ba > best_ba) { // strict: ties keep the smaller threshold
            best_ba = ba;
            best_t = t;
        }
        sep = std::max(sep, std::max(ba, 1.0 - ba));
    }
    thr.tau_pre = best_t;
    thr.balanced_accuracy = best_ba;
    thr.separability = sep;
    return thr;
}

MiaThreshold fit_threshold(const ParamVector& theta_pre, const std::vector<ClientShard>& shards,
                           const MiaSets& sets) {
    return fit_threshold(sample_losses(theta_pre, shards, sets.members),
                         sample_losses(theta_pre, shards, sets.nonmembers));
}

double mia_rate(const std::vector<double>& member_losses, const MiaThreshold& thr) {
    if (member_losses.empty()) fail(ErrorCode::validation, "no member samples");
    int below = 0;
    for (double v : member_losses) below += (v < thr.tau_pre);
    return static_cast<double>(below) / member_losses.size();
}

double mia_rate(const ParamVector& params, const std::vector<ClientShard>& shards,
                const std::vector<SampleRef>& members, const MiaThreshold& thr) {
    return mia_rate(sample_losses(params, shards, members), thr);
}

ParamVector retrain_oracle(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& cfg, int exclude_client) {
    auto shards = induce_shards(ds, assignment);
    std::vector<ClientShard> retain;
    for (auto& s : shards)
        if (s.client_id != exclude_client) retain.push_back(std::move(s));
    if (retain.empty()) fail(ErrorCode::validation, "retrain oracle needs retain clients");

    const ParamVector init = flatten(
        glorot_init(ds.d(), cfg.hidden, ds.num_classes, seed_mix(cfg.seed, stream_tag("init"))));
    auto state = run_federated_over_shards(std::move(retain), init, cfg.rounds, cfg, "train");
    return state.global;
}

AblationVariant parse_variant(const std::string& name) {
    if (name == "full") return AblationVariant::full;
    if (name == "no_gru") return AblationVariant::no_gru;
    if (name == "no_virtual") return AblationVariant::no_virtual;
    fail(ErrorCode::config, "unknown ablation variant: " + name);
}

const char* variant_name(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return "full";
        case AblationVariant::no_gru: return "no_gru";
        case AblationVariant::no_virtual: return "no_virtual";
    }
    return "?";
}

MetricsReport run_variant_pipeline(const PipelineInputs& in, AblationVariant variant,
                                   const ServerState* pretrained) {
    MetricsReport report;

    ServerState trained;
    if (pretrained) {
        trained = *pretrained;
    } else {
        auto run = run_federated(*in.ds, in.assignment, in.fed);
        trained = std::move(run.state);
    }
    report.train_curve = trained.history;

    std::vector<ClientShard> retain;
    const ClientShard* target = nullptr;
    for (const auto& s : trained.shards) {
        if (s.client_id == in.target_client)
            target = &s;
        else
            retain.push_back(s);
    }
    if (!target) fail(ErrorCode::validation, "target client missing from shards");

    const MiaSets sets = build_mia_sets(trained.shards, in.target_client);
    report.threshold = fit_threshold(trained.global, trained.shards, sets);
    report.mia_rate_pre = mia_rate(trained.global, trained.shards, sets.members, report.threshold);
    report.accuracy_pre = global_accuracy(trained.global, trained.shards, Split::test);

    UnlearnConfig un = in.unlearn;
    un.use_gru = (variant != AblationVariant::no_gru);
    auto unlearned = run_unlearning(trained, in.target_client, report.threshold, in.fed.local, un);
    report.unlearn_curve = unlearned.log;
    report.mia_rate_post =
        mia_rate(unlearned.theta_u, trained.shards, sets.members, report.threshold);
    report.accuracy_unlearned = global_accuracy(unlearned.theta_u, retain, Split::test);

    if (variant == AblationVariant::no_virtual) {
        report.mia_rate_final = report.mia_rate_post;
        report.accuracy = report.accuracy_unlearned;
        return report;
    }

    const ClientShard virt = build_virtual_client(*target, in.virt, trained.global);
    auto repaired =
        run_repair(retain, virt, unlearned.theta_u, in.fed, in.virt.repair_rounds);
    report.repair_curve = repaired.history;
    report.mia_rate_final =
        mia_rate(repaired.global, trained.shards, sets.members, report.threshold);
    report.accuracy = global_accuracy(repaired.global, retain, Split::test);
    return report;
}

MetricsReport run_ablation(const Dataset& ds, const std::vector<int>& assignment,
                           const FedConfig& fed, const UnlearnConfig& un,
                           const VirtualConfig& virt, int target_client,
                           AblationVariant variant) {
    PipelineInputs in;
    in.ds = &ds;
    in.assignment = assignment;
    in.fed = fed;
    in.unlearn = un;
    in.virt = virt;
    in.target_client = target_client;
    return run_variant_pipeline(in, variant);
}

} // namespace fedgcv
