#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgcv/federation.hpp"
#include "fedgcv/nn.hpp"

namespace fedgcv {

struct UnlearnConfig {
    int epochs = 30;
    double lr = 2e-2;
    double dropout = 0.3;
    double npo_beta = 5.0;
    double scale = 50.0;     // multiplier on the corrected update
    double clip = 10.0;      // per-step update norm cap
    double drift_radius = 10.0;
    double margin = 0.5;
    double margin_weight = 3.0;
    bool use_gru = true; // false = raw ascent direction (ablation variant)
    std::uint64_t seed = 2025;
};

// Fixed membership threshold plus the fit metadata; immutable after fit.
struct MiaThreshold {
    double tau_pre = 0.0;
    double member_loss_mean = 0.0;
    double nonmember_loss_mean = 0.0;
    double balanced_accuracy = 0.0; // of the fitted member-below rule
    double separability = 0.5;      // orientation-free: max over thresholds of max(BA, 1-BA)
    bool degenerate = false;
};

struct UnlearnState {
    ParamVector theta;   // current
    ParamVector theta0;  // pre-unlearning anchor; also the frozen NPO reference
    int target_client = 0;
    MiaThreshold tau_pre;
};

struct LossAndGrad {
    double value = 0.0;
    ParamVector grad;
};

/*
 * Bounded forgetting loss per target train node:
 *   (2/beta) * log(1 + (p_theta(y)/p_ref(y))^beta)
 * Reference probabilities come from the frozen pre-unlearning model with
 * dropout off; p_ref is clamped below at 1e-12. Minimizing drives the
 * model's correct-class probability on the target shard toward zero.
 */
LossAndGrad npo_loss(const ParamVector& theta, const Vector& ref_correct_prob,
                     const ClientShard& shard, double beta,
                     std::optional<std::uint64_t> dropout_seed, double dropout_p);

// Correct-class probabilities of the reference model on shard nodes, dropout off.
Vector reference_correct_prob(const ParamVector& ref, const ClientShard& shard);

/*
 * Hinge that pushes every target train node's cross-entropy above
 * tau_pre + margin: weight * mean(max(0, (tau_pre + m) - ce_i)).
 */
LossAndGrad mia_margin_loss(const ParamVector& theta, const ClientShard& shard,
                            const MiaThreshold& tau_pre, double margin, double margin_weight,
                            std::optional<std::uint64_t> dropout_seed, double dropout_p);

// Negative gradient of (npo_loss + mia_margin_loss) at theta.
ParamVector unlearn_direction(const UnlearnState& state, const ClientShard& target,
                              const Vector& ref_correct_prob, const UnlearnConfig& cfg,
                              int epoch);

// Weighted one-local-epoch displacements of the retain clients from theta;
// weights renormalized over the retain clients only.
ParamVector retain_direction(const ParamVector& theta, const std::vector<ClientShard>& retain,
                             const std::vector<double>& retain_weights, const TrainConfig& local,
                             std::uint64_t seed, int epoch);

struct CorrectionResult {
    ParamVector direction;
    bool corrected = false;        // true when the conflicting component was removed
    bool degenerate_retain = false; // ||delta_r|| below epsilon; passed through
    double dot_ur = 0.0;
};

// delta_u - min(<delta_u, delta_r>, 0)/||delta_r||^2 * delta_r; bit-exact
// pass-through when the inner product is non-negative.
CorrectionResult gradient_correct(const ParamVector& delta_u, const ParamVector& delta_r);

// Rescale step to norm <= clip, apply, then radially project the iterate onto
// the ball ||theta_new - theta0|| <= drift_radius.
ParamVector clip_and_project(const ParamVector& step, const ParamVector& theta,
                             const ParamVector& theta0, double clip, double drift_radius,
                             double* applied_norm = nullptr);

struct UnlearnEpochLog {
    int epoch = 0;
    double target_ce = 0.0;
    double npo = 0.0;
    double margin = 0.0;
    bool corrected = false;
    double dot_ur = 0.0;
    double drift = 0.0;
    double mia_rate = 0.0;
};

// One full unlearning epoch; enforces the drift invariant.
UnlearnEpochLog unlearn_round(UnlearnState& state, const ClientShard& target,
                              const std::vector<ClientShard>& retain,
                              const std::vector<double>& retain_weights,
                              const Vector& ref_correct_prob, const TrainConfig& fed_local,
                              const UnlearnConfig& cfg, int epoch);

struct UnlearnRunResult {
    ParamVector theta_u;
    std::vector<UnlearnEpochLog> log;
};

// cfg.epochs unlearning rounds from the trained global. The per-epoch MIA
// rate is evaluated against tau_pre over the target client's train nodes.
UnlearnRunResult run_unlearning(const ServerState& fed_state, int target_client,
                                const MiaThreshold& tau_pre, const TrainConfig& fed_local,
                                const UnlearnConfig& cfg);

std::string unlearn_log_jsonl(const std::vector<UnlearnEpochLog>& log);

} // namespace fedgcv
