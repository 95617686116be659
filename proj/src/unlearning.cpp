#include "fedgcv/unlearning.hpp"

#include <cmath>
#include <sstream>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x > 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

constexpr double kRefProbFloor = 1e-12;
constexpr double kDegenerateRetainNorm = 1e-12;

} // namespace

Vector reference_correct_prob(const ParamVector& ref, const ClientShard& shard) {
    const GcnParams p = unflatten(ref);
    const Matrix probs = softmax_rows(gcn_forward(p, shard.ahat, shard.local.X, std::nullopt, 0.0));
    Vector out(shard.n());
    for (int i = 0; i < shard.n(); ++i)
        out(i) = std::max(probs(i, shard.local.y[i]), kRefProbFloor);
    return out;
}

LossAndGrad npo_loss(const ParamVector& theta, const Vector& ref_correct_prob,
                     const ClientShard& shard, double beta,
                     std::optional<std::uint64_t> dropout_seed, double dropout_p) {
    const auto train_nodes = mask_indices(shard.local.train_mask);
    if (train_nodes.empty()) fail(ErrorCode::empty_mask, "target shard has no train nodes");

    const GcnParams p = unflatten(theta);
    GcnCache cache;
    const Matrix logits =
        gcn_forward(p, shard.ahat, shard.local.X, dropout_seed, dropout_p, &cache);
    const Matrix probs = softmax_rows(logits);

    const double count = static_cast<double>(train_nodes.size());
    double total = 0.0;
    Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
    for (int i : train_nodes) {
        const int y = shard.local.y[i];
        const double p_theta = std::max(probs(i, y), 1e-300);
        const double log_ratio = std::log(p_theta) - std::log(ref_correct_prob(i));
        const double z = beta * log_ratio;
        total += (2.0 / beta) * softplus(z);
        // d/dlogit_c = 2 * sigmoid(beta * log_ratio) * (delta_{cy} - p_c)
        const double w = 2.0 * sigmoid(z) / count;
        for (int c = 0; c < logits.cols(); ++c) dlogits(i, c) = -w * probs(i, c);
        dlogits(i, y) += w;
    }

    LossAndGrad out;
    out.value = total / count;
    out.grad = gcn_backward(p, cache, dlogits, 0.0);
    return out;
}

LossAndGrad mia_margin_loss(const ParamVector& theta, const ClientShard& shard,
                            const MiaThreshold& tau_pre, double margin, double margin_weight,
                            std::optional<std::uint64_t> dropout_seed, double dropout_p) {
    const auto train_nodes = mask_indices(shard.local.train_mask);
    if (train_nodes.empty()) fail(ErrorCode::empty_mask, "target shard has no train nodes");

    const GcnParams p = unflatten(theta);
    GcnCache cache;
    const Matrix logits =
        gcn_forward(p, shard.ahat, shard.local.X, dropout_seed, dropout_p, &cache);
    const Matrix probs = softmax_rows(logits);

    const double floor = tau_pre.tau_pre + margin;
    const double count = static_cast<double>(train_nodes.size());
    double total = 0.0;
    Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
    for (int i : train_nodes) {
        const int y = shard.local.y[i];
        const double m = logits.row(i).maxCoeff();
        const double ce = m + std::log((logits.row(i).array() - m).exp().sum()) - logits(i, y);
        const double gap = floor - ce;
        if (gap <= 0.0) continue;
        total += gap;
        // active hinge: d/dlogits = -(d ce/d logits) = onehot - softmax
        const double w = margin_weight / count;
        for (int c = 0; c < logits.cols(); ++c) dlogits(i, c) -= w * probs(i, c);
        dlogits(i, y) += w;
    }

    LossAndGrad out;
    out.value = margin_weight * total / count;
    out.grad = gcn_backward(p, cache, dlogits, 0.0);
    return out;
}

ParamVector unlearn_direction(const UnlearnState& state, const ClientShard& target,
                              const Vector& ref_correct_prob, const UnlearnConfig& cfg,
                              int epoch) {
    const std::optional<std::uint64_t> drop_seed =
        cfg.dropout > 0.0 ? std::optional<std::uint64_t>(seed_mix(
                                cfg.seed, stream_tag("unlearn_dropout"),
                                static_cast<std::uint64_t>(epoch)))
                          : std::nullopt;
    const auto npo = npo_loss(state.theta, ref_correct_prob, target, cfg.npo_beta,
                              drop_seed, cfg.dropout);
    const auto hinge = mia_margin_loss(state.theta, target, state.tau_pre, cfg.margin,
                                       cfg.margin_weight, drop_seed, cfg.dropout);
    ParamVector dir = zeros_like(npo.grad.shape);
    dir.v = -(npo.grad.v + hinge.grad.v);
    return dir;
}

ParamVector retain_direction(const ParamVector& theta, const std::vector<ClientShard>& retain,
                             const std::vector<double>& retain_weights, const TrainConfig& local,
                             std::uint64_t seed, int epoch) {
    if (retain.empty()) fail(ErrorCode::validation, "no retain clients");
    double total_w = 0.0;
    for (double w : retain_weights) total_w += w;

    ParamVector delta = zeros_like(theta.shape);
    for (std::size_t i = 0; i < retain.size(); ++i) {
        TrainConfig one = local;
        one.epochs = 1;
        one.seed = client_round_seed(seed, retain[i].client_id, epoch, "retain");
        const auto result = local_train(retain[i], theta, one);
        delta.v += (retain_weights[i] / total_w) * (result.params.v - theta.v);
    }
    return delta;
}

CorrectionResult gradient_correct(const ParamVector& delta_u, const ParamVector& delta_r) {
    CorrectionResult out;
    out.dot_ur = delta_u.v.dot(delta_r.v);
    const double r2 = delta_r.v.squaredNorm();
    if (std::sqrt(r2) <= kDegenerateRetainNorm) {
        out.direction = delta_u;
        out.degenerate_retain = true;
        return out;
    }
    if (out.dot_ur >= 0.0) {
        out.direction = delta_u; // constraint already satisfied; bit-exact pass-through
        return out;
    }
    out.direction = zeros_like(delta_u.shape);
    out.direction.v = delta_u.v - (out.dot_ur / r2) * delta_r.v;
    out.corrected = true;
    return out;
}

ParamVector clip_and_project(const ParamVector& step, const ParamVector& theta,
                             const ParamVector& theta0, double clip, double drift_radius,
                             double* applied_norm) {
    Vector s = step.v;
    const double sn = s.norm();
    if (sn > clip) s *= clip / sn;
    if (applied_norm) *applied_norm = s.norm();

    ParamVector out = theta;
    out.v += s;
    const Vector drift = out.v - theta0.v;
    const double dn = drift.norm();
    if (dn > drift_radius) out.v = theta0.v + (drift_radius / dn) * drift;
    return out;
}

UnlearnEpochLog unlearn_round(UnlearnState& state, const ClientShard& target,
                              const std::vector<ClientShard>& retain,
                              const std::vector<double>& retain_weights,
                              const Vector& ref_correct_prob, const TrainConfig& fed_local,
                              const UnlearnConfig& cfg, int epoch) {
    UnlearnEpochLog log;
    log.epoch = epoch;

    const ParamVector delta_u = unlearn_direction(state, target, ref_correct_prob, cfg, epoch);
    ParamVector applied = delta_u;
    if (cfg.use_gru) {
        const ParamVector delta_r =
            retain_direction(state.theta, retain, retain_weights, fed_local, cfg.seed, epoch);
        const auto corr = gradient_correct(delta_u, delta_r);
        applied = corr.direction;
        log.corrected = corr.corrected;
        log.dot_ur = corr.dot_ur;
    }

    ParamVector step = zeros_like(applied.shape);
    step.v = cfg.lr * cfg.scale * applied.v;
    state.theta = clip_and_project(step, state.theta, state.theta0, cfg.clip, cfg.drift_radius);
    log.drift = (state.theta.v - state.theta0.v).norm();

    const GcnParams p = unflatten(state.theta);
    const Vector ce = per_node_ce(p, target.ahat, target.local.X, target.local.y);
    const auto train_nodes = mask_indices(target.local.train_mask);
    double ce_sum = 0.0;
    int below = 0;
    for (int i : train_nodes) {
        ce_sum += ce(i);
        below += (ce(i) < state.tau_pre.tau_pre);
    }
    log.target_ce = ce_sum / train_nodes.size();
    log.mia_rate = static_cast<double>(below) / train_nodes.size();

    const auto npo =
        npo_loss(state.theta, ref_correct_prob, target, cfg.npo_beta, std::nullopt, 0.0);
    const auto hinge = mia_margin_loss(state.theta, target, state.tau_pre, cfg.margin,
                                       cfg.margin_weight, std::nullopt, 0.0);
    log.npo = npo.value;
    log.margin = hinge.value;
    return log;
}

UnlearnRunResult run_unlearning(const ServerState& fed_state, int target_client,
                                const MiaThreshold& tau_pre, const TrainConfig& fed_local,
                                const UnlearnConfig& cfg) {
    const ClientShard* target = nullptr;
    std::vector<ClientShard> retain;
    std::vector<double> retain_weights;
    for (std::size_t i = 0; i < fed_state.shards.size(); ++i) {
        if (fed_state.shards[i].client_id == target_client) {
            target = &fed_state.shards[i];
        } else {
            retain.push_back(fed_state.shards[i]);
            retain_weights.push_back(fed_state.weights[i]);
        }
    }
    if (!target) fail(ErrorCode::validation, "target client not found");
    if (retain.empty())
        fail(ErrorCode::validation, "unlearning requires at least one retain client");

    UnlearnState state;
    state.theta = fed_state.global;
    state.theta0 = fed_state.global;
    state.target_client = target_client;
    state.tau_pre = tau_pre;

    const Vector ref_prob = reference_correct_prob(state.theta0, *target);

    UnlearnRunResult out;
    for (int e = 0; e < cfg.epochs; ++e)
        out.log.push_back(unlearn_round(state, *target, retain, retain_weights, ref_prob,
                                        fed_local, cfg, e));
    out.theta_u = state.theta;
    return out;
}

std::string unlearn_log_jsonl(const std::vector<UnlearnEpochLog>& log) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : log) {
        out << "{\"epoch\": " << e.epoch << ", \"target_ce\": " << e.target_ce
            << ", \"npo\": " << e.npo << ", \"margin\": " << e.margin
            << ", \"corrected\": " << (e.corrected ? "true" : "false")
            << ", \"dot_ur\": " << e.dot_ur << ", \"drift\": " << e.drift
            << ", \"mia_rate\": " << e.mia_rate << "}\n";
    }
    return out.str();
}

} // namespace fedgcv
