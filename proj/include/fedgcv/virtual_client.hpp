#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgcv/eigensolver.hpp"
#include "fedgcv/federation.hpp"
#include "fedgcv/nn.hpp"

namespace fedgcv {

struct VirtualConfig {
    int spectral_k = 0; // 0 = min(32, n_j - 1)
    double gamma = 0.7; // edge threshold
    bool bisect_gamma = false; // tune gamma to match the original edge count
    double sigma_x = 0.1;
    int z_dim = 16;
    int hidden = 32;
    int vgae_epochs = 200;
    double vgae_lr = 1e-2;
    int repair_rounds = 5;
    std::uint64_t seed = 2025;
};

/*
 * Two-layer GCN encoder with gaussian heads and an inner-product decoder:
 *   H  = relu(Ahat X W1)
 *   mu = Ahat H Wmu,  logvar = Ahat H Wlv,  Z = mu + exp(logvar/2) .* eps
 * The epsilon draw behind `z_sample` is recorded so generation is replayable.
 */
struct VgaeModel {
    Matrix W1;  // d x hidden
    Matrix Wmu; // hidden x z_dim
    Matrix Wlv; // hidden x z_dim
    Matrix z_sample;   // n x z_dim
    Matrix eps_sample; // n x z_dim
    std::uint64_t seed = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

struct FeatureStats {
    Vector mu;    // per-feature mean of the departed shard
    Vector sigma; // per-feature std (population)
    double noise_sigma = 0.1;
};

struct SynthGraph {
    SparseGraph graph; // symmetric, zero diagonal by construction
    Matrix X;          // n x d
    int spectral_k = 0;
    double gamma = 0.7;
    std::uint64_t seed = 0;
};

SpectralProfile extract_spectral_profile(const ClientShard& shard, int k);

struct VgaeEval {
    double bce = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

// Loss and hand-derived gradients for one fixed (eps, negative-sample) draw.
struct VgaeGrad {
    VgaeEval loss;
    Matrix dW1, dWmu, dWlv;
};

VgaeGrad vgae_loss_grad(const VgaeModel& model, const SpMat& ahat, const Matrix& x,
                        const std::vector<std::pair<int, int>>& positives,
                        const std::vector<std::pair<int, int>>& negatives, const Matrix& eps);

VgaeModel vgae_train(const ClientShard& shard, const VirtualConfig& cfg);

// Z_proj = U_k U_k^T Z: restrict latents to the low-frequency subspace.
Matrix project_latent(const Matrix& z, const Matrix& u_k);

// A_syn[i][j] = 1 iff logistic(z_i . z_j) > gamma, i != j.
SparseGraph decode_adjacency(const Matrix& z_proj, double gamma);

FeatureStats feature_stats(const Matrix& x, double noise_sigma);

// Rows i.i.d. N(mu, diag(sigma^2 + noise_sigma^2)).
Matrix synthesize_features(const FeatureStats& stats, int n, std::uint64_t seed);

/*
 * Full replacement-shard build: spectral profile, VGAE, projected decode,
 * feature sampling, pseudo-labels from the pre-unlearning global model.
 * Only summaries of the departed shard feed the result; its raw rows are
 * checked to never reappear.
 */
ClientShard build_virtual_client(const ClientShard& departed, const VirtualConfig& cfg,
                                 const ParamVector& theta0);

SynthGraph synthesize_graph(const ClientShard& departed, const VirtualConfig& cfg,
                            const SpectralProfile& profile, const VgaeModel& model);

// R_v extra federated rounds over retain shards plus the virtual shard.
ServerState run_repair(const std::vector<ClientShard>& retain, const ClientShard& virtual_shard,
                       const ParamVector& theta_u, const FedConfig& cfg, int repair_rounds);

void save_synth_graph(const SynthGraph& sg, const Dataset& as_dataset, const VirtualConfig& cfg,
                      const std::string& path);

} // namespace fedgcv
