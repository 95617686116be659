#include "fedgcv/virtual_client.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

namespace {

double sigmoid(double x) { return x > 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Stable BCE with logits: -(a*log(p) + (1-a)*log(1-p)), p = sigmoid(s).
double bce_with_logit(double s, double a) {
    return std::max(s, 0.0) - a * s + std::log1p(std::exp(-std::abs(s)));
}

} // namespace

SpectralProfile extract_spectral_profile(const ClientShard& shard, int k) {
    if (k < 1 || k > shard.n())
        fail(ErrorCode::validation, "spectral k must be in [1, shard size]");
    const SpMat l = normalized_laplacian(shard.local.graph);
    return smallest_eigenpairs(l, k);
}

VgaeGrad vgae_loss_grad(const VgaeModel& model, const SpMat& ahat, const Matrix& x,
                        const std::vector<std::pair<int, int>>& positives,
                        const std::vector<std::pair<int, int>>& negatives, const Matrix& eps) {
    const int n = static_cast<int>(x.rows());
    const Matrix pre = ahat * (x * model.W1);
    const Matrix h = pre.cwiseMax(0.0);
    const Matrix ah = ahat * h;
    const Matrix mu = ah * model.Wmu;
    const Matrix lv = ah * model.Wlv;
    const Matrix sig = (0.5 * lv.array()).exp().matrix();
    const Matrix z = mu + sig.cwiseProduct(eps);

    VgaeGrad out;
    Matrix dz = Matrix::Zero(z.rows(), z.cols());
    const double pair_count = static_cast<double>(positives.size() + negatives.size());
    double bce = 0.0;
    auto accumulate_pair = [&](int i, int j, double a) {
        const double s = z.row(i).dot(z.row(j));
        bce += bce_with_logit(s, a);
        const double ds = (sigmoid(s) - a) / pair_count;
        if (i == j) {
            dz.row(i) += 2.0 * ds * z.row(i);
        } else {
            dz.row(i) += ds * z.row(j);
            dz.row(j) += ds * z.row(i);
        }
    };
    for (auto [i, j] : positives) accumulate_pair(i, j, 1.0);
    for (auto [i, j] : negatives) accumulate_pair(i, j, 0.0);
    out.loss.bce = bce / pair_count;

    // KL(q || N(0, I)) averaged over nodes.
    double kl = 0.0;
    Matrix dmu = dz;
    Matrix dlv = dz.cwiseProduct(0.5 * sig.cwiseProduct(eps));
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < z.cols(); ++d) {
            const double m = mu(i, d), l = lv(i, d);
            kl += -0.5 * (1.0 + l - m * m - std::exp(l));
            dmu(i, d) += m / n;
            dlv(i, d) += 0.5 * (std::exp(l) - 1.0) / n;
        }
    out.loss.kl = kl / n;
    out.loss.total = out.loss.bce + out.loss.kl;

    const Matrix a_dmu = ahat * dmu;
    const Matrix a_dlv = ahat * dlv;
    out.dWmu = ah.transpose() * dmu;
    out.dWlv = ah.transpose() * dlv;
    Matrix dh = a_dmu * model.Wmu.transpose() + a_dlv * model.Wlv.transpose();
    const Matrix dpre = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    out.dW1 = x.transpose() * (ahat * dpre);
    return out;
}

namespace {

std::vector<std::pair<int, int>> positive_pairs(const SparseGraph& g) {
    // Upper-triangular entries of A + I: every edge once plus the diagonal.
    std::vector<std::pair<int, int>> pos;
    pos.reserve(g.edges().size() + g.n());
    for (int i = 0; i < g.n(); ++i) pos.emplace_back(i, i);
    for (auto [u, v] : g.edges()) pos.emplace_back(u, v);
    return pos;
}

std::vector<std::pair<int, int>> sample_negatives(const SparseGraph& g, std::size_t count,
                                                  Rng& rng) {
    std::vector<std::pair<int, int>> neg;
    const int n = g.n();
    if (n < 2) return neg;
    int guard = static_cast<int>(count) * 50 + 100;
    while (neg.size() < count && guard-- > 0) {
        int u = rng.uniform_int(n);
        int v = rng.uniform_int(n);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (g.has_edge(u, v)) continue;
        neg.emplace_back(u, v);
    }
    return neg;
}

Matrix gaussian_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

} // namespace

VgaeModel vgae_train(const ClientShard& shard, const VirtualConfig& cfg) {
    const int n = shard.n();
    const int d = shard.local.d();

    VgaeModel model;
    model.seed = cfg.seed;
    Rng init_rng(seed_mix(cfg.seed, stream_tag("vgae_init")));
    const double a1 = std::sqrt(6.0 / (d + cfg.hidden));
    const double a2 = std::sqrt(6.0 / (cfg.hidden + cfg.z_dim));
    model.W1 = gaussian_matrix(d, cfg.hidden, init_rng) * (a1 / std::sqrt(3.0));
    model.Wmu = gaussian_matrix(cfg.hidden, cfg.z_dim, init_rng) * (a2 / std::sqrt(3.0));
    model.Wlv = gaussian_matrix(cfg.hidden, cfg.z_dim, init_rng) * (a2 / std::sqrt(3.0));

    const auto positives = positive_pairs(shard.local.graph);
    Rng eval_rng(seed_mix(cfg.seed, stream_tag("vgae_eval")));
    const auto eval_negatives = sample_negatives(shard.local.graph, positives.size(), eval_rng);
    const Matrix eval_eps = Matrix::Zero(n, cfg.z_dim); // deterministic eval at the mean

    auto eval_loss = [&](const VgaeModel& m) {
        return vgae_loss_grad(m, shard.ahat, shard.local.X, positives, eval_negatives, eval_eps)
            .loss.total;
    };
    model.initial_loss = eval_loss(model);

    Rng step_rng(seed_mix(cfg.seed, stream_tag("vgae_train")));
    for (int e = 0; e < cfg.vgae_epochs; ++e) {
        const Matrix eps = gaussian_matrix(n, cfg.z_dim, step_rng);
        const auto negatives = sample_negatives(shard.local.graph, positives.size(), step_rng);
        const auto g = vgae_loss_grad(model, shard.ahat, shard.local.X, positives, negatives, eps);
        if (!std::isfinite(g.loss.total))
            fail(ErrorCode::divergence, "VGAE loss became non-finite at epoch " + std::to_string(e));
        model.W1 -= cfg.vgae_lr * g.dW1;
        model.Wmu -= cfg.vgae_lr * g.dWmu;
        model.Wlv -= cfg.vgae_lr * g.dWlv;
    }
    model.final_loss = eval_loss(model);
    if (!std::isfinite(model.final_loss))
        fail(ErrorCode::divergence, "VGAE final loss is non-finite");

    // One recorded reparameterization sample for generation.
    Rng sample_rng(seed_mix(cfg.seed, stream_tag("vgae_sample")));
    model.eps_sample = gaussian_matrix(n, cfg.z_dim, sample_rng);
    const Matrix pre = shard.ahat * (shard.local.X * model.W1);
    const Matrix h = pre.cwiseMax(0.0);
    const Matrix ah = shard.ahat * h;
    const Matrix mu = ah * model.Wmu;
    const Matrix sig = (0.5 * (ah * model.Wlv).array()).exp().matrix();
    model.z_sample = mu + sig.cwiseProduct(model.eps_sample);
    return model;
}

Matrix project_latent(const Matrix& z, const Matrix& u_k) {
    if (u_k.rows() != z.rows()) fail(ErrorCode::shape, "latent and basis row counts disagree");
    return u_k * (u_k.transpose() * z);
}

SparseGraph decode_adjacency(const Matrix& z_proj, double gamma) {
    if (gamma <= 0.0 || gamma >= 1.0) fail(ErrorCode::validation, "gamma must be in (0, 1)");
    const int n = static_cast<int>(z_proj.rows());
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (sigmoid(z_proj.row(i).dot(z_proj.row(j))) > gamma) edges.emplace_back(i, j);
    return SparseGraph::from_edges(n, edges);
}

FeatureStats feature_stats(const Matrix& x, double noise_sigma) {
    FeatureStats fs;
    fs.noise_sigma = noise_sigma;
    fs.mu = x.colwise().mean();
    fs.sigma.resize(x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        const double m = fs.mu(j);
        double acc = 0.0;
        for (int i = 0; i < x.rows(); ++i) {
            const double dv = x(i, j) - m;
            acc += dv * dv;
        }
        fs.sigma(j) = std::sqrt(acc / x.rows());
    }
    return fs;
}

Matrix synthesize_features(const FeatureStats& stats, int n, std::uint64_t seed) {
    Rng rng(seed_mix(seed, stream_tag("feature_sample")));
    const int d = static_cast<int>(stats.mu.size());
    Matrix x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            const double std_eff =
                std::sqrt(stats.sigma(j) * stats.sigma(j) + stats.noise_sigma * stats.noise_sigma);
            x(i, j) = stats.mu(j) + std_eff * rng.normal();
        }
    return x;
}

SynthGraph synthesize_graph(const ClientShard& departed, const VirtualConfig& cfg,
                            const SpectralProfile& profile, const VgaeModel& model) {
    SynthGraph sg;
    sg.spectral_k = profile.k;
    sg.seed = cfg.seed;

    const Matrix z_proj = project_latent(model.z_sample, profile.eigenvectors);
    double gamma = cfg.gamma;
    if (cfg.bisect_gamma) {
        // Edge count is non-increasing in gamma; bisect toward the original.
        const std::int64_t want = departed.local.graph.edge_count();
        double lo = 1e-6, hi = 1.0 - 1e-6;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const std::int64_t got = decode_adjacency(z_proj, mid).edge_count();
            if (got > want)
                lo = mid;
            else
                hi = mid;
        }
        gamma = 0.5 * (lo + hi);
    }
    sg.gamma = gamma;
    sg.graph = decode_adjacency(z_proj, gamma);

    const FeatureStats stats = feature_stats(departed.local.X, cfg.sigma_x);
    sg.X = synthesize_features(stats, departed.n(), cfg.seed);
    return sg;
}

ClientShard build_virtual_client(const ClientShard& departed, const VirtualConfig& cfg,
                                 const ParamVector& theta0) {
    VirtualConfig vc = cfg;
    if (vc.spectral_k <= 0) vc.spectral_k = std::min(32, departed.n() - 1);
    if (vc.spectral_k < 1) vc.spectral_k = 1;

    const SpectralProfile profile = extract_spectral_profile(departed, vc.spectral_k);
    const VgaeModel model = vgae_train(departed, vc);
    const SynthGraph sg = synthesize_graph(departed, vc, profile, model);

    // Privacy check: no synthetic feature row reproduces a raw departed row.
    for (int i = 0; i < sg.X.rows(); ++i)
        for (int r = 0; r < departed.local.X.rows(); ++r)
            if ((sg.X.row(i) - departed.local.X.row(r)).cwiseAbs().maxCoeff() == 0.0)
                fail(ErrorCode::validation, "synthetic feature row duplicates a raw row");

    ClientShard virt;
    virt.client_id = departed.client_id;
    virt.global_ids.resize(sg.graph.n());
    for (int i = 0; i < sg.graph.n(); ++i) virt.global_ids[i] = i;
    virt.local.graph = sg.graph;
    virt.local.X = sg.X;
    virt.local.num_classes = departed.local.num_classes;
    virt.ahat = normalized_adjacency(virt.local.graph);

    // Pseudo-labels from the pre-unlearning global model on the synth graph.
    const GcnParams p0 = unflatten(theta0);
    const Matrix logits = gcn_forward(p0, virt.ahat, virt.local.X, std::nullopt, 0.0);
    virt.local.y.resize(sg.graph.n());
    for (int i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        virt.local.y[i] = best;
    }
    virt.local.train_mask.assign(sg.graph.n(), 1);
    virt.local.val_mask.assign(sg.graph.n(), 0);
    virt.local.test_mask.assign(sg.graph.n(), 0);
    return virt;
}

ServerState run_repair(const std::vector<ClientShard>& retain, const ClientShard& virtual_shard,
                       const ParamVector& theta_u, const FedConfig& cfg, int repair_rounds) {
    std::vector<ClientShard> shards = retain;
    shards.push_back(virtual_shard);
    std::sort(shards.begin(), shards.end(),
              [](const ClientShard& a, const ClientShard& b) { return a.client_id < b.client_id; });
    return run_federated_over_shards(std::move(shards), theta_u, repair_rounds, cfg, "repair");
}

void save_synth_graph(const SynthGraph& sg, const Dataset& as_dataset, const VirtualConfig& cfg,
                      const std::string& path) {
    // Canonical dataset JSON plus a provenance object so repair is replayable.
    save_dataset(as_dataset, path + ".tmp");
    std::ifstream in(path + ".tmp");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::remove((path + ".tmp").c_str());

    nlohmann::json prov{{"k", sg.spectral_k},
                        {"gamma", sg.gamma},
                        {"sigma_x", cfg.sigma_x},
                        {"seeds", {{"generation", sg.seed}}},
                        {"vgae",
                         {{"z_dim", cfg.z_dim},
                          {"hidden", cfg.hidden},
                          {"epochs", cfg.vgae_epochs},
                          {"lr", cfg.vgae_lr}}}};
    // splice provenance before the final brace
    const auto pos = body.rfind('}');
    if (pos == std::string::npos) fail(ErrorCode::io, "bad serialized dataset body");
    body.insert(pos, ",\n\"provenance\":" + prov.dump());
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write synth graph: " + path);
    out << body;
}

} // namespace fedgcv
