#include "fedgcv/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "parameter serialization assumes a little-endian host");

namespace fedgcv {

ParamVector flatten(const GcnParams& p) {
    ParamVector pv;
    pv.shape = {static_cast<int>(p.W1.rows()), static_cast<int>(p.W1.cols()),
                static_cast<int>(p.W2.cols())};
    pv.v.resize(pv.shape.size());
    std::int64_t off = 0;
    for (int i = 0; i < p.W1.rows(); ++i)
        for (int j = 0; j < p.W1.cols(); ++j) pv.v(off++) = p.W1(i, j);
    for (int j = 0; j < p.b1.size(); ++j) pv.v(off++) = p.b1(j);
    for (int i = 0; i < p.W2.rows(); ++i)
        for (int j = 0; j < p.W2.cols(); ++j) pv.v(off++) = p.W2(i, j);
    for (int j = 0; j < p.b2.size(); ++j) pv.v(off++) = p.b2(j);
    return pv;
}

GcnParams unflatten(const ParamVector& pv) {
    const auto [d, h, c] = pv.shape;
    if (pv.v.size() != pv.shape.size())
        fail(ErrorCode::shape, "parameter vector length does not match its shape");
    GcnParams p;
    p.W1.resize(d, h);
    p.b1.resize(h);
    p.W2.resize(h, c);
    p.b2.resize(c);
    std::int64_t off = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < h; ++j) p.W1(i, j) = pv.v(off++);
    for (int j = 0; j < h; ++j) p.b1(j) = pv.v(off++);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < c; ++j) p.W2(i, j) = pv.v(off++);
    for (int j = 0; j < c; ++j) p.b2(j) = pv.v(off++);
    return p;
}

ParamVector zeros_like(const ParamShape& shape) {
    ParamVector pv;
    pv.shape = shape;
    pv.v = Vector::Zero(shape.size());
    return pv;
}

namespace {
constexpr std::uint32_t kParamMagic = 0x46475650; // "FGVP"
constexpr std::uint32_t kParamLayoutVersion = 1;
} // namespace

std::vector<std::uint8_t> serialize_params(const ParamVector& pv) {
    std::vector<std::uint8_t> out(sizeof(std::uint32_t) * 2 + sizeof(std::int32_t) * 3 +
                                  sizeof(double) * pv.v.size());
    std::uint8_t* p = out.data();
    auto put = [&p](const void* src, std::size_t len) {
        std::memcpy(p, src, len);
        p += len;
    };
    const std::int32_t dims[3] = {pv.shape.d, pv.shape.h, pv.shape.c};
    put(&kParamMagic, sizeof(kParamMagic));
    put(&kParamLayoutVersion, sizeof(kParamLayoutVersion));
    put(dims, sizeof(dims));
    put(pv.v.data(), sizeof(double) * pv.v.size());
    return out;
}

ParamVector deserialize_params(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(std::uint32_t) * 2 + sizeof(std::int32_t) * 3)
        fail(ErrorCode::parse, "parameter blob too short");
    const std::uint8_t* p = bytes.data();
    std::uint32_t magic, version;
    std::int32_t dims[3];
    auto get = [&p](void* dst, std::size_t len) {
        std::memcpy(dst, p, len);
        p += len;
    };
    get(&magic, sizeof(magic));
    get(&version, sizeof(version));
    get(dims, sizeof(dims));
    if (magic != kParamMagic) fail(ErrorCode::parse, "bad parameter blob magic");
    if (version != kParamLayoutVersion) fail(ErrorCode::parse, "unsupported parameter layout version");
    ParamVector pv;
    pv.shape = {dims[0], dims[1], dims[2]};
    const std::int64_t count = pv.shape.size();
    if (bytes.size() != sizeof(std::uint32_t) * 2 + sizeof(std::int32_t) * 3 +
                            sizeof(double) * static_cast<std::size_t>(count))
        fail(ErrorCode::parse, "parameter blob length does not match its header");
    pv.v.resize(count);
    get(pv.v.data(), sizeof(double) * count);
    return pv;
}

void save_params(const ParamVector& pv, const std::string& path) {
    const auto bytes = serialize_params(pv);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write params: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io, "write failed: " + path);
}

ParamVector load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot read params: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_params(bytes);
}

GcnParams glorot_init(int d, int h, int c, std::uint64_t seed) {
    Rng rng(seed_mix(seed, stream_tag("glorot")));
    GcnParams p;
    p.W1.resize(d, h);
    p.W2.resize(h, c);
    p.b1 = Vector::Zero(h);
    p.b2 = Vector::Zero(c);
    const double a1 = std::sqrt(6.0 / (d + h));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < h; ++j) p.W1(i, j) = rng.uniform(-a1, a1);
    const double a2 = std::sqrt(6.0 / (h + c));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < c; ++j) p.W2(i, j) = rng.uniform(-a2, a2);
    return p;
}

Matrix gcn_forward(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                   std::optional<std::uint64_t> dropout_seed, double dropout_p,
                   GcnCache* cache) {
    if (x.cols() != p.W1.rows() || p.W1.cols() != p.W2.rows())
        fail(ErrorCode::shape, "GCN parameter shapes do not match the inputs");
    if (ahat.rows() != x.rows())
        fail(ErrorCode::shape, "propagation matrix and features disagree on node count");

    Matrix h1 = ahat * (x * p.W1);
    h1.rowwise() += p.b1.transpose();
    h1 = h1.cwiseMax(0.0);

    Matrix dropped;
    Matrix drop_mask;
    const bool dropout_on = dropout_seed.has_value() && dropout_p > 0.0;
    if (dropout_on) {
        Rng rng(*dropout_seed);
        const double keep = 1.0 - dropout_p;
        drop_mask.resize(h1.rows(), h1.cols());
        for (int i = 0; i < h1.rows(); ++i)
            for (int j = 0; j < h1.cols(); ++j)
                drop_mask(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        dropped = h1.cwiseProduct(drop_mask);
    } else {
        dropped = h1;
    }

    Matrix logits = ahat * (dropped * p.W2);
    logits.rowwise() += p.b2.transpose();

    if (cache) {
        cache->ahat = &ahat;
        cache->x = &x;
        cache->h1 = std::move(h1);
        cache->dropped = std::move(dropped);
        cache->logits = logits;
        cache->drop_mask = std::move(drop_mask);
        cache->dropout_on = dropout_on;
    }
    return logits;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

double masked_cross_entropy(const Matrix& logits, const std::vector<int>& y, const Mask& mask) {
    const int count = count_mask(mask);
    if (count == 0) fail(ErrorCode::empty_mask, "loss mask selects no node");
    double total = 0.0;
    for (int i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) continue;
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        total += lse - logits(i, y[i]);
    }
    return total / count;
}

Matrix masked_cross_entropy_grad(const Matrix& logits, const std::vector<int>& y,
                                 const Mask& mask) {
    const int count = count_mask(mask);
    if (count == 0) fail(ErrorCode::empty_mask, "loss mask selects no node");
    Matrix g = Matrix::Zero(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) continue;
        const double m = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
        g.row(i) = e / (e.sum() * count);
        g(i, y[i]) -= 1.0 / count;
    }
    return g;
}

ParamVector gcn_backward(const GcnParams& p, const GcnCache& cache, const Matrix& dlogits,
                         double weight_decay) {
    const SpMat& ahat = *cache.ahat;
    const Matrix& x = *cache.x;

    GcnParams g;
    g.b2 = dlogits.colwise().sum();
    const Matrix s2 = ahat * dlogits; // Ahat is symmetric
    g.W2 = cache.dropped.transpose() * s2;
    Matrix dh1 = s2 * p.W2.transpose();
    if (cache.dropout_on) dh1 = dh1.cwiseProduct(cache.drop_mask);
    const Matrix dpre =
        dh1.cwiseProduct((cache.h1.array() > 0.0).cast<double>().matrix());
    g.b1 = dpre.colwise().sum();
    const Matrix s1 = ahat * dpre;
    g.W1 = x.transpose() * s1;

    g.W1 += weight_decay * p.W1;
    g.W2 += weight_decay * p.W2;
    return flatten(g);
}

ParamVector gcn_loss_grad(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                          const std::vector<int>& y, const Mask& mask,
                          std::optional<std::uint64_t> dropout_seed, double dropout_p,
                          double weight_decay) {
    GcnCache cache;
    const Matrix logits = gcn_forward(p, ahat, x, dropout_seed, dropout_p, &cache);
    const Matrix dlogits = masked_cross_entropy_grad(logits, y, mask);
    return gcn_backward(p, cache, dlogits, weight_decay);
}

LocalTrainResult local_train(const ClientShard& shard, const ParamVector& start,
                             const TrainConfig& cfg) {
    const auto train_nodes = mask_indices(shard.local.train_mask);
    if (train_nodes.empty()) return {start, true};

    GcnParams params = unflatten(start);
    Rng rng(seed_mix(cfg.seed, stream_tag("local_train")));
    const int n = shard.n();

    for (int step = 0; step < cfg.epochs; ++step) {
        Mask step_mask(n, 0);
        if (static_cast<int>(train_nodes.size()) <= cfg.batch) {
            for (int i : train_nodes) step_mask[i] = 1;
        } else {
            auto picks = rng.sample_without_replacement(static_cast<int>(train_nodes.size()),
                                                        cfg.batch);
            for (int pi : picks) step_mask[train_nodes[pi]] = 1;
        }
        const std::uint64_t drop_seed =
            seed_mix(cfg.seed, stream_tag("dropout"), static_cast<std::uint64_t>(step));
        const ParamVector grad =
            gcn_loss_grad(params, shard.ahat, shard.local.X, shard.local.y, step_mask,
                          cfg.dropout > 0.0 ? std::optional<std::uint64_t>(drop_seed)
                                            : std::nullopt,
                          cfg.dropout, cfg.weight_decay);
        ParamVector flat = flatten(params);
        flat.v -= cfg.lr * grad.v;
        params = unflatten(flat);
    }
    return {flatten(params), false};
}

Vector per_node_ce(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                   const std::vector<int>& y) {
    const Matrix logits = gcn_forward(p, ahat, x, std::nullopt, 0.0);
    Vector out(logits.rows());
    for (int i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out(i) = lse - logits(i, y[i]);
    }
    return out;
}

double accuracy_on_mask(const Matrix& logits, const std::vector<int>& y, const Mask& mask) {
    int total = 0, correct = 0;
    for (int i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) continue;
        ++total;
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        correct += (best == y[i]);
    }
    if (total == 0) fail(ErrorCode::empty_split, "accuracy mask selects no node");
    return static_cast<double>(correct) / total;
}

} // namespace fedgcv
