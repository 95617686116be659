#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgcv/dataset.hpp"
#include "fedgcv/graph.hpp"

namespace fedgcv {

/*
 * Two-layer GCN for node classification:
 *   H1     = relu(Ahat X W1 + b1)
 *   logits = Ahat drop(H1) W2 + b2
 * Dropout (inverted, after the first relu) only runs when a dropout seed is
 * supplied; inference calls are fully deterministic in their inputs.
 */
struct GcnParams {
    Matrix W1; // d x h
    Vector b1; // h
    Matrix W2; // h x C
    Vector b2; // C
};

struct ParamShape {
    int d = 0, h = 0, c = 0;

    std::int64_t size() const {
        return static_cast<std::int64_t>(d) * h + h + static_cast<std::int64_t>(h) * c + c;
    }
    bool operator==(const ParamShape&) const = default;
};

// Flat view of all parameters, canonical layout: W1 row-major, b1, W2
// row-major, b2. flatten/unflatten round-trip bit-exactly.
struct ParamVector {
    ParamShape shape;
    Vector v;

    double norm() const { return v.norm(); }
    double dot(const ParamVector& o) const { return v.dot(o.v); }
};

ParamVector flatten(const GcnParams& p);
GcnParams unflatten(const ParamVector& pv);
ParamVector zeros_like(const ParamShape& shape);

// Little-endian f64 payload behind a (layout version, d, h, C) header.
void save_params(const ParamVector& pv, const std::string& path);
ParamVector load_params(const std::string& path);
std::vector<std::uint8_t> serialize_params(const ParamVector& pv);
ParamVector deserialize_params(const std::vector<std::uint8_t>& bytes);

GcnParams glorot_init(int d, int h, int c, std::uint64_t seed);

struct TrainConfig {
    double lr = 1e-2;
    double weight_decay = 5e-4;
    double dropout = 0.5;
    int epochs = 1; // gradient steps per local_train call
    int batch = 128;
    std::uint64_t seed = 0;
};

struct GcnCache {
    const SpMat* ahat = nullptr;
    const Matrix* x = nullptr;
    Matrix h1;      // post-relu, pre-dropout
    Matrix dropped; // h1 after dropout scaling (== h1 when inference)
    Matrix logits;
    Matrix drop_mask; // 0 or 1/(1-p); empty when dropout off
    bool dropout_on = false;
};

Matrix gcn_forward(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                   std::optional<std::uint64_t> dropout_seed, double dropout_p,
                   GcnCache* cache = nullptr);

// Row-wise softmax probabilities of the logits.
Matrix softmax_rows(const Matrix& logits);

// Mean cross-entropy over masked nodes. Throws EmptyMaskError.
double masked_cross_entropy(const Matrix& logits, const std::vector<int>& y, const Mask& mask);

// d(masked CE)/d(logits); zero outside the mask.
Matrix masked_cross_entropy_grad(const Matrix& logits, const std::vector<int>& y,
                                 const Mask& mask);

// Reverse pass for an arbitrary upstream dlogits, plus L2 decay on W1/W2.
ParamVector gcn_backward(const GcnParams& p, const GcnCache& cache, const Matrix& dlogits,
                         double weight_decay);

// Gradient of masked CE + (wd/2)||W||^2 at p.
ParamVector gcn_loss_grad(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                          const std::vector<int>& y, const Mask& mask,
                          std::optional<std::uint64_t> dropout_seed, double dropout_p,
                          double weight_decay);

struct LocalTrainResult {
    ParamVector params;
    bool no_train_data = false;
};

// cfg.epochs SGD steps over node-sampled loss masks of size cfg.batch.
LocalTrainResult local_train(const ClientShard& shard, const ParamVector& start,
                             const TrainConfig& cfg);

// Per-node cross-entropy, dropout off; used by evaluation.
Vector per_node_ce(const GcnParams& p, const SpMat& ahat, const Matrix& x,
                   const std::vector<int>& y);

double accuracy_on_mask(const Matrix& logits, const std::vector<int>& y, const Mask& mask);

} // namespace fedgcv
