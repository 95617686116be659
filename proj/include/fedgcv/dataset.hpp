#pragma once

#include <string>
#include <vector>

#include "fedgcv/graph.hpp"

namespace fedgcv {

using Mask = std::vector<std::uint8_t>;

/*
 * Node-classification dataset: graph + dense features + labels + disjoint
 * train/val/test masks. The canonical on-disk form is the format_version 1
 * JSON object documented in the README.
 */
struct Dataset {
    SparseGraph graph;
    Matrix X;           // n x d
    std::vector<int> y; // labels in [0, C)
    int num_classes = 0;
    Mask train_mask, val_mask, test_mask;

    int n() const { return graph.n(); }
    int d() const { return static_cast<int>(X.cols()); }
};

// One client's induced subgraph. Local node i corresponds to dataset node
// global_ids[i]; cross-client edges are dropped at induction.
struct ClientShard {
    int client_id = 0;
    std::vector<int> global_ids; // local -> global, ascending
    Dataset local;
    SpMat ahat; // cached normalized adjacency of local.graph

    int n() const { return local.n(); }
    int train_count() const;
};

int count_mask(const Mask& m);
std::vector<int> mask_indices(const Mask& m);

Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

// Validates shape/label/mask invariants; throws ValidationError.
void validate_dataset(const Dataset& ds, bool require_class_coverage);

std::vector<ClientShard> induce_shards(const Dataset& ds, const std::vector<int>& assignment);

} // namespace fedgcv
