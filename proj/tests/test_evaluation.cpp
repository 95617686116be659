#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "fedgcv/errors.hpp"
#include "fedgcv/evaluation.hpp"
#include "fedgcv/partition.hpp"
#include "fedgcv/rng.hpp"
#include "test_util.hpp"

using namespace fedgcv;

namespace {

// Independent oracle: recount balanced accuracy at every candidate midpoint.
MiaThreshold sweep_oracle(const std::vector<double>& members,
                          const std::vector<double>& nonmembers) {
    std::vector<double> all(members);
    all.insert(all.end(), nonmembers.begin(), nonmembers.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    MiaThreshold best;
    best.balanced_accuracy = -1.0;
    if (all.size() == 1) {
        best.tau_pre = all[0];
        best.balanced_accuracy = 0.5;
        best.degenerate = true;
        return best;
    }
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        const double t = 0.5 * (all[i] + all[i + 1]);
        int tp = 0, tn = 0;
        for (double v : members) tp += (v < t);
        for (double v : nonmembers) tn += (v >= t);
        const double ba = 0.5 * (double(tp) / members.size() + double(tn) / nonmembers.size());
        if (ba > best.balanced_accuracy) {
            best.balanced_accuracy = ba;
            best.tau_pre = t;
        }
    }
    return best;
}

} // namespace

TEST_CASE("sample_loss: uniform logits give ln C; confident prediction near zero") {
    Dataset ds;
    ds.graph = SparseGraph::from_edges(1, {});
    ds.num_classes = 7;
    ds.X = Matrix::Ones(1, 2);
    ds.y = {3};
    ds.train_mask = {1};
    ds.val_mask = {0};
    ds.test_mask = {0};
    auto shard = testutil::shard_of(ds);

    GcnParams p;
    p.W1 = Matrix::Zero(2, 3);
    p.b1 = Vector::Zero(3);
    p.W2 = Matrix::Zero(3, 7);
    p.b2 = Vector::Zero(7);
    CHECK(sample_loss(flatten(p), shard, 0) == doctest::Approx(std::log(7.0)).epsilon(1e-12));

    p.b2(3) = 40.0; // perfectly confident correct prediction
    CHECK(sample_loss(flatten(p), shard, 0) < 1e-12);
}

TEST_CASE("sample_loss agrees with masked_cross_entropy on a singleton mask") {
    const Dataset ds = testutil::random_dataset(6, 3, 3, 0.4, 3);
    const auto shard = testutil::shard_of(ds);
    const ParamVector theta = flatten(glorot_init(3, 4, 3, 5));
    const Matrix logits =
        gcn_forward(unflatten(theta), shard.ahat, ds.X, std::nullopt, 0.0);
    for (int node : {0, 2, 5}) {
        Mask m(6, 0);
        m[node] = 1;
        CHECK(sample_loss(theta, shard, node) ==
              doctest::Approx(masked_cross_entropy(logits, ds.y, m)).epsilon(1e-12));
    }
}

TEST_CASE("fit_threshold: separated sets give the documented midpoint") {
    const std::vector<double> members{0.1, 0.2};
    const std::vector<double> nonmembers{1.0, 1.2};
    const auto thr = fit_threshold(members, nonmembers);
    CHECK(thr.tau_pre == doctest::Approx(0.6));
    CHECK(thr.balanced_accuracy == doctest::Approx(1.0));
    CHECK_FALSE(thr.degenerate);
    CHECK(mia_rate(members, thr) == doctest::Approx(1.0));
    CHECK(mia_rate(nonmembers, thr) == doctest::Approx(0.0));
}

TEST_CASE("fit_threshold: identical losses raise the degenerate flag") {
    const std::vector<double> same{0.5, 0.5, 0.5};
    const auto thr = fit_threshold(same, same);
    CHECK(thr.degenerate);
    CHECK(thr.tau_pre == doctest::Approx(0.5));
    CHECK(thr.balanced_accuracy == doctest::Approx(0.5));
}

TEST_CASE("fit_threshold: swapping the sets leaves separability symmetric") {
    Rng rng(9);
    std::vector<double> a, b;
    for (int i = 0; i < 40; ++i) a.push_back(0.3 + 0.2 * rng.normal());
    for (int i = 0; i < 60; ++i) b.push_back(1.1 + 0.3 * rng.normal());
    const auto ab = fit_threshold(a, b);
    const auto ba = fit_threshold(b, a);
    // swapping sets mirrors every per-threshold balanced accuracy to 1 - BA,
    // so the orientation-free separability score is unchanged
    CHECK(ab.separability == doctest::Approx(ba.separability).epsilon(1e-12));
    CHECK(ab.separability >= 0.5);
}

TEST_CASE("fit_threshold equals the exhaustive sweep oracle on 100 random configs") {
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(1000 + trial);
        const int nm = 1 + rng.uniform_int(200);
        const int nn = 1 + rng.uniform_int(200);
        std::vector<double> members(nm), nonmembers(nn);
        const double shift = rng.uniform() * 2.0;
        for (auto& v : members) v = std::abs(0.4 * rng.normal());
        for (auto& v : nonmembers) v = std::abs(shift + 0.5 * rng.normal());
        if (trial % 7 == 0) { // duplicated values across sets
            for (int i = 0; i < std::min(nm, nn) / 2; ++i) nonmembers[i] = members[i];
        }
        const auto ours = fit_threshold(members, nonmembers);
        const auto oracle = sweep_oracle(members, nonmembers);
        CHECK(ours.balanced_accuracy == doctest::Approx(oracle.balanced_accuracy).epsilon(1e-12));
        CHECK(ours.tau_pre == doctest::Approx(oracle.tau_pre).epsilon(1e-12));
    }
}

TEST_CASE("mia_rate: boundary cases and counting") {
    MiaThreshold thr;
    thr.tau_pre = 1.0;
    CHECK(mia_rate(std::vector<double>{1.0, 1.5, 2.0}, thr) == doctest::Approx(0.0));
    CHECK(mia_rate(std::vector<double>{0.1, 0.5, 0.9}, thr) == doctest::Approx(1.0));
    const std::vector<double> eight{0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9};
    CHECK(mia_rate(eight, thr) == doctest::Approx(3.0 / 8.0));
}

TEST_CASE("mia_rate is monotone when member losses increase pointwise") {
    Rng rng(77);
    MiaThreshold thr;
    thr.tau_pre = 0.8;
    std::vector<double> losses;
    for (int i = 0; i < 50; ++i) losses.push_back(std::abs(rng.normal()));
    double prev = mia_rate(losses, thr);
    for (int round = 0; round < 5; ++round) {
        for (auto& v : losses) v += 0.1 + 0.05 * rng.uniform();
        const double now = mia_rate(losses, thr);
        CHECK(now <= prev);
        prev = now;
    }
}

TEST_CASE("mia sets are disjoint and non-empty by construction") {
    const Dataset ds = testutil::random_dataset(40, 4, 2, 0.2, 21);
    const auto assign = partition_graph(ds.graph, 4, 5);
    const auto shards = induce_shards(ds, assign);
    const auto sets = build_mia_sets(shards, 1);
    CHECK(!sets.members.empty());
    CHECK(!sets.nonmembers.empty());
    for (const auto& m : sets.members) CHECK(shards[m.shard].client_id == 1);
    for (const auto& nm : sets.nonmembers) {
        CHECK(shards[nm.shard].client_id != 1);
        CHECK(shards[nm.shard].local.test_mask[nm.node] == 1);
    }
}

TEST_CASE("global_accuracy: perfect and constant predictors") {
    Dataset ds = testutil::random_dataset(10, 3, 2, 0.0, 33);
    ds.y.assign(10, 0);
    for (int i = 5; i < 10; ++i) ds.y[i] = 1;
    ds.test_mask.assign(10, 1);
    ds.train_mask.assign(10, 0);
    ds.val_mask.assign(10, 0);
    auto shard = testutil::shard_of(ds);

    GcnParams p;
    p.W1 = Matrix::Zero(3, 2);
    p.b1 = Vector::Zero(2);
    p.W2 = Matrix::Zero(2, 2);
    p.b2.resize(2);
    p.b2 << 1.0, 0.0; // constant class-0 predictor on a balanced split
    CHECK(global_accuracy(flatten(p), {shard}, Split::test) == doctest::Approx(0.5));

    CHECK_THROWS_AS(global_accuracy(flatten(p), {shard}, Split::train), Error);
}

TEST_CASE("retrain oracle: K=2 equals centralized training on the kept shard") {
    const Dataset ds = testutil::random_dataset(24, 4, 2, 0.25, 41);
    const auto assign = partition_graph(ds.graph, 2, 9);
    FedConfig cfg;
    cfg.rounds = 4;
    cfg.hidden = 4;
    cfg.seed = 11;
    cfg.local.epochs = 2;
    cfg.local.lr = 0.05;

    const ParamVector oracle = retrain_oracle(ds, assign, cfg, 1);

    // By hand: keep only shard 0 and run the same number of rounds.
    auto shards = induce_shards(ds, assign);
    std::vector<ClientShard> keep{shards[0]};
    const ParamVector init =
        flatten(glorot_init(4, 4, 2, seed_mix(cfg.seed, stream_tag("init"))));
    const auto state = run_federated_over_shards(std::move(keep), init, 4, cfg, "train");
    CHECK((oracle.v - state.global.v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("retrain oracle is bit-independent of the departed shard's features") {
    Dataset ds = testutil::random_dataset(30, 4, 2, 0.25, 43);
    const auto assign = partition_graph(ds.graph, 3, 13);
    FedConfig cfg;
    cfg.rounds = 3;
    cfg.hidden = 4;
    cfg.seed = 7;
    cfg.local.epochs = 2;

    const ParamVector a = retrain_oracle(ds, assign, cfg, 2);
    Dataset perturbed = ds;
    for (int i = 0; i < ds.n(); ++i)
        if (assign[i] == 2) perturbed.X.row(i).setConstant(123.456);
    const ParamVector b = retrain_oracle(perturbed, assign, cfg, 2);
    CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ablation: no_virtual with zero repair rounds equals full bit-exactly") {
    const Dataset ds = testutil::random_dataset(30, 4, 3, 0.25, 47);
    const auto assign = partition_graph(ds.graph, 3, 15);
    FedConfig fed;
    fed.rounds = 4;
    fed.hidden = 4;
    fed.seed = 3;
    fed.local.epochs = 2;
    UnlearnConfig un;
    un.epochs = 3;
    un.seed = 3;
    VirtualConfig virt;
    virt.repair_rounds = 0;
    virt.vgae_epochs = 10;
    virt.z_dim = 3;
    virt.hidden = 4;

    const auto full = run_ablation(ds, assign, fed, un, virt, 0, AblationVariant::full);
    const auto novirt = run_ablation(ds, assign, fed, un, virt, 0, AblationVariant::no_virtual);
    CHECK(full.accuracy == novirt.accuracy);
    CHECK(full.mia_rate_final == novirt.mia_rate_final);
    CHECK(full.mia_rate_post == novirt.mia_rate_post);
}

TEST_CASE("threshold JSON round-trip preserves tau_pre bit-exactly") {
    MiaThreshold thr;
    thr.tau_pre = 0.6234871623948723;
    thr.balanced_accuracy = 0.875;
    thr.member_loss_mean = 0.1234567890123456789;
    // nlohmann serializes doubles with round-trip precision
    nlohmann::json j{{"tau_pre", thr.tau_pre},
                     {"balanced_accuracy", thr.balanced_accuracy},
                     {"member_loss_mean", thr.member_loss_mean}};
    const std::string text = j.dump();
    const auto back = nlohmann::json::parse(text);
    CHECK(back["tau_pre"].get<double>() == thr.tau_pre);
    CHECK(back["member_loss_mean"].get<double>() == thr.member_loss_mean);
}
