#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fedgcv/datagen.hpp"
#include "fedgcv/dataset.hpp"
#include "fedgcv/errors.hpp"
#include "fedgcv/partition.hpp"
#include "test_util.hpp"

using namespace fedgcv;

namespace {

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

} // namespace

TEST_CASE("load_dataset: smallest connected graph") {
    const std::string path = "/tmp/fedgcv_test_ds2.json";
    write_file(path, R"({"format_version":1,"n":2,"d":1,"C":2,
      "edges":[[0,1],[1,0]],
      "x":[[0.5],[1.5]],"y":[0,1],
      "train_mask":[true,false],"val_mask":[false,false],"test_mask":[false,true]})");
    const Dataset ds = load_dataset(path);
    CHECK(ds.n() == 2);
    CHECK(ds.graph.edge_count() == 1); // symmetrized + deduplicated
    CHECK(ds.graph.has_edge(0, 1));
    CHECK(ds.d() == 1);
    CHECK(ds.num_classes == 2);
}

TEST_CASE("load_dataset: mask overlap rejected") {
    const std::string path = "/tmp/fedgcv_test_ds_overlap.json";
    write_file(path, R"({"format_version":1,"n":4,"d":1,"C":2,
      "edges":[[0,1],[1,2],[2,3]],
      "x":[[0],[1],[0],[1]],"y":[0,1,0,1],
      "train_mask":[true,false,false,true],"val_mask":[false,true,false,false],
      "test_mask":[false,false,true,true]})");
    CHECK_THROWS_AS(load_dataset(path), Error);
    try {
        load_dataset(path);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::validation);
    }
}

TEST_CASE("load_dataset: label out of range and malformed file") {
    const std::string bad_label = "/tmp/fedgcv_test_ds_badlabel.json";
    write_file(bad_label, R"({"format_version":1,"n":2,"d":1,"C":2,
      "edges":[[0,1]],"x":[[0],[1]],"y":[0,2],
      "train_mask":[true,false],"val_mask":[false,false],"test_mask":[false,true]})");
    CHECK_THROWS_AS(load_dataset(bad_label), Error);

    const std::string garbled = "/tmp/fedgcv_test_ds_garbled.json";
    write_file(garbled, "{not json");
    try {
        load_dataset(garbled);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
    }
}

TEST_CASE("dataset save/load round-trip") {
    const Dataset ds = testutil::random_dataset(15, 4, 3, 0.3, 31);
    const std::string path = "/tmp/fedgcv_test_roundtrip.json";
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    CHECK(back.n() == ds.n());
    CHECK(back.graph.edge_count() == ds.graph.edge_count());
    CHECK((back.X - ds.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.y == ds.y);
    CHECK(back.train_mask == ds.train_mask);
}

TEST_CASE("induce_shards: identity partition") {
    const Dataset ds = testutil::random_dataset(10, 3, 2, 0.4, 77);
    const auto shards = induce_shards(ds, std::vector<int>(10, 0));
    REQUIRE(shards.size() == 1);
    CHECK(shards[0].n() == 10);
    CHECK(shards[0].local.graph.edge_count() == ds.graph.edge_count());
    CHECK((shards[0].local.X - ds.X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("induce_shards: cut edges dropped") {
    Dataset ds = testutil::random_dataset(2, 2, 2, 0.0, 5);
    ds.graph = SparseGraph::from_edges(2, {{0, 1}});
    const auto shards = induce_shards(ds, {0, 1});
    REQUIRE(shards.size() == 2);
    CHECK(shards[0].n() == 1);
    CHECK(shards[1].n() == 1);
    CHECK(shards[0].local.graph.edge_count() == 0);
    CHECK(shards[1].local.graph.edge_count() == 0);
}

TEST_CASE("induce_shards: remerging features reproduces X exactly") {
    const Dataset ds = testutil::random_dataset(40, 6, 3, 0.15, 13);
    const auto assign = partition_graph(ds.graph, 4, 9);
    const auto shards = induce_shards(ds, assign);

    int covered = 0;
    Matrix merged = Matrix::Zero(ds.n(), ds.d());
    std::vector<int> seen(ds.n(), 0);
    for (const auto& s : shards) {
        covered += s.n();
        for (int i = 0; i < s.n(); ++i) {
            merged.row(s.global_ids[i]) = s.local.X.row(i);
            ++seen[s.global_ids[i]];
        }
        // induced edges are exactly the original edges inside the shard
        for (auto [u, v] : s.local.graph.edges())
            CHECK(ds.graph.has_edge(s.global_ids[u], s.global_ids[v]));
    }
    CHECK(covered == ds.n());
    for (int i = 0; i < ds.n(); ++i) CHECK(seen[i] == 1);
    CHECK((merged - ds.X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generated cora benchmark has the documented shape") {
    const Dataset cora = generate_benchmark("cora");
    CHECK(cora.n() == 2708);
    CHECK(cora.d() == 1433);
    CHECK(cora.num_classes == 7);
    CHECK(cora.graph.edge_count() == 5429);

    const std::string path = "/tmp/fedgcv_test_cora.json";
    save_dataset(cora, path);
    const Dataset loaded = load_dataset(path);
    CHECK(loaded.n() == 2708);
    CHECK(loaded.d() == 1433);
    CHECK(loaded.num_classes == 7);
    std::remove(path.c_str());

    // Cora partition: shard node counts add back up to n.
    const auto assign = partition_graph(cora.graph, 10, 2025);
    const auto shards = induce_shards(cora, assign);
    CHECK(shards.size() == 10);
    int total = 0;
    for (const auto& s : shards) total += s.n();
    CHECK(total == 2708);
}

TEST_CASE("generation is deterministic per name") {
    const Dataset a = generate_benchmark("toy");
    const Dataset b = generate_benchmark("toy");
    CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.y == b.y);
    CHECK(a.graph.edges() == b.graph.edges());
}
