#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fedgcv/eigensolver.hpp"
#include "fedgcv/errors.hpp"
#include "fedgcv/graph.hpp"
#include "fedgcv/partition.hpp"
#include "fedgcv/rng.hpp"
#include "test_util.hpp"

using namespace fedgcv;

TEST_CASE("SparseGraph symmetrizes and deduplicates") {
    const SparseGraph g = SparseGraph::from_edges(3, {{1, 0}, {0, 1}, {1, 2}, {2, 1}});
    CHECK(g.edge_count() == 2);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
    CHECK(g.degree(1) == 2);
    CHECK_THROWS_AS(SparseGraph::from_edges(2, {{0, 0}}), Error);
    CHECK_THROWS_AS(SparseGraph::from_edges(2, {{0, 5}}), Error);
}

TEST_CASE("normalized adjacency on K3 is constant 1/3") {
    const SparseGraph k3 = SparseGraph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    const Matrix a = Matrix(normalized_adjacency(k3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(a(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("normalized adjacency: isolated node row is e_i") {
    const SparseGraph g = SparseGraph::from_edges(1, {});
    const Matrix a = Matrix(normalized_adjacency(g));
    CHECK(a(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("normalized adjacency on P3 matches the dense definition") {
    const SparseGraph p3 = SparseGraph::from_edges(3, {{0, 1}, {1, 2}});
    const Matrix ours = Matrix(normalized_adjacency(p3));
    const Matrix oracle = testutil::dense_normalized_adjacency(p3);
    CHECK((ours - oracle).cwiseAbs().maxCoeff() < 1e-14);
    // row entry count = degree + 1
    const SpMat sp = normalized_adjacency(p3);
    for (int i = 0; i < 3; ++i) {
        int count = 0;
        for (SpMat::InnerIterator it(sp, i); it; ++it) ++count;
        CHECK(count == p3.degree(i) + 1);
    }
}

TEST_CASE("normalized Laplacian of a single edge has eigenvalues {0, 2}") {
    const SparseGraph g = SparseGraph::from_edges(2, {{0, 1}});
    const Matrix l = Matrix(normalized_laplacian(g));
    CHECK(l(0, 0) == doctest::Approx(1.0));
    CHECK(l(0, 1) == doctest::Approx(-1.0));
    Vector evals;
    Matrix evecs;
    jacobi_eigen(l, evals, evecs);
    CHECK(evals(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(evals(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("normalized Laplacian of K3 has eigenvalues {0, 1.5, 1.5}") {
    const SparseGraph k3 = SparseGraph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    const Matrix l = Matrix(normalized_laplacian(k3));
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(l);
    CHECK(oracle.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(oracle.eigenvalues()(1) == doctest::Approx(1.5));
    CHECK(oracle.eigenvalues()(2) == doctest::Approx(1.5));
}

TEST_CASE("connected graph: L_norm kernel is D^{1/2} 1") {
    const SparseGraph g = testutil::random_graph(12, 0.4, 99);
    const Matrix l = Matrix(normalized_laplacian(g));
    Vector v(12);
    for (int i = 0; i < 12; ++i) v(i) = std::sqrt(static_cast<double>(g.degree(i)));
    if (v.minCoeff() > 0) CHECK((l * v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("isolated node policy") {
    const SparseGraph g = SparseGraph::from_edges(3, {{0, 1}});
    const Matrix l = Matrix(normalized_laplacian(g));
    CHECK(l(2, 2) == doctest::Approx(1.0));
    CHECK(l.row(2).cwiseAbs().sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(normalized_laplacian(g, IsolatedNodePolicy::reject), Error);
}

TEST_CASE("propagation and Laplacian matrices are symmetric with bounded spectrum") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const SparseGraph g = testutil::random_graph(20, 0.25, seed);
        const Matrix a = Matrix(normalized_adjacency(g));
        const Matrix l = Matrix(normalized_laplacian(g));
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(a.minCoeff() >= 0.0);
        CHECK(a.maxCoeff() <= 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(l);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
        CHECK(es.eigenvalues().maxCoeff() <= 2.0 + 1e-8);
    }
}

TEST_CASE("smallest_eigenpairs: identity and diagonal cases") {
    const Matrix eye = Matrix::Identity(3, 3);
    const auto p1 = smallest_eigenpairs(eye, 2);
    CHECK(p1.eigenvalues(0) == doctest::Approx(1.0));
    CHECK(p1.eigenvalues(1) == doctest::Approx(1.0));
    CHECK((p1.eigenvectors.transpose() * p1.eigenvectors - Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() < 1e-10);

    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 0.1;
    d(1, 1) = 0.5;
    d(2, 2) = 1.9;
    const auto p2 = smallest_eigenpairs(d, 2);
    CHECK(p2.eigenvalues(0) == doctest::Approx(0.1));
    CHECK(p2.eigenvalues(1) == doctest::Approx(0.5));
    CHECK(std::abs(p2.eigenvectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(p2.eigenvectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("smallest_eigenpairs matches a full dense decomposition on random PSD") {
    testutil::Matrix m;
    Rng rng(7);
    const int n = 20;
    Matrix b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
    const Matrix psd = b * b.transpose() / n;

    const auto profile = smallest_eigenpairs(psd, 5);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(psd);
    for (int i = 0; i < 5; ++i)
        CHECK(profile.eigenvalues(i) == doctest::Approx(oracle.eigenvalues()(i)).epsilon(1e-8));
    for (int i = 0; i < 5; ++i) {
        const Vector u = profile.eigenvectors.col(i);
        CHECK((psd * u - profile.eigenvalues(i) * u).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("smallest_eigenpairs rejects asymmetric input and bad k") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    CHECK_THROWS_AS(smallest_eigenpairs(m, 1), Error);
    CHECK_THROWS_AS(smallest_eigenpairs(Matrix::Identity(2, 2), 0), Error);
    CHECK_THROWS_AS(smallest_eigenpairs(Matrix::Identity(2, 2), 3), Error);
}

TEST_CASE("Lanczos path agrees with the dense oracle above the cutoff") {
    const SparseGraph g = testutil::random_graph(600, 0.01, 42);
    const SpMat l = normalized_laplacian(g);
    const auto profile = smallest_eigenpairs(l, 6); // n > 512: Lanczos route
    const Matrix dense_l(l);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(dense_l);
    for (int i = 0; i < 6; ++i)
        CHECK(std::abs(profile.eigenvalues(i) - oracle.eigenvalues()(i)) < 1e-8);
    CHECK((profile.eigenvectors.transpose() * profile.eigenvectors - Matrix::Identity(6, 6))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    for (int i = 0; i < 6; ++i) {
        const Vector u = profile.eigenvectors.col(i);
        CHECK((l * u - profile.eigenvalues(i) * u).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("Lanczos recovers eigenvalue multiplicities") {
    // Two disjoint 300-node components: eigenvalue 0 has multiplicity 2.
    std::vector<std::pair<int, int>> edges;
    Rng rng(5);
    auto chain = [&](int base) {
        for (int i = 0; i < 299; ++i) edges.emplace_back(base + i, base + i + 1);
        for (int e = 0; e < 200; ++e)
            edges.emplace_back(base + rng.uniform_int(300), base + rng.uniform_int(300));
    };
    chain(0);
    chain(300);
    std::erase_if(edges, [](auto& e) { return e.first == e.second; });
    const SparseGraph g = SparseGraph::from_edges(600, edges);
    EigOptions opts;
    opts.budget_factor = 300; // verification restarts on clustered spectra need headroom
    const auto profile = smallest_eigenpairs(normalized_laplacian(g), 3, opts);
    CHECK(std::abs(profile.eigenvalues(0)) < 1e-9);
    CHECK(std::abs(profile.eigenvalues(1)) < 1e-9);
    CHECK(profile.eigenvalues(2) > 1e-8);
}

TEST_CASE("partition: two disjoint triangles split cleanly") {
    const SparseGraph g =
        SparseGraph::from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    const auto assign = partition_graph(g, 2, 123);
    CHECK(edge_cut(g, assign) == 0);
    CHECK(assign[0] == assign[1]);
    CHECK(assign[1] == assign[2]);
    CHECK(assign[3] == assign[4]);
    CHECK(assign[4] == assign[5]);
    CHECK(assign[0] != assign[3]);
}

TEST_CASE("partition: P10 two-way cut matches the exhaustive optimum") {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < 9; ++i) edges.emplace_back(i, i + 1);
    const SparseGraph p10 = SparseGraph::from_edges(10, edges);

    // Oracle: minimum cut over all balanced (4..6 per side) 2-partitions.
    std::int64_t best = 1 << 20;
    for (int mask = 0; mask < (1 << 10); ++mask) {
        const int size = __builtin_popcount(mask);
        if (size < 4 || size > 6) continue;
        std::vector<int> a(10);
        for (int i = 0; i < 10; ++i) a[i] = (mask >> i) & 1;
        best = std::min(best, edge_cut(p10, a));
    }
    CHECK(best == 1);

    for (std::uint64_t seed : {1ULL, 7ULL, 2025ULL}) {
        const auto assign = partition_graph(p10, 2, seed);
        CHECK(edge_cut(p10, assign) == best);
    }
}

TEST_CASE("partition is deterministic and balanced") {
    const SparseGraph g = testutil::random_graph(100, 0.08, 17);
    const auto a1 = partition_graph(g, 4, 55);
    const auto a2 = partition_graph(g, 4, 55);
    CHECK(a1 == a2);
    std::vector<int> sizes(4, 0);
    for (int p : a1) ++sizes[p];
    for (int p = 0; p < 4; ++p) {
        CHECK(sizes[p] >= 20); // 0.8 * 25
        CHECK(sizes[p] <= 30); // 1.2 * 25
    }
    CHECK_THROWS_AS(partition_graph(g, 101, 0), Error);
}

TEST_CASE("assignment file round-trips and validates") {
    const std::vector<int> assign{0, 1, 0, 1, 1};
    const std::string path = "/tmp/fedgcv_test_assign.json";
    save_assignment(assign, path);
    CHECK(load_assignment(path, 5, 2) == assign);
    CHECK_THROWS_AS(load_assignment(path, 4, 2), Error);
    CHECK_THROWS_AS(load_assignment(path, 5, 1), Error); // entries out of [0, K)
}
