#include "fedgcv/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "fedgcv/errors.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

namespace {

void check_symmetric(const Matrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        fail(ErrorCode::validation, "matrix is not symmetric within 1e-10");
}

double offdiag_norm(const Matrix& a) {
    double s = 0.0;
    for (int p = 0; p < a.rows(); ++p)
        for (int q = p + 1; q < a.cols(); ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
}

} // namespace

void jacobi_eigen(const Matrix& m, Vector& eigenvalues, Matrix& eigenvectors) {
    const int n = static_cast<int>(m.rows());
    Matrix a = m;
    Matrix v = Matrix::Identity(n, n);

    const double tol = 1e-14 * std::max(1.0, a.norm());
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && offdiag_norm(a) > tol; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i) < a(j, j); });
    eigenvalues.resize(n);
    eigenvectors.resize(n, n);
    for (int j = 0; j < n; ++j) {
        eigenvalues(j) = a(order[j], order[j]);
        eigenvectors.col(j) = v.col(order[j]);
    }
}

namespace {

SpectralProfile profile_from_dense(const Matrix& m, int k) {
    Vector evals;
    Matrix evecs;
    jacobi_eigen(m, evals, evecs);
    SpectralProfile p;
    p.k = k;
    p.eigenvalues = evals.head(k);
    p.eigenvectors = evecs.leftCols(k);
    return p;
}

// Lanczos with full reorthogonalization against both the Krylov basis and
// previously locked eigenvectors. Each Krylov run locks only an ascending
// prefix of converged Ritz pairs, so a larger eigenvalue is never accepted
// while a smaller one is unresolved. A single Krylov space carries one copy
// per distinct eigenvalue; verification restarts in the orthogonal
// complement of the locked set recover genuine multiplicities.
class LanczosSolver {
public:
    LanczosSolver(const SpMat& m, int k, const EigOptions& opts)
        : m_(m), n_(static_cast<int>(m.rows())), k_(k),
          budget_(opts.budget_factor * k), tol_(opts.residual_tol),
          rng_(seed_mix(stream_tag("lanczos"), static_cast<std::uint64_t>(m.rows()),
                        static_cast<std::uint64_t>(k))) {}

    SpectralProfile solve() {
        while (static_cast<int>(locked_vals_.size()) < k_)
            run_once(k_ - static_cast<int>(locked_vals_.size()));

        // Verification restarts: the smallest eigenvalue of the deflated
        // complement must not undercut the largest locked one, otherwise a
        // multiple eigenvalue was missed and displaces it.
        for (int round = 0; round <= k_ + 1; ++round) {
            if (static_cast<int>(locked_vals_.size()) >= n_) break;
            int max_idx = 0;
            for (int i = 1; i < k_; ++i)
                if (locked_vals_[i] > locked_vals_[max_idx]) max_idx = i;
            const double scale = std::max(1.0, std::abs(locked_vals_[max_idx]));
            const auto found = probe_complement();
            if (!found || found->first >= locked_vals_[max_idx] - 1e-12 * scale) break;
            locked_vals_[max_idx] = found->first;
            locked_vecs_[max_idx] = found->second;
        }

        std::vector<int> order(locked_vals_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int i, int j) { return locked_vals_[i] < locked_vals_[j]; });
        SpectralProfile p;
        p.k = k_;
        p.eigenvalues.resize(k_);
        p.eigenvectors.resize(n_, k_);
        for (int j = 0; j < k_; ++j) {
            p.eigenvalues(j) = locked_vals_[order[j]];
            p.eigenvectors.col(j) = locked_vecs_[order[j]];
        }
        return p;
    }

private:
    // One deflated Krylov run; locks the converged ascending prefix.
    void run_once(int want) {
        auto prefix = krylov_prefix(want);
        if (prefix.empty())
            fail(ErrorCode::convergence, "Lanczos failed to converge new Ritz pairs");
        for (auto& [lam, y] : prefix) {
            locked_vals_.push_back(lam);
            locked_vecs_.push_back(std::move(y));
        }
    }

    std::optional<std::pair<double, Vector>> probe_complement() {
        auto prefix = krylov_prefix(1);
        if (prefix.empty()) return std::nullopt;
        return prefix.front();
    }

    std::vector<std::pair<double, Vector>> krylov_prefix(int want) {
        const int remaining_dim = n_ - static_cast<int>(locked_vals_.size());
        std::vector<std::pair<double, Vector>> prefix;
        if (remaining_dim < 1) return prefix;

        std::vector<Vector> basis;
        for (int attempt = 0; attempt < 5 && basis.empty(); ++attempt) {
            Vector v(n_);
            for (int i = 0; i < n_; ++i) v(i) = rng_.normal();
            orthogonalize(v, basis);
            const double vn = v.norm();
            if (vn > 1e-12) basis.push_back(v / vn);
        }
        if (basis.empty()) return prefix;

        std::vector<double> alpha, beta;
        const int chunk = std::max(2 * want + 20, 40);
        bool exhausted = false;

        while (true) {
            const int target =
                exhausted ? static_cast<int>(alpha.size())
                          : std::min(remaining_dim, static_cast<int>(alpha.size()) + chunk);
            while (static_cast<int>(alpha.size()) < target) {
                if (iters_used_++ >= budget_)
                    fail(ErrorCode::convergence,
                         "Lanczos iteration budget exhausted before residual tolerance");
                const int j = static_cast<int>(alpha.size());
                Vector w = m_ * basis[j];
                const double a = basis[j].dot(w);
                alpha.push_back(a);
                w -= a * basis[j];
                if (j > 0) w -= beta[j - 1] * basis[j - 1];
                orthogonalize(w, basis);
                const double b = w.norm();
                if (b < 1e-13) {
                    exhausted = true; // invariant subspace
                    break;
                }
                beta.push_back(b);
                if (static_cast<int>(alpha.size()) < remaining_dim)
                    basis.push_back(w / b);
                else
                    exhausted = true;
            }
            if (static_cast<int>(alpha.size()) >= remaining_dim) exhausted = true;

            const int built = static_cast<int>(alpha.size());
            Matrix t = Matrix::Zero(built, built);
            for (int i = 0; i < built; ++i) t(i, i) = alpha[i];
            for (int i = 0; i + 1 < built && i + 1 < static_cast<int>(basis.size()); ++i) {
                t(i, i + 1) = beta[i];
                t(i + 1, i) = beta[i];
            }
            Vector tvals;
            Matrix tvecs;
            jacobi_eigen(t, tvals, tvecs);

            prefix.clear();
            for (int r = 0; r < built && static_cast<int>(prefix.size()) < want; ++r) {
                Vector y = Vector::Zero(n_);
                for (int i = 0; i < built && i < static_cast<int>(basis.size()); ++i)
                    y += tvecs(i, r) * basis[i];
                for (const auto& u : locked_vecs_) y -= u.dot(y) * u;
                for (const auto& [lv, pv] : prefix) y -= pv.dot(y) * pv;
                const double yn = y.norm();
                if (yn < 1e-8) break;
                y /= yn;
                const double lam = y.dot(m_ * y);
                const double resid = (m_ * y - lam * y).cwiseAbs().maxCoeff();
                if (resid > tol_) break; // prefix rule: stop at first miss
                prefix.emplace_back(lam, std::move(y));
            }

            if (static_cast<int>(prefix.size()) >= want || exhausted) return prefix;
        }
    }

    void orthogonalize(Vector& w, const std::vector<Vector>& basis) {
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& u : locked_vecs_) w -= u.dot(w) * u;
            for (const auto& u : basis) w -= u.dot(w) * u;
        }
    }

    const SpMat& m_;
    const int n_;
    const int k_;
    const int budget_;
    const double tol_;
    int iters_used_ = 0;
    Rng rng_;
    std::vector<Vector> locked_vecs_;
    std::vector<double> locked_vals_;
};

SpectralProfile lanczos_smallest(const SpMat& m, int k, const EigOptions& opts) {
    return LanczosSolver(m, k, opts).solve();
}

} // namespace

SpectralProfile smallest_eigenpairs(const Matrix& m, int k, const EigOptions& opts) {
    const int n = static_cast<int>(m.rows());
    if (k < 1 || k > n) fail(ErrorCode::validation, "k must be in [1, n]");
    check_symmetric(m);
    if (n <= opts.dense_cutoff) return profile_from_dense(m, k);
    SpMat sp = m.sparseView();
    return lanczos_smallest(sp, k, opts);
}

SpectralProfile smallest_eigenpairs(const SpMat& m, int k, const EigOptions& opts) {
    const int n = static_cast<int>(m.rows());
    if (k < 1 || k > n) fail(ErrorCode::validation, "k must be in [1, n]");
    if (n <= opts.dense_cutoff) {
        Matrix dense = Matrix(m);
        check_symmetric(dense);
        return profile_from_dense(dense, k);
    }
    return lanczos_smallest(m, k, opts);
}

} // namespace fedgcv
