#pragma once

#include "fedgcv/graph.hpp"

namespace fedgcv {

/*
 * The k smallest eigenpairs of a symmetric matrix, eigenvalues ascending,
 * eigenvector columns orthonormal. Residuals ||M u - lambda u||_inf are
 * within the solver tolerance per pair.
 */
struct SpectralProfile {
    int k = 0;
    Vector eigenvalues;  // length k, ascending
    Matrix eigenvectors; // n x k, orthonormal columns
};

struct EigOptions {
    int dense_cutoff = 512;       // Jacobi at or below, Lanczos above
    double residual_tol = 1e-10;  // per-pair ||M u - lambda u||_inf
    int budget_factor = 50;       // Lanczos iteration budget = factor * k
};

// Full dense decomposition by cyclic Jacobi sweeps; ascending eigenvalues.
void jacobi_eigen(const Matrix& m, Vector& eigenvalues, Matrix& eigenvectors);

SpectralProfile smallest_eigenpairs(const SpMat& m, int k, const EigOptions& opts = {});
SpectralProfile smallest_eigenpairs(const Matrix& m, int k, const EigOptions& opts = {});

} // namespace fedgcv
