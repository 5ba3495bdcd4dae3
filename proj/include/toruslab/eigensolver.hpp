#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tlab {

// Applies a Hermitian operator to every column of a block.
using BlockOperator = std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>;

struct LobpcgOptions {
    int block = 8;           // columns iterated together
    int nconv = -1;          // leading pairs that must converge (-1: all)
    double tol = 1e-9;       // on |A x - mu x| / max(1, |mu|)
    int max_iter = 4000;
    std::uint64_t seed = 1;
};

struct EigenResult {
    Eigen::VectorXd values;     // ascending
    Eigen::MatrixXcd vectors;   // Euclidean-orthonormal columns
    Eigen::VectorXd residuals;  // |A x - mu x|
    int iterations = 0;
    bool converged = false;
};

// Blocked locally optimal conjugate-gradient Rayleigh-Ritz iteration
// (X, residual W, search direction P), each block kept orthonormal by
// singular-value QB; no preconditioner.
EigenResult lobpcg(const BlockOperator& A, Eigen::Index dim, const LobpcgOptions& opt);

// Dense Hermitian eigensolvers (LAPACK zheevd), ascending.
Eigen::VectorXd dense_eigenvalues(Eigen::MatrixXcd A);
EigenResult dense_eigensystem(Eigen::MatrixXcd A);

}  // namespace tlab
