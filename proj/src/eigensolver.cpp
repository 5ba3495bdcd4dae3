#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "toruslab/eigensolver.hpp"

#include <random>

namespace tlab {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

namespace {

// Orthonormalize the columns of V (dropping numerically dependent
// directions) and return the applied transform T with V_new = V T.
MatrixXcd svqb(MatrixXcd& V, double drop = 1e-13) {
    if (V.cols() == 0) return MatrixXcd(0, 0);
    MatrixXcd T = MatrixXcd::Identity(V.cols(), V.cols());
    for (int pass = 0; pass < 2; ++pass) {
        MatrixXcd G = V.adjoint() * V;
        G = 0.5 * (G + G.adjoint());
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(G);
        const VectorXd& d = es.eigenvalues();
        double dmax = d.maxCoeff();
        std::vector<Index> keep;
        for (Index i = d.size() - 1; i >= 0; --i)
            if (d(i) > drop * dmax && d(i) > 0) keep.push_back(i);
        MatrixXcd S(V.cols(), static_cast<Index>(keep.size()));
        for (std::size_t c = 0; c < keep.size(); ++c)
            S.col(static_cast<Index>(c)) = es.eigenvectors().col(keep[c]) / std::sqrt(d(keep[c]));
        V = V * S;
        T = T * S;
        if (V.cols() == 0) break;
    }
    return T;
}

void project_out(MatrixXcd& V, MatrixXcd& AV, const MatrixXcd& Q, const MatrixXcd& AQ) {
    for (int pass = 0; pass < 2; ++pass) {
        MatrixXcd C = Q.adjoint() * V;
        V -= Q * C;
        AV -= AQ * C;
    }
}

void rayleigh_ritz(const MatrixXcd& S, const MatrixXcd& AS, Index b, MatrixXcd& Y, VectorXd& mu) {
    MatrixXcd G = S.adjoint() * AS;
    G = 0.5 * (G + G.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(G);
    Y = es.eigenvectors().leftCols(b);
    mu = es.eigenvalues().head(b);
}

}  // namespace

EigenResult lobpcg(const BlockOperator& A, Index dim, const LobpcgOptions& opt) {
    EigenResult res;
    const Index b = opt.block;
    if (b <= 0) {
        res.converged = true;
        res.vectors = MatrixXcd(dim, 0);
        return res;
    }
    if (b > dim / 2) throw std::invalid_argument("lobpcg: block too large for the dimension");
    const Index nconv = opt.nconv < 0 ? b : std::min<Index>(opt.nconv, b);

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    MatrixXcd X(dim, b);
    for (Index c = 0; c < b; ++c)
        for (Index r = 0; r < dim; ++r) {
            double re = nd(rng);
            double im = nd(rng);
            X(r, c) = std::complex<double>(re, im);
        }
    svqb(X);
    MatrixXcd AX = A(X);
    MatrixXcd Y;
    VectorXd mu;
    rayleigh_ritz(X, AX, b, Y, mu);
    X = X * Y;
    AX = AX * Y;

    MatrixXcd P(dim, 0), AP(dim, 0);
    VectorXd rn(b);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        if (it > 0 && it % 25 == 0) {
            svqb(X);
            AX = A(X);
            rayleigh_ritz(X, AX, X.cols(), Y, mu);
            X = X * Y;
            AX = AX * Y;
        }
        MatrixXcd R = AX - X * mu.asDiagonal();
        std::vector<Index> active;
        bool done = true;
        for (Index i = 0; i < b; ++i) {
            rn(i) = R.col(i).norm();
            bool ok = rn(i) <= opt.tol * std::max(1.0, std::abs(mu(i)));
            if (!ok) {
                active.push_back(i);
                if (i < nconv) done = false;
            }
        }
        if (done) {
            res.converged = true;
            break;
        }
        MatrixXcd W(dim, static_cast<Index>(active.size()));
        for (std::size_t c = 0; c < active.size(); ++c) W.col(static_cast<Index>(c)) = R.col(active[c]);
        MatrixXcd dummy = MatrixXcd::Zero(dim, W.cols());
        project_out(W, dummy, X, AX);
        svqb(W);
        MatrixXcd AW = A(W);
        if (P.cols() > 0) {
            project_out(P, AP, X, AX);
            project_out(P, AP, W, AW);
            MatrixXcd T = svqb(P);
            AP = AP * T;
            if (it % 5 == 0 && P.cols() > 0) AP = A(P);
        }
        const Index nw = W.cols(), np = P.cols();
        MatrixXcd S(dim, b + nw + np), AS(dim, b + nw + np);
        S << X, W, P;
        AS << AX, AW, AP;
        rayleigh_ritz(S, AS, b, Y, mu);
        MatrixXcd Yd = Y.bottomRows(nw + np);
        X = S * Y;
        AX = AS * Y;
        P = S.rightCols(nw + np) * Yd;
        AP = AS.rightCols(nw + np) * Yd;
    }
    // final explicit residuals
    svqb(X);
    AX = A(X);
    rayleigh_ritz(X, AX, X.cols(), Y, mu);
    X = X * Y;
    AX = AX * Y;
    res.values = mu;
    res.vectors = X;
    res.residuals.resize(X.cols());
    bool ok = true;
    for (Index i = 0; i < X.cols(); ++i) {
        res.residuals(i) = (AX.col(i) - mu(i) * X.col(i)).norm();
        if (i < nconv && res.residuals(i) > 10 * opt.tol * std::max(1.0, std::abs(mu(i)))) ok = false;
    }
    res.converged = res.converged && ok;
    res.iterations = it;
    return res;
}

Eigen::VectorXd dense_eigenvalues(Eigen::MatrixXcd A) {
    const lapack_int n = static_cast<lapack_int>(A.rows());
    VectorXd w(n);
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n, A.data(), n, w.data());
    if (info != 0) throw std::runtime_error("zheevd failed with info " + std::to_string(info));
    return w;
}

EigenResult dense_eigensystem(Eigen::MatrixXcd A) {
    const lapack_int n = static_cast<lapack_int>(A.rows());
    const MatrixXcd A0 = A;
    EigenResult r;
    r.values.resize(n);
    lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, r.values.data());
    if (info != 0) throw std::runtime_error("zheevd failed with info " + std::to_string(info));
    r.vectors = A;
    r.residuals = ((A0 * r.vectors) - r.vectors * r.values.asDiagonal()).colwise().norm().transpose();
    r.converged = true;
    return r;
}

}  // namespace tlab
