#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "toruslab/eigensolver.hpp"
#include "toruslab/operators.hpp"

namespace tlab {

// Lowest eigenpairs of a Laplacian; fields are l2-orthonormal columns in the
// SectionField coefficient layout.
struct SpectralSlice {
    BundlePtr bundle;
    int q = 0;
    std::vector<double> mu;
    Eigen::MatrixXcd fields;
    std::vector<double> residuals;
    int iterations = 0;
    double tol = 0;
    bool converged = false;

    std::size_t size() const { return mu.size(); }
    SectionField field(std::size_t j) const;
};

class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

// LOBPCG with a block of `count` columns; the first `nconv` pairs (default
// all) must converge. Throws SolverFailure with the residual report otherwise.
SpectralSlice lowest_eigenpairs(const OperatorHandle& op, int count, double tol = 1e-9,
                                std::uint64_t seed = 1, int nconv = -1);
// Dense diagonalization (LAPACK), keeping the lowest `count` pairs (all when
// count < 0).
SpectralSlice dense_slice(const OperatorHandle& op, int count = -1);
Eigen::VectorXd dense_spectrum(const OperatorHandle& op);

// int_X alpha^n = n! det H for constant alpha (unit-volume torus).
double alpha_volume(const HermitianForm& alpha);
// round(k^n int alpha^n / n!)
int predicted_cluster(long k, const HermitianForm& alpha);
// Solver block: predicted cluster + 8 safety columns.
int default_block(long k, const HermitianForm& alpha);

double hk_threshold(long k, double C, double eps);

struct HkBasis {
    BundlePtr bundle;
    long k = 0;
    double C = 1, eps = 0, threshold = 0;
    std::vector<double> mu;
    Eigen::MatrixXcd fields;

    int dim() const { return static_cast<int>(mu.size()); }
    SectionField field(int j) const;
};

// All eigenfields with mu <= C / k^{1+eps}. Requires 0 < eps < 2/b2 and a
// slice reaching past the threshold.
HkBasis build_Hk(const SpectralSlice& slice, long k, double C, double eps);

struct GapVerdict {
    bool pass = false;
    double lower = 0;  // C / k^{1+eps}
    double upper = 0;  // (delta0 - eps0) k g_disc
    int cluster = 0;   // N_k + 1
    double mu_next = 0;
    double gap_ratio = 0;  // mu_{N_k+1} / max(mu_{N_k}, tiny)
    std::optional<double> offender;
    std::string note;
};

GapVerdict spectral_gap_certificate(const SpectralSlice& slice, long k, double delta0, double eps0,
                                    double C, double eps, double g_disc);

// s = s_h + s_nh with s_h the l2 projection onto span(basis).
std::pair<SectionField, SectionField> project(const SectionField& s, const HkBasis& basis);

// P_k s = Delta'' s - sum_{j <= N_k} mu_j <s, e_j> e_j
SectionField apply_Pk(const SectionField& s, const HkBasis& basis);

// Green operator of P_k: inverse on the orthogonal complement of H_k, zero
// on H_k.
class GreenOperator {
public:
    enum class Mode { dense, deflated_cg };
    GreenOperator(const OperatorHandle& laplace, const HkBasis& basis, Mode mode, double cg_tol = 1e-13);
    SectionField apply(const SectionField& rhs) const;
    int last_iterations() const { return last_iter_; }

private:
    OperatorHandle op_;
    HkBasis basis_;
    Mode mode_;
    double cg_tol_;
    Eigen::VectorXd mu_;
    Eigen::MatrixXcd vec_;  // Euclidean-orthonormal eigenvectors (dense mode)
    mutable int last_iter_ = 0;
};

struct DimensionReport {
    std::vector<long> k;
    std::vector<int> dim;
    std::vector<double> value;  // n! dim / k^n
    double target = 0;          // int alpha^n
    double running_max = 0, running_min = 0;
    std::vector<double> rel_dev;
};

DimensionReport dimension_asymptotics(const std::vector<std::pair<long, int>>& dims, int n,
                                      const HermitianForm& alpha);

// CSV (index, eigenvalue, residual) with 17 significant digits.
void write_spectrum_csv(std::ostream& os, const SpectralSlice& slice);

}  // namespace tlab
