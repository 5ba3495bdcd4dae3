#include "toruslab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace tlab {

namespace {

double weight(const BundlePtr& b, int q) { return std::pow(2.0, q) * b->geom->volume_weight(); }

double factorial(int n) { return n == 1 ? 1.0 : 2.0; }

}  // namespace

SectionField SpectralSlice::field(std::size_t j) const {
    SectionField f(bundle, q);
    f.data = fields.col(static_cast<Eigen::Index>(j));
    return f;
}

SectionField HkBasis::field(int j) const {
    SectionField f(bundle, 0);
    f.data = fields.col(j);
    return f;
}

SpectralSlice lowest_eigenpairs(const OperatorHandle& op, int count, double tol, std::uint64_t seed, int nconv) {
    if (op.q_in != op.q_out) throw std::invalid_argument("lowest_eigenpairs: operator is not an endomorphism");
    SpectralSlice sl;
    sl.bundle = op.bundle;
    sl.q = op.q_in;
    sl.tol = tol;
    if (count <= 0) {
        sl.converged = true;
        sl.fields = Eigen::MatrixXcd(op.dim_in(), 0);
        return sl;
    }
    if (count > op.dim_in() / 4) throw std::invalid_argument("lowest_eigenpairs: count exceeds dimension/4");
    LobpcgOptions opt;
    opt.block = count;
    opt.nconv = nconv;
    opt.tol = tol;
    opt.seed = seed;
    auto res = lobpcg([&](const Eigen::MatrixXcd& X) { return op.apply_block(X); }, op.dim_in(), opt);
    sl.iterations = res.iterations;
    sl.converged = res.converged;
    sl.mu.assign(res.values.data(), res.values.data() + res.values.size());
    sl.residuals.assign(res.residuals.data(), res.residuals.data() + res.residuals.size());
    if (!res.converged) throw SolverFailure("lowest_eigenpairs: no convergence", sl.residuals);
    sl.fields = res.vectors / std::sqrt(weight(op.bundle, sl.q));
    return sl;
}

Eigen::VectorXd dense_spectrum(const OperatorHandle& op) { return dense_eigenvalues(op.dense()); }

SpectralSlice dense_slice(const OperatorHandle& op, int count) {
    auto res = dense_eigensystem(op.dense());
    const Eigen::Index m = count < 0 ? res.values.size() : std::min<Eigen::Index>(count, res.values.size());
    SpectralSlice sl;
    sl.bundle = op.bundle;
    sl.q = op.q_in;
    sl.converged = true;
    sl.mu.assign(res.values.data(), res.values.data() + m);
    sl.residuals.assign(res.residuals.data(), res.residuals.data() + m);
    sl.fields = res.vectors.leftCols(m) / std::sqrt(weight(op.bundle, sl.q));
    return sl;
}

double alpha_volume(const HermitianForm& alpha) {
    return factorial(alpha.n()) * alpha.H.determinant().real();
}

int predicted_cluster(long k, const HermitianForm& alpha) {
    const int n = alpha.n();
    return static_cast<int>(std::lround(std::pow(double(k), n) * alpha_volume(alpha) / factorial(n)));
}

int default_block(long k, const HermitianForm& alpha) { return predicted_cluster(k, alpha) + 8; }

double hk_threshold(long k, double C, double eps) { return C / std::pow(double(k), 1.0 + eps); }

HkBasis build_Hk(const SpectralSlice& slice, long k, double C, double eps) {
    const int b2 = betti2(slice.bundle->n());
    if (!(eps > 0 && eps < 2.0 / b2)) throw std::invalid_argument("build_Hk: eps must lie in (0, 2/b2)");
    HkBasis B;
    B.bundle = slice.bundle;
    B.k = k;
    B.C = C;
    B.eps = eps;
    B.threshold = hk_threshold(k, C, eps);
    if (slice.mu.empty() || slice.mu.back() <= B.threshold)
        throw std::runtime_error("build_Hk: slice does not reach past the threshold; increase count");
    std::vector<int> keep;
    for (std::size_t j = 0; j < slice.mu.size(); ++j)
        if (slice.mu[j] <= B.threshold) keep.push_back(static_cast<int>(j));
    B.fields.resize(slice.fields.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        B.fields.col(static_cast<Eigen::Index>(c)) = slice.fields.col(keep[c]);
        B.mu.push_back(slice.mu[keep[c]]);
    }
    return B;
}

GapVerdict spectral_gap_certificate(const SpectralSlice& slice, long k, double delta0, double eps0, double C,
                                    double eps, double g_disc) {
    if (!(eps0 > 0 && eps0 < delta0)) throw std::invalid_argument("gap certificate: need 0 < eps0 < delta0");
    GapVerdict v;
    v.lower = hk_threshold(k, C, eps);
    v.upper = (delta0 - eps0) * double(k) * g_disc;
    for (double m : slice.mu) {
        if (m <= v.lower) {
            ++v.cluster;
        } else if (m <= v.upper && !v.offender) {
            v.offender = m;
        }
    }
    if (static_cast<std::size_t>(v.cluster) < slice.mu.size()) {
        v.mu_next = slice.mu[v.cluster];
        double below = v.cluster > 0 ? std::max(std::abs(slice.mu[v.cluster - 1]), 1e-300) : 1e-300;
        v.gap_ratio = v.mu_next / below;
    }
    if (v.offender) {
        v.pass = false;
        v.note = "eigenvalue inside the forbidden interval";
    } else if (slice.mu.empty() || slice.mu.back() <= v.upper) {
        v.pass = false;
        v.note = "slice too short to certify the gap";
    } else {
        v.pass = true;
    }
    return v;
}

std::pair<SectionField, SectionField> project(const SectionField& s, const HkBasis& basis) {
    if (s.q != 0) throw std::invalid_argument("project: q must be 0");
    const double w = field_weight(s);
    SectionField sh(s.bundle, 0), snh(s.bundle, 0);
    if (basis.dim() > 0) {
        Eigen::VectorXcd c = w * (basis.fields.adjoint() * s.data);
        sh.data = basis.fields * c;
    }
    snh.data = s.data - sh.data;
    return {sh, snh};
}

SectionField apply_Pk(const SectionField& s, const HkBasis& basis) {
    SectionField out = laplacian(s);
    const double w = field_weight(s);
    for (int j = 0; j < basis.dim(); ++j) {
        cplx c = w * basis.fields.col(j).dot(s.data);
        out.data -= basis.mu[static_cast<std::size_t>(j)] * c * basis.fields.col(j);
    }
    return out;
}

GreenOperator::GreenOperator(const OperatorHandle& laplace, const HkBasis& basis, Mode mode, double cg_tol)
    : op_(laplace), basis_(basis), mode_(mode), cg_tol_(cg_tol) {
    if (mode_ == Mode::dense) {
        if (laplace.dim_in() > 4096) throw std::invalid_argument("GreenOperator: dense mode limited to dimension 4096");
        auto res = dense_eigensystem(laplace.dense());
        mu_ = res.values;
        vec_ = res.vectors;
    }
}

SectionField GreenOperator::apply(const SectionField& rhs) const {
    const double w = field_weight(rhs);
    SectionField out(rhs.bundle, rhs.q);
    if (mode_ == Mode::dense) {
        // eigenvalues at or below the threshold span H_k and are dropped
        Eigen::VectorXcd c = vec_.adjoint() * rhs.data;
        for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = mu_(j) <= basis_.threshold ? cplx(0) : c(j) / mu_(j);
        out.data = vec_ * c;
        last_iter_ = 0;
        return out;
    }
    // conjugate gradients on the complement of H_k
    auto deflate = [&](Eigen::VectorXcd& v) {
        if (basis_.dim() == 0) return;
        for (int pass = 0; pass < 2; ++pass) v -= basis_.fields * (w * (basis_.fields.adjoint() * v));
    };
    SectionField tmp(rhs.bundle, rhs.q);
    Eigen::VectorXcd b = rhs.data;
    deflate(b);
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(b.size()), r = b, p = r;
    double rr = r.squaredNorm();
    const double stop = cg_tol_ * cg_tol_ * std::max(rr, 1e-300);
    int it = 0;
    const int max_it = static_cast<int>(10 * b.size());
    while (rr > stop && it < max_it) {
        tmp.data = p;
        Eigen::VectorXcd Ap = op_.apply(tmp).data;
        deflate(Ap);
        cplx pAp = p.dot(Ap);
        cplx a = rr / pAp;
        x += a * p;
        r -= a * Ap;
        double rr_new = r.squaredNorm();
        p = r + (rr_new / rr) * p;
        deflate(p);
        rr = rr_new;
        ++it;
    }
    if (rr > stop) throw std::runtime_error("GreenOperator: conjugate gradients did not converge");
    deflate(x);
    last_iter_ = it;
    out.data = x;
    return out;
}

DimensionReport dimension_asymptotics(const std::vector<std::pair<long, int>>& dims, int n, const HermitianForm& alpha) {
    if (dims.size() < 4) throw std::invalid_argument("dimension_asymptotics: need at least 4 values of k");
    DimensionReport r;
    r.target = alpha_volume(alpha);
    r.running_max = -1e300;
    r.running_min = 1e300;
    for (auto [k, d] : dims) {
        double v = factorial(n) * d / std::pow(double(k), n);
        r.k.push_back(k);
        r.dim.push_back(d);
        r.value.push_back(v);
        r.rel_dev.push_back(std::abs(v - r.target) / r.target);
        r.running_max = std::max(r.running_max, v);
        r.running_min = std::min(r.running_min, v);
    }
    return r;
}

void write_spectrum_csv(std::ostream& os, const SpectralSlice& slice) {
    os << "index,eigenvalue,residual\n" << std::setprecision(17);
    for (std::size_t j = 0; j < slice.mu.size(); ++j)
        os << j << ',' << slice.mu[j] << ',' << (j < slice.residuals.size() ? slice.residuals[j] : 0.0) << '\n';
}

}  // namespace tlab
