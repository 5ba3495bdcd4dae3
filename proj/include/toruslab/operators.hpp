#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Sparse>

#include "toruslab/field.hpp"

namespace tlab {

// Low-level covariant stencils on one component array. Data attached to a
// half-cell offset c carries the extra constant phase
// exp(-2 pi i h^2 sum_b c_b F_ba) on each a-shift, which makes shifts of
// staggered data consistent with the plaquette holonomy.
class LatticeOps {
public:
    explicit LatticeOps(BundlePtr b);

    const LatticeBundle& bundle() const { return *b_; }
    std::size_t sites() const { return g_->sites; }

    using Vec = std::vector<cplx>;
    // (S^c_a f)(s) = phase_a(c) conj(U_a(s)) f(s + e_a)
    void shift(const cplx* f, cplx* out, int a, const Point& c) const;
    // exact adjoint: (S^c_a^* g)(s) = conj(phase_a(c)) U_a(s - e_a) g(s - e_a)
    void shift_adj(const cplx* g, cplx* out, int a, const Point& c) const;

    // Box-averaged covariant derivative in the complex plane j, data at c to
    // c + (e_{2j} + e_{2j+1})/2:
    //   g_x = (S^c_x f - f)/h, D_x = (g_x + S^{c+e_x/2}_y g_x)/2, D_y likewise,
    //   out = (D_x + sigma i D_y)/2.
    // sigma = +1 gives nabla_{zbar_j}, sigma = -1 gives nabla_{z_j}.
    void box(const cplx* f, cplx* out, int j, const Point& c, int sigma) const;
    void box_adj(const cplx* g, cplx* out, int j, const Point& c, int sigma) const;

    // Transport-average from offset `from` to `to` (entries differ by 0 or
    // 1/2) by successive half-step averages (g + S_a g)/2, axis 0 first.
    void average(const cplx* f, cplx* out, const Point& from, const Point& to) const;

    // Nearest-neighbour covariant Laplacian sum_a (2 - S_a - S_a^*)/h^2.
    void hop(const cplx* f, cplx* out, const Point& c) const;

private:
    cplx phase(int a, const Point& c) const;

    BundlePtr b_;
    const TorusGeometry* g_;
};

// dbar_k: q = 0 -> 1 and, for n = 2, q = 1 -> 2 (zero field for n = 1).
SectionField dbar(const SectionField& f);
// Exact adjoint w.r.t. l2_inner: q = 1 -> 0, q = 2 -> 1.
SectionField dbar_adjoint(const SectionField& u);
// d_k on q = 0 into (1,0)-forms and its adjoint.
SectionField del(const SectionField& f);
SectionField del_adjoint(const SectionField& u);

// Delta''_k: dbar* dbar on q = 0, dbar dbar* + dbar* dbar on q = 1.
SectionField laplacian(const SectionField& u);
// Rough Laplacian box''_k = nabla''* nabla'' on q = 1.
SectionField rough_laplacian(const SectionField& u);

// (V u)_l = 2 pi sum_j H_jl u_j: the curvature term of the Weitzenboeck
// formula for alpha = (i/2) sum H dz ^ dzbar acting on (0,1)-forms.
SectionField curvature_term(const SectionField& u, const Eigen::MatrixXcd& H);
// Ricci-type term of the metric; the flat metric has none. Computed from
// second differences of log det of the (constant) metric, hence zero.
Eigen::MatrixXcd metric_curvature(const TorusGeometry& g, const HermitianForm& omega);

// Delta''u - box''u - k V u - R_{alpha,k} u, with V built from alpha and
// R_{alpha,k} from alpha_k^{1,1} - k alpha.
SectionField weitzenboeck_residual(const SectionField& u, const HermitianForm& alpha, long k);

// dbar_k(dbar_k s) + 2 pi i alpha_k^{0,2} ^ s (n = 2; s transported to the
// (0,2) offset by averaging).
SectionField dbar_squared_residual(const SectionField& s);
// l2 norm of (d dbar + dbar d) s + 2 pi i alpha_k^{1,1} ^ s, all (j,l) slots.
double del_dbar_residual_norm(const SectionField& s);

struct DefectCheck {
    double lhs = 0;        // squared defect norm
    double base = 0;       // k |s|^2 + |dbar s|^2
    double ratio = 0;      // lhs * k^{2/b2} / base
    bool within = true;    // ratio <= C
};
// |dbar* dbar^2 s|^2 against (C / k^{2/b2}) (k |s|^2 + |dbar s|^2).
DefectCheck commutation_defect(const SectionField& s, long k, double C);
// |dbar*^2 dbar (dbar s)|^2 against the same right-hand side.
DefectCheck second_defect(const SectionField& s, long k, double C);

// Random test sections: white noise heat-smoothed with the hop Laplacian up
// to time t (explicit Euler), normalized to unit l2 norm. The box stencil
// is blind to the (pi, pi) checkerboard in each plane, so rough noise is not
// a meaningful smooth section.
SectionField smooth_random_section(BundlePtr b, int q, std::uint64_t seed, double t);
// Magnetic length scale 1/(pi lambda_min(H_k)); falls back to 1/(4 pi) for
// bundles without positive curvature.
double magnetic_time(const LatticeBundle& b);

enum class OpKind { dbar, dbar_adj, del, del_adj, laplacian_q0, laplacian_q1, box_q1 };

struct OperatorHandle {
    OpKind kind = OpKind::laplacian_q0;
    BundlePtr bundle;
    int q_in = 0, q_out = 0;
    bool holo_in = false, holo_out = false;
    std::function<SectionField(const SectionField&)> fn;

    SectionField apply(const SectionField& f) const;
    Eigen::Index dim_in() const;
    Eigen::Index dim_out() const;
    // Coefficient-space matrix (column j = image of unit vector j). Cached.
    const Eigen::MatrixXcd& dense() const;
    // Sparse coefficient matrix, assembled by colour probing: every stencil
    // here reaches at most one site along each axis, so sites whose
    // coordinates agree mod 4 never share a row. Cached.
    const Eigen::SparseMatrix<cplx, Eigen::RowMajor>& sparse() const;
    // Apply to every column of a coefficient block (through sparse()).
    Eigen::MatrixXcd apply_block(const Eigen::MatrixXcd& X) const;

private:
    mutable std::shared_ptr<Eigen::MatrixXcd> dense_;
    mutable std::shared_ptr<Eigen::SparseMatrix<cplx, Eigen::RowMajor>> sparse_;
};

OperatorHandle make_operator(OpKind kind, BundlePtr b);

// Coordinate text format: one "row col re im" line per nonzero.
void write_coo(std::ostream& os, const OperatorHandle& op, double drop = 0.0);

}  // namespace tlab
