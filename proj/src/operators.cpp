#include "toruslab/operators.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <stdexcept>

namespace tlab {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I(0.0, 1.0);

Point plus_half(Point c, int a) {
    c[a] += 0.5;
    return c;
}

}  // namespace

LatticeOps::LatticeOps(BundlePtr b) : b_(std::move(b)), g_(b_->geom.get()) {}

cplx LatticeOps::phase(int a, const Point& c) const {
    double v = 0;
    for (int b = 0; b < g_->d; ++b) v += c[b] * b_->F(b, a);
    return std::polar(1.0, -2.0 * kPi * g_->h * g_->h * v);
}

void LatticeOps::shift(const cplx* f, cplx* out, int a, const Point& c) const {
    const cplx ph = phase(a, c);
    const auto& U = b_->U[a];
    const auto& fw = g_->fwd[a];
    for (std::size_t s = 0; s < g_->sites; ++s) out[s] = ph * std::conj(U[s]) * f[fw[s]];
}

void LatticeOps::shift_adj(const cplx* g, cplx* out, int a, const Point& c) const {
    const cplx ph = std::conj(phase(a, c));
    const auto& U = b_->U[a];
    const auto& bw = g_->bwd[a];
    for (std::size_t s = 0; s < g_->sites; ++s) {
        std::size_t t = bw[s];
        out[s] = ph * U[t] * g[t];
    }
}

void LatticeOps::box(const cplx* f, cplx* out, int j, const Point& c, int sigma) const {
    const std::size_t S = g_->sites;
    const double h = g_->h;
    const int x = 2 * j, y = 2 * j + 1;
    Vec gx(S), gy(S), tx(S), ty(S);
    shift(f, gx.data(), x, c);
    shift(f, gy.data(), y, c);
    for (std::size_t s = 0; s < S; ++s) {
        gx[s] = (gx[s] - f[s]) / h;
        gy[s] = (gy[s] - f[s]) / h;
    }
    shift(gx.data(), tx.data(), y, plus_half(c, x));
    shift(gy.data(), ty.data(), x, plus_half(c, y));
    const cplx si = double(sigma) * I;
    for (std::size_t s = 0; s < S; ++s) {
        cplx Dx = 0.5 * (gx[s] + tx[s]);
        cplx Dy = 0.5 * (gy[s] + ty[s]);
        out[s] = 0.5 * (Dx + si * Dy);
    }
}

void LatticeOps::box_adj(const cplx* g, cplx* out, int j, const Point& c, int sigma) const {
    const std::size_t S = g_->sites;
    const double h = g_->h;
    const int x = 2 * j, y = 2 * j + 1;
    Vec a(S), b(S), t(S);
    const cplx cb = -0.5 * double(sigma) * I;  // conj(sigma i / 2)
    for (std::size_t s = 0; s < S; ++s) {
        a[s] = 0.5 * g[s];
        b[s] = cb * g[s];
    }
    // transpose of the averages
    shift_adj(a.data(), t.data(), y, plus_half(c, x));
    for (std::size_t s = 0; s < S; ++s) a[s] = 0.5 * (a[s] + t[s]);
    shift_adj(b.data(), t.data(), x, plus_half(c, y));
    for (std::size_t s = 0; s < S; ++s) b[s] = 0.5 * (b[s] + t[s]);
    // transpose of the differences
    shift_adj(a.data(), t.data(), x, c);
    for (std::size_t s = 0; s < S; ++s) out[s] = (t[s] - a[s]) / h;
    shift_adj(b.data(), t.data(), y, c);
    for (std::size_t s = 0; s < S; ++s) out[s] += (t[s] - b[s]) / h;
}

void LatticeOps::average(const cplx* f, cplx* out, const Point& from, const Point& to) const {
    const std::size_t S = g_->sites;
    Vec cur(f, f + S), t(S);
    Point c = from;
    for (int a = 0; a < g_->d; ++a) {
        while (c[a] + 0.25 < to[a]) {
            shift(cur.data(), t.data(), a, c);
            for (std::size_t s = 0; s < S; ++s) cur[s] = 0.5 * (cur[s] + t[s]);
            c[a] += 0.5;
        }
        if (std::abs(c[a] - to[a]) > 0.25) throw std::invalid_argument("average: target offset behind source");
    }
    std::copy(cur.begin(), cur.end(), out);
}

void LatticeOps::hop(const cplx* f, cplx* out, const Point& c) const {
    const std::size_t S = g_->sites;
    const double h2 = g_->h * g_->h;
    Vec t1(S), t2(S);
    for (std::size_t s = 0; s < S; ++s) out[s] = 0;
    for (int a = 0; a < g_->d; ++a) {
        shift(f, t1.data(), a, c);
        shift_adj(f, t2.data(), a, c);
        for (std::size_t s = 0; s < S; ++s) out[s] += (2.0 * f[s] - t1[s] - t2[s]) / h2;
    }
}

namespace {

cplx* ptr(SectionField& f, int c) { return f.data.data() + static_cast<std::size_t>(c) * f.sites(); }
const cplx* ptr(const SectionField& f, int c) {
    return f.data.data() + static_cast<std::size_t>(c) * f.sites();
}

}  // namespace

SectionField dbar(const SectionField& f) {
    if (f.holo) throw std::invalid_argument("dbar: (p,0) input not supported");
    if (f.q >= 2) throw std::invalid_argument("dbar: q = 2 input");
    LatticeOps ops(f.bundle);
    const int n = f.n();
    if (f.q == 0) {
        SectionField out(f.bundle, 1);
        for (int j = 0; j < n; ++j) ops.box(ptr(f, 0), ptr(out, j), j, f.offset(0), +1);
        return out;
    }
    SectionField out(f.bundle, 2);
    if (n == 1) return out;
    LatticeOps::Vec t(f.sites());
    ops.box(ptr(f, 1), ptr(out, 0), 0, f.offset(1), +1);
    ops.box(ptr(f, 0), t.data(), 1, f.offset(0), +1);
    for (std::size_t s = 0; s < f.sites(); ++s) ptr(out, 0)[s] -= t[s];
    return out;
}

SectionField dbar_adjoint(const SectionField& u) {
    if (u.holo) throw std::invalid_argument("dbar_adjoint: (p,0) input not supported");
    if (u.q == 0) throw std::invalid_argument("dbar_adjoint: q = 0 input");
    LatticeOps ops(u.bundle);
    const int n = u.n();
    const std::size_t S = u.sites();
    LatticeOps::Vec t(S);
    if (u.q == 1) {
        SectionField out(u.bundle, 0);
        for (int j = 0; j < n; ++j) {
            ops.box_adj(ptr(u, j), t.data(), j, out.offset(0), +1);
            for (std::size_t s = 0; s < S; ++s) ptr(out, 0)[s] += 2.0 * t[s];
        }
        return out;
    }
    SectionField out(u.bundle, 1);
    if (n == 1) return out;
    Point c0 = out.offset(0), c1 = out.offset(1);
    ops.box_adj(ptr(u, 0), t.data(), 0, c1, +1);
    for (std::size_t s = 0; s < S; ++s) ptr(out, 1)[s] = 2.0 * t[s];
    ops.box_adj(ptr(u, 0), t.data(), 1, c0, +1);
    for (std::size_t s = 0; s < S; ++s) ptr(out, 0)[s] = -2.0 * t[s];
    return out;
}

SectionField del(const SectionField& f) {
    if (f.q != 0) throw std::invalid_argument("del: only q = 0 input supported");
    LatticeOps ops(f.bundle);
    SectionField out(f.bundle, 1, true);
    for (int j = 0; j < f.n(); ++j) ops.box(ptr(f, 0), ptr(out, j), j, f.offset(0), -1);
    return out;
}

SectionField del_adjoint(const SectionField& u) {
    if (u.q != 1 || !u.holo) throw std::invalid_argument("del_adjoint: expects a (1,0)-form");
    LatticeOps ops(u.bundle);
    SectionField out(u.bundle, 0);
    LatticeOps::Vec t(u.sites());
    for (int j = 0; j < u.n(); ++j) {
        ops.box_adj(ptr(u, j), t.data(), j, out.offset(0), -1);
        for (std::size_t s = 0; s < u.sites(); ++s) ptr(out, 0)[s] += 2.0 * t[s];
    }
    return out;
}

SectionField laplacian(const SectionField& u) {
    if (u.holo) throw std::invalid_argument("laplacian: (p,0) input not supported");
    if (u.q == 0) return dbar_adjoint(dbar(u));
    if (u.q == 1) {
        SectionField out = dbar(dbar_adjoint(u));
        if (u.n() == 2) out.data += dbar_adjoint(dbar(u)).data;
        return out;
    }
    throw std::invalid_argument("laplacian: q = 2 input");
}

SectionField rough_laplacian(const SectionField& u) {
    if (u.q != 1 || u.holo) throw std::invalid_argument("rough_laplacian: q must be 1");
    LatticeOps ops(u.bundle);
    const std::size_t S = u.sites();
    SectionField out(u.bundle, 1);
    LatticeOps::Vec t(S), r(S);
    for (int l = 0; l < u.n(); ++l) {
        Point c = u.offset(l);
        for (int j = 0; j < u.n(); ++j) {
            ops.box(ptr(u, l), t.data(), j, c, +1);
            ops.box_adj(t.data(), r.data(), j, c, +1);
            for (std::size_t s = 0; s < S; ++s) ptr(out, l)[s] += 2.0 * r[s];
        }
    }
    return out;
}

SectionField curvature_term(const SectionField& u, const Eigen::MatrixXcd& H) {
    if (u.q != 1) throw std::invalid_argument("curvature_term: q must be 1");
    SectionField out(u.bundle, 1, u.holo);
    for (int l = 0; l < u.n(); ++l)
        for (int j = 0; j < u.n(); ++j) out.comp(l) += 2.0 * kPi * H(j, l) * u.comp(j);
    return out;
}

Eigen::MatrixXcd metric_curvature(const TorusGeometry& g, const HermitianForm& omega) {
    // log det of the metric sampled on the grid, then d_j dbar_l by centred
    // differences at the origin. Constant metric => every difference is 0.
    const double ld = std::log(std::abs(omega.H.determinant()));
    const int n = g.n;
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n, n);
    auto f = [&](std::size_t) { return ld; };
    const std::size_t o = 0;
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            int xj = 2 * j, yj = 2 * j + 1, xl = 2 * l, yl = 2 * l + 1;
            auto d2 = [&](int a, int b) {
                std::size_t pp = g.fwd[b][g.fwd[a][o]], pm = g.bwd[b][g.fwd[a][o]];
                std::size_t mp = g.fwd[b][g.bwd[a][o]], mm = g.bwd[b][g.bwd[a][o]];
                return (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * g.h * g.h);
            };
            R(j, l) = 0.25 * (d2(xj, xl) + I * d2(xj, yl) - I * d2(yj, xl) + d2(yj, yl));
        }
    }
    return R;
}

SectionField weitzenboeck_residual(const SectionField& u, const HermitianForm& alpha, long k) {
    if (u.q != 1) throw std::invalid_argument("weitzenboeck_residual: q must be 1");
    const Eigen::MatrixXcd Hk = hermitian_part(type_components(u.bundle->F));
    const Eigen::MatrixXcd kH = double(k) * alpha.H;
    SectionField r = laplacian(u);
    r.data -= rough_laplacian(u).data;
    r.data -= curvature_term(u, kH).data;       // k V u
    r.data -= curvature_term(u, Hk - kH).data;  // R_{alpha,k} u
    const Eigen::MatrixXcd Rm = metric_curvature(*u.bundle->geom, HermitianForm::identity(u.n()));
    r.data -= curvature_term(u, Rm).data;
    return r;
}

SectionField dbar_squared_residual(const SectionField& s) {
    if (s.q != 0) throw std::invalid_argument("dbar_squared_residual: q must be 0");
    SectionField r = dbar(dbar(s));
    if (s.n() == 1) return r;
    const cplx a02 = type_components(s.bundle->F).c02(0, 1);
    LatticeOps ops(s.bundle);
    LatticeOps::Vec av(s.sites());
    ops.average(ptr(s, 0), av.data(), s.offset(0), r.offset(0));
    for (std::size_t i = 0; i < s.sites(); ++i) ptr(r, 0)[i] += 2.0 * kPi * I * a02 * av[i];
    return r;
}

double del_dbar_residual_norm(const SectionField& s) {
    if (s.q != 0) throw std::invalid_argument("del_dbar_residual_norm: q must be 0");
    const int n = s.n();
    const std::size_t S = s.sites();
    const Eigen::MatrixXcd c11 = type_components(s.bundle->F).c11;
    LatticeOps ops(s.bundle);
    LatticeOps::Vec Bl(S), Aj(S), AB(S), BA(S), av(S);
    const Point z{0, 0, 0, 0};
    double acc = 0;
    for (int j = 0; j < n; ++j) {
        Point cj = component_offset(n, 1, j);
        for (int l = 0; l < n; ++l) {
            Point cl = component_offset(n, 1, l);
            Point t = z;
            for (int a = 0; a < 4; ++a) t[a] = cj[a] + cl[a];
            ops.box(ptr(s, 0), Bl.data(), l, z, +1);
            ops.box(Bl.data(), AB.data(), j, cl, -1);
            ops.box(ptr(s, 0), Aj.data(), j, z, -1);
            ops.box(Aj.data(), BA.data(), l, cj, +1);
            ops.average(ptr(s, 0), av.data(), z, t);
            for (std::size_t i = 0; i < S; ++i)
                acc += std::norm(AB[i] - BA[i] + 2.0 * kPi * I * c11(j, l) * av[i]);
        }
    }
    // |dz_j ^ dzbar_l|^2 = 4
    return std::sqrt(4.0 * s.bundle->geom->volume_weight() * acc);
}

namespace {

DefectCheck finish_defect(const SectionField& s, double lhs, long k, double C) {
    DefectCheck d;
    d.lhs = lhs;
    double ds = l2_norm(dbar(s));
    double ns = l2_norm(s);
    d.base = double(k) * ns * ns + ds * ds;
    const double b2 = betti2(s.n());
    d.ratio = d.base > 0 ? lhs * std::pow(double(k), 2.0 / b2) / d.base : 0.0;
    d.within = d.ratio <= C;
    return d;
}

}  // namespace

DefectCheck commutation_defect(const SectionField& s, long k, double C) {
    if (s.q != 0) throw std::invalid_argument("commutation_defect: q must be 0");
    double v = l2_norm(dbar_adjoint(dbar(dbar(s))));
    return finish_defect(s, v * v, k, C);
}

DefectCheck second_defect(const SectionField& s, long k, double C) {
    if (s.q != 0) throw std::invalid_argument("second_defect: q must be 0");
    double v = l2_norm(dbar_adjoint(dbar_adjoint(dbar(dbar(s)))));
    return finish_defect(s, v * v, k, C);
}

double magnetic_time(const LatticeBundle& b) {
    const Eigen::MatrixXcd Hk = hermitian_part(type_components(b.F));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (Hk + Hk.adjoint()), Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    if (lmin <= 0.5) return 1.0 / (4.0 * kPi);
    return 1.0 / (kPi * lmin);
}

SectionField smooth_random_section(BundlePtr b, int q, std::uint64_t seed, double t) {
    SectionField f = random_section(b, q, seed);
    LatticeOps ops(b);
    const auto& g = *b->geom;
    const double L = 4.0 * g.d / (g.h * g.h) * 1.01;
    const long steps = static_cast<long>(std::ceil(t * L));
    LatticeOps::Vec hv(g.sites);
    for (int c = 0; c < f.components(); ++c) {
        Point off = f.offset(c);
        cplx* p = ptr(f, c);
        for (long it = 0; it < steps; ++it) {
            ops.hop(p, hv.data(), off);
            for (std::size_t s = 0; s < g.sites; ++s) p[s] -= hv[s] / L;
        }
    }
    double nrm = l2_norm(f);
    if (nrm > 0) f.data /= nrm;
    return f;
}

SectionField OperatorHandle::apply(const SectionField& f) const {
    if (f.q != q_in || f.holo != holo_in) throw std::invalid_argument("OperatorHandle: bidegree mismatch");
    return fn(f);
}

Eigen::Index OperatorHandle::dim_in() const {
    return static_cast<Eigen::Index>(component_count(bundle->n(), q_in) * bundle->geom->sites);
}

Eigen::Index OperatorHandle::dim_out() const {
    return static_cast<Eigen::Index>(component_count(bundle->n(), q_out) * bundle->geom->sites);
}

Eigen::MatrixXcd OperatorHandle::apply_block(const Eigen::MatrixXcd& X) const {
    return sparse() * X;
}

const Eigen::SparseMatrix<cplx, Eigen::RowMajor>& OperatorHandle::sparse() const {
    if (sparse_) return *sparse_;
    const auto& g = *bundle->geom;
    const Eigen::Index S = static_cast<Eigen::Index>(g.sites);
    const int cin = component_count(bundle->n(), q_in), cout = component_count(bundle->n(), q_out);
    std::vector<Eigen::Triplet<cplx>> trip;
    if (g.N % 4 != 0) {
        const auto& M = dense();
        for (Eigen::Index c = 0; c < M.cols(); ++c)
            for (Eigen::Index r = 0; r < M.rows(); ++r)
                if (M(r, c) != cplx(0)) trip.emplace_back(r, c, M(r, c));
    } else {
        const int colours = 1 << (2 * g.d);  // 4^d
        SectionField probe(bundle, q_in, holo_in);
        for (int ci = 0; ci < cin; ++ci) {
            for (int col = 0; col < colours; ++col) {
                Coord cc{0, 0, 0, 0};
                for (int a = 0; a < g.d; ++a) cc[a] = (col >> (2 * a)) & 3;
                probe.data.setZero();
                for (std::size_t s = 0; s < g.sites; ++s) {
                    Coord x = g.coords(s);
                    bool hit = true;
                    for (int a = 0; a < g.d; ++a) hit = hit && (x[a] % 4 == cc[a]);
                    if (hit) probe.data(ci * S + static_cast<Eigen::Index>(s)) = 1.0;
                }
                Eigen::VectorXcd r = fn(probe).data;
                for (int co = 0; co < cout; ++co) {
                    for (std::size_t s = 0; s < g.sites; ++s) {
                        cplx v = r(co * S + static_cast<Eigen::Index>(s));
                        if (v == cplx(0)) continue;
                        // the unique site t of this colour within one step of s
                        Coord x = g.coords(s), t{0, 0, 0, 0};
                        for (int a = 0; a < g.d; ++a) {
                            int d = ((cc[a] - x[a]) % 4 + 4) % 4;  // 0..3
                            if (d == 3) d = -1;
                            if (d == 2) throw std::logic_error("sparse: stencil wider than one site");
                            t[a] = x[a] + d;
                        }
                        trip.emplace_back(co * S + static_cast<Eigen::Index>(s),
                                          ci * S + static_cast<Eigen::Index>(g.index(t)), v);
                    }
                }
            }
        }
    }
    auto M = std::make_shared<Eigen::SparseMatrix<cplx, Eigen::RowMajor>>(dim_out(), dim_in());
    M->setFromTriplets(trip.begin(), trip.end());
    sparse_ = M;
    return *sparse_;
}

const Eigen::MatrixXcd& OperatorHandle::dense() const {
    if (!dense_) {
        auto M = std::make_shared<Eigen::MatrixXcd>(dim_out(), dim_in());
        SectionField f(bundle, q_in, holo_in);
        for (Eigen::Index c = 0; c < dim_in(); ++c) {
            f.data.setZero();
            f.data(c) = 1.0;
            M->col(c) = fn(f).data;
        }
        dense_ = M;
    }
    return *dense_;
}

OperatorHandle make_operator(OpKind kind, BundlePtr b) {
    OperatorHandle op;
    op.kind = kind;
    op.bundle = b;
    switch (kind) {
    case OpKind::dbar:
        op.q_in = 0, op.q_out = 1, op.fn = dbar;
        break;
    case OpKind::dbar_adj:
        op.q_in = 1, op.q_out = 0, op.fn = dbar_adjoint;
        break;
    case OpKind::del:
        op.q_in = 0, op.q_out = 1, op.holo_out = true, op.fn = del;
        break;
    case OpKind::del_adj:
        op.q_in = 1, op.q_out = 0, op.holo_in = true, op.fn = del_adjoint;
        break;
    case OpKind::laplacian_q0:
        op.q_in = 0, op.q_out = 0, op.fn = laplacian;
        break;
    case OpKind::laplacian_q1:
        op.q_in = 1, op.q_out = 1, op.fn = laplacian;
        break;
    case OpKind::box_q1:
        op.q_in = 1, op.q_out = 1, op.fn = rough_laplacian;
        break;
    }
    return op;
}

void write_coo(std::ostream& os, const OperatorHandle& op, double drop) {
    const auto& M = op.dense();
    os << std::setprecision(17);
    for (Eigen::Index c = 0; c < M.cols(); ++c)
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            if (std::abs(M(r, c)) > drop) os << r << ' ' << c << ' ' << M(r, c).real() << ' ' << M(r, c).imag() << '\n';
}

}  // namespace tlab
