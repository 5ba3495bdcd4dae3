#include "toruslab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace tlab {

namespace {

constexpr double kPi = std::numbers::pi;

// Covariant centred difference of all coordinates at one site.
Eigen::RowVectorXcd cov_diff_at(const LatticeBundle& b, const Eigen::MatrixXcd& X, std::size_t s, int a, int order) {
    const auto& g = *b.geom;
    const std::size_t p1 = g.fwd[a][s], m1 = g.bwd[a][s];
    const cplx up = std::conj(b.U[a][s]), dn = b.U[a][m1];
    Eigen::RowVectorXcd d1 = up * X.row(static_cast<Eigen::Index>(p1)) - dn * X.row(static_cast<Eigen::Index>(m1));
    if (order == 2) return d1 / (2 * g.h);
    if (order != 4) throw std::invalid_argument("difference order must be 2 or 4");
    const std::size_t p2 = g.fwd[a][p1], m2 = g.bwd[a][m1];
    const cplx up2 = up * std::conj(b.U[a][p1]), dn2 = dn * b.U[a][m2];
    Eigen::RowVectorXcd d2 = up2 * X.row(static_cast<Eigen::Index>(p2)) - dn2 * X.row(static_cast<Eigen::Index>(m2));
    return (8.0 * d1 - d2) / (12 * g.h);
}

// F_ab = Im Q_ab / (pi k) from a coordinate vector and its differences.
TwoForm fs_form(const Eigen::RowVectorXcd& f, const std::vector<Eigen::RowVectorXcd>& D, long k) {
    const int d = static_cast<int>(D.size());
    const double f2 = f.squaredNorm();
    std::vector<cplx> p(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) p[static_cast<std::size_t>(a)] = f.conjugate().dot(D[static_cast<std::size_t>(a)].conjugate());
    TwoForm F = TwoForm::Zero(d, d);
    for (int a = 0; a < d; ++a) {
        for (int c = a + 1; c < d; ++c) {
            const auto& Da = D[static_cast<std::size_t>(a)];
            const auto& Dc = D[static_cast<std::size_t>(c)];
            // <Da, Dc> = sum conj(Da) Dc
            cplx inner = (Da.conjugate().array() * Dc.array()).sum();
            cplx Q = inner / f2 - std::conj(p[static_cast<std::size_t>(a)]) * p[static_cast<std::size_t>(c)] / (f2 * f2);
            F(a, c) = Q.imag() / (kPi * double(k));
            F(c, a) = -F(a, c);
        }
    }
    return F;
}

GridField entries(const FormField& f) {
    const int d = f.geom->d;
    GridField gf{f.geom, {}};
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            std::vector<cplx> v(f.F.size());
            for (std::size_t s = 0; s < f.F.size(); ++s) v[s] = f.F[s](a, b);
            gf.comps.push_back(std::move(v));
        }
    }
    return gf;
}

}  // namespace

SectionField SectionBasis::field(int j) const {
    SectionField f(bundle, 0);
    f.data = fields.col(j);
    return f;
}

SectionBasis basis_of(const HkBasis& hk) { return SectionBasis{hk.bundle, hk.fields}; }

SectionBasis orthonormal_basis(const SectionBasis& in) {
    if (in.dim() == 0) throw std::invalid_argument("orthonormal_basis: empty basis");
    const double w = in.bundle->geom->volume_weight();
    SectionBasis out{in.bundle, in.fields};
    for (int j = 0; j < out.dim(); ++j) {
        auto col = out.fields.col(j);
        const double n0 = std::sqrt(w) * col.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < j; ++i) col -= (w * out.fields.col(i).dot(col)) * out.fields.col(i);
        const double n1 = std::sqrt(w) * col.norm();
        if (!(n1 > 1e-10 * n0)) throw std::invalid_argument("orthonormal_basis: rank-deficient input");
        col /= n1;
    }
    return out;
}

SectionBasis orthonormal_basis(const HkBasis& hk) { return orthonormal_basis(basis_of(hk)); }

double gram_defect(const SectionBasis& b) {
    const double w = b.bundle->geom->volume_weight();
    Eigen::MatrixXcd G = w * (b.fields.adjoint() * b.fields);
    G -= Eigen::MatrixXcd::Identity(b.dim(), b.dim());
    return b.dim() == 0 ? 0.0 : G.cwiseAbs().maxCoeff();
}

double projector_distance(const SectionBasis& a, const SectionBasis& b) {
    if (a.dim() != b.dim()) return a.dim() + b.dim() > 0 ? 1.0 : 0.0;
    if (a.dim() == 0) return 0.0;
    const double w = a.bundle->geom->volume_weight();
    // sin of the largest principal angle: || (I - P_b) a || for orthonormal
    // a, b; avoids the cancellation in sqrt(1 - cos^2)
    Eigen::MatrixXcd R = a.fields - b.fields * (w * (b.fields.adjoint() * a.fields));
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(std::sqrt(w) * R);
    return std::min(1.0, svd.singularValues()(0));
}

SectionBasis recombine(const SectionBasis& b, const Eigen::MatrixXcd& U) { return SectionBasis{b.bundle, b.fields * U}; }

SectionBasis gauge_basis(const SectionBasis& b, BundlePtr gauged, const std::vector<double>& chi) {
    SectionBasis out{std::move(gauged), b.fields};
    for (Eigen::Index s = 0; s < out.fields.rows(); ++s)
        out.fields.row(s) *= std::polar(1.0, chi[static_cast<std::size_t>(s)]);
    return out;
}

Eigen::MatrixXcd random_unitary(int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd Z(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double re = nd(rng);
            double im = nd(rng);
            Z(i, j) = cplx(re, im);
        }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Z);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(d, d);
    Eigen::MatrixXcd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) Q.col(j) *= std::polar(1.0, std::arg(R(j, j)));
    return Q;
}

TianBasis tian_basis(const SectionBasis& ortho, std::size_t x, double radius) {
    const int d = ortho.dim();
    const int n = ortho.bundle->n();
    if (d < n + 1) throw JetGenerationFailure("jet generation failed at x: dim H_k <= n");
    // functionals in coefficient space: value and d/dz_j at x in the chart frame
    Eigen::MatrixXcd A(n + 1, d);
    for (int l = 0; l < d; ++l) {
        auto cf = to_chart(ortho.field(l), x, radius);
        A(0, l) = cf.values[x];
        for (int j = 0; j < n; ++j) A(j + 1, l) = chart_derivative(cf, j == 0 ? MultiIndex{1, 0} : MultiIndex{0, 1});
    }
    Eigen::MatrixXcd V(d, n + 1);
    TianBasis tb;
    tb.center = x;
    for (int i = 0; i <= n; ++i) {
        Eigen::VectorXcd v = A.row(i).adjoint();
        const double a = v.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (int p = 0; p < i; ++p) v -= V.col(p).dot(v) * V.col(p);
        const double r = v.norm();
        if (!(a > 0) || r <= 1e-10 * a) throw JetGenerationFailure("jet generation failed at x");
        V.col(i) = v / r;
        tb.pivots.push_back(r);
    }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(V);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(d, d);
    Q.leftCols(n + 1) = V;
    tb.basis = SectionBasis{ortho.bundle, ortho.fields * Q};
    return tb;
}

KodairaMap kodaira_map(const SectionBasis& b) {
    if (b.dim() == 0) throw std::invalid_argument("kodaira_map: empty basis");
    KodairaMap m{b.bundle, b.fields, 0, 0};
    Eigen::VectorXd nr = b.fields.rowwise().norm();
    Eigen::Index i = 0;
    m.min_norm = nr.minCoeff(&i);
    m.min_site = static_cast<std::size_t>(i);
    return m;
}

FormField constant_form(GeometryPtr geom, const TwoForm& F) {
    const std::size_t S = geom->sites;
    return FormField{std::move(geom), std::vector<TwoForm>(S, F)};
}

FormField operator-(const FormField& a, const FormField& b) {
    FormField out{a.geom, a.F};
    for (std::size_t s = 0; s < out.F.size(); ++s) out.F[s] -= b.F[s];
    return out;
}

BergmanMetricField bergman_field(const SectionBasis& b, const HermitianForm& alpha, long k) {
    if (b.dim() == 0) throw std::invalid_argument("bergman_field: empty basis");
    const auto& g = *b.bundle->geom;
    BergmanMetricField bm;
    bm.k = k;
    bm.geom = b.bundle->geom;
    bm.B = b.fields.rowwise().squaredNorm();
    if (!(bm.B.minCoeff() > 0)) throw std::runtime_error("bergman_field: B_k vanishes at a site");
    Eigen::VectorXd L = bm.B.array().log();
    const double h2 = g.h * g.h;
    auto at = [&](std::size_t s) { return L(static_cast<Eigen::Index>(s)); };
    // D_a D_b L by composed centred differences, D_a^2 by the 3-point stencil
    auto dd = [&](std::size_t s, int a, int c) {
        if (a == c) return (at(g.fwd[a][s]) - 2 * at(s) + at(g.bwd[a][s])) / h2;
        return (at(g.fwd[c][g.fwd[a][s]]) - at(g.bwd[c][g.fwd[a][s]]) - at(g.fwd[c][g.bwd[a][s]]) +
                at(g.bwd[c][g.bwd[a][s]])) /
               (4 * h2);
    };
    const cplx I(0, 1);
    bm.H.resize(g.sites);
    bm.T.geom = bm.geom;
    bm.T.F.resize(g.sites);
    for (std::size_t s = 0; s < g.sites; ++s) {
        Eigen::MatrixXcd H = alpha.H;
        for (int j = 0; j < g.n; ++j) {
            for (int l = 0; l < g.n; ++l) {
                const int xj = 2 * j, yj = 2 * j + 1, xl = 2 * l, yl = 2 * l + 1;
                // (1/4)(D_xj - i D_yj)(D_xl + i D_yl) L
                cplx v = 0.25 * (dd(s, xj, xl) + I * dd(s, xj, yl) - I * dd(s, yj, xl) + dd(s, yj, yl));
                H(j, l) += v / (kPi * double(k));
            }
        }
        bm.H[s] = H;
        bm.T.F[s] = two_form(HermitianForm{H});
    }
    return bm;
}

FormField FsPullback::part11() const {
    FormField out{full.geom, std::vector<TwoForm>(types.size())};
    for (std::size_t s = 0; s < types.size(); ++s) {
        const auto& t = types[s];
        auto Z = Eigen::MatrixXcd::Zero(t.c11.rows(), t.c11.cols());
        out.F[s] = recombine(TypeComponents{Z, t.c11, Z});
    }
    return out;
}

FormField FsPullback::part20_02() const {
    FormField out{full.geom, std::vector<TwoForm>(types.size())};
    for (std::size_t s = 0; s < types.size(); ++s) {
        const auto& t = types[s];
        auto Z = Eigen::MatrixXcd::Zero(t.c11.rows(), t.c11.cols());
        out.F[s] = recombine(TypeComponents{t.c20, Z, t.c02});
    }
    return out;
}

FsPullback fs_pullback(const KodairaMap& map, long k, int order) {
    const auto& b = *map.bundle;
    const auto& g = *b.geom;
    if (!map.valid()) throw std::runtime_error("fs_pullback: base point");
    FsPullback fs;
    fs.k = k;
    fs.full.geom = b.geom;
    fs.full.F.resize(g.sites);
    fs.types.resize(g.sites);
    std::vector<Eigen::RowVectorXcd> D(static_cast<std::size_t>(g.d));
    for (std::size_t s = 0; s < g.sites; ++s) {
        for (int a = 0; a < g.d; ++a) D[static_cast<std::size_t>(a)] = cov_diff_at(b, map.coords, s, a, order);
        fs.full.F[s] = fs_form(map.coords.row(static_cast<Eigen::Index>(s)), D, k);
        fs.types[s] = type_components(fs.full.F[s]);
    }
    return fs;
}

std::vector<std::pair<std::size_t, TwoForm>> fs_pullback_chart(const KodairaMap& map, long k, std::size_t x,
                                                                int margin, int order) {
    const auto& g = *map.bundle->geom;
    if (order != 2 && order != 4) throw std::invalid_argument("difference order must be 2 or 4");
    const int d = static_cast<int>(map.coords.cols());
    // chart-frame coordinates
    Eigen::MatrixXcd C(map.coords.rows(), d);
    SectionField tmp(map.bundle, 0);
    for (int l = 0; l < d; ++l) {
        tmp.data = map.coords.col(l);
        auto cf = to_chart(tmp, x);
        for (std::size_t s = 0; s < g.sites; ++s) C(static_cast<Eigen::Index>(s), l) = cf.values[s];
    }
    const int reach = order / 2;
    const int lo = -g.N / 2 + margin + reach, hi = g.N / 2 - 1 - margin - reach;
    std::vector<std::pair<std::size_t, TwoForm>> out;
    std::vector<Eigen::RowVectorXcd> D(static_cast<std::size_t>(g.d));
    for (std::size_t s = 0; s < g.sites; ++s) {
        Coord disp = g.displacement(x, s);
        bool inside = true;
        for (int a = 0; a < g.d; ++a) inside = inside && disp[a] >= lo && disp[a] <= hi;
        if (!inside) continue;
        for (int a = 0; a < g.d; ++a) {
            auto row = [&](std::size_t t) { return C.row(static_cast<Eigen::Index>(t)); };
            Eigen::RowVectorXcd d1 = row(g.fwd[a][s]) - row(g.bwd[a][s]);
            if (order == 2) {
                D[static_cast<std::size_t>(a)] = d1 / (2 * g.h);
            } else {
                Eigen::RowVectorXcd d2 = row(g.fwd[a][g.fwd[a][s]]) - row(g.bwd[a][g.bwd[a][s]]);
                D[static_cast<std::size_t>(a)] = (8.0 * d1 - d2) / (12 * g.h);
            }
        }
        out.emplace_back(s, fs_form(C.row(static_cast<Eigen::Index>(s)), D, k));
    }
    return out;
}

double form_cr_norm(const FormField& f, int r) { return cr_norm(entries(f), r); }

double coeff_cr_norm(GeometryPtr geom, const std::vector<Eigen::MatrixXcd>& c, int r) {
    GridField gf{std::move(geom), {}};
    if (c.empty()) return 0.0;
    for (Eigen::Index i = 0; i < c.front().rows(); ++i) {
        for (Eigen::Index j = 0; j < c.front().cols(); ++j) {
            std::vector<cplx> v(c.size());
            for (std::size_t s = 0; s < c.size(); ++s) v[s] = c[s](i, j);
            gf.comps.push_back(std::move(v));
        }
    }
    return cr_norm(gf, r);
}

DistanceTable convergence_norms(const BergmanMetricField& bm, const FsPullback& fs, const HermitianForm& alpha) {
    DistanceTable t;
    t.k = bm.k;
    auto A = constant_form(bm.geom, two_form(alpha));
    auto f11 = fs.part11();
    auto dTa = bm.T - A, dFT = f11 - bm.T, dFa = f11 - A;
    std::vector<Eigen::MatrixXcd> c02(fs.types.size()), c20(fs.types.size());
    for (std::size_t s = 0; s < fs.types.size(); ++s) {
        c02[s] = fs.types[s].c02;
        c20[s] = fs.types[s].c20;
    }
    for (int r = 0; r <= 2; ++r) {
        t.tk_alpha[static_cast<std::size_t>(r)] = form_cr_norm(dTa, r);
        t.fs_tk[static_cast<std::size_t>(r)] = form_cr_norm(dFT, r);
        t.fs_alpha[static_cast<std::size_t>(r)] = form_cr_norm(dFa, r);
        t.fs02[static_cast<std::size_t>(r)] = coeff_cr_norm(bm.geom, c02, r);
        t.fs20[static_cast<std::size_t>(r)] = coeff_cr_norm(bm.geom, c20, r);
    }
    return t;
}

std::vector<double> form_periods(const FormField& f) {
    const auto& g = *f.geom;
    std::vector<double> out;
    for (auto [a, b] : coordinate_faces(g.n)) {
        double acc = 0;
        for (int i = 0; i < g.N; ++i) {
            for (int j = 0; j < g.N; ++j) {
                Coord c{0, 0, 0, 0};
                c[a] = i;
                c[b] = j;
                acc += f.F[g.index(c)](a, b);
            }
        }
        out.push_back(acc * g.h * g.h);
    }
    return out;
}

double fs_distance(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
    const double c = std::abs(u.dot(v)) / (u.norm() * v.norm());
    return std::acos(std::clamp(c, 0.0, 1.0));
}

EmbeddingVerdict separation_and_immersion(const KodairaMap& map,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                          const std::vector<std::size_t>& sites, double tol, double rank_tol) {
    EmbeddingVerdict v;
    v.min_distance = 1e300;
    for (auto [x, y] : pairs) {
        if (x == y) continue;
        ++v.pairs;
        double dist = fs_distance(map.coords.row(static_cast<Eigen::Index>(x)).transpose(),
                                  map.coords.row(static_cast<Eigen::Index>(y)).transpose());
        v.min_distance = std::min(v.min_distance, dist);
        if (dist > tol) {
            ++v.separated;
        } else {
            v.unseparated.emplace_back(x, y);
        }
    }
    const auto& b = *map.bundle;
    const int d2 = b.geom->d;
    const Eigen::Index m = map.coords.cols();
    v.min_singular_ratio = 1e300;
    for (std::size_t s : sites) {
        ++v.sites;
        Eigen::RowVectorXcd f = map.coords.row(static_cast<Eigen::Index>(s));
        const double fn = f.norm();
        Eigen::MatrixXd J(2 * m, d2);
        for (int a = 0; a < d2; ++a) {
            Eigen::RowVectorXcd t = cov_diff_at(b, map.coords, s, a, 4);
            t -= (f.conjugate().dot(t.conjugate()) / (fn * fn)) * f;  // P t
            t /= fn;
            J.col(a).head(m) = t.real().transpose();
            J.col(a).tail(m) = t.imag().transpose();
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const auto& sv = svd.singularValues();
        const double ratio = sv.maxCoeff() > 0 ? sv.minCoeff() / sv.maxCoeff() : 0.0;
        v.min_singular_ratio = std::min(v.min_singular_ratio, ratio);
        if (ratio > rank_tol) {
            ++v.immersive;
        } else {
            v.non_immersive.push_back(s);
        }
    }
    if (v.pairs == 0) v.min_distance = 0;
    if (v.sites == 0) v.min_singular_ratio = 0;
    return v;
}

}  // namespace tlab
