#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "toruslab/operators.hpp"

using namespace tlab;

namespace {
constexpr double kPi = std::numbers::pi;

BundlePtr flux1(int N, long m) { return build_bundle(form_from_periods(1, {double(m)}), build_geometry(1, N)); }

BundlePtr mixed2(int N) {
    // non-(1,1) integral form: the (x1,x2) slot carries a (0,2) part
    return build_bundle(form_from_periods(2, {2, 1, 0, 0, 0, 3}), build_geometry(2, N));
}

BundlePtr diag2(int N) { return build_bundle(form_from_periods(2, {2, 0, 0, 0, 0, 3}), build_geometry(2, N)); }

double rel(const SectionField& a, const SectionField& b) { return l2_norm(a) / std::max(l2_norm(b), 1e-300); }
}  // namespace

TEST_CASE("adjoint identities") {
    for (auto b : {flux1(8, 3), mixed2(8)}) {
        auto f = random_section(b, 0, 1);
        auto u = random_section(b, 1, 2);
        CHECK(std::abs(l2_inner(dbar(f), u) - l2_inner(f, dbar_adjoint(u))) < 1e-12 * l2_norm(f) * l2_norm(u) * 64);
        SectionField uh(b, 1, true);
        uh.data = u.data;
        CHECK(std::abs(l2_inner(del(f), uh) - l2_inner(f, del_adjoint(uh))) < 1e-12 * l2_norm(f) * l2_norm(u) * 64);
        if (b->n() == 2) {
            auto w = random_section(b, 2, 3);
            CHECK(std::abs(l2_inner(dbar(u), w) - l2_inner(u, dbar_adjoint(w))) < 1e-10 * l2_norm(u) * l2_norm(w) * 64);
        }
        SectionField z(b, 1);
        CHECK(l2_norm(dbar_adjoint(z)) == 0.0);
    }
    CHECK_THROWS_AS(dbar(random_section(mixed2(8), 2, 1)), std::invalid_argument);
    CHECK_THROWS_AS(dbar_adjoint(random_section(flux1(8, 1), 0, 1)), std::invalid_argument);
}

TEST_CASE("dense assembly is the matrix-free operator transposed") {
    auto b = flux1(8, 3);
    auto D = make_operator(OpKind::dbar, b).dense();
    auto Ds = make_operator(OpKind::dbar_adj, b).dense();
    // <dbar f, u>_1 = <f, dbar* u>_0 with weights 2 h^2 and h^2
    CHECK((Ds - 2.0 * D.adjoint()).cwiseAbs().maxCoeff() < 1e-13 * D.cwiseAbs().maxCoeff());
    for (auto bb : {b, mixed2(8)})
        for (auto kind : {OpKind::dbar, OpKind::dbar_adj, OpKind::laplacian_q0, OpKind::laplacian_q1, OpKind::box_q1}) {
            auto op = make_operator(kind, bb);
            Eigen::MatrixXcd sp = Eigen::MatrixXcd(op.sparse());
            CHECK((sp - op.dense()).cwiseAbs().maxCoeff() < 1e-9);
        }
    auto L = make_operator(OpKind::laplacian_q0, b);
    auto f = random_section(b, 0, 4);
    CHECK((L.dense() * f.data - laplacian(f).data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("flat kernel and plane-wave symbol") {
    auto b = trivial_bundle(build_geometry(1, 16));
    SectionField one(b, 0);
    one.data.setConstant(1.0);
    CHECK(l2_norm(dbar(one)) < 1e-14);
    CHECK(l2_norm(del(one)) < 1e-14);

    // e^{2 pi i (x + 2y)}: dbar = (1/2)(d_x + i d_y) = pi i (1 + 2i) f, sampled at
    // the half-cell offset; the box stencil is second order
    double prev = 0;
    for (int N : {16, 32, 64}) {
        auto bn = trivial_bundle(build_geometry(1, N));
        const auto& g = *bn->geom;
        SectionField f(bn, 0), exact(bn, 1);
        for (std::size_t s = 0; s < g.sites; ++s) {
            auto c = g.coords(s);
            double x = c[0] * g.h, y = c[1] * g.h;
            f.data(s) = std::polar(1.0, 2 * kPi * (x + 2 * y));
            double xs = x + g.h / 2, ys = y + g.h / 2;
            exact.data(s) = kPi * cplx(0, 1) * cplx(1, 2) * std::polar(1.0, 2 * kPi * (xs + 2 * ys));
        }
        SectionField d = dbar(f);
        d.data -= exact.data;
        double e = l2_norm(d) / l2_norm(f);
        CHECK(e < 30 * g.h * g.h * 100);
        if (prev > 0) CHECK(prev / e > 3.5);
        prev = e;
    }
}

TEST_CASE("zero-flux Laplacian matches the Fourier symbol table") {
    auto b = trivial_bundle(build_geometry(1, 16));
    const int N = 16;
    const double h = 1.0 / N;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(make_operator(OpKind::laplacian_q0, b).dense(),
                                                      Eigen::EigenvaluesOnly);
    std::vector<double> sym;
    for (int p = 0; p < N; ++p) {
        for (int q = 0; q < N; ++q) {
            cplx ex = std::polar(1.0, 2 * kPi * p / N), ey = std::polar(1.0, 2 * kPi * q / N);
            cplx Dx = (ex - 1.0) * (1.0 + ey) / (2 * h), Dy = (ey - 1.0) * (1.0 + ex) / (2 * h);
            cplx B = 0.5 * (Dx + cplx(0, 1) * Dy);
            sym.push_back(2.0 * std::norm(B));
        }
    }
    std::sort(sym.begin(), sym.end());
    for (int i = 0; i < N * N; ++i) CHECK(std::abs(es.eigenvalues()(i) - sym[i]) < 1e-10 * std::max(1.0, sym[i]));
}

TEST_CASE("Laplacian is Hermitian PSD and gauge covariant") {
    for (auto b : {flux1(16, 3), mixed2(8)}) {
        for (int q : {0, 1}) {
            auto u = random_section(b, q, 10 + q), v = random_section(b, q, 20 + q);
            cplx a = l2_inner(laplacian(u), v), c = l2_inner(laplacian(v), u);
            CHECK(std::abs(a - std::conj(c)) < 1e-12 * std::abs(a) + 1e-9);
            CHECK(l2_inner(laplacian(u), u).real() >= 0);
            auto chi = random_gauge(*b->geom, 99);
            auto bg = gauge_transform(*b, chi);
            auto lhs = laplacian(gauge_section(u, bg, chi));
            auto rhs = gauge_section(laplacian(u), bg, chi);
            lhs.data -= rhs.data;
            CHECK(l2_norm(lhs) < 1e-12 * l2_norm(rhs));
        }
        auto s = random_section(b, 0, 5);
        double d = l2_norm(dbar(s));
        CHECK(std::abs(l2_inner(laplacian(s), s).real() - d * d) < 1e-12 * d * d);
    }
}

TEST_CASE("Riemann-Roch kernel count and q=1 lower bound") {
    for (long m : {1, 3, 5}) {
        auto b = flux1(16, m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(make_operator(OpKind::laplacian_q0, b).dense(),
                                                          Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        int count = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i) count += ev(i) <= 1e-8 * m;
        CHECK(count == m);
        CHECK(ev(m) > 1e3 * std::max(std::abs(ev(m - 1)), 1e-12));

        // dbar maps between spaces of equal dimension on the lattice, so
        // dbar* has an m-dimensional kernel made of checkerboard modes that
        // the continuum bound does not see. Past those, delta_0 k = m/2.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(make_operator(OpKind::laplacian_q1, b).dense());
        const auto& v1 = e1.eigenvalues();
        for (long i = 0; i < m; ++i) {
            CHECK(std::abs(v1(i)) < 1e-8);
            SectionField z(b, 1);
            z.data = e1.eigenvectors().col(i);
            SectionField hz(b, 1);
            LatticeOps ops(b);
            ops.hop(z.data.data(), hz.data.data(), z.offset(0));
            double hop_energy = std::abs(z.data.dot(hz.data)) / z.data.squaredNorm();
            CHECK(hop_energy > 2.0 * 16 * 16);  // far above the smooth range
        }
        CHECK(v1(m) >= 0.8 * 0.5 * m);
    }
}

TEST_CASE("Weitzenboeck residual converges at first order or better") {
    auto alpha = HermitianForm::scalar(1, 0.6180339887498949);
    const long k = 5;  // alpha_k = 3 dx ^ dy
    std::vector<double> res;
    for (int N : {16, 32, 64}) {
        auto b = flux1(N, 3);
        double worst = 0;
        for (int t = 0; t < 3; ++t) {
            auto u = smooth_random_section(b, 1, 100 + t, 0.05);
            worst = std::max(worst, l2_norm(weitzenboeck_residual(u, alpha, k)) / l2_norm(u));
        }
        res.push_back(worst);
    }
    CHECK(res[1] < res[0]);
    CHECK(std::log2(res[1] / res[2]) >= 0.9);
    CHECK(res[0] <= 1.0 / 16 * 10);

    auto b = flux1(16, 3);
    SectionField z(b, 1);
    CHECK(l2_norm(weitzenboeck_residual(z, alpha, k)) == 0.0);

    // V = c Id: <V u, u> = 2 pi c |u|^2
    auto u = random_section(b, 1, 7);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Constant(1, 1, 0.37);
    CHECK(std::abs(l2_inner(curvature_term(u, H), u).real() - 2 * kPi * 0.37 * std::pow(l2_norm(u), 2)) < 1e-12);
    CHECK(metric_curvature(*b->geom, HermitianForm::identity(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Weitzenboeck with a complex off-diagonal curvature (n = 2)") {
    // (1,1) integral form whose H has a complex off-diagonal entry
    Eigen::MatrixXcd H(2, 2);
    H << 2, cplx(1, 1), cplx(1, -1), 3;
    TwoForm F = two_form(HermitianForm{H});
    REQUIRE((F - F.array().round().matrix()).cwiseAbs().maxCoeff() < 1e-14);
    HermitianForm alpha{H};
    std::vector<double> res;
    for (int N : {8, 16}) {
        auto b = build_bundle(F, build_geometry(2, N));
        auto u = smooth_random_section(b, 1, 3, 0.02);
        res.push_back(l2_norm(weitzenboeck_residual(u, alpha, 1)) / l2_norm(u));
    }
    CHECK(res[1] < 0.6 * res[0]);
}

TEST_CASE("structure identities") {
    // exact dbar^2 = 0 for block-diagonal curvature
    auto bd = diag2(8);
    auto s = random_section(bd, 0, 3);
    CHECK(l2_norm(dbar(dbar(s))) < 1e-10 * l2_norm(s) / (bd->geom->h * bd->geom->h));
    auto c = commutation_defect(s, 1, 1.0);
    CHECK(c.lhs < 1e-10 * c.base);
    SectionField zero(bd, 0);
    CHECK(commutation_defect(zero, 1, 1.0).lhs == 0.0);
    CHECK(second_defect(zero, 1, 1.0).lhs == 0.0);

    // non-(1,1): dbar^2 s = -2 pi i alpha^{0,2} ^ s up to O(h^2)
    std::vector<double> res;
    for (int N : {8, 12, 16}) {
        auto b = mixed2(N);
        auto sm = smooth_random_section(b, 0, 4, magnetic_time(*b));
        res.push_back(l2_norm(dbar_squared_residual(sm)) / l2_norm(sm));
        // witness: dbar^2 s is of size 2 pi |a02| |s| (n = 2, |dzbar1^dzbar2|^2 = 4)
        double wit = l2_norm(dbar(dbar(sm)));
        double a02 = std::abs(type_components(b->F).c02(0, 1));
        CHECK(wit == doctest::Approx(2 * kPi * a02 * 2 * l2_norm(sm)).epsilon(0.25));
    }
    CHECK(res[2] < res[0]);
    CHECK(std::log(res[0] / res[2]) / std::log(2.0) > 1.5);

    // (d dbar + dbar d) s + 2 pi i alpha^{1,1} ^ s -> 0
    std::vector<double> r11;
    for (int N : {16, 32, 64}) {
        auto b = flux1(N, 3);
        auto sm = smooth_random_section(b, 0, 8, magnetic_time(*b));
        r11.push_back(del_dbar_residual_norm(sm) / l2_norm(sm));
    }
    CHECK(std::log2(r11[1] / r11[2]) > 1.5);
}

TEST_CASE("holomorphic derivative bound") {
    auto b = flux1(32, 5);
    for (int t = 0; t < 5; ++t) {
        auto s = smooth_random_section(b, 0, 40 + t, magnetic_time(*b));
        double d = l2_norm(del(s)), db = l2_norm(dbar(s)), n = l2_norm(s);
        CHECK(d * d <= 10.0 * (5 * n * n + db * db));
    }
}

TEST_CASE("coordinate export") {
    auto b = flux1(8, 1);
    std::ostringstream os;
    write_coo(os, make_operator(OpKind::dbar, b), 1e-14);
    std::istringstream is(os.str());
    long r, c;
    double re, im;
    long lines = 0;
    while (is >> r >> c >> re >> im) ++lines;
    CHECK(lines > 64);
    CHECK(lines <= 64 * 8);
}
