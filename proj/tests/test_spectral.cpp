#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "toruslab/spectral.hpp"

using namespace tlab;

namespace {
constexpr double kPi = std::numbers::pi;

BundlePtr flux1(int N, long m) { return build_bundle(form_from_periods(1, {double(m)}), build_geometry(1, N)); }
}  // namespace

TEST_CASE("trivial bundle spectrum matches the box-stencil symbol") {
    const int N = 16;
    auto b = trivial_bundle(build_geometry(1, N));
    const double h = 1.0 / N;
    std::vector<double> oracle;
    for (int p = 0; p < N; ++p) {
        for (int q = 0; q < N; ++q) {
            cplx ex = std::polar(1.0, 2 * kPi * p / N), ey = std::polar(1.0, 2 * kPi * q / N);
            cplx dx = (ex - 1.0) / h * (1.0 + ey) / 2.0;
            cplx dy = (ey - 1.0) / h * (1.0 + ex) / 2.0;
            oracle.push_back(0.5 * std::norm(dx + cplx(0, 1) * dy));
        }
    }
    std::sort(oracle.begin(), oracle.end());
    auto ev = dense_spectrum(make_operator(OpKind::laplacian_q0, b));
    REQUIRE(ev.size() == static_cast<Eigen::Index>(oracle.size()));
    for (std::size_t j = 0; j < oracle.size(); ++j) CHECK(std::abs(ev(j) - oracle[j]) < 1e-9 * (1 + oracle[j]));
}

TEST_CASE("iterative eigenpairs agree with the dense oracle") {
    auto b = flux1(16, 3);
    auto op = make_operator(OpKind::laplacian_q0, b);
    auto sl = lowest_eigenpairs(op, 12, 1e-10, 7);
    auto ds = dense_slice(op, 12);
    for (int j = 0; j < 12; ++j) CHECK(std::abs(sl.mu[j] - ds.mu[j]) < 1e-8 * std::max(1.0, ds.mu[j]));
    // lowest level is exactly the flux count
    int cluster = 0;
    for (double m : ds.mu) cluster += m < 1e-6;
    CHECK(cluster == 3);
    // fields are l2-orthonormal eigenfields
    for (int j = 0; j < 4; ++j) {
        auto f = sl.field(j);
        CHECK(std::abs(l2_norm(f) - 1) < 1e-9);
        auto Lf = laplacian(f);
        Lf.data -= sl.mu[j] * f.data;
        CHECK(l2_norm(Lf) < 1e-7 * std::max(1.0, sl.mu[j]));
        for (int l = 0; l < j; ++l) CHECK(std::abs(l2_inner(sl.field(l), f)) < 1e-9);
    }
    CHECK(lowest_eigenpairs(op, 0).size() == 0);
    CHECK_THROWS_AS(lowest_eigenpairs(op, 100), std::invalid_argument);
    std::ostringstream os;
    write_spectrum_csv(os, sl);
    CHECK(os.str().rfind("index,eigenvalue,residual\n", 0) == 0);
}

TEST_CASE("H_k selection and gap certificate") {
    auto b = flux1(16, 3);
    auto sl = lowest_eigenpairs(make_operator(OpKind::laplacian_q0, b), 12, 1e-10, 3);
    const long k = 2;
    auto Hk = build_Hk(sl, k, 1.0, 0.5);
    CHECK(Hk.dim() == 3);
    CHECK_THROWS_AS(build_Hk(sl, k, 1.0, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(build_Hk(sl, k, 1e9, 0.5), std::runtime_error);

    const double d0 = 0.5 * 3 / double(k);  // alpha_k / k = 3/2
    auto v = spectral_gap_certificate(sl, k, d0, 0.1 * d0, 1.0, 0.5, 1.0);
    CHECK(v.pass);
    CHECK(v.cluster == 3);
    CHECK(v.mu_next > v.upper);
    // an impossible lower edge must trip the detector
    auto bad = spectral_gap_certificate(sl, k, 10 * d0 * 10, 0.1, 1.0, 0.5, 1.0);
    CHECK_FALSE(bad.pass);
    CHECK(bad.offender.has_value());
}

TEST_CASE("projection and Green operator") {
    auto b = flux1(8, 2);
    auto op = make_operator(OpKind::laplacian_q0, b);
    auto sl = dense_slice(op, 10);
    auto Hk = build_Hk(sl, 1, 1.0, 0.5);
    REQUIRE(Hk.dim() == 2);
    auto s = random_section(b, 0, 11);
    auto [sh, snh] = project(s, Hk);
    SectionField sum(b, 0);
    sum.data = sh.data + snh.data - s.data;
    CHECK(l2_norm(sum) < 1e-13 * l2_norm(s));
    for (int j = 0; j < Hk.dim(); ++j) CHECK(std::abs(l2_inner(Hk.field(j), snh)) < 1e-12 * l2_norm(s));
    auto [shh, zero] = project(sh, Hk);
    CHECK(l2_norm(zero) < 1e-12 * l2_norm(s));

    GreenOperator Gd(op, Hk, GreenOperator::Mode::dense);
    GreenOperator Gc(op, Hk, GreenOperator::Mode::deflated_cg);
    auto Ps = apply_Pk(s, Hk);
    auto a = Gd.apply(Ps), c = Gc.apply(Ps);
    SectionField d(b, 0);
    d.data = a.data - snh.data;
    CHECK(l2_norm(d) < 1e-8 * l2_norm(s));
    d.data = c.data - snh.data;
    CHECK(l2_norm(d) < 1e-8 * l2_norm(s));
    CHECK(Gc.last_iterations() > 0);
}

TEST_CASE("dimension asymptotics report") {
    auto alpha = HermitianForm::scalar(1, 1.5);
    CHECK(alpha_volume(alpha) == doctest::Approx(1.5));
    CHECK(predicted_cluster(4, alpha) == 6);
    std::vector<std::pair<long, int>> d{{2, 3}, {4, 6}, {6, 9}, {8, 12}};
    auto r = dimension_asymptotics(d, 1, alpha);
    for (double e : r.rel_dev) CHECK(e < 1e-14);
    CHECK_THROWS_AS(dimension_asymptotics({{1, 1}}, 1, alpha), std::invalid_argument);
    auto a2 = HermitianForm::identity(2);
    CHECK(alpha_volume(a2) == doctest::Approx(2.0));
    CHECK(predicted_cluster(3, a2) == 9);
}
