#include "doctest.h"

#include <cmath>
#include <numbers>
#include <cstring>
#include <sstream>

#include "toruslab/bundle.hpp"
#include "toruslab/field.hpp"

using namespace tlab;

namespace {
constexpr double kPi = std::numbers::pi;

BundlePtr flux1(int N, long m) {
    return build_bundle(form_from_periods(1, {double(m)}), build_geometry(1, N));
}
}  // namespace

TEST_CASE("flux quantization") {
    auto b = flux1(16, 3);
    auto fl = face_fluxes(*b);
    CHECK(std::abs(fl[0] - 3.0) < 1e-12);
    CHECK(b->flux == std::vector<long>{3});

    auto t = trivial_bundle(build_geometry(1, 8));
    for (int a = 0; a < 2; ++a)
        for (double th : t->theta[a]) CHECK(th == 0.0);

    std::vector<double> m{2, 1, -1, 3, 0, 4};
    auto b2 = build_bundle(form_from_periods(2, m), build_geometry(2, 8));
    auto f2 = face_fluxes(*b2);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(f2[i] - m[i]) < 1e-12);

    CHECK_THROWS_AS(build_bundle(form_from_periods(1, {0.5}), build_geometry(1, 8)), std::invalid_argument);
}

TEST_CASE("plaquette curvature is the constant form") {
    std::vector<double> m{2, 1, -1, 3, 0, 4};
    TwoForm F = form_from_periods(2, m);
    auto b = build_bundle(F, build_geometry(2, 8));
    auto curv = plaquette_curvature(*b);
    auto faces = coordinate_faces(2);
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (double v : curv[f]) CHECK(std::abs(v - F(faces[f].first, faces[f].second)) < 1e-9);

    // the linear-gauge construction is exact at every N, so the sweep of
    // sup-deviations is flat at rounding level
    for (int N : {16, 32, 64}) {
        auto bn = flux1(N, 5);
        double dev = 0;
        auto cv = plaquette_curvature(*bn);
        for (double v : cv[0]) dev = std::max(dev, std::abs(v - 5.0));
        CHECK(dev < 1e-8);
    }
    auto t = trivial_bundle(build_geometry(1, 8));
    auto ct = plaquette_curvature(*t);
    for (double v : ct[0]) CHECK(v == 0.0);
}

TEST_CASE("gauge transformations") {
    auto b = flux1(16, 3);
    std::vector<double> zero(b->geom->sites, 0.0);
    auto b0 = gauge_transform(*b, zero);
    for (std::size_t s = 0; s < b->geom->sites; ++s) CHECK(b0->U[0][s] == b->U[0][s]);

    auto chi = random_gauge(*b->geom, 7);
    auto bg = gauge_transform(*b, chi);
    auto c0 = plaquette_curvature(*b), c1 = plaquette_curvature(*bg);
    for (std::size_t s = 0; s < b->geom->sites; ++s) CHECK(std::abs(c0[0][s] - c1[0][s]) < 1e-9);
}

TEST_CASE("wilson lines") {
    auto b = flux1(16, 3);
    const auto& g = *b->geom;
    CHECK(wilson_line(*b, 5, Coord{0, 0, 0, 0}) == cplx(1.0));
    auto t = trivial_bundle(build_geometry(1, 16));
    CHECK(std::abs(wilson_line(*t, 3, Coord{5, -4, 0, 0}) - 1.0) < 1e-15);

    // around one plaquette: U_x(s) U_y(s+x) conj(U_x(s+y)) conj(U_y(s))
    std::size_t s = g.index(Coord{3, 4, 0, 0});
    cplx forward = wilson_line(*b, s, Coord{1, 1, 0, 0});
    cplx back = wilson_line(*b, g.index(Coord{3, 5, 0, 0}), Coord{1, 0, 0, 0}) *
                wilson_line(*b, s, Coord{0, 1, 0, 0});
    cplx loop = forward / back;
    CHECK(std::abs(loop - std::polar(1.0, 2 * kPi * g.h * g.h * 3.0)) < 1e-13);

    CHECK_THROWS_AS(wilson_line(*b, 0, Coord{9, 0, 0, 0}), std::out_of_range);

    // covariantly constant along the path from the centre
    auto gauge = staircase_gauge(*b, s);
    CHECK(std::abs(gauge[s] - 1.0) < 1e-15);
    std::size_t nxt = g.fwd[0][s];
    CHECK(std::abs(gauge[nxt] - b->U[0][s]) < 1e-15);
}

TEST_CASE("binary link dump layout") {
    auto b = flux1(8, 2);
    std::ostringstream os;
    write_links(os, *b);
    std::string s = os.str();
    CHECK(s.size() == 3 * 4 + 8 + 2 * 64 * 8);
    std::int32_t N;
    std::memcpy(&N, s.data() + 4, 4);
    CHECK(N == 8);
    std::int64_t f;
    std::memcpy(&f, s.data() + 12, 8);
    CHECK(f == 2);
}
