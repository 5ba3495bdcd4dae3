#include "toruslab/bundle.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::shared_ptr<LatticeBundle> make_links(const TwoForm& F, GeometryPtr geom) {
    const auto& g = *geom;
    auto b = std::make_shared<LatticeBundle>();
    b->geom = geom;
    b->F = F;
    const double h = g.h;
    for (int dir = 0; dir < g.d; ++dir) {
        auto& th = b->theta[dir];
        th.assign(g.sites, 0.0);
        for (std::size_t s = 0; s < g.sites; ++s) {
            Coord c = g.coords(s);
            double v = 0;
            // linear gauge: theta_b = 2 pi h^2 sum_{a<b} F_ab s_a
            for (int a = 0; a < dir; ++a) v += kTwoPi * h * h * F(a, dir) * c[a];
            // wrap-around links carry the compensating twist
            if (c[dir] == g.N - 1)
                for (int e = dir + 1; e < g.d; ++e) v -= kTwoPi * h * F(dir, e) * c[e];
            th[s] = v;
        }
        b->U[dir].resize(g.sites);
        for (std::size_t s = 0; s < g.sites; ++s) b->U[dir][s] = std::polar(1.0, th[s]);
    }
    return b;
}

}  // namespace

BundlePtr build_bundle(const TwoForm& F, GeometryPtr geom) {
    if (!geom) throw std::invalid_argument("build_bundle: null geometry");
    if (F.rows() != geom->d || F.cols() != geom->d)
        throw std::invalid_argument("build_bundle: form dimension does not match geometry");
    auto b = make_links(F, geom);
    for (auto [a, c] : coordinate_faces(geom->n)) {
        double v = F(a, c);
        if (std::abs(v - std::nearbyint(v)) > 1e-12)
            throw std::invalid_argument("build_bundle: non-integer flux");
        b->flux.push_back(static_cast<long>(std::nearbyint(v)));
    }
    return b;
}

BundlePtr build_bundle(const IntegralApproximant& ap, GeometryPtr geom) {
    if (!geom || ap.n != geom->n) throw std::invalid_argument("build_bundle: dimension mismatch");
    return build_bundle(ap.F, geom);
}

BundlePtr trivial_bundle(GeometryPtr geom) {
    return build_bundle(TwoForm::Zero(geom->d, geom->d), geom);
}

std::vector<std::vector<double>> plaquette_curvature(const LatticeBundle& b) {
    const auto& g = *b.geom;
    std::vector<std::vector<double>> out;
    const double scale = kTwoPi * g.h * g.h;
    for (auto [a, c] : coordinate_faces(g.n)) {
        std::vector<double> f(g.sites);
        for (std::size_t s = 0; s < g.sites; ++s) {
            cplx loop = b.U[a][s] * b.U[c][g.fwd[a][s]] * std::conj(b.U[a][g.fwd[c][s]]) *
                        std::conj(b.U[c][s]);
            f[s] = std::arg(loop) / scale;
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<double> face_fluxes(const LatticeBundle& b) {
    const auto& g = *b.geom;
    auto curv = plaquette_curvature(b);
    auto faces = coordinate_faces(g.n);
    std::vector<double> out;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        auto [a, c] = faces[f];
        double acc = 0;
        for (int i = 0; i < g.N; ++i) {
            for (int j = 0; j < g.N; ++j) {
                Coord x{0, 0, 0, 0};
                x[a] = i;
                x[c] = j;
                acc += curv[f][g.index(x)];
            }
        }
        out.push_back(acc * g.h * g.h);
    }
    return out;
}

BundlePtr gauge_transform(const LatticeBundle& b, const std::vector<double>& chi) {
    const auto& g = *b.geom;
    if (chi.size() != g.sites) throw std::invalid_argument("gauge_transform: size mismatch");
    auto nb = std::make_shared<LatticeBundle>(b);
    for (int a = 0; a < g.d; ++a) {
        for (std::size_t s = 0; s < g.sites; ++s) {
            nb->theta[a][s] = b.theta[a][s] + chi[g.fwd[a][s]] - chi[s];
            nb->U[a][s] = b.U[a][s] * std::polar(1.0, chi[g.fwd[a][s]] - chi[s]);
        }
    }
    return nb;
}

cplx wilson_line(const LatticeBundle& b, std::size_t from, const Coord& disp) {
    const auto& g = *b.geom;
    for (int a = 0; a < g.d; ++a)
        if (std::abs(disp[a]) > g.N / 2) throw std::out_of_range("wilson_line: path leaves the chart");
    cplx w = 1.0;
    std::size_t s = from;
    for (int a = 0; a < g.d; ++a) {
        for (int i = 0; i < disp[a]; ++i) {
            w *= b.U[a][s];
            s = g.fwd[a][s];
        }
        for (int i = 0; i > disp[a]; --i) {
            s = g.bwd[a][s];
            w *= std::conj(b.U[a][s]);
        }
    }
    return w;
}

cplx wilson_line(const LatticeBundle& b, std::size_t from, std::size_t to) {
    return wilson_line(b, from, b.geom->displacement(from, to));
}

std::vector<cplx> staircase_gauge(const LatticeBundle& b, std::size_t center) {
    const auto& g = *b.geom;
    std::vector<cplx> out(g.sites);
    for (std::size_t s = 0; s < g.sites; ++s) out[s] = wilson_line(b, center, s);
    return out;
}

void write_links(std::ostream& os, const LatticeBundle& b) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    const auto& g = *b.geom;
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put(static_cast<std::int32_t>(g.n));
    put(static_cast<std::int32_t>(g.N));
    put(static_cast<std::int32_t>(b.flux.size()));
    for (long f : b.flux) put(static_cast<std::int64_t>(f));
    for (int a = 0; a < g.d; ++a)
        os.write(reinterpret_cast<const char*>(b.theta[a].data()),
                 static_cast<std::streamsize>(b.theta[a].size() * sizeof(double)));
}

}  // namespace tlab
