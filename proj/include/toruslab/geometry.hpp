#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tlab {

using cplx = std::complex<double>;
using Coord = std::array<int, 4>;
using Point = std::array<double, 4>;

// Flat torus R^{2n}/Z^{2n} with real coordinates ordered (x1, y1, x2, y2)
// and an N-point periodic grid on every axis.
struct TorusGeometry {
    int n = 1;
    int N = 8;
    int d = 2;  // real dimension 2n
    double h = 0.125;
    std::size_t sites = 0;
    std::array<std::size_t, 4> stride{};
    // Neighbour tables: fwd[a][s] = s + e_a, bwd[a][s] = s - e_a.
    std::array<std::vector<std::uint32_t>, 4> fwd;
    std::array<std::vector<std::uint32_t>, 4> bwd;

    Coord coords(std::size_t s) const;
    std::size_t index(const Coord& c) const;  // wraps periodically
    // Minimal-image displacement of s from center, components in [-N/2, N/2).
    Coord displacement(std::size_t center, std::size_t s) const;
    // Chart coordinates xi = h * displacement.
    Point chart_point(std::size_t center, std::size_t s) const;
    double volume_weight() const;  // h^{2n}
};

using GeometryPtr = std::shared_ptr<const TorusGeometry>;

// Throws std::invalid_argument for n outside {1,2}, odd N or N < 8.
GeometryPtr build_geometry(int n, int N);

// Constant (1,1)-form alpha = (i/2) sum H_{jl} dz_j ^ dzbar_l. With this
// normalization H = c gives alpha = c dx ^ dy for n = 1, so periods over the
// coordinate 2-tori are read from H directly (see docs/conventions.md).
struct HermitianForm {
    Eigen::MatrixXcd H;

    int n() const { return static_cast<int>(H.rows()); }
    static HermitianForm identity(int n);
    static HermitianForm scalar(int n, double c);
    // Default transcendental classes: golden ratio for n = 1; for n = 2 the
    // diagonal (sqrt5-1)/2, sqrt2-1 and real off-diagonal (sqrt3-1)/4.
    static HermitianForm default_class(int n);
};

bool is_hermitian(const Eigen::MatrixXcd& H, double tol = 1e-12);

// Generalized eigenvalues of (alpha, omega), ascending. Throws on
// non-Hermitian input or indefinite omega.
std::vector<double> alpha_eigenvalues(const HermitianForm& alpha, const HermitianForm& omega);

// delta_0 with alpha >= 2 delta_0 omega.
double delta0(const HermitianForm& alpha, const HermitianForm& omega);

// Quadratic potential phi(z) = pi * sum_{jl} H_{jl} z_j conj(z_l) in chart
// coordinates centred at a site, so that (i/2pi) ddbar phi = alpha exactly.
struct QuadraticPotential {
    std::size_t center = 0;
    Eigen::MatrixXcd hessian;  // the H of alpha
    double radius = 0.5;

    double value(const Point& xi) const;
    // d phi / d zbar_j at xi.
    cplx dbar(const Point& xi, int j) const;
    cplx del(const Point& xi, int j) const;
};

QuadraticPotential local_potential(const HermitianForm& alpha, std::size_t center,
                                   double radius = 0.5);

// Coefficients H_{jl} recovered from centred finite differences of phi at
// the chart origin with step hstep: H_{jl} = (1/pi) d_j dbar_l phi.
Eigen::MatrixXcd potential_form_fd(const QuadraticPotential& phi, double hstep);

std::array<cplx, 2> complex_coords(const Point& xi, int n);

// Multi-component grid field used for C^r norms: comps arrays of size sites.
struct GridField {
    GeometryPtr geom;
    std::vector<std::vector<cplx>> comps;
};

// max over sites, components and multi-indices |beta| <= r of |d^beta f|,
// derivatives by centred second-order differences. Throws for r > 2.
double cr_norm(const GridField& f, int r);
double cr_norm(const TorusGeometry& g, std::span<const cplx> f, int r);

}  // namespace tlab
