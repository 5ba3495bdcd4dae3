#pragma once

#include <memory>
#include <ostream>
#include <vector>

#include "toruslab/cohomology.hpp"
#include "toruslab/geometry.hpp"

namespace tlab {

// Discrete Hermitian line bundle in unitary gauge. The link U_a(s) =
// exp(i theta_a(s)) transports from s + e_a back to s:
//   (S_a f)(s) = conj(U_a(s)) f(s + e_a).
// Plaquette phases equal 2 pi h^2 F_ab, so the curvature form is the F of
// the approximant and the face fluxes are its integer periods.
struct LatticeBundle {
    GeometryPtr geom;
    TwoForm F;               // alpha_k coefficients
    std::vector<long> flux;  // integer periods per coordinate face
    std::array<std::vector<double>, 4> theta;
    std::array<std::vector<cplx>, 4> U;

    int n() const { return geom->n; }
};

using BundlePtr = std::shared_ptr<const LatticeBundle>;

BundlePtr build_bundle(const IntegralApproximant& ap, GeometryPtr geom);
// Same construction from integer periods directly; throws on non-integer flux.
BundlePtr build_bundle(const TwoForm& F, GeometryPtr geom);
BundlePtr trivial_bundle(GeometryPtr geom);

// Per-face curvature: faces in coordinate_faces order, one value per site,
// equal to arg(U_a(s) U_b(s+a) conj(U_a(s+b)) conj(U_b(s))) / (2 pi h^2).
std::vector<std::vector<double>> plaquette_curvature(const LatticeBundle& b);

// Total flux through each coordinate 2-torus through the origin,
// sum of plaquette phases / 2 pi.
std::vector<double> face_fluxes(const LatticeBundle& b);

// theta'_a(s) = theta_a(s) + chi(s + e_a) - chi(s); sections map by
// f -> exp(i chi) f (see gauge_section in field.hpp).
BundlePtr gauge_transform(const LatticeBundle& b, const std::vector<double>& chi);

// Ordered product along the staircase path (axis 0 first, then 1, ...)
// from `from` by the lattice displacement `disp`. A section g with g(from)=1
// extended by this product is covariantly constant along the path.
// Throws if any |disp_a| > N/2 (path leaves the chart).
cplx wilson_line(const LatticeBundle& b, std::size_t from, const Coord& disp);
// Minimal-image version.
cplx wilson_line(const LatticeBundle& b, std::size_t from, std::size_t to);

// Staircase gauge factor g(s) = wilson_line(center -> s) at every site.
std::vector<cplx> staircase_gauge(const LatticeBundle& b, std::size_t center);

// Binary link dump, little-endian: int32 n, int32 N, int32 b2, int64 flux[b2],
// then for each direction a = 0..2n-1 the theta_a array in row-major site
// order as float64.
void write_links(std::ostream& os, const LatticeBundle& b);

}  // namespace tlab
