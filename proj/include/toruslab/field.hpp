#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "toruslab/bundle.hpp"

namespace tlab {

// L_k-valued form of bidegree (0,q) or, with holo set, (q,0). Components are
// stored contiguously, one block of `sites` values per component:
//   q = 0: one component; q = 1: n components u_j (coefficient of dzbar_j);
//   q = 2: n = 2 only, the single independent coefficient u_12 of
//   dzbar_1 ^ dzbar_2 (u_21 = -u_12 is implied); for n = 1 there are none.
// Component values live at staggered positions s + c, see offset().
struct SectionField {
    BundlePtr bundle;
    int q = 0;
    bool holo = false;
    Eigen::VectorXcd data;

    SectionField() = default;
    SectionField(BundlePtr b, int q, bool holo = false);

    int n() const { return bundle->n(); }
    std::size_t sites() const { return bundle->geom->sites; }
    int components() const;
    auto comp(int c) { return data.segment(static_cast<Eigen::Index>(c * sites()), static_cast<Eigen::Index>(sites())); }
    auto comp(int c) const { return data.segment(static_cast<Eigen::Index>(c * sites()), static_cast<Eigen::Index>(sites())); }
    // Antisymmetric access for q = 2: (0,1) -> u_12, (1,0) -> -u_12, (j,j) -> 0.
    cplx pair(int j, int l, std::size_t s) const;

    Point offset(int c) const;
};

int component_count(int n, int q);
// Half-cell position of component c: 0 for q = 0, (e_{2j} + e_{2j+1})/2 for
// component j of q = 1, (1,1,1,1)/2 for q = 2.
Point component_offset(int n, int q, int c);

// h^{2n} sum_sites 2^q sum_comps conj(f) g; the 2^q factor is the pointwise
// metric on dzbar_J for the flat metric (|dzbar_j|^2 = 2).
cplx l2_inner(const SectionField& f, const SectionField& g);
double l2_norm(const SectionField& f);
double field_weight(const SectionField& f);  // 2^q h^{2n}

SectionField gauge_section(const SectionField& f, const std::shared_ptr<const LatticeBundle>& nb,
                           const std::vector<double>& chi);

// Reproducible standard complex Gaussian white noise.
SectionField random_section(BundlePtr b, int q, std::uint64_t seed);
// Random real gauge field chi in [0, 2 pi).
std::vector<double> random_gauge(const TorusGeometry& g, std::uint64_t seed);

}  // namespace tlab
