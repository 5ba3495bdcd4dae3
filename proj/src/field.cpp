#include "toruslab/field.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tlab {

int component_count(int n, int q) {
    if (q == 0) return 1;
    if (q == 1) return n;
    if (q == 2) return n == 2 ? 1 : 0;
    throw std::invalid_argument("bidegree must be 0, 1 or 2");
}

Point component_offset(int n, int q, int c) {
    Point p{0, 0, 0, 0};
    if (q == 1) {
        p[2 * c] = 0.5;
        p[2 * c + 1] = 0.5;
    } else if (q == 2) {
        for (int a = 0; a < 2 * n; ++a) p[a] = 0.5;
    }
    return p;
}

SectionField::SectionField(BundlePtr b, int q_, bool holo_) : bundle(std::move(b)), q(q_), holo(holo_) {
    if (!bundle) throw std::invalid_argument("SectionField: null bundle");
    data = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(component_count(bundle->n(), q) * bundle->geom->sites));
}

int SectionField::components() const { return component_count(n(), q); }

cplx SectionField::pair(int j, int l, std::size_t s) const {
    if (q != 2) throw std::logic_error("pair: q must be 2");
    if (j == l) return 0.0;
    cplx v = data(static_cast<Eigen::Index>(s));
    return j < l ? v : -v;
}

Point SectionField::offset(int c) const { return component_offset(n(), q, c); }

double field_weight(const SectionField& f) {
    return std::pow(2.0, f.q) * f.bundle->geom->volume_weight();
}

cplx l2_inner(const SectionField& f, const SectionField& g) {
    if (f.q != g.q || f.holo != g.holo) throw std::invalid_argument("l2_inner: bidegree mismatch");
    if (f.bundle->geom != g.bundle->geom) throw std::invalid_argument("l2_inner: geometry mismatch");
    return field_weight(f) * f.data.dot(g.data);
}

double l2_norm(const SectionField& f) { return std::sqrt(field_weight(f)) * f.data.norm(); }

SectionField gauge_section(const SectionField& f, const std::shared_ptr<const LatticeBundle>& nb,
                           const std::vector<double>& chi) {
    SectionField out(nb, f.q, f.holo);
    const std::size_t S = f.sites();
    for (int c = 0; c < f.components(); ++c)
        for (std::size_t s = 0; s < S; ++s)
            out.data(static_cast<Eigen::Index>(c * S + s)) =
                std::polar(1.0, chi[s]) * f.data(static_cast<Eigen::Index>(c * S + s));
    return out;
}

SectionField random_section(BundlePtr b, int q, std::uint64_t seed) {
    SectionField f(std::move(b), q);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < f.data.size(); ++i) {
        double re = nd(rng);
        double im = nd(rng);
        f.data(i) = cplx(re, im);
    }
    return f;
}

std::vector<double> random_gauge(const TorusGeometry& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);
    std::vector<double> chi(g.sites);
    for (auto& v : chi) v = ud(rng);
    return chi;
}

}  // namespace tlab
