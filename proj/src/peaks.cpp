#include "toruslab/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <stdexcept>

#include "toruslab/operators.hpp"

namespace tlab {

namespace {

constexpr double kPi = std::numbers::pi;

double radius_of(const Point& xi, int d) {
    double r2 = 0;
    for (int a = 0; a < d; ++a) r2 += xi[a] * xi[a];
    return std::sqrt(r2);
}

cplx monomial(const std::array<cplx, 2>& z, const MultiIndex& m) {
    cplx v = 1.0;
    for (int j = 0; j < 2; ++j)
        for (int p = 0; p < m[j]; ++p) v *= z[j];
    return v;
}

void check_radius(double radius) {
    if (!(radius > 0 && radius < 0.5)) throw std::invalid_argument("chart radius must lie in (0, 1/2)");
}

}  // namespace

int jet_order(const MultiIndex& m) { return m[0] + m[1]; }

BundlePtr chart_bundle(GeometryPtr geom, std::size_t center, const TwoForm& F) {
    const auto& g = *geom;
    auto b = std::make_shared<LatticeBundle>();
    b->geom = geom;
    b->F = F;
    for (int dir = 0; dir < g.d; ++dir) {
        b->theta[dir].assign(g.sites, 0.0);
        b->U[dir].resize(g.sites);
        for (std::size_t s = 0; s < g.sites; ++s) {
            Point xi = g.chart_point(center, s);
            double v = 0;
            for (int a = 0; a < g.d; ++a) v += F(a, dir) * xi[a];
            b->theta[dir][s] = kPi * g.h * v;
            b->U[dir][s] = std::polar(1.0, b->theta[dir][s]);
        }
    }
    return b;
}

ChartField jet_section(GeometryPtr geom, const JetSpec& spec, double k, const HermitianForm& alpha, double radius) {
    check_radius(radius);
    if (alpha.n() != geom->n) throw std::invalid_argument("jet_section: dimension mismatch");
    for (const auto& t : spec.terms)
        if (jet_order(t.m) > 2 || t.m[0] < 0 || t.m[1] < 0 || (geom->n == 1 && t.m[1] != 0))
            throw std::invalid_argument("jet_section: multi-index out of range");
    const auto& g = *geom;
    ChartField u{geom, spec.center, radius, std::vector<cplx>(g.sites)};
    auto phi = local_potential(alpha, spec.center, radius);
    for (std::size_t s = 0; s < g.sites; ++s) {
        Point xi = g.chart_point(spec.center, s);
        auto z = complex_coords(xi, g.n);
        cplx poly = 0;
        for (const auto& t : spec.terms) poly += t.coeff * monomial(z, t.m);
        u.values[s] = poly * std::exp(-0.5 * k * phi.value(xi));
    }
    return u;
}

ChartField gaussian_section(GeometryPtr geom, std::size_t center, double k, const HermitianForm& alpha,
                            double radius) {
    return jet_section(std::move(geom), JetSpec{center, {JetTerm{}}}, k, alpha, radius);
}

double chart_dbar_residual(const ChartField& u, double k, const HermitianForm& alpha, double margin) {
    const auto& g = *u.geom;
    auto cb = chart_bundle(u.geom, u.center, k * two_form(alpha));
    SectionField f(cb, 0);
    for (std::size_t s = 0; s < g.sites; ++s) f.data(static_cast<Eigen::Index>(s)) = u.values[s];
    auto df = dbar(f);
    const double r = u.radius - margin;
    return ball_l2_norm(df, u.center, r) / std::max(ball_l2_norm(f, u.center, r), 1e-300);
}

std::vector<double> cutoff(const TorusGeometry& g, std::size_t center, double r1, double r2) {
    if (!(r1 > 0 && r1 < r2 && r2 < 0.5)) throw std::invalid_argument("cutoff: need 0 < r1 < r2 < 1/2");
    std::vector<double> th(g.sites);
    for (std::size_t s = 0; s < g.sites; ++s) {
        double r = radius_of(g.chart_point(center, s), g.d);
        double t = std::clamp((r - r1) / (r2 - r1), 0.0, 1.0);
        th[s] = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    }
    return th;
}

std::vector<double> staircase_phase(const TorusGeometry& g, std::size_t center, const TwoForm& F) {
    std::vector<double> chi(g.sites);
    for (std::size_t s = 0; s < g.sites; ++s) {
        Point xi = g.chart_point(center, s);
        double v = 0;
        for (int a = 0; a < g.d; ++a)
            for (int b = a + 1; b < g.d; ++b) v += F(a, b) * xi[a] * xi[b];
        chi[s] = -kPi * v;
    }
    return chi;
}

SectionField globalize(const ChartField& local, const std::vector<double>& theta, BundlePtr bundle) {
    const auto& g = *bundle->geom;
    if (local.geom->sites != g.sites || theta.size() != g.sites)
        throw std::invalid_argument("globalize: size mismatch");
    auto W = staircase_gauge(*bundle, local.center);
    auto chi = staircase_phase(g, local.center, bundle->F);
    SectionField s(bundle, 0);
    for (std::size_t t = 0; t < g.sites; ++t) {
        if (theta[t] == 0.0) continue;
        if (radius_of(g.chart_point(local.center, t), g.d) >= local.radius)
            throw std::invalid_argument("globalize: cut-off support escapes the chart");
        s.data(static_cast<Eigen::Index>(t)) = theta[t] * W[t] * std::polar(1.0, chi[t]) * local.values[t];
    }
    return s;
}

ChartField to_chart(const SectionField& s, std::size_t center, double radius) {
    check_radius(radius);
    const auto& g = *s.bundle->geom;
    auto W = staircase_gauge(*s.bundle, center);
    auto chi = staircase_phase(g, center, s.bundle->F);
    ChartField f{s.bundle->geom, center, radius, std::vector<cplx>(g.sites)};
    for (std::size_t t = 0; t < g.sites; ++t)
        f.values[t] = std::conj(W[t]) * std::polar(1.0, -chi[t]) * s.data(static_cast<Eigen::Index>(t));
    return f;
}

cplx chart_derivative(const ChartField& f, const MultiIndex& m) {
    const auto& g = *f.geom;
    if (jet_order(m) > 2) throw std::invalid_argument("chart_derivative: order above 2");
    auto at = [&](const Coord& d) {
        Coord c = g.coords(f.center);
        for (int a = 0; a < g.d; ++a) c[a] += d[a];
        return f.values[g.index(c)];
    };
    // d/dz_j = (d_x - i d_y)/2 applied as a sum over stencil weights
    std::vector<std::pair<Coord, cplx>> stencil{{Coord{0, 0, 0, 0}, 1.0}};
    for (int j = 0; j < 2; ++j) {
        for (int p = 0; p < m[j]; ++p) {
            std::vector<std::pair<Coord, cplx>> next;
            for (auto [c, w] : stencil) {
                for (int sgn : {1, -1}) {
                    Coord cx = c, cy = c;
                    cx[2 * j] += sgn;
                    cy[2 * j + 1] += sgn;
                    next.emplace_back(cx, w * double(sgn) / (4.0 * g.h));
                    next.emplace_back(cy, w * cplx(0, -1) * double(sgn) / (4.0 * g.h));
                }
            }
            stencil = std::move(next);
        }
    }
    cplx v = 0;
    for (auto [c, w] : stencil) v += w * at(c);
    return v;
}

double ball_l2_norm(const SectionField& f, std::size_t center, double r) {
    const auto& g = *f.bundle->geom;
    const std::size_t S = g.sites;
    double acc = 0;
    for (std::size_t s = 0; s < S; ++s) {
        if (radius_of(g.chart_point(center, s), g.d) > r) continue;
        for (int c = 0; c < f.components(); ++c) acc += std::norm(f.data(static_cast<Eigen::Index>(c * S + s)));
    }
    return std::sqrt(acc * field_weight(f));
}

double ball_c0_norm(const SectionField& f, std::size_t center, double r) {
    const auto& g = *f.bundle->geom;
    const std::size_t S = g.sites;
    const double w = std::pow(2.0, f.q);
    double best = 0;
    for (std::size_t s = 0; s < S; ++s) {
        if (radius_of(g.chart_point(center, s), g.d) > r) continue;
        double acc = 0;
        for (int c = 0; c < f.components(); ++c) acc += std::norm(f.data(static_cast<Eigen::Index>(c * S + s)));
        best = std::max(best, std::sqrt(w * acc));
    }
    return best;
}

double c0_norm(const SectionField& f) { return ball_c0_norm(f, 0, 1e300); }

cplx chart_inner(const ChartField& a, const ChartField& b, double r) {
    const auto& g = *a.geom;
    cplx acc = 0;
    for (std::size_t s = 0; s < g.sites; ++s)
        if (radius_of(g.chart_point(a.center, s), g.d) <= r) acc += std::conj(a.values[s]) * b.values[s];
    return acc * g.volume_weight();
}

double delta_k(long k, int n, double delta0, const PeakConstants& pc) {
    const double kk = double(k);
    return 4.0 / (delta0 * kk) *
           (1.0 + pc.C_delta / (delta0 * pc.delta * pc.delta * std::pow(kk, 1.0 + 2.0 / betti2(n))));
}

double eps_k(long k, int n, double delta0, const PeakConstants& pc) {
    return pc.C_X * (1.0 / std::pow(double(k), 4.0 / betti2(n)) + delta_k(k, n, delta0, pc));
}

PeakSection correct(const SectionField& s, std::size_t center, const HkBasis& basis, double delta0,
                    const PeakConstants& pc) {
    if (s.q != 0) throw std::invalid_argument("correct: q must be 0");
    PeakSection ps;
    ps.s = s;
    ps.center = center;
    ps.k = basis.k;
    auto [sh, snh] = project(s, basis);
    ps.sh = sh;
    ps.snh = snh;
    const double ns = l2_norm(s);
    SectionField rest(s.bundle, 0);
    rest.data = s.data - sh.data - snh.data;
    ps.split_residual = ns > 0 ? l2_norm(rest) / ns : 0.0;
    auto ds = dbar(s), dh = dbar(sh), dn = dbar(snh);
    ps.dbar2 = std::pow(l2_norm(ds), 2);
    ps.snh2 = std::pow(l2_norm(snh), 2);
    ps.ratio = ps.dbar2 > 0 ? ps.snh2 / ps.dbar2 : 0.0;
    ps.bound_leading = 4.0 / (delta0 * double(basis.k));
    ps.bound = delta_k(basis.k, s.n(), delta0, pc);
    ps.bound_ok = ps.ratio <= pc.slack * ps.bound;
    const double nh = l2_norm(dh), nn = l2_norm(dn);
    ps.image_orthogonality = nh * nn > 0 ? std::abs(l2_inner(dh, dn)) / (nh * nn) : 0.0;
    ps.value_at_center = std::abs(sh.data(static_cast<Eigen::Index>(center)));
    return ps;
}

PeakReport peak_report(const PeakSection& ps, double delta0, const PeakConstants& pc) {
    PeakReport r;
    const int n = ps.s.n();
    r.eps = eps_k(ps.k, n, delta0, pc);
    r.deviation = std::abs(ps.value_at_center - 1.0);
    r.value_ok = r.deviation <= r.eps;
    r.nonvanishing = ps.value_at_center > 0;
    // ||s|| - ||s_nh|| <= ||s_h|| <= ||s|| with ||s_nh||^2 <= delta_k ||dbar s||^2
    r.norm_sh = l2_norm(ps.sh);
    r.upper = l2_norm(ps.s) * (1 + 1e-12);
    r.lower = l2_norm(ps.s) - std::sqrt(delta_k(ps.k, n, delta0, pc) * ps.dbar2);
    r.bracket_ok = r.norm_sh >= r.lower && r.norm_sh <= r.upper;
    const double rb = pc.r_ball / std::sqrt(double(ps.k));
    r.ball_c0 = ball_c0_norm(ps.sh, ps.center, rb);
    r.ball_ok = std::abs(r.ball_c0 - 1.0) <= std::sqrt(r.eps);
    const double total = std::pow(r.norm_sh, 2);
    r.mass_fraction = total > 0 ? std::pow(ball_l2_norm(ps.sh, ps.center, rb), 2) / total : 0.0;
    return r;
}

PeakSection peak_section(const HkBasis& basis, const HermitianForm& alpha, std::size_t center, double delta0,
                         const PeakConstants& pc, const PeakParams& pp) {
    const auto& geom = basis.bundle->geom;
    auto u = gaussian_section(geom, center, double(basis.k), alpha, pp.radius);
    auto s = globalize(u, cutoff(*geom, center, pp.r1, pp.r2), basis.bundle);
    return correct(s, center, basis, delta0, pc);
}

JetVerdict jet_generation_check(const HkBasis& basis, const HermitianForm& alpha, std::size_t center,
                                const MultiIndex& m, cplx coeff, const PeakParams& pp) {
    JetVerdict v;
    if (jet_order(m) > 1) throw std::invalid_argument("jet_generation_check: order above 1");
    const auto& geom = basis.bundle->geom;
    auto u = jet_section(geom, JetSpec{center, {JetTerm{m, coeff}}}, double(basis.k), alpha, pp.radius);
    auto s = globalize(u, cutoff(*geom, center, pp.r1, pp.r2), basis.bundle);
    auto [sh, snh] = project(s, basis);
    v.uncorrected = chart_derivative(to_chart(s, center, pp.radius), m);
    v.corrected = chart_derivative(to_chart(sh, center, pp.radius), m);
    if (coeff == cplx(0)) {
        v.note = "degenerate input";
        return v;
    }
    v.ratio = std::abs(v.corrected) / std::max(std::abs(v.uncorrected), 1e-300);
    v.pass = v.ratio >= 0.5;
    return v;
}

double antiholo_identity_check(const ChartField& f, const QuadraticPotential& phi, double k, double margin) {
    const auto& g = *f.geom;
    const double r = f.radius - margin;
    double res = 0, nrm = 0;
    for (std::size_t s = 0; s < g.sites; ++s) {
        Point xi = g.chart_point(f.center, s);
        if (radius_of(xi, g.d) > r) continue;
        nrm += std::norm(f.values[s]);
        for (int j = 0; j < g.n; ++j) {
            auto nb = [&](int a, int sgn) { return f.values[sgn > 0 ? g.fwd[a][s] : g.bwd[a][s]]; };
            cplx dx = (nb(2 * j, 1) - nb(2 * j, -1)) / (2 * g.h);
            cplx dy = (nb(2 * j + 1, 1) - nb(2 * j + 1, -1)) / (2 * g.h);
            cplx v = 0.5 * (dx + cplx(0, 1) * dy) + 0.5 * k * f.values[s] * phi.dbar(xi, j);
            res += std::norm(v);
        }
    }
    return nrm > 0 ? std::sqrt(res / nrm) : 0.0;
}

PeakRow peak_row(const PeakSection& ps, const PeakReport& rep) {
    return PeakRow{ps.k, ps.center, ps.snh2, ps.dbar2, ps.ratio, ps.bound, ps.value_at_center, ps.bound_ok,
                   rep.value_ok};
}

void write_peak_csv(std::ostream& os, const std::vector<PeakRow>& rows) {
    os << "k,x,snh2,dbar2,ratio,bound,value,bound_ok,value_ok\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.k << ',' << r.center << ',' << r.snh2 << ',' << r.dbar2 << ',' << r.ratio << ',' << r.bound << ','
           << r.value << ',' << int(r.bound_ok) << ',' << int(r.value_ok) << '\n';
}

}  // namespace tlab
