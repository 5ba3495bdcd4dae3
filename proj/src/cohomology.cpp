#include "toruslab/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace tlab {

std::vector<std::pair<int, int>> coordinate_faces(int n) {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < 2 * n; ++a)
        for (int b = a + 1; b < 2 * n; ++b) out.emplace_back(a, b);
    return out;
}

ClassCoordinates period_coordinates(const TwoForm& F) {
    const int n = static_cast<int>(F.rows()) / 2;
    ClassCoordinates c{n, {}};
    for (auto [a, b] : coordinate_faces(n)) c.periods.push_back(F(a, b));
    return c;
}

TwoForm form_from_periods(int n, const std::vector<double>& p) {
    auto faces = coordinate_faces(n);
    if (p.size() != faces.size()) throw std::invalid_argument("form_from_periods: wrong length");
    TwoForm F = TwoForm::Zero(2 * n, 2 * n);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        auto [a, b] = faces[i];
        F(a, b) = p[i];
        F(b, a) = -p[i];
    }
    return F;
}

namespace {

// Complex vectors of d_j and dbar_j in the real basis.
Eigen::VectorXcd tangent(int n, int j, bool bar) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(2 * n);
    v(2 * j) = 0.5;
    v(2 * j + 1) = bar ? cplx(0, 0.5) : cplx(0, -0.5);
    return v;
}

// dz_j(e_a) and dzbar_j(e_a)
cplx dz(int j, int a, bool bar) {
    if (a == 2 * j) return 1.0;
    if (a == 2 * j + 1) return bar ? cplx(0, -1) : cplx(0, 1);
    return 0.0;
}

}  // namespace

TwoForm two_form(const HermitianForm& alpha) {
    const int n = alpha.n();
    TwoForm F = TwoForm::Zero(2 * n, 2 * n);
    const cplx half_i(0, 0.5);
    for (int a = 0; a < 2 * n; ++a) {
        for (int b = 0; b < 2 * n; ++b) {
            cplx v = 0;
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l)
                    v += half_i * alpha.H(j, l) *
                         (dz(j, a, false) * dz(l, b, true) - dz(j, b, false) * dz(l, a, true));
            F(a, b) = v.real();
        }
    }
    return F;
}

TypeComponents type_components(const TwoForm& F) {
    const int n = static_cast<int>(F.rows()) / 2;
    TypeComponents t{Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n)};
    Eigen::MatrixXcd Fc = F.cast<cplx>();
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            t.c20(j, l) = tangent(n, j, false).transpose() * Fc * tangent(n, l, false);
            t.c11(j, l) = tangent(n, j, false).transpose() * Fc * tangent(n, l, true);
            t.c02(j, l) = tangent(n, j, true).transpose() * Fc * tangent(n, l, true);
        }
    }
    return t;
}

TwoForm recombine(const TypeComponents& t) {
    const int n = static_cast<int>(t.c11.rows());
    TwoForm F = TwoForm::Zero(2 * n, 2 * n);
    for (int a = 0; a < 2 * n; ++a) {
        for (int b = 0; b < 2 * n; ++b) {
            cplx v = 0;
            for (int j = 0; j < n; ++j) {
                for (int l = 0; l < n; ++l) {
                    // (dz_j ^ dz_l)(e_a, e_b) = dz_j(e_a) dz_l(e_b) - dz_j(e_b) dz_l(e_a)
                    v += 0.5 * t.c20(j, l) *
                         (dz(j, a, false) * dz(l, b, false) - dz(j, b, false) * dz(l, a, false));
                    v += t.c11(j, l) *
                         (dz(j, a, false) * dz(l, b, true) - dz(j, b, false) * dz(l, a, true));
                    v += 0.5 * t.c02(j, l) *
                         (dz(j, a, true) * dz(l, b, true) - dz(j, b, true) * dz(l, a, true));
                }
            }
            F(a, b) = v.real();
        }
    }
    return F;
}

Eigen::MatrixXcd hermitian_part(const TypeComponents& t) { return cplx(0, -2) * t.c11; }

IntegralApproximant assemble_alpha_k(int n, long k, const std::vector<long>& m,
                                     const ClassCoordinates& target) {
    const std::size_t b2 = static_cast<std::size_t>(betti2(n));
    if (m.size() != b2) throw std::invalid_argument("assemble_alpha_k: wrong period count");
    IntegralApproximant ap;
    ap.n = n;
    ap.k = k;
    ap.m = m;
    std::vector<double> p(m.begin(), m.end());
    ap.F = form_from_periods(n, p);
    ap.comp = type_components(ap.F);
    ap.err_total = 0;
    if (target.periods.size() == b2) {
        for (std::size_t i = 0; i < b2; ++i)
            ap.err_total = std::max(ap.err_total, std::abs(double(m[i]) - k * target.periods[i]));
    }
    ap.err_02 = ap.comp.c02.cwiseAbs().maxCoeff();
    return ap;
}

Selection dirichlet_select(const ClassCoordinates& c, long k_max, double C) {
    if (C <= 0) throw std::invalid_argument("dirichlet_select: C must be positive");
    Selection sel;
    const int n = c.n;
    const double b2 = betti2(n);
    for (long k = 1; k <= k_max; ++k) {
        std::vector<long> m;
        double err = 0;
        for (double p : c.periods) {
            double v = k * p;
            double r = std::nearbyint(v);  // default rounding mode: ties to even
            m.push_back(static_cast<long>(r));
            err = std::max(err, std::abs(v - r));
        }
        if (err <= C / std::pow(double(k), 1.0 / b2)) sel.approximants.push_back(assemble_alpha_k(n, k, m, c));
    }
    sel.increase_kmax = sel.approximants.empty();
    return sel;
}

std::optional<IntegralApproximant> non_integrable_approximant(const ClassCoordinates& c, long k,
                                                              double C) {
    const int n = c.n;
    if (n != 2) return std::nullopt;
    const double tol = C / std::pow(double(k), 1.0 / betti2(n));
    std::vector<std::vector<long>> cand;
    for (double p : c.periods) {
        std::vector<long> opts;
        double v = k * p;
        for (long q = static_cast<long>(std::floor(v - tol)); q <= static_cast<long>(std::ceil(v + tol)); ++q)
            if (std::abs(q - v) <= tol) opts.push_back(q);
        if (opts.empty()) return std::nullopt;
        cand.push_back(opts);
    }
    std::optional<IntegralApproximant> best;
    std::vector<std::size_t> idx(cand.size(), 0);
    while (true) {
        std::vector<long> m;
        for (std::size_t i = 0; i < cand.size(); ++i) m.push_back(cand[i][idx[i]]);
        auto ap = assemble_alpha_k(n, k, m, c);
        if (ap.err_02 > 0 && (!best || ap.err_total < best->err_total - 1e-15)) best = ap;
        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] == cand[i].size()) idx[i++] = 0;
        if (i == idx.size()) break;
    }
    return best;
}

BoundReport bound_report(const std::vector<IntegralApproximant>& list, double C) {
    BoundReport r;
    for (const auto& ap : list) {
        double s = std::pow(double(ap.k), 1.0 / betti2(ap.n));
        double rt = ap.err_total * s, r02 = ap.err_02 * s;
        r.max_total_ratio = std::max(r.max_total_ratio, rt);
        r.max_02_ratio = std::max(r.max_02_ratio, r02);
        if ((rt > C || r02 > C) && r.ok) {
            r.ok = false;
            r.offending_k = ap.k;
        }
    }
    return r;
}

BoundReport verify_bounds(const std::vector<IntegralApproximant>& list, double C) {
    if (list.empty()) throw std::invalid_argument("verify_bounds: empty approximant list");
    BoundReport r = bound_report(list, C);
    if (!r.ok) {
        for (const auto& ap : list) {
            if (ap.k == r.offending_k) {
                double s = std::pow(double(ap.k), 1.0 / betti2(ap.n));
                throw BoundViolation(ap.k, std::max(ap.err_total, ap.err_02) * s);
            }
        }
    }
    return r;
}

void write_approximants_csv(std::ostream& os, const std::vector<IntegralApproximant>& list) {
    const int n = list.empty() ? 1 : list.front().n;
    os << "k";
    for (int i = 0; i < betti2(n); ++i) os << ",m" << i + 1;
    os << ",err_total,err_02\n";
    os << std::setprecision(17);
    for (const auto& ap : list) {
        os << ap.k;
        for (long v : ap.m) os << ',' << v;
        os << ',' << ap.err_total << ',' << ap.err_02 << '\n';
    }
}

}  // namespace tlab
