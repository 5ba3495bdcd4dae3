#include "toruslab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tlab {

Coord TorusGeometry::coords(std::size_t s) const {
    Coord c{0, 0, 0, 0};
    for (int a = 0; a < d; ++a) {
        c[a] = static_cast<int>((s / stride[a]) % N);
    }
    return c;
}

std::size_t TorusGeometry::index(const Coord& c) const {
    std::size_t s = 0;
    for (int a = 0; a < d; ++a) {
        int v = ((c[a] % N) + N) % N;
        s += static_cast<std::size_t>(v) * stride[a];
    }
    return s;
}

Coord TorusGeometry::displacement(std::size_t center, std::size_t s) const {
    Coord a0 = coords(center), a1 = coords(s), out{0, 0, 0, 0};
    for (int a = 0; a < d; ++a) {
        int v = ((a1[a] - a0[a]) % N + N) % N;
        if (v >= N / 2) v -= N;
        out[a] = v;
    }
    return out;
}

Point TorusGeometry::chart_point(std::size_t center, std::size_t s) const {
    Coord dc = displacement(center, s);
    Point p{0, 0, 0, 0};
    for (int a = 0; a < d; ++a) p[a] = h * dc[a];
    return p;
}

double TorusGeometry::volume_weight() const { return std::pow(h, d); }

GeometryPtr build_geometry(int n, int N) {
    if (n != 1 && n != 2) throw std::invalid_argument("n must be 1 or 2");
    if (N % 2 != 0) throw std::invalid_argument("N must be even");
    if (N < 8) throw std::invalid_argument("N must be at least 8");
    auto g = std::make_shared<TorusGeometry>();
    g->n = n;
    g->N = N;
    g->d = 2 * n;
    g->h = 1.0 / N;
    g->sites = 1;
    for (int a = 0; a < g->d; ++a) g->sites *= static_cast<std::size_t>(N);
    std::size_t st = 1;
    for (int a = g->d - 1; a >= 0; --a) {
        g->stride[a] = st;
        st *= static_cast<std::size_t>(N);
    }
    for (int a = 0; a < g->d; ++a) {
        g->fwd[a].resize(g->sites);
        g->bwd[a].resize(g->sites);
        for (std::size_t s = 0; s < g->sites; ++s) {
            Coord c = g->coords(s);
            Coord cp = c, cm = c;
            cp[a] += 1;
            cm[a] -= 1;
            g->fwd[a][s] = static_cast<std::uint32_t>(g->index(cp));
            g->bwd[a][s] = static_cast<std::uint32_t>(g->index(cm));
        }
    }
    return g;
}

HermitianForm HermitianForm::identity(int n) {
    return HermitianForm{Eigen::MatrixXcd::Identity(n, n)};
}

HermitianForm HermitianForm::scalar(int n, double c) {
    return HermitianForm{c * Eigen::MatrixXcd::Identity(n, n)};
}

HermitianForm HermitianForm::default_class(int n) {
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    if (n == 1) return scalar(1, golden);
    Eigen::MatrixXcd H(2, 2);
    const double off = (std::sqrt(3.0) - 1.0) / 4.0;
    H << golden, off, off, std::sqrt(2.0) - 1.0;
    return HermitianForm{H};
}

bool is_hermitian(const Eigen::MatrixXcd& H, double tol) {
    if (H.rows() != H.cols()) return false;
    return (H - H.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, H.cwiseAbs().maxCoeff());
}

std::vector<double> alpha_eigenvalues(const HermitianForm& alpha, const HermitianForm& omega) {
    if (!is_hermitian(alpha.H) || !is_hermitian(omega.H))
        throw std::invalid_argument("alpha_eigenvalues: non-Hermitian input");
    if (alpha.H.rows() != omega.H.rows())
        throw std::invalid_argument("alpha_eigenvalues: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> wsolve(omega.H);
    if (wsolve.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("alpha_eigenvalues: omega not positive definite");
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(alpha.H, omega.H,
                                                                  Eigen::EigenvaluesOnly);
    std::vector<double> out(es.eigenvalues().data(),
                            es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end());
    return out;
}

double delta0(const HermitianForm& alpha, const HermitianForm& omega) {
    return alpha_eigenvalues(alpha, omega).front() / 2.0;
}

std::array<cplx, 2> complex_coords(const Point& xi, int n) {
    std::array<cplx, 2> z{cplx(xi[0], xi[1]), cplx(0, 0)};
    if (n == 2) z[1] = cplx(xi[2], xi[3]);
    return z;
}

double QuadraticPotential::value(const Point& xi) const {
    const int n = static_cast<int>(hessian.rows());
    auto z = complex_coords(xi, n);
    cplx acc = 0;
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) acc += hessian(j, l) * z[j] * std::conj(z[l]);
    return std::numbers::pi * acc.real();
}

cplx QuadraticPotential::dbar(const Point& xi, int j) const {
    // d/dzbar_j of pi sum H_{ab} z_a zbar_b = pi sum_a H_{aj} z_a
    const int n = static_cast<int>(hessian.rows());
    auto z = complex_coords(xi, n);
    cplx acc = 0;
    for (int a = 0; a < n; ++a) acc += hessian(a, j) * z[a];
    return std::numbers::pi * acc;
}

cplx QuadraticPotential::del(const Point& xi, int j) const {
    const int n = static_cast<int>(hessian.rows());
    auto z = complex_coords(xi, n);
    cplx acc = 0;
    for (int b = 0; b < n; ++b) acc += hessian(j, b) * std::conj(z[b]);
    return std::numbers::pi * acc;
}

QuadraticPotential local_potential(const HermitianForm& alpha, std::size_t center, double radius) {
    return QuadraticPotential{center, alpha.H, radius};
}

Eigen::MatrixXcd potential_form_fd(const QuadraticPotential& phi, double hs) {
    const int n = static_cast<int>(phi.hessian.rows());
    auto f = [&](int a, int sa, int b, int sb) {
        Point p{0, 0, 0, 0};
        p[a] += sa * hs;
        p[b] += sb * hs;
        return phi.value(p);
    };
    // Real Hessian by centred differences.
    Eigen::MatrixXd R(2 * n, 2 * n);
    for (int a = 0; a < 2 * n; ++a) {
        for (int b = 0; b < 2 * n; ++b) {
            if (a == b) {
                Point p{0, 0, 0, 0};
                double f0 = phi.value(p);
                R(a, a) = (f(a, 1, a, 0) - 2 * f0 + f(a, -1, a, 0)) / (hs * hs);
            } else {
                R(a, b) = (f(a, 1, b, 1) - f(a, 1, b, -1) - f(a, -1, b, 1) + f(a, -1, b, -1)) /
                          (4 * hs * hs);
            }
        }
    }
    // d_j dbar_l = 1/4 (dx_j - i dy_j)(dx_l + i dy_l)
    Eigen::MatrixXcd out(n, n);
    const cplx I(0, 1);
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            int xj = 2 * j, yj = 2 * j + 1, xl = 2 * l, yl = 2 * l + 1;
            cplx v = 0.25 * (R(xj, xl) + I * R(xj, yl) - I * R(yj, xl) + R(yj, yl));
            out(j, l) = v / std::numbers::pi;
        }
    }
    return out;
}

namespace {

double field_cr(const TorusGeometry& g, std::span<const cplx> f, int r) {
    double best = 0;
    const double h = g.h;
    for (std::size_t s = 0; s < g.sites; ++s) best = std::max(best, std::abs(f[s]));
    if (r >= 1) {
        for (int a = 0; a < g.d; ++a)
            for (std::size_t s = 0; s < g.sites; ++s)
                best = std::max(best, std::abs(f[g.fwd[a][s]] - f[g.bwd[a][s]]) / (2 * h));
    }
    if (r >= 2) {
        for (int a = 0; a < g.d; ++a) {
            for (int b = a; b < g.d; ++b) {
                for (std::size_t s = 0; s < g.sites; ++s) {
                    cplx v;
                    if (a == b) {
                        v = (f[g.fwd[a][s]] - 2.0 * f[s] + f[g.bwd[a][s]]) / (h * h);
                    } else {
                        v = (f[g.fwd[b][g.fwd[a][s]]] - f[g.bwd[b][g.fwd[a][s]]] -
                             f[g.fwd[b][g.bwd[a][s]]] + f[g.bwd[b][g.bwd[a][s]]]) /
                            (4 * h * h);
                    }
                    best = std::max(best, std::abs(v));
                }
            }
        }
    }
    return best;
}

}  // namespace

double cr_norm(const TorusGeometry& g, std::span<const cplx> f, int r) {
    if (r < 0 || r > 2) throw std::invalid_argument("cr_norm: r must be 0, 1 or 2");
    if (f.size() != g.sites) throw std::invalid_argument("cr_norm: size mismatch");
    return field_cr(g, f, r);
}

double cr_norm(const GridField& f, int r) {
    if (r < 0 || r > 2) throw std::invalid_argument("cr_norm: r must be 0, 1 or 2");
    double best = 0;
    for (const auto& c : f.comps) best = std::max(best, cr_norm(*f.geom, c, r));
    return best;
}

}  // namespace tlab
