#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "toruslab/peaks.hpp"

namespace tlab {

// Columns are sections of one bundle in the SectionField layout (q = 0).
struct SectionBasis {
    BundlePtr bundle;
    Eigen::MatrixXcd fields;

    int dim() const { return static_cast<int>(fields.cols()); }
    SectionField field(int j) const;
};

SectionBasis basis_of(const HkBasis& hk);
// Modified Gram-Schmidt (two passes) in l2_inner. Throws on an empty or
// rank-deficient input.
SectionBasis orthonormal_basis(const SectionBasis& b);
SectionBasis orthonormal_basis(const HkBasis& hk);
// max |<e_i, e_j> - delta_ij|
double gram_defect(const SectionBasis& b);
// Spectral norm of the difference of the two l2 projectors.
double projector_distance(const SectionBasis& a, const SectionBasis& b);
// fields * U
SectionBasis recombine(const SectionBasis& b, const Eigen::MatrixXcd& U);
SectionBasis gauge_basis(const SectionBasis& b, BundlePtr gauged, const std::vector<double>& chi);
// Haar-distributed unitary from the QR of a complex Gaussian matrix.
Eigen::MatrixXcd random_unitary(int d, std::uint64_t seed);

class JetGenerationFailure : public std::runtime_error {
public:
    explicit JetGenerationFailure(const std::string& what) : std::runtime_error(what) {}
};

// Orthonormal basis adapted to x: f_0(x) != 0; f_l(x) = 0 for l >= 1;
// d f_l/dz_j (x) = 0 for j < l <= n and l > n, while d f_j/dz_j (x) != 0.
// Values and z-derivatives are read in the chart frame of x.
struct TianBasis {
    SectionBasis basis;
    std::size_t center = 0;
    // |f_0(x)| and |d f_j / dz_j (x)|, j = 1..n
    std::vector<double> pivots;
};

TianBasis tian_basis(const SectionBasis& ortho, std::size_t x, double radius = 0.45);

// Homogeneous coordinates (sigma_0(s), ..., sigma_{N_k}(s)) per site.
struct KodairaMap {
    BundlePtr bundle;
    Eigen::MatrixXcd coords;  // sites x (N_k + 1)
    double min_norm = 0;      // min_s |Phi(s)|
    std::size_t min_site = 0;

    bool valid() const { return min_norm > 0; }
};

KodairaMap kodaira_map(const SectionBasis& b);

// Real 2-forms and their type components, one per site.
struct FormField {
    GeometryPtr geom;
    std::vector<TwoForm> F;
};

FormField constant_form(GeometryPtr geom, const TwoForm& F);
FormField operator-(const FormField& a, const FormField& b);

struct BergmanMetricField {
    long k = 0;
    GeometryPtr geom;
    Eigen::VectorXd B;                // sum |sigma_l|^2
    std::vector<Eigen::MatrixXcd> H;  // Hermitian coefficients of T_k
    FormField T;
};

// T_k = alpha + (i/2 pi k) ddbar log B_k with centred differences, i.e.
// H_T = H_alpha + (1/(pi k)) d_j dbar_l log B_k. Throws if the basis is
// empty or B_k vanishes somewhere.
BergmanMetricField bergman_field(const SectionBasis& b, const HermitianForm& alpha, long k);

struct FsPullback {
    long k = 0;
    FormField full;  // (1/k) Phi^* omega_FS
    std::vector<TypeComponents> types;

    FormField part11() const;
    FormField part20_02() const;  // real form of the (2,0) + (0,2) parts
};

// (1/k) Phi^* omega_FS with F_ab = Im Q_ab / (pi k),
// Q_ab = <P D_a f, P D_b f> / |f|^2, P the projection orthogonal to f and
// D_a the covariant centred difference of order 2 or 4.
FsPullback fs_pullback(const KodairaMap& map, long k, int order = 4);

// Same formula with plain centred differences of the chart-frame
// coordinates around x, on chart sites at least `margin` cells inside the
// chart seam. Returns (site, form) pairs.
std::vector<std::pair<std::size_t, TwoForm>> fs_pullback_chart(const KodairaMap& map, long k, std::size_t x,
                                                                int margin, int order = 4);

// C^r norm (r <= 2) of the independent entries F_ab, a < b.
double form_cr_norm(const FormField& f, int r);
// C^r norm of a coefficient-matrix field (all entries).
double coeff_cr_norm(GeometryPtr geom, const std::vector<Eigen::MatrixXcd>& c, int r);

struct DistanceTable {
    long k = 0;
    std::array<double, 3> tk_alpha{};  // ||T_k - alpha||_{C^r}
    std::array<double, 3> fs_tk{};     // ||(1/k)(Phi^* omega_FS)^{1,1} - T_k||_{C^r}
    std::array<double, 3> fs_alpha{};  // ||(1/k)(Phi^* omega_FS)^{1,1} - alpha||_{C^r}
    std::array<double, 3> fs02{};      // ||(0,2) coefficients||_{C^r}
    std::array<double, 3> fs20{};
};

DistanceTable convergence_norms(const BergmanMetricField& bm, const FsPullback& fs, const HermitianForm& alpha);

// Periods of a form field over the coordinate 2-tori through the origin.
std::vector<double> form_periods(const FormField& f);

// Fubini-Study distance arccos(|<u,v>| / |u||v|).
double fs_distance(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v);

struct EmbeddingVerdict {
    int pairs = 0, separated = 0;
    double min_distance = 0;
    int sites = 0, immersive = 0;
    double min_singular_ratio = 0;  // smallest sigma_min/sigma_max of the real differential
    std::vector<std::pair<std::size_t, std::size_t>> unseparated;
    std::vector<std::size_t> non_immersive;

    bool pass() const { return separated == pairs && immersive == sites; }
};

// Separation: FS distance > tol for each pair of distinct sites. Immersion:
// the real differential of Phi (projected tangent vectors P D_a f / |f|) has
// full real rank 2n, i.e. complex rank n, with sigma_min/sigma_max > rank_tol.
EmbeddingVerdict separation_and_immersion(const KodairaMap& map,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                          const std::vector<std::size_t>& sites, double tol = 1e-6,
                                          double rank_tol = 1e-6);

}  // namespace tlab
