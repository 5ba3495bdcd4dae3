#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "toruslab/spectral.hpp"

namespace tlab {

// A field on the chart centred at a site, written in the symmetric gauge
// A_b = pi sum_a F_ab xi_a of the chart form F. Values are indexed by site;
// the chart coordinate of a site is its minimal-image displacement, so only
// sites with |xi| < radius are meaningful.
struct ChartField {
    GeometryPtr geom;
    std::size_t center = 0;
    double radius = 0.45;
    std::vector<cplx> values;
};

using MultiIndex = std::array<int, 2>;

struct JetTerm {
    MultiIndex m{0, 0};
    cplx coeff = 1.0;
};

struct JetSpec {
    std::size_t center = 0;
    std::vector<JetTerm> terms;
};

int jet_order(const MultiIndex& m);

// Symmetric-gauge links of the chart form F: theta_b(s) = pi h sum_a F_ab xi_a(s).
// Valid away from the chart seam only; F need not be integral.
BundlePtr chart_bundle(GeometryPtr geom, std::size_t center, const TwoForm& F);

// u^k = exp(-k phi / 2) with phi = pi z* H z. Throws std::invalid_argument
// when the chart radius reaches 1/2.
ChartField gaussian_section(GeometryPtr geom, std::size_t center, double k, const HermitianForm& alpha,
                            double radius = 0.45);
// sum_m c_m z^m u^k; every |m| <= 2.
ChartField jet_section(GeometryPtr geom, const JetSpec& spec, double k, const HermitianForm& alpha,
                       double radius = 0.45);

// ||dbar_{kA} u|| / ||u|| over the chart ball of radius `radius - margin`,
// with the connection of k alpha in symmetric gauge.
double chart_dbar_residual(const ChartField& u, double k, const HermitianForm& alpha, double margin);

// 1 on B(x, r1), 0 outside B(x, r2), quintic smoothstep in between.
std::vector<double> cutoff(const TorusGeometry& g, std::size_t center, double r1, double r2);

// Phase taking the symmetric gauge of F to the staircase gauge at the chart
// centre: chi = -pi sum_{a<b} F_ab xi_a xi_b.
std::vector<double> staircase_phase(const TorusGeometry& g, std::size_t center, const TwoForm& F);

// s = theta * W(x -> .) * exp(i chi) * local. Throws std::invalid_argument
// when theta is nonzero outside the chart.
SectionField globalize(const ChartField& local, const std::vector<double>& theta, BundlePtr bundle);
// Inverse frame change on the whole minimal-image chart (no cut-off).
ChartField to_chart(const SectionField& s, std::size_t center, double radius = 0.45);

// Centred finite-difference d^m / dz^m at the chart origin, |m| <= 2.
cplx chart_derivative(const ChartField& f, const MultiIndex& m);

// Norms restricted to the sites with |xi| <= r around `center`.
double ball_l2_norm(const SectionField& f, std::size_t center, double r);
double ball_c0_norm(const SectionField& f, std::size_t center, double r);
// max over sites of the pointwise norm (2^q sum_J |u_J|^2)^{1/2}
double c0_norm(const SectionField& f);
cplx chart_inner(const ChartField& a, const ChartField& b, double r);

// Constants of the correction and peak estimates. Their values come from
// the calibration header; the estimates only assert existence.
struct PeakConstants {
    double C_delta = 0;  // C in delta_k
    double delta = 1;    // the delta of the chart
    double C_X = 1;      // C(X, omega) in eps_k
    double slack = 1.25;
    double r_ball = 1.0;  // shrinking ball radius r / sqrt(k)
};

// delta_k = 4/(delta0 k) (1 + C/(delta0 delta^2 k^{1+2/b2}))
double delta_k(long k, int n, double delta0, const PeakConstants& pc);
// eps_k = C_X (1/k^{4/b2} + delta_k)
double eps_k(long k, int n, double delta0, const PeakConstants& pc);

struct PeakSection {
    SectionField s, sh, snh;
    std::size_t center = 0;
    long k = 0;
    double snh2 = 0, dbar2 = 0;
    double ratio = 0;          // ||s_nh||^2 / ||dbar_k s||^2
    double bound_leading = 0;  // 4 / (delta0 k)
    double bound = 0;          // delta_k
    bool bound_ok = true;      // ratio <= slack * bound
    double value_at_center = 0;
    double split_residual = 0;       // ||s - s_h - s_nh|| / ||s||
    double image_orthogonality = 0;  // |<dbar s_h, dbar s_nh>| / norms
};

// Splitting through the spectral projector plus all diagnostics. A bound
// violation is recorded in bound_ok, never thrown.
PeakSection correct(const SectionField& s, std::size_t center, const HkBasis& basis, double delta0,
                    const PeakConstants& pc);

struct PeakReport {
    double eps = 0;
    double deviation = 0;  // | |s_h(x)| - 1 |
    bool value_ok = false;
    double norm_sh = 0, lower = 0, upper = 0;
    bool bracket_ok = false;
    double ball_c0 = 0;
    bool ball_ok = false;
    double mass_fraction = 0;  // ||s_h||^2 on B(x, r/sqrt k) over ||s_h||^2
    bool nonvanishing = false;

    bool pass() const { return value_ok && bracket_ok && ball_ok; }
};

PeakReport peak_report(const PeakSection& ps, double delta0, const PeakConstants& pc);

struct PeakParams {
    double r1 = 0.15, r2 = 0.30;
    double radius = 0.45;
};

// Cut-off Gaussian of k alpha at `center`, corrected into H_k.
PeakSection peak_section(const HkBasis& basis, const HermitianForm& alpha, std::size_t center, double delta0,
                         const PeakConstants& pc, const PeakParams& pp = {});

struct JetVerdict {
    cplx corrected = 0, uncorrected = 0;
    double ratio = 0;
    bool pass = false;
    std::string note;
};

// d^m s_h / dz^m (x) for the corrected jet c z^m u^k against the same
// derivative of the uncorrected jet; pass when it keeps half its modulus.
JetVerdict jet_generation_check(const HkBasis& basis, const HermitianForm& alpha, std::size_t center,
                                const MultiIndex& m, cplx coeff, const PeakParams& pp = {});

// FD residual of d f/d zbar_j + (k/2) f d phi/d zbar_j over the chart ball
// of radius `radius - margin`, relative to ||f||.
double antiholo_identity_check(const ChartField& f, const QuadraticPotential& phi, double k, double margin);

struct PeakRow {
    long k = 0;
    std::size_t center = 0;
    double snh2 = 0, dbar2 = 0, ratio = 0, bound = 0, value = 0;
    bool bound_ok = false, value_ok = false;
};

PeakRow peak_row(const PeakSection& ps, const PeakReport& rep);
void write_peak_csv(std::ostream& os, const std::vector<PeakRow>& rows);

}  // namespace tlab
