#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "toruslab/geometry.hpp"

namespace tlab {

// Constant real 2-form alpha = 1/2 sum F_ab dx_a ^ dx_b, coordinates
// ordered (x1, y1, x2, y2). F is antisymmetric.
using TwoForm = Eigen::MatrixXd;

inline int betti2(int n) { return n == 1 ? 1 : 6; }

// Integral 2-cycle basis: the coordinate 2-tori (a, b), a < b, in
// lexicographic order: n = 1 -> (x1y1); n = 2 -> (x1y1, x1x2, x1y2, y1x2,
// y1y2, x2y2).
std::vector<std::pair<int, int>> coordinate_faces(int n);

struct ClassCoordinates {
    int n = 1;
    std::vector<double> periods;
};

ClassCoordinates period_coordinates(const TwoForm& F);
TwoForm form_from_periods(int n, const std::vector<double>& periods);
TwoForm two_form(const HermitianForm& alpha);

// Pure-type parts: c20(j,l) = F(d_j, d_l), c11(j,l) = F(d_j, dbar_l),
// c02(j,l) = F(dbar_j, dbar_l), where d_j = (e_x - i e_y)/2 and
// dbar_j = (e_x + i e_y)/2. Then
//   alpha = sum_{jl} [ c20/2 dz_j^dz_l + c11 dz_j^dzbar_l + c02/2 dzbar_j^dzbar_l ].
struct TypeComponents {
    Eigen::MatrixXcd c20, c11, c02;
};

TypeComponents type_components(const TwoForm& F);
TwoForm recombine(const TypeComponents& t);
// Hermitian coefficient matrix of the (1,1) part: c11 = (i/2) H.
Eigen::MatrixXcd hermitian_part(const TypeComponents& t);

struct IntegralApproximant {
    int n = 1;
    long k = 0;
    std::vector<long> m;  // integer periods
    TwoForm F;            // the constant representative alpha_k
    TypeComponents comp;
    double err_total = 0;  // sup |m - k c|
    double err_02 = 0;     // sup |alpha_k^{0,2} coefficients|

    bool is_11() const { return err_02 == 0.0; }
};

IntegralApproximant assemble_alpha_k(int n, long k, const std::vector<long>& m,
                                     const ClassCoordinates& target);

struct Selection {
    std::vector<IntegralApproximant> approximants;
    bool increase_kmax = false;  // structured "nothing found" outcome
};

// All k <= k_max whose nearest lattice point m = round(k c) (ties to even)
// satisfies |k c - m|_inf <= C / k^{1/b2}.
Selection dirichlet_select(const ClassCoordinates& c, long k_max, double C);

// Nearest-rounding always yields a (1,1) approximant when c is the period
// vector of a (1,1) form. This scans the whole Dirichlet box at level k for
// the lattice point of smallest error whose (0,2) part is nonzero.
std::optional<IntegralApproximant> non_integrable_approximant(const ClassCoordinates& c, long k,
                                                              double C);

struct BoundReport {
    bool ok = true;
    double max_total_ratio = 0;
    double max_02_ratio = 0;
    long offending_k = -1;
};

class BoundViolation : public std::runtime_error {
public:
    BoundViolation(long k, double ratio)
        : std::runtime_error("approximation bound violated at k = " + std::to_string(k) +
                             " (ratio " + std::to_string(ratio) + ")"),
          k_(k), ratio_(ratio) {}
    long k() const { return k_; }
    double ratio() const { return ratio_; }

private:
    long k_;
    double ratio_;
};

BoundReport bound_report(const std::vector<IntegralApproximant>& list, double C);
// Throws BoundViolation on the first k whose ratio exceeds C.
BoundReport verify_bounds(const std::vector<IntegralApproximant>& list, double C);

void write_approximants_csv(std::ostream& os, const std::vector<IntegralApproximant>& list);

}  // namespace tlab
