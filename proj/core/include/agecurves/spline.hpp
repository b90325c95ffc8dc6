#pragma once

#include <Eigen/Dense>
#include <vector>

namespace agecurves {

/// B-spline design over a fixed age grid plus the difference operator used by
/// the smoothing prior. `raw` keeps the plain basis (rows sum to 1); `B` is the
/// column-centered copy actually used by the model when `centered` is set, so
/// every curve built from it has mean zero across ages.
struct SplineBasis {
    Eigen::VectorXd ages;      // evaluation grid, ascending
    Eigen::VectorXd knots;     // full knot vector, non-decreasing
    int degree = 3;
    int K = 0;                 // number of basis functions
    bool centered = true;

    Eigen::MatrixXd raw;       // A x K, uncentered evaluations
    Eigen::MatrixXd B;         // A x K, centered copy if `centered`, else == raw
    Eigen::RowVectorXd col_means;
    Eigen::MatrixXd D;         // (K-2) x K second-difference operator
};

/// Second-difference matrix with rows (1, -2, 1); annihilates sequences affine
/// in the coefficient index.
Eigen::MatrixXd second_difference_matrix(int K);

/// Omega = D' diag(kappa) D. kappa must have length K-2.
Eigen::MatrixXd penalty_matrix(const Eigen::MatrixXd& D, const Eigen::VectorXd& kappa);

/// Open-uniform construction: boundary knots repeated degree+1 times, so
/// K = #interior + degree + 1. Ages must lie inside [boundary_lo, boundary_hi]
/// and interior knots strictly between the boundaries, ascending.
SplineBasis build_basis(const Eigen::VectorXd& ages,
                        const std::vector<double>& interior_knots,
                        double boundary_lo, double boundary_hi,
                        int degree = 3, bool centered = true);

/// Equally spaced knots extended `degree` steps past each boundary without
/// repetition. Same K bookkeeping; coefficient differences then annihilate
/// functions affine in age, which the open-uniform construction does not.
SplineBasis build_uniform_basis(const Eigen::VectorXd& ages, int n_interior,
                                int degree = 3, bool centered = false);

/// One basis row at an arbitrary point inside the knot domain.
Eigen::RowVectorXd basis_row(const SplineBasis& basis, double x);

} // namespace agecurves
