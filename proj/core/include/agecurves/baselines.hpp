#pragma once

#include <Eigen/Dense>

#include "agecurves/panel.hpp"
#include "agecurves/spline.hpp"

namespace agecurves {

using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Truncated-SVD fit of the log1p counts: row-demean, keep `rank` components,
/// add the row means back. Missing cells enter as zero counts. Returns the fit
/// on the log1p scale. rank 0 gives the row-mean matrix.
Eigen::MatrixXd svd_reconstruct(const AgeCountPanel& panel, int rank);

/// Penalty-weight grid for GCV search: `n` log-spaced points in [lo, hi].
/// With n == 1 the single value lo is used directly; lo == 0 is then allowed
/// and solved as an unpenalized (minimum-norm) fit.
struct GcvGrid {
    double lo = 1e-4;
    double hi = 1e6;
    int n = 50;
};

struct PsplineFit {
    Eigen::VectorXd fitted;
    Eigen::VectorXd coef;
    double tau = 0.0;
    double gcv = 0.0;
};

/// Gaussian P-spline smoother: coef = (B'B + tau D'D)^{-1} B'y with tau
/// minimizing A*||y - yhat||^2 / (A - tr H)^2 over the grid. Expects a basis
/// whose coefficient differences annihilate affine-in-age functions (the
/// equally spaced construction), so straight lines pass through unchanged.
PsplineFit pspline_smooth_gcv(const Eigen::VectorXd& series,
                              const SplineBasis& basis,
                              const GcvGrid& grid = {});

/// Factor-regression predictor for a held-out curve: SVD of the demeaned
/// (optionally row-smoothed) log1p training matrix, then OLS of loadings and
/// intercepts on the training covariates, then w_new through both regressions.
/// w_new must be on the same scale as W_train.values. Returns a log1p-scale
/// curve. Rank-deficient designs fall back to the minimum-norm solution with a
/// warning on stderr.
Eigen::VectorXd two_stage_predict(const AgeCountPanel& train,
                                  const CovariateMatrix& W_train,
                                  const Eigen::VectorXd& w_new, int rank,
                                  bool smooth_first,
                                  const GcvGrid& grid = {});

enum class InterpMethod { linear, pspline };

/// Fill the unobserved entries of a series sampled at coordinates x. Linear
/// interpolation is in x between bracketing observed points, flat beyond the
/// first/last observed point. The pspline method fits the GCV smoother to the
/// observed points and evaluates it at the gaps; observed entries are returned
/// untouched either way. n_interior < 0 picks a default knot count.
Eigen::VectorXd interpolate_missing(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& series,
                                    const BoolVec& observed, InterpMethod method,
                                    int n_interior = -1,
                                    const GcvGrid& grid = {});

} // namespace agecurves
