#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agecurves/panel.hpp"

namespace agecurves {

struct SyntheticParams {
    Eigen::MatrixXd phi;    // A x Q, orthonormal zero-mean columns
    Eigen::MatrixXd lambda; // N x Q
    Eigen::VectorXd alpha;  // N
    Eigen::MatrixXd beta;   // R x Q loadings-regression truth
    Eigen::VectorXd delta;  // R intercept-regression truth
    double sigma2 = 0.0;    // observation noise variance used for the draw
    std::vector<int> outlier_rows;
    double outlier_jump = 0.0;
};

/// A generated dataset with its generating parameters kept for scoring.
/// `signal` is the noiseless systematic part alpha_i + sum_q Phi_q lambda_iq;
/// counts were drawn Poisson(exp(signal + noise)). `counts_full` keeps every
/// cell even after masking; `held_out` marks cells hidden from training.
struct SyntheticTruth {
    AgeCountPanel panel;
    CovariateMatrix W;
    Eigen::MatrixXd signal;
    SyntheticParams params;
    Eigen::MatrixXd counts_full;
    BoolGrid held_out;
};

/// Latent-factor generator: 10 standard-normal covariates, all loadings
/// regression coefficients standard normal, intercept regression likewise
/// except its intercept (15 here), three covariate entries of delta and three
/// of beta zeroed, loading variances 1, intercept variance 0.5. Factors come
/// from fixed smooth shapes (or the leading log1p SVD components of
/// source_panel when given), projected through a cubic basis with 7 equally
/// spaced interior knots, centered, and orthonormalized. n_factors <= 5.
SyntheticTruth generate_baseline(std::uint64_t seed, int N, int A,
                                 double noise_sigma2,
                                 const AgeCountPanel* source_panel = nullptr,
                                 int n_factors = 5);

/// Same generator with the regression intercept at -1.5, flooding the panel
/// with zero counts.
SyntheticTruth generate_sparse_variant(std::uint64_t seed, int N, int A,
                                       double noise_sigma2,
                                       const AgeCountPanel* source_panel = nullptr,
                                       int n_factors = 5);

/// Adds a +1.0 log-scale jump at ages 18-20 to 5% of rows (at least one) and
/// redraws their counts; untouched rows stay bitwise identical.
SyntheticTruth generate_outlier_variant(const SyntheticTruth& base, std::uint64_t seed);

/// Masks exactly one observed cell per row, recording it in held_out. Counts
/// stay available in counts_full for scoring.
SyntheticTruth drop_one_per_curve(const SyntheticTruth& truth, std::uint64_t seed);

/// Writes counts.csv, covariates.csv, and truth.json into dir.
void write_truth(const SyntheticTruth& truth, const std::string& dir);

} // namespace agecurves
