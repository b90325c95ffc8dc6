#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agecurves/config.hpp"
#include "agecurves/panel.hpp"
#include "agecurves/state.hpp"

namespace agecurves {

struct ScoreRow {
    std::string model;
    int replicate = 0;
    double rmse = 0.0, mae = 0.0, mape = 0.0, corr = 0.0;
    long long n_cells = 0;
    long long mape_excluded = 0; // zero-truth cells left out of MAPE
    bool failed = false;
    std::string error;
};

struct ScoreReport {
    std::vector<ScoreRow> rows; // one per model x replicate
    std::string scale;          // label only: "signal" or "log1p"
    int replicates = 0;

    /// Per-model averages over the non-failed rows, in first-appearance order;
    /// replicate carries the row count entering the average.
    std::vector<ScoreRow> model_means() const;
};

/// Elementwise metrics between two equal-shaped matrices, optionally
/// restricted by a mask. MAPE skips zero-truth cells (in percent); Pearson
/// correlation of an exactly constant pair is 1 when pred == truth, NaN
/// otherwise. No scale transform is applied here.
ScoreRow score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
               const BoolGrid* mask = nullptr);

/// Posterior mean of alpha_i + sum_q Phi_q lambda_iq per cell.
Eigen::MatrixXd posterior_mean_signal(const PosteriorDraws& draws);

/// Posterior mean of the latent z draws (the imputation surface).
Eigen::MatrixXd posterior_mean_z(const PosteriorDraws& draws);

/// Out-of-sample curve for a covariate row on the model scale: posterior mean
/// of w'delta + sum_q Phi_q w'beta_q.
Eigen::VectorXd posterior_mean_curve_for(const PosteriorDraws& draws,
                                         const Eigen::VectorXd& w_values);

struct ExperimentConfig {
    int replicates = 5;
    int N = 100, A = 60;
    double noise_sigma2 = 1.0;
    std::string variant = "baseline"; // baseline | outlier | sparse
    int n_factors = 5;                // generator truth factors
    std::uint64_t seed = 1;
    ModelConfig model = ModelConfig::desk_defaults();
    int svd_rank = 5;
    double holdout_fraction = 0.2; // out-of-sample experiment only
    int threads = 1;
};

/// Smoothing accuracy: fits "bayes", "svd", and per-curve "pspline" to each
/// generated panel and scores the fitted log-scale surfaces against the true
/// noiseless signal.
ScoreReport run_insample_experiment(const ExperimentConfig& cfg);

/// Imputation accuracy on one dropped cell per curve: "bayes" (posterior mean
/// of the latent cell), "linear", and "pspline" interpolation, scored against
/// the dropped observations on the log1p scale.
ScoreReport run_missing_experiment(const ExperimentConfig& cfg);

/// Covariate-only prediction of held-out subpopulations: "bayes",
/// "bayes_nocov", and the two-stage "svd" / "smooth_svd" regressions, scored
/// against the held-out true signal.
ScoreReport run_oos_experiment(const ExperimentConfig& cfg);

struct CvRow {
    std::string model;
    int Q = 0;
    double rmse = 0.0, mae = 0.0, corr = 0.0;
    int folds_used = 0;
    int folds_failed = 0;
};

/// Leave-one-curve-out CV on a real panel: per fold, refit on N-1 curves
/// (covariates re-standardized on the training rows) and predict the held-out
/// log1p curve. Metrics are averaged fold-wise. models may contain bayes,
/// bayes_nocov, svd, smooth_svd; Q applies to every model (SVD rank = Q).
std::vector<CvRow> loco_cv(const AgeCountPanel& panel, const CovariateMatrix& W,
                           const std::vector<std::string>& models,
                           const std::vector<int>& Q_list, const ModelConfig& base,
                           std::uint64_t seed, int threads = 1);

void write_score_csv(const ScoreReport& report, const std::string& path);
void write_cv_csv(const std::vector<CvRow>& rows, const std::string& path);

} // namespace agecurves
