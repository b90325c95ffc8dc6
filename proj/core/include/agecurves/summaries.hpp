#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agecurves/rng.hpp"
#include "agecurves/state.hpp"

namespace agecurves {

/// Pointwise posterior mean with an equal-tailed credible band.
struct CurveSummary {
    Eigen::VectorXd mean, lo, hi;
    double level = 0.95;
};

/// Summarize rows of per-draw curves (n_draws x A) pointwise. Quantiles use
/// linear interpolation between order statistics.
CurveSummary summarize_curves(const Eigen::MatrixXd& per_draw, double level);

struct PredictiveDraws {
    Eigen::MatrixXd y; // n_draws x A simulated count curves
    CurveSummary summary;
};

/// New-count distribution for one subpopulation: per stored state, fresh
/// observation noise on top of alpha_i + Phi lambda_i + O_i, then a Poisson
/// draw per age.
PredictiveDraws posterior_predictive_y(const PosteriorDraws& draws,
                                       const std::string& subpop, Rng& rng,
                                       double level = 0.95);

struct CompositionDiff {
    CurveSummary diff;
    int used = 0;    // draws entering the summary
    int skipped = 0; // draws dropped because a predictive curve summed to zero
};

/// Difference of normalized predictive age compositions of two subpopulations.
/// With j == k the difference is identically zero by construction. Callers
/// should warn when skipped exceeds 1% of the chain.
CompositionDiff age_composition_diff(const PosteriorDraws& draws,
                                     const std::string& subpop_j,
                                     const std::string& subpop_k, Rng& rng,
                                     double level = 0.95);

struct EffectTable {
    std::vector<std::string> names;
    Eigen::VectorXd mean, lo, hi;
    double level = 0.95;
};

/// Posterior summary of the intercept-regression coefficients, mapped back to
/// the original covariate scale.
EffectTable level_effects(const PosteriorDraws& draws, double level = 0.95);

/// Age profile shift per unit of covariate j on its original scale:
/// sum_q Phi_q beta_{q,j}. Rejects covariates with a quadratic companion.
CurveSummary shape_effect(const PosteriorDraws& draws, int covariate,
                          double level = 0.95);

struct NonlinearEffect {
    Eigen::VectorXd values;           // evaluation points, original scale
    Eigen::MatrixXd surface;          // A x n_values posterior mean
    std::vector<CurveSummary> slices; // one summary per value
};

/// Value-dependent age-profile derivative for a covariate with a registered
/// quadratic companion: sum_q Phi_q (beta_{q,j} + 2 w beta_{q,n}), coefficients
/// on the original scale, w in the covariate's own units.
NonlinearEffect nonlinear_effect(const PosteriorDraws& draws, int covariate,
                                 const Eigen::VectorXd& values,
                                 double level = 0.95);

struct ScenarioResult {
    CurveSummary baseline, counterfactual, difference;
};

/// Counterfactual projection: the baseline keeps the stored alpha_i, lambda_i;
/// the counterfactual redraws them from the hierarchical prior at the supplied
/// covariate row (original scale, intercept and quadratic entries included and
/// checked for consistency). Differences are per-draw, so a self-scenario is
/// centered at zero only in expectation, not pointwise.
ScenarioResult scenario_project(const PosteriorDraws& draws,
                                const std::string& subpop,
                                const Eigen::VectorXd& w_raw, Rng& rng,
                                double level = 0.95);

/// One block of the tidy output table.
struct SummaryBlock {
    std::string quantity; // e.g. "predictive", "shape_effect"
    std::string key;      // subpop id or covariate name
    Eigen::VectorXd x;    // age or evaluation value per row
    CurveSummary s;
};

/// Tidy CSV: quantity,key,age_or_value,mean,lo,hi.
void write_summary_csv(const std::string& path,
                       const std::vector<SummaryBlock>& blocks);

} // namespace agecurves
