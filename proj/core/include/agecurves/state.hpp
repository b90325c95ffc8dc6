#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "agecurves/config.hpp"
#include "agecurves/panel.hpp"
#include "agecurves/spline.hpp"

namespace agecurves {

/// Auxiliary variables of one horseshoe block (Makalic-Schmidt scheme).
/// For the loadings regressions rho/nu are R x Q and xi/zeta length Q;
/// the intercept regression uses a single column.
struct HorseshoeState {
    Eigen::MatrixXd rho, nu;
    Eigen::VectorXd xi, zeta;

    static HorseshoeState ones(int R, int Q) {
        HorseshoeState h;
        h.rho = Eigen::MatrixXd::Ones(R, Q);
        h.nu = Eigen::MatrixXd::Ones(R, Q);
        h.xi = Eigen::VectorXd::Ones(Q);
        h.zeta = Eigen::VectorXd::Ones(Q);
        return h;
    }
};

struct ModelState {
    Eigen::MatrixXd z;      // N x A latent log intensities
    Eigen::VectorXd alpha;  // N
    Eigen::MatrixXd f;      // K x Q spline coefficients
    Eigen::MatrixXd phi;    // A x Q latent curves, orthonormal zero-mean columns
    Eigen::MatrixXd lambda; // N x Q loadings
    Eigen::MatrixXd gamma;  // N x Q loading residuals, lambda = W beta + gamma
    Eigen::MatrixXd beta;   // R x Q
    Eigen::VectorXd delta;  // R
    double sigma2 = 1.0;
    double sigma2_alpha = 1.0;
    Eigen::VectorXd sigma2_lambda; // Q
    Eigen::VectorXd tau;           // Q
    Eigen::MatrixXd kappa;         // (K-2) x Q
    HorseshoeState hs_beta;        // R x Q blocks
    HorseshoeState hs_delta;       // R x 1 blocks
};

struct SamplerDiagnostics {
    Eigen::MatrixXd accept_rate; // N x A post-burn-in MH acceptance (NaN where not MH-updated)
    Eigen::MatrixXd log_step;    // N x A final proposal log step sizes
    double mean_accept = 0.0;
    long long sweeps = 0;
};

/// Post-thinning chain output plus everything downstream consumers need to
/// interpret it (design, basis, grid). Written to disk by the checkpoint module.
struct PosteriorDraws {
    std::vector<ModelState> states;
    ModelConfig config;
    std::vector<std::string> subpop_ids;
    Eigen::VectorXd ages;
    Eigen::MatrixXd offsets;
    CovariateMatrix W;
    SplineBasis basis;
    SamplerDiagnostics diag;
    std::string rng_state_final;

    int n_draws() const { return static_cast<int>(states.size()); }
};

} // namespace agecurves
