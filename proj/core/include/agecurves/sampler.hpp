#pragma once

#include <Eigen/Dense>
#include <functional>

#include "agecurves/config.hpp"
#include "agecurves/panel.hpp"
#include "agecurves/rng.hpp"
#include "agecurves/spline.hpp"
#include "agecurves/state.hpp"

namespace agecurves {

/// Fixed inputs plus mutable MH bookkeeping for one chain. Counts are held as
/// doubles so the update kernels also serve simulator cross-checks with
/// extreme magnitudes.
struct SamplerWorkspace {
    Eigen::MatrixXd y;       // N x A
    BoolGrid observed;       // N x A
    Eigen::MatrixXd offsets; // N x A
    Eigen::MatrixXd W;       // N x R design values
    const SplineBasis* basis = nullptr;
    HyperConfig hyper;
    ZUpdateConfig zcfg;
    double f_anchor_prec = 0.0;
    bool check_identification = false;

    // adaptive MH state
    Eigen::MatrixXd log_step;   // N x A
    Eigen::MatrixXd batch_acc;  // acceptances in the current batch
    Eigen::MatrixXd total_acc;  // post-burn-in acceptances
    long long total_sweeps = 0; // post-burn-in sweeps counted into total_acc
    int sweep_in_batch = 0;
    long long batch_index = 0;
    bool adapt = true;

    // precomputed pieces
    Eigen::MatrixXd BtB;                  // K x K
    Eigen::MatrixXd T;                    // K x (K-1) orthonormal complement of ones
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> B_cod;

    int N() const { return static_cast<int>(y.rows()); }
    int A() const { return static_cast<int>(y.cols()); }
};

SamplerWorkspace make_workspace(const AgeCountPanel& panel, const CovariateMatrix& W,
                                const SplineBasis& basis, const ModelConfig& cfg);

/// Warm start: z = log(y + 0.5), alpha = row means, factors from a ridge fit to
/// the leading singular vectors of the demeaned z, loadings by projection,
/// variances and auxiliaries at 1.
ModelState init_state(const SamplerWorkspace& ws, int Q);

/// One-at-a-time random-walk MH on each observed cell; unobserved cells are
/// refreshed from the Gaussian prior; cells at or above the large-count
/// threshold are pinned at log(y).
void update_latent_z(ModelState& st, SamplerWorkspace& ws, Rng& rng);

void update_sigma2(ModelState& st, const SamplerWorkspace& ws, Rng& rng);
void update_alpha(ModelState& st, const SamplerWorkspace& ws, Rng& rng);

/// Conditional mean/precision of f_q given the rest. When the basis is
/// centered and the anchor precision is zero the precision is singular along
/// the constant coefficient direction, so the draw lives in its orthogonal
/// complement; `mean` is then the minimum-norm representative.
struct FactorConditional {
    Eigen::VectorXd mean;      // K
    Eigen::MatrixXd precision; // K x K, possibly singular along ones
    Eigen::VectorXd linear;    // K, precision * mean
};
FactorConditional factor_conditional(const ModelState& st, const SamplerWorkspace& ws, int q);

void update_spline_factor(ModelState& st, SamplerWorkspace& ws, int q, Rng& rng);

/// Thin-QR rotation of (f, lambda, phi): phi gets orthonormal columns with a
/// positive largest-magnitude entry, lambda absorbs the scale, f is re-solved
/// by least squares. The fitted surface phi * lambda' is unchanged.
void apply_identification(ModelState& st, const SamplerWorkspace& ws);

/// Blocked loadings update per factor: beta_q from the gamma-marginalized
/// projected model, then gamma given the fresh beta_q, then lambda = W beta + gamma.
void update_loadings(ModelState& st, const SamplerWorkspace& ws, Rng& rng);

void update_tau(ModelState& st, const SamplerWorkspace& ws, Rng& rng);
void update_kappa(ModelState& st, const SamplerWorkspace& ws, Rng& rng);
void update_delta(ModelState& st, const SamplerWorkspace& ws, Rng& rng);
void update_hier_variances(ModelState& st, const SamplerWorkspace& ws, Rng& rng);

/// One Makalic-Schmidt block refresh for a coefficient column.
void update_horseshoe_column(const Eigen::VectorXd& coef, Eigen::Ref<Eigen::VectorXd> rho,
                             Eigen::Ref<Eigen::VectorXd> nu, double& xi, double& zeta,
                             Rng& rng);
void update_horseshoe(ModelState& st, Rng& rng);

/// Full sweep in fixed order: z, sigma2, alpha, per-factor f draw + rotation,
/// loadings block, tau, kappa, delta, hierarchical variances, horseshoe.
void gibbs_sweep(ModelState& st, SamplerWorkspace& ws, Rng& rng);

using ProgressFn = std::function<void(int sweep, int total)>;

/// Runs burn-in plus draws sweeps, storing every thin-th post-burn-in state.
/// Adaptation freezes when burn-in ends. Deterministic given cfg.seed.
PosteriorDraws run_mcmc(const AgeCountPanel& panel, const CovariateMatrix& W,
                        const ModelConfig& cfg, const ProgressFn& progress = nullptr);

} // namespace agecurves
