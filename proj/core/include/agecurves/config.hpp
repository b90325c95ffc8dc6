#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace agecurves {

struct McmcConfig {
    int burnin = 25000;
    int draws = 50000;
    int thin = 5;
};

struct ZUpdateConfig {
    double target_accept = 0.44;
    int batch = 50;                      // sweeps per adaptation batch
    double large_count_threshold = 1e4;  // cells at or above get z = log(y); <= 0 disables
};

// Shape/rate hyperparameters of the inverse-gamma priors.
struct HyperConfig {
    double c0 = 0.001, C0 = 0.001; // sigma2
    double d0 = 0.001, D0 = 0.001; // tau_q
    double s0 = 0.001, S0 = 0.001; // sigma2_alpha
    double l0 = 0.001, L0 = 0.001; // sigma2_lambda_q
};

struct ModelConfig {
    int Q = 6;
    int degree = 3;
    std::vector<double> interior_knots; // empty: equally spaced, see n_interior_default
    double boundary_lo = 0.0, boundary_hi = 0.0; // equal: use the data age range
    int n_interior_default = 7;
    bool center_basis = true;
    bool standardize_covariates = true;

    McmcConfig mcmc;
    ZUpdateConfig z;
    HyperConfig hyper;

    // Prior precision on the first two spline coefficients per factor.
    // 0 keeps them flat (the default); positive values give them a proper
    // N(0, tau_q/f_anchor_prec) prior, used by the simulator cross-checks.
    double f_anchor_prec = 0.0;

    bool check_identification = false; // verify fit preservation at every rotation

    std::uint64_t seed = 1;

    /// Case-study shape: ages 0..95, interior knots every 5 years from 5 to 65,
    /// Q = 6, chain 25000/50000/5.
    static ModelConfig case_study_defaults();

    /// Small-problem chain lengths (burnin 2000, draws 2000, thin 2).
    static ModelConfig desk_defaults();
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);
ModelConfig load_config_file(const std::string& path);

} // namespace agecurves
