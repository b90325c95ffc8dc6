#include "agecurves/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agecurves {

namespace {

// Draw from N(P^{-1} b, P^{-1}) given a positive definite precision P.
// Falls back once to a 1e-8 diagonal jitter if the factorization fails.
Eigen::VectorXd mvn_from_precision(Eigen::MatrixXd P, const Eigen::VectorXd& b, Rng& rng,
                                   Eigen::VectorXd* mean_out = nullptr) {
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) {
        P.diagonal().array() += 1e-8;
        llt.compute(P);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("sampler: precision factorization failed");
    }
    Eigen::VectorXd mean = llt.solve(b);
    Eigen::VectorXd eta(b.size());
    for (int i = 0; i < eta.size(); ++i) eta[i] = rng.normal();
    Eigen::VectorXd draw = mean + llt.matrixU().solve(eta);
    if (mean_out) *mean_out = mean;
    return draw;
}

// Orthonormal basis of the complement of the ones direction (Householder).
Eigen::MatrixXd ones_complement(int K) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(K, 1.0 / std::sqrt(double(K)));
    v[0] -= 1.0;
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(K, K) - (2.0 / v.squaredNorm()) * v * v.transpose();
    return H.rightCols(K - 1);
}

Eigen::MatrixXd penalty_for_factor(const ModelState& st, const SamplerWorkspace& ws, int q) {
    Eigen::MatrixXd Omega = penalty_matrix(ws.basis->D, st.kappa.col(q));
    if (ws.f_anchor_prec > 0.0) {
        Omega(0, 0) += ws.f_anchor_prec;
        Omega(1, 1) += ws.f_anchor_prec;
    }
    return Omega;
}

} // namespace

SamplerWorkspace make_workspace(const AgeCountPanel& panel, const CovariateMatrix& W,
                                const SplineBasis& basis, const ModelConfig& cfg) {
    if (panel.N() == 0 || panel.A() == 0)
        throw std::invalid_argument("sampler: empty panel");
    if (W.values.rows() != panel.N())
        throw std::invalid_argument("sampler: covariate rows do not match panel subpopulations");
    if (cfg.Q < 1) throw std::invalid_argument("sampler: Q must be at least 1");
    int basis_rank = basis.centered ? basis.K - 1 : basis.K;
    if (cfg.Q > std::min(basis_rank, panel.A() - 1))
        throw std::invalid_argument("sampler: Q exceeds the rank the basis can support");
    if (cfg.mcmc.burnin < 0 || cfg.mcmc.draws < 1 || cfg.mcmc.thin < 1)
        throw std::invalid_argument("sampler: invalid chain lengths");

    SamplerWorkspace ws;
    ws.y = panel.counts;
    ws.observed = panel.observed;
    ws.offsets = panel.offsets;
    ws.W = W.values;
    ws.basis = &basis;
    ws.hyper = cfg.hyper;
    ws.zcfg = cfg.z;
    ws.f_anchor_prec = cfg.f_anchor_prec;
    ws.check_identification = cfg.check_identification;

    const int N = panel.N(), A = panel.A();
    ws.log_step.resize(N, A);
    for (int i = 0; i < N; ++i)
        for (int x = 0; x < A; ++x) {
            double yv = ws.observed(i, x) ? ws.y(i, x) : 0.0;
            ws.log_step(i, x) = std::log(2.4 / std::sqrt(std::max(yv, 1.0) + 1.0));
        }
    ws.batch_acc = Eigen::MatrixXd::Zero(N, A);
    ws.total_acc = Eigen::MatrixXd::Zero(N, A);

    ws.BtB = basis.B.transpose() * basis.B;
    if (basis.centered) ws.T = ones_complement(basis.K);
    ws.B_cod.compute(basis.B);
    return ws;
}

ModelState init_state(const SamplerWorkspace& ws, int Q) {
    const int N = ws.N(), A = ws.A(), K = ws.basis->K;
    const int R = static_cast<int>(ws.W.cols());

    ModelState st;
    st.z.resize(N, A);
    for (int i = 0; i < N; ++i) {
        double sum = 0.0;
        int n_obs = 0;
        for (int x = 0; x < A; ++x)
            if (ws.observed(i, x)) {
                st.z(i, x) = std::log(ws.y(i, x) + 0.5);
                sum += st.z(i, x);
                ++n_obs;
            }
        double fill = n_obs > 0 ? sum / n_obs : 0.0;
        for (int x = 0; x < A; ++x)
            if (!ws.observed(i, x)) st.z(i, x) = fill;
    }

    Eigen::MatrixXd zc = st.z - ws.offsets;
    st.alpha = zc.rowwise().mean();
    zc.colwise() -= st.alpha;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(zc, Eigen::ComputeThinV);
    Eigen::MatrixXd ridge = ws.BtB + 1e-6 * Eigen::MatrixXd::Identity(K, K);
    Eigen::LDLT<Eigen::MatrixXd> ridge_ldlt(ridge);
    st.f.resize(K, Q);
    int n_sv = static_cast<int>(svd.matrixV().cols());
    for (int q = 0; q < Q; ++q) {
        if (q < n_sv && svd.singularValues()[q] > 1e-12) {
            st.f.col(q) = ridge_ldlt.solve(ws.basis->B.transpose() * svd.matrixV().col(q));
        } else {
            for (int k = 0; k < K; ++k) st.f(k, q) = 0.01 * ((k + q) % 3 - 1.0);
        }
    }

    st.lambda = Eigen::MatrixXd::Zero(N, Q);
    st.beta = Eigen::MatrixXd::Zero(R, Q);
    st.delta = Eigen::VectorXd::Zero(R);
    st.phi = Eigen::MatrixXd::Zero(A, Q);
    st.gamma = Eigen::MatrixXd::Zero(N, Q);
    st.sigma2 = 1.0;
    st.sigma2_alpha = 1.0;
    st.sigma2_lambda = Eigen::VectorXd::Ones(Q);
    st.tau = Eigen::VectorXd::Ones(Q);
    st.kappa = Eigen::MatrixXd::Ones(K - 2, Q);
    st.hs_beta = HorseshoeState::ones(R, Q);
    st.hs_delta = HorseshoeState::ones(R, 1);

    apply_identification(st, ws);
    st.lambda = zc * st.phi;
    st.gamma = st.lambda;
    return st;
}

void update_latent_z(ModelState& st, SamplerWorkspace& ws, Rng& rng) {
    const int N = ws.N(), A = ws.A();
    const double sd_prior = std::sqrt(st.sigma2);
    const double thr = ws.zcfg.large_count_threshold;
    Eigen::MatrixXd mean = st.lambda * st.phi.transpose() + ws.offsets;
    mean.colwise() += st.alpha;

    for (int i = 0; i < N; ++i) {
        for (int x = 0; x < A; ++x) {
            const double m = mean(i, x);
            if (!ws.observed(i, x)) {
                st.z(i, x) = m + sd_prior * rng.normal();
                continue;
            }
            const double yv = ws.y(i, x);
            if (thr > 0.0 && yv >= thr) {
                st.z(i, x) = std::log(yv);
                continue;
            }
            const double z0 = st.z(i, x);
            const double zp = z0 + std::exp(ws.log_step(i, x)) * rng.normal();
            const double ez0 = std::exp(z0);
            const double ezp = std::exp(zp);
            double dlog = yv * (zp - z0) - (ezp - ez0)
                          - ((zp - m) * (zp - m) - (z0 - m) * (z0 - m)) / (2.0 * st.sigma2);
            bool accept = std::isfinite(dlog) && (dlog >= 0.0 || std::log(rng.uniform()) < dlog);
            if (accept) {
                st.z(i, x) = zp;
                ws.batch_acc(i, x) += 1.0;
                if (!ws.adapt) ws.total_acc(i, x) += 1.0;
            }
        }
    }

    if (!ws.adapt) {
        ++ws.total_sweeps;
        return;
    }
    if (++ws.sweep_in_batch >= ws.zcfg.batch) {
        ++ws.batch_index;
        const double delta = std::min(0.01, 1.0 / std::sqrt(double(ws.batch_index)));
        for (int i = 0; i < N; ++i)
            for (int x = 0; x < A; ++x) {
                if (!ws.observed(i, x)) continue;
                if (thr > 0.0 && ws.y(i, x) >= thr) continue;
                double rate = ws.batch_acc(i, x) / ws.zcfg.batch;
                ws.log_step(i, x) += rate > ws.zcfg.target_accept ? delta : -delta;
            }
        ws.batch_acc.setZero();
        ws.sweep_in_batch = 0;
    }
}

void update_sigma2(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    Eigen::MatrixXd resid = st.z - st.lambda * st.phi.transpose() - ws.offsets;
    resid.colwise() -= st.alpha;
    const double shape = ws.hyper.c0 + 0.5 * ws.N() * ws.A();
    const double rate = ws.hyper.C0 + 0.5 * resid.squaredNorm();
    st.sigma2 = rng.inv_gamma(shape, rate);
}

void update_alpha(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    const int A = ws.A();
    const double prec = 1.0 / st.sigma2_alpha + A / st.sigma2;
    const double var = 1.0 / prec;
    const double sd = std::sqrt(var);
    Eigen::VectorXd prior_mean = ws.W * st.delta;
    Eigen::MatrixXd partial = st.z - st.lambda * st.phi.transpose() - ws.offsets;
    Eigen::VectorXd rowsum = partial.rowwise().sum();
    for (int i = 0; i < ws.N(); ++i) {
        double m = var * (prior_mean[i] / st.sigma2_alpha + rowsum[i] / st.sigma2);
        st.alpha[i] = m + sd * rng.normal();
    }
}

FactorConditional factor_conditional(const ModelState& st, const SamplerWorkspace& ws, int q) {
    const Eigen::MatrixXd& B = ws.basis->B;
    Eigen::MatrixXd Omega = penalty_for_factor(st, ws, q);
    const double lam2 = st.lambda.col(q).squaredNorm();

    FactorConditional out;
    out.precision = Omega / st.tau[q] + (lam2 / st.sigma2) * ws.BtB;

    Eigen::MatrixXd resid = st.z - st.lambda * st.phi.transpose() - ws.offsets;
    resid.colwise() -= st.alpha;
    // working outcome for factor q adds its own term back
    Eigen::VectorXd v = resid.transpose() * st.lambda.col(q) + st.phi.col(q) * lam2;
    out.linear = B.transpose() * v / st.sigma2;

    const bool project = ws.basis->centered && ws.f_anchor_prec <= 0.0;
    if (project) {
        Eigen::MatrixXd Pt = ws.T.transpose() * out.precision * ws.T;
        Eigen::LLT<Eigen::MatrixXd> llt(Pt);
        if (llt.info() != Eigen::Success) {
            Pt.diagonal().array() += 1e-8;
            llt.compute(Pt);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("sampler: factor precision factorization failed");
        }
        out.mean = ws.T * llt.solve(ws.T.transpose() * out.linear);
    } else {
        Eigen::LLT<Eigen::MatrixXd> llt(out.precision);
        if (llt.info() != Eigen::Success) {
            Eigen::MatrixXd Pj = out.precision;
            Pj.diagonal().array() += 1e-8;
            llt.compute(Pj);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("sampler: factor precision factorization failed");
        }
        out.mean = llt.solve(out.linear);
    }
    return out;
}

void update_spline_factor(ModelState& st, SamplerWorkspace& ws, int q, Rng& rng) {
    FactorConditional fc = factor_conditional(st, ws, q);
    const bool project = ws.basis->centered && ws.f_anchor_prec <= 0.0;
    if (project) {
        Eigen::MatrixXd Pt = ws.T.transpose() * fc.precision * ws.T;
        Eigen::VectorXd bt = ws.T.transpose() * fc.linear;
        st.f.col(q) = ws.T * mvn_from_precision(std::move(Pt), bt, rng);
    } else {
        st.f.col(q) = mvn_from_precision(fc.precision, fc.linear, rng);
    }
}

void apply_identification(ModelState& st, const SamplerWorkspace& ws) {
    const int A = ws.A();
    const int Q = static_cast<int>(st.f.cols());
    Eigen::MatrixXd M = ws.basis->B * st.f;

    Eigen::MatrixXd fit_before;
    if (ws.check_identification) fit_before = st.lambda * M.transpose();

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd thinQ = qr.householderQ() * Eigen::MatrixXd::Identity(A, Q);
    Eigen::MatrixXd S = qr.matrixQR().topLeftCorner(Q, Q).triangularView<Eigen::Upper>();

    double dmax = 1e-300;
    for (int q = 0; q < Q; ++q) dmax = std::max(dmax, std::abs(S(q, q)));
    for (int q = 0; q < Q; ++q) {
        if (std::abs(S(q, q)) <= 1e-12 * dmax)
            throw std::runtime_error("sampler: identification failed, factor " + std::to_string(q) +
                                     " is rank deficient");
        if (S(q, q) < 0.0) {
            S.row(q) *= -1.0;
            thinQ.col(q) *= -1.0;
        }
    }

    st.lambda = st.lambda * S.transpose();
    for (int q = 0; q < Q; ++q) {
        int idx = 0;
        thinQ.col(q).cwiseAbs().maxCoeff(&idx);
        if (thinQ(idx, q) < 0.0) {
            thinQ.col(q) *= -1.0;
            st.lambda.col(q) *= -1.0;
        }
    }
    st.phi = thinQ;
    st.f = ws.B_cod.solve(st.phi);
    st.gamma = st.lambda - ws.W * st.beta;

    if (ws.check_identification) {
        double scale = 1.0 + fit_before.cwiseAbs().maxCoeff();
        double err = (st.lambda * st.phi.transpose() - fit_before).cwiseAbs().maxCoeff();
        if (err > 1e-8 * scale)
            throw std::runtime_error("sampler: identification changed the fitted surface");
    }
}

void update_loadings(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    const int N = ws.N(), Q = static_cast<int>(st.f.cols());
    const int R = static_cast<int>(ws.W.cols());
    Eigen::MatrixXd centered = st.z - ws.offsets;
    centered.colwise() -= st.alpha;
    Eigen::MatrixXd zs = centered * st.phi; // N x Q projected outcomes
    Eigen::MatrixXd WtW = ws.W.transpose() * ws.W;

    for (int q = 0; q < Q; ++q) {
        const double s2 = st.sigma2 + st.sigma2_lambda[q];
        Eigen::MatrixXd P = WtW / s2;
        for (int r = 0; r < R; ++r)
            P(r, r) += 1.0 / (st.hs_beta.xi[q] * st.hs_beta.rho(r, q));
        Eigen::VectorXd b = ws.W.transpose() * zs.col(q) / s2;
        st.beta.col(q) = mvn_from_precision(std::move(P), b, rng);

        const double G = 1.0 / (1.0 / st.sigma2_lambda[q] + 1.0 / st.sigma2);
        const double sd = std::sqrt(G);
        Eigen::VectorXd wb = ws.W * st.beta.col(q);
        for (int i = 0; i < N; ++i) {
            double gm = G * (zs(i, q) - wb[i]) / st.sigma2;
            st.gamma(i, q) = gm + sd * rng.normal();
        }
        st.lambda.col(q) = wb + st.gamma.col(q);
    }
}

void update_tau(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    const int K = ws.basis->K;
    const bool anchored = ws.f_anchor_prec > 0.0;
    for (int q = 0; q < st.tau.size(); ++q) {
        Eigen::VectorXd u = ws.basis->D * st.f.col(q);
        double quad = u.array().square().matrix().dot(st.kappa.col(q));
        if (anchored)
            quad += ws.f_anchor_prec * (st.f(0, q) * st.f(0, q) + st.f(1, q) * st.f(1, q));
        const double shape = ws.hyper.d0 + 0.5 * (K - 2) + (anchored ? 1.0 : 0.0);
        st.tau[q] = rng.inv_gamma(shape, ws.hyper.D0 + 0.5 * quad);
    }
}

void update_kappa(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    for (int q = 0; q < st.kappa.cols(); ++q) {
        Eigen::VectorXd u = ws.basis->D * st.f.col(q);
        for (int k = 0; k < st.kappa.rows(); ++k)
            st.kappa(k, q) = rng.gamma(1.0, 0.5 + u[k] * u[k] / (2.0 * st.tau[q]));
    }
}

void update_delta(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    const int R = static_cast<int>(ws.W.cols());
    Eigen::MatrixXd P = ws.W.transpose() * ws.W / st.sigma2_alpha;
    for (int r = 0; r < R; ++r)
        P(r, r) += 1.0 / (st.hs_delta.xi[0] * st.hs_delta.rho(r, 0));
    Eigen::VectorXd b = ws.W.transpose() * st.alpha / st.sigma2_alpha;
    st.delta = mvn_from_precision(std::move(P), b, rng);
}

void update_hier_variances(ModelState& st, const SamplerWorkspace& ws, Rng& rng) {
    const int N = ws.N();
    Eigen::VectorXd ra = st.alpha - ws.W * st.delta;
    st.sigma2_alpha = rng.inv_gamma(ws.hyper.s0 + 0.5 * N, ws.hyper.S0 + 0.5 * ra.squaredNorm());
    for (int q = 0; q < st.sigma2_lambda.size(); ++q) {
        Eigen::VectorXd rl = st.lambda.col(q) - ws.W * st.beta.col(q);
        st.sigma2_lambda[q] =
            rng.inv_gamma(ws.hyper.l0 + 0.5 * N, ws.hyper.L0 + 0.5 * rl.squaredNorm());
    }
}

void update_horseshoe_column(const Eigen::VectorXd& coef, Eigen::Ref<Eigen::VectorXd> rho,
                             Eigen::Ref<Eigen::VectorXd> nu, double& xi, double& zeta,
                             Rng& rng) {
    const int R = static_cast<int>(coef.size());
    for (int r = 0; r < R; ++r)
        rho[r] = rng.inv_gamma(1.0, 1.0 / nu[r] + coef[r] * coef[r] / (2.0 * xi));
    double ssum = 0.0;
    for (int r = 0; r < R; ++r) ssum += coef[r] * coef[r] / rho[r];
    xi = rng.inv_gamma(0.5 * (1.0 + R), 1.0 / zeta + 0.5 * ssum);
    for (int r = 0; r < R; ++r) nu[r] = rng.inv_gamma(1.0, 1.0 + 1.0 / rho[r]);
    zeta = rng.inv_gamma(1.0, 1.0 + 1.0 / xi);
}

void update_horseshoe(ModelState& st, Rng& rng) {
    for (int q = 0; q < st.beta.cols(); ++q)
        update_horseshoe_column(st.beta.col(q), st.hs_beta.rho.col(q), st.hs_beta.nu.col(q),
                                st.hs_beta.xi[q], st.hs_beta.zeta[q], rng);
    update_horseshoe_column(st.delta, st.hs_delta.rho.col(0), st.hs_delta.nu.col(0),
                            st.hs_delta.xi[0], st.hs_delta.zeta[0], rng);
}

void gibbs_sweep(ModelState& st, SamplerWorkspace& ws, Rng& rng) {
    update_latent_z(st, ws, rng);
    update_sigma2(st, ws, rng);
    update_alpha(st, ws, rng);
    for (int q = 0; q < st.f.cols(); ++q) {
        update_spline_factor(st, ws, q, rng);
        apply_identification(st, ws);
    }
    update_loadings(st, ws, rng);
    update_tau(st, ws, rng);
    update_kappa(st, ws, rng);
    update_delta(st, ws, rng);
    update_hier_variances(st, ws, rng);
    update_horseshoe(st, rng);
}

PosteriorDraws run_mcmc(const AgeCountPanel& panel, const CovariateMatrix& W,
                        const ModelConfig& cfg, const ProgressFn& progress) {
    std::vector<double> knots = cfg.interior_knots;
    double lo = cfg.boundary_lo, hi = cfg.boundary_hi;
    if (hi <= lo) {
        lo = panel.ages.minCoeff();
        hi = panel.ages.maxCoeff();
    }
    SplineBasis basis;
    if (knots.empty()) {
        int n_int = cfg.n_interior_default;
        double h = (hi - lo) / (n_int + 1);
        for (int j = 1; j <= n_int; ++j) knots.push_back(lo + j * h);
    }
    basis = build_basis(panel.ages, knots, lo, hi, cfg.degree, cfg.center_basis);

    SamplerWorkspace ws = make_workspace(panel, W, basis, cfg);
    ModelState st = init_state(ws, cfg.Q);
    Rng rng(cfg.seed);

    PosteriorDraws out;
    out.config = cfg;
    out.subpop_ids = panel.subpop_ids;
    out.ages = panel.ages;
    out.offsets = panel.offsets;
    out.W = W;
    out.basis = basis;
    out.states.reserve(cfg.mcmc.draws / cfg.mcmc.thin);

    const int total = cfg.mcmc.burnin + cfg.mcmc.draws;
    ws.adapt = true;
    for (int t = 0; t < cfg.mcmc.burnin; ++t) {
        gibbs_sweep(st, ws, rng);
        if (progress && t % 500 == 0) progress(t, total);
    }
    ws.adapt = false;
    ws.batch_acc.setZero();
    for (int t = 1; t <= cfg.mcmc.draws; ++t) {
        gibbs_sweep(st, ws, rng);
        if (t % cfg.mcmc.thin == 0) out.states.push_back(st);
        if (progress && (cfg.mcmc.burnin + t) % 500 == 0) progress(cfg.mcmc.burnin + t, total);
    }

    SamplerDiagnostics diag;
    diag.sweeps = ws.total_sweeps;
    diag.log_step = ws.log_step;
    diag.accept_rate.setConstant(panel.N(), panel.A(),
                                 std::numeric_limits<double>::quiet_NaN());
    double acc_sum = 0.0;
    long long acc_n = 0;
    for (int i = 0; i < panel.N(); ++i)
        for (int x = 0; x < panel.A(); ++x) {
            bool mh = ws.observed(i, x) &&
                      !(ws.zcfg.large_count_threshold > 0.0 &&
                        ws.y(i, x) >= ws.zcfg.large_count_threshold);
            if (mh && ws.total_sweeps > 0) {
                diag.accept_rate(i, x) = ws.total_acc(i, x) / double(ws.total_sweeps);
                acc_sum += diag.accept_rate(i, x);
                ++acc_n;
            }
        }
    diag.mean_accept = acc_n > 0 ? acc_sum / acc_n : 0.0;
    out.diag = std::move(diag);
    out.rng_state_final = rng.serialize();
    return out;
}

} // namespace agecurves
