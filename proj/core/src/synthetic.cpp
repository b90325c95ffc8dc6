#include "agecurves/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "agecurves/rng.hpp"
#include "agecurves/spline.hpp"

namespace agecurves {

namespace {

constexpr int kMaxFactors = 5;
constexpr int kCovariates = 10;
constexpr int kInteriorKnots = 7;
constexpr double kSigma2Alpha = 0.5;

// Smooth stand-ins for data-derived components: an early-age bump, a drift,
// a bathtub, a full-period wave, and a late-age rise, all over t in [0,1].
double shape_value(int q, double t)
{
    switch (q) {
        case 0: return std::exp(-std::pow(t - 0.25, 2) / (2.0 * 0.12 * 0.12));
        case 1: return t;
        case 2: return std::pow(t - 0.5, 2);
        case 3: return std::sin(2.0 * std::numbers::pi * t);
        default: return 1.0 / (1.0 + std::exp(-10.0 * (t - 0.7)));
    }
}

/// Center columns, orthonormalize with a sign convention, in factor order.
Eigen::MatrixXd center_orthonormalize(Eigen::MatrixXd M)
{
    M.rowwise() -= M.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Qm = qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
    Eigen::MatrixXd Rm = qr.matrixQR().topRows(M.cols()).triangularView<Eigen::Upper>();
    for (int q = 0; q < M.cols(); ++q) {
        if (std::abs(Rm(q, q)) < 1e-10 * std::abs(Rm(0, 0)))
            throw std::runtime_error("synthetic factors are rank deficient");
        Eigen::Index imax = 0;
        Qm.col(q).cwiseAbs().maxCoeff(&imax);
        if (Qm(imax, q) < 0.0) Qm.col(q) = -Qm.col(q);
    }
    return Qm;
}

Eigen::MatrixXd factor_curves(const Eigen::VectorXd& ages, const AgeCountPanel* source,
                              int n_factors)
{
    const int A = static_cast<int>(ages.size());
    Eigen::MatrixXd shapes(A, n_factors);
    if (source) {
        if (source->A() < n_factors || source->N() < n_factors)
            throw std::invalid_argument("source panel too small for the requested components");
        Eigen::MatrixXd L = source->counts.array().log1p();
        Eigen::MatrixXd Ld = L.colwise() - L.rowwise().mean().eval();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(Ld, Eigen::ComputeThinV);
        shapes = svd.matrixV().leftCols(n_factors);
    } else {
        const double lo = ages.minCoeff(), hi = ages.maxCoeff();
        for (int x = 0; x < A; ++x) {
            const double t = (ages[x] - lo) / (hi - lo);
            for (int q = 0; q < n_factors; ++q) shapes(x, q) = shape_value(q, t);
        }
    }

    SplineBasis basis = build_uniform_basis(ages, kInteriorKnots);
    Eigen::MatrixXd smoothed =
        basis.B * (basis.B.transpose() * basis.B)
                      .ldlt()
                      .solve(basis.B.transpose() * shapes);
    return center_orthonormalize(std::move(smoothed));
}

/// k distinct indices from [0, n), order-independent of k.
std::vector<int> pick_distinct(Rng& rng, int n, int k)
{
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.uniform() * static_cast<double>(n - i));
        if (j >= n) j = n - 1;
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

SyntheticTruth generate_core(std::uint64_t seed, int N, int A, double noise_sigma2,
                             double intercept, const AgeCountPanel* source_panel,
                             int n_factors)
{
    if (n_factors < 1 || n_factors > kMaxFactors)
        throw std::invalid_argument("n_factors must lie in [1, 5]");
    if (N < 2) throw std::invalid_argument("need at least two subpopulations");
    if (A < kInteriorKnots + 5)
        throw std::invalid_argument("age grid too short for the factor basis");
    if (noise_sigma2 < 0.0) throw std::invalid_argument("noise variance must be nonnegative");
    if (source_panel && source_panel->A() != A)
        throw std::invalid_argument("source panel age grid does not match requested A");

    Rng rng(seed);
    SyntheticTruth t;

    t.panel.ages.resize(A);
    for (int x = 0; x < A; ++x) t.panel.ages[x] = x;
    if (source_panel) t.panel.ages = source_panel->ages;

    const int width = static_cast<int>(std::to_string(N).size());
    for (int i = 0; i < N; ++i) {
        std::string id = std::to_string(i + 1);
        t.panel.subpop_ids.push_back("s" + std::string(width - id.size(), '0') + id);
    }

    Eigen::MatrixXd base(N, kCovariates);
    std::vector<std::string> names;
    for (int j = 0; j < kCovariates; ++j) {
        names.push_back("x" + std::to_string(j + 1));
        for (int i = 0; i < N; ++i) base(i, j) = rng.normal();
    }
    t.W = make_design(base, names, {}, false);
    const int R = t.W.R();

    SyntheticParams& p = t.params;
    p.sigma2 = noise_sigma2;
    p.phi = factor_curves(t.panel.ages, source_panel, n_factors);

    p.delta.resize(R);
    p.delta[0] = intercept;
    for (int r = 1; r < R; ++r) p.delta[r] = rng.normal();
    for (int r : pick_distinct(rng, R - 1, 3)) p.delta[r + 1] = 0.0;

    p.beta.resize(R, n_factors);
    for (int q = 0; q < n_factors; ++q)
        for (int r = 0; r < R; ++r) p.beta(r, q) = rng.normal();
    for (int e : pick_distinct(rng, (R - 1) * n_factors, 3)) {
        p.beta(1 + e % (R - 1), e / (R - 1)) = 0.0;
    }

    p.lambda.resize(N, n_factors);
    for (int q = 0; q < n_factors; ++q)
        for (int i = 0; i < N; ++i)
            p.lambda(i, q) = t.W.values.row(i).dot(p.beta.col(q)) + rng.normal();

    p.alpha.resize(N);
    for (int i = 0; i < N; ++i)
        p.alpha[i] = t.W.values.row(i).dot(p.delta) + rng.normal(0.0, std::sqrt(kSigma2Alpha));

    t.signal = p.lambda * p.phi.transpose();
    t.signal.colwise() += p.alpha;

    const double sd = std::sqrt(noise_sigma2);
    t.panel.counts.resize(N, A);
    for (int i = 0; i < N; ++i)
        for (int x = 0; x < A; ++x)
            t.panel.counts(i, x) = rng.poisson(std::exp(t.signal(i, x) + rng.normal(0.0, sd)));
    t.panel.offsets = Eigen::MatrixXd::Zero(N, A);
    t.panel.observed = BoolGrid::Constant(N, A, true);
    t.counts_full = t.panel.counts;
    t.held_out = BoolGrid::Constant(N, A, false);
    return t;
}

nlohmann::json mat_json(const Eigen::MatrixXd& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

nlohmann::json vec_json(const Eigen::VectorXd& v)
{
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) r.push_back(v[i]);
    return r;
}

} // namespace

SyntheticTruth generate_baseline(std::uint64_t seed, int N, int A, double noise_sigma2,
                                 const AgeCountPanel* source_panel, int n_factors)
{
    return generate_core(seed, N, A, noise_sigma2, 15.0, source_panel, n_factors);
}

SyntheticTruth generate_sparse_variant(std::uint64_t seed, int N, int A, double noise_sigma2,
                                       const AgeCountPanel* source_panel, int n_factors)
{
    return generate_core(seed, N, A, noise_sigma2, -1.5, source_panel, n_factors);
}

SyntheticTruth generate_outlier_variant(const SyntheticTruth& base, std::uint64_t seed)
{
    const int N = base.panel.N(), A = base.panel.A();
    if (base.panel.ages.minCoeff() > 18.0 || base.panel.ages.maxCoeff() < 20.0)
        throw std::invalid_argument("age grid must cover ages 18-20");

    SyntheticTruth t = base;
    Rng rng(seed);
    const int n_mod = std::max(1, static_cast<int>(std::llround(0.05 * N)));
    t.params.outlier_rows = pick_distinct(rng, N, n_mod);
    t.params.outlier_jump = 1.0;

    const double sd = std::sqrt(t.params.sigma2);
    for (int i : t.params.outlier_rows) {
        for (int x = 0; x < A; ++x)
            if (t.panel.ages[x] >= 18.0 && t.panel.ages[x] <= 20.0)
                t.signal(i, x) += t.params.outlier_jump;
        for (int x = 0; x < A; ++x)
            t.panel.counts(i, x) = rng.poisson(std::exp(t.signal(i, x) + rng.normal(0.0, sd)));
    }
    t.counts_full = t.panel.counts;
    return t;
}

SyntheticTruth drop_one_per_curve(const SyntheticTruth& truth, std::uint64_t seed)
{
    const int N = truth.panel.N(), A = truth.panel.A();
    if (A < 2) throw std::invalid_argument("need at least two ages to drop one");

    SyntheticTruth t = truth;
    Rng rng(seed);
    for (int i = 0; i < N; ++i) {
        std::vector<int> obs;
        for (int x = 0; x < A; ++x)
            if (t.panel.observed(i, x)) obs.push_back(x);
        if (obs.empty()) continue;
        int k = static_cast<int>(rng.uniform() * static_cast<double>(obs.size()));
        if (k >= static_cast<int>(obs.size())) k = static_cast<int>(obs.size()) - 1;
        const int x = obs[static_cast<std::size_t>(k)];
        t.panel.observed(i, x) = false;
        t.panel.counts(i, x) = 0.0;
        t.held_out(i, x) = true;
    }
    return t;
}

void write_truth(const SyntheticTruth& truth, const std::string& dir)
{
    write_counts_csv(truth.panel, dir + "/counts.csv");

    std::ofstream cov(dir + "/covariates.csv");
    if (!cov) throw std::runtime_error("cannot write covariates csv in " + dir);
    cov << "subpop";
    for (std::size_t j = 1; j < truth.W.names.size(); ++j) cov << ',' << truth.W.names[j];
    cov << '\n';
    cov.precision(17);
    for (int i = 0; i < truth.panel.N(); ++i) {
        cov << truth.panel.subpop_ids[static_cast<std::size_t>(i)];
        for (int j = 1; j < truth.W.R(); ++j) cov << ',' << truth.W.raw(i, j);
        cov << '\n';
    }

    nlohmann::json j;
    j["signal"] = mat_json(truth.signal);
    j["counts_full"] = mat_json(truth.counts_full);
    j["phi"] = mat_json(truth.params.phi);
    j["lambda"] = mat_json(truth.params.lambda);
    j["alpha"] = vec_json(truth.params.alpha);
    j["beta"] = mat_json(truth.params.beta);
    j["delta"] = vec_json(truth.params.delta);
    j["sigma2"] = truth.params.sigma2;
    j["outlier_rows"] = truth.params.outlier_rows;
    j["outlier_jump"] = truth.params.outlier_jump;
    nlohmann::json held = nlohmann::json::array();
    for (int i = 0; i < truth.panel.N(); ++i)
        for (int x = 0; x < truth.panel.A(); ++x)
            if (truth.held_out(i, x)) held.push_back({i, x});
    j["held_out"] = held;

    std::ofstream js(dir + "/truth.json");
    if (!js) throw std::runtime_error("cannot write truth json in " + dir);
    js << j.dump(2) << '\n';
}

} // namespace agecurves
