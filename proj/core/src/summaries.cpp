#include "agecurves/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace agecurves {

namespace {

int subpop_index(const PosteriorDraws& draws, const std::string& id)
{
    for (std::size_t i = 0; i < draws.subpop_ids.size(); ++i)
        if (draws.subpop_ids[i] == id) return static_cast<int>(i);
    throw std::invalid_argument("unknown subpopulation id: " + id);
}

void require_draws(const PosteriorDraws& draws)
{
    if (draws.states.empty()) throw std::invalid_argument("no stored draws");
}

double quantile_sorted(const std::vector<double>& v, double p)
{
    const std::size_t n = v.size();
    if (n == 1) return v[0];
    double h = p * static_cast<double>(n - 1);
    std::size_t k = static_cast<std::size_t>(std::floor(h));
    if (k >= n - 1) return v[n - 1];
    return v[k] + (h - static_cast<double>(k)) * (v[k + 1] - v[k]);
}

/// One simulated count curve for subpop i under stored state s.
Eigen::VectorXd predictive_curve(const PosteriorDraws& draws, int i,
                                 const ModelState& s, Rng& rng)
{
    const Eigen::Index A = draws.ages.size();
    const double sd = std::sqrt(s.sigma2);
    Eigen::VectorXd mu = s.phi * s.lambda.row(i).transpose();
    Eigen::VectorXd y(A);
    for (Eigen::Index x = 0; x < A; ++x) {
        double z = s.alpha(i) + mu(x) + draws.offsets(i, x) + rng.normal(0.0, sd);
        y(x) = rng.poisson(std::exp(z));
    }
    return y;
}

/// Original-scale coefficients of one loadings regression column.
Eigen::VectorXd beta_original(const PosteriorDraws& draws, const ModelState& s, int q)
{
    return draws.W.to_original(s.beta.col(q));
}

void check_covariate_index(const PosteriorDraws& draws, int j)
{
    if (j < 0 || j >= draws.W.R())
        throw std::invalid_argument("covariate index out of range: " + std::to_string(j));
}

} // namespace

CurveSummary summarize_curves(const Eigen::MatrixXd& per_draw, double level)
{
    if (per_draw.rows() < 1) throw std::invalid_argument("summarize_curves: no draws");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("summarize_curves: level must be in (0,1)");

    const Eigen::Index A = per_draw.cols();
    CurveSummary out;
    out.level = level;
    out.mean = per_draw.colwise().mean();
    out.lo.resize(A);
    out.hi.resize(A);
    const double p_lo = (1.0 - level) / 2.0;
    std::vector<double> col(static_cast<std::size_t>(per_draw.rows()));
    for (Eigen::Index x = 0; x < A; ++x) {
        for (Eigen::Index d = 0; d < per_draw.rows(); ++d)
            col[static_cast<std::size_t>(d)] = per_draw(d, x);
        std::sort(col.begin(), col.end());
        out.lo(x) = quantile_sorted(col, p_lo);
        out.hi(x) = quantile_sorted(col, 1.0 - p_lo);
    }
    return out;
}

PredictiveDraws posterior_predictive_y(const PosteriorDraws& draws,
                                       const std::string& subpop, Rng& rng,
                                       double level)
{
    require_draws(draws);
    const int i = subpop_index(draws, subpop);
    const Eigen::Index A = draws.ages.size();
    PredictiveDraws out;
    out.y.resize(static_cast<Eigen::Index>(draws.states.size()), A);
    for (std::size_t d = 0; d < draws.states.size(); ++d)
        out.y.row(static_cast<Eigen::Index>(d)) =
            predictive_curve(draws, i, draws.states[d], rng).transpose();
    out.summary = summarize_curves(out.y, level);
    return out;
}

CompositionDiff age_composition_diff(const PosteriorDraws& draws,
                                     const std::string& subpop_j,
                                     const std::string& subpop_k, Rng& rng,
                                     double level)
{
    require_draws(draws);
    const int j = subpop_index(draws, subpop_j);
    const int k = subpop_index(draws, subpop_k);
    const Eigen::Index A = draws.ages.size();
    const int n = static_cast<int>(draws.states.size());

    CompositionDiff out;
    if (j == k) {
        out.diff = summarize_curves(Eigen::MatrixXd::Zero(n, A), level);
        out.used = n;
        return out;
    }

    Eigen::MatrixXd diffs(n, A);
    int used = 0;
    for (int d = 0; d < n; ++d) {
        Eigen::VectorXd yj = predictive_curve(draws, j, draws.states[static_cast<std::size_t>(d)], rng);
        Eigen::VectorXd yk = predictive_curve(draws, k, draws.states[static_cast<std::size_t>(d)], rng);
        const double tj = yj.sum(), tk = yk.sum();
        if (tj <= 0.0 || tk <= 0.0) continue;
        diffs.row(used++) = (yj / tj - yk / tk).transpose();
    }
    if (used == 0) throw std::runtime_error("age_composition_diff: every predictive draw had zero total");
    out.diff = summarize_curves(diffs.topRows(used), level);
    out.used = used;
    out.skipped = n - used;
    return out;
}

EffectTable level_effects(const PosteriorDraws& draws, double level)
{
    require_draws(draws);
    const int n = static_cast<int>(draws.states.size());
    const int R = draws.W.R();
    Eigen::MatrixXd per_draw(n, R);
    for (int d = 0; d < n; ++d)
        per_draw.row(d) = draws.W.to_original(draws.states[static_cast<std::size_t>(d)].delta).transpose();
    CurveSummary s = summarize_curves(per_draw, level);
    EffectTable out;
    out.names = draws.W.names;
    out.mean = s.mean;
    out.lo = s.lo;
    out.hi = s.hi;
    out.level = level;
    return out;
}

CurveSummary shape_effect(const PosteriorDraws& draws, int covariate, double level)
{
    require_draws(draws);
    check_covariate_index(draws, covariate);
    for (const auto& [lin, quad] : draws.W.quad_pairs)
        if (covariate == lin || covariate == quad)
            throw std::invalid_argument(
                "covariate " + draws.W.names[static_cast<std::size_t>(covariate)] +
                " has a quadratic companion; use the nonlinear effect");

    const int n = static_cast<int>(draws.states.size());
    const Eigen::Index A = draws.ages.size();
    const int Q = draws.config.Q;
    Eigen::MatrixXd per_draw(n, A);
    Eigen::VectorXd b(Q);
    for (int d = 0; d < n; ++d) {
        const ModelState& s = draws.states[static_cast<std::size_t>(d)];
        for (int q = 0; q < Q; ++q) b(q) = beta_original(draws, s, q)(covariate);
        per_draw.row(d) = (s.phi * b).transpose();
    }
    return summarize_curves(per_draw, level);
}

NonlinearEffect nonlinear_effect(const PosteriorDraws& draws, int covariate,
                                 const Eigen::VectorXd& values, double level)
{
    require_draws(draws);
    check_covariate_index(draws, covariate);
    if (values.size() == 0) throw std::invalid_argument("nonlinear_effect: no evaluation values");
    int quad_col = -1;
    for (const auto& [lin, quad] : draws.W.quad_pairs)
        if (covariate == lin) quad_col = quad;
    if (quad_col < 0)
        throw std::invalid_argument(
            "covariate " + draws.W.names[static_cast<std::size_t>(covariate)] +
            " has no registered quadratic companion");

    const int n = static_cast<int>(draws.states.size());
    const Eigen::Index A = draws.ages.size();
    const int Q = draws.config.Q;
    const Eigen::Index V = values.size();

    std::vector<Eigen::MatrixXd> per_value(static_cast<std::size_t>(V), Eigen::MatrixXd(n, A));
    Eigen::VectorXd bj(Q), bn(Q);
    for (int d = 0; d < n; ++d) {
        const ModelState& s = draws.states[static_cast<std::size_t>(d)];
        for (int q = 0; q < Q; ++q) {
            Eigen::VectorXd orig = beta_original(draws, s, q);
            bj(q) = orig(covariate);
            bn(q) = orig(quad_col);
        }
        for (Eigen::Index v = 0; v < V; ++v)
            per_value[static_cast<std::size_t>(v)].row(d) =
                (s.phi * (bj + 2.0 * values(v) * bn)).transpose();
    }

    NonlinearEffect out;
    out.values = values;
    out.surface.resize(A, V);
    out.slices.reserve(static_cast<std::size_t>(V));
    for (Eigen::Index v = 0; v < V; ++v) {
        CurveSummary s = summarize_curves(per_value[static_cast<std::size_t>(v)], level);
        out.surface.col(v) = s.mean;
        out.slices.push_back(std::move(s));
    }
    return out;
}

ScenarioResult scenario_project(const PosteriorDraws& draws,
                                const std::string& subpop,
                                const Eigen::VectorXd& w_raw, Rng& rng,
                                double level)
{
    require_draws(draws);
    const int i = subpop_index(draws, subpop);
    const int R = draws.W.R();
    if (w_raw.size() != R)
        throw std::invalid_argument("scenario row has " + std::to_string(w_raw.size()) +
                                    " entries, design has " + std::to_string(R));
    if (std::abs(w_raw(0) - 1.0) > 1e-12)
        throw std::invalid_argument("scenario row must carry the intercept value 1");
    for (const auto& [lin, quad] : draws.W.quad_pairs) {
        const double want = w_raw(lin) * w_raw(lin);
        if (std::abs(w_raw(quad) - want) > 1e-9 * std::max(1.0, want))
            throw std::invalid_argument("scenario entry for " +
                                        draws.W.names[static_cast<std::size_t>(quad)] +
                                        " is not the square of " +
                                        draws.W.names[static_cast<std::size_t>(lin)]);
    }

    const Eigen::VectorXd v = draws.W.standardize_row(w_raw);
    const Eigen::Index A = draws.ages.size();
    const int Q = draws.config.Q;
    const int n = static_cast<int>(draws.states.size());

    Eigen::MatrixXd yb(n, A), yc(n, A);
    Eigen::VectorXd lam(Q);
    for (int d = 0; d < n; ++d) {
        const ModelState& s = draws.states[static_cast<std::size_t>(d)];
        yb.row(d) = predictive_curve(draws, i, s, rng).transpose();

        const double alpha_cf = rng.normal(v.dot(s.delta), std::sqrt(s.sigma2_alpha));
        for (int q = 0; q < Q; ++q)
            lam(q) = rng.normal(v.dot(s.beta.col(q)), std::sqrt(s.sigma2_lambda(q)));
        Eigen::VectorXd mu = s.phi * lam;
        const double sd = std::sqrt(s.sigma2);
        for (Eigen::Index x = 0; x < A; ++x) {
            double z = alpha_cf + mu(x) + draws.offsets(i, x) + rng.normal(0.0, sd);
            yc(d, x) = rng.poisson(std::exp(z));
        }
    }

    ScenarioResult out;
    out.baseline = summarize_curves(yb, level);
    out.counterfactual = summarize_curves(yc, level);
    out.difference = summarize_curves(yc - yb, level);
    return out;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryBlock>& blocks)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "quantity,key,age_or_value,mean,lo,hi\n";
    char buf[128];
    for (const SummaryBlock& b : blocks) {
        if (b.x.size() != b.s.mean.size())
            throw std::invalid_argument("summary block " + b.quantity + "/" + b.key +
                                        ": x length does not match curve length");
        for (Eigen::Index r = 0; r < b.x.size(); ++r) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g", b.x(r),
                          b.s.mean(r), b.s.lo(r), b.s.hi(r));
            os << b.quantity << ',' << b.key << ',' << buf << '\n';
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

} // namespace agecurves
