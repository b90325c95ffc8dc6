#include "agecurves/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "agecurves/baselines.hpp"
#include "agecurves/rng.hpp"
#include "agecurves/sampler.hpp"
#include "agecurves/synthetic.hpp"

namespace agecurves {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t task_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (a + 1)) ^
                      (0xbf58476d1ce4e5b9ULL * (b + 1));
    return splitmix64(s);
}

void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn)
{
    threads = std::max(1, std::min(threads, n_tasks));
    if (threads == 1) {
        for (int t = 0; t < n_tasks; ++t) fn(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) fn(t);
        });
    for (auto& th : pool) th.join();
}

SyntheticTruth generate_variant(const ExperimentConfig& cfg, std::uint64_t gen_seed,
                                std::uint64_t variant_seed)
{
    if (cfg.variant == "baseline")
        return generate_baseline(gen_seed, cfg.N, cfg.A, cfg.noise_sigma2, nullptr,
                                 cfg.n_factors);
    if (cfg.variant == "sparse")
        return generate_sparse_variant(gen_seed, cfg.N, cfg.A, cfg.noise_sigma2, nullptr,
                                       cfg.n_factors);
    if (cfg.variant == "outlier") {
        SyntheticTruth base = generate_baseline(gen_seed, cfg.N, cfg.A, cfg.noise_sigma2,
                                                nullptr, cfg.n_factors);
        return generate_outlier_variant(base, variant_seed);
    }
    throw std::invalid_argument("unknown variant: " + cfg.variant);
}

PosteriorDraws fit_bayes(const AgeCountPanel& panel, const CovariateMatrix& W,
                         ModelConfig model, std::uint64_t seed)
{
    model.seed = seed;
    CovariateMatrix Wfit = restandardize(W, model.standardize_covariates);
    return run_mcmc(panel, Wfit, model);
}

struct SlotGuard {
    ScoreRow* row;
    void fail(const std::string& why) const
    {
        row->failed = true;
        row->error = why;
        row->rmse = row->mae = row->mape = row->corr = kNaN;
    }
};

void run_task_scored(ScoreRow& row, const std::function<ScoreRow()>& task)
{
    const std::string model = row.model;
    const int rep = row.replicate;
    try {
        row = task();
    } catch (const std::exception& e) {
        SlotGuard{&row}.fail(e.what());
    }
    row.model = model;
    row.replicate = rep;
}

ScoreReport finish_report(std::vector<ScoreRow> rows, const std::string& scale,
                          int replicates)
{
    ScoreReport rep;
    rep.rows = std::move(rows);
    rep.scale = scale;
    rep.replicates = replicates;
    return rep;
}

} // namespace

std::vector<ScoreRow> ScoreReport::model_means() const
{
    std::vector<ScoreRow> out;
    for (const ScoreRow& r : rows) {
        ScoreRow* slot = nullptr;
        for (ScoreRow& m : out)
            if (m.model == r.model) slot = &m;
        if (!slot) {
            ScoreRow m;
            m.model = r.model;
            m.rmse = m.mae = m.mape = m.corr = 0.0;
            out.push_back(m);
            slot = &out.back();
        }
        if (r.failed) continue;
        slot->rmse += r.rmse;
        slot->mae += r.mae;
        slot->mape += r.mape;
        slot->corr += r.corr;
        slot->n_cells += r.n_cells;
        slot->mape_excluded += r.mape_excluded;
        slot->replicate += 1;
    }
    for (ScoreRow& m : out) {
        if (m.replicate == 0) {
            m.failed = true;
            m.rmse = m.mae = m.mape = m.corr = kNaN;
            continue;
        }
        const double n = static_cast<double>(m.replicate);
        m.rmse /= n;
        m.mae /= n;
        m.mape /= n;
        m.corr /= n;
    }
    return out;
}

ScoreRow score(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
               const BoolGrid* mask)
{
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("score: shape mismatch");
    if (mask && (mask->rows() != truth.rows() || mask->cols() != truth.cols()))
        throw std::invalid_argument("score: mask shape mismatch");

    ScoreRow r;
    double se = 0.0, ae = 0.0, ape = 0.0;
    long long n_ape = 0;
    double sp = 0.0, st = 0.0, spp = 0.0, stt = 0.0, spt = 0.0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i)
        for (Eigen::Index j = 0; j < truth.cols(); ++j) {
            if (mask && !(*mask)(i, j)) continue;
            const double p = pred(i, j), t = truth(i, j), d = p - t;
            se += d * d;
            ae += std::abs(d);
            if (t != 0.0) {
                ape += std::abs(d / t);
                ++n_ape;
            } else {
                ++r.mape_excluded;
            }
            sp += p;
            st += t;
            spp += p * p;
            stt += t * t;
            spt += p * t;
            ++r.n_cells;
        }
    if (r.n_cells == 0) throw std::invalid_argument("score: empty mask");

    const double n = static_cast<double>(r.n_cells);
    r.rmse = std::sqrt(se / n);
    r.mae = ae / n;
    r.mape = n_ape > 0 ? 100.0 * ape / static_cast<double>(n_ape) : kNaN;
    const double vp = spp - sp * sp / n, vt = stt - st * st / n;
    const double cov = spt - sp * st / n;
    if (vp > 0.0 && vt > 0.0)
        r.corr = cov / std::sqrt(vp * vt);
    else
        r.corr = se == 0.0 ? 1.0 : kNaN;
    return r;
}

Eigen::MatrixXd posterior_mean_signal(const PosteriorDraws& draws)
{
    if (draws.states.empty()) throw std::invalid_argument("no stored draws");
    const Eigen::Index N = draws.offsets.rows(), A = draws.offsets.cols();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(N, A);
    for (const ModelState& s : draws.states) {
        Eigen::MatrixXd sig = s.lambda * s.phi.transpose();
        sig.colwise() += s.alpha;
        acc += sig;
    }
    return acc / static_cast<double>(draws.states.size());
}

Eigen::MatrixXd posterior_mean_z(const PosteriorDraws& draws)
{
    if (draws.states.empty()) throw std::invalid_argument("no stored draws");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(draws.offsets.rows(), draws.offsets.cols());
    for (const ModelState& s : draws.states) acc += s.z;
    return acc / static_cast<double>(draws.states.size());
}

Eigen::VectorXd posterior_mean_curve_for(const PosteriorDraws& draws,
                                         const Eigen::VectorXd& w_values)
{
    if (draws.states.empty()) throw std::invalid_argument("no stored draws");
    if (w_values.size() != draws.W.R())
        throw std::invalid_argument("covariate row length mismatch");
    const Eigen::Index A = draws.ages.size();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(A);
    for (const ModelState& s : draws.states)
        acc += Eigen::VectorXd::Constant(A, w_values.dot(s.delta)) +
               s.phi * (s.beta.transpose() * w_values);
    return acc / static_cast<double>(draws.states.size());
}

ScoreReport run_insample_experiment(const ExperimentConfig& cfg)
{
    const std::vector<std::string> models = {"bayes", "svd", "pspline"};
    std::vector<ScoreRow> rows(models.size() * static_cast<std::size_t>(cfg.replicates));
    for (int r = 0; r < cfg.replicates; ++r)
        for (std::size_t m = 0; m < models.size(); ++m) {
            rows[static_cast<std::size_t>(r) * models.size() + m].model = models[m];
            rows[static_cast<std::size_t>(r) * models.size() + m].replicate = r;
        }

    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
        const std::uint64_t sr = static_cast<std::uint64_t>(r);
        SyntheticTruth truth;
        try {
            truth = generate_variant(cfg, task_seed(cfg.seed, sr, 0), task_seed(cfg.seed, sr, 1));
        } catch (const std::exception& e) {
            for (std::size_t m = 0; m < models.size(); ++m)
                SlotGuard{&rows[static_cast<std::size_t>(r) * models.size() + m]}.fail(e.what());
            return;
        }
        auto& bayes_row = rows[static_cast<std::size_t>(r) * models.size() + 0];
        auto& svd_row = rows[static_cast<std::size_t>(r) * models.size() + 1];
        auto& ps_row = rows[static_cast<std::size_t>(r) * models.size() + 2];

        run_task_scored(bayes_row, [&] {
            PosteriorDraws d = fit_bayes(truth.panel, truth.W, cfg.model,
                                         task_seed(cfg.seed, sr, 2));
            return score(posterior_mean_signal(d), truth.signal);
        });
        run_task_scored(svd_row, [&] {
            return score(svd_reconstruct(truth.panel, cfg.svd_rank), truth.signal);
        });
        run_task_scored(ps_row, [&] {
            Eigen::MatrixXd L = truth.panel.counts.array().log1p();
            SplineBasis sb = build_uniform_basis(truth.panel.ages,
                                                 std::max(4, std::min(cfg.A / 2, 30)));
            Eigen::MatrixXd fit(L.rows(), L.cols());
            for (Eigen::Index i = 0; i < L.rows(); ++i)
                fit.row(i) = pspline_smooth_gcv(L.row(i).transpose(), sb).fitted.transpose();
            return score(fit, truth.signal);
        });
    });
    return finish_report(std::move(rows), "signal", cfg.replicates);
}

ScoreReport run_missing_experiment(const ExperimentConfig& cfg)
{
    const std::vector<std::string> models = {"bayes", "linear", "pspline"};
    std::vector<ScoreRow> rows(models.size() * static_cast<std::size_t>(cfg.replicates));
    for (int r = 0; r < cfg.replicates; ++r)
        for (std::size_t m = 0; m < models.size(); ++m) {
            rows[static_cast<std::size_t>(r) * models.size() + m].model = models[m];
            rows[static_cast<std::size_t>(r) * models.size() + m].replicate = r;
        }

    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
        const std::uint64_t sr = static_cast<std::uint64_t>(r);
        SyntheticTruth masked;
        try {
            SyntheticTruth truth = generate_variant(cfg, task_seed(cfg.seed, sr, 0),
                                                    task_seed(cfg.seed, sr, 1));
            masked = drop_one_per_curve(truth, task_seed(cfg.seed, sr, 3));
        } catch (const std::exception& e) {
            for (std::size_t m = 0; m < models.size(); ++m)
                SlotGuard{&rows[static_cast<std::size_t>(r) * models.size() + m]}.fail(e.what());
            return;
        }
        const Eigen::MatrixXd truth_log = masked.counts_full.array().log1p();
        const BoolGrid& mask = masked.held_out;

        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 0], [&] {
            PosteriorDraws d = fit_bayes(masked.panel, masked.W, cfg.model,
                                         task_seed(cfg.seed, sr, 2));
            return score(posterior_mean_z(d), truth_log, &mask);
        });

        auto interp_all = [&](InterpMethod method) {
            const int N = masked.panel.N();
            Eigen::MatrixXd fit(N, masked.panel.A());
            for (int i = 0; i < N; ++i) {
                Eigen::VectorXd series =
                    masked.panel.counts.row(i).transpose().array().log1p();
                fit.row(i) = interpolate_missing(masked.panel.ages, series,
                                                 masked.panel.observed.row(i).transpose(),
                                                 method)
                                 .transpose();
            }
            return score(fit, truth_log, &mask);
        };
        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 1],
                        [&] { return interp_all(InterpMethod::linear); });
        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 2],
                        [&] { return interp_all(InterpMethod::pspline); });
    });
    return finish_report(std::move(rows), "log1p", cfg.replicates);
}

ScoreReport run_oos_experiment(const ExperimentConfig& cfg)
{
    const std::vector<std::string> models = {"bayes", "bayes_nocov", "svd", "smooth_svd"};
    std::vector<ScoreRow> rows(models.size() * static_cast<std::size_t>(cfg.replicates));
    for (int r = 0; r < cfg.replicates; ++r)
        for (std::size_t m = 0; m < models.size(); ++m) {
            rows[static_cast<std::size_t>(r) * models.size() + m].model = models[m];
            rows[static_cast<std::size_t>(r) * models.size() + m].replicate = r;
        }

    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
        const std::uint64_t sr = static_cast<std::uint64_t>(r);
        SyntheticTruth truth;
        try {
            truth = generate_variant(cfg, task_seed(cfg.seed, sr, 0), task_seed(cfg.seed, sr, 1));
        } catch (const std::exception& e) {
            for (std::size_t m = 0; m < models.size(); ++m)
                SlotGuard{&rows[static_cast<std::size_t>(r) * models.size() + m]}.fail(e.what());
            return;
        }

        const int N = truth.panel.N();
        int n_hold = std::max(1, static_cast<int>(std::llround(cfg.holdout_fraction * N)));
        n_hold = std::min(n_hold, N - 2);
        Rng pick(task_seed(cfg.seed, sr, 4));
        std::vector<int> order(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < n_hold; ++i) {
            int j = i + static_cast<int>(pick.uniform() * static_cast<double>(N - i));
            if (j >= N) j = N - 1;
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        std::vector<int> hold(order.begin(), order.begin() + n_hold);
        std::vector<int> train(order.begin() + n_hold, order.end());
        std::sort(hold.begin(), hold.end());
        std::sort(train.begin(), train.end());

        AgeCountPanel tp = filter_rows(truth.panel, train);
        Eigen::MatrixXd truth_sig(n_hold, truth.panel.A());
        for (int h = 0; h < n_hold; ++h)
            truth_sig.row(h) = truth.signal.row(hold[static_cast<std::size_t>(h)]);

        auto bayes_predict = [&](const CovariateMatrix& Wt, bool use_cov) {
            CovariateMatrix Wfit = restandardize(Wt, cfg.model.standardize_covariates);
            ModelConfig mc = cfg.model;
            mc.seed = task_seed(cfg.seed, sr, use_cov ? 2 : 5);
            PosteriorDraws d = run_mcmc(tp, Wfit, mc);
            Eigen::MatrixXd pred(n_hold, truth.panel.A());
            for (int h = 0; h < n_hold; ++h) {
                Eigen::VectorXd w_raw = Eigen::VectorXd::Ones(1);
                if (use_cov)
                    w_raw = truth.W.raw.row(hold[static_cast<std::size_t>(h)]).transpose();
                pred.row(h) = posterior_mean_curve_for(d, Wfit.standardize_row(w_raw)).transpose();
            }
            return pred;
        };

        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 0], [&] {
            return score(bayes_predict(truth.W.select_rows(train), true), truth_sig);
        });
        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 1], [&] {
            return score(bayes_predict(truth.W.select_rows(train).intercept_only(), false),
                         truth_sig);
        });

        auto two_stage_all = [&](bool smooth) {
            CovariateMatrix Wt = restandardize(truth.W.select_rows(train),
                                               cfg.model.standardize_covariates);
            Eigen::MatrixXd pred(n_hold, truth.panel.A());
            for (int h = 0; h < n_hold; ++h) {
                Eigen::VectorXd w_raw =
                    truth.W.raw.row(hold[static_cast<std::size_t>(h)]).transpose();
                pred.row(h) = two_stage_predict(tp, Wt, Wt.standardize_row(w_raw),
                                                cfg.svd_rank, smooth)
                                  .transpose();
            }
            return score(pred, truth_sig);
        };
        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 2],
                        [&] { return two_stage_all(false); });
        run_task_scored(rows[static_cast<std::size_t>(r) * models.size() + 3],
                        [&] { return two_stage_all(true); });
    });
    return finish_report(std::move(rows), "signal", cfg.replicates);
}

std::vector<CvRow> loco_cv(const AgeCountPanel& panel, const CovariateMatrix& W,
                           const std::vector<std::string>& models,
                           const std::vector<int>& Q_list, const ModelConfig& base,
                           std::uint64_t seed, int threads)
{
    const int N = panel.N();
    if (N < 2) throw std::invalid_argument("loco_cv: need at least two subpopulations");
    if (models.empty() || Q_list.empty())
        throw std::invalid_argument("loco_cv: empty model or Q list");
    for (const std::string& m : models)
        if (m != "bayes" && m != "bayes_nocov" && m != "svd" && m != "smooth_svd")
            throw std::invalid_argument("loco_cv: unknown model " + m);

    const int n_combo = static_cast<int>(models.size() * Q_list.size());
    const int n_tasks = n_combo * N;
    std::vector<ScoreRow> fold_rows(static_cast<std::size_t>(n_tasks));

    parallel_for(n_tasks, threads, [&](int t) {
        const int combo = t / N, fold = t % N;
        const std::string& model = models[static_cast<std::size_t>(combo) / Q_list.size()];
        const int Q = Q_list[static_cast<std::size_t>(combo) % Q_list.size()];
        ScoreRow& row = fold_rows[static_cast<std::size_t>(t)];
        row.model = model;
        row.replicate = fold;

        run_task_scored(row, [&] {
            std::vector<int> train;
            for (int i = 0; i < N; ++i)
                if (i != fold) train.push_back(i);
            AgeCountPanel tp = filter_rows(panel, train);
            CovariateMatrix Wt =
                restandardize(W.select_rows(train), base.standardize_covariates);
            Eigen::VectorXd truth_log =
                panel.counts.row(fold).transpose().array().log1p();
            Eigen::MatrixXd truth_m = truth_log.transpose();

            Eigen::VectorXd pred;
            if (model == "svd" || model == "smooth_svd") {
                Eigen::VectorXd w_new = Wt.standardize_row(W.raw.row(fold).transpose());
                pred = two_stage_predict(tp, Wt, w_new, Q, model == "smooth_svd");
            } else {
                ModelConfig mc = base;
                mc.Q = Q;
                mc.seed = task_seed(seed, static_cast<std::uint64_t>(combo),
                                    static_cast<std::uint64_t>(fold));
                if (model == "bayes_nocov") {
                    CovariateMatrix Wi = Wt.intercept_only();
                    PosteriorDraws d = run_mcmc(tp, Wi, mc);
                    pred = posterior_mean_curve_for(d, Eigen::VectorXd::Ones(1));
                } else {
                    PosteriorDraws d = run_mcmc(tp, Wt, mc);
                    pred = posterior_mean_curve_for(
                        d, Wt.standardize_row(W.raw.row(fold).transpose()));
                }
            }
            return score(pred.transpose(), truth_m);
        });
    });

    std::vector<CvRow> out;
    for (int combo = 0; combo < n_combo; ++combo) {
        CvRow cv;
        cv.model = models[static_cast<std::size_t>(combo) / Q_list.size()];
        cv.Q = Q_list[static_cast<std::size_t>(combo) % Q_list.size()];
        for (int fold = 0; fold < N; ++fold) {
            const ScoreRow& r = fold_rows[static_cast<std::size_t>(combo * N + fold)];
            if (r.failed) {
                ++cv.folds_failed;
                continue;
            }
            cv.rmse += r.rmse;
            cv.mae += r.mae;
            cv.corr += r.corr;
            ++cv.folds_used;
        }
        if (cv.folds_used > 0) {
            cv.rmse /= cv.folds_used;
            cv.mae /= cv.folds_used;
            cv.corr /= cv.folds_used;
        } else {
            cv.rmse = cv.mae = cv.corr = kNaN;
        }
        out.push_back(cv);
    }
    return out;
}

void write_score_csv(const ScoreReport& report, const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "model,replicate,rmse,mae,mape,corr,n_cells,mape_excluded,failed,error\n";
    char buf[160];
    auto emit = [&](const ScoreRow& r, const char* rep_label) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g", r.rmse, r.mae, r.mape,
                      r.corr);
        os << r.model << ',' << rep_label << ',' << buf << ',' << r.n_cells << ','
           << r.mape_excluded << ',' << (r.failed ? 1 : 0) << ','
           << r.error << '\n';
    };
    for (const ScoreRow& r : report.rows) emit(r, std::to_string(r.replicate).c_str());
    for (const ScoreRow& m : report.model_means()) emit(m, "mean");
    if (!os) throw std::runtime_error("write failed: " + path);
}

void write_cv_csv(const std::vector<CvRow>& rows, const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "model,Q,rmse,mae,corr,folds_used,folds_failed\n";
    char buf[96];
    for (const CvRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", r.rmse, r.mae, r.corr);
        os << r.model << ',' << r.Q << ',' << buf << ',' << r.folds_used << ','
           << r.folds_failed << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

} // namespace agecurves
