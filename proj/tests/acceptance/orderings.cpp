// Synthetic-data orderings: smoothing accuracy against the SVD and GCV
// P-spline competitors, imputation accuracy against interpolation, and
// covariate-driven out-of-sample prediction in leave-one-curve-out CV.

#include "criteria.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "agecurves/evaluation.hpp"
#include "agecurves/synthetic.hpp"

namespace acceptance {
namespace {

using namespace agecurves;

int worker_threads()
{
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(hw == 0 ? 1u : hw, 8u));
}

std::map<std::string, std::vector<double>> rmse_by_model(const ScoreReport& rep)
{
    std::map<std::string, std::vector<double>> out;
    for (const ScoreRow& row : rep.rows) {
        if (row.failed) throw std::runtime_error("model " + row.model + " failed: " + row.error);
        auto& v = out[row.model];
        if (static_cast<int>(v.size()) <= row.replicate) v.resize(row.replicate + 1, 0.0);
        v[row.replicate] = row.rmse;
    }
    return out;
}

CriterionResult pairwise_wins(const ScoreReport& rep, const std::string& challenger,
                              const std::vector<std::string>& incumbents, int need, bool strict)
{
    auto rmse = rmse_by_model(rep);
    const std::vector<double>& ours = rmse.at(challenger);
    int wins = 0;
    std::string detail;
    for (int r = 0; r < static_cast<int>(ours.size()); ++r) {
        bool win = true;
        char buf[160];
        std::string line = "rep" + std::to_string(r) + ": " + challenger + " " +
                           [&] { std::snprintf(buf, sizeof(buf), "%.4f", ours[r]); return std::string(buf); }();
        for (const std::string& m : incumbents) {
            const double theirs = rmse.at(m)[r];
            win = win && (strict ? ours[r] < theirs : ours[r] <= theirs);
            std::snprintf(buf, sizeof(buf), " vs %s %.4f", m.c_str(), theirs);
            line += buf;
        }
        wins += win ? 1 : 0;
        detail += line + (win ? " WIN; " : " loss; ");
    }
    CriterionResult res;
    res.pass = wins >= need;
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%d/%zu wins (need %d). ", wins, ours.size(), need);
    res.detail = buf + detail;
    return res;
}

} // namespace

CriterionResult run_insample()
{
    ExperimentConfig cfg;
    cfg.replicates = 5;
    cfg.N = 100;
    cfg.A = 60;
    cfg.noise_sigma2 = 1.0;
    cfg.seed = 1;
    cfg.threads = worker_threads();
    return pairwise_wins(run_insample_experiment(cfg), "bayes", {"svd", "pspline"}, 4, true);
}

CriterionResult run_missing()
{
    ExperimentConfig cfg;
    cfg.replicates = 5;
    cfg.N = 100;
    cfg.A = 60;
    cfg.noise_sigma2 = 0.1;
    cfg.seed = 2;
    cfg.threads = worker_threads();
    return pairwise_wins(run_missing_experiment(cfg), "bayes", {"linear"}, 4, false);
}

CriterionResult run_oos()
{
    SyntheticTruth truth = generate_baseline(1301, 60, 40, 0.5, nullptr, 3);

    ModelConfig base = ModelConfig::desk_defaults();
    std::vector<CvRow> rows = loco_cv(truth.panel, truth.W, {"bayes", "smooth_svd", "bayes_nocov"},
                                      {3}, base, 71, worker_threads());

    std::map<std::string, CvRow> by_model;
    for (const CvRow& r : rows) by_model[r.model] = r;
    const CvRow& bayes = by_model.at("bayes");
    const CvRow& svd2 = by_model.at("smooth_svd");
    const CvRow& nocov = by_model.at("bayes_nocov");

    CriterionResult res;
    res.pass = bayes.rmse < svd2.rmse && bayes.rmse < nocov.rmse &&
               bayes.folds_failed == 0;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "loco rmse over %d folds: bayes %.4f vs smooth_svd %.4f, bayes_nocov %.4f "
                  "(%d/%d/%d folds failed)",
                  bayes.folds_used, bayes.rmse, svd2.rmse, nocov.rmse, bayes.folds_failed,
                  svd2.folds_failed, nocov.folds_failed);
    res.detail = buf;
    return res;
}

} // namespace acceptance
