#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agecurves/evaluation.hpp"
#include "agecurves/synthetic.hpp"

using namespace agecurves;

namespace {

ExperimentConfig tiny_experiment(const std::string& variant)
{
    ExperimentConfig cfg;
    cfg.replicates = 2;
    cfg.N = 10;
    cfg.A = 16;
    cfg.noise_sigma2 = 0.5;
    cfg.variant = variant;
    cfg.n_factors = 2;
    cfg.seed = 21;
    cfg.svd_rank = 2;
    cfg.model = ModelConfig::desk_defaults();
    cfg.model.Q = 2;
    cfg.model.mcmc.burnin = 60;
    cfg.model.mcmc.draws = 60;
    cfg.model.mcmc.thin = 3;
    return cfg;
}

std::string report_to_string(const ScoreReport& r)
{
    std::ostringstream ss;
    for (const auto& row : r.rows) {
        ss << row.model << '|' << row.replicate << '|' << row.rmse << '|' << row.mae << '|'
           << row.mape << '|' << row.corr << '|' << row.n_cells << '|' << row.failed << '\n';
    }
    return ss.str();
}

} // namespace

TEST_CASE("score matches hand-computed metrics and excludes zero-truth cells from MAPE")
{
    Eigen::MatrixXd truth(2, 2), pred(2, 2);
    truth << 1.0, 2.0, 0.0, 4.0;
    pred << 1.5, 1.0, 3.0, 5.0;

    ScoreRow r = score(pred, truth);
    CHECK(std::abs(r.rmse - std::sqrt((0.25 + 1.0 + 9.0 + 1.0) / 4.0)) <= 1e-12);
    CHECK(std::abs(r.mae - (0.5 + 1.0 + 3.0 + 1.0) / 4.0) <= 1e-12);
    // zero-truth cell dropped: mean of |0.5|/1, |1|/2, |1|/4 in percent
    CHECK(std::abs(r.mape - 100.0 * (0.5 + 0.5 + 0.25) / 3.0) <= 1e-10);
    CHECK(r.n_cells == 4);
    CHECK(r.mape_excluded == 1);
    CHECK(!r.failed);
}

TEST_CASE("score is exact on perfect predictions and honors masks")
{
    Eigen::MatrixXd truth(2, 3);
    truth << 1, 2, 3, 4, 5, 6;
    ScoreRow r = score(truth, truth);
    CHECK(r.rmse == 0.0);
    CHECK(r.corr == 1.0);

    BoolGrid mask = BoolGrid::Constant(2, 3, false);
    mask(0, 0) = true;
    mask(1, 2) = true;
    Eigen::MatrixXd pred = truth;
    pred(0, 1) = 100.0; // outside the mask, must not count
    pred(0, 0) = 2.0;
    ScoreRow m = score(pred, truth, &mask);
    CHECK(m.n_cells == 2);
    CHECK(std::abs(m.rmse - std::sqrt(0.5)) <= 1e-12);

    BoolGrid empty = BoolGrid::Constant(2, 3, false);
    CHECK_THROWS(score(pred, truth, &empty));
}

TEST_CASE("in-sample experiment is deterministic and thread-count invariant")
{
    ExperimentConfig cfg = tiny_experiment("baseline");
    cfg.threads = 1;
    ScoreReport a = run_insample_experiment(cfg);
    cfg.threads = 4;
    ScoreReport b = run_insample_experiment(cfg);
    CHECK(report_to_string(a) == report_to_string(b));

    REQUIRE(a.rows.size() == 6); // 3 models x 2 replicates
    for (const auto& row : a.rows) {
        CHECK(!row.failed);
        CHECK(std::isfinite(row.rmse));
        CHECK(row.n_cells == 10 * 16);
    }
}

TEST_CASE("missing-data experiment scores only the dropped cells")
{
    ExperimentConfig cfg = tiny_experiment("baseline");
    ScoreReport r = run_missing_experiment(cfg);
    REQUIRE(!r.rows.empty());
    for (const auto& row : r.rows) {
        CHECK(!row.failed);
        CHECK(row.n_cells == 10); // one dropped cell per curve
    }
}

TEST_CASE("out-of-sample experiment covers all four predictors")
{
    ExperimentConfig cfg = tiny_experiment("baseline");
    cfg.N = 12;
    cfg.holdout_fraction = 0.25;
    ScoreReport r = run_oos_experiment(cfg);

    int bayes = 0, nocov = 0, svd = 0, smooth = 0;
    for (const auto& row : r.rows) {
        if (row.replicate < 0) continue; // mean rows
        CHECK(!row.failed);
        bayes += row.model == "bayes";
        nocov += row.model == "bayes_nocov";
        svd += row.model == "svd";
        smooth += row.model == "smooth_svd";
        CHECK(row.n_cells == 3 * 16); // 25% of 12 rows held out
    }
    CHECK(bayes == 2);
    CHECK(nocov == 2);
    CHECK(svd == 2);
    CHECK(smooth == 2);
}

TEST_CASE("model_means skips failed rows and counts the rest")
{
    ScoreReport r;
    ScoreRow ok1{"m", 0, 2.0, 1.0, 10.0, 0.9, 4, 0, false, ""};
    ScoreRow ok2{"m", 1, 4.0, 3.0, 20.0, 0.7, 4, 0, false, ""};
    ScoreRow bad{"m", 2, std::nan(""), std::nan(""), std::nan(""), std::nan(""), 0, 0, true,
                 "boom"};
    r.rows = {ok1, ok2, bad};
    auto means = r.model_means();
    REQUIRE(means.size() == 1);
    CHECK(std::abs(means[0].rmse - 3.0) <= 1e-12);
    CHECK(std::abs(means[0].corr - 0.8) <= 1e-12);
    CHECK(means[0].replicate == 2); // surviving replicate count
}

TEST_CASE("leave-one-curve-out table is deterministic and complete")
{
    SyntheticTruth t = generate_baseline(33, 8, 16, 0.5, nullptr, 2);
    ModelConfig base = ModelConfig::desk_defaults();
    base.Q = 2;
    base.mcmc.burnin = 40;
    base.mcmc.draws = 40;
    base.mcmc.thin = 4;

    std::vector<CvRow> a =
        loco_cv(t.panel, t.W, {"svd", "smooth_svd"}, {1, 2}, base, 7, 1);
    std::vector<CvRow> b =
        loco_cv(t.panel, t.W, {"svd", "smooth_svd"}, {1, 2}, base, 7, 3);

    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].model == b[i].model);
        CHECK(a[i].Q == b[i].Q);
        CHECK(a[i].rmse == b[i].rmse);
        CHECK(a[i].folds_used == 8);
        CHECK(a[i].folds_failed == 0);
    }
}

TEST_CASE("score csv writer emits per-replicate rows plus model means")
{
    ExperimentConfig cfg = tiny_experiment("baseline");
    ScoreReport r = run_insample_experiment(cfg);
    const std::string path =
        (std::filesystem::temp_directory_path() / "agecurves_scores_test.csv").string();
    write_score_csv(r, path);

    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "model,replicate,rmse,mae,mape,corr,n_cells,mape_excluded,failed,error");
    int data = 0, mean = 0;
    while (std::getline(is, line)) {
        if (line.find(",mean,") != std::string::npos) ++mean;
        else ++data;
    }
    CHECK(data == 6);
    CHECK(mean == 3);
    std::remove(path.c_str());
}
