#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "agecurves/panel.hpp"
#include "agecurves/rng.hpp"

using namespace agecurves;

namespace {

std::string temp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

AgeCountPanel toy_panel()
{
    AgeCountPanel p;
    p.subpop_ids = {"a", "b", "c"};
    p.ages = Eigen::VectorXd::LinSpaced(4, 0.0, 3.0);
    p.counts.setZero(3, 4);
    p.offsets.setZero(3, 4);
    p.observed.setConstant(3, 4, true);
    p.counts << 5, 8, 0, 2, 100, 40, 7, 9, 1, 2, 3, 4;
    p.observed(1, 2) = false;
    p.counts(1, 2) = 0;
    p.offsets(0, 1) = 0.5;
    return p;
}

} // namespace

TEST_CASE("counts CSV round trip preserves grid, gaps, offsets and huge counts")
{
    AgeCountPanel p = toy_panel();
    p.counts(2, 3) = 123456789012345.0; // integral, beyond float32 and %.10g

    const std::string path = temp_path("agecurves_counts_rt.csv");
    write_counts_csv(p, path);
    AgeCountPanel q = load_counts_csv(path);

    REQUIRE(q.N() == p.N());
    REQUIRE(q.A() == p.A());
    CHECK(q.subpop_ids == p.subpop_ids);
    CHECK((q.ages - p.ages).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < p.N(); ++i)
        for (int x = 0; x < p.A(); ++x) {
            CHECK(q.observed(i, x) == p.observed(i, x));
            CHECK(q.counts(i, x) == p.counts(i, x));
            CHECK(q.offsets(i, x) == p.offsets(i, x));
        }
    std::remove(path.c_str());
}

TEST_CASE("count loading validates nonnegative integers")
{
    const std::string path = temp_path("agecurves_counts_bad.csv");
    {
        std::ofstream os(path);
        os << "subpop,age,count\na,0,3.5\n";
    }
    CHECK_THROWS(load_counts_csv(path));
    {
        std::ofstream os(path);
        os << "subpop,age,count\na,0,-2\n";
    }
    CHECK_THROWS(load_counts_csv(path));
    std::remove(path.c_str());
}

TEST_CASE("make_design prepends the intercept and appends quadratic companions")
{
    Eigen::MatrixXd base(5, 2);
    base << 1.0, 0.0, 2.0, 1.0, 3.0, 0.0, 4.0, 1.0, 5.0, 0.0;
    CovariateMatrix W = make_design(base, {"inc", "urban"}, {"inc"}, true);

    REQUIRE(W.R() == 4);
    CHECK(W.names[0] == "intercept");
    CHECK(W.names[1] == "inc");
    CHECK(W.names[2] == "urban");
    CHECK(W.names[3] == "inc^2");
    REQUIRE(W.quad_pairs.size() == 1);
    CHECK(W.quad_pairs[0].first == 1);
    CHECK(W.quad_pairs[0].second == 3);

    for (int i = 0; i < 5; ++i) {
        CHECK(W.raw(i, 0) == 1.0);
        CHECK(W.raw(i, 3) == W.raw(i, 1) * W.raw(i, 1));
    }

    // continuous columns standardized with sd over N-1, binary and intercept untouched
    CHECK(std::abs(W.values.col(1).mean()) <= 1e-14);
    double sd = std::sqrt(W.values.col(1).squaredNorm() / 4.0);
    CHECK(std::abs(sd - 1.0) <= 1e-12);
    CHECK((W.values.col(2) - W.raw.col(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((W.values.col(0) - W.raw.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("to_original keeps the fitted predictor invariant")
{
    Rng rng(7);
    Eigen::MatrixXd base(8, 3);
    for (int i = 0; i < base.rows(); ++i)
        for (int j = 0; j < base.cols(); ++j) base(i, j) = rng.normal(2.0, 3.0);
    CovariateMatrix W = make_design(base, {"u", "v", "w"}, {"v"}, true);

    Eigen::VectorXd coef(W.R());
    for (int r = 0; r < coef.size(); ++r) coef[r] = rng.normal();
    Eigen::VectorXd orig = W.to_original(coef);

    for (int i = 0; i < base.rows(); ++i) {
        double a = W.values.row(i).dot(coef);
        double b = W.raw.row(i).dot(orig);
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("standardize_row matches the stored standardized rows")
{
    Eigen::MatrixXd base(6, 2);
    Rng rng(9);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) base(i, j) = rng.normal(0.0, 5.0);
    CovariateMatrix W = make_design(base, {"p", "q"}, {}, true);
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd v = W.standardize_row(W.raw.row(i).transpose());
        CHECK((v.transpose() - W.values.row(i)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("restandardize on a row subset recenters on that subset only")
{
    Eigen::MatrixXd base(10, 1);
    for (int i = 0; i < 10; ++i) base(i, 0) = i;
    CovariateMatrix W = make_design(base, {"x"}, {}, true);
    CovariateMatrix sub = W.select_rows({0, 1, 2, 3});
    CovariateMatrix re = restandardize(sub, true);
    CHECK(std::abs(re.values.col(1).mean()) <= 1e-14);
    CHECK(std::abs(re.center[1] - 1.5) <= 1e-14);
    // raw rows are untouched by restandardization
    CHECK((re.raw - sub.raw).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("intercept_only strips every covariate but keeps rows")
{
    Eigen::MatrixXd base(4, 2);
    base.setRandom();
    CovariateMatrix W = make_design(base, {"x", "y"}, {"x"}, true);
    CovariateMatrix I0 = W.intercept_only();
    CHECK(I0.R() == 1);
    CHECK(I0.names[0] == "intercept");
    CHECK(I0.values.rows() == 4);
    CHECK((I0.values.col(0).array() == 1.0).all());
    CHECK(I0.quad_pairs.empty());
}

TEST_CASE("covariates CSV loads rows keyed and reordered by subpop id")
{
    const std::string path = temp_path("agecurves_cov_rt.csv");
    {
        std::ofstream os(path);
        os << "subpop,inc,urban\n";
        os << "b,2.5,1\n";
        os << "a,1.5,0\n";
        os << "c,3.5,1\n";
    }
    CovariateMatrix W = load_covariates_csv(path, {"a", "b", "c"}, {}, false);
    REQUIRE(W.R() == 3);
    CHECK(W.raw(0, 1) == 1.5);
    CHECK(W.raw(1, 1) == 2.5);
    CHECK(W.raw(2, 1) == 3.5);

    CHECK_THROWS(load_covariates_csv(path, {"a", "zz"}, {}, false));
    std::remove(path.c_str());
}

TEST_CASE("filter_rows keeps the requested order and filter_small_subpops thresholds totals")
{
    AgeCountPanel p = toy_panel();
    AgeCountPanel sub = filter_rows(p, {2, 0});
    REQUIRE(sub.N() == 2);
    CHECK(sub.subpop_ids[0] == "c");
    CHECK(sub.subpop_ids[1] == "a");
    CHECK(sub.counts(1, 1) == 8.0);
    CHECK_THROWS(filter_rows(p, {}));
    CHECK_THROWS(filter_rows(p, {5}));

    // totals: a=15, b=149, c=10
    AgeCountPanel big = filter_small_subpops(p, 12.0);
    REQUIRE(big.N() == 2);
    CHECK(big.subpop_ids[0] == "a");
    CHECK(big.subpop_ids[1] == "b");
}
