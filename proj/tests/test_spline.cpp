#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "agecurves/rng.hpp"
#include "agecurves/spline.hpp"

using namespace agecurves;

namespace {

Eigen::VectorXd grid(int n, double lo, double hi)
{
    return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

} // namespace

TEST_CASE("second difference matrix annihilates affine sequences exactly")
{
    const int K = 12;
    Eigen::MatrixXd D = second_difference_matrix(K);
    REQUIRE(D.rows() == K - 2);
    REQUIRE(D.cols() == K);

    Eigen::VectorXd f(K);
    for (int k = 0; k < K; ++k) f[k] = 1.25 + 0.5 * k;
    Eigen::VectorXd u = D * f;
    for (int k = 0; k < u.size(); ++k) CHECK(u[k] == 0.0);

    for (int k = 0; k < K; ++k) f[k] = -3.0 + 2.0 * k;
    u = D * f;
    for (int k = 0; k < u.size(); ++k) CHECK(u[k] == 0.0);
}

TEST_CASE("second difference rows hold the (1,-2,1) stencil")
{
    Eigen::MatrixXd D = second_difference_matrix(6);
    for (int r = 0; r < D.rows(); ++r)
        for (int c = 0; c < D.cols(); ++c) {
            double want = 0.0;
            if (c == r) want = 1.0;
            if (c == r + 1) want = -2.0;
            if (c == r + 2) want = 1.0;
            CHECK(D(r, c) == want);
        }
}

TEST_CASE("open-uniform basis partitions unity and matches K bookkeeping")
{
    Eigen::VectorXd ages = grid(40, 0.0, 90.0);
    SplineBasis basis = build_basis(ages, {20.0, 45.0, 70.0}, 0.0, 90.0, 3, false);
    CHECK(basis.K == 3 + 3 + 1);
    CHECK(basis.raw.rows() == 40);
    CHECK(basis.raw.cols() == basis.K);
    for (int i = 0; i < basis.raw.rows(); ++i) {
        CHECK(std::abs(basis.raw.row(i).sum() - 1.0) <= 1e-12);
        CHECK(basis.raw.row(i).minCoeff() >= 0.0);
    }
    CHECK((basis.B - basis.raw).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform extended basis partitions unity away from the data edges")
{
    Eigen::VectorXd ages = grid(60, 0.0, 59.0);
    SplineBasis basis = build_uniform_basis(ages, 10);
    CHECK(basis.K == 10 + 3 + 1);
    for (int i = 0; i < basis.raw.rows(); ++i)
        CHECK(std::abs(basis.raw.row(i).sum() - 1.0) <= 1e-12);
}

TEST_CASE("centered basis columns have zero mean and annihilate constants")
{
    Eigen::VectorXd ages = grid(35, 0.0, 80.0);
    SplineBasis basis = build_basis(ages, {25.0, 55.0}, 0.0, 80.0);
    REQUIRE(basis.centered);
    for (int k = 0; k < basis.K; ++k)
        CHECK(std::abs(basis.B.col(k).mean()) <= 1e-14);

    Eigen::VectorXd ones = Eigen::VectorXd::Ones(basis.K);
    CHECK((basis.B * ones).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("basis_row reproduces grid rows and interpolates between them")
{
    Eigen::VectorXd ages = grid(25, 2.0, 74.0);
    SplineBasis basis = build_basis(ages, {30.0, 50.0}, 0.0, 80.0);
    for (int i : {0, 7, 24}) {
        Eigen::RowVectorXd row = basis_row(basis, ages[i]);
        CHECK((row - basis.B.row(i)).cwiseAbs().maxCoeff() <= 1e-13);
    }

    SplineBasis rawb = build_basis(ages, {30.0, 50.0}, 0.0, 80.0, 3, false);
    Eigen::RowVectorXd mid = basis_row(rawb, 41.7);
    CHECK(std::abs(mid.sum() - 1.0) <= 1e-12);
}

TEST_CASE("penalty matrix equals D' diag(kappa) D and the quadratic form identity holds")
{
    Rng rng(31);
    const int K = 9;
    Eigen::MatrixXd D = second_difference_matrix(K);
    Eigen::VectorXd kappa(K - 2), f(K);
    for (int k = 0; k < K - 2; ++k) kappa[k] = rng.gamma(2.0, 1.0);
    for (int k = 0; k < K; ++k) f[k] = rng.normal(0.0, 2.0);

    Eigen::MatrixXd Omega = penalty_matrix(D, kappa);
    Eigen::MatrixXd direct = D.transpose() * kappa.asDiagonal() * D;
    CHECK((Omega - direct).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::VectorXd u = D * f;
    double quad = f.dot(Omega * f);
    double sum = (u.array().square() * kappa.array()).sum();
    CHECK(std::abs(quad - sum) <= 1e-10 * std::max(1.0, std::abs(sum)));
}

TEST_CASE("uniform basis reproduces affine functions with affine coefficients")
{
    Eigen::VectorXd ages = grid(50, 0.0, 49.0);
    SplineBasis basis = build_uniform_basis(ages, 8);
    Eigen::VectorXd y = 0.75 * ages.array() - 4.0;

    Eigen::VectorXd coef = basis.raw.colPivHouseholderQr().solve(y);
    CHECK((basis.raw * coef - y).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((basis.D * coef).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("bad knot configurations are rejected")
{
    Eigen::VectorXd ages = grid(10, 0.0, 9.0);
    CHECK_THROWS(build_basis(ages, {5.0}, 1.0, 9.0));  // age below boundary
    CHECK_THROWS(build_basis(ages, {9.5}, 0.0, 9.0));  // knot outside boundary
    CHECK_THROWS(build_basis(ages, {6.0, 3.0}, 0.0, 9.0));
}
