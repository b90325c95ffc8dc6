#include "agecurves/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agecurves {

namespace {

// Index s with knots[s] <= x < knots[s+1], clamped so the right boundary maps
// into the last non-empty span.
int find_span(const Eigen::VectorXd& knots, int degree, int K, double x) {
    if (x >= knots[K]) return K - 1;
    if (x <= knots[degree]) return degree;
    int lo = degree, hi = K;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (x < knots[mid]) hi = mid; else lo = mid;
    }
    return lo;
}

// de Boor triangular recurrence: the degree+1 non-zero values at x.
void nonzero_row(const Eigen::VectorXd& knots, int degree, int span, double x,
                 Eigen::VectorXd& N) {
    N.setZero(degree + 1);
    Eigen::VectorXd left(degree + 1), right(degree + 1);
    N[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            double denom = right[r + 1] + left[j - r];
            double temp = denom != 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
}

SplineBasis finish_basis(SplineBasis b) {
    const int A = static_cast<int>(b.ages.size());
    b.raw.resize(A, b.K);
    b.raw.setZero();
    Eigen::VectorXd N;
    for (int a = 0; a < A; ++a) {
        int span = find_span(b.knots, b.degree, b.K, b.ages[a]);
        nonzero_row(b.knots, b.degree, span, b.ages[a], N);
        for (int r = 0; r <= b.degree; ++r) b.raw(a, span - b.degree + r) = N[r];
    }
    b.col_means = b.raw.colwise().mean();
    b.B = b.centered ? (b.raw.rowwise() - b.col_means).eval() : b.raw;
    b.D = second_difference_matrix(b.K);
    return b;
}

void check_ages_sorted(const Eigen::VectorXd& ages) {
    if (ages.size() == 0) throw std::invalid_argument("spline basis: empty age grid");
    for (int i = 1; i < ages.size(); ++i)
        if (ages[i] <= ages[i - 1])
            throw std::invalid_argument("spline basis: ages must be strictly ascending");
}

} // namespace

Eigen::MatrixXd second_difference_matrix(int K) {
    if (K < 3) throw std::invalid_argument("second_difference_matrix: need K >= 3");
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K - 2, K);
    for (int k = 0; k < K - 2; ++k) {
        D(k, k) = 1.0;
        D(k, k + 1) = -2.0;
        D(k, k + 2) = 1.0;
    }
    return D;
}

Eigen::MatrixXd penalty_matrix(const Eigen::MatrixXd& D, const Eigen::VectorXd& kappa) {
    if (kappa.size() != D.rows())
        throw std::invalid_argument("penalty_matrix: kappa length must equal D rows");
    return D.transpose() * kappa.asDiagonal() * D;
}

SplineBasis build_basis(const Eigen::VectorXd& ages,
                        const std::vector<double>& interior_knots,
                        double boundary_lo, double boundary_hi,
                        int degree, bool centered) {
    check_ages_sorted(ages);
    if (degree < 1) throw std::invalid_argument("spline basis: degree must be >= 1");
    if (boundary_hi <= boundary_lo)
        throw std::invalid_argument("spline basis: boundary_hi must exceed boundary_lo");
    if (ages.minCoeff() < boundary_lo || ages.maxCoeff() > boundary_hi)
        throw std::invalid_argument("spline basis: ages fall outside the knot span");
    double prev = boundary_lo;
    for (double t : interior_knots) {
        if (t <= prev || t >= boundary_hi)
            throw std::invalid_argument(
                "spline basis: interior knots must ascend strictly inside the boundary");
        prev = t;
    }

    SplineBasis b;
    b.ages = ages;
    b.degree = degree;
    b.centered = centered;
    b.K = static_cast<int>(interior_knots.size()) + degree + 1;
    if (b.K < 3) throw std::invalid_argument("spline basis: K must be at least 3");

    b.knots.resize(b.K + degree + 1);
    int idx = 0;
    for (int i = 0; i <= degree; ++i) b.knots[idx++] = boundary_lo;
    for (double t : interior_knots) b.knots[idx++] = t;
    for (int i = 0; i <= degree; ++i) b.knots[idx++] = boundary_hi;
    return finish_basis(std::move(b));
}

SplineBasis build_uniform_basis(const Eigen::VectorXd& ages, int n_interior,
                                int degree, bool centered) {
    check_ages_sorted(ages);
    if (degree < 1) throw std::invalid_argument("spline basis: degree must be >= 1");
    if (n_interior < 0) throw std::invalid_argument("spline basis: n_interior must be >= 0");
    double lo = ages.minCoeff(), hi = ages.maxCoeff();
    if (hi <= lo) throw std::invalid_argument("spline basis: degenerate age range");

    SplineBasis b;
    b.ages = ages;
    b.degree = degree;
    b.centered = centered;
    b.K = n_interior + degree + 1;
    if (b.K < 3) throw std::invalid_argument("spline basis: K must be at least 3");

    double h = (hi - lo) / (n_interior + 1);
    int n_knots = b.K + degree + 1;
    b.knots.resize(n_knots);
    for (int i = 0; i < n_knots; ++i) b.knots[i] = lo + (i - degree) * h;
    return finish_basis(std::move(b));
}

Eigen::RowVectorXd basis_row(const SplineBasis& basis, double x) {
    if (x < basis.knots[basis.degree] || x > basis.knots[basis.K])
        throw std::invalid_argument("basis_row: point outside the knot domain");
    Eigen::VectorXd N;
    int span = find_span(basis.knots, basis.degree, basis.K, x);
    nonzero_row(basis.knots, basis.degree, span, x, N);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(basis.K);
    for (int r = 0; r <= basis.degree; ++r) row[span - basis.degree + r] = N[r];
    if (basis.centered) row -= basis.col_means;
    return row;
}

} // namespace agecurves
