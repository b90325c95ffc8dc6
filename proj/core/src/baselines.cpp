#include "agecurves/baselines.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

namespace agecurves {

namespace {

std::vector<double> tau_grid(const GcvGrid& grid)
{
    if (grid.n < 1) throw std::invalid_argument("penalty grid needs at least one point");
    if (grid.n == 1) {
        if (grid.lo < 0.0) throw std::invalid_argument("penalty weight must be nonnegative");
        return {grid.lo};
    }
    if (!(grid.lo > 0.0) || !(grid.hi > grid.lo))
        throw std::invalid_argument("penalty grid bounds must satisfy 0 < lo < hi");
    std::vector<double> taus(static_cast<std::size_t>(grid.n));
    const double llo = std::log(grid.lo), lhi = std::log(grid.hi);
    for (int i = 0; i < grid.n; ++i)
        taus[static_cast<std::size_t>(i)] =
            std::exp(llo + (lhi - llo) * static_cast<double>(i) / (grid.n - 1));
    return taus;
}

struct PsplineSolve {
    Eigen::VectorXd coef, fitted;
    double trace_h = 0.0;
};

PsplineSolve solve_pspline(const Eigen::MatrixXd& B, const Eigen::MatrixXd& DtD,
                           const Eigen::VectorXd& y, double tau)
{
    PsplineSolve out;
    const Eigen::MatrixXd BtB = B.transpose() * B;
    if (tau <= 0.0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(B);
        out.coef = cod.solve(y);
        out.fitted = B * out.coef;
        out.trace_h = static_cast<double>(cod.rank());
        return out;
    }
    const Eigen::MatrixXd M = BtB + tau * DtD;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("pspline: singular penalized normal equations");
    out.coef = ldlt.solve(B.transpose() * y);
    out.fitted = B * out.coef;
    out.trace_h = ldlt.solve(BtB).trace();
    return out;
}

PsplineFit pspline_fit_rows(const Eigen::MatrixXd& B, const Eigen::MatrixXd& D,
                            const Eigen::VectorXd& y, const GcvGrid& grid)
{
    if (!y.allFinite()) throw std::invalid_argument("pspline: series has non-finite values");
    if (y.size() != B.rows()) throw std::invalid_argument("pspline: series/basis size mismatch");

    const Eigen::MatrixXd DtD = D.transpose() * D;
    const double n = static_cast<double>(y.size());

    PsplineFit best;
    double best_gcv = std::numeric_limits<double>::infinity();
    bool have = false;
    for (double tau : tau_grid(grid)) {
        PsplineSolve s = solve_pspline(B, DtD, y, tau);
        const double denom = n - s.trace_h;
        double gcv = denom > 0.0 ? n * (y - s.fitted).squaredNorm() / (denom * denom)
                                 : std::numeric_limits<double>::infinity();
        if (!have || gcv < best_gcv) {
            best_gcv = gcv;
            best.fitted = std::move(s.fitted);
            best.coef = std::move(s.coef);
            best.tau = tau;
            best.gcv = gcv;
            have = true;
        }
    }
    if (!have) throw std::runtime_error("pspline: no admissible penalty weight");
    return best;
}

int default_interior(int n_points)
{
    return std::max(4, std::min(n_points / 2, 30));
}

} // namespace

Eigen::MatrixXd svd_reconstruct(const AgeCountPanel& panel, int rank)
{
    const int N = panel.N(), A = panel.A();
    if (rank < 0 || rank > std::min(N, A))
        throw std::invalid_argument("svd rank must lie in [0, min(N, A)]");

    Eigen::MatrixXd L = panel.counts.array().log1p();
    const Eigen::VectorXd rowmean = L.rowwise().mean();
    if (rank == 0) return rowmean.replicate(1, A);

    Eigen::MatrixXd Ld = L.colwise() - rowmean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Ld, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd recon =
        svd.matrixU().leftCols(rank) *
        svd.singularValues().head(rank).asDiagonal() *
        svd.matrixV().leftCols(rank).transpose();
    return recon.colwise() + rowmean;
}

PsplineFit pspline_smooth_gcv(const Eigen::VectorXd& series,
                              const SplineBasis& basis, const GcvGrid& grid)
{
    return pspline_fit_rows(basis.B, basis.D, series, grid);
}

Eigen::VectorXd two_stage_predict(const AgeCountPanel& train,
                                  const CovariateMatrix& W_train,
                                  const Eigen::VectorXd& w_new, int rank,
                                  bool smooth_first, const GcvGrid& grid)
{
    const int N = train.N(), A = train.A();
    if (rank < 1 || rank > std::min(N, A))
        throw std::invalid_argument("svd rank must lie in [1, min(N, A)]");
    if (W_train.values.rows() != N)
        throw std::invalid_argument("covariate rows do not match the panel");
    if (w_new.size() != W_train.values.cols())
        throw std::invalid_argument("held-out covariate row has the wrong length");

    Eigen::MatrixXd L = train.counts.array().log1p();
    const Eigen::VectorXd alpha_hat = L.rowwise().mean();
    Eigen::MatrixXd Ld = L.colwise() - alpha_hat;

    if (smooth_first) {
        SplineBasis sb = build_uniform_basis(train.ages, default_interior(A));
        for (int i = 0; i < N; ++i)
            Ld.row(i) = pspline_fit_rows(sb.B, sb.D, Ld.row(i).transpose(), grid)
                            .fitted.transpose();
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(Ld, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd phi = svd.matrixV().leftCols(rank);
    Eigen::MatrixXd lambda = svd.matrixU().leftCols(rank) *
                             svd.singularValues().head(rank).asDiagonal();

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(W_train.values);
    if (cod.rank() < W_train.values.cols())
        std::cerr << "two_stage_predict: rank-deficient design, using the minimum-norm "
                     "least-squares solution\n";
    Eigen::VectorXd delta_hat = cod.solve(alpha_hat);
    Eigen::MatrixXd beta_hat = cod.solve(lambda); // R x rank

    return Eigen::VectorXd::Constant(A, w_new.dot(delta_hat)) +
           phi * (beta_hat.transpose() * w_new);
}

Eigen::VectorXd interpolate_missing(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& series,
                                    const BoolVec& observed, InterpMethod method,
                                    int n_interior, const GcvGrid& grid)
{
    const Eigen::Index A = x.size();
    if (series.size() != A || observed.size() != A)
        throw std::invalid_argument("interpolate_missing: length mismatch");
    std::vector<Eigen::Index> obs;
    for (Eigen::Index i = 0; i < A; ++i)
        if (observed(i)) obs.push_back(i);
    if (obs.size() < 2)
        throw std::invalid_argument("interpolate_missing: need at least two observed points");
    if (static_cast<Eigen::Index>(obs.size()) == A) return series;

    Eigen::VectorXd out = series;
    if (method == InterpMethod::linear) {
        std::size_t seg = 0;
        for (Eigen::Index i = 0; i < A; ++i) {
            if (observed(i)) continue;
            if (i < obs.front()) {
                out(i) = series(obs.front());
            } else if (i > obs.back()) {
                out(i) = series(obs.back());
            } else {
                while (obs[seg + 1] < i) ++seg;
                const Eigen::Index a = obs[seg], b = obs[seg + 1];
                const double t = (x(i) - x(a)) / (x(b) - x(a));
                out(i) = (1.0 - t) * series(a) + t * series(b);
            }
        }
        return out;
    }

    const int ni = n_interior < 0 ? default_interior(static_cast<int>(obs.size())) : n_interior;
    SplineBasis sb = build_uniform_basis(x, ni);
    Eigen::MatrixXd Bobs(static_cast<Eigen::Index>(obs.size()), sb.K);
    Eigen::VectorXd yobs(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t r = 0; r < obs.size(); ++r) {
        Bobs.row(static_cast<Eigen::Index>(r)) = sb.B.row(obs[r]);
        yobs(static_cast<Eigen::Index>(r)) = series(obs[r]);
    }
    PsplineFit fit = pspline_fit_rows(Bobs, sb.D, yobs, grid);
    Eigen::VectorXd full = sb.B * fit.coef;
    for (Eigen::Index i = 0; i < A; ++i)
        if (!observed(i)) out(i) = full(i);
    return out;
}

} // namespace agecurves
