#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace agecurves {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Rectangular subpopulation-by-age grid of event counts. Missing cells are
/// tracked by `observed`, never by sentinel values. Counts are stored as
/// doubles internally but are validated to be nonnegative integers on load.
struct AgeCountPanel {
    std::vector<std::string> subpop_ids; // N, order of first appearance
    Eigen::VectorXd ages;                // A, ascending
    Eigen::MatrixXd counts;              // N x A, zero where unobserved
    Eigen::MatrixXd offsets;             // N x A, zero when absent
    BoolGrid observed;                   // N x A

    int N() const { return static_cast<int>(counts.rows()); }
    int A() const { return static_cast<int>(counts.cols()); }

    /// Total observed count of one subpopulation.
    double row_total(int i) const;
};

/// Design matrix for the hierarchical regressions. `raw` holds original-scale
/// values (quadratic columns are exact squares of their linear source there);
/// `values` is the design handed to the sampler, centered/scaled when
/// `standardized`. Column 0 is always the intercept.
struct CovariateMatrix {
    std::vector<std::string> names;              // R
    Eigen::MatrixXd raw;                         // N x R
    Eigen::MatrixXd values;                      // N x R
    std::vector<std::pair<int, int>> quad_pairs; // (linear column, quadratic column)
    Eigen::VectorXd center, scale;               // identity (0, 1) for untouched columns
    bool standardized = false;

    int R() const { return static_cast<int>(values.cols()); }

    /// Map a coefficient vector for `values` back to the original scale:
    /// slopes divide by the column scale, the intercept absorbs the centers.
    Eigen::VectorXd to_original(const Eigen::VectorXd& coef) const;

    /// Apply the stored centering/scaling to a raw covariate row.
    Eigen::VectorXd standardize_row(const Eigen::VectorXd& raw_row) const;

    /// Row subset in the given order.
    CovariateMatrix select_rows(const std::vector<int>& idx) const;

    /// Intercept-only copy (the no-covariates ablation).
    CovariateMatrix intercept_only() const;
};

/// Build a design from base columns (no intercept): prepends the intercept,
/// appends quadratic companions for the named columns, then optionally
/// centers/scales continuous columns. Binary and intercept columns are left
/// untouched.
CovariateMatrix make_design(const Eigen::MatrixXd& base,
                            const std::vector<std::string>& base_names,
                            const std::vector<std::string>& quad_names,
                            bool standardize);

/// Re-derive `values` (and center/scale) from `raw` for a given flag; used to
/// re-standardize on training rows only.
CovariateMatrix restandardize(const CovariateMatrix& cov, bool standardize);

/// CSV with header `subpop,age,count[,offset]`, one row per observed cell.
/// Absent cells become missing; the age grid is the sorted union.
AgeCountPanel load_counts_csv(const std::string& path);

/// Inverse of load_counts_csv for observed cells (offsets column included).
void write_counts_csv(const AgeCountPanel& panel, const std::string& path);

/// CSV keyed by `subpop` with numeric covariate columns; rows are reordered to
/// match subpop_ids and the design is assembled via make_design.
CovariateMatrix load_covariates_csv(const std::string& path,
                                    const std::vector<std::string>& subpop_ids,
                                    const std::vector<std::string>& quad_names,
                                    bool standardize);

/// Row subset of a panel in the given order.
AgeCountPanel filter_rows(const AgeCountPanel& panel, const std::vector<int>& idx);

/// Drop subpopulations whose total observed count falls below min_total.
/// kept (optional) receives the retained row indices.
AgeCountPanel filter_small_subpops(const AgeCountPanel& panel, double min_total,
                                   std::vector<int>* kept = nullptr);

} // namespace agecurves
