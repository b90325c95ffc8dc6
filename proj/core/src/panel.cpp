#include "agecurves/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace agecurves {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_number(const std::string& s, const std::string& what, int row) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw std::invalid_argument("counts csv row " + std::to_string(row) + ": bad " + what +
                                    " value '" + s + "'");
    }
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// Counts are integers; print them exactly no matter how large.
std::string format_count(double v) {
    char buf[40];
    if (std::floor(v) == v && std::abs(v) < 9.2e18)
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    else
        std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool is_binary_column(const Eigen::VectorXd& col) {
    for (int i = 0; i < col.size(); ++i)
        if (col[i] != 0.0 && col[i] != 1.0) return false;
    return true;
}

} // namespace

double AgeCountPanel::row_total(int i) const {
    double t = 0.0;
    for (int x = 0; x < A(); ++x)
        if (observed(i, x)) t += counts(i, x);
    return t;
}

Eigen::VectorXd CovariateMatrix::to_original(const Eigen::VectorXd& coef) const {
    if (coef.size() != R()) throw std::invalid_argument("to_original: wrong coefficient length");
    Eigen::VectorXd out(coef.size());
    double intercept_shift = 0.0;
    for (int r = 0; r < coef.size(); ++r) {
        out[r] = coef[r] / scale[r];
        if (r > 0) intercept_shift += coef[r] * center[r] / scale[r];
    }
    out[0] = coef[0] - intercept_shift;
    return out;
}

Eigen::VectorXd CovariateMatrix::standardize_row(const Eigen::VectorXd& raw_row) const {
    if (raw_row.size() != R()) throw std::invalid_argument("standardize_row: wrong length");
    return (raw_row - center).cwiseQuotient(scale);
}

CovariateMatrix CovariateMatrix::select_rows(const std::vector<int>& idx) const {
    CovariateMatrix out = *this;
    out.raw.resize(idx.size(), raw.cols());
    out.values.resize(idx.size(), values.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
        out.raw.row(k) = raw.row(idx[k]);
        out.values.row(k) = values.row(idx[k]);
    }
    return out;
}

CovariateMatrix CovariateMatrix::intercept_only() const {
    CovariateMatrix out;
    out.names = {"intercept"};
    out.raw = Eigen::MatrixXd::Ones(raw.rows(), 1);
    out.values = out.raw;
    out.center = Eigen::VectorXd::Zero(1);
    out.scale = Eigen::VectorXd::Ones(1);
    out.standardized = false;
    return out;
}

CovariateMatrix make_design(const Eigen::MatrixXd& base,
                            const std::vector<std::string>& base_names,
                            const std::vector<std::string>& quad_names,
                            bool standardize) {
    const int N = static_cast<int>(base.rows());
    const int B = static_cast<int>(base.cols());
    if (static_cast<int>(base_names.size()) != B)
        throw std::invalid_argument("make_design: name count does not match columns");

    std::vector<int> quad_src;
    for (const auto& qn : quad_names) {
        auto it = std::find(base_names.begin(), base_names.end(), qn);
        if (it == base_names.end())
            throw std::invalid_argument("make_design: unknown quadratic column '" + qn + "'");
        quad_src.push_back(static_cast<int>(it - base_names.begin()));
    }

    CovariateMatrix cov;
    const int R = 1 + B + static_cast<int>(quad_src.size());
    cov.raw.resize(N, R);
    cov.raw.col(0).setOnes();
    cov.names.push_back("intercept");
    for (int j = 0; j < B; ++j) {
        cov.raw.col(1 + j) = base.col(j);
        cov.names.push_back(base_names[j]);
    }
    for (size_t k = 0; k < quad_src.size(); ++k) {
        int dst = 1 + B + static_cast<int>(k);
        cov.raw.col(dst) = base.col(quad_src[k]).array().square();
        cov.names.push_back(base_names[quad_src[k]] + "^2");
        cov.quad_pairs.emplace_back(1 + quad_src[k], dst);
    }
    return restandardize(cov, standardize);
}

CovariateMatrix restandardize(const CovariateMatrix& cov, bool standardize) {
    CovariateMatrix out = cov;
    const int N = static_cast<int>(out.raw.rows());
    const int R = static_cast<int>(out.raw.cols());
    out.center = Eigen::VectorXd::Zero(R);
    out.scale = Eigen::VectorXd::Ones(R);
    out.values = out.raw;
    out.standardized = standardize;
    if (!standardize || N < 2) {
        out.standardized = false;
        return out;
    }
    for (int r = 1; r < R; ++r) {
        if (is_binary_column(out.raw.col(r))) continue;
        double m = out.raw.col(r).mean();
        double sd = std::sqrt((out.raw.col(r).array() - m).square().sum() / (N - 1));
        if (sd <= 0.0) continue;
        out.center[r] = m;
        out.scale[r] = sd;
        out.values.col(r) = (out.raw.col(r).array() - m) / sd;
    }
    return out;
}

AgeCountPanel load_counts_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("counts csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("counts csv: empty file");
    auto header = split_csv(line);
    bool has_offset = false;
    if (header.size() == 4 && header[3] == "offset") has_offset = true;
    else if (header.size() != 3)
        throw std::invalid_argument("counts csv: header must be subpop,age,count[,offset]");
    if (header[0] != "subpop" || header[1] != "age" || header[2] != "count")
        throw std::invalid_argument("counts csv: header must be subpop,age,count[,offset]");

    struct Cell { double count, offset; };
    std::vector<std::string> subpops;
    std::map<std::string, int> subpop_index;
    std::set<double> age_set;
    std::map<std::pair<int, double>, Cell> cells;

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto parts = split_csv(line);
        if (parts.size() != header.size())
            throw std::invalid_argument("counts csv row " + std::to_string(row) +
                                        ": wrong field count");
        const std::string& id = parts[0];
        if (id.empty())
            throw std::invalid_argument("counts csv row " + std::to_string(row) + ": empty subpop");
        double age = parse_number(parts[1], "age", row);
        double count = parse_number(parts[2], "count", row);
        if (count < 0.0 || std::floor(count) != count)
            throw std::invalid_argument("counts csv row " + std::to_string(row) +
                                        ": count must be a nonnegative integer");
        double offset = has_offset ? parse_number(parts[3], "offset", row) : 0.0;

        auto [it, inserted] = subpop_index.try_emplace(id, static_cast<int>(subpops.size()));
        if (inserted) subpops.push_back(id);
        auto key = std::make_pair(it->second, age);
        if (!cells.emplace(key, Cell{count, offset}).second)
            throw std::invalid_argument("counts csv row " + std::to_string(row) +
                                        ": duplicate cell " + id + "," + parts[1]);
        age_set.insert(age);
    }
    if (subpops.empty()) throw std::invalid_argument("counts csv: no data rows");

    AgeCountPanel p;
    p.subpop_ids = subpops;
    p.ages.resize(static_cast<int>(age_set.size()));
    {
        int k = 0;
        for (double a : age_set) p.ages[k++] = a;
    }
    const int N = static_cast<int>(subpops.size());
    const int A = static_cast<int>(p.ages.size());
    p.counts = Eigen::MatrixXd::Zero(N, A);
    p.offsets = Eigen::MatrixXd::Zero(N, A);
    p.observed = BoolGrid::Constant(N, A, false);
    std::map<double, int> age_idx;
    for (int x = 0; x < A; ++x) age_idx[p.ages[x]] = x;
    for (const auto& [key, cell] : cells) {
        int i = key.first, x = age_idx[key.second];
        p.counts(i, x) = cell.count;
        p.offsets(i, x) = cell.offset;
        p.observed(i, x) = true;
    }
    return p;
}

void write_counts_csv(const AgeCountPanel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("counts csv: cannot write " + path);
    out << "subpop,age,count,offset\n";
    for (int i = 0; i < panel.N(); ++i)
        for (int x = 0; x < panel.A(); ++x)
            if (panel.observed(i, x))
                out << panel.subpop_ids[i] << ',' << format_number(panel.ages[x]) << ','
                    << format_count(panel.counts(i, x)) << ','
                    << format_number(panel.offsets(i, x)) << '\n';
}

CovariateMatrix load_covariates_csv(const std::string& path,
                                    const std::vector<std::string>& subpop_ids,
                                    const std::vector<std::string>& quad_names,
                                    bool standardize) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("covariates csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("covariates csv: empty file");
    auto header = split_csv(line);
    if (header.empty() || header[0] != "subpop")
        throw std::invalid_argument("covariates csv: first column must be subpop");
    std::vector<std::string> names(header.begin() + 1, header.end());

    std::map<std::string, Eigen::VectorXd> rows;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto parts = split_csv(line);
        if (parts.size() != header.size())
            throw std::invalid_argument("covariates csv row " + std::to_string(row) +
                                        ": wrong field count");
        Eigen::VectorXd v(static_cast<int>(names.size()));
        for (size_t j = 1; j < parts.size(); ++j)
            v[static_cast<int>(j - 1)] = parse_number(parts[j], "covariate", row);
        if (!rows.emplace(parts[0], v).second)
            throw std::invalid_argument("covariates csv row " + std::to_string(row) +
                                        ": duplicate subpop " + parts[0]);
    }

    Eigen::MatrixXd base(static_cast<int>(subpop_ids.size()), static_cast<int>(names.size()));
    for (size_t i = 0; i < subpop_ids.size(); ++i) {
        auto it = rows.find(subpop_ids[i]);
        if (it == rows.end())
            throw std::invalid_argument("covariates csv: missing subpop " + subpop_ids[i]);
        base.row(static_cast<int>(i)) = it->second;
    }
    return make_design(base, names, quad_names, standardize);
}

AgeCountPanel filter_rows(const AgeCountPanel& panel, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("filter_rows: empty selection");
    AgeCountPanel out;
    out.ages = panel.ages;
    const int A = panel.A();
    out.counts.resize(static_cast<int>(idx.size()), A);
    out.offsets.resize(static_cast<int>(idx.size()), A);
    out.observed.resize(static_cast<int>(idx.size()), A);
    for (size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= panel.N())
            throw std::invalid_argument("filter_rows: index out of range");
        out.subpop_ids.push_back(panel.subpop_ids[idx[k]]);
        out.counts.row(static_cast<int>(k)) = panel.counts.row(idx[k]);
        out.offsets.row(static_cast<int>(k)) = panel.offsets.row(idx[k]);
        out.observed.row(static_cast<int>(k)) = panel.observed.row(idx[k]);
    }
    return out;
}

AgeCountPanel filter_small_subpops(const AgeCountPanel& panel, double min_total,
                                   std::vector<int>* kept) {
    std::vector<int> idx;
    for (int i = 0; i < panel.N(); ++i)
        if (panel.row_total(i) >= min_total) idx.push_back(i);
    if (idx.empty())
        throw std::invalid_argument("filter_small_subpops: no subpopulations pass the threshold");
    if (kept) *kept = idx;
    return filter_rows(panel, idx);
}

} // namespace agecurves
