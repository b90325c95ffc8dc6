#include "agecurves/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "agecurves/config.hpp"
#include "agecurves/spline.hpp"

namespace agecurves {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'C', 'V', 'D', 'R', 'W', '1'};

void put_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is)
{
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_doubles(std::ostream& os, const double* p, std::size_t n)
{
    static_assert(sizeof(double) == 8);
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void get_doubles(std::istream& is, double* p, std::size_t n)
{
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
}

void put_mat(std::ostream& os, const Eigen::MatrixXd& m)
{
    put_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
}

void put_vec(std::ostream& os, const Eigen::VectorXd& v)
{
    put_doubles(os, v.data(), static_cast<std::size_t>(v.size()));
}

void get_mat(std::istream& is, Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols)
{
    m.resize(rows, cols);
    get_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
}

void get_vec(std::istream& is, Eigen::VectorXd& v, Eigen::Index n)
{
    v.resize(n);
    get_doubles(is, v.data(), static_cast<std::size_t>(v.size()));
}

void put_state(std::ostream& os, const ModelState& s)
{
    put_mat(os, s.z);
    put_vec(os, s.alpha);
    put_mat(os, s.f);
    put_mat(os, s.phi);
    put_mat(os, s.lambda);
    put_mat(os, s.gamma);
    put_mat(os, s.beta);
    put_vec(os, s.delta);
    put_doubles(os, &s.sigma2, 1);
    put_doubles(os, &s.sigma2_alpha, 1);
    put_vec(os, s.sigma2_lambda);
    put_vec(os, s.tau);
    put_mat(os, s.kappa);
    put_mat(os, s.hs_beta.rho);
    put_mat(os, s.hs_beta.nu);
    put_vec(os, s.hs_beta.xi);
    put_vec(os, s.hs_beta.zeta);
    put_mat(os, s.hs_delta.rho);
    put_mat(os, s.hs_delta.nu);
    put_vec(os, s.hs_delta.xi);
    put_vec(os, s.hs_delta.zeta);
}

void get_state(std::istream& is, ModelState& s, Eigen::Index N, Eigen::Index A,
               Eigen::Index K, Eigen::Index Q, Eigen::Index R)
{
    get_mat(is, s.z, N, A);
    get_vec(is, s.alpha, N);
    get_mat(is, s.f, K, Q);
    get_mat(is, s.phi, A, Q);
    get_mat(is, s.lambda, N, Q);
    get_mat(is, s.gamma, N, Q);
    get_mat(is, s.beta, R, Q);
    get_vec(is, s.delta, R);
    get_doubles(is, &s.sigma2, 1);
    get_doubles(is, &s.sigma2_alpha, 1);
    get_vec(is, s.sigma2_lambda, Q);
    get_vec(is, s.tau, Q);
    get_mat(is, s.kappa, K - 2, Q);
    get_mat(is, s.hs_beta.rho, R, Q);
    get_mat(is, s.hs_beta.nu, R, Q);
    get_vec(is, s.hs_beta.xi, Q);
    get_vec(is, s.hs_beta.zeta, Q);
    get_mat(is, s.hs_delta.rho, R, 1);
    get_mat(is, s.hs_delta.nu, R, 1);
    get_vec(is, s.hs_delta.xi, 1);
    get_vec(is, s.hs_delta.zeta, 1);
}

} // namespace

void save_draws(const PosteriorDraws& draws, const std::string& path)
{
    const Eigen::Index N = static_cast<Eigen::Index>(draws.subpop_ids.size());
    const Eigen::Index A = static_cast<Eigen::Index>(draws.ages.size());
    const Eigen::Index K = draws.basis.K;
    const int Q = draws.config.Q;
    const Eigen::Index R = draws.W.R();

    nlohmann::json h;
    h["version"] = 1;
    h["n"] = N;
    h["ages"] = A;
    h["coefs"] = K;
    h["factors"] = Q;
    h["covariates"] = R;
    h["n_states"] = draws.states.size();
    h["subpop_ids"] = draws.subpop_ids;
    h["covariate_names"] = draws.W.names;
    h["quad_pairs"] = draws.W.quad_pairs;
    h["standardized"] = draws.W.standardized;
    h["basis_degree"] = draws.basis.degree;
    h["basis_centered"] = draws.basis.centered;
    h["config"] = config_to_json(draws.config);
    h["rng_state"] = draws.rng_state_final;
    h["sweeps"] = draws.diag.sweeps;
    h["mean_accept"] = draws.diag.mean_accept;
    const std::string header = h.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, 8);
    put_u64(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));

    put_doubles(os, draws.ages.data(), draws.ages.size());
    put_mat(os, draws.offsets);
    put_mat(os, draws.W.values);
    put_mat(os, draws.W.raw);
    put_vec(os, draws.W.center);
    put_vec(os, draws.W.scale);
    put_doubles(os, draws.basis.knots.data(), draws.basis.knots.size());
    put_mat(os, draws.basis.raw);
    put_mat(os, draws.diag.accept_rate);
    put_mat(os, draws.diag.log_step);

    for (const ModelState& s : draws.states) put_state(os, s);
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

PosteriorDraws load_draws(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path);

    const std::uint64_t hlen = get_u64(is);
    std::string header(hlen, '\0');
    is.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw std::runtime_error("checkpoint: truncated header");

    nlohmann::json h = nlohmann::json::parse(header);
    if (h.at("version").get<int>() != 1)
        throw std::runtime_error("checkpoint: unsupported version");

    const Eigen::Index N = h.at("n").get<Eigen::Index>();
    const Eigen::Index A = h.at("ages").get<Eigen::Index>();
    const Eigen::Index K = h.at("coefs").get<Eigen::Index>();
    const Eigen::Index Q = h.at("factors").get<Eigen::Index>();
    const Eigen::Index R = h.at("covariates").get<Eigen::Index>();
    const std::size_t n_states = h.at("n_states").get<std::size_t>();

    PosteriorDraws d;
    d.subpop_ids = h.at("subpop_ids").get<std::vector<std::string>>();
    d.config = config_from_json(h.at("config").get<std::string>());
    d.rng_state_final = h.at("rng_state").get<std::string>();
    d.diag.sweeps = h.at("sweeps").get<long long>();
    d.diag.mean_accept = h.at("mean_accept").get<double>();

    d.W.names = h.at("covariate_names").get<std::vector<std::string>>();
    d.W.quad_pairs = h.at("quad_pairs").get<std::vector<std::pair<int, int>>>();
    d.W.standardized = h.at("standardized").get<bool>();

    d.ages.resize(A);
    get_doubles(is, d.ages.data(), static_cast<std::size_t>(A));
    get_mat(is, d.offsets, N, A);
    get_mat(is, d.W.values, N, R);
    get_mat(is, d.W.raw, N, R);
    get_vec(is, d.W.center, R);
    get_vec(is, d.W.scale, R);

    d.basis.degree = h.at("basis_degree").get<int>();
    d.basis.centered = h.at("basis_centered").get<bool>();
    d.basis.K = static_cast<int>(K);
    d.basis.ages = d.ages;
    d.basis.knots.resize(static_cast<std::size_t>(K + d.basis.degree + 1));
    get_doubles(is, d.basis.knots.data(), d.basis.knots.size());
    get_mat(is, d.basis.raw, A, K);
    d.basis.col_means = d.basis.raw.colwise().mean();
    if (d.basis.centered)
        d.basis.B = d.basis.raw.rowwise() - d.basis.col_means;
    else
        d.basis.B = d.basis.raw;
    d.basis.D = second_difference_matrix(static_cast<int>(K));

    get_mat(is, d.diag.accept_rate, N, A);
    get_mat(is, d.diag.log_step, N, A);

    d.states.resize(n_states);
    for (std::size_t i = 0; i < n_states; ++i)
        get_state(is, d.states[i], N, A, K, Q, R);

    is.peek();
    if (!is.eof()) throw std::runtime_error("checkpoint: trailing bytes: " + path);
    return d;
}

} // namespace agecurves
