#include "agecurves/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace agecurves {

using nlohmann::json;

ModelConfig ModelConfig::case_study_defaults() {
    ModelConfig cfg;
    cfg.Q = 6;
    cfg.degree = 3;
    cfg.interior_knots.clear();
    for (int t = 5; t <= 65; t += 5) cfg.interior_knots.push_back(t);
    cfg.boundary_lo = 0.0;
    cfg.boundary_hi = 95.0;
    cfg.mcmc = {25000, 50000, 5};
    return cfg;
}

ModelConfig ModelConfig::desk_defaults() {
    ModelConfig cfg;
    cfg.mcmc = {2000, 2000, 2};
    return cfg;
}

std::string config_to_json(const ModelConfig& cfg) {
    json j;
    j["Q"] = cfg.Q;
    j["degree"] = cfg.degree;
    j["interior_knots"] = cfg.interior_knots;
    j["boundary"] = {cfg.boundary_lo, cfg.boundary_hi};
    j["n_interior_default"] = cfg.n_interior_default;
    j["center_basis"] = cfg.center_basis;
    j["standardize_covariates"] = cfg.standardize_covariates;
    j["mcmc"] = {{"burnin", cfg.mcmc.burnin}, {"draws", cfg.mcmc.draws}, {"thin", cfg.mcmc.thin}};
    j["z_update"] = {{"target_accept", cfg.z.target_accept},
                     {"batch", cfg.z.batch},
                     {"large_count_threshold", cfg.z.large_count_threshold}};
    j["hyper"] = {{"c0", cfg.hyper.c0}, {"C0", cfg.hyper.C0}, {"d0", cfg.hyper.d0},
                  {"D0", cfg.hyper.D0}, {"s0", cfg.hyper.s0}, {"S0", cfg.hyper.S0},
                  {"l0", cfg.hyper.l0}, {"L0", cfg.hyper.L0}};
    j["f_anchor_prec"] = cfg.f_anchor_prec;
    j["check_identification"] = cfg.check_identification;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

ModelConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.Q = j.value("Q", cfg.Q);
        cfg.degree = j.value("degree", cfg.degree);
        if (j.contains("interior_knots"))
            cfg.interior_knots = j["interior_knots"].get<std::vector<double>>();
        if (j.contains("boundary")) {
            auto b = j["boundary"].get<std::vector<double>>();
            if (b.size() != 2) throw std::invalid_argument("config: boundary needs two values");
            cfg.boundary_lo = b[0];
            cfg.boundary_hi = b[1];
        }
        cfg.n_interior_default = j.value("n_interior_default", cfg.n_interior_default);
        cfg.center_basis = j.value("center_basis", cfg.center_basis);
        cfg.standardize_covariates = j.value("standardize_covariates", cfg.standardize_covariates);
        if (j.contains("mcmc")) {
            const auto& m = j["mcmc"];
            cfg.mcmc.burnin = m.value("burnin", cfg.mcmc.burnin);
            cfg.mcmc.draws = m.value("draws", cfg.mcmc.draws);
            cfg.mcmc.thin = m.value("thin", cfg.mcmc.thin);
        }
        if (j.contains("z_update")) {
            const auto& z = j["z_update"];
            cfg.z.target_accept = z.value("target_accept", cfg.z.target_accept);
            cfg.z.batch = z.value("batch", cfg.z.batch);
            cfg.z.large_count_threshold =
                z.value("large_count_threshold", cfg.z.large_count_threshold);
        }
        if (j.contains("hyper")) {
            const auto& h = j["hyper"];
            cfg.hyper.c0 = h.value("c0", cfg.hyper.c0);
            cfg.hyper.C0 = h.value("C0", cfg.hyper.C0);
            cfg.hyper.d0 = h.value("d0", cfg.hyper.d0);
            cfg.hyper.D0 = h.value("D0", cfg.hyper.D0);
            cfg.hyper.s0 = h.value("s0", cfg.hyper.s0);
            cfg.hyper.S0 = h.value("S0", cfg.hyper.S0);
            cfg.hyper.l0 = h.value("l0", cfg.hyper.l0);
            cfg.hyper.L0 = h.value("L0", cfg.hyper.L0);
        }
        cfg.f_anchor_prec = j.value("f_anchor_prec", cfg.f_anchor_prec);
        cfg.check_identification = j.value("check_identification", cfg.check_identification);
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad field: ") + e.what());
    }
    return cfg;
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

} // namespace agecurves
