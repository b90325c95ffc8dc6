#include "agecurves_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include "agecurves/baselines.hpp"
#include "agecurves/checkpoint.hpp"
#include "agecurves/config.hpp"
#include "agecurves/evaluation.hpp"
#include "agecurves/panel.hpp"
#include "agecurves/rng.hpp"
#include "agecurves/sampler.hpp"
#include "agecurves/summaries.hpp"
#include "agecurves/synthetic.hpp"

namespace fs = std::filesystem;

namespace agecurves::cli {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::vector<std::string>& argv, const ModelConfig* cfg,
                    nlohmann::json extra = {})
{
    nlohmann::json m;
    m["command"] = command;
    m["argv"] = argv;
    m["version"] = kVersion;
    if (cfg) {
        const std::string cj = config_to_json(*cfg);
        m["config"] = nlohmann::json::parse(cj);
        m["config_hash"] = fnv1a_hex(cj);
    }
    if (!extra.is_null()) m["run"] = std::move(extra);
    std::ofstream os(dir + "/manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + dir);
    os << m.dump(2) << '\n';
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::invalid_argument("cannot create output directory " + dir);
}

int default_threads()
{
    if (const char* env = std::getenv("AGECURVES_THREADS")) {
        const int t = std::atoi(env);
        if (t >= 1) return t;
    }
    return 1;
}

std::string draws_file(const std::string& path)
{
    if (fs::is_directory(path)) return path + "/draws.bin";
    return path;
}

std::vector<int> parse_q_list(const std::string& text)
{
    std::vector<int> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(text.substr(0, dots));
        const int hi = std::stoi(text.substr(dots + 2));
        if (lo < 1 || hi < lo) throw std::invalid_argument("bad Q range: " + text);
        for (int q = lo; q <= hi; ++q) out.push_back(q);
        return out;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const int q = std::stoi(tok);
        if (q < 1) throw std::invalid_argument("Q must be positive");
        out.push_back(q);
    }
    if (out.empty()) throw std::invalid_argument("empty Q list");
    return out;
}

struct NamedValues {
    std::string name;
    Eigen::VectorXd values;
};

NamedValues parse_named_values(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("expected name=v1,v2,...: " + text);
    NamedValues out;
    out.name = text.substr(0, eq);
    std::vector<double> vals;
    std::stringstream ss(text.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.empty()) throw std::invalid_argument("no values in: " + text);
    out.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return out;
}

int covariate_index(const PosteriorDraws& d, const std::string& name)
{
    for (std::size_t j = 0; j < d.W.names.size(); ++j)
        if (d.W.names[j] == name) return static_cast<int>(j);
    throw std::invalid_argument("unknown covariate: " + name);
}

// Shared chain/model overrides for commands that fit the model.
struct FitFlags {
    std::string config_path;
    std::int64_t seed = -1;
    int Q = -1, burnin = -1, draws = -1, thin = -1;
    bool no_standardize = false;

    void attach(CLI::App* cmd, bool with_q = true)
    {
        cmd->add_option("--config", config_path, "model config JSON file");
        cmd->add_option("--seed", seed, "RNG seed override");
        if (with_q) cmd->add_option("--Q", Q, "number of latent factors");
        cmd->add_option("--burnin", burnin, "burn-in sweeps");
        cmd->add_option("--draws", draws, "post-burn-in sweeps");
        cmd->add_option("--thin", thin, "thinning interval");
        cmd->add_flag("--no-standardize", no_standardize,
                      "keep covariates on their original scale");
    }

    ModelConfig resolve(ModelConfig base) const
    {
        ModelConfig cfg = base;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (Q > 0) cfg.Q = Q;
        if (burnin >= 0) cfg.mcmc.burnin = burnin;
        if (draws > 0) cfg.mcmc.draws = draws;
        if (thin > 0) cfg.mcmc.thin = thin;
        if (no_standardize) cfg.standardize_covariates = false;
        return cfg;
    }
};

struct DataFlags {
    std::string counts_path, covariates_path;
    std::vector<std::string> quad_names;
    double min_total = -1.0;

    void attach(CLI::App* cmd, bool counts_required = true)
    {
        auto* c = cmd->add_option("--counts", counts_path, "counts CSV (subpop,age,count[,offset])");
        if (counts_required) c->required();
        cmd->add_option("--covariates", covariates_path,
                        "covariates CSV keyed by subpop; omitted = intercept only");
        cmd->add_option("--quad", quad_names, "covariate names given quadratic companions");
        cmd->add_option("--min-total", min_total,
                        "drop subpopulations with fewer total observed counts");
    }

    AgeCountPanel load_panel() const
    {
        AgeCountPanel p = load_counts_csv(counts_path);
        if (min_total > 0.0) p = filter_small_subpops(p, min_total);
        return p;
    }

    CovariateMatrix load_design(const AgeCountPanel& p, bool standardize) const
    {
        if (covariates_path.empty())
            return make_design(Eigen::MatrixXd(p.N(), 0), {}, {}, false);
        return load_covariates_csv(covariates_path, p.subpop_ids, quad_names, standardize);
    }
};

std::pair<std::string, double> parse_trace_cell(const std::string& text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0)
        throw std::invalid_argument("expected subpop:age, got " + text);
    return {text.substr(0, colon), std::stod(text.substr(colon + 1))};
}

int cmd_fit(const DataFlags& data, const FitFlags& fit, const std::string& out_dir,
            const std::string& trace_cell, double level,
            const std::vector<std::string>& argv)
{
    ModelConfig cfg = fit.resolve(ModelConfig{});
    AgeCountPanel panel = data.load_panel();
    CovariateMatrix W = data.load_design(panel, cfg.standardize_covariates);

    ensure_dir(out_dir);
    const int total_sweeps = cfg.mcmc.burnin + cfg.mcmc.draws;
    PosteriorDraws draws = run_mcmc(panel, W, cfg, [&](int sweep, int total) {
        std::cerr << "\rsweep " << sweep << "/" << total << std::flush;
    });
    std::cerr << "\rsweep " << total_sweeps << "/" << total_sweeps << "\n";

    save_draws(draws, out_dir + "/draws.bin");

    Rng pred_rng = Rng(cfg.seed).stream(9001);
    std::vector<SummaryBlock> blocks;
    for (const std::string& id : draws.subpop_ids) {
        PredictiveDraws pd = posterior_predictive_y(draws, id, pred_rng, level);
        blocks.push_back({"predictive", id, draws.ages, pd.summary});
    }
    write_summary_csv(out_dir + "/curves.csv", blocks);

    {
        int i = 0;
        double age = draws.ages[draws.ages.size() / 2];
        if (!trace_cell.empty()) {
            auto [id, a] = parse_trace_cell(trace_cell);
            i = -1;
            for (std::size_t k = 0; k < draws.subpop_ids.size(); ++k)
                if (draws.subpop_ids[k] == id) i = static_cast<int>(k);
            if (i < 0) throw std::invalid_argument("unknown trace subpop: " + id);
            age = a;
        }
        int x = -1;
        for (Eigen::Index k = 0; k < draws.ages.size(); ++k)
            if (std::abs(draws.ages[k] - age) < 1e-9) x = static_cast<int>(k);
        if (x < 0) throw std::invalid_argument("trace age not on the grid");

        std::ofstream os(out_dir + "/trace.csv");
        os << "draw,z\n";
        char buf[40];
        for (std::size_t d = 0; d < draws.states.size(); ++d) {
            std::snprintf(buf, sizeof(buf), "%.10g", draws.states[d].z(i, x));
            os << d << ',' << buf << '\n';
        }
    }

    {
        double amin = 1.0, amax = 0.0;
        long long cells = 0;
        for (Eigen::Index i = 0; i < draws.diag.accept_rate.rows(); ++i)
            for (Eigen::Index j = 0; j < draws.diag.accept_rate.cols(); ++j) {
                const double a = draws.diag.accept_rate(i, j);
                if (std::isnan(a)) continue;
                amin = std::min(amin, a);
                amax = std::max(amax, a);
                ++cells;
            }
        nlohmann::json dj;
        dj["mean_accept"] = draws.diag.mean_accept;
        dj["sweeps"] = draws.diag.sweeps;
        dj["mh_cells"] = cells;
        dj["accept_min"] = cells ? amin : 0.0;
        dj["accept_max"] = cells ? amax : 0.0;
        dj["stored_draws"] = draws.n_draws();
        std::ofstream os(out_dir + "/diagnostics.json");
        os << dj.dump(2) << '\n';
    }

    write_manifest(out_dir, "fit", argv, &cfg,
                   {{"counts", data.counts_path},
                    {"covariates", data.covariates_path},
                    {"subpops", panel.N()},
                    {"ages", panel.A()}});
    return 0;
}

int cmd_effects(const std::string& draws_path, const std::string& out_dir, double level,
                const std::vector<std::string>& nonlinear_specs,
                const std::vector<std::string>& argv)
{
    PosteriorDraws draws = load_draws(draws_file(draws_path));
    ensure_dir(out_dir);

    {
        EffectTable t = level_effects(draws, level);
        std::ofstream os(out_dir + "/level_effects.csv");
        os << "covariate,mean,lo,hi\n";
        char buf[96];
        for (std::size_t r = 0; r < t.names.size(); ++r) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g",
                          t.mean(static_cast<Eigen::Index>(r)),
                          t.lo(static_cast<Eigen::Index>(r)),
                          t.hi(static_cast<Eigen::Index>(r)));
            os << t.names[r] << ',' << buf << '\n';
        }
    }

    {
        std::vector<SummaryBlock> blocks;
        for (int j = 0; j < draws.W.R(); ++j) {
            bool paired = false;
            for (const auto& [lin, quad] : draws.W.quad_pairs)
                if (j == lin || j == quad) paired = true;
            if (paired) continue;
            blocks.push_back({"shape_effect", draws.W.names[static_cast<std::size_t>(j)],
                              draws.ages, shape_effect(draws, j, level)});
        }
        write_summary_csv(out_dir + "/shape_effects.csv", blocks);
    }

    if (!nonlinear_specs.empty()) {
        std::vector<SummaryBlock> blocks;
        char key[48];
        for (const std::string& spec : nonlinear_specs) {
            NamedValues nv = parse_named_values(spec);
            const int j = covariate_index(draws, nv.name);
            NonlinearEffect eff = nonlinear_effect(draws, j, nv.values, level);
            for (Eigen::Index v = 0; v < eff.values.size(); ++v) {
                std::snprintf(key, sizeof(key), "%s@%.10g", nv.name.c_str(), eff.values[v]);
                blocks.push_back({"nonlinear_effect", key, draws.ages,
                                  eff.slices[static_cast<std::size_t>(v)]});
            }
        }
        write_summary_csv(out_dir + "/nonlinear_effects.csv", blocks);
    }

    write_manifest(out_dir, "effects", argv, &draws.config,
                   {{"draws", draws_path}, {"level", level}});
    return 0;
}

int cmd_scenario(const std::string& draws_path, const std::string& subpop,
                 const std::vector<std::string>& overrides, const std::string& out_dir,
                 double level, std::uint64_t seed, const std::vector<std::string>& argv)
{
    PosteriorDraws draws = load_draws(draws_file(draws_path));
    int i = -1;
    for (std::size_t k = 0; k < draws.subpop_ids.size(); ++k)
        if (draws.subpop_ids[k] == subpop) i = static_cast<int>(k);
    if (i < 0) throw std::invalid_argument("unknown subpopulation: " + subpop);

    Eigen::VectorXd w_raw = draws.W.raw.row(i).transpose();
    for (const std::string& text : overrides) {
        NamedValues nv = parse_named_values(text);
        if (nv.values.size() != 1)
            throw std::invalid_argument("scenario override needs one value: " + text);
        const int j = covariate_index(draws, nv.name);
        if (j == 0) throw std::invalid_argument("cannot override the intercept");
        for (const auto& [lin, quad] : draws.W.quad_pairs)
            if (j == quad)
                throw std::invalid_argument("set the linear covariate instead of " + nv.name);
        w_raw[j] = nv.values[0];
    }
    for (const auto& [lin, quad] : draws.W.quad_pairs) w_raw[quad] = w_raw[lin] * w_raw[lin];

    Rng rng(seed);
    ScenarioResult res = scenario_project(draws, subpop, w_raw, rng, level);

    ensure_dir(out_dir);
    write_summary_csv(out_dir + "/scenario.csv",
                      {{"baseline", subpop, draws.ages, res.baseline},
                       {"counterfactual", subpop, draws.ages, res.counterfactual},
                       {"difference", subpop, draws.ages, res.difference}});
    write_manifest(out_dir, "scenario", argv, &draws.config,
                   {{"draws", draws_path}, {"subpop", subpop}, {"seed", seed}});
    return 0;
}

int cmd_simulate(const std::string& variant, std::uint64_t seed, int N, int A,
                 double sigma2, int n_factors, bool drop_one, const std::string& out_dir,
                 const std::vector<std::string>& argv)
{
    SyntheticTruth truth;
    if (variant == "baseline") {
        truth = generate_baseline(seed, N, A, sigma2, nullptr, n_factors);
    } else if (variant == "sparse") {
        truth = generate_sparse_variant(seed, N, A, sigma2, nullptr, n_factors);
    } else if (variant == "outlier") {
        truth = generate_baseline(seed, N, A, sigma2, nullptr, n_factors);
        std::uint64_t s = seed;
        truth = generate_outlier_variant(truth, splitmix64(s));
    } else {
        throw std::invalid_argument("unknown variant: " + variant);
    }
    if (drop_one) {
        std::uint64_t s = seed + 1;
        truth = drop_one_per_curve(truth, splitmix64(s));
    }

    ensure_dir(out_dir);
    write_truth(truth, out_dir);
    write_manifest(out_dir, "simulate", argv, nullptr,
                   {{"variant", variant},
                    {"seed", seed},
                    {"N", N},
                    {"A", A},
                    {"sigma2", sigma2},
                    {"n_factors", n_factors},
                    {"drop_one", drop_one}});
    return 0;
}

int cmd_cv(const DataFlags& data, const FitFlags& fit, const std::string& q_text,
           const std::string& models_text, std::uint64_t seed, int threads,
           const std::string& out_dir, const std::vector<std::string>& argv)
{
    ModelConfig cfg = fit.resolve(ModelConfig::desk_defaults());
    AgeCountPanel panel = data.load_panel();
    CovariateMatrix W = data.load_design(panel, cfg.standardize_covariates);

    std::vector<std::string> models;
    std::stringstream ss(models_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) models.push_back(tok);

    std::vector<CvRow> table = loco_cv(panel, W, models, parse_q_list(q_text), cfg, seed, threads);

    ensure_dir(out_dir);
    write_cv_csv(table, out_dir + "/cv_table.csv");
    write_manifest(out_dir, "cv", argv, &cfg,
                   {{"counts", data.counts_path},
                    {"covariates", data.covariates_path},
                    {"models", models},
                    {"Q", q_text},
                    {"seed", seed},
                    {"folds", panel.N()}});
    return 0;
}

int cmd_benchmark(const std::string& experiment, ExperimentConfig ecfg,
                  const FitFlags& fit, const std::string& out_dir,
                  const std::vector<std::string>& argv)
{
    ecfg.model = fit.resolve(ModelConfig::desk_defaults());

    ScoreReport report;
    if (experiment == "insample")
        report = run_insample_experiment(ecfg);
    else if (experiment == "missing")
        report = run_missing_experiment(ecfg);
    else if (experiment == "oos")
        report = run_oos_experiment(ecfg);
    else
        throw std::invalid_argument("unknown experiment: " + experiment);

    ensure_dir(out_dir);
    write_score_csv(report, out_dir + "/scores.csv");
    write_manifest(out_dir, "benchmark", argv, &ecfg.model,
                   {{"experiment", experiment},
                    {"replicates", ecfg.replicates},
                    {"N", ecfg.N},
                    {"A", ecfg.A},
                    {"noise_sigma2", ecfg.noise_sigma2},
                    {"variant", ecfg.variant},
                    {"n_factors", ecfg.n_factors},
                    {"svd_rank", ecfg.svd_rank},
                    {"holdout_fraction", ecfg.holdout_fraction},
                    {"seed", ecfg.seed}});
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args)
{
    CLI::App app{"Hierarchical latent-factor smoothing for age-specific count panels"};
    app.require_subcommand(1);

    DataFlags fit_data, cv_data;
    FitFlags fit_flags, cv_fit_flags, bench_fit_flags;
    std::string fit_out = "fit_out", trace_cell;
    double fit_level = 0.95;
    auto* fit_cmd = app.add_subcommand("fit", "fit the model and store the chain");
    fit_data.attach(fit_cmd);
    fit_flags.attach(fit_cmd);
    fit_cmd->add_option("--out", fit_out, "output directory");
    fit_cmd->add_option("--trace", trace_cell, "subpop:age cell for the trace CSV");
    fit_cmd->add_option("--level", fit_level, "credible level for curve summaries");

    std::string eff_draws, eff_out = "effects_out";
    double eff_level = 0.95;
    std::vector<std::string> eff_nonlinear;
    auto* eff_cmd = app.add_subcommand("effects", "covariate effect summaries from a stored chain");
    eff_cmd->add_option("--draws", eff_draws, "draws file or fit output directory")->required();
    eff_cmd->add_option("--out", eff_out, "output directory");
    eff_cmd->add_option("--level", eff_level, "credible level");
    eff_cmd->add_option("--nonlinear", eff_nonlinear,
                        "name=v1,v2,... evaluation values for a quadratic covariate");

    std::string sc_draws, sc_subpop, sc_out = "scenario_out";
    std::vector<std::string> sc_set;
    double sc_level = 0.95;
    std::uint64_t sc_seed = 1;
    auto* sc_cmd = app.add_subcommand("scenario", "counterfactual covariate projection");
    sc_cmd->add_option("--draws", sc_draws, "draws file or fit output directory")->required();
    sc_cmd->add_option("--subpop", sc_subpop, "subpopulation id")->required();
    sc_cmd->add_option("--set", sc_set, "name=value covariate override")->required();
    sc_cmd->add_option("--out", sc_out, "output directory");
    sc_cmd->add_option("--level", sc_level, "credible level");
    sc_cmd->add_option("--seed", sc_seed, "RNG seed for the predictive draws");

    std::string sim_variant = "baseline", sim_out = "sim_out";
    std::uint64_t sim_seed = 1;
    int sim_N = 100, sim_A = 60, sim_factors = 5;
    double sim_sigma2 = 1.0;
    bool sim_drop = false;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset with truth sidecar");
    sim_cmd->add_option("--variant", sim_variant, "baseline | outlier | sparse");
    sim_cmd->add_option("--seed", sim_seed, "generator seed");
    sim_cmd->add_option("--N", sim_N, "subpopulations");
    sim_cmd->add_option("--A", sim_A, "ages");
    sim_cmd->add_option("--sigma2", sim_sigma2, "observation noise variance");
    sim_cmd->add_option("--n-factors", sim_factors, "true latent factors (1..5)");
    sim_cmd->add_flag("--drop-one", sim_drop, "mask one cell per curve");
    sim_cmd->add_option("--out", sim_out, "output directory");

    std::string cv_q = "1..10", cv_models = "bayes,svd,smooth_svd,bayes_nocov",
                cv_out = "cv_out";
    std::uint64_t cv_seed = 1;
    int cv_threads = default_threads();
    auto* cv_cmd = app.add_subcommand("cv", "leave-one-curve-out cross-validation table");
    cv_data.attach(cv_cmd);
    cv_fit_flags.attach(cv_cmd, false);
    cv_cmd->add_option("--Q", cv_q, "factor counts, list or lo..hi range");
    cv_cmd->add_option("--models", cv_models, "comma list: bayes,svd,smooth_svd,bayes_nocov");
    cv_cmd->add_option("--cv-seed", cv_seed, "fold RNG seed");
    cv_cmd->add_option("--threads", cv_threads, "parallel folds");
    cv_cmd->add_option("--out", cv_out, "output directory");

    std::string bench_exp, bench_out = "benchmark_out";
    ExperimentConfig ecfg;
    auto* bench_cmd = app.add_subcommand("benchmark", "synthetic-data experiment harness");
    bench_cmd->add_option("--experiment", bench_exp, "insample | missing | oos")->required();
    bench_cmd->add_option("--replicates", ecfg.replicates, "replicates");
    bench_cmd->add_option("--N", ecfg.N, "subpopulations");
    bench_cmd->add_option("--A", ecfg.A, "ages");
    bench_cmd->add_option("--sigma2", ecfg.noise_sigma2, "observation noise variance");
    bench_cmd->add_option("--variant", ecfg.variant, "generator variant");
    bench_cmd->add_option("--n-factors", ecfg.n_factors, "true latent factors");
    bench_cmd->add_option("--exp-seed", ecfg.seed, "experiment seed");
    bench_cmd->add_option("--svd-rank", ecfg.svd_rank, "competitor SVD rank");
    bench_cmd->add_option("--holdout", ecfg.holdout_fraction, "held-out row fraction (oos)");
    bench_cmd->add_option("--threads", ecfg.threads, "parallel replicates");
    bench_fit_flags.attach(bench_cmd);
    bench_cmd->add_option("--out", bench_out, "output directory");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (fit_cmd->parsed())
            return cmd_fit(fit_data, fit_flags, fit_out, trace_cell, fit_level, args);
        if (eff_cmd->parsed())
            return cmd_effects(eff_draws, eff_out, eff_level, eff_nonlinear, args);
        if (sc_cmd->parsed())
            return cmd_scenario(sc_draws, sc_subpop, sc_set, sc_out, sc_level, sc_seed, args);
        if (sim_cmd->parsed())
            return cmd_simulate(sim_variant, sim_seed, sim_N, sim_A, sim_sigma2, sim_factors,
                                sim_drop, sim_out, args);
        if (cv_cmd->parsed())
            return cmd_cv(cv_data, cv_fit_flags, cv_q, cv_models, cv_seed, cv_threads, cv_out, args);
        if (bench_cmd->parsed())
            return cmd_benchmark(bench_exp, ecfg, bench_fit_flags, bench_out, args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int run_cli(int argc, const char* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace agecurves::cli
