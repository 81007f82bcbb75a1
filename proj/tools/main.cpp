// sparsevl command-line front end: density studies, paired-model demos,
// Monte-Carlo sweeps, and quantile re-binning of sweep output.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sparsevl/comparison.hpp"
#include "sparsevl/glm.hpp"
#include "sparsevl/montecarlo.hpp"
#include "sparsevl/rng.hpp"
#include "sparsevl/transforms.hpp"
#include "sparsevl/vl_engine.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsevl;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;
void handle_sigint(int) { g_interrupted = 1; }

constexpr const char* kFormatVersion = "1";

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int jobs = 0;  // 0 = hardware concurrency
    double rho = 0.03;
    double omega = 2.6;
    double alpha2 = 1.0;
    double fixed_sigma2 = 0.0;  // 0 = estimate
    double threshold = kDefaultZeroThreshold;
    long ny = 64;
    long ntheta = 128;
    int reps = 32;
    bool eq9_literal = false;
    int restarts = 3;
    double tie_nats = 6.0;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags override file values)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
    cmd->add_option("--rho", o.rho, "sigmoid temperature of the sparsify transform");
    cmd->add_option("--omega", o.omega, "norm-order exponent of the sparsify transform");
    cmd->add_option("--alpha2", o.alpha2, "prior variance");
    cmd->add_option("--fixed-sigma2", o.fixed_sigma2, "fix the noise variance (0 = estimate)");
    cmd->add_option("--threshold", o.threshold, "p(theta=0|y) cutoff above which to declare zero");
    cmd->add_option("--ny", o.ny, "number of observations");
    cmd->add_option("--ntheta", o.ntheta, "number of parameters");
    cmd->add_option("--reps", o.reps, "replications per grid cell");
    cmd->add_flag("--eq9-literal", o.eq9_literal,
                  "drop multiplicities on the energy log-variance terms");
    cmd->add_option("--restarts", o.restarts, "random restarts per sparse inversion");
    cmd->add_option("--tie-nats", o.tie_nats,
                    "free-energy margin treated as a tie between restarts");
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    if (j.contains("config")) j = j["config"];  // accept a manifest as config
    return j;
}

// Flags given on the command line win; otherwise config-file values replace
// the built-in defaults.
template <typename T>
void merge(const CLI::App* cmd, const json& cfg, const char* flag, const char* key, T& value) {
    if (cmd->count(flag) > 0) return;
    if (cfg.contains(key) && !cfg[key].is_null()) value = cfg[key].get<T>();
}

void merge_common(const CLI::App* cmd, const json& cfg, CommonOpts& o) {
    merge(cmd, cfg, "--out", "out", o.out_dir);
    merge(cmd, cfg, "--seed", "seed", o.seed);
    merge(cmd, cfg, "--jobs", "jobs", o.jobs);
    merge(cmd, cfg, "--rho", "rho", o.rho);
    merge(cmd, cfg, "--omega", "omega", o.omega);
    merge(cmd, cfg, "--alpha2", "alpha2", o.alpha2);
    merge(cmd, cfg, "--fixed-sigma2", "fixed_sigma2", o.fixed_sigma2);
    merge(cmd, cfg, "--threshold", "threshold", o.threshold);
    merge(cmd, cfg, "--ny", "ny", o.ny);
    merge(cmd, cfg, "--ntheta", "ntheta", o.ntheta);
    merge(cmd, cfg, "--reps", "reps", o.reps);
    merge(cmd, cfg, "--eq9-literal", "eq9_literal", o.eq9_literal);
    merge(cmd, cfg, "--restarts", "restarts", o.restarts);
    merge(cmd, cfg, "--tie-nats", "tie_nats", o.tie_nats);
}

json common_to_json(const CommonOpts& o) {
    return json{{"out", o.out_dir},
                {"seed", o.seed},
                {"jobs", o.jobs},
                {"rho", o.rho},
                {"omega", o.omega},
                {"alpha2", o.alpha2},
                {"fixed_sigma2", o.fixed_sigma2},
                {"threshold", o.threshold},
                {"ny", o.ny},
                {"ntheta", o.ntheta},
                {"reps", o.reps},
                {"eq9_literal", o.eq9_literal},
                {"restarts", o.restarts},
                {"tie_nats", o.tie_nats}};
}

PriorSpec make_prior(const CommonOpts& o) {
    PriorSpec prior;
    prior.alpha2 = o.alpha2;
    if (o.fixed_sigma2 > 0.0) prior.sigma2_fixed = o.fixed_sigma2;
    prior.eq9_literal = o.eq9_literal;
    prior.validate();
    return prior;
}

int effective_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    bool complete, double wall_seconds, const json& extra = json::object()) {
    json m{{"format_version", kFormatVersion},
           {"command", command},
           {"config", config},
           {"complete", complete},
           {"wall_seconds", wall_seconds}};
    m.update(extra);
    auto os = open_out(dir, "manifest.json");
    os << m.dump(2) << '\n';
}

// ---------------------------------------------------------------- density --

int cmd_density(const CLI::App* cmd, CommonOpts& o) {
    const json cfg = load_config(o.config_path);
    merge_common(cmd, cfg, o);

    std::size_t samples = 1000000;
    double bin_min = -6.0, bin_max = 6.0, bin_width = 0.1;
    std::vector<double> rhos{1.0, 0.1, 0.01};
    double reg_max = 5.0, reg_step = 0.05;
    if (cfg.contains("samples")) samples = cfg["samples"].get<std::size_t>();
    if (cfg.contains("bin_min")) bin_min = cfg["bin_min"].get<double>();
    if (cfg.contains("bin_max")) bin_max = cfg["bin_max"].get<double>();
    if (cfg.contains("bin_width")) bin_width = cfg["bin_width"].get<double>();
    if (cfg.contains("rhos")) rhos = cfg["rhos"].get<std::vector<double>>();
    if (cfg.contains("reg_max")) reg_max = cfg["reg_max"].get<double>();
    if (cfg.contains("reg_step")) reg_step = cfg["reg_step"].get<double>();

    const auto t0 = std::chrono::steady_clock::now();

    std::vector<double> edges;
    for (double e = bin_min; e <= bin_max + 1e-12; e += bin_width) edges.push_back(e);

    std::vector<Histogram> hists;
    for (double rho : rhos) {
        SparsifyConfig c = SparsifyConfig::smoothed(rho, o.omega);
        c.validate();
        hists.push_back(induced_density_mc(c, samples, edges, o.seed));
    }
    const Histogram hard = induced_density_mc(SparsifyConfig::hard(o.omega), samples, edges, o.seed);

    {
        auto os = open_out(o.out_dir, "density.csv");
        os << "bin_center";
        for (double rho : rhos) os << ",mc_rho_" << csv_num(rho);
        os << ",mc_hard,analytic\n";
        for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
            const double center = hard.center(b);
            const double width = hard.width(b);
            os << csv_num(center);
            for (const auto& h : hists) os << ',' << csv_num(h.mass[b] / width);
            os << ',' << csv_num(hard.mass[b] / width) << ',';
            const bool covers_zero = edges[b] <= 0.0 && edges[b + 1] > 0.0;
            if (!covers_zero && o.omega == 2.0) os << csv_num(induced_density_analytic(center));
            os << '\n';
        }
    }
    {
        auto os = open_out(o.out_dir, "regularizer.csv");
        os << "theta_tilde,neg_log_density,l1_reference\n";
        // l1 reference |t|/2 shifted to match the regularizer at t = 1
        const double shift = effective_regularizer(1.0) - 0.5;
        for (double t = -reg_max; t <= reg_max + 1e-12; t += reg_step) {
            if (std::abs(t) < 1e-9) continue;
            os << csv_num(t) << ',' << csv_num(effective_regularizer(t)) << ','
               << csv_num(std::abs(t) / 2.0 + shift) << '\n';
        }
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json config = common_to_json(o);
    config.update(json{{"samples", samples},
                       {"bin_min", bin_min},
                       {"bin_max", bin_max},
                       {"bin_width", bin_width},
                       {"rhos", rhos},
                       {"reg_max", reg_max},
                       {"reg_step", reg_step}});
    write_manifest(o.out_dir, "density", config, true, wall);
    std::cout << "density: wrote density.csv, regularizer.csv to " << o.out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------------- demo --

int cmd_demo(const CLI::App* cmd, CommonOpts& o, double precision, double rate) {
    const json cfg = load_config(o.config_path);
    merge_common(cmd, cfg, o);
    if (cmd->count("--precision") == 0 && cfg.contains("precision"))
        precision = cfg["precision"].get<double>();
    if (cmd->count("--rate") == 0 && cfg.contains("rate")) rate = cfg["rate"].get<double>();

    const auto t0 = std::chrono::steady_clock::now();
    const SparsifyConfig transform = SparsifyConfig::smoothed(o.rho, o.omega);
    transform.validate();
    const PriorSpec prior = make_prior(o);
    const double sigma = 1.0 / precision;

    auto summary = open_out(o.out_dir, "demo_summary.csv");
    summary << "scenario,seed,delta_f,f_sparse,f_gauss,r_sparse,r_gauss,sigma2_sparse,"
               "sigma2_gauss,est_sparsity\n";

    const std::vector<Scenario> scenarios{Scenario::sparse(rate), Scenario::gaussian()};
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        const char* name = k == 0 ? "sparse" : "gaussian";
        const std::uint64_t design_seed = derive_seed(o.seed, {k, 0});
        const std::uint64_t data_seed = derive_seed(o.seed, {k, 1});
        const GlmModel design = make_design(o.ny, o.ntheta, design_seed);
        const SimulatedDataset data = simulate(design, scenarios[k], sigma, data_seed);
        const GlmModel sparse_model = design.with_mapping(transform);

        OptimOptions optim;
        optim.init = InitKind::Random;
        optim.init_scale = 0.5;
        MultistartOptions ms;
        ms.n_restarts = o.restarts;
        ms.tie_break_nats = o.tie_nats;
        ms.seed = derive_seed(data_seed, {0x1217ULL});
        const Posterior post_s = infer_multistart(sparse_model, prior, data.y, optim, ms);
        const Posterior post_g = infer_multistart(design, prior, data.y, optim, ms);

        const auto r_s = weight_correlation(data.theta_true, post_s, sparse_model);
        const auto r_g = weight_correlation(data.theta_true, post_g, design);
        const ZeroDetection det = detect(p_zero_all(post_s, prior.alpha2), o.threshold);

        summary << name << ',' << data_seed << ',' << csv_num(compare_models(post_s, post_g))
                << ',' << csv_num(post_s.free_energy) << ',' << csv_num(post_g.free_energy) << ','
                << (r_s ? csv_num(*r_s) : "") << ',' << (r_g ? csv_num(*r_g) : "") << ','
                << csv_num(post_s.sigma2) << ',' << csv_num(post_g.sigma2) << ','
                << csv_num(det.est_sparsity()) << '\n';

        {
            auto os = open_out(o.out_dir, std::string("demo_fit_") + name + ".csv");
            os << "row,y,fit_sparse,fit_gauss\n";
            const Eigen::VectorXd fit_s = predict(sparse_model, post_s.mu);
            const Eigen::VectorXd fit_g = predict(design, post_g.mu);
            for (Eigen::Index i = 0; i < data.y.size(); ++i)
                os << i << ',' << csv_num(data.y[i]) << ',' << csv_num(fit_s[i]) << ','
                   << csv_num(fit_g[i]) << '\n';
        }
        {
            auto os = open_out(o.out_dir, std::string("demo_weights_") + name + ".csv");
            os << "index,true_weight,est_weight_sparse,est_weight_gauss,p_zero,declared_zero\n";
            const Eigen::VectorXd w_s = model_weights(sparse_model, post_s.mu);
            for (Eigen::Index j = 0; j < data.theta_true.size(); ++j)
                os << j << ',' << csv_num(data.theta_true[j]) << ',' << csv_num(w_s[j]) << ','
                   << csv_num(post_g.mu[j]) << ',' << csv_num(det.p_zero[j]) << ','
                   << (det.declared_zero[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
        }
        {
            auto os = open_out(o.out_dir, std::string("demo_dataset_") + name + ".json");
            os << dataset_to_json(design, data, data_seed).dump(2) << '\n';
        }
        {
            auto os = open_out(o.out_dir, std::string("demo_posterior_") + name + "_sparse.json");
            os << posterior_to_json(post_s).dump(2) << '\n';
        }
        {
            auto os = open_out(o.out_dir, std::string("demo_posterior_") + name + "_gauss.json");
            os << posterior_to_json(post_g).dump(2) << '\n';
        }
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json config = common_to_json(o);
    config.update(json{{"precision", precision}, {"rate", rate}});
    write_manifest(o.out_dir, "demo", config, true, wall);
    std::cout << "demo: wrote summaries to " << o.out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------------ sweep --

int cmd_sweep(const CLI::App* cmd, CommonOpts& o, std::vector<double>& precisions,
              std::vector<double>& rates, std::string& scenario, double max_failure_rate) {
    const json cfg = load_config(o.config_path);
    merge_common(cmd, cfg, o);
    if (cmd->count("--precisions") == 0 && cfg.contains("precisions"))
        precisions = cfg["precisions"].get<std::vector<double>>();
    if (cmd->count("--rates") == 0 && cfg.contains("rates"))
        rates = cfg["rates"].get<std::vector<double>>();
    if (cmd->count("--scenario") == 0 && cfg.contains("scenario"))
        scenario = cfg["scenario"].get<std::string>();
    if (cmd->count("--max-failure-rate") == 0 && cfg.contains("max_failure_rate"))
        max_failure_rate = cfg["max_failure_rate"].get<double>();

    SweepSettings settings;
    settings.grid.precisions = precisions;
    settings.grid.sparsity_rates = rates;
    settings.grid.n_reps = o.reps;
    settings.grid.n_y = o.ny;
    settings.grid.n_theta = o.ntheta;
    settings.grid.base_seed = o.seed;
    if (scenario == "sparse") settings.grid.scenario = SweepScenario::Sparse;
    else if (scenario == "gaussian") settings.grid.scenario = SweepScenario::Gaussian;
    else if (scenario == "both") settings.grid.scenario = SweepScenario::Both;
    else throw CLI::ValidationError("--scenario must be sparse, gaussian or both");
    settings.transform = SparsifyConfig::smoothed(o.rho, o.omega);
    settings.prior = make_prior(o);
    settings.multistart.n_restarts = o.restarts;
    settings.multistart.tie_break_nats = o.tie_nats;
    settings.zero_threshold = o.threshold;

    const auto t0 = std::chrono::steady_clock::now();
    std::signal(SIGINT, handle_sigint);
    const SweepResult result =
        run_sweep(settings, effective_jobs(o.jobs), [] { return g_interrupted != 0; });

    {
        auto os = open_out(o.out_dir, "raw.csv");
        write_raw_csv(os, result.records);
    }
    {
        auto os = open_out(o.out_dir, "cells.csv");
        write_cells_csv(os, result.cells);
    }
    std::vector<std::pair<double, double>> deltas;
    for (const auto& r : result.records)
        if (!r.failed && r.delta_r) deltas.emplace_back(*r.delta_r, r.delta_f);
    {
        auto os = open_out(o.out_dir, "bins.csv");
        if (deltas.size() >= 10)
            write_bins_csv(os, quantile_bins(std::move(deltas), 10));
        else
            write_bins_csv(os, {});
    }

    int n_failed = 0;
    for (const auto& r : result.records) n_failed += r.failed;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json config = common_to_json(o);
    config.update(json{{"precisions", precisions},
                       {"rates", rates},
                       {"scenario", scenario},
                       {"max_failure_rate", max_failure_rate}});
    write_manifest(o.out_dir, "sweep", config, result.complete, wall,
                   json{{"n_records", result.records.size()}, {"n_failed", n_failed}});

    const double fail_frac =
        result.records.empty() ? 0.0
                               : static_cast<double>(n_failed) /
                                     static_cast<double>(result.records.size());
    std::cout << "sweep: " << result.records.size() << " records, " << n_failed << " failed, "
              << (result.complete ? "complete" : "interrupted") << ", " << wall << " s\n";
    if (!result.complete || fail_frac > max_failure_rate) return 1;
    return 0;
}

// ------------------------------------------------------------------- bins --

int cmd_bins(const CLI::App* cmd, CommonOpts& o, std::string& input, std::size_t n_bins) {
    const json cfg = load_config(o.config_path);
    merge_common(cmd, cfg, o);
    if (cmd->count("--input") == 0 && cfg.contains("input")) input = cfg["input"].get<std::string>();
    if (cmd->count("--bins") == 0 && cfg.contains("bins")) n_bins = cfg["bins"].get<std::size_t>();

    const auto t0 = std::chrono::steady_clock::now();
    std::ifstream is(input);
    if (!is) throw std::runtime_error("cannot open " + input);
    const auto deltas = read_delta_records_csv(is);
    auto os = open_out(o.out_dir, "bins.csv");
    write_bins_csv(os, quantile_bins(deltas, n_bins));

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json config = common_to_json(o);
    config.update(json{{"input", input}, {"bins", n_bins}});
    write_manifest(o.out_dir, "bins", config, true, wall);
    std::cout << "bins: wrote bins.csv from " << deltas.size() << " records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse-prior emulation for variational-Laplace GLM inference"};
    app.require_subcommand(1);

    CommonOpts od, om, os_, ob;
    od.omega = 2.0;  // density study defaults to the quadratic transform
    double precision = 10.0, rate = 0.9;
    std::vector<double> precisions{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> rates{0.0, 0.25, 0.5, 0.75, 0.9375};
    std::string scenario = "sparse";
    double max_failure_rate = 0.02;
    std::string bins_input = "raw.csv";
    std::size_t n_bins = 10;

    auto* density = app.add_subcommand("density", "induced-density and regularizer tables");
    add_common_flags(density, od);

    auto* demo = app.add_subcommand("demo", "paired sparse/gaussian inversion on two datasets");
    add_common_flags(demo, om);
    demo->add_option("--precision", precision, "data precision sigma^{-1}");
    demo->add_option("--rate", rate, "simulated sparsity rate of the sparse dataset");

    auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over precision x sparsity");
    add_common_flags(sweep, os_);
    sweep->add_option("--precisions", precisions, "precision levels");
    sweep->add_option("--rates", rates, "sparsity rates");
    sweep->add_option("--scenario", scenario, "sparse | gaussian | both");
    sweep->add_option("--max-failure-rate", max_failure_rate,
                      "tolerated fraction of flagged replications");

    auto* bins = app.add_subcommand("bins", "recompute quantile bins from a raw sweep CSV");
    add_common_flags(bins, ob);
    bins->add_option("--input", bins_input, "raw.csv produced by sweep");
    bins->add_option("--bins", n_bins, "number of quantile bins");

    CLI11_PARSE(app, argc, argv);

    try {
        if (density->parsed()) return cmd_density(density, od);
        if (demo->parsed()) return cmd_demo(demo, om, precision, rate);
        if (sweep->parsed()) return cmd_sweep(sweep, os_, precisions, rates, scenario,
                                              max_failure_rate);
        if (bins->parsed()) return cmd_bins(bins, ob, bins_input, n_bins);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
