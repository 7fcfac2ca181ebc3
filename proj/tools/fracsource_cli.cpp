// Batch front end.  Subcommands:
//   spectrum    write the disk eigensystem (modes.csv)
//   simulate    write final-time moments for a configured source (moments.csv)
//   invert      rerun the inversion from a previously written data.csv
//   experiment  full pipeline: data, reconstruction, errors, grids
//   selftest    reduced invariant suites
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "fracsource/csv.hpp"
#include "fracsource/experiment.hpp"
#include "fracsource/selftest.hpp"

namespace fs = fracsource;

namespace {

void load_config_file(const std::string& path, fs::ExperimentConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value, got: " + line);
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "alpha") cfg.alpha = std::stod(val);
        else if (key == "T") cfg.T = std::stod(val);
        else if (key == "h_value") cfg.h_value = std::stod(val);
        else if (key == "n_modes") cfg.n_modes = std::stoi(val);
        else if (key == "n0") cfg.n0 = std::stoi(val);
        else if (key == "realizations") cfg.realizations = std::stoi(val);
        else if (key == "noise_delta") cfg.noise_delta = std::stod(val);
        else if (key == "gamma_f") { cfg.gamma_f = std::stod(val); cfg.gamma_f_set = true; }
        else if (key == "gamma_g") { cfg.gamma_g = std::stod(val); cfg.gamma_g_set = true; }
        else if (key == "domain") cfg.domain = val;
        else if (key == "source") cfg.source = val;
        else if (key == "data_mode") cfg.data_mode = val;
        else if (key == "n_t") cfg.n_t = std::stoi(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "quad_nr") cfg.quad_nr = std::stoi(val);
        else if (key == "quad_ntheta") cfg.quad_ntheta = std::stoi(val);
        else if (key == "cells_r") cfg.cells_r = std::stoi(val);
        else if (key == "cells_theta") cfg.cells_theta = std::stoi(val);
        else if (key == "render_nr") cfg.render_nr = std::stoi(val);
        else if (key == "render_ntheta") cfg.render_ntheta = std::stoi(val);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "lm_max_iter") cfg.lm_max_iter = std::stoi(val);
        else if (key == "lm_step_tol") cfg.lm_step_tol = std::stod(val);
        else throw std::invalid_argument("config: unknown key: " + key);
    }
}

void add_common_flags(CLI::App* cmd, fs::ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    cmd->add_option("--preset", cfg.source, "source preset")->check(CLI::IsMember({"e1", "e2"}));
    cmd->add_option("--domain", cfg.domain, "observation domain")
        ->check(CLI::IsMember({"full", "a", "b", "c"}));
    cmd->add_option("--seed", cfg.seed, "RNG seed");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--noise", cfg.noise_delta, "relative noise level delta");
    cmd->add_option_function<double>(
        "--gamma-f", [&cfg](double v) { cfg.gamma_f = v; cfg.gamma_f_set = true; },
        "Tikhonov weight for f");
    cmd->add_option_function<double>(
        "--gamma-g", [&cfg](double v) { cfg.gamma_g = v; cfg.gamma_g_set = true; },
        "LM damping for g");
    cmd->add_option("--data-mode", cfg.data_mode, "empirical or analytic data")
        ->check(CLI::IsMember({"empirical", "analytic"}));
    cmd->add_option("--realizations", cfg.realizations, "Monte Carlo ensemble size");
    cmd->add_option("--alpha", cfg.alpha, "fractional order");
    cmd->add_option("--modes", cfg.n_modes, "eigenmode count N");
    cmd->add_option("--nt", cfg.n_t, "time steps per path");
}

int cmd_spectrum(const fs::ExperimentConfig& cfg) {
    auto modes = fs::build_eigensystem(cfg.n_modes);
    std::filesystem::create_directories(cfg.out_dir);
    fs::detail::write_modes_csv(cfg.out_dir, modes);
    std::printf("wrote %s/modes.csv (%d modes)\n", cfg.out_dir.c_str(), cfg.n_modes);
    return 0;
}

int cmd_simulate(const fs::ExperimentConfig& cfg) {
    auto modes = fs::build_eigensystem(cfg.n_modes);
    auto quad = fs::make_quadrature(cfg.quad_nr, cfg.quad_ntheta);
    fs::SourceFields src = fs::make_source(cfg.source, modes, quad);
    fs::SourceSpec source{src.f_coeffs, src.g_coeffs, fs::constant_profile(cfg.h_value),
                          cfg.h_value};
    source.validate(cfg.T);
    fs::SimConfig sim;
    sim.alpha = cfg.alpha;
    sim.T = cfg.T;
    sim.n_modes = cfg.n_modes;
    sim.n_t = cfg.n_t;
    sim.realizations = cfg.realizations;
    sim.seed = cfg.seed;
    fs::ModeMoments mm = cfg.data_mode == "analytic"
                             ? fs::analytic_moments(source, fs::kernel_gram(sim, modes, source.h))
                             : fs::simulate_ensemble(source, sim, modes);
    std::filesystem::create_directories(cfg.out_dir);
    fs::detail::write_stats_csv(std::filesystem::path(cfg.out_dir) / "moments.csv",
                                mm.expectation, mm.covariance);
    std::printf("wrote %s/moments.csv\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_invert(const fs::ExperimentConfig& cfg_in, const std::string& data_dir) {
    fs::ExperimentConfig cfg = cfg_in;
    fs::detail::apply_domain_defaults(cfg);
    auto modes = fs::build_eigensystem(cfg.n_modes);
    auto quad = fs::make_quadrature(cfg.quad_nr, cfg.quad_ntheta);
    fs::SimConfig sim;
    sim.alpha = cfg.alpha;
    sim.T = cfg.T;
    sim.n_modes = cfg.n_modes;
    fs::KernelGram gram = fs::kernel_gram(sim, modes, fs::constant_profile(cfg.h_value));

    fs::SensorBasis sensors;
    if (cfg.domain == "full") {
        std::vector<int> idx(cfg.n_modes);
        for (int n = 0; n < cfg.n_modes; ++n) idx[n] = n + 1;
        sensors = fs::make_spectral_basis(idx, cfg.n_modes);
    } else {
        auto cells = fs::partition_domain(fs::make_domain(cfg.domain), cfg.cells_r,
                                          cfg.cells_theta);
        sensors = fs::build_R(cells, modes);
    }

    fs::CsvTable table = fs::read_csv(std::filesystem::path(data_dir) / "data.csv");
    const int K = sensors.K();
    Eigen::VectorXd Ehat = Eigen::VectorXd::Zero(K);
    Eigen::MatrixXd Chat = Eigen::MatrixXd::Zero(K, K);
    int max_index = 0;
    for (const auto& row : table.rows) {
        int i = std::stoi(row[1]), j = std::stoi(row[2]);
        double v = std::stod(row[3]);
        if (i < 1 || i > K || j < 0 || j > K)
            throw std::invalid_argument(
                "invert: data.csv indices do not match the configured sensor count");
        max_index = std::max(max_index, std::max(i, j));
        if (row[0] == "expectation") Ehat(i - 1) = v;
        else Chat(i - 1, j - 1) = v;
    }
    if (max_index != K)
        throw std::invalid_argument("invert: data.csv sensor count " +
                                    std::to_string(max_index) +
                                    " does not match the configured basis (" +
                                    std::to_string(K) + ")");

    Eigen::VectorXd f_hat =
        fs::tikhonov_solve(fs::matrix_A(sensors, gram), Ehat,
                           {cfg.domain == "full" ? 0.0 : cfg.gamma_f});
    fs::LMConfig lmc;
    lmc.gamma_g = cfg.gamma_g;
    lmc.max_iter = cfg.lm_max_iter;
    lmc.step_tol = cfg.lm_step_tol;
    lmc.n0 = cfg.n0;
    lmc.init = cfg.domain == "full" ? fs::LMConfig::Init::closed_form_diagonal
                                    : fs::LMConfig::Init::zeros_plus_unit;
    fs::ReconstructionResult lm = fs::lm_reconstruct(sensors, gram, Chat, lmc);
    Eigen::VectorXd g_hat = lm.g_hat;
    if (cfg.domain == "full") {
        auto [f_cf, g_cf] = fs::closed_form_full({Ehat, Chat}, gram, cfg.n0);
        f_hat = f_cf;
        g_hat = g_cf;
    }

    std::filesystem::create_directories(cfg.out_dir);
    {
        fs::CsvWriter w(std::filesystem::path(cfg.out_dir) / "recovered_coeffs.csv",
                        "n,f_hat,g_hat_abs");
        for (int n = 0; n < cfg.n_modes; ++n)
            w.row({fs::CsvWriter::num(n + 1), fs::CsvWriter::num(f_hat(n)),
                   fs::CsvWriter::num(std::fabs(g_hat(n)))});
    }
    {
        fs::CsvWriter w(std::filesystem::path(cfg.out_dir) / "residuals.csv",
                        "iteration,frobenius_residual,step_norm");
        for (std::size_t i = 0; i < lm.residual_history.size(); ++i)
            w.row({fs::CsvWriter::num(i), fs::CsvWriter::num(lm.residual_history[i]),
                   i == 0 ? "0" : fs::CsvWriter::num(lm.step_history[i - 1])});
    }
    std::printf("wrote %s/recovered_coeffs.csv (%d LM iterations)\n", cfg.out_dir.c_str(),
                lm.iterations);
    return 0;
}

int cmd_experiment(const fs::ExperimentConfig& cfg) {
    fs::ExperimentOutput out = fs::run_experiment(cfg);
    std::printf("%s: rel_err_f=%.6g rel_err_g_abs=%.6g iterations=%d\n", out.label.c_str(),
                out.result.rel_err_f, out.result.rel_err_g_abs, out.result.iterations);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic fractional diffusion: forward simulation and source recovery"};
    app.require_subcommand(1);

    fs::ExperimentConfig cfg;
    std::string config_path, data_dir = "out";

    // the config file seeds the defaults; explicit flags override it, so it
    // has to load before the regular parse assigns anything
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) config_path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
    }
    if (!config_path.empty()) {
        try {
            load_config_file(config_path, cfg);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }
    }

    CLI::App* spectrum = app.add_subcommand("spectrum", "write the disk eigensystem");
    CLI::App* simulate = app.add_subcommand("simulate", "write final-time moments");
    CLI::App* invert = app.add_subcommand("invert", "invert a previously written data.csv");
    CLI::App* experiment = app.add_subcommand("experiment", "run the full pipeline");
    CLI::App* selftest = app.add_subcommand("selftest", "run the reduced invariant suites");

    for (CLI::App* cmd : {spectrum, simulate, invert, experiment})
        add_common_flags(cmd, cfg, config_path);
    invert->add_option("--data", data_dir, "directory holding data.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (spectrum->parsed()) return cmd_spectrum(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (invert->parsed()) return cmd_invert(cfg, data_dir);
        if (experiment->parsed()) return cmd_experiment(cfg);
        if (selftest->parsed()) return fs::selftest() == 0 ? 0 : 1;
    } catch (const CLI::Error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
