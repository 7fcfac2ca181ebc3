// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Statistical criteria pin their seeds; tolerances follow the stated
// contracts, not what the implementation happens to produce.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fracsource/acquisition.hpp"
#include "fracsource/disk_spectrum.hpp"
#include "fracsource/experiment.hpp"
#include "fracsource/forward.hpp"
#include "fracsource/inversion.hpp"
#include "fracsource/mlf.hpp"

using namespace fracsource;

namespace {

struct Shared {
    std::vector<EigenMode> modes36 = build_eigensystem(36);
    PolarQuadrature quad = make_quadrature(64, 256);
    SimConfig base;
    KernelGram gram36;

    Shared() {
        base.alpha = 0.8;
        base.T = 1.0;
        base.n_modes = 36;
        gram36 = kernel_gram(base, modes36, constant_profile(1.0));
    }
};

Shared& shared() {
    static Shared s;
    return s;
}

bool check(bool ok, const char* what, std::string& detail) {
    if (!ok && detail.empty()) detail = what;
    return ok;
}

// ---------------------------------------------------------------- criterion 1
bool criterion_special_functions(std::string& detail) {
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double x = -10.0 + 12.0 * i / 999.0;
        worst = std::max(worst, std::fabs(ml({1.0, 1.0}, x) - std::exp(x)));
    }
    ok &= check(worst <= 1e-12, "E_{1,1} vs exp", detail);

    worst = 0.0;
    for (int i = 0; i <= 500; ++i) {
        double x = 5.0 * i / 500.0;
        worst = std::max(worst, std::fabs(ml({2.0, 1.0}, -x * x) - std::cos(x)));
    }
    ok &= check(worst <= 1e-11, "E_{2,1} vs cos", detail);

    for (double a : {0.6, 0.8}) {
        for (double lam : {1.0, 10.0, 100.0}) {
            double bad = 0.0;
            for (int i = 1; i <= 50; ++i) {
                double t = 0.1 + 0.88 * i / 51.0;
                double h = 1e-5 * t;
                double fd = (ml({a, 1.0}, -lam * std::pow(t + h, a)) -
                             ml({a, 1.0}, -lam * std::pow(t - h, a))) / (2.0 * h);
                double exact = -lam * std::pow(t, a - 1.0) * ml({a, a}, -lam * std::pow(t, a));
                bad = std::max(bad, std::fabs(fd - exact) / std::fabs(exact));
            }
            ok &= check(bad <= 1e-5, "derivative identity", detail);
        }
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 2
double series_j0(double x) {
    double term = 1.0, sum = 1.0, q = -0.25 * x * x;
    for (int k = 1; k < 40; ++k) {
        term *= q / (k * k);
        sum += term;
    }
    return sum;
}

bool criterion_spectrum(std::string& detail) {
    bool ok = true;
    // oracle: bisection on the J_0 power series
    double lo = 2.0, hi = 3.0, flo = series_j0(lo);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = series_j0(mid);
        if ((flo < 0.0) != (fm < 0.0)) hi = mid;
        else { lo = mid; flo = fm; }
    }
    double lam1_oracle = 0.25 * (lo + hi) * (lo + hi);
    const auto& modes = shared().modes36;
    ok &= check(std::fabs(modes[0].eigenvalue - lam1_oracle) <= 1e-9, "lambda_1 vs oracle", detail);
    ok &= check(std::fabs(modes[0].eigenvalue - 5.783185962946785) <= 1e-9, "lambda_1 value", detail);

    ModeTable table(modes, shared().quad);
    double worst = 0.0;
    for (std::size_t a = 0; a < modes.size(); ++a) {
        Eigen::VectorXd row =
            table.project([&](double r, double th) { return eval_phi(modes[a], r, th); });
        for (std::size_t b = 0; b < modes.size(); ++b)
            worst = std::max(worst, std::fabs(row(b) - (a == b ? 1.0 : 0.0)));
    }
    ok &= check(worst <= 1e-7, "gram identity", detail);

    for (std::size_t n = 0; n < modes.size(); ++n) {
        double ratio = std::sqrt(modes[n].eigenvalue) / (n + 1.0);
        ok &= check(ratio >= 0.3 && ratio <= 3.5, "sqrt(lambda_n) ~ n", detail);
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 3
bool criterion_ito_isometry(std::string& detail) {
    bool ok = true;
    const auto& sh = shared();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(36), g = Eigen::VectorXd::Zero(36);
    g(0) = 10.0; g(1) = 2.0; g(2) = 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};
    Eigen::MatrixXd want = (g * g.transpose()).cwiseProduct(sh.gram36.M);

    auto check_cov = [&](const Eigen::MatrixXd& cov, int M, double bias_slack,
                         const char* what) {
        for (int a = 0; a < 36; ++a) {
            for (int b = 0; b < 36; ++b) {
                double se = std::sqrt((want(a, a) * want(b, b) + want(a, b) * want(a, b)) /
                                      (M - 1.0));
                double tol = 5.0 * se + bias_slack * std::fabs(want(a, b)) + 1e-12;
                if (std::fabs(cov(a, b) - want(a, b)) > tol) {
                    check(false, what, detail);
                    return false;
                }
            }
        }
        return true;
    };

    {  // exact Gaussian draws
        const int M = 100000;
        ExactGaussianSampler exact(src, sh.gram36);
        NormalStream stream(2026, 0);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(36);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(36, 36);
        for (int i = 0; i < M; ++i) {
            Eigen::VectorXd u = exact.sample(stream);
            mean += u;
            second.selfadjointView<Eigen::Lower>().rankUpdate(u);
        }
        mean /= M;
        Eigen::MatrixXd cov =
            (Eigen::MatrixXd(second.selfadjointView<Eigen::Lower>()) -
             M * mean * mean.transpose()) / (M - 1.0);
        ok &= check_cov(cov, M, 0.0, "exact-sampler covariance");
    }
    {  // path draws on a 4096-step grid
        const int M = 10000;
        SimConfig cfg = sh.base;
        cfg.n_t = 4096;
        MildPathSampler sampler(src, cfg, sh.modes36);
        double sqdt = std::sqrt(sampler.dt());
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(36);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(36, 36);
        std::vector<double> dW(cfg.n_t);
        for (int i = 0; i < M; ++i) {
            NormalStream stream(909, i);
            for (int j = 0; j < cfg.n_t; ++j) dW[j] = sqdt * stream.normal();
            Eigen::VectorXd u = sampler.sample(dW);
            mean += u;
            second.selfadjointView<Eigen::Lower>().rankUpdate(u);
        }
        mean /= M;
        Eigen::MatrixXd cov =
            (Eigen::MatrixXd(second.selfadjointView<Eigen::Lower>()) -
             M * mean * mean.transpose()) / (M - 1.0);
        // slack for the interval-averaging bias, ~0.5 dt^{2 alpha - 1}
        ok &= check_cov(cov, M, 4e-3, "path-sampler covariance");
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 4
bool criterion_oracle_equivalence(std::string& detail) {
    auto modes = std::vector<EigenMode>(shared().modes36.begin(), shared().modes36.begin() + 3);
    Eigen::VectorXd f(3), g(3);
    f << 10.0, 5.0, 12.0;
    g << 10.0, 2.0, 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};

    // base-grid Brownian increments held fixed as piecewise-constant
    // forcings; finer grids subdivide them (refining by Brownian bridge
    // instead contracts at only 2^{alpha - 1/2} ~ 1.23 per doubling, below
    // the required factor for any seed).  RMS over 16 shared paths: the
    // signed single-path error can cross zero at one refinement.
    const int nt_base = 256, n_paths = 16;
    bool ok = true;
    for (int mode_idx : {0, 1}) {
        double prev = -1.0;
        for (int nt : {256, 512, 1024, 2048, 4096}) {
            int stride = nt / nt_base;
            double ss = 0.0;
            for (int p = 0; p < n_paths; ++p) {
                NormalStream stream(515, p);
                std::vector<double> base(nt_base);
                double sqdt = std::sqrt(1.0 / nt_base);
                for (int j = 0; j < nt_base; ++j) base[j] = sqdt * stream.normal();
                std::vector<double> dW(nt);
                for (int j = 0; j < nt; ++j) dW[j] = base[j / stride] / stride;
                SimConfig cfg = shared().base;
                cfg.n_modes = 3;
                cfg.n_t = nt;
                double mild = sample_final_coeffs(src, cfg, modes, dW)(mode_idx);
                double l1 = l1_mode_solve(modes[mode_idx], src, cfg, dW);
                ss += (mild - l1) * (mild - l1);
            }
            double rms = std::sqrt(ss / n_paths);
            if (prev >= 0.0) ok &= check(rms < prev / 1.3, "decay factor >= 1.3", detail);
            prev = rms;
        }
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 5
bool criterion_closed_loop(std::string& detail) {
    bool ok = true;
    const auto& sh = shared();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(36), g = Eigen::VectorXd::Zero(36);
    f(0) = 10.0; f(1) = 5.0; f(2) = 12.0;
    g(0) = 10.0; g(1) = 2.0; g(2) = 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};
    ModeMoments mm = analytic_moments(src, sh.gram36);
    auto [fh, gh] = closed_form_full(mm, sh.gram36, 1);
    ok &= check((fh - f).norm() <= 1e-8 * f.norm(), "closed-form f", detail);
    ok &= check((gh - g).norm() <= 1e-8 * g.norm(), "closed-form |g|", detail);

    std::vector<int> idx(36);
    for (int n = 0; n < 36; ++n) idx[n] = n + 1;
    SensorBasis spec = make_spectral_basis(idx, 36);
    Eigen::VectorXd ft = tikhonov_solve(matrix_A(spec, sh.gram36), mm.expectation, {0.0});
    ok &= check((ft - fh).cwiseAbs().maxCoeff() <= 1e-8, "Tikhonov gamma=0 match", detail);
    return ok;
}

// ---------------------------------------------------------------- criterion 6
struct RunErrors {
    double f = 0.0, g = 0.0;
};

RunErrors one_table_run(const std::string& source, const std::string& domain,
                        std::uint64_t seed) {
    const auto& sh = shared();
    SourceFields src_fields = make_source(source, sh.modes36, sh.quad);
    SourceSpec src{src_fields.f_coeffs, src_fields.g_coeffs, constant_profile(1.0), 1.0};

    SimConfig cfg = sh.base;
    cfg.n_t = 2048;
    cfg.realizations = 1000;
    cfg.seed = seed;

    SensorBasis sensors;
    if (domain == "full") {
        std::vector<int> idx(36);
        for (int n = 0; n < 36; ++n) idx[n] = n + 1;
        sensors = make_spectral_basis(idx, 36);
    } else {
        ExperimentConfig ec;
        ec.domain = domain;
        ec.source = source;
        fracsource::detail::apply_domain_defaults(ec);
        sensors = build_R(partition_domain(make_domain(domain), ec.cells_r, ec.cells_theta),
                          sh.modes36);
    }

    ObservedData data = make_observed_data(src, sensors, cfg, sh.modes36, sh.gram36, false, 0.01);

    RunErrors err;
    if (domain == "full") {
        auto [fh, gh] = closed_form_full({data.Ehat, data.Chat}, sh.gram36, 1);
        err.f = rel_l2_error(src_fields.f, fh, sh.modes36, sh.quad, false);
        err.g = rel_l2_error(src_fields.g, gh, sh.modes36, sh.quad, true);
    } else {
        auto gammas = fracsource::detail::table_gammas().at(source + domain);
        Eigen::VectorXd fh = tikhonov_solve(matrix_A(sensors, sh.gram36), data.Ehat,
                                            {gammas.first});
        LMConfig lmc;
        lmc.gamma_g = gammas.second;
        lmc.n0 = 1;
        lmc.init = LMConfig::Init::zeros_plus_unit;
        lmc.max_iter = ExperimentConfig{}.lm_max_iter;  // pipeline default budget
        ReconstructionResult lm = lm_reconstruct(sensors, sh.gram36, data.Chat, lmc);
        err.f = rel_l2_error(src_fields.f, fh, sh.modes36, sh.quad, false);
        err.g = rel_l2_error(src_fields.g, lm.g_hat, sh.modes36, sh.quad, true);
    }
    return err;
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

bool criterion_table_reproduction(std::string& detail) {
    const std::uint64_t seeds[5] = {1, 2, 3, 4, 5};
    struct Row {
        const char* source;
        const char* domain;
        double table_f, table_g;  // negative: qualitative only
    };
    const Row rows[] = {
        {"e1", "full", 6.06e-2, 2.46e-2}, {"e2", "full", 4.88e-1, 5.46e-1},
        {"e1", "a", 2.55e-1, 1.06e-1},    {"e1", "b", 2.77e-1, 7.54e-2},
        {"e1", "c", -1.0, -1.0},          {"e2", "a", -1.0, -1.0},
        {"e2", "b", -1.0, -1.0},          {"e2", "c", -1.0, -1.0},
    };

    bool ok = true;
    double full_f[2] = {0.0, 0.0}, full_g[2] = {0.0, 0.0};  // e1, e2 medians
    for (const Row& row : rows) {
        std::vector<double> fe, ge;
        for (std::uint64_t seed : seeds) {
            RunErrors e = one_table_run(row.source, row.domain, seed);
            fe.push_back(e.f);
            ge.push_back(e.g);
        }
        double mf = median5(fe), mg = median5(ge);
        int src_idx = row.source[1] == '1' ? 0 : 1;
        std::printf("    table row %s%s: median rel_err_f=%.3e rel_err_g_abs=%.3e\n",
                    row.source, std::string(row.domain) == "full" ? "" : row.domain, mf, mg);
        if (row.table_f > 0.0) {
            bool in_f = mf >= row.table_f / 2.5 && mf <= row.table_f * 2.5;
            bool in_g = mg >= row.table_g / 2.5 && mg <= row.table_g * 2.5;
            ok &= check(in_f, "quantitative f within 2.5x", detail);
            ok &= check(in_g, "quantitative g within 2.5x", detail);
            if (std::string(row.domain) == "full") {
                full_f[src_idx] = mf;
                full_g[src_idx] = mg;
            }
        } else {
            // qualitative: partial-domain errors exceed the full-domain ones
            // (2% slack for Monte Carlo resolution of the medians)
            ok &= check(mf >= 0.98 * full_f[src_idx], "qualitative f ordering", detail);
            ok &= check(mg >= 0.98 * full_g[src_idx], "qualitative g ordering", detail);
        }
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 7
bool criterion_sign_invariance(std::string& detail) {
    bool ok = true;
    const auto& sh = shared();
    auto modes = std::vector<EigenMode>(sh.modes36.begin(), sh.modes36.begin() + 8);
    SimConfig cfg = sh.base;
    cfg.n_modes = 8;
    KernelGram gram = kernel_gram(cfg, modes, constant_profile(1.0));
    auto cells = partition_domain(ObservationDomain::annulus(0.75, 1.0), 1, 6);
    SensorBasis sensors = build_R(cells, modes);

    Eigen::VectorXd g(8);
    g << 10.0, 2.0, 13.0, 0.0, -1.0, 0.4, 0.0, -2.2;
    Eigen::MatrixXd Bp = apply_B(sensors, gram, g);
    Eigen::MatrixXd Bm = apply_B(sensors, gram, -g);
    ok &= check((Bp - Bm).cwiseAbs().maxCoeff() == 0.0, "B(g) = B(-g) bitwise", detail);

    Eigen::MatrixXd Chat = Bp;
    Chat(0, 0) *= 1.03;  // move the fixed point off the init
    Eigen::VectorXd init = Eigen::VectorXd::Zero(8);
    init(0) = 5.0;
    init(2) = 7.0;
    LMConfig plus;
    plus.init = LMConfig::Init::given;
    plus.init_vector = init;
    plus.max_iter = 25;
    LMConfig minus = plus;
    minus.init_vector = -init;
    ReconstructionResult rp = lm_reconstruct(sensors, gram, Chat, plus);
    ReconstructionResult rm = lm_reconstruct(sensors, gram, Chat, minus);
    ok &= check(rp.residual_history == rm.residual_history, "negated iterate residuals", detail);
    ok &= check((rp.g_hat.cwiseAbs() - rm.g_hat.cwiseAbs()).cwiseAbs().maxCoeff() == 0.0,
                "|g_hat| identical", detail);
    return ok;
}

// ---------------------------------------------------------------- criterion 8
bool criterion_ill_posedness(std::string& detail) {
    bool ok = true;
    const auto& sh = shared();
    Eigen::VectorXd dl(36), mrow(36);
    for (int n = 0; n < 36; ++n) {
        dl(n) = sh.gram36.d(n) * sh.modes36[n].eigenvalue;
        mrow(n) = sh.gram36.M(0, n) * std::pow(sh.modes36[n].eigenvalue, 0.375);
    }
    double lo5 = dl.head(5).minCoeff(), hi5 = dl.head(5).maxCoeff();
    for (int n = 0; n < 36; ++n)
        ok &= check(dl(n) >= 0.5 * lo5 && dl(n) <= 2.0 * hi5, "d_n lambda_n band", detail);
    for (int n = 1; n < 36; ++n)
        ok &= check(mrow(n) <= mrow(n - 1) * (1.0 + 1e-9), "M row scaled nonincreasing", detail);
    ok &= check(mrow.maxCoeff() <= mrow(0) * (1.0 + 1e-9), "M row scaled bounded", detail);
    return ok;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        bool (*run)(std::string&);
    };
    const Criterion criteria[] = {
        {"1. special functions (ML series, cos limit, derivative identity)",
         criterion_special_functions},
        {"2. disk spectrum (lambda_1, gram identity, Weyl growth)", criterion_spectrum},
        {"3. Ito isometry moments (exact and path samplers, 5 SE)", criterion_ito_isometry},
        {"4. oracle equivalence (L1 vs mild solution on shared paths)",
         criterion_oracle_equivalence},
        {"5. noiseless closed loop (closed form and Tikhonov)", criterion_closed_loop},
        {"6. reference table desk-scale reproduction (5 seeds, medians)",
         criterion_table_reproduction},
        {"7. sign invariance (quadratic form and LM equivariance)", criterion_sign_invariance},
        {"8. ill-posedness diagnostics (decay bands)", criterion_ill_posedness},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", c.name, secs,
                    detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures;
}
