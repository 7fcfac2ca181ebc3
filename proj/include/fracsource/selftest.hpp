#pragma once

// Reduced invariant suites runnable from the command line; each suite prints
// one status line.  The Catch2 suites under tests/ are the thorough version.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fracsource/acquisition.hpp"
#include "fracsource/disk_spectrum.hpp"
#include "fracsource/forward.hpp"
#include "fracsource/inversion.hpp"
#include "fracsource/mlf.hpp"

namespace fracsource {

namespace detail {

struct SelftestReporter {
    int failures = 0;
    void check(const std::string& suite, bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            std::printf("  [%s] FAILED: %s\n", suite.c_str(), what.c_str());
        }
    }
};

}  // namespace detail

inline bool selftest_mlf(detail::SelftestReporter& rep) {
    const std::string s = "mlf";
    int before = rep.failures;
    // exponential reduction
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        double x = -10.0 + 12.0 * i / 200.0;
        worst = std::max(worst, std::fabs(ml({1.0, 1.0}, x) - std::exp(x)));
    }
    rep.check(s, worst <= 1e-12, "E_{1,1} vs exp");
    // derivative identity d/dt E_{a,1}(-lam t^a) = -lam t^{a-1} E_{a,a}(-lam t^a)
    for (double a : {0.6, 0.8}) {
        for (double lam : {1.0, 10.0, 100.0}) {
            double bad = 0.0;
            for (int i = 1; i <= 20; ++i) {
                double t = 0.1 + 0.85 * i / 21.0;
                double eps = 1e-6 * t;
                double fd = (ml({a, 1.0}, -lam * std::pow(t + eps, a)) -
                             ml({a, 1.0}, -lam * std::pow(t - eps, a))) / (2.0 * eps);
                double exact = -lam * std::pow(t, a - 1.0) * ml({a, a}, -lam * std::pow(t, a));
                bad = std::max(bad, std::fabs(fd - exact) / std::fabs(exact));
            }
            rep.check(s, bad <= 1e-5, "derivative identity");
        }
    }
    // complete monotonicity spot check
    for (double a : {0.6, 0.8}) {
        double prev1 = 1e300, prev2 = 1e300;
        bool mono = true, nonneg = true;
        for (int i = 0; i <= 100; ++i) {
            double t = i;
            double v1 = ml({a, 1.0}, -t), v2 = ml({a, a}, -t);
            if (v1 > prev1 + 1e-14 || v2 > prev2 + 1e-14) mono = false;
            if (v1 < -1e-14 || v2 < -1e-14) nonneg = false;
            prev1 = v1;
            prev2 = v2;
        }
        rep.check(s, mono && nonneg, "complete monotonicity");
    }
    // kernel primitive additivity
    KernelSpec ks(0.8, 5.7832, 1.0);
    double vab = kernel_primitive(ks, 0.0, 0.4), vbc = kernel_primitive(ks, 0.4, 1.0);
    rep.check(s, std::fabs(vab + vbc - kernel_primitive(ks, 0.0, 1.0)) <= 1e-13, "additivity");
    return rep.failures == before;
}

inline bool selftest_spectrum(detail::SelftestReporter& rep) {
    const std::string s = "spectrum";
    int before = rep.failures;
    auto modes = build_eigensystem(12);
    rep.check(s, std::fabs(modes[0].eigenvalue - 5.783185962946785) <= 1e-9, "lambda_1");
    auto quad = make_quadrature(48, 128);
    ModeTable table(modes, quad);
    double worst = 0.0;
    for (std::size_t a = 0; a < modes.size(); ++a) {
        Eigen::VectorXd row = table.project([&](double r, double th) {
            return eval_phi(modes[a], r, th);
        });
        for (std::size_t b = 0; b < modes.size(); ++b)
            worst = std::max(worst, std::fabs(row(b) - (a == b ? 1.0 : 0.0)));
    }
    rep.check(s, worst <= 1e-7, "gram identity");
    return rep.failures == before;
}

inline bool selftest_forward(detail::SelftestReporter& rep) {
    const std::string s = "forward";
    int before = rep.failures;
    auto modes = build_eigensystem(6);
    SimConfig cfg;
    cfg.n_modes = 6;
    cfg.n_t = 256;
    cfg.realizations = 4000;
    cfg.seed = 42;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6), g = Eigen::VectorXd::Zero(6);
    f(0) = 2.0;
    g(0) = 3.0; g(2) = -1.5;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};
    KernelGram gram = kernel_gram(cfg, modes, src.h);
    // h == 1: quadrature d against the closed form
    double worst = 0.0;
    for (int n = 0; n < 6; ++n) {
        KernelSpec ks(cfg.alpha, modes[n].eigenvalue, cfg.T);
        worst = std::max(worst, std::fabs(gram.d(n) - kernel_primitive(ks, 0.0, cfg.T)));
    }
    rep.check(s, worst <= 1e-10, "d vs closed form");
    // zero path reproduces the mean exactly
    std::vector<double> zero(cfg.n_t, 0.0);
    Eigen::VectorXd u0 = sample_final_coeffs(src, cfg, modes, zero);
    ModeMoments an = analytic_moments(src, gram);
    rep.check(s, (u0 - an.expectation).cwiseAbs().maxCoeff() <= 1e-12, "zero-path mean");
    // ensemble variance within 5 standard errors
    ModeMoments emp = simulate_ensemble(src, cfg, modes);
    double se = an.covariance(0, 0) * std::sqrt(2.0 / (cfg.realizations - 1.0));
    rep.check(s, std::fabs(emp.covariance(0, 0) - an.covariance(0, 0)) <= 5.0 * se,
              "ensemble variance");
    return rep.failures == before;
}

inline bool selftest_acquisition(detail::SelftestReporter& rep) {
    const std::string s = "acquisition";
    int before = rep.failures;
    auto modes = build_eigensystem(6);
    SimConfig cfg;
    cfg.n_modes = 6;
    KernelGram gram = kernel_gram(cfg, modes, constant_profile(1.0));
    auto cells = partition_domain(ObservationDomain::annulus(0.75, 1.0), 2, 8);
    double area = 0.0;
    for (const auto& c : cells) area += c.area();
    rep.check(s, std::fabs(area - M_PI * (1.0 - 0.5625)) <= 1e-10, "cell areas");
    SensorBasis sb = build_R(cells, modes);
    Eigen::VectorXd g(6);
    g << 1.0, -2.0, 0.5, 0.0, 1.5, -0.25;
    Eigen::MatrixXd Bp = apply_B(sb, gram, g), Bm = apply_B(sb, gram, -g);
    rep.check(s, (Bp - Bm).cwiseAbs().maxCoeff() == 0.0, "B sign invariance");
    // Euler identity B'(g)[g] = 2 B(g)
    Eigen::MatrixXd Bd = frechet_B(sb, gram, g, g);
    rep.check(s, (Bd - 2.0 * Bp).cwiseAbs().maxCoeff() <= 1e-12 * Bp.cwiseAbs().maxCoeff(),
              "Euler identity");
    return rep.failures == before;
}

inline bool selftest_inversion(detail::SelftestReporter& rep) {
    const std::string s = "inversion";
    int before = rep.failures;
    auto modes = build_eigensystem(8);
    SimConfig cfg;
    cfg.n_modes = 8;
    KernelGram gram = kernel_gram(cfg, modes, constant_profile(1.0));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(8), g = Eigen::VectorXd::Zero(8);
    f(0) = 10.0; f(1) = 5.0; f(2) = 12.0;
    g(0) = 10.0; g(1) = 2.0; g(2) = 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};
    ModeMoments mm = analytic_moments(src, gram);
    auto [fh, gh] = closed_form_full(mm, gram, 1);
    rep.check(s, (fh - f).norm() <= 1e-8 * f.norm(), "closed form f");
    rep.check(s, (gh - g).norm() <= 1e-8 * g.norm(), "closed form g");
    // noiseless LM from the closed-form diagonal init
    std::vector<int> idx(8);
    for (int n = 0; n < 8; ++n) idx[n] = n + 1;
    SensorBasis sb = make_spectral_basis(idx, 8);
    LMConfig lmc;
    lmc.init = LMConfig::Init::closed_form_diagonal;
    lmc.max_iter = 50;
    ReconstructionResult lm = lm_reconstruct(sb, gram, mm.covariance, lmc);
    rep.check(s, (lm.g_hat - g).norm() <= 1e-6, "noiseless LM");
    return rep.failures == before;
}

/// Runs all suites; returns the number of failed checks.
inline int selftest() {
    detail::SelftestReporter rep;
    struct Suite {
        const char* name;
        std::function<bool(detail::SelftestReporter&)> run;
    };
    std::vector<Suite> suites = {
        {"mlf", selftest_mlf},
        {"spectrum", selftest_spectrum},
        {"forward", selftest_forward},
        {"acquisition", selftest_acquisition},
        {"inversion", selftest_inversion},
    };
    for (const auto& suite : suites) {
        bool ok = suite.run(rep);
        std::printf("%-12s %s\n", suite.name, ok ? "PASS" : "FAIL");
    }
    return rep.failures;
}

}  // namespace fracsource
