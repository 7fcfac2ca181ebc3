#pragma once

// Recovery of f (Tikhonov-regularized linear least squares on A f = Ehat)
// and |g| (Levenberg-Marquardt on B(g) = Chat, even in g so the sign is not
// identifiable), plus the closed-form full-data recovery and diagnostics.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "fracsource/acquisition.hpp"
#include "fracsource/disk_spectrum.hpp"
#include "fracsource/forward.hpp"

namespace fracsource {

struct TikhonovConfig {
    double gamma_f = 0.0;
};

struct LMConfig {
    enum class Init { zeros_plus_unit, closed_form_diagonal, given };
    double gamma_g = 1e-12;
    int max_iter = 200;
    double step_tol = 1e-8;
    Init init = Init::zeros_plus_unit;
    Eigen::VectorXd init_vector;  // used when init == given
    int n0 = 1;                   // 1-based reference mode for the sign convention
    bool trust_region = false;    // reject steps that increase the residual
};

struct ReconstructionResult {
    Eigen::VectorXd f_hat;
    Eigen::VectorXd g_hat;
    double rel_err_f = 0.0;
    double rel_err_g_abs = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;  // ||Chat - B(g_l)||_F per accepted iterate
    std::vector<double> step_history;      // ||g_{l+1} - g_l|| per accepted step
};

/// argmin ||A f - Ehat||^2 + gamma_f ||f||^2 through the SVD filter factors
/// sigma/(sigma^2 + gamma_f).
inline Eigen::VectorXd tikhonov_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& Ehat,
                                      const TikhonovConfig& cfg) {
    if (A.rows() != Ehat.size()) throw std::invalid_argument("tikhonov_solve: dimension mismatch");
    if (!A.allFinite()) throw std::invalid_argument("tikhonov_solve: matrix has non-finite entries");
    if (cfg.gamma_f < 0.0) throw std::invalid_argument("tikhonov_solve: gamma_f >= 0 required");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (cfg.gamma_f == 0.0 && sv(sv.size() - 1) < 1e-12 * sv(0))
        throw std::runtime_error("tikhonov_solve: rank-deficient system with gamma_f = 0");
    Eigen::VectorXd filtered = svd.matrixU().transpose() * Ehat;
    for (int i = 0; i < sv.size(); ++i)
        filtered(i) *= sv(i) / (sv(i) * sv(i) + cfg.gamma_f);
    return svd.matrixV() * filtered;
}

namespace detail {

// symmetric K x K -> K(K+1)/2 with sqrt(2)-scaled off-diagonal entries, so
// euclidean = Frobenius
inline Eigen::VectorXd sym_vec(const Eigen::MatrixXd& S) {
    const int K = static_cast<int>(S.rows());
    Eigen::VectorXd v(K * (K + 1) / 2);
    const double rt2 = std::sqrt(2.0);
    int p = 0;
    for (int i = 0; i < K; ++i) {
        v(p++) = S(i, i);
        for (int j = i + 1; j < K; ++j) v(p++) = rt2 * S(i, j);
    }
    return v;
}

}  // namespace detail

/// LM iteration g_{l+1} = g_l + [B'(g)^T B'(g) + gamma_g I]^{-1} B'(g)^T (Chat - B(g)).
/// Residual history holds ||Chat - B(g_l)||_F per accepted iterate; the final
/// sign is flipped so g_hat[n0] >= 0.
inline ReconstructionResult lm_reconstruct(const SensorBasis& sensors, const KernelGram& gram,
                                           const Eigen::MatrixXd& Chat, const LMConfig& cfg) {
    const int N = sensors.N();
    const int K = sensors.K();
    if (Chat.rows() != K || Chat.cols() != K)
        throw std::invalid_argument("lm_reconstruct: Chat dimension mismatch");
    if (!(cfg.gamma_g > 0.0)) throw std::invalid_argument("lm_reconstruct: gamma_g > 0 required");
    if (cfg.n0 < 1 || cfg.n0 > N) throw std::invalid_argument("lm_reconstruct: n0 out of range");

    Eigen::VectorXd g;
    switch (cfg.init) {
        case LMConfig::Init::zeros_plus_unit:
            g = Eigen::VectorXd::Zero(N);
            g(cfg.n0 - 1) = 1.0;
            break;
        case LMConfig::Init::closed_form_diagonal: {
            if (sensors.kind != SensorBasis::Kind::spectral)
                throw std::invalid_argument("lm_reconstruct: closed-form init needs spectral sensors");
            g = Eigen::VectorXd::Zero(N);
            for (int m = 0; m < K; ++m) {
                int n = sensors.spectral_indices[m] - 1;  // sensor m observes mode n
                g(n) = std::sqrt(std::max(Chat(m, m), 0.0) / gram.M(n, n));
            }
            break;
        }
        case LMConfig::Init::given:
            if (cfg.init_vector.size() != N)
                throw std::invalid_argument("lm_reconstruct: init vector length mismatch");
            g = cfg.init_vector;
            break;
    }

    ReconstructionResult res;
    double gamma = cfg.gamma_g;
    Eigen::VectorXd r = detail::sym_vec(Chat - apply_B(sensors, gram, g));
    res.residual_history.push_back(r.norm());
    const int P = K * (K + 1) / 2;
    Eigen::MatrixXd J(P, N);

    int iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
        for (int n = 0; n < N; ++n)
            J.col(n) = detail::sym_vec(frechet_B(sensors, gram, g, Eigen::VectorXd::Unit(N, n)));
        Eigen::MatrixXd H = J.transpose() * J;
        H.diagonal().array() += gamma;
        Eigen::VectorXd step = H.ldlt().solve(J.transpose() * r);
        if (!step.allFinite())
            throw std::runtime_error("lm_reconstruct: linear solve produced non-finite step");

        Eigen::VectorXd g_new = g + step;
        Eigen::VectorXd r_new = detail::sym_vec(Chat - apply_B(sensors, gram, g_new));
        if (!std::isfinite(r_new.norm()))
            throw std::runtime_error("lm_reconstruct: non-finite residual");

        if (cfg.trust_region && r_new.norm() > r.norm()) {
            gamma *= 10.0;  // reject, raise damping, retry this iterate
            if (gamma > 1e30) break;
            continue;
        }
        double step_norm = step.norm();
        g = g_new;
        r = r_new;
        res.residual_history.push_back(r.norm());
        res.step_history.push_back(step_norm);
        if (step_norm <= cfg.step_tol * g.norm()) {
            ++iter;
            break;
        }
    }
    res.iterations = iter;
    if (g(cfg.n0 - 1) < 0.0) g = -g;
    res.g_hat = g;
    return res;
}

/// Theorem-4.3 recovery from full spectral moments: f_n = E u_n / d_n,
/// g_{n0} = +sqrt(V(u_{n0}) / M_{n0,n0}), g_n = Cov(u_{n0}, u_n)/(g_{n0} M_{n0,n}).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> closed_form_full(const ModeMoments& moments,
                                                                    const KernelGram& gram,
                                                                    int n0) {
    const int N = static_cast<int>(gram.d.size());
    if (moments.expectation.size() != N || moments.covariance.rows() != N)
        throw std::invalid_argument("closed_form_full: dimension mismatch");
    if (n0 < 1 || n0 > N) throw std::invalid_argument("closed_form_full: n0 out of range");
    const int i0 = n0 - 1;
    double var0 = moments.covariance(i0, i0);
    if (!(var0 > 1e-14))
        throw std::runtime_error("closed_form_full: variance at n0 not positive (<g, phi_n0> = 0?)");
    Eigen::VectorXd f = moments.expectation.cwiseQuotient(gram.d);
    double g0 = std::sqrt(var0 / gram.M(i0, i0));  // positive root by convention
    Eigen::VectorXd g(N);
    for (int n = 0; n < N; ++n) g(n) = moments.covariance(i0, n) / (g0 * gram.M(i0, n));
    return {f, g};
}

/// Relative L^2(D) error of the reconstruction against a pointwise truth
/// field.  absolute = true compares moduli, || |truth| - |approx| || / ||truth||
/// (the error functional used for g).
inline double rel_l2_error(const std::function<double(double, double)>& truth,
                           const Eigen::VectorXd& approx_coeffs,
                           const std::vector<EigenMode>& modes, const PolarQuadrature& quad,
                           bool absolute) {
    ModeTable table(modes, quad);
    Eigen::MatrixXd approx = table.synthesize(approx_coeffs);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < quad.n_r(); ++i) {
        for (std::size_t j = 0; j < quad.n_theta(); ++j) {
            double w = quad.wr[i] * quad.wtheta;
            double t = truth(quad.r[i], quad.theta[j]);
            double a = approx(i, j);
            double diff = absolute ? std::fabs(t) - std::fabs(a) : t - a;
            num += w * diff * diff;
            den += w * t * t;
        }
    }
    if (den <= 0.0) throw std::invalid_argument("rel_l2_error: truth has zero norm");
    return std::sqrt(num / den);
}

struct ConditioningReport {
    Eigen::VectorXd d_lambda;       // d_n lambda_n (bounded above and below)
    Eigen::VectorXd m_row_scaled;   // M_{n0,n} lambda_n^{1 - 1/(2 alpha)} (bounded above)
    Eigen::VectorXd singular_values;  // of A
};

/// Decay diagnostics behind the mild (polynomial) ill-posedness of the
/// recovery: d_n ~ lambda_n^{-1} and M_{n0,n} ~ lambda_n^{-1+1/(2 alpha)}.
inline ConditioningReport conditioning_report(const Eigen::MatrixXd& A, const KernelGram& gram,
                                              const std::vector<EigenMode>& modes, int n0,
                                              double alpha) {
    const int N = static_cast<int>(gram.d.size());
    ConditioningReport rep;
    rep.d_lambda.resize(N);
    rep.m_row_scaled.resize(N);
    const double expo = 1.0 - 1.0 / (2.0 * alpha);
    for (int n = 0; n < N; ++n) {
        double lam = modes[n].eigenvalue;
        rep.d_lambda(n) = gram.d(n) * lam;
        rep.m_row_scaled(n) = gram.M(n0 - 1, n) * std::pow(lam, expo);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    rep.singular_values = svd.singularValues();
    return rep;
}

}  // namespace fracsource
