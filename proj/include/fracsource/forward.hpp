#pragma once

// Forward problem for the stochastic time-fractional diffusion equation
// with source f(x) h(t) + g(x) dW(t): final-time mode coefficients
//
//   u_n(T) = f_n int_0^T G_n(T - tau) h(tau) dtau
//          + g_n int_0^T G_n(T - tau) dW(tau),
//   G_n(t) = t^{alpha-1} E_{alpha,alpha}(-lambda_n t^alpha).
//
// The noise is white in time only, so all modes share one Wiener path and
// the final-time coefficient vector is Gaussian with
//   E u_n(T) = f_n d_n,   Cov(u_m, u_n) = g_m g_n M_mn
// (Ito isometry), where d and M are the kernel integrals below.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fracsource/disk_spectrum.hpp"
#include "fracsource/mlf.hpp"
#include "fracsource/quadrature.hpp"
#include "fracsource/rng.hpp"

namespace fracsource {

using TimeProfile = std::function<double(double)>;

struct SourceSpec {
    Eigen::VectorXd f_coeffs;
    Eigen::VectorXd g_coeffs;
    TimeProfile h;
    double c_h = 0.0;  // positive lower bound of h

    /// Checks h >= c_h > 0 on a sample grid and g != 0.
    void validate(double T, int samples = 257) const {
        if (!(c_h > 0.0)) throw std::invalid_argument("SourceSpec: c_h must be positive");
        if (g_coeffs.size() != f_coeffs.size())
            throw std::invalid_argument("SourceSpec: coefficient lengths differ");
        if (g_coeffs.isZero(0.0)) throw std::invalid_argument("SourceSpec: g must not vanish");
        for (int i = 0; i < samples; ++i) {
            double t = T * i / (samples - 1.0);
            if (!(h(t) >= c_h)) throw std::invalid_argument("SourceSpec: h(t) < c_h detected");
        }
    }
};

inline TimeProfile constant_profile(double value) {
    return [value](double) { return value; };
}

struct SimConfig {
    double alpha = 0.8;
    double T = 1.0;
    int n_modes = 36;
    int n_t = 2048;          // time steps per path
    int realizations = 1000; // ensemble size M
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha > 0.5 && alpha < 1.0))
            throw std::invalid_argument("SimConfig: alpha must lie in (1/2, 1)");
        if (!(T > 0.0)) throw std::invalid_argument("SimConfig: T must be positive");
        if (n_t < 2) throw std::invalid_argument("SimConfig: n_t >= 2 required");
        if (realizations < 1) throw std::invalid_argument("SimConfig: M >= 1 required");
        if (n_modes < 1) throw std::invalid_argument("SimConfig: n_modes >= 1 required");
    }
};

struct ModeMoments {
    Eigen::VectorXd expectation;
    Eigen::MatrixXd covariance;
};

struct KernelGram {
    Eigen::VectorXd d;  // d_k = int_0^T tau^{a-1} E_aa(-lam_k tau^a) h(T-tau) dtau
    Eigen::MatrixXd M;  // M_kl = int_0^T tau^{2a-2} E_aa(-lam_k tau^a) E_aa(-lam_l tau^a) dtau
};

namespace detail {

// geometric panels toward 0 absorb the loss of smoothness the power
// substitutions leave at the origin
inline GaussLegendre graded_rule(double b, int nodes_per_panel, int panels = 12, double ratio = 4.0) {
    GaussLegendre out;
    double hi = b;
    for (int p = 0; p < panels; ++p) {
        double lo = (p + 1 == panels) ? 0.0 : hi / ratio;
        GaussLegendre seg = gauss_legendre(nodes_per_panel, lo, hi);
        out.x.insert(out.x.end(), seg.x.begin(), seg.x.end());
        out.w.insert(out.w.end(), seg.w.begin(), seg.w.end());
        hi = lo;
    }
    return out;
}

inline KernelGram kernel_gram_at_resolution(const SimConfig& cfg,
                                            const std::vector<EigenMode>& modes,
                                            const TimeProfile& h, int nodes_per_panel) {
    const int N = static_cast<int>(modes.size());
    const double a = cfg.alpha, T = cfg.T;
    KernelGram gram;
    gram.d.resize(N);
    gram.M.resize(N, N);

    // d: substitution s = tau^alpha makes the integrand bounded:
    // d_k = (1/a) int_0^{T^a} E_aa(-lam_k s) h(T - s^{1/a}) ds
    {
        GaussLegendre rule = graded_rule(std::pow(T, a), nodes_per_panel);
        std::vector<double> hw(rule.x.size());
        for (std::size_t q = 0; q < rule.x.size(); ++q)
            hw[q] = rule.w[q] * h(T - std::pow(rule.x[q], 1.0 / a));
        for (int k = 0; k < N; ++k) {
            double lam = modes[k].eigenvalue;
            double acc = 0.0;
            for (std::size_t q = 0; q < rule.x.size(); ++q)
                acc += hw[q] * ml({a, a}, -lam * rule.x[q]);
            gram.d(k) = acc / a;
        }
    }

    // M: substitution s = tau^{2a-1} absorbs the tau^{2a-2} singularity:
    // M_kl = (1/(2a-1)) int_0^{T^{2a-1}} E_aa(-lam_k s^gamma) E_aa(-lam_l s^gamma) ds,
    // gamma = a/(2a-1)
    {
        const double gamma = a / (2.0 * a - 1.0);
        GaussLegendre rule = graded_rule(std::pow(T, 2.0 * a - 1.0), nodes_per_panel);
        const std::size_t Q = rule.x.size();
        Eigen::MatrixXd ev(N, Q);  // E_aa(-lam_k s_q^gamma)
        for (std::size_t q = 0; q < Q; ++q) {
            double u = std::pow(rule.x[q], gamma);
            for (int k = 0; k < N; ++k) ev(k, q) = ml({a, a}, -modes[k].eigenvalue * u);
        }
        Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(rule.w.data(), Q) / (2.0 * a - 1.0);
        gram.M.noalias() = ev * w.asDiagonal() * ev.transpose();
        gram.M = 0.5 * (gram.M + gram.M.transpose()).eval();
    }
    return gram;
}

}  // namespace detail

/// Kernel integrals d and M; signals if doubling the quadrature still moves
/// any entry by more than 1e-9.
inline KernelGram kernel_gram(const SimConfig& cfg, const std::vector<EigenMode>& modes,
                              const TimeProfile& h, int nodes_per_panel = 24) {
    cfg.validate();
    KernelGram coarse = detail::kernel_gram_at_resolution(cfg, modes, h, nodes_per_panel);
    KernelGram fine = detail::kernel_gram_at_resolution(cfg, modes, h, 2 * nodes_per_panel);
    double dd = (coarse.d - fine.d).cwiseAbs().maxCoeff();
    double dM = (coarse.M - fine.M).cwiseAbs().maxCoeff();
    if (dd > 1e-9 || dM > 1e-9)
        throw std::runtime_error("kernel_gram: quadrature not converged (doubling moved entries)");
    return fine;
}

/// Moments implied by (f, g): expectation_n = f_n d_n, covariance = (g g^T) o M.
inline ModeMoments analytic_moments(const SourceSpec& source, const KernelGram& gram) {
    if (source.f_coeffs.size() != gram.d.size())
        throw std::invalid_argument("analytic_moments: dimension mismatch");
    ModeMoments mm;
    mm.expectation = source.f_coeffs.cwiseProduct(gram.d);
    mm.covariance = (source.g_coeffs * source.g_coeffs.transpose()).cwiseProduct(gram.M);
    return mm;
}

// Discretization of the mild solution at t = T on a uniform grid.  The Ito
// integral uses exact per-interval kernel averages, kernel_primitive/dt:
// the kernel is singular at tau = T and endpoint sampling misses mass.
class MildPathSampler {
public:
    MildPathSampler(const SourceSpec& source, const SimConfig& cfg,
                    const std::vector<EigenMode>& modes)
        : f_(source.f_coeffs), g_(source.g_coeffs), n_t_(cfg.n_t), dt_(cfg.T / cfg.n_t) {
        const int N = static_cast<int>(modes.size());
        if (f_.size() != N) throw std::invalid_argument("MildPathSampler: dimension mismatch");
        prim_.resize(N, n_t_);
        drift_.resize(N);
        const double T = cfg.T;
        std::vector<double> E(n_t_ + 1);  // E_{a,1}(-lam (T - t_j)^a) at grid points
        for (int n = 0; n < N; ++n) {
            const double lam = modes[n].eigenvalue;
            for (int j = 0; j <= n_t_; ++j) {
                double s = T - j * dt_;
                E[j] = (j == n_t_) ? 1.0 : ml({cfg.alpha, 1.0}, -lam * std::pow(s, cfg.alpha));
            }
            double drift = 0.0;
            for (int j = 0; j < n_t_; ++j) {
                // primitive over the s-interval [T - t_{j+1}, T - t_j],
                // paired with h at the midpoint of [t_j, t_{j+1}]
                double p = std::max(0.0, (E[j + 1] - E[j]) / lam);
                prim_(n, j) = p;
                drift += p * source.h((j + 0.5) * dt_);
            }
            drift_(n) = f_(n) * drift;
        }
    }

    int n_t() const { return n_t_; }
    double dt() const { return dt_; }

    /// u_n(T) for one path of increments dW_j ~ N(0, dt), j = 0..n_t-1.
    Eigen::VectorXd sample(std::span<const double> dW) const {
        if (static_cast<int>(dW.size()) != n_t_)
            throw std::invalid_argument("MildPathSampler: path length mismatch");
        Eigen::Map<const Eigen::VectorXd> w(dW.data(), n_t_);
        Eigen::VectorXd stoch = prim_ * w / dt_;
        return drift_ + g_.cwiseProduct(stoch);
    }

private:
    Eigen::VectorXd f_, g_;
    int n_t_;
    double dt_;
    Eigen::MatrixXd prim_;   // kernel_primitive over each lookback interval
    Eigen::VectorXd drift_;  // f_n sum_j h(t_{j+1/2}) P_{nj}
};

/// One-shot convenience wrapper around MildPathSampler.
inline Eigen::VectorXd sample_final_coeffs(const SourceSpec& source, const SimConfig& cfg,
                                           const std::vector<EigenMode>& modes,
                                           std::span<const double> dW) {
    return MildPathSampler(source, cfg, modes).sample(dW);
}

// Exact sampler for the final-time Gaussian vector: mean + L xi with
// L L^T = (g g^T) o M = diag(g) M diag(g).  M is only positive
// *semi*definite (degenerate eigenvalue pairs repeat the same kernel), so L
// comes from the spectral factor of M with small negative eigenvalues
// clipped; rows with g_n = 0 are exactly zero.
class ExactGaussianSampler {
public:
    ExactGaussianSampler(const SourceSpec& source, const KernelGram& gram) {
        ModeMoments mm = analytic_moments(source, gram);
        mean_ = mm.expectation;
        const int N = static_cast<int>(mean_.size());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.M);
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("ExactGaussianSampler: factorization failed (defective M?)");
        double budget = 1e-14 * gram.M.trace() / N;  // tolerated rounding negativity
        Eigen::VectorXd lam = eig.eigenvalues();
        for (int i = 0; i < N; ++i) {
            if (lam(i) < -budget)
                throw std::runtime_error("ExactGaussianSampler: M indefinite beyond rounding");
            lam(i) = std::sqrt(std::max(lam(i), 0.0));
        }
        L_ = source.g_coeffs.asDiagonal() * eig.eigenvectors() * lam.asDiagonal();
    }

    Eigen::VectorXd sample(NormalStream& stream) const {
        Eigen::VectorXd xi(mean_.size());
        for (int i = 0; i < xi.size(); ++i) xi(i) = stream.normal();
        return mean_ + L_ * xi;
    }

    const Eigen::VectorXd& mean() const { return mean_; }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd L_;
};

/// One exact draw from substream (seed, 0).
inline Eigen::VectorXd exact_gaussian_sample(const SourceSpec& source, const KernelGram& gram,
                                             std::uint64_t seed) {
    ExactGaussianSampler sampler(source, gram);
    NormalStream stream(seed, 0);
    return sampler.sample(stream);
}

/// Sample mean and unbiased covariance over M independent paths.  Path i
/// draws from substream (seed, i); the reduction order is fixed, so a seed
/// pins the output bit-for-bit.
inline ModeMoments simulate_ensemble(const SourceSpec& source, const SimConfig& cfg,
                                     const std::vector<EigenMode>& modes) {
    cfg.validate();
    if (cfg.realizations < 2)
        throw std::invalid_argument("simulate_ensemble: M >= 2 required (covariance undefined)");
    MildPathSampler sampler(source, cfg, modes);
    const int N = static_cast<int>(modes.size());
    const int M = cfg.realizations;
    const double sqdt = std::sqrt(sampler.dt());

    Eigen::MatrixXd draws(N, M);
    std::vector<double> dW(cfg.n_t);
    for (int i = 0; i < M; ++i) {
        NormalStream stream(cfg.seed, static_cast<std::uint64_t>(i));
        for (int j = 0; j < cfg.n_t; ++j) dW[j] = sqdt * stream.normal();
        draws.col(i) = sampler.sample(dW);
    }
    ModeMoments mm;
    mm.expectation = draws.rowwise().mean();
    Eigen::MatrixXd centered = draws.colwise() - mm.expectation;
    mm.covariance = centered * centered.transpose() / (M - 1.0);
    return mm;
}

/// L1 time-stepping oracle for the per-mode fractional ODE
/// d_t^alpha y + lambda y = f_n h + g_n dW/dt, y(0) = 0; returns y(T).
/// Caputo weights b_j = (j+1)^{1-alpha} - j^{1-alpha}; lambda implicit.
inline double l1_mode_solve(const EigenMode& mode, const SourceSpec& source, const SimConfig& cfg,
                            std::span<const double> dW) {
    cfg.validate();
    const int nt = cfg.n_t;
    if (static_cast<int>(dW.size()) != nt)
        throw std::invalid_argument("l1_mode_solve: path length mismatch");
    const double a = cfg.alpha;
    const double dt = cfg.T / nt;
    const double lam = mode.eigenvalue;
    const int idx = mode.index - 1;
    const double fn = source.f_coeffs(idx), gn = source.g_coeffs(idx);
    const double c0 = std::pow(dt, -a) / std::tgamma(2.0 - a);

    std::vector<double> b(nt);
    for (int j = 0; j < nt; ++j) b[j] = std::pow(j + 1.0, 1.0 - a) - std::pow(j, 1.0 - a);

    std::vector<double> y(nt + 1, 0.0);
    for (int k = 1; k <= nt; ++k) {
        double hist = 0.0;  // sum_{j=0}^{k-2} b_{k-1-j} (y_{j+1} - y_j)
        for (int j = 0; j <= k - 2; ++j) hist += b[k - 1 - j] * (y[j + 1] - y[j]);
        double force = fn * source.h(k * dt) + gn * dW[k - 1] / dt;
        y[k] = (force + c0 * (y[k - 1] - hist)) / (c0 + lam);
    }
    return y[nt];
}

}  // namespace fracsource
