#pragma once

// Dirichlet eigensystem of -Laplace on the unit disk.  Eigenfunctions are
// w J_m(j r) cos(m theta) / sin(m theta) with j a positive zero of J_m and
// eigenvalue lambda = j^2; w normalizes to unit L^2(D) norm.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracsource/quadrature.hpp"

namespace fracsource {

enum class Parity { cosine, sine };

struct EigenMode {
    int index = 0;           // 1-based position in the lambda-sorted list
    int angular_degree = 0;  // m
    int radial_index = 0;    // k: which zero of J_m
    Parity parity = Parity::cosine;
    double bessel_zero = 0.0;  // j_{m,k}
    double eigenvalue = 0.0;   // lambda = j^2
    double weight = 0.0;       // normalization w
};

/// Bessel function of the first kind, integer degree.
inline double bessel_j(int m, double x) {
    if (x < 0.0) throw std::domain_error("bessel_j: x must be nonnegative");
    if (m < 0) throw std::domain_error("bessel_j: degree must be nonnegative");
    return std::cyl_bessel_j(static_cast<double>(m), x);
}

/// First `count` positive zeros of J_m, refined to ~1e-14 by bisection.
inline std::vector<double> bessel_zeros(int m, int count) {
    if (count < 1) throw std::invalid_argument("bessel_zeros: count >= 1 required");
    std::vector<double> zeros;
    zeros.reserve(count);
    const double step = M_PI / 8.0;
    // J_m is positive on (0, j_{m,1}) and j_{m,1} > m, so start the scan at m
    double a = (m == 0) ? 0.5 : static_cast<double>(m);
    double fa = bessel_j(m, a);
    const double scan_limit = a + (count + 2) * (M_PI + 2.0) + 3.0 * std::cbrt(m + 1.0) + 16.0;
    while (static_cast<int>(zeros.size()) < count) {
        double b = a + step;
        if (b > scan_limit)
            throw std::runtime_error("bessel_zeros: bracketing scan exhausted (resolution failure)");
        double fb = bessel_j(m, b);
        if ((fa < 0.0) != (fb < 0.0)) {
            double lo = a, hi = b, flo = fa;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                double fm = bessel_j(m, mid);
                if ((flo < 0.0) != (fm < 0.0)) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
                if (hi - lo < 1e-15 * hi) break;
            }
            zeros.push_back(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    return zeros;
}

namespace detail {

inline double mode_weight(int m, double j) {
    // from int_0^1 J_m(j r)^2 r dr = J_{m+1}(j)^2 / 2 at zeros of J_m
    double jm1 = std::fabs(bessel_j(m + 1, j));
    if (m == 0) return 1.0 / (std::sqrt(M_PI) * jm1);
    return std::sqrt(2.0 / M_PI) / jm1;
}

}  // namespace detail

/// First N modes, lambda nondecreasing; ties: smaller m first, cosine before
/// sine.  Both parities are emitted for m >= 1 (degenerate pairs).
inline std::vector<EigenMode> build_eigensystem(int N) {
    if (N < 1 || N > 400) throw std::invalid_argument("build_eigensystem: need 1 <= N <= 400");
    double bound = std::sqrt(4.0 * N) + 6.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<EigenMode> modes;
        for (int m = 0; m <= static_cast<int>(bound); ++m) {
            // zero spacing tends to pi, so this overshoots slightly
            int count = static_cast<int>((bound - m) / M_PI) + 2;
            std::vector<double> zs = bessel_zeros(m, count);
            for (int k = 1; k <= count; ++k) {
                double j = zs[k - 1];
                if (j > bound) break;
                EigenMode mode;
                mode.angular_degree = m;
                mode.radial_index = k;
                mode.bessel_zero = j;
                mode.eigenvalue = j * j;
                mode.weight = detail::mode_weight(m, j);
                mode.parity = Parity::cosine;
                modes.push_back(mode);
                if (m >= 1) {
                    mode.parity = Parity::sine;
                    modes.push_back(mode);
                }
            }
        }
        std::sort(modes.begin(), modes.end(), [](const EigenMode& a, const EigenMode& b) {
            if (a.eigenvalue != b.eigenvalue) return a.eigenvalue < b.eigenvalue;
            if (a.angular_degree != b.angular_degree) return a.angular_degree < b.angular_degree;
            return a.parity == Parity::cosine && b.parity == Parity::sine;
        });
        if (static_cast<int>(modes.size()) >= N) {
            modes.resize(N);
            for (int n = 0; n < N; ++n) modes[n].index = n + 1;
            return modes;
        }
        bound *= 1.5;  // one expansion, then give up
    }
    throw std::runtime_error("build_eigensystem: search bound too small for requested N");
}

/// phi_n(r, theta)
inline double eval_phi(const EigenMode& mode, double r, double theta) {
    if (r < 0.0 || r > 1.0) throw std::domain_error("eval_phi: r must lie in [0, 1]");
    double radial = mode.weight * bessel_j(mode.angular_degree, mode.bessel_zero * r);
    double arg = mode.angular_degree * theta;
    return radial * (mode.parity == Parity::cosine ? std::cos(arg) : std::sin(arg));
}

// Tabulated mode values on a polar grid; shared by projection, sensor
// assembly and error norms so the (moderately expensive) Bessel evaluations
// happen once.
class ModeTable {
public:
    ModeTable(const std::vector<EigenMode>& modes, const PolarQuadrature& quad)
        : modes_(&modes), quad_(&quad) {
        const std::size_t nr = quad.n_r(), nth = quad.n_theta(), N = modes.size();
        radial_.resize(N, Eigen::VectorXd(nr));
        angular_.resize(N, Eigen::VectorXd(nth));
        for (std::size_t n = 0; n < N; ++n) {
            const EigenMode& md = modes[n];
            for (std::size_t i = 0; i < nr; ++i)
                radial_[n](i) = md.weight * bessel_j(md.angular_degree, md.bessel_zero * quad.r[i]);
            for (std::size_t j = 0; j < nth; ++j) {
                double arg = md.angular_degree * quad.theta[j];
                angular_[n](j) = md.parity == Parity::cosine ? std::cos(arg) : std::sin(arg);
            }
        }
    }

    const std::vector<EigenMode>& modes() const { return *modes_; }
    const PolarQuadrature& quad() const { return *quad_; }
    double phi(std::size_t n, std::size_t i, std::size_t j) const {
        return radial_[n](i) * angular_[n](j);
    }

    /// Quadrature inner products <field, phi_n> for all n.
    Eigen::VectorXd project(const std::function<double(double, double)>& field) const {
        const auto& q = *quad_;
        const std::size_t nr = q.n_r(), nth = q.n_theta(), N = modes_->size();
        Eigen::MatrixXd fv(nr, nth);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < nth; ++j) fv(i, j) = field(q.r[i], q.theta[j]);
        Eigen::VectorXd out(N);
        for (std::size_t n = 0; n < N; ++n) {
            double acc = 0.0;
            for (std::size_t i = 0; i < nr; ++i) {
                double inner = 0.0;
                for (std::size_t j = 0; j < nth; ++j) inner += fv(i, j) * angular_[n](j);
                acc += q.wr[i] * radial_[n](i) * inner;
            }
            out(n) = acc * q.wtheta;
        }
        return out;
    }

    /// Field values of sum_n c_n phi_n on the quadrature grid.
    Eigen::MatrixXd synthesize(const Eigen::VectorXd& coeffs) const {
        const auto& q = *quad_;
        const std::size_t nr = q.n_r(), nth = q.n_theta(), N = modes_->size();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nr, nth);
        for (std::size_t n = 0; n < N; ++n) {
            if (coeffs(n) == 0.0) continue;
            for (std::size_t i = 0; i < nr; ++i)
                for (std::size_t j = 0; j < nth; ++j)
                    out(i, j) += coeffs(n) * radial_[n](i) * angular_[n](j);
        }
        return out;
    }

private:
    const std::vector<EigenMode>* modes_;
    const PolarQuadrature* quad_;
    std::vector<Eigen::VectorXd> radial_;   // per mode: w J_m(j r_i)
    std::vector<Eigen::VectorXd> angular_;  // per mode: cos/sin(m theta_j)
};

/// Coefficient vector of a scalar field in the eigenbasis.
inline Eigen::VectorXd project(const std::function<double(double, double)>& field,
                               const std::vector<EigenMode>& modes, const PolarQuadrature& quad) {
    return ModeTable(modes, quad).project(field);
}

/// Field value of sum_n c_n phi_n at one point.
inline double synthesize_at(const Eigen::VectorXd& coeffs, const std::vector<EigenMode>& modes,
                            double r, double theta) {
    double acc = 0.0;
    for (std::size_t n = 0; n < modes.size(); ++n)
        if (coeffs(n) != 0.0) acc += coeffs(n) * eval_phi(modes[n], r, theta);
    return acc;
}

}  // namespace fracsource
