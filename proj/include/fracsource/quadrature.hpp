#pragma once

// Gauss-Legendre rules and the polar product quadrature on the unit disk.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace fracsource {

struct GaussLegendre {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

/// Nodes and weights via Newton iteration on the Legendre recurrence.
inline GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
    GaussLegendre rule;
    rule.x.resize(n);
    rule.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.x[i] = -x;
        rule.x[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.w[i] = w;
        rule.w[n - 1 - i] = w;
    }
    return rule;
}

/// Same rule mapped to [a, b].
inline GaussLegendre gauss_legendre(int n, double a, double b) {
    GaussLegendre rule = gauss_legendre(n);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        rule.x[i] = mid + half * rule.x[i];
        rule.w[i] *= half;
    }
    return rule;
}

// Product rule on the disk: Gauss-Legendre in r (weights carry the Jacobian
// factor r), midpoint rule in theta.  The midpoint rule is exact for the
// angular harmonics cos/sin(m theta) up to |m| < n_theta/2, which kills
// angular aliasing in the eigenbasis projections.
struct PolarQuadrature {
    std::vector<double> r;        // radial nodes in (0, 1)
    std::vector<double> wr;       // radial weights, include the factor r
    std::vector<double> theta;    // angular nodes in [0, 2 pi)
    double wtheta = 0.0;          // uniform angular weight 2 pi / n_theta

    std::size_t n_r() const { return r.size(); }
    std::size_t n_theta() const { return theta.size(); }
};

inline PolarQuadrature make_quadrature(int n_r, int n_theta) {
    if (n_r < 8) throw std::invalid_argument("make_quadrature: n_r >= 8 required");
    if (n_theta < 16) throw std::invalid_argument("make_quadrature: n_theta >= 16 required");
    PolarQuadrature q;
    GaussLegendre gl = gauss_legendre(n_r, 0.0, 1.0);
    q.r = gl.x;
    q.wr.resize(n_r);
    for (int i = 0; i < n_r; ++i) q.wr[i] = gl.w[i] * gl.x[i];
    q.theta.resize(n_theta);
    for (int j = 0; j < n_theta; ++j) q.theta[j] = (j + 0.5) * 2.0 * M_PI / n_theta;
    q.wtheta = 2.0 * M_PI / n_theta;
    return q;
}

}  // namespace fracsource
