#pragma once

// Observation side of the inverse problem: sensor functionals psi_m (either
// eigenmodes themselves or indicator functions of polar cells tiling a
// measured subdomain), the projection matrix R with R_{km} = <psi_m, phi_k>,
// the linear source-to-expectation operator A = R^T diag(d), the quadratic
// source-to-covariance operator B(g) = R^T ((g g^T) o M) R, and clean/noisy
// observed data.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fracsource/disk_spectrum.hpp"
#include "fracsource/forward.hpp"
#include "fracsource/rng.hpp"

namespace fracsource {

struct PolarCell {
    double r0, r1, theta0, theta1;
    double area() const { return 0.5 * (r1 * r1 - r0 * r0) * (theta1 - theta0); }
};

struct ObservationDomain {
    enum class Kind { full, concentric, annulus, sectors };
    Kind kind = Kind::full;
    double rho0 = 0.0, rho1 = 1.0;
    std::vector<std::array<double, 4>> sector_list;  // {r0, r1, theta0, theta1}

    static ObservationDomain full() { return {}; }
    static ObservationDomain concentric(double rho) {
        check_radii(0.0, rho);
        return {Kind::concentric, 0.0, rho, {}};
    }
    static ObservationDomain annulus(double r0, double r1) {
        check_radii(r0, r1);
        return {Kind::annulus, r0, r1, {}};
    }
    static ObservationDomain sectors(std::vector<std::array<double, 4>> list) {
        if (list.empty()) throw std::invalid_argument("ObservationDomain: empty sector list");
        for (const auto& s : list) {
            check_radii(s[0], s[1]);
            if (!(s[2] >= 0.0 && s[2] < 2.0 * M_PI && s[3] > s[2]))
                throw std::invalid_argument("ObservationDomain: bad sector angles");
        }
        return {Kind::sectors, 0.0, 1.0, std::move(list)};
    }

private:
    static void check_radii(double r0, double r1) {
        if (!(0.0 <= r0 && r0 < r1 && r1 <= 1.0))
            throw std::invalid_argument("ObservationDomain: need 0 <= rho0 < rho1 <= 1");
    }
};

/// Uniform (r, theta) partition of the measured domain; sectors are
/// partitioned independently.
inline std::vector<PolarCell> partition_domain(const ObservationDomain& dom, int n_r_cells,
                                               int n_theta_cells) {
    if (n_r_cells < 1 || n_theta_cells < 1)
        throw std::invalid_argument("partition_domain: cell counts >= 1 required");
    std::vector<std::array<double, 4>> patches;
    using Kind = ObservationDomain::Kind;
    switch (dom.kind) {
        case Kind::full: patches.push_back({0.0, 1.0, 0.0, 2.0 * M_PI}); break;
        case Kind::concentric:
        case Kind::annulus: patches.push_back({dom.rho0, dom.rho1, 0.0, 2.0 * M_PI}); break;
        case Kind::sectors: patches.assign(dom.sector_list.begin(), dom.sector_list.end()); break;
    }
    std::vector<PolarCell> cells;
    for (const auto& p : patches) {
        double dr = (p[1] - p[0]) / n_r_cells;
        double dth = (p[3] - p[2]) / n_theta_cells;
        for (int i = 0; i < n_r_cells; ++i)
            for (int j = 0; j < n_theta_cells; ++j)
                cells.push_back({p[0] + i * dr, p[0] + (i + 1) * dr,
                                 p[2] + j * dth, p[2] + (j + 1) * dth});
    }
    if (cells.empty()) throw std::invalid_argument("partition_domain: empty domain");
    return cells;
}

struct SensorBasis {
    enum class Kind { spectral, cells };
    Kind kind = Kind::spectral;
    std::vector<int> spectral_indices;  // 1-based mode indices
    std::vector<PolarCell> cell_list;
    Eigen::MatrixXd R;  // N x K, column m = (<psi_m, phi_k>)_k

    int K() const { return static_cast<int>(R.cols()); }
    int N() const { return static_cast<int>(R.rows()); }
};

/// Spectral sensors psi_m = phi_{index_m}: exact 0/1 columns.
inline SensorBasis make_spectral_basis(const std::vector<int>& indices, int n_modes) {
    SensorBasis sb;
    sb.kind = SensorBasis::Kind::spectral;
    sb.spectral_indices = indices;
    sb.R = Eigen::MatrixXd::Zero(n_modes, static_cast<int>(indices.size()));
    for (std::size_t m = 0; m < indices.size(); ++m) {
        int idx = indices[m];
        if (idx < 1 || idx > n_modes)
            throw std::invalid_argument("make_spectral_basis: index out of range");
        sb.R(idx - 1, static_cast<int>(m)) = 1.0;
    }
    return sb;
}

/// Indicator sensors: R_{km} = integral of phi_k over cell m, by a dedicated
/// Gauss product rule per cell.  Characteristic functions are not normalized.
inline SensorBasis build_R(const std::vector<PolarCell>& cells,
                           const std::vector<EigenMode>& modes, int cell_nodes_r = 12,
                           int cell_nodes_theta = 12) {
    if (cell_nodes_r * cell_nodes_theta < 4)
        throw std::invalid_argument("build_R: fewer than 4 quadrature nodes per cell");
    const int N = static_cast<int>(modes.size());
    const int K = static_cast<int>(cells.size());
    SensorBasis sb;
    sb.kind = SensorBasis::Kind::cells;
    sb.cell_list = cells;
    sb.R.resize(N, K);
    for (int m = 0; m < K; ++m) {
        const PolarCell& c = cells[m];
        if (!(c.area() > 0.0)) throw std::invalid_argument("build_R: degenerate cell");
        GaussLegendre rr = gauss_legendre(cell_nodes_r, c.r0, c.r1);
        GaussLegendre tt = gauss_legendre(cell_nodes_theta, c.theta0, c.theta1);
        for (int k = 0; k < N; ++k) {
            const EigenMode& md = modes[k];
            double acc = 0.0;
            for (int i = 0; i < cell_nodes_r; ++i) {
                double rad = md.weight * bessel_j(md.angular_degree, md.bessel_zero * rr.x[i]);
                double wri = rr.w[i] * rr.x[i];  // Jacobian r
                double ang = 0.0;
                for (int j = 0; j < cell_nodes_theta; ++j) {
                    double arg = md.angular_degree * tt.x[j];
                    ang += tt.w[j] * (md.parity == Parity::cosine ? std::cos(arg) : std::sin(arg));
                }
                acc += wri * rad * ang;
            }
            sb.R(k, m) = acc;
        }
    }
    return sb;
}

/// A f = R^T diag(d) f.
inline Eigen::VectorXd apply_A(const SensorBasis& sensors, const KernelGram& gram,
                               const Eigen::VectorXd& f_coeffs) {
    if (f_coeffs.size() != gram.d.size() || sensors.N() != gram.d.size())
        throw std::invalid_argument("apply_A: dimension mismatch");
    return sensors.R.transpose() * gram.d.cwiseProduct(f_coeffs);
}

/// Explicit K x N matrix of A.
inline Eigen::MatrixXd matrix_A(const SensorBasis& sensors, const KernelGram& gram) {
    return sensors.R.transpose() * gram.d.asDiagonal();
}

/// B(g) = R^T ((g g^T) o M) R; symmetric positive semidefinite, even in g.
inline Eigen::MatrixXd apply_B(const SensorBasis& sensors, const KernelGram& gram,
                               const Eigen::VectorXd& g_coeffs) {
    if (g_coeffs.size() != gram.d.size() || sensors.N() != gram.d.size())
        throw std::invalid_argument("apply_B: dimension mismatch");
    Eigen::MatrixXd core = (g_coeffs * g_coeffs.transpose()).cwiseProduct(gram.M);
    Eigen::MatrixXd out = sensors.R.transpose() * core * sensors.R;
    return 0.5 * (out + out.transpose()).eval();
}

/// Frechet derivative B'(g)[h] = R^T ((g h^T + h g^T) o M) R; linear in h.
inline Eigen::MatrixXd frechet_B(const SensorBasis& sensors, const KernelGram& gram,
                                 const Eigen::VectorXd& g_coeffs, const Eigen::VectorXd& h_dir) {
    if (g_coeffs.size() != h_dir.size() || g_coeffs.size() != gram.d.size())
        throw std::invalid_argument("frechet_B: dimension mismatch");
    Eigen::MatrixXd core =
        (g_coeffs * h_dir.transpose() + h_dir * g_coeffs.transpose()).cwiseProduct(gram.M);
    Eigen::MatrixXd out = sensors.R.transpose() * core * sensors.R;
    return 0.5 * (out + out.transpose()).eval();
}

struct ObservedData {
    Eigen::VectorXd Ehat;  // K sensor expectations
    Eigen::MatrixXd Chat;  // K x K sensor covariance
    bool noisy = false;
    double delta = 0.0;
};

/// Sensor statistics, either analytic (exact A f and B(g)) or empirical over
/// M simulated paths.  Noise multiplies each entry by (1 + delta xi) with xi
/// iid uniform on [-1, 1]; the noisy covariance is re-symmetrized.
inline ObservedData make_observed_data(const SourceSpec& source, const SensorBasis& sensors,
                                       const SimConfig& cfg, const std::vector<EigenMode>& modes,
                                       const KernelGram& gram, bool analytic, double delta) {
    ObservedData data;
    if (analytic) {
        data.Ehat = apply_A(sensors, gram, source.f_coeffs);
        data.Chat = apply_B(sensors, gram, source.g_coeffs);
    } else {
        ModeMoments mm = simulate_ensemble(source, cfg, modes);
        data.Ehat = sensors.R.transpose() * mm.expectation;
        data.Chat = sensors.R.transpose() * mm.covariance * sensors.R;
        data.Chat = 0.5 * (data.Chat + data.Chat.transpose()).eval();
    }
    if (delta > 0.0) {
        data.noisy = true;
        data.delta = delta;
        // distinct substream so noise does not alias the path streams
        NormalStream stream(cfg.seed, 0x6e6f697365ULL);
        for (int i = 0; i < data.Ehat.size(); ++i)
            data.Ehat(i) *= 1.0 + delta * stream.symmetric_uniform();
        Eigen::MatrixXd noisy = data.Chat;
        for (int i = 0; i < noisy.rows(); ++i)
            for (int j = 0; j < noisy.cols(); ++j)
                noisy(i, j) *= 1.0 + delta * stream.symmetric_uniform();
        data.Chat = 0.5 * (noisy + noisy.transpose());
    }
    return data;
}

}  // namespace fracsource
