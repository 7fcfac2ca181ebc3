#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fracsource/acquisition.hpp"

using namespace fracsource;

namespace {

std::vector<EigenMode> modes_cache(int n) {
    static std::vector<EigenMode> all = build_eigensystem(36);
    return {all.begin(), all.begin() + n};
}

KernelGram gram_cache(int n) {
    auto modes = modes_cache(n);
    SimConfig cfg;
    cfg.n_modes = n;
    return kernel_gram(cfg, modes, constant_profile(1.0));
}

}  // namespace

TEST_CASE("partition_domain: cell counts and area additivity") {
    auto one = partition_domain(ObservationDomain::full(), 1, 1);
    REQUIRE(one.size() == 1);
    CHECK_THAT(one[0].area(), Catch::Matchers::WithinAbs(M_PI, 1e-12));

    auto ann = partition_domain(ObservationDomain::annulus(0.75, 1.0), 2, 8);
    REQUIRE(ann.size() == 16);
    double area = 0.0;
    for (const auto& c : ann) area += c.area();
    CHECK_THAT(area, Catch::Matchers::WithinAbs(M_PI * (1.0 - 9.0 / 16.0), 1e-10));

    auto con = partition_domain(ObservationDomain::concentric(0.25), 4, 16);
    REQUIRE(con.size() == 64);
    area = 0.0;
    for (const auto& c : con) area += c.area();
    CHECK_THAT(area, Catch::Matchers::WithinAbs(M_PI / 16.0, 1e-10));

    auto sec = partition_domain(
        ObservationDomain::sectors({{{0.75, 1.0, 0.0, M_PI / 4.0}},
                                    {{0.75, 1.0, M_PI, M_PI + M_PI / 4.0}}}),
        2, 8);
    REQUIRE(sec.size() == 32);
    area = 0.0;
    for (const auto& c : sec) area += c.area();
    CHECK_THAT(area, Catch::Matchers::WithinAbs(2.0 * (M_PI / 4.0) * 0.5 * (1.0 - 0.5625), 1e-10));

    CHECK_THROWS_AS(partition_domain(ObservationDomain::full(), 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(ObservationDomain::annulus(0.9, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ObservationDomain::sectors({}), std::invalid_argument);
}

TEST_CASE("spectral basis: R is the identity on full indices") {
    auto sb = make_spectral_basis({1, 2, 3, 4, 5, 6}, 6);
    CHECK(sb.R.isIdentity(0.0));
    auto sub = make_spectral_basis({2, 5}, 6);
    CHECK(sub.R(1, 0) == 1.0);
    CHECK(sub.R(4, 1) == 1.0);
    CHECK(sub.R.sum() == 2.0);
    CHECK_THROWS_AS(make_spectral_basis({0}, 6), std::invalid_argument);
    CHECK_THROWS_AS(make_spectral_basis({7}, 6), std::invalid_argument);
}

TEST_CASE("build_R: single full-disk cell picks out the radial modes") {
    auto modes = modes_cache(10);
    auto cells = partition_domain(ObservationDomain::full(), 1, 1);
    SensorBasis sb = build_R(cells, modes, 24, 24);
    for (int k = 0; k < 10; ++k) {
        if (modes[k].angular_degree >= 1) {
            INFO("mode " << k + 1);
            CHECK_THAT(sb.R(k, 0), Catch::Matchers::WithinAbs(0.0, 1e-12));
        } else {
            CHECK(std::fabs(sb.R(k, 0)) > 1e-3);
        }
    }
}

TEST_CASE("build_R: annulus cells against a hit-or-miss Monte Carlo oracle") {
    auto modes = modes_cache(6);
    auto cells = partition_domain(ObservationDomain::annulus(0.75, 1.0), 1, 4);
    SensorBasis sb = build_R(cells, modes);

    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int shots = 1000000;
    for (std::size_t m = 0; m < cells.size(); ++m) {
        const PolarCell& c = cells[m];
        // sample uniformly in the enclosing polar box with density r dr dth
        std::vector<double> sums(modes.size(), 0.0), sq(modes.size(), 0.0);
        double box = c.area();
        for (int s = 0; s < shots / 4; ++s) {
            double r = std::sqrt(c.r0 * c.r0 + uni(rng) * (c.r1 * c.r1 - c.r0 * c.r0));
            double th = c.theta0 + uni(rng) * (c.theta1 - c.theta0);
            for (std::size_t k = 0; k < modes.size(); ++k) {
                double v = eval_phi(modes[k], r, th);
                sums[k] += v;
                sq[k] += v * v;
            }
        }
        int n = shots / 4;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            double mean = sums[k] / n;
            double var = sq[k] / n - mean * mean;
            double se = box * std::sqrt(std::max(var, 0.0) / n);
            INFO("cell " << m << " mode " << k + 1);
            CHECK(std::fabs(sb.R(k, m) - box * mean) <= 3.0 * se + 1e-9);
        }
    }
}

TEST_CASE("build_R: sub-domain sensors are a sub-matrix of the refined partition") {
    auto modes = modes_cache(8);
    auto outer = partition_domain(ObservationDomain::annulus(0.75, 1.0), 1, 8);
    auto both = partition_domain(ObservationDomain::annulus(0.5, 1.0), 2, 8);
    SensorBasis so = build_R(outer, modes);
    SensorBasis sbb = build_R(both, modes);
    // cells of the outer ring coincide with the second radial layer
    int matched = 0;
    for (std::size_t a = 0; a < outer.size(); ++a) {
        for (std::size_t b = 0; b < both.size(); ++b) {
            if (std::fabs(outer[a].r0 - both[b].r0) < 1e-15 &&
                std::fabs(outer[a].theta0 - both[b].theta0) < 1e-15) {
                ++matched;
                CHECK((so.R.col(a) - sbb.R.col(b)).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
    CHECK(matched == 8);
}

TEST_CASE("apply_A: linearity, spectral diagonal, matrix agreement") {
    auto modes = modes_cache(6);
    KernelGram gram = gram_cache(6);
    auto sb = make_spectral_basis({1, 2, 3, 4, 5, 6}, 6);

    CHECK(apply_A(sb, gram, Eigen::VectorXd::Zero(6)).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd f(6);
    f << 1.0, -2.0, 0.5, 0.0, 3.0, 1.5;
    Eigen::VectorXd Af = apply_A(sb, gram, f);
    for (int n = 0; n < 6; ++n)
        CHECK_THAT(Af(n), Catch::Matchers::WithinAbs(gram.d(n) * f(n), 1e-15));

    auto cells = partition_domain(ObservationDomain::concentric(0.25), 2, 4);
    SensorBasis sc = build_R(cells, modes);
    Eigen::VectorXd f2(6);
    f2 << 0.3, 0.1, -0.7, 1.1, 0.0, -0.2;
    Eigen::VectorXd lhs = apply_A(sc, gram, f + f2);
    Eigen::VectorXd rhs = apply_A(sc, gram, f) + apply_A(sc, gram, f2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-13);
    // explicit matrix route
    CHECK((matrix_A(sc, gram) * f - apply_A(sc, gram, f)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("apply_B: parity, spectral identity, rank") {
    auto modes = modes_cache(6);
    KernelGram gram = gram_cache(6);
    auto cells = partition_domain(ObservationDomain::annulus(0.75, 1.0), 1, 6);
    SensorBasis sb = build_R(cells, modes);

    Eigen::VectorXd g(6);
    g << 2.0, -1.0, 0.5, 0.0, 1.0, -0.3;
    Eigen::MatrixXd Bp = apply_B(sb, gram, g);
    Eigen::MatrixXd Bm = apply_B(sb, gram, -g);
    CHECK((Bp - Bm).cwiseAbs().maxCoeff() == 0.0);  // bit-identical: quadratic form
    CHECK((Bp - Bp.transpose()).cwiseAbs().maxCoeff() == 0.0);

    auto spec = make_spectral_basis({1, 2, 3, 4, 5, 6}, 6);
    Eigen::MatrixXd Bs = apply_B(spec, gram, g);
    for (int m = 0; m < 6; ++m)
        for (int n = 0; n < 6; ++n)
            CHECK_THAT(Bs(m, n), Catch::Matchers::WithinAbs(g(m) * g(n) * gram.M(m, n), 1e-14));

    Eigen::VectorXd single = Eigen::VectorXd::Zero(6);
    single(2) = 1.7;
    Eigen::MatrixXd B1 = apply_B(sb, gram, single);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B1);
    CHECK(svd.singularValues()(0) > 0.0);
    CHECK(svd.singularValues()(1) <= 1e-14 * svd.singularValues()(0));
}

TEST_CASE("frechet_B: finite-difference order, Euler identity, zero point") {
    auto modes = modes_cache(5);
    KernelGram gram = gram_cache(5);
    auto cells = partition_domain(ObservationDomain::concentric(0.25), 2, 4);
    SensorBasis sb = build_R(cells, modes);

    Eigen::VectorXd g(5), h(5);
    g << 1.0, -0.5, 2.0, 0.3, -1.2;
    h << 0.4, 1.1, -0.6, 0.9, 0.2;

    Eigen::MatrixXd Bg = apply_B(sb, gram, g);
    Eigen::MatrixXd D = frechet_B(sb, gram, g, h);
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // ||B(g+eh) - B(g) - e B'(g)[h]||_F = O(e^2): ratio ~ 100 between 1e-3, 1e-4
    auto defect = [&](double eps) {
        return (apply_B(sb, gram, g + eps * h) - Bg - eps * D).norm();
    };
    double d3 = defect(1e-3), d4 = defect(1e-4);
    CHECK(d3 / d4 > 50.0);
    CHECK(d3 / d4 < 200.0);
    // Euler identity for the quadratic form
    CHECK((frechet_B(sb, gram, g, g) - 2.0 * Bg).cwiseAbs().maxCoeff() <=
          1e-12 * Bg.cwiseAbs().maxCoeff());
    CHECK(frechet_B(sb, gram, Eigen::VectorXd::Zero(5), h).cwiseAbs().maxCoeff() == 0.0);
    // linear in h
    Eigen::MatrixXd lin = frechet_B(sb, gram, g, 2.0 * h) - 2.0 * frechet_B(sb, gram, g, h);
    CHECK(lin.cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("linear interpretation of B on the full spectral basis") {
    // row N_0 of B(g) equals g_{N_0} * (M_{N_0,n} g_n)_n
    auto modes = modes_cache(6);
    KernelGram gram = gram_cache(6);
    auto spec = make_spectral_basis({1, 2, 3, 4, 5, 6}, 6);
    Eigen::VectorXd g(6);
    g << 10.0, 2.0, 13.0, 0.0, -1.0, 0.5;
    const int n0 = 1;
    Eigen::MatrixXd B = apply_B(spec, gram, g);
    for (int n = 0; n < 6; ++n) {
        double want = g(n0 - 1) * gram.M(n0 - 1, n) * g(n);
        CHECK_THAT(B(n0 - 1, n), Catch::Matchers::WithinAbs(want, 1e-14));
    }
}

TEST_CASE("make_observed_data: clean analytic equals the operators") {
    auto modes = modes_cache(6);
    KernelGram gram = gram_cache(6);
    auto spec = make_spectral_basis({1, 2, 3, 4, 5, 6}, 6);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6), g = Eigen::VectorXd::Zero(6);
    f(0) = 10.0; f(1) = 5.0; f(2) = 12.0;
    g(0) = 10.0; g(1) = 2.0; g(2) = 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};
    SimConfig cfg;
    cfg.n_modes = 6;

    ObservedData clean = make_observed_data(src, spec, cfg, modes, gram, true, 0.0);
    CHECK((clean.Ehat - apply_A(spec, gram, f)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((clean.Chat - apply_B(spec, gram, g)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(clean.noisy);

    ObservedData noisy = make_observed_data(src, spec, cfg, modes, gram, true, 0.01);
    CHECK(noisy.noisy);
    for (int n = 0; n < 6; ++n)
        CHECK(std::fabs(noisy.Ehat(n) - clean.Ehat(n)) <= 0.01 * std::fabs(clean.Ehat(n)) + 1e-18);
    CHECK((noisy.Chat - noisy.Chat.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // noise replays with the seed
    ObservedData replay = make_observed_data(src, spec, cfg, modes, gram, true, 0.01);
    CHECK((replay.Ehat - noisy.Ehat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_observed_data: empirical covariance near analytic, batch-calibrated") {
    auto modes = modes_cache(4);
    KernelGram gram = gram_cache(4);
    auto spec = make_spectral_basis({1, 2, 3, 4}, 4);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4), g = Eigen::VectorXd::Zero(4);
    f(0) = 10.0; f(1) = 5.0; f(2) = 12.0;
    g(0) = 10.0; g(1) = 2.0; g(2) = 13.0;
    SourceSpec src{f, g, constant_profile(1.0), 1.0};

    SimConfig cfg;
    cfg.n_modes = 4;
    cfg.n_t = 256;
    cfg.realizations = 1000;
    cfg.seed = 5;
    ObservedData emp = make_observed_data(src, spec, cfg, modes, gram, false, 0.0);
    ObservedData ana = make_observed_data(src, spec, cfg, modes, gram, true, 0.0);

    // batch estimate of the Frobenius-distance scale from 10 independent
    // small ensembles
    std::vector<double> dists;
    for (int b = 0; b < 10; ++b) {
        SimConfig bc = cfg;
        bc.seed = 1000 + b;
        ObservedData eb = make_observed_data(src, spec, bc, modes, gram, false, 0.0);
        dists.push_back((eb.Chat - ana.Chat).norm());
    }
    double mean = 0.0;
    for (double v : dists) mean += v;
    mean /= dists.size();
    double sd = 0.0;
    for (double v : dists) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / (dists.size() - 1.0));
    CHECK((emp.Chat - ana.Chat).norm() <= mean + 5.0 * sd);
}
