#include "unit/oracles.hpp"

#include "tvstarma/error.hpp"
#include "tvstarma/kalman.hpp"
#include "tvstarma/ls.hpp"
#include "tvstarma/simulation.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tvstarma;

namespace {

PanelSeries random_panel(int T, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd z(T, n);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) z(t, i) = g(rng);
    return PanelSeries(z, default_station_ids(n));
}

KalmanState scalar_state(double c, double P, double sigma, int lag_count) {
    KalmanState s;
    s.c = Eigen::VectorXd::Constant(1, c);
    s.P = Eigen::MatrixXd::Constant(1, 1, P);
    s.sigma = Eigen::MatrixXd::Constant(1, 1, sigma);
    s.residual_lags.assign(1, Eigen::VectorXd::Zero(1));
    s.lag_count = lag_count;
    return s;
}

}  // namespace

TEST(Regressor, PureArEqualsDesignRowSlice) {
    std::mt19937_64 rng(1);
    const int T = 30, n = 4;
    const auto Z = random_panel(T, n, rng);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(n, rng)});
    const auto spec = ModelSpec::tvstar(2, {1, 0}, 2);
    const auto dict = build_dictionary(T, 2);
    const auto design = build_design(Z, W, spec, dict);
    const std::vector<Eigen::VectorXd> none;
    for (int t = 3; t <= T; ++t) {
        const Eigen::MatrixXd Y = build_regressor(t, Z, std::span<const Eigen::VectorXd>(none), W, spec, dict);
        for (int i = 0; i < n; ++i) EXPECT_EQ(Y.row(i), design.psi.row(i * (T - 2) + (t - 3))) << "t " << t;
    }
}

TEST(Regressor, ZeroResidualLagsGiveZeroMaBlock) {
    std::mt19937_64 rng(2);
    const auto Z = random_panel(20, 3, rng);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(3, rng)});
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const std::vector<Eigen::VectorXd> lags{Eigen::VectorXd::Zero(3)};
    const Eigen::MatrixXd Y = build_regressor(5, Z, std::span<const Eigen::VectorXd>(lags), W, spec, build_dictionary(20, 2));
    EXPECT_EQ(Y.rightCols(8).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(Y.leftCols(8).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Regressor, SmallStarmaMatchesScalarLoop) {
    const int T = 6;
    Eigen::MatrixXd z(T, 2);
    z << 0.5, -1.0, 1.5, 0.25, -0.75, 2.0, 1.0, 1.0, 0.1, -0.3, 0.7, 0.9;
    const PanelSeries Z(z, default_station_ids(2));
    Eigen::MatrixXd w(2, 2);
    w << 0, 1, 1, 0;
    const auto W = WeightMatrixSet::from_matrices({w});
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 1);
    const auto dict = build_dictionary(T, 1);
    const std::vector<Eigen::VectorXd> lags{Eigen::Vector2d(0.2, -0.4)};
    const int t = 4;
    const Eigen::MatrixXd Y = build_regressor(t, Z, std::span<const Eigen::VectorXd>(lags), W, spec, dict);
    ASSERT_EQ(Y.rows(), 2);
    ASSERT_EQ(Y.cols(), 8);
    const double u = double(t) / T;
    const double psi[2] = {1.0, oracle::mexican_hat(u)};
    const double zl[2] = {z(t - 2, 0), z(t - 2, 1)};
    const double nu[2] = {0.2, -0.4};
    for (int i = 0; i < 2; ++i) {
        const double ar[2] = {zl[i], zl[1 - i]};
        const double ma[2] = {nu[i], nu[1 - i]};
        for (int b = 0; b < 2; ++b) {
            for (int l = 0; l < 2; ++l) {
                EXPECT_NEAR(Y(i, b * 2 + l), psi[b] * ar[l], 1e-15);
                EXPECT_NEAR(Y(i, 4 + b * 2 + l), -psi[b] * ma[l], 1e-15);
            }
        }
    }
}

TEST(Regressor, RejectsOutOfRangeTimes) {
    std::mt19937_64 rng(3);
    const auto Z = random_panel(10, 2, rng);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(2, rng)});
    const auto spec = ModelSpec::tvstar(2, {1, 1}, 1);
    const std::vector<Eigen::VectorXd> none;
    const auto dict = build_dictionary(10, 1);
    EXPECT_THROW(build_regressor(2, Z, std::span<const Eigen::VectorXd>(none), W, spec, dict), ValidationError);
    EXPECT_THROW(build_regressor(11, Z, std::span<const Eigen::VectorXd>(none), W, spec, dict), ValidationError);
}

TEST(KalmanStep, ZeroInnovationLeavesCoefficientsUnchanged) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    KalmanState s;
    s.c = Eigen::VectorXd::NullaryExpr(5, [&] { return g(rng); });
    s.P = Eigen::MatrixXd::Identity(5, 5);
    s.sigma = Eigen::MatrixXd::Identity(3, 3);
    s.residual_lags.assign(1, Eigen::VectorXd::Zero(3));
    s.lag_count = 10;
    const Eigen::MatrixXd Y = Eigen::MatrixXd::NullaryExpr(3, 5, [&] { return g(rng); });
    const KalmanState next = kalman_step(s, Y * s.c, Y, {});
    EXPECT_LT((next.c - s.c).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(next.residual_lags.front().cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(next.t, 1);
}

TEST(KalmanStep, ScalarHandRecursion) {
    // c0 = 0, P0 = 1, Sigma0 = h = 1; observations (y, z) = (2, 1) then (1, 3).
    KalmanState s = scalar_state(0.0, 1.0, 1.0, 1);
    s = kalman_step(s, Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 2.0), {});
    EXPECT_NEAR(s.c[0], 0.4, 1e-12);
    EXPECT_NEAR(s.P(0, 0), 0.2, 1e-12);
    EXPECT_NEAR(s.sigma(0, 0), 1.0, 1e-12);  // first observation: k = 1 <= s_a + s_m, no update
    EXPECT_NEAR(s.residual_lags.front()[0], 1.0 - 2.0 * 0.4, 1e-12);
    s = kalman_step(s, Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 1.0), {});
    EXPECT_NEAR(s.c[0], 5.0 / 6.0, 1e-12);
    EXPECT_NEAR(s.P(0, 0), 1.0 / 6.0, 1e-12);
    // nu = 3 - 5/6 = 13/6; Sigma = (1 * 1 + nu^2) / 2.
    EXPECT_NEAR(s.sigma(0, 0), 205.0 / 72.0, 1e-12);
}

TEST(KalmanStep, CovarianceUpdateMatchesInformationForm) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 10; ++rep) {
        const int dim = 6, n = 3;
        Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return g(rng); });
        KalmanState s;
        s.c = Eigen::VectorXd::Zero(dim);
        s.P = A * A.transpose() + Eigen::MatrixXd::Identity(dim, dim);
        Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return g(rng); });
        s.sigma = B * B.transpose() + Eigen::MatrixXd::Identity(n, n);
        s.residual_lags.assign(1, Eigen::VectorXd::Zero(n));
        s.lag_count = 100;
        const Eigen::MatrixXd Y = Eigen::MatrixXd::NullaryExpr(n, dim, [&] { return g(rng); });
        const Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
        const KalmanState next = kalman_step(s, z, Y, {});
        const Eigen::MatrixXd info = (s.P.inverse() + Y.transpose() * s.sigma.inverse() * Y).inverse();
        EXPECT_LT((next.P - info).cwiseAbs().maxCoeff(), 1e-9 * info.cwiseAbs().maxCoeff());
        // Gain form of the coefficient update: c+ = P+ Y' Sigma^{-1} z.
        const Eigen::VectorXd c = info * Y.transpose() * s.sigma.inverse() * z;
        EXPECT_LT((next.c - c).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + c.cwiseAbs().maxCoeff()));
        EXPECT_LT((next.P - next.P.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(KalmanStep, SigmaIsARunningAverageOfResiduals) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, std::sqrt(2.0));
    KalmanState s;
    s.c = Eigen::VectorXd::Zero(2);
    s.P = Eigen::MatrixXd::Identity(2, 2);
    s.sigma = 0.01 * Eigen::MatrixXd::Identity(3, 3);
    s.residual_lags.assign(1, Eigen::VectorXd::Zero(3));
    s.lag_count = 2;
    const Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(3, 2);
    for (int k = 0; k < 20000; ++k) s = kalman_step(s, Eigen::VectorXd::NullaryExpr(3, [&] { return g(rng); }), Y, {});
    // Monte Carlo error of a variance estimate with 2e4 draws is about 2 sqrt(2 / 2e4) = 0.02.
    EXPECT_LT((s.sigma - 2.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(KalmanStep, SingularInnovationCovarianceUsesRidge) {
    KalmanState s;
    s.c = Eigen::VectorXd::Zero(2);
    s.P = Eigen::MatrixXd::Identity(2, 2);
    s.sigma = Eigen::Vector2d(1.0, 0.0).asDiagonal();
    s.residual_lags.assign(1, Eigen::VectorXd::Zero(2));
    s.lag_count = 10;
    const KalmanState next = kalman_step(s, Eigen::Vector2d(0.5, 0.5), Eigen::MatrixXd::Zero(2, 2), {});
    EXPECT_EQ(next.ridge_events, 1);
    EXPECT_TRUE(next.c.allFinite());
}

TEST(KalmanStep, DivergenceGuard) {
    KalmanState s = scalar_state(0.0, 1e12, 1.0, 1);
    KalmanConfig cfg;
    cfg.divergence_bound = 10.0;
    EXPECT_THROW(kalman_step(s, Eigen::VectorXd::Constant(1, 1e3), Eigen::MatrixXd::Constant(1, 1, 1.0), cfg),
                 NumericalError);
}

TEST(FitKalman, FrozenSigmaIsRidgeRegressionOnTheDesign) {
    // With Sigma = h I fixed, the filter endpoint solves (Psi'Psi + (h / p0) I) c = Psi'z exactly.
    std::mt19937_64 rng(7);
    const auto Z = random_panel(60, 3, rng);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(3, rng)});
    const auto spec = ModelSpec::tvstar(1, {1}, 2);
    const auto dict = build_dictionary(60, 2);
    KalmanConfig cfg;
    cfg.freeze_sigma = true;
    cfg.h = 0.5;
    cfg.p0_scale = 2.0;
    const auto kf = fit_kalman(Z, W, spec, dict, cfg);
    const Eigen::MatrixXd X = oracle::design(Z.values, W[1], 1, {{1, 0}, {1, 1}}, 2);
    const Eigen::VectorXd y = oracle::response(Z.values, 1);
    const Eigen::MatrixXd G = X.transpose() * X + (cfg.h / cfg.p0_scale) * Eigen::MatrixXd::Identity(8, 8);
    const Eigen::VectorXd ridge = G.inverse() * X.transpose() * y;
    EXPECT_LT((kf.result.coefficients - ridge).norm() / ridge.norm(), 1e-10);
}

TEST(FitKalman, LongConstantCoefficientSeriesApproachesLeastSquares) {
    const int T = 8192, n = 15;
    const auto geom = random_geometry(n, {}, 3);
    const auto W = WeightMatrixSet::from_geometry(geom, {WeightKind::InverseDistance, 0.5});
    const auto Z = simulate_tvstar(constant_coefficients({{{1, 0}, 0.4}, {{1, 1}, -0.3}}), W, T, n, 1.0, 21);
    {
        const auto spec = ModelSpec::tvstar(1, {1}, 1);
        const auto dict = build_dictionary(T, 1);
        const auto ls = fit_ls(build_design(Z, W, spec, dict), Z);
        const auto kf = fit_kalman(Z, W, spec, dict);
        EXPECT_LT((kf.result.coefficients - ls.coefficients).cwiseAbs().maxCoeff(), 1e-2);
    }
    {
        // At J = 2 the four basis functions are close to collinear on (0, 1], so the P0 = I prior still
        // shows in individual coefficients; the curves they define agree.
        const auto spec = ModelSpec::tvstar(1, {1}, 2);
        const auto dict = build_dictionary(T, 2);
        const auto ls = fit_ls(build_design(Z, W, spec, dict), Z);
        const auto kf = fit_kalman(Z, W, spec, dict);
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_LT((kf.result.ar_curves[k].values - ls.ar_curves[k].values).cwiseAbs().maxCoeff(), 1e-2) << k;
        }
    }
}

TEST(FitKalman, DoublingHBarelyMovesTheFit) {
    const auto geom = random_geometry(15, {}, 5);
    const auto W = WeightMatrixSet::from_geometry(geom, {WeightKind::InverseDistance, 0.5});
    const auto Z = simulate_tvstarma(preset_group2(), W, 1024, 15, 1.0, 8);
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const auto dict = build_dictionary(1024, 2);
    KalmanConfig a, b;
    b.h = 2.0 * a.h;
    const double ma = fit_kalman(Z, W, spec, dict, a).result.mse;
    const double mb = fit_kalman(Z, W, spec, dict, b).result.mse;
    EXPECT_LT(std::abs(ma - mb) / ma, 0.01);
}

TEST(FitKalman, CovarianceStaysSymmetricWithNonnegativeDiagonal) {
    const auto geom = random_geometry(6, {}, 6);
    const auto W = WeightMatrixSet::from_geometry(geom, {WeightKind::InverseDistance, 0.5});
    const auto Z = simulate_tvstarma(preset_group2(), W, 400, 6, 1.0, 2);
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const auto dict = build_dictionary(400, 2);
    KalmanState s = KalmanState::initial(spec, 6, {});
    for (int t = 2; t <= 400; ++t) {
        s = kalman_step(s, Z.at(t), build_regressor(t, Z, s.residual_lags, W, spec, dict), {});
        ASSERT_LT((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        ASSERT_GT(s.P.diagonal().minCoeff(), -1e-8);
        ASSERT_LT((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(FitKalman, StoredResidualsReproduceEachRegressor) {
    const auto geom = random_geometry(5, {}, 7);
    const auto W = WeightMatrixSet::from_geometry(geom, {WeightKind::InverseDistance, 1.0});
    const auto Z = simulate_tvstarma(preset_group2(), W, 200, 5, 1.0, 3);
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const auto dict = build_dictionary(200, 2);
    const auto kf = fit_kalman(Z, W, spec, dict);
    KalmanState s = KalmanState::initial(spec, 5, {});
    for (int t = 2; t <= 200; ++t) {
        std::vector<Eigen::VectorXd> lags{t > 2 ? Eigen::VectorXd(kf.filter_residuals.row(t - 3).transpose())
                                                : Eigen::VectorXd::Zero(5)};
        const Eigen::MatrixXd from_history = build_regressor(t, Z, std::span<const Eigen::VectorXd>(lags), W, spec, dict);
        const Eigen::MatrixXd live = build_regressor(t, Z, s.residual_lags, W, spec, dict);
        ASSERT_EQ(from_history, live) << "t " << t;
        s = kalman_step(s, Z.at(t), live, {});
        ASSERT_EQ((from_history * kf.result.coefficients).transpose().eval(), kf.result.fitted.row(t - 2)) << "t " << t;
    }
    EXPECT_EQ(s.c, kf.result.coefficients);
}

TEST(FitKalman, ValidatesInputs) {
    std::mt19937_64 rng(8);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(3, rng)});
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 1);
    const auto short_panel = random_panel(5, 3, rng);
    EXPECT_THROW(fit_kalman(short_panel, W, spec, build_dictionary(5, 1)), ValidationError);
    const auto Z = random_panel(40, 3, rng);
    KalmanConfig bad;
    bad.h = 0.0;
    EXPECT_THROW(fit_kalman(Z, W, spec, build_dictionary(40, 1), bad), ValidationError);
    EXPECT_THROW(fit_kalman(Z, W, spec, build_dictionary(40, 2)), ValidationError);
}

TEST(FitKalman, TraceHasOneRowPerStep) {
    std::mt19937_64 rng(9);
    const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(3, rng)});
    const auto Z = random_panel(50, 3, rng);
    KalmanConfig cfg;
    cfg.trace = true;
    const auto kf = fit_kalman(Z, W, ModelSpec::tvstar(1, {1}, 1), build_dictionary(50, 1), cfg);
    ASSERT_EQ(kf.trace.size(), 49u);
    EXPECT_EQ(kf.trace.front().t, 2);
    EXPECT_NEAR(kf.trace.back().coefficient_norm, kf.result.coefficients.norm(), 1e-12);
}
