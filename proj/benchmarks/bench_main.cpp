#include "tvstarma/kalman.hpp"
#include "tvstarma/ls.hpp"
#include "tvstarma/simulation.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#include <benchmark/benchmark.h>

using namespace tvstarma;

namespace {

struct Fixture {
    explicit Fixture(int T, int n = 15)
        : geom(random_geometry(n, {}, 1)),
          W(WeightMatrixSet::from_geometry(geom, {WeightKind::InverseDistance, 1.0})),
          Z(simulate_tvstar(preset_group1(), W, T, n, 1.0, 2)) {}
    StationGeometry geom;
    WeightMatrixSet W;
    PanelSeries Z;
};

void BM_Dictionary(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_dictionary(T, 4));
}
BENCHMARK(BM_Dictionary)->Arg(512)->Arg(4096);

void BM_Design(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    const auto spec = ModelSpec::tvstar(1, {1}, 2);
    const auto dict = build_dictionary(f.Z.T(), 2);
    for (auto _ : state) benchmark::DoNotOptimize(build_design(f.Z, f.W, spec, dict));
}
BENCHMARK(BM_Design)->Arg(512)->Arg(1024);

void BM_FitLs(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    const auto spec = ModelSpec::tvstar(1, {1}, 2);
    const auto dict = build_dictionary(f.Z.T(), 2);
    const auto design = build_design(f.Z, f.W, spec, dict);
    for (auto _ : state) benchmark::DoNotOptimize(fit_ls(design, f.Z));
}
BENCHMARK(BM_FitLs)->Arg(512)->Arg(1024);

void BM_KalmanStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Fixture f(64, n);
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const auto dict = build_dictionary(64, 2);
    const KalmanConfig cfg;
    const auto s0 = KalmanState::initial(spec, n, cfg);
    const Eigen::MatrixXd Y = build_regressor(2, f.Z, s0.residual_lags, f.W, spec, dict);
    const Eigen::VectorXd z = f.Z.values.row(1).transpose();
    for (auto _ : state) benchmark::DoNotOptimize(kalman_step(s0, z, Y, cfg));
}
BENCHMARK(BM_KalmanStep)->Arg(5)->Arg(15)->Arg(30);

void BM_FitKalman(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    const auto spec = ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
    const auto dict = build_dictionary(f.Z.T(), 2);
    for (auto _ : state) benchmark::DoNotOptimize(fit_kalman(f.Z, f.W, spec, dict));
}
BENCHMARK(BM_FitKalman)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_GrfDraw(benchmark::State& state) {
    const auto geom = random_geometry(15, {}, 1);
    const GrfSampler sampler(geom, static_cast<int>(state.range(0)), GneitingCovarianceSpec{});
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sampler.draw(++seed));
}
BENCHMARK(BM_GrfDraw)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
