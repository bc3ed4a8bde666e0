#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "stla/config.hpp"
#include "stla/engine.hpp"
#include "stla/hamiltonian.hpp"
#include "stla/petrov.hpp"
#include "stla/positive_span.hpp"
#include "stla/trajectory.hpp"

namespace {

using namespace stla;

const cli::AnalysisConfig& coron() {
    static const auto cfg = cli::load_config(std::string(STLA_CONFIG_DIR) + "/ex3_coron.json");
    return cfg;
}

void BM_LiftField(benchmark::State& state) {
    const auto& sys = coron().system;
    const std::vector<double> x0{0.3, -0.2};
    const int degree = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(lift_field(sys.fields[0], x0, degree));
}
BENCHMARK(BM_LiftField)->DenseRange(2, 8, 2);

// Order-k boxplus of the Coron pair on the disk function.
void BM_BoxplusPower(benchmark::State& state) {
    const auto& cfg = coron();
    const int k = static_cast<int>(state.range(0));
    const std::vector<double> x0{1.0, 0.0};
    std::vector<jet::VectorGerm> germs;
    for (const auto& def : engine::resolve_group(cfg.system, {{"f0+f1", "f0-f1"}, 0}))
        germs.push_back(lift_field(def, x0, k));
    const auto u = jet::lift(cfg.targets[0].def.functions[0], x0, k);
    for (auto _ : state) benchmark::DoNotOptimize(ham::boxplus_power(germs, u, k));
}
BENCHMARK(BM_BoxplusPower)->DenseRange(1, 6);

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int h, int m) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Eigen::MatrixXd A(h, m);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < m; ++j) A(i, j) = d(rng);
    return A;
}

void BM_PositiveSpan(benchmark::State& state) {
    std::mt19937_64 rng(7);
    const int h = static_cast<int>(state.range(0));
    std::vector<Eigen::MatrixXd> mats;
    for (int i = 0; i < 32; ++i) mats.push_back(random_matrix(rng, h, 2 * h));
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(pspan::is_positive_basis(mats[i++ % mats.size()]));
}
BENCHMARK(BM_PositiveSpan)->DenseRange(1, 4);

void BM_PetrovSolve(benchmark::State& state) {
    const int h = static_cast<int>(state.range(0));
    Eigen::MatrixXd A(h, h + 1);
    A.leftCols(h).setIdentity();
    A.col(h).setConstant(-1.0);
    const Eigen::MatrixXd G = 0.01 * Eigen::MatrixXd::Ones(h, h + 1);
    petrov::Problem p;
    p.A = A;
    p.gamma = [G](const Eigen::VectorXd& tau) -> Eigen::MatrixXd { return std::cos(tau.norm()) * G; };
    p.rho = [h](const Eigen::VectorXd& tau) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(h, 1e-4 * (1.0 + 0.1 * std::sin(tau(0))));
    };
    p.enforce_hypotheses = false;
    for (auto _ : state) benchmark::DoNotOptimize(petrov::solve(p));
}
BENCHMARK(BM_PetrovSolve)->DenseRange(1, 4);

void BM_IntegrateSwitched(benchmark::State& state) {
    const auto& sys = coron().system;
    traj::SwitchSchedule schedule{{{"f0+f1", 0.1}, {"f0-f1", 0.1}}};
    traj::SimOptions opts;
    opts.steps_per_leg = static_cast<int>(state.range(0));
    opts.richardson = false;
    const std::vector<double> x0{1.0, 0.0};
    for (auto _ : state) benchmark::DoNotOptimize(traj::integrate_switched(sys, schedule, x0, opts));
    state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_IntegrateSwitched)->RangeMultiplier(10)->Range(100, 10000);

}  // namespace

BENCHMARK_MAIN();
