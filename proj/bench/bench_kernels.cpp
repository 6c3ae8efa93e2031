// OpenMP kernels against their serial references. Run with
// OMP_WAIT_POLICY=passive and OMP_NUM_THREADS set to the core count.

#include <benchmark/benchmark.h>

#include "rissec/baselines.hpp"
#include "rissec/channel.hpp"
#include "rissec/secrecy.hpp"

using namespace rissec;

namespace {

SimulationConfig bench_config() {
    SimulationConfig cfg;
    cfg.secrecy.fading_draws = 100;
    return cfg;
}

struct Fixture {
    SimulationConfig cfg = bench_config();
    Topology topo = generate_topology(cfg, 1);
    RisConfiguration ris = RisConfiguration::zeros(cfg.ris);
    LargeScale ls = compute_large_scale(topo, ris, cfg);
    FadingSet fading = draw_fading_set(ls.link_keys, cfg.secrecy.fading_draws, 7);
    ChannelEnsemble ensemble = compose_ensemble(ls, fading);
    AllocationState alloc = [&] {
        RandomAllocationPolicy p(cfg, 3);
        return p.decide(ensemble);
    }();
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

template <bool Parallel>
void fading_set(benchmark::State& st) {
    const auto& f = fixture();
    const int draws = static_cast<int>(st.range(0));
    for (auto _ : st) {
        auto s = Parallel ? draw_fading_set(f.ls.link_keys, draws, 7) : draw_fading_set_serial(f.ls.link_keys, draws, 7);
        benchmark::DoNotOptimize(s.draws.data());
    }
}

template <bool Parallel>
void compose(benchmark::State& st) {
    const auto& f = fixture();
    for (auto _ : st) {
        auto e = Parallel ? compose_ensemble(f.ls, f.fading) : compose_ensemble_serial(f.ls, f.fading);
        benchmark::DoNotOptimize(e.data());
    }
}

template <bool Parallel>
void secrecy(benchmark::State& st) {
    const auto& f = fixture();
    for (auto _ : st) {
        auto r = Parallel ? evaluate_secrecy(f.ensemble, f.alloc, f.cfg) : evaluate_secrecy_serial(f.ensemble, f.alloc, f.cfg);
        benchmark::DoNotOptimize(r.ssc);
    }
}

template <bool Parallel>
void search(benchmark::State& st) {
    SimulationConfig cfg;
    cfg.network.cellular_users = 2;
    cfg.network.d2d_pairs = 2;
    cfg.network.eavesdroppers = 1;
    cfg.radio.power_levels = 4;
    cfg.ris.elements = 4;
    cfg.ris.phase_bits = 1;
    cfg.secrecy.fading_draws = 20;
    const auto topo = generate_topology(cfg, 1);
    SearchOptions opt;
    opt.space = static_cast<SearchSpace>(st.range(0));
    opt.fixed_ris = RisConfiguration::zeros(cfg.ris);
    opt.fixed_alloc = AllocationState::idle(2, 2, cfg.radio.cu_power_dbm);
    for (auto _ : st) {
        auto r = Parallel ? exhaustive_search(topo, cfg, opt) : exhaustive_search_serial(topo, cfg, opt);
        benchmark::DoNotOptimize(r.ssc);
    }
}

}  // namespace

BENCHMARK(fading_set<false>)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(fading_set<true>)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(compose<false>)->Unit(benchmark::kMicrosecond);
BENCHMARK(compose<true>)->Unit(benchmark::kMicrosecond);
BENCHMARK(secrecy<false>)->Unit(benchmark::kMicrosecond);
BENCHMARK(secrecy<true>)->Unit(benchmark::kMicrosecond);
BENCHMARK(search<false>)->Arg(static_cast<int>(SearchSpace::alloc))->Arg(static_cast<int>(SearchSpace::ris))
    ->Unit(benchmark::kMillisecond);
BENCHMARK(search<true>)->Arg(static_cast<int>(SearchSpace::alloc))->Arg(static_cast<int>(SearchSpace::ris))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
