#include <benchmark/benchmark.h>

#include <cmath>

#include "spinid/estimation.hpp"
#include "spinid/fit.hpp"
#include "spinid/propagator.hpp"
#include "spinid/sequences.hpp"
#include "spinid/units.hpp"

using namespace spinid;

namespace {

SpinSystem x1_system() {
    SpinSystem sys;
    sys.gamma_n = kGammaH1;
    sys.hyperfine = HyperfineTensor::uniaxial_tensor(39.0, 25.0);
    sys.d_zz = 70.0;
    return sys;
}

void bm_zf_deer_trace(benchmark::State& state) {
    SpinSystem sys = x1_system();
    std::vector<double> taus;
    for (int i = 0; i < state.range(0); ++i) {
        taus.push_back(30.0 * i / state.range(0));
    }
    const PulseSequence seq = make_zf_deer_time(32.0, taus);
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_sequence(seq, sys, 0.0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_zf_deer_trace)->Arg(32)->Arg(128);

void bm_residual_map(benchmark::State& state) {
    MeasurementSet m;
    m.b0 = 365.0;
    m.splitting = {26.4, 0.5};
    const double zn = kGammaH1 * 365.0 * 1e-4;
    m.omega_n_minus = {14.9 - zn, 0.2};
    m.omega_n_plus = {14.9 + zn, 0.2};
    ResidualMapOptions opts;
    opts.grid_deg = static_cast<double>(state.range(0));
    opts.refine = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(residual_map(m, 39.0, 25.0, kGammaH1, opts));
    }
}
BENCHMARK(bm_residual_map)->Arg(4)->Arg(1);

void bm_multi_lorentzian_fit(benchmark::State& state) {
    SignalTrace trace;
    trace.x_kind = XKind::frequency;
    for (double x = 2.0; x <= 36.0; x += 0.05) {
        trace.x.push_back(x);
        double y = 0.5;
        for (double f : {7.0, 11.0, 25.0, 32.0}) {
            y -= 0.1 * 0.04 / (0.04 + (x - f) * (x - f));
        }
        trace.y.push_back(y);
        trace.sigma.push_back(0.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_lorentzian(trace, 4));
    }
}
BENCHMARK(bm_multi_lorentzian_fit);

void bm_pulse_unitary(benchmark::State& state) {
    SpinSystem sys = x1_system();
    const Mat8 h = build_hamiltonian(sys, 0.0, Frame::lab);
    for (auto _ : state) {
        benchmark::DoNotOptimize(expm_hermitian_propagator(h, 0.37));
    }
}
BENCHMARK(bm_pulse_unitary);

} // namespace

BENCHMARK_MAIN();
