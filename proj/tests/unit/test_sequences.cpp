#include <doctest.h>

#include <cmath>
#include <random>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spinid/errors.hpp"
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

SpinSystem x2_system() {
    SpinSystem sys;
    sys.gamma_n = kGammaN15;
    sys.hyperfine = HyperfineTensor::uniaxial_tensor(16.0, 6.0);
    sys.d_zz = 47.0;
    return sys;
}

SpinSystem at_field(SpinSystem sys, double splitting) {
    const double ap = sys.hyperfine.a_par;
    const double aperp = sys.hyperfine.a_perp();
    const double u = (splitting * splitting - aperp * aperp) / (ap * ap - aperp * aperp);
    const double chi = std::acos(std::sqrt(u)) * 180.0 / kPi;
    sys.hyperfine.theta_x = kProbeTheta111 + chi;
    sys.hyperfine.phi_x = kProbePhi111;
    return sys;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

PulseSequence random_sequence(std::mt19937& rng) {
    std::uniform_real_distribution<double> value(0.01, 40.0);
    std::uniform_int_distribution<int> nblocks(1, 6);
    std::uniform_int_distribution<int> kind(0, 4);

    PulseSequence seq;
    seq.name = "random-" + std::to_string(rng());
    seq.f_mod = value(rng) * 1e-3;
    seq.reset_toggle = rng() % 2 == 0;
    seq.decay_kind = static_cast<DecayKind>(rng() % 3);
    seq.sweep.variable = static_cast<SweepVariable>(rng() % 4);
    seq.sweep.grid = {value(rng), value(rng) + 50.0};

    const int n = nblocks(rng);
    bool bound = false;
    for (int i = 0; i < n; ++i) {
        switch (kind(rng)) {
            case 0: {
                Pulse p;
                p.target = static_cast<PulseTarget>(rng() % 3);
                p.omega = {value(rng), value(rng), 0.0};
                p.carrier = value(rng);
                p.phase = value(rng);
                p.duration = value(rng);
                p.hard = rng() % 2 == 0;
                if (!bound) {
                    // A bound parameter is overwritten at materialization;
                    // its stored value is canonically zero.
                    if (seq.sweep.variable == SweepVariable::frequency) {
                        p.binding = SweepBinding::carrier;
                        p.carrier = 0.0;
                        bound = true;
                    } else if (seq.sweep.variable == SweepVariable::rf_duration) {
                        p.binding = SweepBinding::duration;
                        p.duration = 0.0;
                        bound = true;
                    } else if (seq.sweep.variable == SweepVariable::phase) {
                        p.binding = SweepBinding::phase_mod;
                        p.phase = 0.0;
                        bound = true;
                    }
                }
                seq.blocks.push_back(p);
                break;
            }
            case 1: {
                Delay d;
                if (!bound && seq.sweep.variable == SweepVariable::tau) {
                    d.swept = true;
                    d.scale = 0.5;
                    bound = true;
                } else {
                    d.duration = value(rng);
                }
                seq.blocks.push_back(d);
                break;
            }
            case 2:
                seq.blocks.push_back(ProbeRotation{value(rng), value(rng)});
                break;
            case 3: {
                HhcpBlock h;
                h.mode = rng() % 2 ? HhcpBlock::Mode::both : HhcpBlock::Mode::single_hyperfine;
                h.branch = rng() % 2 ? HyperfineBranch::plus : HyperfineBranch::minus;
                h.fidelity = 0.9;
                seq.blocks.push_back(h);
                break;
            }
            default:
                seq.blocks.push_back(ConditionalPi{
                    rng() % 2 ? ConditionalPi::Target::electron : ConditionalPi::Target::nucleus,
                    rng() % 2 ? HyperfineBranch::plus : HyperfineBranch::minus, 0.95});
        }
    }
    seq.blocks.push_back(Readout{rng() % 2 ? ReadoutBasis::x : ReadoutBasis::z});
    return seq;
}

} // namespace

TEST_CASE("serialization round-trip is field-exact") {
    std::mt19937 rng(97);
    for (int i = 0; i < 200; ++i) {
        const PulseSequence seq = random_sequence(rng);
        const PulseSequence back = parse_sequence(serialize_sequence(seq));
        CHECK(back == seq);
    }
}

TEST_CASE("parser rejects malformed documents") {
    CHECK_THROWS_AS(parse_sequence("{not json"), ValidationError);
    CHECK_THROWS_AS(parse_sequence("{\"schema\":\"other\",\"version\":1}"), ValidationError);
    CHECK_THROWS_AS(parse_sequence(R"({"schema":"spinid/sequence","version":9,
        "sweep":{"variable":"tau","grid":[1]},"blocks":[]})"),
                    ValidationError);
    // Two swept parameters on one pulse.
    CHECK_THROWS_AS(parse_sequence(R"({"schema":"spinid/sequence","version":1,"name":"x",
        "sweep":{"variable":"frequency","grid":[1,2]},
        "blocks":[{"type":"pulse","target":"defect-electron","omega":[1,0,0],
                   "carrier":"sweep","duration":"sweep"},
                  {"type":"readout","basis":"x"}]})"),
                    ValidationError);
}

TEST_CASE("validation: well-formedness rules") {
    PulseSequence seq = make_zf_deer_time(32.0, {1.0, 2.0});
    CHECK_NOTHROW(seq.validate());

    PulseSequence no_readout = seq;
    no_readout.blocks.pop_back();
    CHECK_THROWS_AS(no_readout.validate(), ValidationError);

    PulseSequence empty_grid = seq;
    empty_grid.sweep.grid.clear();
    CHECK_THROWS_AS(empty_grid.validate(), ValidationError);

    PulseSequence mismatch = seq;
    mismatch.sweep.variable = SweepVariable::frequency; // swept delays need tau
    CHECK_THROWS_AS(mismatch.validate(), ValidationError);

    PulseSequence dead_pulse = seq;
    for (Block& b : dead_pulse.blocks) {
        if (auto* p = std::get_if<Pulse>(&b)) p->omega = {0.0, 0.0, 0.0};
    }
    CHECK_THROWS_AS(dead_pulse.validate(), ValidationError);

    PulseSequence negative_tau = seq;
    negative_tau.sweep.grid = {-1.0, 2.0};
    CHECK_THROWS_AS(negative_tau.validate(), ValidationError);
}

TEST_CASE("every builder output validates") {
    CHECK_NOTHROW(make_deer(7.0, {1000.0, 1010.0}).validate());
    CHECK_NOTHROW(make_zf_deer_frequency(10.0, {5.0, 6.0}).validate());
    CHECK_NOTHROW(make_zf_deer_time(32.0, {1.0, 2.0}).validate());
    NeetrParams params;
    params.rf_carrier = 13.0;
    CHECK_NOTHROW(make_neetr(NeetrMode::spectroscopy, {12.0, 14.0}, params).validate());
    CHECK_NOTHROW(make_neetr(NeetrMode::rabi, {0.0, 10.0}, params).validate());
    CHECK_NOTHROW(make_neetr(NeetrMode::ramsey, {0.0, 10.0}, params).validate());
    CHECK_NOTHROW(make_neetr(NeetrMode::echo, {0.0, 10.0}, params).validate());
    CHECK_NOTHROW(make_nuclear_init(2).validate());
}

TEST_CASE("builder error paths") {
    CHECK_THROWS_AS(make_deer(0.0, {1000.0}), ValidationError);
    CHECK_THROWS_AS(make_deer(7.0, {}), ValidationError);
    CHECK_THROWS_AS(make_zf_deer_time(32.0, {}), ValidationError);
    NeetrParams no_carrier;
    CHECK_THROWS_AS(make_neetr(NeetrMode::rabi, {1.0}, no_carrier), ValidationError);
    CHECK_THROWS_AS(make_neetr(NeetrMode::spectroscopy, {}, no_carrier), ValidationError);
    CHECK_THROWS_AS(make_nuclear_init(0), ValidationError);
}

TEST_CASE("zf-deer frequency sweep shows the two observable lines") {
    SpinSystem sys = x1_system();
    const std::vector<double> grid = linspace(2.0, 38.0, 181);
    const PulseSequence seq = make_zf_deer_frequency(10.0, grid);
    const SignalTrace tr = run_sequence(seq, sys, 0.0);

    // Contrast concentrated near 7 and 32 MHz; flat near omega_perp = 25 MHz.
    double dev7 = 0.0, dev25 = 0.0, dev32 = 0.0;
    for (size_t i = 0; i < tr.size(); ++i) {
        const double d = std::abs(tr.y[i] - 0.5);
        if (std::abs(tr.x[i] - 7.0) < 0.5) dev7 = std::max(dev7, d);
        if (std::abs(tr.x[i] - 25.0) < 0.5) dev25 = std::max(dev25, d);
        if (std::abs(tr.x[i] - 32.0) < 0.5) dev32 = std::max(dev32, d);
    }
    CHECK(dev7 > 0.05);
    CHECK(dev32 > 0.05);
    CHECK(dev25 < 0.02);
}

TEST_CASE("coupling-strength time traces oscillate at the dipolar frequencies") {
    // The fitted cosine y = a cos(w t + phi) + ... has w = pi * d, so the
    // coupling strength is w / pi.
    struct Case {
        SpinSystem sys;
        double line;
        double d_khz;
    };
    const Case cases[] = {{x1_system(), 32.0, 70.0}, {x2_system(), 11.0, 47.0}};
    for (const Case& c : cases) {
        const double d = c.d_khz * 1e-3;
        const std::vector<double> taus = linspace(0.0, 2.0 / d, 81);
        const PulseSequence seq = make_zf_deer_time(c.line, taus);
        const SignalTrace tr = run_sequence(seq, c.sys, 0.0);
        const FitResult fit =
            fit_decaying_cosine(tr, CosineDecay::free_decay, BaselineKind::linear);
        const double coupling_khz = fit.value("omega") / kPi * 1e3;
        CHECK(coupling_khz == doctest::Approx(c.d_khz).epsilon(5e-3));
    }
}

TEST_CASE("neetr rabi mode produces nuclear oscillations in the rf duration") {
    SpinSystem sys = at_field(x1_system(), 26.4);
    const double b0 = 365.0;
    const double f_rf = transition_frequency(sys, b0, ConditionalPi::Target::nucleus,
                                             HyperfineBranch::plus);
    const double omega_rf = 0.05;
    const double t_pi = transition_pi_time(sys, b0, f_rf, PulseTarget::defect_nucleus, omega_rf);

    NeetrParams params;
    params.rf_carrier = f_rf;
    params.drive.omega_rf = omega_rf;
    const std::vector<double> grid = linspace(0.0, 4.0 * t_pi, 49);
    const PulseSequence seq = make_neetr(NeetrMode::rabi, grid, params);
    const SignalTrace tr = run_sequence(seq, sys, b0);

    const FitResult fit =
        fit_decaying_cosine(tr, CosineDecay::free_decay, BaselineKind::linear);
    // Full population cycle every 2 t_pi.
    const double period = 2.0 * kPi / fit.value("omega");
    CHECK(period == doctest::Approx(2.0 * t_pi).epsilon(0.02));
}

TEST_CASE("neetr ramsey mode oscillates at the modulation frequency") {
    SpinSystem sys = at_field(x1_system(), 26.4);
    const double b0 = 365.0;
    const double f_rf = transition_frequency(sys, b0, ConditionalPi::Target::nucleus,
                                             HyperfineBranch::plus);
    const double omega_rf = 0.05;

    NeetrParams params;
    params.rf_carrier = f_rf;
    params.drive.omega_rf = omega_rf;
    params.rf_pi_time = transition_pi_time(sys, b0, f_rf, PulseTarget::defect_nucleus, omega_rf);
    params.f_mod = 0.020; // 20 kHz

    const std::vector<double> taus = linspace(0.0, 100.0, 41);
    const PulseSequence seq = make_neetr(NeetrMode::ramsey, taus, params);
    DecoherenceParams dec;
    dec.t2_star_bath = 250.0;
    const SignalTrace tr = run_sequence(seq, sys, b0, dec);
    const FitResult fit =
        fit_decaying_cosine(tr, CosineDecay::free_decay, BaselineKind::linear);
    CHECK(fit.value("omega") / (2.0 * kPi) == doctest::Approx(0.020).epsilon(0.02));
    CHECK(fit.value("T") == doctest::Approx(250.0).epsilon(0.05));
}

TEST_CASE("neetr spectroscopy splitting magnitude survives a gamma_n sign flip") {
    SpinSystem h = at_field(x1_system(), 26.4);
    SpinSystem flipped = h;
    flipped.gamma_n = -h.gamma_n;
    const double b0 = 365.0;
    const auto split = [&](const SpinSystem& s) {
        return transition_frequency(s, b0, ConditionalPi::Target::nucleus,
                                    HyperfineBranch::plus) -
               transition_frequency(s, b0, ConditionalPi::Target::nucleus,
                                    HyperfineBranch::minus);
    };
    CHECK(split(h) == doctest::Approx(split(flipped)).epsilon(1e-12));
}

TEST_CASE("golden sequence files parse, validate, and re-serialize identically") {
    const char* env = std::getenv("SPINID_TEST_DATA");
    REQUIRE(env != nullptr);
    for (const char* name : {"zf_deer_time_x1.json", "neetr_ramsey_x1.json"}) {
        std::ifstream f(std::string(env) + "/" + name);
        REQUIRE(f.good());
        std::ostringstream ss;
        ss << f.rdbuf();
        const PulseSequence seq = parse_sequence(ss.str());
        CHECK_NOTHROW(seq.validate());
        CHECK(serialize_sequence(seq) + "\n" == ss.str());
    }
}

TEST_CASE("nuclear init sequence structure") {
    const PulseSequence seq = make_nuclear_init(3, InitParams{0.87, 0.85});
    int hhcp_count = 0;
    int pi_count = 0;
    for (const Block& b : seq.blocks) {
        if (std::holds_alternative<HhcpBlock>(b)) ++hhcp_count;
        if (std::holds_alternative<ConditionalPi>(b)) ++pi_count;
    }
    CHECK(hhcp_count == 3);
    CHECK(pi_count == 6);
    const PulseSequence back = parse_sequence(serialize_sequence(seq));
    CHECK(back == seq);
}
