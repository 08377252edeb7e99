#pragma once

#include <limits>
#include <optional>

#include "spinid/operators.hpp"
#include "spinid/sequences.hpp"
#include "spinid/signal_trace.hpp"
#include "spinid/spin_model.hpp"

// Numerical propagation of the joint probe-defect density matrix under
// piecewise-constant Hamiltonians. Free evolution is exact; driven blocks are
// evolved in the rotating frame of their carrier after dropping the
// counter-rotating terms, with exact boundary phases so composition across
// blocks stays consistent in absolute time. This is the brute-force oracle
// for the closed-form signal expressions.

namespace spinid {

enum class Frame { lab, rotating, bell };

/// Joint density matrix on probe(2) (x) defect-electron(2) (x) nucleus(2).
struct DensityState {
    enum class Basis { product, bell_electron_nuclear };
    Mat8 rho = Mat8::Zero();
    Basis basis = Basis::product;

    /// Probe polarized along +z with efficiency eta, defect fully mixed:
    /// rho0 = (1/8)(I + 2 eta Sz_probe).
    static DensityState initial(double eta = 1.0);

    /// Throws unless trace = 1 (1e-12), Hermitian (1e-12), eigenvalues >= -1e-10.
    void validate() const;

    double expectation(const Mat8& op) const;
};

struct DecoherenceParams {
    double t1e = std::numeric_limits<double>::infinity();          // us
    double t2_star_bath = std::numeric_limits<double>::infinity(); // us
    double t2_bath = std::numeric_limits<double>::infinity();      // us

    void validate() const;
    /// 1/T = Gamma_bath + Gamma_spam + Gamma_rtn = 1/T2(*) + 1/T1e + 1/(2 T1e).
    double total_rate(DecayKind kind) const;
};

/// Defect internal Hamiltonian (4x4, electron (x) nucleus). At b0 = 0 this is
/// the zero-field form in the defect principal frame; at b0 > 0 the secular
/// field-frame form including the nuclear Zeeman term.
Mat4 defect_hamiltonian(const SpinSystem& sys, double b0_gauss);

/// Full register Hamiltonian: defect internal part plus the probe-conditioned
/// dipolar coupling 2 Sz_probe (dzx Sx + dzy Sy + dzz Sz).
/// Frame::bell (b0 = 0 only) conjugates the defect subspace by the Bell
/// transform; Frame::rotating subtracts carrier * N for the carrier's
/// harmonic assignment. Invalid frame/carrier combinations throw.
Mat8 build_hamiltonian(const SpinSystem& sys, double b0_gauss, Frame frame,
                       std::optional<double> carrier_mhz = std::nullopt);

/// rho -> U rho U^dagger with U = exp(-i 2 pi H t). Throws on non-Hermitian H.
DensityState evolve(const DensityState& state, const MatX& h, double t_us);

struct HhcpParams {
    HhcpBlock::Mode mode = HhcpBlock::Mode::both;
    HyperfineBranch branch = HyperfineBranch::plus;
    double fidelity = 1.0;     // F1
    double omega_probe = 1.0;  // MHz
    double omega_defect = 1.0; // MHz
    double match_tol = 0.01;   // Hartmann-Hahn relative mismatch tolerance
};

/// Matched-drive polarization exchange between probe and defect electron,
/// applied as an iSWAP in the defect eigenbasis; single-hyperfine mode
/// exchanges only within the driven nuclear chain. Throws when the drive
/// amplitudes are mismatched beyond tolerance.
DensityState hhcp_iswap(const DensityState& state, const SpinSystem& sys, double b0_gauss,
                        const HhcpParams& params = {});

/// Contrast envelope exp(-t (1/T2^(*) + 3/(2 T1e))) applied pointwise to a
/// time-domain trace.
SignalTrace apply_relaxation_decay(const SignalTrace& trace, const DecoherenceParams& dec,
                                   DecayKind kind);

struct RunOptions {
    double eta = 1.0;           // probe polarization efficiency
    double bandwidth_factor = 0.5; // RWA window W = factor * carrier
    bool apply_decoherence = true;
};

/// Propagate rho0 through all blocks per sweep point and read out the probe.
/// x-basis readout reports the echo signal S = (1/2)(1/2 + <Sx_probe>), so a
/// fully refocused echo reads 1/2; z-basis readout returns the population
/// signal 1/2 + <Sz_probe>.
SignalTrace run_sequence(const PulseSequence& seq, const SpinSystem& sys, double b0_gauss,
                         const DecoherenceParams& dec = {}, const RunOptions& opts = {});

struct InitResult {
    double p_n = 0.0; // nuclear polarization from manifold populations
    DensityState state;
};

struct NuclearInitOptions {
    double eta = 0.8;   // probe re-polarization per cycle
    InitParams gates;   // HHCP/SWAP fidelities and branches
};

/// Concatenated polarization transfer probe -> defect electron -> nucleus,
/// re-polarizing the probe each repetition.
InitResult run_nuclear_init(const SpinSystem& sys, double b0_gauss,
                            const NuclearInitOptions& opts, int repetitions);

/// Duration of a resonant pi rotation for a drive of amplitude omega (MHz)
/// applied at carrier_mhz on the given target, from the rotating-frame matrix
/// element of the dominant transition.
double transition_pi_time(const SpinSystem& sys, double b0_gauss, double carrier_mhz,
                          PulseTarget target, double omega_mhz);

/// Frequency of the labeled transition (electron branch +-, or nuclear line
/// within the upper/lower electron manifold) at field b0.
double transition_frequency(const SpinSystem& sys, double b0_gauss,
                            ConditionalPi::Target target, HyperfineBranch branch);

} // namespace spinid
