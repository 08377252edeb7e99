#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spinid/spin_model.hpp"

// Declarative catalog of the pulse protocols: every experiment is a named,
// serializable program of blocks swept over one variable. Times are us,
// frequencies MHz, phases rad. Probe control pulses are ideal instantaneous
// rotations; defect electron/nucleus pulses are physical driven blocks.

namespace spinid {

enum class PulseTarget { probe_electron, defect_electron, defect_nucleus };
enum class SweepVariable { tau, frequency, rf_duration, phase };
enum class ReadoutBasis { x, z };
enum class HyperfineBranch { plus, minus }; // which electron-flip transition
enum class DecayKind { none, ramsey, echo };

/// Which pulse parameter is bound to the sweep variable.
enum class SweepBinding { none, carrier, duration, phase_mod };

/// Physical drive block on one spin of the register. A `hard` pulse applies
/// the co-rotating drive generator alone (internal Hamiltonian and frequency
/// selectivity dropped for its duration): the idealized broadband rotation
/// used by the closed-form signal derivations.
struct Pulse {
    PulseTarget target = PulseTarget::defect_electron;
    std::array<double, 3> omega{0.0, 0.0, 0.0}; // Rabi amplitudes (MHz)
    double carrier = 0.0;                       // MHz
    double phase = 0.0;                         // rad
    double duration = 0.0;                      // us
    bool hard = false;
    SweepBinding binding = SweepBinding::none;
};

/// Free evolution. A swept delay lasts scale * sweep_value.
struct Delay {
    double duration = 0.0; // us
    bool swept = false;
    double scale = 1.0;
};

/// Ideal instantaneous rotation of the probe spin about an equatorial axis
/// (axis_phase = 0 is x, pi/2 is y).
struct ProbeRotation {
    double angle = 0.0;      // rad
    double axis_phase = 0.0; // rad
};

/// Matched-drive polarization exchange between probe and defect electron,
/// applied as an (optionally nuclear-state-conditional) iSWAP gate.
struct HhcpBlock {
    enum class Mode { both, single_hyperfine };
    Mode mode = Mode::both;
    HyperfineBranch branch = HyperfineBranch::plus; // driven transition in single mode
    double fidelity = 1.0;
    double omega_probe = 1.0;  // MHz
    double omega_defect = 1.0; // MHz
};

/// Exact pi rotation on one labeled transition of the defect, conditional on
/// the other spin through frequency selectivity; fidelity < 1 mixes with the
/// pre-gate state.
struct ConditionalPi {
    enum class Target { electron, nucleus };
    Target target = Target::electron;
    HyperfineBranch branch = HyperfineBranch::plus;
    double fidelity = 1.0;
};

/// Projective probe readout mapped to a normalized signal in [0, 1].
struct Readout {
    ReadoutBasis basis = ReadoutBasis::z;
};

using Block = std::variant<Pulse, Delay, ProbeRotation, HhcpBlock, ConditionalPi, Readout>;

struct Sweep {
    SweepVariable variable = SweepVariable::tau;
    std::vector<double> grid;
};

struct PulseSequence {
    std::string name;
    std::vector<Block> blocks;
    Sweep sweep;
    double f_mod = 0.0;        // MHz; phase of a phase_mod-bound pulse is 2*pi*f_mod*x
    bool reset_toggle = false; // average shots with/without a probe pi after init
    DecayKind decay_kind = DecayKind::none;

    /// Throws ValidationError unless the sequence is well-formed: ends with
    /// exactly one readout, has a nonempty grid, and its sweep bindings are
    /// consistent with the sweep variable.
    void validate() const;
};

bool operator==(const Pulse&, const Pulse&);
bool operator==(const Delay&, const Delay&);
bool operator==(const ProbeRotation&, const ProbeRotation&);
bool operator==(const HhcpBlock&, const HhcpBlock&);
bool operator==(const ConditionalPi&, const ConditionalPi&);
bool operator==(const Readout&, const Readout&);
bool operator==(const PulseSequence&, const PulseSequence&);

/// Serialize to the versioned sequence JSON document.
std::string serialize_sequence(const PulseSequence& seq, int indent = 2);

/// Parse a sequence JSON document; throws ValidationError with field context.
PulseSequence parse_sequence(const std::string& json_text);

// ---------------------------------------------------------------------------
// Protocol builders
// ---------------------------------------------------------------------------

struct DriveDefaults {
    double omega_probe = 1.0;   // MHz, probe Rabi calibration
    double omega_defect = 1.0;  // MHz, defect electron drive
    double omega_rf = 0.025;    // MHz, nuclear RF drive
};

/// Probe spin-echo with a defect recoupling pi-pulse, swept in frequency.
/// tau is the total free-evolution time; the recoupling pulse sits at the
/// echo midpoint, simultaneous with the probe pi.
PulseSequence make_deer(double tau_us, const std::vector<double>& freq_grid_mhz,
                        const DriveDefaults& drive = {});

/// DEER at zero field. Frequency mode sweeps the recoupling carrier at fixed
/// tau with a frequency-selective pulse; time mode sweeps tau at a fixed
/// resonant carrier and defaults to the hard recoupling pulse of the
/// closed-form signal model (hard_pulse = false keeps the selective pulse,
/// which adds a second-harmonic component to the trace).
PulseSequence make_zf_deer_frequency(double tau_us, const std::vector<double>& freq_grid_mhz,
                                     const DriveDefaults& drive = {});
PulseSequence make_zf_deer_time(double carrier_mhz, const std::vector<double>& tau_grid_us,
                                const DriveDefaults& drive = {}, bool hard_pulse = true);

enum class NeetrMode { spectroscopy, rabi, ramsey, echo };

struct NeetrParams {
    HyperfineBranch hhcp_branch = HyperfineBranch::plus;
    HyperfineBranch rf_branch = HyperfineBranch::plus; // nuclear line for fixed-carrier modes
    double rf_carrier = 0.0;  // MHz; used by rabi/ramsey/echo
    double rf_pi_time = 0.0;  // us; 0 means calibrate from omega_rf at run time
    double f_mod = 0.0;       // MHz, Ramsey/echo phase modulation
    double hhcp_fidelity = 1.0;
    DriveDefaults drive;
};

/// Nuclear spectroscopy / control through two conditional polarization
/// transfers: init-HHCP, conditional RF block, readout-HHCP.
PulseSequence make_neetr(NeetrMode mode, const std::vector<double>& grid,
                         const NeetrParams& params = {});

struct InitParams {
    double hhcp_fidelity = 1.0; // F1
    double swap_fidelity = 1.0; // F2, applied to the electron-nuclear SWAP
    HyperfineBranch electron_branch = HyperfineBranch::plus;
    HyperfineBranch nuclear_branch = HyperfineBranch::plus;
};

/// Full probe -> defect-electron iSWAP (both hyperfine transitions driven)
/// followed by the conditional electron-pi + nuclear-pi SWAP, repeated.
PulseSequence make_nuclear_init(int repetitions, const InitParams& params = {});

} // namespace spinid
