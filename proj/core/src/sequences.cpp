#include "spinid/sequences.hpp"

#include <cmath>

#include <json.hpp>

#include "spinid/errors.hpp"

namespace spinid {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kSchemaName = "spinid/sequence";

const char* to_string(PulseTarget t) {
    switch (t) {
        case PulseTarget::probe_electron: return "probe-electron";
        case PulseTarget::defect_electron: return "defect-electron";
        case PulseTarget::defect_nucleus: return "defect-nucleus";
    }
    return "?";
}

PulseTarget target_from_string(const std::string& s) {
    if (s == "probe-electron") return PulseTarget::probe_electron;
    if (s == "defect-electron") return PulseTarget::defect_electron;
    if (s == "defect-nucleus") return PulseTarget::defect_nucleus;
    throw ValidationError("sequence: unknown pulse target '" + s + "'");
}

const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::tau: return "tau";
        case SweepVariable::frequency: return "frequency";
        case SweepVariable::rf_duration: return "rf-duration";
        case SweepVariable::phase: return "phase";
    }
    return "?";
}

SweepVariable sweep_variable_from_string(const std::string& s) {
    if (s == "tau") return SweepVariable::tau;
    if (s == "frequency") return SweepVariable::frequency;
    if (s == "rf-duration") return SweepVariable::rf_duration;
    if (s == "phase") return SweepVariable::phase;
    throw ValidationError("sequence: unknown sweep variable '" + s + "'");
}

const char* to_string(HyperfineBranch b) {
    return b == HyperfineBranch::plus ? "plus" : "minus";
}

HyperfineBranch branch_from_string(const std::string& s) {
    if (s == "plus") return HyperfineBranch::plus;
    if (s == "minus") return HyperfineBranch::minus;
    throw ValidationError("sequence: unknown hyperfine branch '" + s + "'");
}

const char* to_string(DecayKind k) {
    switch (k) {
        case DecayKind::none: return "none";
        case DecayKind::ramsey: return "ramsey";
        case DecayKind::echo: return "echo";
    }
    return "?";
}

DecayKind decay_kind_from_string(const std::string& s) {
    if (s == "none") return DecayKind::none;
    if (s == "ramsey") return DecayKind::ramsey;
    if (s == "echo") return DecayKind::echo;
    throw ValidationError("sequence: unknown decay kind '" + s + "'");
}

json block_to_json(const Block& block) {
    json j;
    if (const auto* p = std::get_if<Pulse>(&block)) {
        j["type"] = "pulse";
        j["target"] = to_string(p->target);
        j["omega"] = {p->omega[0], p->omega[1], p->omega[2]};
        j["phase"] = p->phase;
        if (p->hard) j["hard"] = true;
        switch (p->binding) {
            case SweepBinding::none:
                j["carrier"] = p->carrier;
                j["duration"] = p->duration;
                break;
            case SweepBinding::carrier:
                j["carrier"] = "sweep";
                j["duration"] = p->duration;
                break;
            case SweepBinding::duration:
                j["carrier"] = p->carrier;
                j["duration"] = "sweep";
                break;
            case SweepBinding::phase_mod:
                j["carrier"] = p->carrier;
                j["duration"] = p->duration;
                j["phase"] = "phase-mod";
                break;
        }
    } else if (const auto* d = std::get_if<Delay>(&block)) {
        j["type"] = "delay";
        if (d->swept) {
            j["duration"] = "sweep";
            j["scale"] = d->scale;
        } else {
            j["duration"] = d->duration;
        }
    } else if (const auto* r = std::get_if<ProbeRotation>(&block)) {
        j["type"] = "probe-rotation";
        j["angle"] = r->angle;
        j["axis_phase"] = r->axis_phase;
    } else if (const auto* h = std::get_if<HhcpBlock>(&block)) {
        j["type"] = "hhcp";
        j["mode"] = h->mode == HhcpBlock::Mode::both ? "both" : "single-hyperfine";
        j["branch"] = to_string(h->branch);
        j["fidelity"] = h->fidelity;
        j["omega_probe"] = h->omega_probe;
        j["omega_defect"] = h->omega_defect;
    } else if (const auto* c = std::get_if<ConditionalPi>(&block)) {
        j["type"] = "conditional-pi";
        j["target"] = c->target == ConditionalPi::Target::electron ? "electron" : "nucleus";
        j["branch"] = to_string(c->branch);
        j["fidelity"] = c->fidelity;
    } else if (const auto* m = std::get_if<Readout>(&block)) {
        j["type"] = "readout";
        j["basis"] = m->basis == ReadoutBasis::x ? "x" : "z";
    }
    return j;
}

Block block_from_json(const json& j, size_t index) {
    const auto ctx = [index](const std::string& msg) {
        return ValidationError("sequence: block " + std::to_string(index) + ": " + msg);
    };
    if (!j.contains("type")) throw ctx("missing 'type'");
    const std::string type = j.at("type").get<std::string>();

    if (type == "pulse") {
        Pulse p;
        p.target = target_from_string(j.at("target").get<std::string>());
        const auto& om = j.at("omega");
        if (!om.is_array() || om.size() != 3) throw ctx("'omega' must be a 3-array");
        for (int k = 0; k < 3; ++k) p.omega[k] = om[k].get<double>();

        if (j.at("carrier").is_string()) {
            if (j.at("carrier").get<std::string>() != "sweep") throw ctx("bad 'carrier'");
            p.binding = SweepBinding::carrier;
        } else {
            p.carrier = j.at("carrier").get<double>();
        }
        if (j.at("duration").is_string()) {
            if (j.at("duration").get<std::string>() != "sweep") throw ctx("bad 'duration'");
            if (p.binding != SweepBinding::none) throw ctx("two swept parameters on one pulse");
            p.binding = SweepBinding::duration;
        } else {
            p.duration = j.at("duration").get<double>();
        }
        p.hard = j.value("hard", false);
        if (j.contains("phase")) {
            if (j.at("phase").is_string()) {
                if (j.at("phase").get<std::string>() != "phase-mod") throw ctx("bad 'phase'");
                if (p.binding != SweepBinding::none) throw ctx("two swept parameters on one pulse");
                p.binding = SweepBinding::phase_mod;
            } else {
                p.phase = j.at("phase").get<double>();
            }
        }
        return p;
    }
    if (type == "delay") {
        Delay d;
        if (j.at("duration").is_string()) {
            if (j.at("duration").get<std::string>() != "sweep") throw ctx("bad 'duration'");
            d.swept = true;
            d.scale = j.value("scale", 1.0);
        } else {
            d.duration = j.at("duration").get<double>();
        }
        return d;
    }
    if (type == "probe-rotation") {
        ProbeRotation r;
        r.angle = j.at("angle").get<double>();
        r.axis_phase = j.value("axis_phase", 0.0);
        return r;
    }
    if (type == "hhcp") {
        HhcpBlock h;
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "both") {
            h.mode = HhcpBlock::Mode::both;
        } else if (mode == "single-hyperfine") {
            h.mode = HhcpBlock::Mode::single_hyperfine;
        } else {
            throw ctx("unknown hhcp mode '" + mode + "'");
        }
        h.branch = branch_from_string(j.value("branch", "plus"));
        h.fidelity = j.value("fidelity", 1.0);
        h.omega_probe = j.value("omega_probe", 1.0);
        h.omega_defect = j.value("omega_defect", 1.0);
        return h;
    }
    if (type == "conditional-pi") {
        ConditionalPi c;
        const std::string target = j.at("target").get<std::string>();
        if (target == "electron") {
            c.target = ConditionalPi::Target::electron;
        } else if (target == "nucleus") {
            c.target = ConditionalPi::Target::nucleus;
        } else {
            throw ctx("unknown conditional-pi target '" + target + "'");
        }
        c.branch = branch_from_string(j.value("branch", "plus"));
        c.fidelity = j.value("fidelity", 1.0);
        return c;
    }
    if (type == "readout") {
        Readout m;
        const std::string basis = j.value("basis", "z");
        if (basis == "x") {
            m.basis = ReadoutBasis::x;
        } else if (basis == "z") {
            m.basis = ReadoutBasis::z;
        } else {
            throw ctx("unknown readout basis '" + basis + "'");
        }
        return m;
    }
    throw ctx("unknown block type '" + type + "'");
}

} // namespace

bool operator==(const Pulse& a, const Pulse& b) {
    return a.target == b.target && a.omega == b.omega && a.carrier == b.carrier &&
           a.phase == b.phase && a.duration == b.duration && a.hard == b.hard &&
           a.binding == b.binding;
}
bool operator==(const Delay& a, const Delay& b) {
    return a.duration == b.duration && a.swept == b.swept && a.scale == b.scale;
}
bool operator==(const ProbeRotation& a, const ProbeRotation& b) {
    return a.angle == b.angle && a.axis_phase == b.axis_phase;
}
bool operator==(const HhcpBlock& a, const HhcpBlock& b) {
    return a.mode == b.mode && a.branch == b.branch && a.fidelity == b.fidelity &&
           a.omega_probe == b.omega_probe && a.omega_defect == b.omega_defect;
}
bool operator==(const ConditionalPi& a, const ConditionalPi& b) {
    return a.target == b.target && a.branch == b.branch && a.fidelity == b.fidelity;
}
bool operator==(const Readout& a, const Readout& b) { return a.basis == b.basis; }

bool operator==(const PulseSequence& a, const PulseSequence& b) {
    return a.name == b.name && a.blocks == b.blocks &&
           a.sweep.variable == b.sweep.variable && a.sweep.grid == b.sweep.grid &&
           a.f_mod == b.f_mod && a.reset_toggle == b.reset_toggle &&
           a.decay_kind == b.decay_kind;
}

void PulseSequence::validate() const {
    if (sweep.grid.empty()) {
        throw ValidationError("sequence '" + name + "': sweep grid is empty");
    }
    if (blocks.empty() || !std::holds_alternative<Readout>(blocks.back())) {
        throw ValidationError("sequence '" + name + "': must end with a readout block");
    }
    int readouts = 0;
    int swept_bindings = 0;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const Block& b = blocks[i];
        if (std::holds_alternative<Readout>(b)) {
            ++readouts;
            continue;
        }
        if (const auto* p = std::get_if<Pulse>(&b)) {
            if (p->duration < 0.0) {
                throw ValidationError("sequence '" + name + "': negative pulse duration");
            }
            if (p->omega[0] == 0.0 && p->omega[1] == 0.0 && p->omega[2] == 0.0) {
                throw ValidationError("sequence '" + name +
                                      "': pulse block with all Rabi amplitudes zero");
            }
            if (p->binding != SweepBinding::none) {
                ++swept_bindings;
                const bool ok =
                    (p->binding == SweepBinding::carrier &&
                     sweep.variable == SweepVariable::frequency) ||
                    (p->binding == SweepBinding::duration &&
                     sweep.variable == SweepVariable::rf_duration) ||
                    (p->binding == SweepBinding::phase_mod &&
                     (sweep.variable == SweepVariable::phase ||
                      sweep.variable == SweepVariable::tau));
                if (!ok) {
                    throw ValidationError("sequence '" + name +
                                          "': pulse sweep binding does not match the sweep "
                                          "variable");
                }
            }
        } else if (const auto* d = std::get_if<Delay>(&b)) {
            if (d->swept) {
                ++swept_bindings;
                if (sweep.variable != SweepVariable::tau) {
                    throw ValidationError("sequence '" + name +
                                          "': swept delay requires a tau sweep");
                }
            } else if (d->duration < 0.0) {
                throw ValidationError("sequence '" + name + "': negative delay");
            }
        }
    }
    if (readouts != 1) {
        throw ValidationError("sequence '" + name + "': exactly one readout block required");
    }
    // Single-point grids describe one-shot programs and need no bound block.
    if (swept_bindings == 0 && sweep.grid.size() != 1) {
        throw ValidationError("sequence '" + name + "': no block is bound to the sweep");
    }
    for (double x : sweep.grid) {
        if (!std::isfinite(x)) {
            throw ValidationError("sequence '" + name + "': non-finite sweep value");
        }
        if (sweep.variable == SweepVariable::tau || sweep.variable == SweepVariable::rf_duration) {
            if (x < 0.0) {
                throw ValidationError("sequence '" + name + "': negative time in sweep grid");
            }
        }
    }
}

std::string serialize_sequence(const PulseSequence& seq, int indent) {
    json j;
    j["schema"] = kSchemaName;
    j["version"] = kSchemaVersion;
    j["name"] = seq.name;
    j["sweep"] = {{"variable", to_string(seq.sweep.variable)}, {"grid", seq.sweep.grid}};
    j["f_mod_mhz"] = seq.f_mod;
    j["reset_toggle"] = seq.reset_toggle;
    j["decay_kind"] = to_string(seq.decay_kind);
    j["blocks"] = json::array();
    for (const Block& b : seq.blocks) {
        j["blocks"].push_back(block_to_json(b));
    }
    return j.dump(indent);
}

PulseSequence parse_sequence(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("sequence: JSON parse error: ") + e.what());
    }
    if (j.value("schema", "") != kSchemaName) {
        throw ValidationError("sequence: missing or wrong 'schema' field");
    }
    if (j.value("version", -1) != kSchemaVersion) {
        throw ValidationError("sequence: unsupported schema version");
    }
    PulseSequence seq;
    seq.name = j.value("name", "");
    const auto& sw = j.at("sweep");
    seq.sweep.variable = sweep_variable_from_string(sw.at("variable").get<std::string>());
    seq.sweep.grid = sw.at("grid").get<std::vector<double>>();
    seq.f_mod = j.value("f_mod_mhz", 0.0);
    seq.reset_toggle = j.value("reset_toggle", false);
    seq.decay_kind = decay_kind_from_string(j.value("decay_kind", "none"));
    const auto& blocks = j.at("blocks");
    for (size_t i = 0; i < blocks.size(); ++i) {
        seq.blocks.push_back(block_from_json(blocks[i], i));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace {

/// Half-duration recoupling pulse; the probe pi sits between the two halves.
void push_echo_core(std::vector<Block>& blocks, const Pulse& recoupling) {
    Pulse half = recoupling;
    half.duration = 0.5 * recoupling.duration;
    blocks.push_back(half);
    blocks.push_back(ProbeRotation{kPi, 0.0}); // pi about x
    blocks.push_back(half);
}

Pulse electron_pi_pulse(double carrier, const DriveDefaults& drive) {
    Pulse p;
    p.target = PulseTarget::defect_electron;
    p.omega = {drive.omega_defect, 0.0, 0.0};
    p.carrier = carrier;
    p.duration = 0.5 / drive.omega_defect; // t_pi = 1/(2 Omega)
    return p;
}

} // namespace

PulseSequence make_deer(double tau_us, const std::vector<double>& freq_grid_mhz,
                        const DriveDefaults& drive) {
    if (!(tau_us > 0.0)) {
        throw ValidationError("make_deer: tau must be positive");
    }
    if (freq_grid_mhz.empty()) {
        throw ValidationError("make_deer: empty frequency grid");
    }
    PulseSequence seq;
    seq.name = "deer";
    seq.sweep = {SweepVariable::frequency, freq_grid_mhz};
    seq.decay_kind = DecayKind::echo;

    seq.blocks.push_back(ProbeRotation{0.5 * kPi, 0.5 * kPi}); // pi/2 about y
    seq.blocks.push_back(Delay{0.5 * tau_us, false, 1.0});
    Pulse rec = electron_pi_pulse(0.0, drive);
    rec.binding = SweepBinding::carrier;
    push_echo_core(seq.blocks, rec);
    seq.blocks.push_back(Delay{0.5 * tau_us, false, 1.0});
    seq.blocks.push_back(Readout{ReadoutBasis::x});
    return seq;
}

PulseSequence make_zf_deer_frequency(double tau_us, const std::vector<double>& freq_grid_mhz,
                                     const DriveDefaults& drive) {
    PulseSequence seq = make_deer(tau_us, freq_grid_mhz, drive);
    seq.name = "zf-deer-frequency";
    return seq;
}

PulseSequence make_zf_deer_time(double carrier_mhz, const std::vector<double>& tau_grid_us,
                                const DriveDefaults& drive, bool hard_pulse) {
    if (tau_grid_us.empty()) {
        throw ValidationError("make_zf_deer_time: empty tau grid");
    }
    PulseSequence seq;
    seq.name = "zf-deer-time";
    seq.sweep = {SweepVariable::tau, tau_grid_us};
    seq.decay_kind = DecayKind::echo;

    seq.blocks.push_back(ProbeRotation{0.5 * kPi, 0.5 * kPi});
    seq.blocks.push_back(Delay{0.0, true, 0.5});
    Pulse rec = electron_pi_pulse(carrier_mhz, drive);
    rec.hard = hard_pulse;
    push_echo_core(seq.blocks, rec);
    seq.blocks.push_back(Delay{0.0, true, 0.5});
    seq.blocks.push_back(Readout{ReadoutBasis::x});
    return seq;
}

PulseSequence make_neetr(NeetrMode mode, const std::vector<double>& grid,
                         const NeetrParams& params) {
    if (grid.empty()) {
        throw ValidationError("make_neetr: empty sweep grid");
    }
    PulseSequence seq;
    seq.reset_toggle = true;
    seq.f_mod = params.f_mod;

    HhcpBlock hhcp;
    hhcp.mode = HhcpBlock::Mode::single_hyperfine;
    hhcp.branch = params.hhcp_branch;
    hhcp.fidelity = params.hhcp_fidelity;
    hhcp.omega_probe = params.drive.omega_probe;
    hhcp.omega_defect = params.drive.omega_defect;

    const double omega_rf = params.drive.omega_rf;
    Pulse rf;
    rf.target = PulseTarget::defect_nucleus;
    rf.omega = {omega_rf, 0.0, 0.0};
    rf.carrier = params.rf_carrier;
    const double t_pi = params.rf_pi_time > 0.0 ? params.rf_pi_time : 0.5 / omega_rf;

    seq.blocks.push_back(hhcp);

    switch (mode) {
        case NeetrMode::spectroscopy: {
            seq.name = "neetr-spectroscopy";
            seq.sweep = {SweepVariable::frequency, grid};
            rf.duration = t_pi;
            rf.binding = SweepBinding::carrier;
            rf.carrier = 0.0; // bound to the sweep
            seq.blocks.push_back(rf);
            break;
        }
        case NeetrMode::rabi: {
            seq.name = "neetr-rabi";
            seq.sweep = {SweepVariable::rf_duration, grid};
            if (params.rf_carrier == 0.0) {
                throw ValidationError("make_neetr: rabi mode requires rf_carrier");
            }
            rf.binding = SweepBinding::duration;
            seq.blocks.push_back(rf);
            seq.decay_kind = DecayKind::ramsey;
            break;
        }
        case NeetrMode::ramsey:
        case NeetrMode::echo: {
            if (params.rf_carrier == 0.0) {
                throw ValidationError("make_neetr: ramsey/echo modes require rf_carrier");
            }
            seq.sweep = {SweepVariable::tau, grid};
            Pulse half = rf;
            half.duration = 0.5 * t_pi;
            if (mode == NeetrMode::ramsey) {
                seq.name = "neetr-ramsey";
                seq.decay_kind = DecayKind::ramsey;
                seq.blocks.push_back(half);
                seq.blocks.push_back(Delay{0.0, true, 1.0});
            } else {
                seq.name = "neetr-echo";
                seq.decay_kind = DecayKind::echo;
                Pulse full = rf;
                full.duration = t_pi;
                seq.blocks.push_back(half);
                seq.blocks.push_back(Delay{0.0, true, 0.5});
                seq.blocks.push_back(full);
                seq.blocks.push_back(Delay{0.0, true, 0.5});
            }
            Pulse closing = half;
            closing.binding = SweepBinding::phase_mod; // phi = 2 pi f_mod tau
            seq.blocks.push_back(closing);
            break;
        }
    }

    seq.blocks.push_back(hhcp);
    seq.blocks.push_back(Readout{ReadoutBasis::z});
    seq.validate();
    return seq;
}

PulseSequence make_nuclear_init(int repetitions, const InitParams& params) {
    if (repetitions < 1) {
        throw ValidationError("make_nuclear_init: repetitions must be >= 1");
    }
    PulseSequence seq;
    seq.name = "nuclear-init";
    seq.sweep = {SweepVariable::rf_duration, {0.0}}; // degenerate sweep: one shot

    HhcpBlock full;
    full.mode = HhcpBlock::Mode::both;
    full.fidelity = params.hhcp_fidelity;

    for (int r = 0; r < repetitions; ++r) {
        seq.blocks.push_back(full);
        seq.blocks.push_back(
            ConditionalPi{ConditionalPi::Target::electron, params.electron_branch, 1.0});
        seq.blocks.push_back(ConditionalPi{ConditionalPi::Target::nucleus,
                                           params.nuclear_branch, params.swap_fidelity});
    }
    seq.blocks.push_back(Readout{ReadoutBasis::z});
    seq.validate();
    return seq;
}

} // namespace spinid
