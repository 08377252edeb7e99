#include "spinid/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "spinid/errors.hpp"
#include "spinid/units.hpp"

namespace spinid {

namespace {

using ops::electron;
using ops::id2;
using ops::kron;
using ops::nucleus;
using ops::pair_op;
using ops::probe;
using ops::sx;
using ops::sy;
using ops::sz;

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

Mat8 dipolar_hamiltonian(const SpinSystem& sys) {
    return 2.0 * probe(sz()) *
           (sys.d_zx_mhz() * electron(sx()) + sys.d_zy_mhz() * electron(sy()) +
            sys.d_zz_mhz() * electron(sz()));
}

// ---------------------------------------------------------------------------
// Defect level structure and carrier frames
// ---------------------------------------------------------------------------

struct DefectLevels {
    Eigen::Vector4d energies;  // ascending
    Mat4 vectors;              // columns are eigenstates
    Mat8 w8;                   // I2 (x) vectors
    // Electron chains: (lower[k], upper[k]) are the two allowed electron-flip
    // transitions; k sorted so chain 0 has the lower transition frequency.
    std::array<int, 2> lower{};
    std::array<int, 2> upper{};

    double electron_frequency(HyperfineBranch b) const {
        const int k = (b == HyperfineBranch::plus) ? 1 : 0;
        return energies(upper[k]) - energies(lower[k]);
    }
    // Nuclear lines: gap within the upper/lower electron manifold; branch plus
    // is the higher of the two frequencies.
    double nuclear_gap_upper() const { return std::abs(energies(upper[1]) - energies(upper[0])); }
    double nuclear_gap_lower() const { return std::abs(energies(lower[1]) - energies(lower[0])); }
};

DefectLevels analyze_defect(const Mat4& h_defect) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(h_defect);
    if (es.info() != Eigen::Success) {
        throw ConvergenceError("defect Hamiltonian eigendecomposition failed", 0.0);
    }
    DefectLevels out;
    out.energies = es.eigenvalues();
    out.vectors = es.eigenvectors();
    out.w8 = kron(MatX(id2()), MatX(out.vectors));

    // Split levels into electron manifolds by <Sz_e>.
    const Mat4 sz_e = pair_op(sz(), id2());
    std::vector<int> up, down;
    for (int k = 0; k < 4; ++k) {
        const std::complex<double> v =
            (out.vectors.col(k).adjoint() * sz_e * out.vectors.col(k))(0);
        (v.real() > 0.0 ? up : down).push_back(k);
    }
    if (up.size() != 2 || down.size() != 2) {
        // Zero-field Bell states have <Sz_e> = 0; chains are not defined there.
        out.lower = {-1, -1};
        out.upper = {-1, -1};
        return out;
    }

    // Pair each upper level with the lower level it is connected to by the
    // larger |<u|Sx_e|l>| element (the allowed transition).
    const Mat4 sx_e = pair_op(sx(), id2());
    const auto elem = [&](int a, int b) {
        return std::abs((out.vectors.col(a).adjoint() * sx_e * out.vectors.col(b))(0));
    };
    const double straight = elem(up[0], down[0]) * elem(up[1], down[1]);
    const double crossed = elem(up[0], down[1]) * elem(up[1], down[0]);
    std::array<int, 2> lo{}, hi{};
    if (straight >= crossed) {
        lo = {down[0], down[1]};
        hi = {up[0], up[1]};
    } else {
        lo = {down[1], down[0]};
        hi = {up[0], up[1]};
    }
    const double f0 = out.energies(hi[0]) - out.energies(lo[0]);
    const double f1 = out.energies(hi[1]) - out.energies(lo[1]);
    if (f0 <= f1) {
        out.lower = lo;
        out.upper = hi;
    } else {
        out.lower = {lo[1], lo[0]};
        out.upper = {hi[1], hi[0]};
    }
    return out;
}

struct CarrierFrame {
    std::array<int, 4> n{}; // harmonic number per defect level
    double f = 0.0;
};

/// Assign integer harmonics by BFS over the near-resonant transition graph:
/// levels a, b are joined when | |Ea - Eb| - f | <= W.
CarrierFrame assign_harmonics(const Eigen::Vector4d& energies, double f, double bandwidth) {
    CarrierFrame fr;
    fr.f = f;
    std::array<bool, 4> seen{};
    std::array<int, 4> n{};
    for (int start = 0; start < 4; ++start) {
        if (seen[start]) continue;
        seen[start] = true;
        n[start] = 0;
        std::deque<int> queue{start};
        while (!queue.empty()) {
            const int a = queue.front();
            queue.pop_front();
            for (int b = 0; b < 4; ++b) {
                if (b == a) continue;
                const double gap = std::abs(energies(b) - energies(a));
                if (std::abs(gap - f) > bandwidth) continue;
                const int nb = n[a] + (energies(b) > energies(a) ? 1 : -1);
                if (!seen[b]) {
                    seen[b] = true;
                    n[b] = nb;
                    queue.push_back(b);
                } else if (n[b] != nb) {
                    throw ValidationError(
                        "pulse carrier produces an ambiguous rotating frame (conflicting "
                        "harmonic assignment)");
                }
            }
        }
    }
    fr.n = n;
    return fr;
}

Mat8 drive_amplitude_operator(const Pulse& p) {
    const auto spin_ops = [&](const Mat2& ox, const Mat2& oy, const Mat2& oz,
                              auto&& lift) -> Mat8 {
        return 2.0 * (p.omega[0] * lift(ox) + p.omega[1] * lift(oy) + p.omega[2] * lift(oz));
    };
    switch (p.target) {
        case PulseTarget::defect_electron:
            return spin_ops(sx(), sy(), sz(), [](const Mat2& o) { return electron(o); });
        case PulseTarget::defect_nucleus:
            return spin_ops(sx(), sy(), sz(), [](const Mat2& o) { return nucleus(o); });
        case PulseTarget::probe_electron:
            return spin_ops(sx(), sy(), sz(), [](const Mat2& o) { return probe(o); });
    }
    throw ValidationError("unknown pulse target");
}

int defect_index(int register_index) { return register_index % 4; }

/// Rotating-frame static Hamiltonian for one driven block, in the
/// (probe (x) defect-eigenbasis) representation.
Mat8 rwa_block_hamiltonian(const Mat8& h_free, const DefectLevels& levels,
                           const CarrierFrame& fr, const Pulse& p) {
    const Mat8 h_eig = levels.w8.adjoint() * h_free * levels.w8;
    const Mat8 m_eig = levels.w8.adjoint() * drive_amplitude_operator(p) * levels.w8;

    Mat8 h = Mat8::Zero();
    const std::complex<double> e_minus(std::cos(p.phase), -std::sin(p.phase));
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            const int dn = fr.n[defect_index(a)] - fr.n[defect_index(b)];
            if (dn == 0) {
                h(a, b) += h_eig(a, b); // co-moving free parts, detunings included
                if (a == b) {
                    h(a, a) -= fr.f * static_cast<double>(fr.n[defect_index(a)]);
                }
            } else if (dn == 1) {
                h(a, b) += 0.5 * m_eig(a, b) * e_minus;
            } else if (dn == -1) {
                h(a, b) += 0.5 * m_eig(a, b) * std::conj(e_minus);
            }
        }
    }
    return h;
}

Mat8 frame_phases(const CarrierFrame& fr, double t) {
    Mat8 r = Mat8::Zero();
    for (int a = 0; a < 8; ++a) {
        const double phi = 2.0 * kPi * fr.f * fr.n[defect_index(a)] * t;
        r(a, a) = std::complex<double>(std::cos(phi), std::sin(phi));
    }
    return r;
}

/// Lab-frame unitary of a driven block starting at absolute time t0:
/// U = W (R(t1))^dag exp(-i 2 pi H' dt) R(t0) W^dag.
Mat8 pulse_unitary(const Mat8& h_free, const DefectLevels& levels, const Pulse& p,
                   double t0, double bandwidth_factor) {
    if (!(p.carrier > 0.0) || !std::isfinite(p.carrier)) {
        throw ValidationError("pulse carrier must be positive and finite");
    }
    const double span = levels.energies.maxCoeff() - levels.energies.minCoeff();
    if (p.carrier > 4.0 * std::max(span, 1.0)) {
        throw ValidationError("pulse carrier lies far outside the simulated band");
    }
    const CarrierFrame fr =
        assign_harmonics(levels.energies, p.carrier, bandwidth_factor * p.carrier);
    const Mat8 h_block = rwa_block_hamiltonian(h_free, levels, fr, p);
    const Mat8 u = expm_hermitian_propagator(h_block, p.duration);
    const Mat8 lab =
        frame_phases(fr, t0 + p.duration).adjoint() * u * frame_phases(fr, t0);
    return levels.w8 * lab * levels.w8.adjoint();
}

Mat8 probe_rotation_unitary(const ProbeRotation& r) {
    Mat2 axis = std::cos(r.axis_phase) * 2.0 * sx() + std::sin(r.axis_phase) * 2.0 * sy();
    Mat2 u2 = std::cos(0.5 * r.angle) * Mat2::Identity() -
              std::complex<double>(0, std::sin(0.5 * r.angle)) * axis;
    return kron(MatX(u2), MatX(Eigen::Matrix4cd::Identity()));
}

} // namespace

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

DensityState DensityState::initial(double eta) {
    if (eta < 0.0 || eta > 1.0) {
        throw ValidationError("probe polarization eta must lie in [0, 1]");
    }
    DensityState s;
    s.rho = (Mat8::Identity() + 2.0 * eta * probe(sz())) / 8.0;
    return s;
}

void DensityState::validate() const {
    if (std::abs(rho.trace().real() - 1.0) > 1e-12 || std::abs(rho.trace().imag()) > 1e-12) {
        throw ValidationError("density matrix trace must be 1");
    }
    if (hermiticity_defect(rho) > 1e-12) {
        throw ValidationError("density matrix must be Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Mat8> es(rho);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        throw ValidationError("density matrix has a negative eigenvalue");
    }
}

double DensityState::expectation(const Mat8& op) const {
    return (op * rho).trace().real();
}

void DecoherenceParams::validate() const {
    for (double t : {t1e, t2_star_bath, t2_bath}) {
        if (!(t > 0.0)) {
            throw ValidationError("decoherence times must be positive (or infinite)");
        }
    }
}

double DecoherenceParams::total_rate(DecayKind kind) const {
    validate();
    const double spam_rtn = std::isfinite(t1e) ? 1.5 / t1e : 0.0;
    switch (kind) {
        case DecayKind::none: return 0.0;
        case DecayKind::ramsey:
            return (std::isfinite(t2_star_bath) ? 1.0 / t2_star_bath : 0.0) + spam_rtn;
        case DecayKind::echo:
            return (std::isfinite(t2_bath) ? 1.0 / t2_bath : 0.0) + spam_rtn;
    }
    return 0.0;
}

Mat4 defect_hamiltonian(const SpinSystem& sys, double b0_gauss) {
    sys.validate();
    if (b0_gauss < 0.0) {
        throw ValidationError("b0 must be non-negative");
    }
    if (b0_gauss == 0.0) {
        const HyperfineTensor& h = sys.hyperfine;
        return h.a_xx * pair_op(sx(), sx()) + h.a_yy * pair_op(sy(), sy()) +
               h.a_par * pair_op(sz(), sz());
    }
    const SecularComponents sec = secular_components(sys);
    const double zn = nuclear_zeeman_mhz(sys.gamma_n, b0_gauss);
    return sys.gamma_e * b0_gauss * pair_op(sz(), id2()) +
           sec.a_zx * pair_op(sz(), sx()) + sec.a_zy * pair_op(sz(), sy()) +
           sec.a_zz * pair_op(sz(), sz()) + zn * pair_op(id2(), sz());
}

Mat8 build_hamiltonian(const SpinSystem& sys, double b0_gauss, Frame frame,
                       std::optional<double> carrier_mhz) {
    const Mat8 h_lab = ops::lift_defect(defect_hamiltonian(sys, b0_gauss)) +
                       dipolar_hamiltonian(sys);
    switch (frame) {
        case Frame::lab:
            if (carrier_mhz) {
                throw ValidationError("lab frame takes no carrier");
            }
            return h_lab;
        case Frame::bell: {
            if (carrier_mhz) {
                throw ValidationError("bell frame takes no carrier");
            }
            if (b0_gauss != 0.0) {
                throw ValidationError("bell frame is defined at zero field only");
            }
            const Mat8 ub = ops::lift_defect(ops::bell_transform());
            return ub.adjoint() * h_lab * ub;
        }
        case Frame::rotating: {
            if (!carrier_mhz) {
                throw ValidationError("rotating frame requires a carrier");
            }
            const DefectLevels levels = analyze_defect(defect_hamiltonian(sys, b0_gauss));
            const CarrierFrame fr =
                assign_harmonics(levels.energies, *carrier_mhz, 0.5 * *carrier_mhz);
            Mat8 n8 = Mat8::Zero();
            for (int a = 0; a < 8; ++a) {
                n8(a, a) = static_cast<double>(fr.n[defect_index(a)]);
            }
            return h_lab - *carrier_mhz * (levels.w8 * n8 * levels.w8.adjoint());
        }
    }
    throw ValidationError("unknown frame");
}

DensityState evolve(const DensityState& state, const MatX& h, double t_us) {
    const MatX u = expm_hermitian_propagator(h, t_us);
    DensityState out = state;
    out.rho = u * state.rho * u.adjoint();
    return out;
}

namespace {

Mat8 hhcp_gate(const DefectLevels& levels, HhcpBlock::Mode mode, HyperfineBranch branch) {
    if (levels.lower[0] < 0) {
        throw ValidationError("hhcp: electron manifolds are undefined at zero field");
    }
    Mat8 g = Mat8::Identity();
    const auto engage = [&](int chain) {
        const int a = 0 * 4 + levels.lower[chain]; // |0_probe, l>
        const int b = 1 * 4 + levels.upper[chain]; // |1_probe, u>
        g(a, a) = 0.0;
        g(b, b) = 0.0;
        g(a, b) = std::complex<double>(0, 1);
        g(b, a) = std::complex<double>(0, 1);
    };
    if (mode == HhcpBlock::Mode::both) {
        engage(0);
        engage(1);
    } else {
        engage(branch == HyperfineBranch::plus ? 1 : 0);
    }
    return levels.w8 * g * levels.w8.adjoint();
}

Mat8 conditional_pi_gate(const DefectLevels& levels, ConditionalPi::Target target,
                         HyperfineBranch branch) {
    if (levels.lower[0] < 0) {
        throw ValidationError("conditional-pi: electron manifolds are undefined at zero field");
    }
    int a4 = 0;
    int b4 = 0;
    if (target == ConditionalPi::Target::electron) {
        const int chain = branch == HyperfineBranch::plus ? 1 : 0;
        a4 = levels.lower[chain];
        b4 = levels.upper[chain];
    } else {
        const bool upper_is_plus = levels.nuclear_gap_upper() >= levels.nuclear_gap_lower();
        const bool use_upper = (branch == HyperfineBranch::plus) == upper_is_plus;
        a4 = use_upper ? levels.upper[0] : levels.lower[0];
        b4 = use_upper ? levels.upper[1] : levels.lower[1];
    }
    Mat8 g = Mat8::Identity();
    for (int nv = 0; nv < 2; ++nv) {
        const int a = nv * 4 + a4;
        const int b = nv * 4 + b4;
        g(a, a) = 0.0;
        g(b, b) = 0.0;
        g(a, b) = std::complex<double>(0, -1);
        g(b, a) = std::complex<double>(0, -1);
    }
    return levels.w8 * g * levels.w8.adjoint();
}

void apply_gate_with_fidelity(DensityState& state, const Mat8& gate, double fidelity) {
    if (fidelity < 0.0 || fidelity > 1.0) {
        throw ValidationError("gate fidelity must lie in [0, 1]");
    }
    const Mat8 transformed = gate * state.rho * gate.adjoint();
    state.rho = fidelity * transformed + (1.0 - fidelity) * state.rho;
}

/// Transfer-failure model for polarization exchange: the failed fraction
/// loses the electron polarizations entirely (the nuclear marginal is kept),
/// so a round trip recovers contrast F^2.
void apply_hhcp_with_fidelity(DensityState& state, const Mat8& gate, double fidelity) {
    if (fidelity < 0.0 || fidelity > 1.0) {
        throw ValidationError("gate fidelity must lie in [0, 1]");
    }
    const Mat8 transformed = gate * state.rho * gate.adjoint();
    if (fidelity == 1.0) {
        state.rho = transformed;
        return;
    }
    Mat2 rho_n = Mat2::Zero();
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            std::complex<double> acc(0.0, 0.0);
            for (int nv = 0; nv < 2; ++nv) {
                for (int e = 0; e < 2; ++e) {
                    acc += state.rho(nv * 4 + e * 2 + a, nv * 4 + e * 2 + b);
                }
            }
            rho_n(a, b) = acc;
        }
    }
    const Mat8 erased =
        kron(MatX(0.25 * Eigen::Matrix4cd::Identity()), MatX(rho_n));
    state.rho = fidelity * transformed + (1.0 - fidelity) * erased;
}

} // namespace

DensityState hhcp_iswap(const DensityState& state, const SpinSystem& sys, double b0_gauss,
                        const HhcpParams& params) {
    const double scale = std::max(std::abs(params.omega_probe), std::abs(params.omega_defect));
    if (scale <= 0.0 ||
        std::abs(params.omega_probe - params.omega_defect) > params.match_tol * scale) {
        throw ValidationError("hhcp: drive amplitudes violate the Hartmann-Hahn matching "
                              "condition");
    }
    const DefectLevels levels = analyze_defect(defect_hamiltonian(sys, b0_gauss));
    DensityState out = state;
    apply_hhcp_with_fidelity(out, hhcp_gate(levels, params.mode, params.branch),
                             params.fidelity);
    return out;
}

SignalTrace apply_relaxation_decay(const SignalTrace& trace, const DecoherenceParams& dec,
                                   DecayKind kind) {
    trace.validate();
    if (trace.x_kind != XKind::time) {
        throw ValidationError("apply_relaxation_decay: time-domain trace required");
    }
    for (double t : trace.x) {
        if (t < 0.0) {
            throw ValidationError("apply_relaxation_decay: negative time");
        }
    }
    const double rate = dec.total_rate(kind);
    SignalTrace out = trace;
    for (size_t i = 0; i < out.size(); ++i) {
        out.y[i] *= std::exp(-out.x[i] * rate);
    }
    return out;
}

namespace {

std::vector<Block> materialize(const PulseSequence& seq, double x) {
    std::vector<Block> out;
    out.reserve(seq.blocks.size());
    for (const Block& b : seq.blocks) {
        if (const auto* p = std::get_if<Pulse>(&b)) {
            Pulse q = *p;
            switch (p->binding) {
                case SweepBinding::none: break;
                case SweepBinding::carrier: q.carrier = x; break;
                case SweepBinding::duration: q.duration = x; break;
                case SweepBinding::phase_mod: q.phase = 2.0 * kPi * seq.f_mod * x; break;
            }
            q.binding = SweepBinding::none;
            out.push_back(q);
        } else if (const auto* d = std::get_if<Delay>(&b)) {
            Delay e = *d;
            if (d->swept) {
                e.duration = d->scale * x;
                e.swept = false;
            }
            out.push_back(e);
        } else {
            out.push_back(b);
        }
    }
    return out;
}

struct SequenceContext {
    Mat8 h_free;
    DefectLevels levels;
    SpinSystem sys;
    double b0 = 0.0;
    double bandwidth_factor = 0.5;
    Mat8 sx_probe;
    Mat8 sz_probe;
};

void dephase_in_eigenbasis(DensityState& state, const DefectLevels& levels) {
    Mat8 r = levels.w8.adjoint() * state.rho * levels.w8;
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            if (a != b) r(a, b) = 0.0;
        }
    }
    state.rho = levels.w8 * r * levels.w8.adjoint();
}

double run_single(const SequenceContext& ctx, const std::vector<Block>& blocks, double eta,
                  bool dephase_delays, double* coherent_time) {
    DensityState state = DensityState::initial(eta);
    double t = 0.0;
    double coh = 0.0;
    double signal = 0.0;
    for (const Block& b : blocks) {
        if (const auto* d = std::get_if<Delay>(&b)) {
            if (d->duration > 0.0) {
                const Mat8 u = expm_hermitian_propagator(ctx.h_free, d->duration);
                state.rho = u * state.rho * u.adjoint();
                t += d->duration;
                coh += d->duration;
            }
            if (dephase_delays) {
                dephase_in_eigenbasis(state, ctx.levels);
            }
        } else if (const auto* p = std::get_if<Pulse>(&b)) {
            if (p->target == PulseTarget::probe_electron) {
                // Probe drive in its own resonant frame: static rotation.
                const Mat8 h = 0.5 * drive_amplitude_operator(*p); // RWA half amplitude
                const Mat8 u = expm_hermitian_propagator(h, p->duration);
                state.rho = u * state.rho * u.adjoint();
            } else if (p->duration > 0.0) {
                Mat8 u;
                if (p->hard) {
                    // Broadband idealization: the co-rotating drive generator
                    // alone, internal Hamiltonian dropped for the pulse.
                    u = expm_hermitian_propagator(0.5 * drive_amplitude_operator(*p),
                                                  p->duration);
                } else {
                    u = pulse_unitary(ctx.h_free, ctx.levels, *p, t, ctx.bandwidth_factor);
                }
                state.rho = u * state.rho * u.adjoint();
            }
            t += p->duration;
        } else if (const auto* r = std::get_if<ProbeRotation>(&b)) {
            const Mat8 u = probe_rotation_unitary(*r);
            state.rho = u * state.rho * u.adjoint();
        } else if (const auto* h = std::get_if<HhcpBlock>(&b)) {
            HhcpParams params;
            params.mode = h->mode;
            params.branch = h->branch;
            params.fidelity = h->fidelity;
            params.omega_probe = h->omega_probe;
            params.omega_defect = h->omega_defect;
            const double scale =
                std::max(std::abs(params.omega_probe), std::abs(params.omega_defect));
            if (scale <= 0.0 || std::abs(params.omega_probe - params.omega_defect) >
                                    params.match_tol * scale) {
                throw ValidationError("hhcp: drive amplitudes violate the Hartmann-Hahn "
                                      "matching condition");
            }
            apply_hhcp_with_fidelity(
                state, hhcp_gate(ctx.levels, params.mode, params.branch), params.fidelity);
        } else if (const auto* c = std::get_if<ConditionalPi>(&b)) {
            apply_gate_with_fidelity(
                state, conditional_pi_gate(ctx.levels, c->target, c->branch), c->fidelity);
        } else if (const auto* m = std::get_if<Readout>(&b)) {
            // Propagation invariants at the measurement point.
            if (std::abs(state.rho.trace().real() - 1.0) > 1e-10 ||
                hermiticity_defect(state.rho) > 1e-10) {
                throw ConvergenceError("propagation broke the density-matrix invariants",
                                       std::abs(state.rho.trace().real() - 1.0));
            }
            if (m->basis == ReadoutBasis::x) {
                // Echo readout convention: S = (1/2)(1/2 + <Sx_probe>).
                signal = 0.5 * (0.5 + state.expectation(ctx.sx_probe));
            } else {
                signal = 0.5 + state.expectation(ctx.sz_probe);
            }
        }
    }
    if (coherent_time) *coherent_time = coh;
    return signal;
}

std::vector<Block> with_reset_pulse(const std::vector<Block>& blocks) {
    std::vector<Block> out;
    out.reserve(blocks.size() + 1);
    bool inserted = false;
    for (const Block& b : blocks) {
        out.push_back(b);
        if (!inserted && std::holds_alternative<HhcpBlock>(b)) {
            out.push_back(ProbeRotation{kPi, 0.0});
            inserted = true;
        }
    }
    return out;
}

} // namespace

SignalTrace run_sequence(const PulseSequence& seq, const SpinSystem& sys, double b0_gauss,
                         const DecoherenceParams& dec, const RunOptions& opts) {
    seq.validate();
    dec.validate();

    SequenceContext ctx;
    ctx.sys = sys;
    ctx.b0 = b0_gauss;
    ctx.bandwidth_factor = opts.bandwidth_factor;
    const Mat4 h_defect = defect_hamiltonian(sys, b0_gauss);
    ctx.h_free = ops::lift_defect(h_defect) + dipolar_hamiltonian(sys);
    ctx.levels = analyze_defect(h_defect);
    ctx.sx_probe = probe(sx());
    ctx.sz_probe = probe(sz());

    const double rate = opts.apply_decoherence ? dec.total_rate(seq.decay_kind) : 0.0;

    SignalTrace out;
    out.x_kind = seq.sweep.variable == SweepVariable::frequency ? XKind::frequency : XKind::time;
    out.x = seq.sweep.grid;
    out.y.resize(out.x.size());
    out.sigma.assign(out.x.size(), 0.0);

    for (size_t i = 0; i < out.x.size(); ++i) {
        const std::vector<Block> blocks = materialize(seq, out.x[i]);
        double coh = 0.0;
        double s = run_single(ctx, blocks, opts.eta, false, &coh);
        if (seq.reset_toggle) {
            const double s_toggled =
                run_single(ctx, with_reset_pulse(blocks), opts.eta, false, nullptr);
            s = 0.5 * (s + s_toggled);
        }
        if (rate > 0.0 && coh > 0.0) {
            double s_deph = run_single(ctx, blocks, opts.eta, true, nullptr);
            if (seq.reset_toggle) {
                const double s2 =
                    run_single(ctx, with_reset_pulse(blocks), opts.eta, true, nullptr);
                s_deph = 0.5 * (s_deph + s2);
            }
            s = s_deph + (s - s_deph) * std::exp(-coh * rate);
        }
        out.y[i] = s;
    }
    return out;
}

InitResult run_nuclear_init(const SpinSystem& sys, double b0_gauss,
                            const NuclearInitOptions& opts, int repetitions) {
    if (repetitions < 1) {
        throw ValidationError("run_nuclear_init: repetitions must be >= 1");
    }
    const DefectLevels levels = analyze_defect(defect_hamiltonian(sys, b0_gauss));
    if (levels.lower[0] < 0) {
        throw ValidationError("run_nuclear_init: requires a finite field");
    }

    DensityState state = DensityState::initial(opts.eta);
    const Mat8 hhcp = hhcp_gate(levels, HhcpBlock::Mode::both, HyperfineBranch::plus);
    const Mat8 e_pi = conditional_pi_gate(levels, ConditionalPi::Target::electron,
                                          opts.gates.electron_branch);
    const Mat8 n_pi = conditional_pi_gate(levels, ConditionalPi::Target::nucleus,
                                          opts.gates.nuclear_branch);

    for (int rep = 0; rep < repetitions; ++rep) {
        if (rep > 0) {
            // Fresh optical repolarization of the probe; defect state kept.
            Mat8 reduced = Mat8::Zero();
            Eigen::Matrix4cd defect = Eigen::Matrix4cd::Zero();
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    defect(a, b) = state.rho(a, b) + state.rho(4 + a, 4 + b);
                }
            }
            Mat2 probe_pol = 0.5 * Mat2::Identity() + opts.eta * sz();
            reduced = kron(MatX(probe_pol), MatX(defect));
            state.rho = reduced;
        }
        apply_hhcp_with_fidelity(state, hhcp, opts.gates.hhcp_fidelity);
        apply_gate_with_fidelity(state, e_pi, 1.0);
        apply_gate_with_fidelity(state, n_pi, opts.gates.swap_fidelity);
    }

    // Nuclear polarization from chain populations.
    const Mat8 r = levels.w8.adjoint() * state.rho * levels.w8;
    double p_chain0 = 0.0;
    double p_chain1 = 0.0;
    for (int nv = 0; nv < 2; ++nv) {
        p_chain0 += r(nv * 4 + levels.lower[0], nv * 4 + levels.lower[0]).real() +
                    r(nv * 4 + levels.upper[0], nv * 4 + levels.upper[0]).real();
        p_chain1 += r(nv * 4 + levels.lower[1], nv * 4 + levels.lower[1]).real() +
                    r(nv * 4 + levels.upper[1], nv * 4 + levels.upper[1]).real();
    }
    InitResult out;
    out.p_n = std::abs(p_chain0 - p_chain1);
    out.state = state;
    return out;
}

double transition_pi_time(const SpinSystem& sys, double b0_gauss, double carrier_mhz,
                          PulseTarget target, double omega_mhz) {
    if (!(omega_mhz > 0.0)) {
        throw ValidationError("transition_pi_time: omega must be positive");
    }
    const DefectLevels levels = analyze_defect(defect_hamiltonian(sys, b0_gauss));
    Pulse p;
    p.target = target;
    p.omega = {omega_mhz, 0.0, 0.0};
    p.carrier = carrier_mhz;
    const CarrierFrame fr = assign_harmonics(levels.energies, carrier_mhz, 0.5 * carrier_mhz);
    const Mat8 m_eig = levels.w8.adjoint() * drive_amplitude_operator(p) * levels.w8;
    double h_max = 0.0;
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            const int ka = defect_index(a);
            const int kb = defect_index(b);
            if (std::abs(fr.n[ka] - fr.n[kb]) != 1) continue;
            const double detuning = std::abs(std::abs(levels.energies(ka) - levels.energies(kb)) -
                                             carrier_mhz);
            if (detuning > 1e-6) continue;
            h_max = std::max(h_max, 0.5 * std::abs(m_eig(a, b)));
        }
    }
    if (h_max <= 0.0) {
        throw ValidationError("transition_pi_time: carrier is not resonant with any allowed "
                              "transition");
    }
    return 1.0 / (4.0 * h_max);
}

double transition_frequency(const SpinSystem& sys, double b0_gauss,
                            ConditionalPi::Target target, HyperfineBranch branch) {
    const DefectLevels levels = analyze_defect(defect_hamiltonian(sys, b0_gauss));
    if (levels.lower[0] < 0) {
        throw ValidationError("transition_frequency: electron manifolds are undefined at zero "
                              "field");
    }
    if (target == ConditionalPi::Target::electron) {
        return levels.electron_frequency(branch);
    }
    const double up = levels.nuclear_gap_upper();
    const double lo = levels.nuclear_gap_lower();
    return branch == HyperfineBranch::plus ? std::max(up, lo) : std::min(up, lo);
}

} // namespace spinid
