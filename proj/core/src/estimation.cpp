#include "spinid/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spinid/errors.hpp"

namespace spinid {

namespace {

constexpr double kCompanionBand = 0.065; // near-degenerate gyromagnetic ratios (1H vs 19F)

struct ForwardModel {
    double splitting = 0.0;     // A(theta, phi), MHz
    double omega_minus = 0.0;   // MHz
    double omega_plus = 0.0;
};

ForwardModel forward_at(double a_par, double a_perp, double gamma_n, double b0, double theta,
                        double phi, double probe_theta, double probe_phi) {
    const SecularComponents sec =
        secular_components_closed_form(a_par, a_perp, theta, phi, probe_theta, probe_phi);
    ForwardModel out;
    out.splitting = sec.splitting();
    const double zn = nuclear_zeeman_mhz(gamma_n, b0);
    const double shift = out.splitting > 0.0 ? std::abs(sec.a_zz / out.splitting * zn) : 0.0;
    out.omega_minus = 0.5 * out.splitting - shift;
    out.omega_plus = 0.5 * out.splitting + shift;
    return out;
}

double residual_eps(const MeasurementSet& meas, const ForwardModel& model, bool weighted) {
    const double da = weighted && meas.splitting.sigma > 0.0 ? meas.splitting.sigma
                                                             : meas.splitting.value;
    const double dm = weighted && meas.omega_n_minus.sigma > 0.0 ? meas.omega_n_minus.sigma
                                                                 : meas.omega_n_minus.value;
    const double dp = weighted && meas.omega_n_plus.sigma > 0.0 ? meas.omega_n_plus.sigma
                                                                : meas.omega_n_plus.value;
    const double r1 = (meas.splitting.value - model.splitting) / da;
    const double r2 = (meas.omega_n_minus.value - model.omega_minus) / dm;
    const double r3 = (meas.omega_n_plus.value - model.omega_plus) / dp;
    return std::sqrt(r1 * r1 + r2 * r2 + r3 * r3);
}

} // namespace

void MeasurementSet::validate() const {
    if (!(splitting.value > 0.0)) {
        throw ValidationError("measurement set: splitting A must be positive");
    }
    if (!(omega_n_minus.value > 0.0) || !(omega_n_plus.value > 0.0)) {
        throw ValidationError("measurement set: nuclear frequencies must be positive");
    }
    if (b0 < 0.0) {
        throw ValidationError("measurement set: b0 must be non-negative");
    }
}

HyperfineEstimate extract_hyperfine_from_zf(const MeasurementSet::ZfObservation& omega_plus,
                                            const MeasurementSet::ZfObservation& omega_minus,
                                            double b_e_gauss, double gamma_e) {
    if (omega_plus.frequency < omega_minus.frequency) {
        throw ValidationError("extract_hyperfine_from_zf: negative A_perp; the line pair is "
                              "mis-grouped (omega_plus must not be below omega_minus)");
    }
    HyperfineEstimate out;
    out.a_par = omega_plus.frequency + omega_minus.frequency;
    out.a_perp = omega_plus.frequency - omega_minus.frequency;
    const double sp = geomagnetic_uncertainty(b_e_gauss, gamma_e, omega_plus.sigma_f);
    const double sm = geomagnetic_uncertainty(b_e_gauss, gamma_e, omega_minus.sigma_f);
    out.sigma_a_par = std::hypot(sp, sm);
    out.sigma_a_perp = out.sigma_a_par;
    return out;
}

LineGrouping group_lines_by_coupling(const std::vector<MeasurementSet::ZfObservation>& lines) {
    LineGrouping out;
    std::vector<bool> used(lines.size(), false);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (used[i]) continue;
        std::vector<size_t> candidates;
        for (size_t j = i + 1; j < lines.size(); ++j) {
            if (used[j]) continue;
            const double tol =
                2.0 * std::hypot(lines[i].sigma_d, lines[j].sigma_d);
            if (std::abs(lines[i].d_zz - lines[j].d_zz) <= tol) {
                candidates.push_back(j);
            }
        }
        if (candidates.size() > 1) {
            std::ostringstream msg;
            msg << "ambiguous coupling-strength match between lines at " << lines[i].frequency;
            for (size_t j : candidates) {
                msg << ", " << lines[j].frequency;
            }
            msg << " MHz";
            throw ValidationError(msg.str());
        }
        if (candidates.empty()) {
            out.unpaired.push_back(lines[i]);
            used[i] = true;
            continue;
        }
        const size_t j = candidates.front();
        used[i] = true;
        used[j] = true;
        LinePair pair;
        if (lines[i].frequency <= lines[j].frequency) {
            pair.low = lines[i];
            pair.high = lines[j];
        } else {
            pair.low = lines[j];
            pair.high = lines[i];
        }
        out.pairs.push_back(pair);
    }
    return out;
}

double residual_at(const MeasurementSet& meas, double a_par, double a_perp, double gamma_n,
                   double theta_deg, double phi_deg, const ResidualMapOptions& opts) {
    return residual_eps(meas,
                        forward_at(a_par, a_perp, gamma_n, meas.b0, theta_deg, phi_deg,
                                   opts.probe_theta, opts.probe_phi),
                        opts.weighted);
}

ResidualMapResult residual_map(const MeasurementSet& meas, double a_par, double a_perp,
                               double gamma_n, const ResidualMapOptions& opts) {
    meas.validate();
    if (!(opts.grid_deg > 0.0)) {
        throw ValidationError("residual_map: grid resolution must be positive");
    }

    const auto eps_at = [&](double theta, double phi) {
        return residual_eps(meas,
                            forward_at(a_par, a_perp, gamma_n, meas.b0, theta, phi,
                                       opts.probe_theta, opts.probe_phi),
                            opts.weighted);
    };

    ResidualMapResult out;
    const int n_theta = static_cast<int>(std::lround(180.0 / opts.grid_deg)) + 1;
    const int n_phi = static_cast<int>(std::lround(360.0 / opts.grid_deg));
    out.theta.resize(n_theta);
    out.phi.resize(n_phi);
    for (int i = 0; i < n_theta; ++i) out.theta[i] = i * opts.grid_deg;
    for (int j = 0; j < n_phi; ++j) out.phi[j] = -180.0 + (j + 1) * opts.grid_deg;

    out.eps.assign(n_theta, std::vector<double>(n_phi, 0.0));
    double best = std::numeric_limits<double>::infinity();
    int bi = 0;
    int bj = 0;
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            const double e = eps_at(out.theta[i], out.phi[j]);
            out.eps[i][j] = e;
            if (e < best || (e == best && (out.theta[i] < out.theta[bi] ||
                                           (out.theta[i] == out.theta[bi] &&
                                            out.phi[j] < out.phi[bj])))) {
                best = e;
                bi = i;
                bj = j;
            }
        }
    }

    out.theta_min = out.theta[bi];
    out.phi_min = out.phi[bj];
    out.eps_min = best;

    if (opts.refine) {
        // Coordinate-wise golden-section descent within one grid cell.
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double th = out.theta_min;
        double ph = out.phi_min;
        for (int round = 0; round < 3; ++round) {
            for (int axis = 0; axis < 2; ++axis) {
                double lo = (axis == 0 ? th : ph) - opts.grid_deg;
                double hi = (axis == 0 ? th : ph) + opts.grid_deg;
                const auto eval = [&](double v) {
                    return axis == 0 ? eps_at(v, ph) : eps_at(th, v);
                };
                double c = hi - gr * (hi - lo);
                double d = lo + gr * (hi - lo);
                double fc = eval(c);
                double fd = eval(d);
                for (int it = 0; it < 40; ++it) {
                    if (fc < fd) {
                        hi = d;
                        d = c;
                        fd = fc;
                        c = hi - gr * (hi - lo);
                        fc = eval(c);
                    } else {
                        lo = c;
                        c = d;
                        fc = fd;
                        d = lo + gr * (hi - lo);
                        fd = eval(d);
                    }
                }
                const double v = 0.5 * (lo + hi);
                (axis == 0 ? th : ph) = v;
            }
        }
        const double refined = eps_at(th, ph);
        if (refined < out.eps_min) {
            out.eps_min = refined;
            out.theta_min = th;
            out.phi_min = ph;
        }
    }

    const double window = out.eps_min * (1.0 + opts.argmin_rel_tol) + 1e-12;
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            if (out.eps[i][j] <= window) {
                out.argmin_set.push_back({out.theta[i], out.phi[j]});
            }
        }
    }
    out.absolute_residual = out.eps_min * meas.splitting.value / std::sqrt(3.0);
    return out;
}

std::vector<SpeciesMatch> identify_species(double delta_omega_n_mhz, double b0_gauss,
                                           const std::vector<Isotope>& table) {
    if (table.empty()) {
        throw ValidationError("identify_species: empty isotope table");
    }
    if (!(b0_gauss > 0.0)) {
        throw ValidationError("identify_species: b0 must be positive");
    }
    if (delta_omega_n_mhz == 0.0) {
        return {}; // zero-gamma sentinel: nothing to match
    }
    const double gamma_est = std::abs(delta_omega_n_mhz) / (2.0 * b0_gauss * kGaussToTesla);
    std::vector<SpeciesMatch> out;
    for (const Isotope& iso : table) {
        SpeciesMatch m;
        m.isotope = iso;
        m.gamma_estimate = gamma_est;
        m.relative_deviation = std::abs(std::abs(iso.gamma) - gamma_est) / std::abs(iso.gamma);
        out.push_back(m);
    }
    std::sort(out.begin(), out.end(), [](const SpeciesMatch& a, const SpeciesMatch& b) {
        if (a.relative_deviation != b.relative_deviation) {
            return a.relative_deviation < b.relative_deviation;
        }
        return a.isotope.name < b.isotope.name;
    });
    for (size_t i = 1; i < out.size(); ++i) {
        out[i].within_companion_band =
            out[i].relative_deviation - out[0].relative_deviation <= kCompanionBand;
    }
    return out;
}

std::vector<DefectMatch> match_defect(const HyperfineEstimate& h_exp,
                                      const std::vector<DefectRecord>& db) {
    if (db.empty()) {
        throw ValidationError("match_defect: empty defect database");
    }
    std::vector<DefectMatch> out;
    for (const DefectRecord& rec : db) {
        const double aperp_c = 0.5 * (rec.a[0] + rec.a[1]);
        const double apar_c = rec.a[2];
        DefectMatch m;
        m.record = rec;
        m.d_a = std::hypot(aperp_c - h_exp.a_perp, apar_c - h_exp.a_par);
        const double band_perp = 0.2 * std::abs(aperp_c);
        const double band_par = 0.2 * std::abs(apar_c);
        m.outside_dft_band = std::abs(aperp_c - h_exp.a_perp) > band_perp ||
                             std::abs(apar_c - h_exp.a_par) > band_par;
        out.push_back(m);
    }
    std::sort(out.begin(), out.end(), [](const DefectMatch& a, const DefectMatch& b) {
        if (a.d_a != b.d_a) return a.d_a < b.d_a;
        return a.record.label < b.record.label;
    });
    return out;
}

ValueWithSigma polarization_from_peaks(const ValueWithSigma& a_down,
                                       const ValueWithSigma& gamma_down,
                                       const ValueWithSigma& a_up,
                                       const ValueWithSigma& gamma_up) {
    if (a_down.value < 0.0 || a_up.value < 0.0) {
        throw ValidationError("polarization_from_peaks: peak amplitudes must be non-negative");
    }
    const double area_down = a_down.value * gamma_down.value;
    const double area_up = a_up.value * gamma_up.value;
    const double total = area_down + area_up;
    if (!(total > 0.0)) {
        throw ValidationError("polarization_from_peaks: non-positive total area");
    }
    ValueWithSigma out;
    out.value = (area_down - area_up) / total;

    const double s_down = std::hypot(gamma_down.value * a_down.sigma,
                                     a_down.value * gamma_down.sigma);
    const double s_up = std::hypot(gamma_up.value * a_up.sigma, a_up.value * gamma_up.sigma);
    const double dd = 2.0 * area_up / (total * total);
    const double du = 2.0 * area_down / (total * total);
    out.sigma = std::hypot(dd * s_down, du * s_up);
    return out;
}

ValueWithSigma polarization_from_peaks(const FitResult& fit) {
    if (!fit.has("a2") || !fit.has("f2")) {
        throw ValidationError("polarization_from_peaks: a two-peak fit is required");
    }
    return polarization_from_peaks({fit.value("a1"), fit.uncertainty("a1")},
                                   {fit.value("gamma"), fit.uncertainty("gamma")},
                                   {fit.value("a2"), fit.uncertainty("a2")},
                                   {fit.value("gamma"), fit.uncertainty("gamma")});
}

AzzRatioMap azz_ratio_map(double a_par, double a_perp, double grid_deg, double probe_theta,
                          double probe_phi) {
    if (!(grid_deg > 0.0)) {
        throw ValidationError("azz_ratio_map: grid resolution must be positive");
    }
    AzzRatioMap out;
    const int n_theta = static_cast<int>(std::lround(180.0 / grid_deg)) + 1;
    const int n_phi = static_cast<int>(std::lround(360.0 / grid_deg));
    out.theta.resize(n_theta);
    out.phi.resize(n_phi);
    for (int i = 0; i < n_theta; ++i) out.theta[i] = i * grid_deg;
    for (int j = 0; j < n_phi; ++j) out.phi[j] = -180.0 + (j + 1) * grid_deg;
    out.ratio.assign(n_theta, std::vector<double>(n_phi, 0.0));
    out.min = std::numeric_limits<double>::infinity();
    out.max = 0.0;
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_phi; ++j) {
            const SecularComponents sec = secular_components_closed_form(
                a_par, a_perp, out.theta[i], out.phi[j], probe_theta, probe_phi);
            const double a = sec.splitting();
            const double r = a > 0.0 ? std::abs(sec.a_zz) / a : 1.0;
            out.ratio[i][j] = r;
            out.min = std::min(out.min, r);
            out.max = std::max(out.max, r);
        }
    }
    return out;
}

} // namespace spinid
