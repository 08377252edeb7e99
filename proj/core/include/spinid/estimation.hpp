#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spinid/defect_db.hpp"
#include "spinid/fit.hpp"
#include "spinid/spin_model.hpp"

// The inverse problem: from fitted line positions to hyperfine components,
// orientation-consistency residual maps, nuclear-species assignment,
// defect-database matching, and polarization estimates.

namespace spinid {

struct ValueWithSigma {
    double value = 0.0;
    double sigma = 0.0;
};

/// Measured inputs for the consistency analysis.
struct MeasurementSet {
    ValueWithSigma splitting;      // A^m, MHz (field-frame hyperfine splitting)
    ValueWithSigma omega_n_minus;  // MHz
    ValueWithSigma omega_n_plus;   // MHz
    double b0 = 0.0;               // G
    // Zero-field lines paired with their probe coupling strengths.
    struct ZfObservation {
        double frequency = 0.0; // MHz
        double d_zz = 0.0;      // kHz
        double sigma_f = 0.0;   // MHz
        double sigma_d = 0.0;   // kHz
    };
    std::vector<ZfObservation> zf_lines;

    void validate() const;
};

struct HyperfineEstimate {
    double a_par = 0.0;       // MHz
    double a_perp = 0.0;      // MHz
    double sigma_a_par = 0.0; // MHz
    double sigma_a_perp = 0.0;

    HyperfineTensor tensor() const {
        return HyperfineTensor::uniaxial_tensor(a_par, a_perp);
    }
};

/// A_par = w+ + w-, A_perp = w+ - w- from one zero-field line pair, with
/// uncertainties combining the line errors and the geomagnetic bound in
/// quadrature. Throws when the pair is mis-ordered (negative A_perp).
HyperfineEstimate extract_hyperfine_from_zf(const MeasurementSet::ZfObservation& omega_plus,
                                            const MeasurementSet::ZfObservation& omega_minus,
                                            double b_e_gauss = 0.5,
                                            double gamma_e = kGammaE);

struct LinePair {
    MeasurementSet::ZfObservation low;  // omega_-
    MeasurementSet::ZfObservation high; // omega_+
};

struct LineGrouping {
    std::vector<LinePair> pairs;
    std::vector<MeasurementSet::ZfObservation> unpaired;
};

/// Greedy pairing of lines whose coupling strengths agree within a combined
/// 2-sigma window. Three or more mutually consistent lines raise an
/// ambiguity error naming them all.
LineGrouping group_lines_by_coupling(const std::vector<MeasurementSet::ZfObservation>& lines);

struct ResidualMapOptions {
    double grid_deg = 1.0;       // theta/phi grid resolution
    bool weighted = false;       // weight residual terms by measurement sigmas
                                 // (non-standard variant; the reference form is unweighted)
    double probe_theta = kProbeTheta111;
    double probe_phi = kProbePhi111;
    bool refine = true;          // local golden-section refinement of the minimum
    double argmin_rel_tol = 1e-3; // membership window for the argmin set
};

struct ResidualMapResult {
    std::vector<double> theta;             // grid axes, degrees
    std::vector<double> phi;
    std::vector<std::vector<double>> eps;  // eps[i_theta][i_phi]
    double eps_min = 0.0;
    double theta_min = 0.0; // refined argmin, degrees
    double phi_min = 0.0;
    double absolute_residual = 0.0; // eps_min * A^m / sqrt(3), MHz
    std::vector<std::array<double, 2>> argmin_set; // grid points near the minimum
};

/// Total relative error
///   eps(theta, phi) = sqrt( ((A^m - A)/A^m)^2 + ((w-^m - w-)/w-^m)^2
///                           + ((w+^m - w+)/w+^m)^2 )
/// of the forward model built from (a_par, a_perp) over defect orientations.
ResidualMapResult residual_map(const MeasurementSet& meas, double a_par, double a_perp,
                               double gamma_n, const ResidualMapOptions& opts = {});

/// Single-point evaluation of the same residual.
double residual_at(const MeasurementSet& meas, double a_par, double a_perp, double gamma_n,
                   double theta_deg, double phi_deg, const ResidualMapOptions& opts = {});

struct SpeciesMatch {
    Isotope isotope;
    double gamma_estimate = 0.0;  // MHz/T (magnitude)
    double relative_deviation = 0.0;
    bool within_companion_band = false; // inside the top match's deviation + its own
};

/// gamma_est = delta_omega / (2 B0); candidates ranked by relative deviation
/// of |gamma|. Flags runners-up that fall within 1.5x the top deviation + 6%
/// (the near-degenerate-ratio case). Zero splitting yields a sentinel with no
/// matches.
std::vector<SpeciesMatch> identify_species(double delta_omega_n_mhz, double b0_gauss,
                                           const std::vector<Isotope>& table);

struct DefectMatch {
    DefectRecord record;
    double d_a = 0.0;          // MHz
    bool outside_dft_band = false; // beyond the 20% calculated-value accuracy
};

/// d_A = sqrt((<Aperp_c> - Aperp)^2 + (Apar_c - Apar)^2) with
/// <Aperp_c> = (A1 + A2)/2 and Apar_c = A3; ascending by d_A, ties broken by
/// label.
std::vector<DefectMatch> match_defect(const HyperfineEstimate& h_exp,
                                      const std::vector<DefectRecord>& db);

/// Nuclear polarization from the two fitted resonance areas:
/// p_n = (a_down g_down - a_up g_up) / (a_down g_down + a_up g_up), with
/// first-order uncertainty propagation.
ValueWithSigma polarization_from_peaks(const ValueWithSigma& a_down,
                                       const ValueWithSigma& gamma_down,
                                       const ValueWithSigma& a_up,
                                       const ValueWithSigma& gamma_up);

/// Convenience overload reading peaks 1 (down) and 2 (up) of a two-peak
/// Lorentzian fit.
ValueWithSigma polarization_from_peaks(const FitResult& two_peak_fit);

struct AzzRatioMap {
    std::vector<double> theta;
    std::vector<double> phi;
    std::vector<std::vector<double>> ratio; // |Azz|/A in (0, 1]
    double min = 0.0;
    double max = 0.0;
};

/// |Azz|/A over defect orientations for a uniaxial tensor; validates the
/// 2 gamma_n B0 splitting approximation when the range stays near 1.
AzzRatioMap azz_ratio_map(double a_par, double a_perp, double grid_deg = 1.0,
                          double probe_theta = kProbeTheta111,
                          double probe_phi = kProbePhi111);

} // namespace spinid
