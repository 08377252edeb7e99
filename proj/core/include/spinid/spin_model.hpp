#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spinid/units.hpp"

// Closed-form spectra for a single S=1/2 electron, I=1/2 nucleus defect
// probed through a nearby optically read electron spin. The secular
// Hamiltonian in the field frame (B along z) is
//   H/(2pi) = gamma_e B0 Sz + Azx Sz Ix + Azy Sz Iy + Azz Sz Iz + gamma_n B0 Iz
// and at zero field, assuming uniaxial symmetry,
//   H0/(2pi) = Aperp (Sx Ix + Sy Iy) + Apar Sz Iz.

namespace spinid {

/// Principal-frame hyperfine tensor plus the principal-axis orientation.
/// Angles are in degrees: theta_x is the polar angle from [001], phi_x the
/// azimuthal angle from [100] towards [010].
struct HyperfineTensor {
    double a_xx = 0.0;  // MHz
    double a_yy = 0.0;  // MHz
    double a_par = 0.0; // MHz, A_par = A_zz in the principal frame
    double theta_x = 0.0;
    double phi_x = 0.0;

    /// |a_xx - a_yy| at or below this is treated as uniaxial (experimental bound).
    static constexpr double kUniaxialTolMHz = 1.0;

    bool uniaxial(double tol = kUniaxialTolMHz) const;

    /// A_perp for a uniaxial tensor; throws if the tensor is not uniaxial.
    double a_perp(double tol = kUniaxialTolMHz) const;

    static HyperfineTensor uniaxial_tensor(double a_par, double a_perp,
                                           double theta_x = 0.0, double phi_x = 0.0);

    /// diag(a_xx, a_yy, a_par) in the principal frame.
    Eigen::Matrix3d principal_matrix() const;

    void validate() const;
};

/// Electron-nuclear register description: one defect plus its dipolar
/// coupling to the probe spin.
struct SpinSystem {
    double gamma_e = kGammaE;  // MHz/G
    double gamma_n = kGammaH1; // MHz/T, signed
    HyperfineTensor hyperfine;
    double d_zz = 0.0; // kHz, probe-defect secular dipolar coupling
    double d_zx = 0.0; // kHz
    double d_zy = 0.0; // kHz
    double probe_theta = kProbeTheta111; // degrees
    double probe_phi = kProbePhi111;     // degrees

    double d_zz_mhz() const { return d_zz * 1e-3; }
    double d_zx_mhz() const { return d_zx * 1e-3; }
    double d_zy_mhz() const { return d_zy * 1e-3; }

    void validate() const;
};

/// Secular hyperfine components in the frame quantized by the probe field.
struct SecularComponents {
    double a_zx = 0.0; // MHz
    double a_zy = 0.0;
    double a_zz = 0.0;

    /// Hyperfine splitting A = sqrt(Azx^2 + Azy^2 + Azz^2) >= |Azz|.
    double splitting() const;
};

/// Eigen-energies and transition frequencies of the secular Hamiltonian.
struct LevelSpectrum {
    std::array<double, 4> eps{};          // MHz, labeled eps1..eps4
    std::array<double, 2> electron{};     // MHz, omega_e-/omega_e+
    std::array<double, 2> nuclear{};      // MHz, omega_n-/omega_n+ (first order)
    double splitting = 0.0;               // MHz, A
    bool secular_ok = true;               // false when |gamma_e B0| < 10x hyperfine

    double omega_e_minus() const { return electron[0]; }
    double omega_e_plus() const { return electron[1]; }
    double omega_n_minus() const { return nuclear[0]; }
    double omega_n_plus() const { return nuclear[1]; }
};

/// One zero-field transition line.
struct ZfLine {
    std::string label;
    double frequency = 0.0; // MHz
    bool observable = true;
};

/// Euler rotation R(alpha, beta) with gamma = 0; angles in degrees.
/// Orthogonal with det +1.
Eigen::Matrix3d rotation_matrix(double alpha_deg, double beta_deg);

/// Full-tensor route: A' = R_nv R_x^T A_princ R_x R_nv^T with
/// R_x = R(phi_x, theta_x) and R_nv = R(phi_nv, theta_nv).
Eigen::Matrix3d rotate_to_probe_frame(const Eigen::Matrix3d& a_principal,
                                      double theta_x_deg, double phi_x_deg,
                                      double theta_nv_deg, double phi_nv_deg);

/// Secular components (Azx, Azy, Azz). Uniaxial tensors use the closed-form
/// trigonometric expressions; non-uniaxial ones go through the matrix
/// conjugation. Both routes agree to 1e-9 MHz for uniaxial input.
SecularComponents secular_components(const SpinSystem& sys);

/// Closed-form secular components for a uniaxial tensor.
SecularComponents secular_components_closed_form(double a_par, double a_perp,
                                                 double theta_x_deg, double phi_x_deg,
                                                 double theta_nv_deg, double phi_nv_deg);

/// Matrix-conjugation route, valid for any tensor.
SecularComponents secular_components_conjugation(const Eigen::Matrix3d& a_principal,
                                                 double theta_x_deg, double phi_x_deg,
                                                 double theta_nv_deg, double phi_nv_deg);

/// Eigen-energies eps1..eps4 and transition frequencies at field b0 (G).
/// omega_n+- follow the first-order expressions A/2 +- (Azz/A) gamma_n B0;
/// labels are swapped for gamma_n < 0 so omega_n+ >= omega_n-.
LevelSpectrum level_spectrum(const SpinSystem& sys, double b0_gauss);

/// Zero-field transition catalog. Uniaxial input gives the three lines
/// omega_-+ = |Apar -+ Aperp|/2 and omega_perp = |Aperp| (unobservable);
/// non-uniaxial input gives the six lines omega_1..omega_6 of which
/// omega_3 and omega_6 are unobservable in the probe echo signal.
std::vector<ZfLine> zf_transitions(const HyperfineTensor& h);

/// Total per-resonance frequency uncertainty sqrt((gamma_e b_e/2)^2 + hwhm^2).
double geomagnetic_uncertainty(double b_e_gauss, double gamma_e_mhz_per_g,
                               double linewidth_hwhm_mhz);

} // namespace spinid
