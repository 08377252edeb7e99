#pragma once

#include <numbers>

// Unit conventions used throughout:
//   frequency        MHz   (linear frequency, not angular)
//   time             us
//   magnetic field   G     (gyromagnetic ratios in MHz/G for electrons,
//                           MHz/T signed for nuclei)
//   angle            degrees at the API surface, radians internally
// Propagation uses U = exp(-i 2*pi H t) with H in MHz and t in us.

namespace spinid {

inline constexpr double kPi = std::numbers::pi;

/// Free-electron gyromagnetic ratio, MHz/G (isotropic g-tensor assumed).
inline constexpr double kGammaE = 2.8025;

/// Hydrogen nuclear gyromagnetic ratio, MHz/T.
inline constexpr double kGammaH1 = 42.577;

/// 15N nuclear gyromagnetic ratio, MHz/T (negative).
inline constexpr double kGammaN15 = -4.316;

inline constexpr double kGaussToTesla = 1.0e-4;

/// [111]-oriented probe axis in the cubic crystal frame, degrees.
inline constexpr double kProbeTheta111 = 54.7356103172;
inline constexpr double kProbePhi111 = 45.0;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Nuclear Zeeman frequency in MHz for gamma_n in MHz/T and b0 in G.
inline constexpr double nuclear_zeeman_mhz(double gamma_n_mhz_per_t, double b0_gauss) {
    return gamma_n_mhz_per_t * b0_gauss * kGaussToTesla;
}

} // namespace spinid
