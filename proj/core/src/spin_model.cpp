#include "spinid/spin_model.hpp"

#include <cmath>
#include <stdexcept>

#include "spinid/errors.hpp"

namespace spinid {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw ValidationError(std::string(name) + " must be finite");
    }
}

} // namespace

bool HyperfineTensor::uniaxial(double tol) const {
    return std::abs(a_xx - a_yy) <= tol;
}

double HyperfineTensor::a_perp(double tol) const {
    if (!uniaxial(tol)) {
        throw ValidationError("hyperfine tensor is not uniaxial: |a_xx - a_yy| = " +
                              std::to_string(std::abs(a_xx - a_yy)) + " MHz");
    }
    return 0.5 * (a_xx + a_yy);
}

HyperfineTensor HyperfineTensor::uniaxial_tensor(double a_par, double a_perp,
                                                 double theta_x, double phi_x) {
    return HyperfineTensor{a_perp, a_perp, a_par, theta_x, phi_x};
}

Eigen::Matrix3d HyperfineTensor::principal_matrix() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 0) = a_xx;
    m(1, 1) = a_yy;
    m(2, 2) = a_par;
    return m;
}

void HyperfineTensor::validate() const {
    require_finite(a_xx, "a_xx");
    require_finite(a_yy, "a_yy");
    require_finite(a_par, "a_par");
    require_finite(theta_x, "theta_x");
    require_finite(phi_x, "phi_x");
    if (theta_x < 0.0 || theta_x > 180.0) {
        throw ValidationError("theta_x must lie in [0, 180] degrees");
    }
    if (phi_x <= -180.0 || phi_x > 180.0) {
        throw ValidationError("phi_x must lie in (-180, 180] degrees");
    }
}

void SpinSystem::validate() const {
    hyperfine.validate();
    if (!(gamma_e > 0.0) || !std::isfinite(gamma_e)) {
        throw ValidationError("gamma_e must be positive and finite");
    }
    require_finite(gamma_n, "gamma_n");
    require_finite(d_zz, "d_zz");
    require_finite(d_zx, "d_zx");
    require_finite(d_zy, "d_zy");
    require_finite(probe_theta, "probe_theta");
    require_finite(probe_phi, "probe_phi");
}

double SecularComponents::splitting() const {
    return std::sqrt(a_zx * a_zx + a_zy * a_zy + a_zz * a_zz);
}

Eigen::Matrix3d rotation_matrix(double alpha_deg, double beta_deg) {
    require_finite(alpha_deg, "alpha");
    require_finite(beta_deg, "beta");
    const double a = deg_to_rad(alpha_deg);
    const double b = deg_to_rad(beta_deg);
    Eigen::Matrix3d r;
    r << std::cos(b) * std::cos(a), std::cos(b) * std::sin(a), -std::sin(b),
        -std::sin(a), std::cos(a), 0.0,
        std::sin(b) * std::cos(a), std::sin(b) * std::sin(a), std::cos(b);
    return r;
}

Eigen::Matrix3d rotate_to_probe_frame(const Eigen::Matrix3d& a_principal,
                                      double theta_x_deg, double phi_x_deg,
                                      double theta_nv_deg, double phi_nv_deg) {
    const Eigen::Matrix3d r_x = rotation_matrix(phi_x_deg, theta_x_deg);
    const Eigen::Matrix3d r_nv = rotation_matrix(phi_nv_deg, theta_nv_deg);
    return r_nv * r_x.transpose() * a_principal * r_x * r_nv.transpose();
}

SecularComponents secular_components_conjugation(const Eigen::Matrix3d& a_principal,
                                                 double theta_x_deg, double phi_x_deg,
                                                 double theta_nv_deg, double phi_nv_deg) {
    const Eigen::Matrix3d a = rotate_to_probe_frame(a_principal, theta_x_deg, phi_x_deg,
                                                    theta_nv_deg, phi_nv_deg);
    return SecularComponents{a(2, 0), a(2, 1), a(2, 2)};
}

SecularComponents secular_components_closed_form(double a_par, double a_perp,
                                                 double theta_x_deg, double phi_x_deg,
                                                 double theta_nv_deg, double phi_nv_deg) {
    const double tx = deg_to_rad(theta_x_deg);
    const double tn = deg_to_rad(theta_nv_deg);
    const double dphi = deg_to_rad(phi_nv_deg - phi_x_deg);
    const double da = a_par - a_perp;

    SecularComponents out;
    out.a_zx = -0.125 * da *
               (-4.0 * std::sin(2.0 * tx) * std::cos(2.0 * tn) * std::cos(dphi) +
                std::sin(2.0 * tn) * (std::cos(2.0 * tx) * (std::cos(2.0 * dphi) + 3.0) +
                                      2.0 * std::sin(dphi) * std::sin(dphi)));

    out.a_zy = -da * std::sin(tx) * std::sin(dphi) *
               (std::sin(tn) * std::sin(tx) * std::cos(dphi) + std::cos(tn) * std::cos(tx));

    const double ct2 = std::cos(tx) * std::cos(tx);
    const double st2 = std::sin(tx) * std::sin(tx);
    out.a_zz = std::cos(tn) * std::cos(tn) * (a_par * ct2 + a_perp * st2) +
               0.25 * std::sin(tn) * std::sin(tn) *
                   (a_par + 3.0 * a_perp -
                    da * (std::cos(2.0 * tx) - 2.0 * std::cos(2.0 * dphi) * st2)) +
               da * std::cos(tn) * std::cos(dphi) * std::sin(tn) * std::sin(2.0 * tx);
    return out;
}

SecularComponents secular_components(const SpinSystem& sys) {
    sys.validate();
    const HyperfineTensor& h = sys.hyperfine;
    if (h.uniaxial()) {
        return secular_components_closed_form(h.a_par, h.a_perp(), h.theta_x, h.phi_x,
                                              sys.probe_theta, sys.probe_phi);
    }
    return secular_components_conjugation(h.principal_matrix(), h.theta_x, h.phi_x,
                                          sys.probe_theta, sys.probe_phi);
}

LevelSpectrum level_spectrum(const SpinSystem& sys, double b0_gauss) {
    sys.validate();
    require_finite(b0_gauss, "b0");
    if (b0_gauss < 0.0) {
        throw ValidationError("b0 must be non-negative");
    }

    const SecularComponents sec = secular_components(sys);
    const double a = sec.splitting();
    if (a <= 0.0 && b0_gauss == 0.0) {
        throw ValidationError("degenerate spectrum: A = 0 at zero field");
    }

    const double ze = sys.gamma_e * b0_gauss;             // MHz
    const double zn = nuclear_zeeman_mhz(sys.gamma_n, b0_gauss); // MHz

    const auto radical = [&](double sign) {
        const double azz = sec.a_zz + sign * 2.0 * zn;
        return 0.25 * std::sqrt(sec.a_zx * sec.a_zx + sec.a_zy * sec.a_zy + azz * azz);
    };
    const double r_minus = radical(-1.0);
    const double r_plus = radical(+1.0);

    LevelSpectrum out;
    out.eps = {0.5 * ze - r_minus, 0.5 * ze + r_minus, -0.5 * ze - r_plus, -0.5 * ze + r_plus};
    out.electron = {ze - (r_plus + r_minus), ze + (r_plus + r_minus)};
    out.splitting = a;

    // First-order nuclear frequencies; labels ordered so omega_n+ >= omega_n-
    // (the closed form assumes gamma_n > 0 and Azz > 0).
    const double shift = a > 0.0 ? std::abs(sec.a_zz / a * zn) : 0.0;
    out.nuclear = {0.5 * a - shift, 0.5 * a + shift};

    const double hf_scale =
        std::max({std::abs(sys.hyperfine.a_xx), std::abs(sys.hyperfine.a_yy),
                  std::abs(sys.hyperfine.a_par)});
    out.secular_ok = std::abs(ze) >= 10.0 * hf_scale;
    return out;
}

std::vector<ZfLine> zf_transitions(const HyperfineTensor& h) {
    h.validate();
    if (h.uniaxial()) {
        const double par = h.a_par;
        const double perp = 0.5 * (h.a_xx + h.a_yy);
        return {
            {"omega_minus", 0.5 * std::abs(par - perp), true},
            {"omega_plus", 0.5 * std::abs(par + perp), true},
            {"omega_perp", std::abs(perp), false},
        };
    }
    return {
        {"omega_1", 0.5 * std::abs(h.a_par - h.a_yy), true},
        {"omega_2", 0.5 * std::abs(h.a_par + h.a_xx), true},
        {"omega_3", 0.5 * std::abs(h.a_xx + h.a_yy), false},
        {"omega_4", 0.5 * std::abs(h.a_par - h.a_xx), true},
        {"omega_5", 0.5 * std::abs(h.a_par + h.a_yy), true},
        {"omega_6", 0.5 * std::abs(h.a_xx - h.a_yy), false},
    };
}

double geomagnetic_uncertainty(double b_e_gauss, double gamma_e_mhz_per_g,
                               double linewidth_hwhm_mhz) {
    if (b_e_gauss < 0.0) {
        throw ValidationError("b_e must be non-negative");
    }
    return std::hypot(0.5 * gamma_e_mhz_per_g * b_e_gauss, linewidth_hwhm_mhz);
}

} // namespace spinid
