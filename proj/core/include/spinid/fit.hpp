#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spinid/signal_trace.hpp"

// Fit models for the measured signal families: Lorentzian resonances with a
// shared width, exponentially decaying cosines (free, relaxation-fixed, and
// stretched variants), and plain exponentials. All models carry analytic
// Jacobians; parameter uncertainties come from the residual-scaled covariance
// at the optimum.

namespace spinid {

struct FitParam {
    std::string name;
    double value = 0.0;
    double sigma = 0.0; // 1-sigma uncertainty, sqrt(diag(covariance))
};

struct FitResult {
    std::string model;
    std::vector<FitParam> params;
    Eigen::MatrixXd covariance;
    double residual_norm = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;

    double value(const std::string& name) const;
    double uncertainty(const std::string& name) const;
    bool has(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Model functions (exposed so tests can check Jacobians by finite differences)
// ---------------------------------------------------------------------------

/// y(x) = sum_i a_i g^2 / (g^2 + (x - f_i)^2) + b with one shared width g.
/// Parameter order: [a_1..a_n, f_1..f_n, gamma, b].
struct LorentzianModel {
    int n_peaks = 1;

    int n_params() const { return 2 * n_peaks + 2; }
    double eval(double x, const Eigen::VectorXd& p) const;
    void gradient(double x, const Eigen::VectorXd& p, Eigen::VectorXd& grad) const;
};

enum class CosineDecay { free_decay, fixed_t1e, stretched };
enum class BaselineKind { none, linear };

/// y(t) = a cos(w t + phi) exp(-D(t)) [+ b t + c].
///   free_decay: D = t / T
///   fixed_t1e:  D = t (1/T + 3/(2 T1e)) with T1e held fixed (T is the
///               intrinsic dephasing/coherence time)
///   stretched:  D = (t / T)^2
/// Parameter order: [a, omega, phi, T] (+ [b, c] with a linear baseline).
struct DecayingCosineModel {
    CosineDecay decay = CosineDecay::free_decay;
    BaselineKind baseline = BaselineKind::none;
    double t1e = std::numeric_limits<double>::infinity();

    int n_params() const { return baseline == BaselineKind::linear ? 6 : 4; }
    double eval(double t, const Eigen::VectorXd& p) const;
    void gradient(double t, const Eigen::VectorXd& p, Eigen::VectorXd& grad) const;
};

/// y(t) = a0 exp(-t/T) + b0. Parameter order: [a0, T, b0].
struct ExponentialModel {
    int n_params() const { return 3; }
    double eval(double t, const Eigen::VectorXd& p) const;
    void gradient(double t, const Eigen::VectorXd& p, Eigen::VectorXd& grad) const;
};

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

/// Multi-peak Lorentzian fit with shared width; n_peaks = 1 is the
/// single-Lorentzian model. Peaks are reported in ascending frequency order;
/// the shared HWHM gamma is the per-resonance frequency uncertainty. Warns
/// (in FitResult::warnings) when two fitted centers collide within one grid
/// step. Throws ConvergenceError past the iteration cap.
FitResult fit_lorentzian(const SignalTrace& trace, int n_peaks,
                         const std::optional<std::vector<double>>& init = std::nullopt);

/// Decaying-cosine fit. fixed_t1e requires a finite t1e_us and reports the
/// intrinsic T; results with T <= 0 are rejected as non-convergent.
FitResult fit_decaying_cosine(const SignalTrace& trace,
                              CosineDecay decay = CosineDecay::free_decay,
                              BaselineKind baseline = BaselineKind::none,
                              double t1e_us = std::numeric_limits<double>::infinity(),
                              const std::optional<std::vector<double>>& init = std::nullopt);

/// Three-parameter exponential for relaxation-time extraction. A flat trace
/// short-circuits to the no-decay branch (T = inf, warning "no decay
/// detected").
FitResult fit_exponential(const SignalTrace& trace);

} // namespace spinid
