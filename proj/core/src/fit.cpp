#include "spinid/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spinid/errors.hpp"
#include "spinid/levmar.hpp"
#include "spinid/psd.hpp"
#include "spinid/units.hpp"

namespace spinid {

double FitResult::value(const std::string& name) const {
    for (const FitParam& p : params) {
        if (p.name == name) return p.value;
    }
    throw ValidationError("fit result has no parameter '" + name + "'");
}

double FitResult::uncertainty(const std::string& name) const {
    for (const FitParam& p : params) {
        if (p.name == name) return p.sigma;
    }
    throw ValidationError("fit result has no parameter '" + name + "'");
}

bool FitResult::has(const std::string& name) const {
    for (const FitParam& p : params) {
        if (p.name == name) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

double LorentzianModel::eval(double x, const Eigen::VectorXd& p) const {
    const double g = p(2 * n_peaks);
    const double b = p(2 * n_peaks + 1);
    const double g2 = g * g;
    double y = b;
    for (int i = 0; i < n_peaks; ++i) {
        const double d = x - p(n_peaks + i);
        y += p(i) * g2 / (g2 + d * d);
    }
    return y;
}

void LorentzianModel::gradient(double x, const Eigen::VectorXd& p,
                               Eigen::VectorXd& grad) const {
    const double g = p(2 * n_peaks);
    const double g2 = g * g;
    grad.setZero(n_params());
    double dgamma = 0.0;
    for (int i = 0; i < n_peaks; ++i) {
        const double a = p(i);
        const double d = x - p(n_peaks + i);
        const double den = g2 + d * d;
        grad(i) = g2 / den;                               // d/da_i
        grad(n_peaks + i) = a * g2 * 2.0 * d / (den * den); // d/df_i
        dgamma += 2.0 * a * g * d * d / (den * den);
    }
    grad(2 * n_peaks) = dgamma;
    grad(2 * n_peaks + 1) = 1.0;
}

double DecayingCosineModel::eval(double t, const Eigen::VectorXd& p) const {
    const double a = p(0);
    const double w = p(1);
    const double phi = p(2);
    const double big_t = p(3);
    double d = 0.0;
    switch (decay) {
        case CosineDecay::free_decay: d = t / big_t; break;
        case CosineDecay::fixed_t1e:
            d = t * (1.0 / big_t + (std::isfinite(t1e) ? 1.5 / t1e : 0.0));
            break;
        case CosineDecay::stretched: d = (t / big_t) * (t / big_t); break;
    }
    double y = a * std::cos(w * t + phi) * std::exp(-d);
    if (baseline == BaselineKind::linear) {
        y += p(4) * t + p(5);
    }
    return y;
}

void DecayingCosineModel::gradient(double t, const Eigen::VectorXd& p,
                                   Eigen::VectorXd& grad) const {
    const double a = p(0);
    const double w = p(1);
    const double phi = p(2);
    const double big_t = p(3);
    double d = 0.0;
    double dd_dt_param = 0.0; // d(D)/d(T)
    switch (decay) {
        case CosineDecay::free_decay:
            d = t / big_t;
            dd_dt_param = -t / (big_t * big_t);
            break;
        case CosineDecay::fixed_t1e:
            d = t * (1.0 / big_t + (std::isfinite(t1e) ? 1.5 / t1e : 0.0));
            dd_dt_param = -t / (big_t * big_t);
            break;
        case CosineDecay::stretched:
            d = (t / big_t) * (t / big_t);
            dd_dt_param = -2.0 * t * t / (big_t * big_t * big_t);
            break;
    }
    const double env = std::exp(-d);
    const double c = std::cos(w * t + phi);
    const double s = std::sin(w * t + phi);
    grad.setZero(n_params());
    grad(0) = c * env;
    grad(1) = -a * t * s * env;
    grad(2) = -a * s * env;
    grad(3) = -a * c * env * dd_dt_param;
    if (baseline == BaselineKind::linear) {
        grad(4) = t;
        grad(5) = 1.0;
    }
}

double ExponentialModel::eval(double t, const Eigen::VectorXd& p) const {
    return p(0) * std::exp(-t / p(1)) + p(2);
}

void ExponentialModel::gradient(double t, const Eigen::VectorXd& p,
                                Eigen::VectorXd& grad) const {
    const double env = std::exp(-t / p(1));
    grad.setZero(3);
    grad(0) = env;
    grad(1) = p(0) * env * t / (p(1) * p(1));
    grad(2) = 1.0;
}

// ---------------------------------------------------------------------------
// Shared fitting plumbing
// ---------------------------------------------------------------------------

namespace {

std::vector<double> fit_weights(const SignalTrace& trace) {
    const bool weighted =
        std::all_of(trace.sigma.begin(), trace.sigma.end(), [](double s) { return s > 0.0; });
    std::vector<double> w(trace.size(), 1.0);
    if (weighted) {
        for (size_t i = 0; i < trace.size(); ++i) w[i] = 1.0 / trace.sigma[i];
    }
    return w;
}

template <typename Model>
LevMarResult run_levmar(const Model& model, const SignalTrace& trace,
                        const Eigen::VectorXd& p0) {
    const std::vector<double> w = fit_weights(trace);
    const int n = static_cast<int>(trace.size());
    const auto residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        r.resize(n);
        for (int i = 0; i < n; ++i) {
            r(i) = (model.eval(trace.x[i], p) - trace.y[i]) * w[i];
        }
    };
    const auto jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
        jac.resize(n, model.n_params());
        Eigen::VectorXd grad(model.n_params());
        for (int i = 0; i < n; ++i) {
            model.gradient(trace.x[i], p, grad);
            jac.row(i) = grad.transpose() * w[i];
        }
    };
    LevMarResult res = levmar(residual, jacobian, p0, n);
    if (!res.converged) {
        throw ConvergenceError("fit did not converge: " + res.message, res.residual_norm);
    }
    return res;
}

FitResult pack_result(const std::string& model, const std::vector<std::string>& names,
                      const LevMarResult& res) {
    FitResult out;
    out.model = model;
    out.covariance = res.covariance;
    out.residual_norm = res.residual_norm;
    out.iterations = res.iterations;
    for (size_t i = 0; i < names.size(); ++i) {
        const double var = res.covariance(i, i);
        out.params.push_back(
            {names[i], res.params(static_cast<int>(i)), var > 0.0 ? std::sqrt(var) : 0.0});
    }
    return out;
}

double median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

double grid_step(const SignalTrace& trace) {
    double step = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < trace.size(); ++i) {
        step = std::min(step, std::abs(trace.x[i] - trace.x[i - 1]));
    }
    return step;
}

/// Local extrema of |y - baseline|, strongest first, separated by min_sep.
std::vector<size_t> find_peaks(const SignalTrace& trace, double baseline, size_t want,
                               double min_sep_x) {
    std::vector<size_t> candidates;
    const auto dev = [&](size_t i) { return std::abs(trace.y[i] - baseline); };
    for (size_t i = 0; i < trace.size(); ++i) {
        const bool left_ok = i == 0 || dev(i) >= dev(i - 1);
        const bool right_ok = i + 1 == trace.size() || dev(i) >= dev(i + 1);
        if (left_ok && right_ok && dev(i) > 0.0) {
            candidates.push_back(i);
        }
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](size_t a, size_t b) { return dev(a) > dev(b); });
    std::vector<size_t> picked;
    for (size_t c : candidates) {
        bool clash = false;
        for (size_t p : picked) {
            if (std::abs(trace.x[c] - trace.x[p]) < min_sep_x) {
                clash = true;
                break;
            }
        }
        if (!clash) {
            picked.push_back(c);
            if (picked.size() == want) break;
        }
    }
    // Pad with the strongest remaining points if separation starved us.
    for (size_t c : candidates) {
        if (picked.size() == want) break;
        if (std::find(picked.begin(), picked.end(), c) == picked.end()) {
            picked.push_back(c);
        }
    }
    return picked;
}

} // namespace

// ---------------------------------------------------------------------------
// Public fits
// ---------------------------------------------------------------------------

FitResult fit_lorentzian(const SignalTrace& trace, int n_peaks,
                         const std::optional<std::vector<double>>& init) {
    trace.validate();
    if (n_peaks < 1) {
        throw ValidationError("fit_lorentzian: n_peaks must be >= 1");
    }
    const int n_params = 2 * n_peaks + 2;
    if (static_cast<int>(trace.size()) < std::max(4 + n_peaks, n_params + 1)) {
        throw ValidationError("fit_lorentzian: too few points for " +
                              std::to_string(n_peaks) + " peaks");
    }
    LorentzianModel model{n_peaks};

    Eigen::VectorXd p0(n_params);
    if (init) {
        if (static_cast<int>(init->size()) != n_params) {
            throw ValidationError("fit_lorentzian: init must have 2*n_peaks + 2 entries");
        }
        for (int i = 0; i < n_params; ++i) p0(i) = (*init)[i];
    } else {
        const double b0 = median(trace.y);
        const double span = std::abs(trace.x.back() - trace.x.front());
        const std::vector<size_t> peaks =
            find_peaks(trace, b0, static_cast<size_t>(n_peaks), span / (4.0 * n_peaks));
        if (peaks.size() < static_cast<size_t>(n_peaks)) {
            throw ValidationError("fit_lorentzian: could not seed " + std::to_string(n_peaks) +
                                  " peaks from the trace");
        }
        // Half-width estimate from the strongest peak.
        const size_t pk = peaks.front();
        const double target = 0.5 * std::abs(trace.y[pk] - b0);
        double gamma0 = span / 20.0;
        for (size_t i = pk; i < trace.size(); ++i) {
            if (std::abs(trace.y[i] - b0) < target) {
                gamma0 = std::max(std::abs(trace.x[i] - trace.x[pk]), grid_step(trace));
                break;
            }
        }
        for (int i = 0; i < n_peaks; ++i) {
            p0(i) = trace.y[peaks[i]] - b0;
            p0(n_peaks + i) = trace.x[peaks[i]];
        }
        p0(2 * n_peaks) = gamma0;
        p0(2 * n_peaks + 1) = b0;
    }

    LevMarResult res = run_levmar(model, trace, p0);

    // Canonical form: positive width, ascending peak frequencies. The
    // covariance is permuted consistently with the parameters.
    res.params(2 * n_peaks) = std::abs(res.params(2 * n_peaks));
    std::vector<int> order(n_peaks);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return res.params(n_peaks + a) < res.params(n_peaks + b);
    });
    std::vector<int> perm(n_params);
    for (int i = 0; i < n_peaks; ++i) {
        perm[i] = order[i];
        perm[n_peaks + i] = n_peaks + order[i];
    }
    perm[2 * n_peaks] = 2 * n_peaks;
    perm[2 * n_peaks + 1] = 2 * n_peaks + 1;
    Eigen::VectorXd sorted(n_params);
    Eigen::MatrixXd cov(n_params, n_params);
    for (int i = 0; i < n_params; ++i) {
        sorted(i) = res.params(perm[i]);
        for (int j = 0; j < n_params; ++j) {
            cov(i, j) = res.covariance(perm[i], perm[j]);
        }
    }
    res.params = sorted;
    res.covariance = cov;

    std::vector<std::string> names;
    for (int i = 0; i < n_peaks; ++i) names.push_back("a" + std::to_string(i + 1));
    for (int i = 0; i < n_peaks; ++i) names.push_back("f" + std::to_string(i + 1));
    names.push_back("gamma");
    names.push_back("b");
    FitResult out = pack_result(n_peaks == 1 ? "lorentzian" : "multi-lorentzian", names, res);

    const double step = grid_step(trace);
    for (int i = 0; i + 1 < n_peaks; ++i) {
        if (std::abs(res.params(n_peaks + i + 1) - res.params(n_peaks + i)) < step) {
            out.warnings.push_back("peak collision: f" + std::to_string(i + 1) + " and f" +
                                   std::to_string(i + 2) + " closer than one grid step");
        }
    }
    return out;
}

FitResult fit_decaying_cosine(const SignalTrace& trace, CosineDecay decay,
                              BaselineKind baseline, double t1e_us,
                              const std::optional<std::vector<double>>& init) {
    trace.validate();
    if (trace.x_kind != XKind::time) {
        throw ValidationError("fit_decaying_cosine: time-domain trace required");
    }
    if (decay == CosineDecay::fixed_t1e && !(t1e_us > 0.0)) {
        throw ValidationError("fit_decaying_cosine: fixed_t1e requires a positive T1e");
    }
    DecayingCosineModel model{decay, baseline, t1e_us};
    const int n_params = model.n_params();
    if (static_cast<int>(trace.size()) < n_params + 2) {
        throw ValidationError("fit_decaying_cosine: too few points");
    }

    Eigen::VectorXd p0(n_params);
    if (init) {
        if (static_cast<int>(init->size()) != n_params) {
            throw ValidationError("fit_decaying_cosine: bad init length");
        }
        for (int i = 0; i < n_params; ++i) p0(i) = (*init)[i];
    } else {
        // Seed the frequency from the dominant PSD bin.
        double f0 = 0.0;
        if (trace.size() >= 8) {
            const SignalTrace psd = fft_psd(trace, PsdBackground::linear_subtract);
            size_t best = 1;
            for (size_t k = 1; k < psd.size(); ++k) {
                if (psd.y[k] > psd.y[best]) best = k;
            }
            f0 = psd.x[best];
        }
        const double mean_y =
            std::accumulate(trace.y.begin(), trace.y.end(), 0.0) / trace.size();
        const auto [min_it, max_it] = std::minmax_element(trace.y.begin(), trace.y.end());
        p0(0) = 0.5 * (*max_it - *min_it);
        p0(1) = 2.0 * kPi * std::max(f0, 1e-6);
        p0(2) = 0.0;
        p0(3) = std::max(trace.x.back() - trace.x.front(), grid_step(trace));
        if (baseline == BaselineKind::linear) {
            p0(4) = 0.0;
            p0(5) = mean_y;
        }
    }

    LevMarResult res = run_levmar(model, trace, p0);
    bool no_decay = false;
    if (!(res.params(3) > 0.0)) {
        // A flat envelope is degenerate in T: the fit can cross +-infinity.
        // Tolerate it when the envelope change over the trace is negligible;
        // reject genuinely growing envelopes.
        const double span = trace.x.back() - trace.x.front();
        if (std::abs(span / res.params(3)) < 1e-3) {
            res.params(3) = std::numeric_limits<double>::infinity();
            no_decay = true;
        } else {
            throw ConvergenceError("fit_decaying_cosine: non-positive decay time",
                                   res.residual_norm);
        }
    }
    std::vector<std::string> names = {"a", "omega", "phi", "T"};
    if (baseline == BaselineKind::linear) {
        names.push_back("b");
        names.push_back("c");
    }
    const char* label = decay == CosineDecay::stretched    ? "stretched-cosine"
                        : decay == CosineDecay::fixed_t1e ? "decaying-cosine-fixed-t1e"
                                                          : "decaying-cosine";
    FitResult out = pack_result(label, names, res);
    if (no_decay) {
        out.warnings.push_back("no decay detected");
    }
    return out;
}

FitResult fit_exponential(const SignalTrace& trace) {
    trace.validate();
    if (trace.x_kind != XKind::time) {
        throw ValidationError("fit_exponential: time-domain trace required");
    }
    if (trace.size() < 4) {
        throw ValidationError("fit_exponential: too few points");
    }

    const double mean_y = std::accumulate(trace.y.begin(), trace.y.end(), 0.0) / trace.size();
    double ss = 0.0;
    for (double v : trace.y) ss += (v - mean_y) * (v - mean_y);
    const double spread = std::sqrt(ss / trace.size());
    const double span = trace.x.back() - trace.x.front();

    if (spread < 1e-12 * std::max(1.0, std::abs(mean_y))) {
        FitResult out;
        out.model = "exponential";
        out.params = {{"a0", 0.0, 0.0},
                      {"T", std::numeric_limits<double>::infinity(), 0.0},
                      {"b0", mean_y, 0.0}};
        out.covariance = Eigen::MatrixXd::Zero(3, 3);
        out.warnings.push_back("no decay detected");
        return out;
    }

    Eigen::VectorXd p0(3);
    p0(0) = trace.y.front() - trace.y.back();
    p0(1) = std::max(span / 3.0, grid_step(trace));
    p0(2) = trace.y.back();

    const LevMarResult res = run_levmar(ExponentialModel{}, trace, p0);
    FitResult out = pack_result("exponential", {"a0", "T", "b0"}, res);
    if (out.value("T") > 100.0 * span) {
        out.warnings.push_back("no decay detected");
    }
    return out;
}

} // namespace spinid
