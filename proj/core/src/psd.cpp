#include "spinid/psd.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "spinid/errors.hpp"
#include "spinid/units.hpp"

namespace spinid {

namespace {

bool uniform_grid(const std::vector<double>& x, double tol) {
    const double dt = x[1] - x[0];
    for (size_t i = 1; i < x.size(); ++i) {
        if (std::abs((x[i] - x[i - 1]) - dt) > tol * std::abs(dt)) return false;
    }
    return true;
}

std::vector<double> resample(const std::vector<double>& x, const std::vector<double>& y,
                             size_t n, double x0, double dt) {
    std::vector<double> out(n);
    size_t j = 0;
    for (size_t i = 0; i < n; ++i) {
        const double xi = x0 + dt * static_cast<double>(i);
        while (j + 2 < x.size() && x[j + 1] < xi) ++j;
        const double t = (xi - x[j]) / (x[j + 1] - x[j]);
        out[i] = y[j] + t * (y[j + 1] - y[j]);
    }
    return out;
}

} // namespace

SignalTrace fft_psd(const SignalTrace& trace, PsdBackground background) {
    trace.validate();
    if (trace.x_kind != XKind::time) {
        throw ValidationError("fft_psd: time-domain trace required");
    }
    if (trace.size() < 8) {
        throw ValidationError("fft_psd: at least 8 samples required");
    }

    const size_t n = trace.size();
    std::vector<double> y = trace.y;
    std::vector<double> x = trace.x;
    double dt = (x.back() - x.front()) / static_cast<double>(n - 1);
    if (!uniform_grid(x, 1e-9)) {
        y = resample(x, y, n, x.front(), dt);
    }

    if (background == PsdBackground::linear_subtract) {
        // Least-squares line through (i*dt, y_i).
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < n; ++i) {
            const double xi = static_cast<double>(i) * dt;
            sx += xi;
            sy += y[i];
            sxx += xi * xi;
            sxy += xi * y[i];
        }
        const double denom = n * sxx - sx * sx;
        const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
        const double intercept = (sy - slope * sx) / n;
        for (size_t i = 0; i < n; ++i) {
            y[i] -= intercept + slope * static_cast<double>(i) * dt;
        }
    }

    const size_t n_out = n / 2 + 1;
    SignalTrace out;
    out.x_kind = XKind::frequency;
    out.x.resize(n_out);
    out.y.resize(n_out);
    out.sigma.assign(n_out, 0.0);

    for (size_t k = 0; k < n_out; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double phase = -2.0 * kPi * static_cast<double>(k) *
                                 static_cast<double>(i) / static_cast<double>(n);
            acc += y[i] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
        out.x[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
        out.y[k] = std::norm(acc);
    }

    double peak = 0.0;
    for (size_t k = 1; k < n_out; ++k) peak = std::max(peak, out.y[k]);
    if (peak > 0.0) {
        for (double& v : out.y) v /= peak;
    }
    return out;
}

} // namespace spinid
