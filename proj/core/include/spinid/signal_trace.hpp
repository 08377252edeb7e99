#pragma once

#include <iosfwd>
#include <string>
#include <vector>

// Sampled signal vs one independent variable, with per-point uncertainty.
// Trace CSV format: a comment header declaring the x kind and units, then
// one "x,y,sigma" row per point.

namespace spinid {

enum class XKind { time, frequency };

struct SignalTrace {
    std::vector<double> x;     // us or MHz
    std::vector<double> y;     // normalized, dimensionless
    std::vector<double> sigma; // per-point standard deviation (>= 0)
    XKind x_kind = XKind::time;

    size_t size() const { return x.size(); }

    /// Throws unless lengths match, sigma >= 0, and x is strictly monotonic.
    void validate() const;
};

/// Averaged photon-count trace: per-point means over many shots.
struct CountTrace {
    std::vector<double> counts;
};

/// Differential normalization y_i = (R+_i - R-_i) / (<R0> - <R1>), with the
/// per-point uncertainty sigma_y = sqrt(s0^2 + s1^2) / (<R0> - <R1>) where
/// s0, s1 are the sample standard deviations of the reference traces (the
/// per-point count noise estimate). Throws when the reference contrast
/// <R0> - <R1> is not positive.
SignalTrace normalize_differential(const CountTrace& r_plus, const CountTrace& r_minus,
                                   const CountTrace& r_zero, const CountTrace& r_one,
                                   XKind x_kind = XKind::time,
                                   const std::vector<double>& x = {});

std::string write_trace_csv(const SignalTrace& trace);
void write_trace_csv_file(const SignalTrace& trace, const std::string& path);

/// Parse a trace CSV; errors name the offending row.
SignalTrace read_trace_csv(const std::string& text);
SignalTrace read_trace_csv_file(const std::string& path);

} // namespace spinid
