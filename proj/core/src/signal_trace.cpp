#include "spinid/signal_trace.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spinid/errors.hpp"

namespace spinid {

void SignalTrace::validate() const {
    if (y.size() != x.size() || sigma.size() != x.size()) {
        throw ValidationError("trace: x, y, sigma must have equal lengths");
    }
    if (x.empty()) {
        throw ValidationError("trace: empty");
    }
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || !std::isfinite(sigma[i])) {
            throw ValidationError("trace: non-finite value at row " + std::to_string(i));
        }
        if (sigma[i] < 0.0) {
            throw ValidationError("trace: negative sigma at row " + std::to_string(i));
        }
    }
    const bool increasing = x.size() < 2 || x[1] > x[0];
    for (size_t i = 1; i < x.size(); ++i) {
        const bool ok = increasing ? x[i] > x[i - 1] : x[i] < x[i - 1];
        if (!ok) {
            throw ValidationError("trace: x not strictly monotonic at row " + std::to_string(i));
        }
    }
}

namespace {

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

SignalTrace normalize_differential(const CountTrace& r_plus, const CountTrace& r_minus,
                                   const CountTrace& r_zero, const CountTrace& r_one,
                                   XKind x_kind, const std::vector<double>& x) {
    const size_t n = r_plus.counts.size();
    if (n == 0 || r_minus.counts.size() != n || r_zero.counts.size() != n ||
        r_one.counts.size() != n) {
        throw ValidationError("normalize_differential: all four traces must have equal length");
    }
    const double ref0 = mean(r_zero.counts);
    const double ref1 = mean(r_one.counts);
    const double contrast = ref0 - ref1;
    if (!(contrast > 0.0)) {
        throw ValidationError("normalize_differential: reference contrast <R0> - <R1> must be "
                              "positive");
    }
    const double s0 = sample_std(r_zero.counts);
    const double s1 = sample_std(r_one.counts);
    const double sigma_y = std::sqrt(s0 * s0 + s1 * s1) / contrast;

    SignalTrace out;
    out.x_kind = x_kind;
    out.x.resize(n);
    out.y.resize(n);
    out.sigma.assign(n, sigma_y);
    for (size_t i = 0; i < n; ++i) {
        out.x[i] = x.empty() ? static_cast<double>(i) : x[i];
        out.y[i] = (r_plus.counts[i] - r_minus.counts[i]) / contrast;
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

std::string write_trace_csv(const SignalTrace& trace) {
    trace.validate();
    std::ostringstream os;
    os << "# x_kind=" << (trace.x_kind == XKind::time ? "time" : "frequency")
       << " x_unit=" << (trace.x_kind == XKind::time ? "us" : "MHz") << "\n";
    os << "x,y,sigma\n";
    for (size_t i = 0; i < trace.size(); ++i) {
        os << format_double(trace.x[i]) << ',' << format_double(trace.y[i]) << ','
           << format_double(trace.sigma[i]) << '\n';
    }
    return os.str();
}

void write_trace_csv_file(const SignalTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw ValidationError("cannot open for writing: " + path);
    }
    f << write_trace_csv(trace);
}

SignalTrace read_trace_csv(const std::string& text) {
    SignalTrace out;
    std::istringstream is(text);
    std::string line;
    size_t row = 0;
    bool header_seen = false;
    bool kind_seen = false;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("x_kind=");
            if (pos != std::string::npos) {
                const std::string rest = line.substr(pos + 7);
                if (rest.rfind("time", 0) == 0) {
                    out.x_kind = XKind::time;
                    kind_seen = true;
                } else if (rest.rfind("frequency", 0) == 0) {
                    out.x_kind = XKind::frequency;
                    kind_seen = true;
                } else {
                    throw ValidationError("trace csv row " + std::to_string(row) +
                                          ": unknown x_kind");
                }
            }
            continue;
        }
        if (!header_seen) {
            if (line.rfind("x,y,sigma", 0) != 0) {
                throw ValidationError("trace csv row " + std::to_string(row) +
                                      ": expected header 'x,y,sigma'");
            }
            header_seen = true;
            continue;
        }
        double vals[3];
        std::istringstream ls(line);
        std::string cell;
        for (int k = 0; k < 3; ++k) {
            if (!std::getline(ls, cell, ',')) {
                throw ValidationError("trace csv row " + std::to_string(row) +
                                      ": expected 3 columns");
            }
            try {
                size_t used = 0;
                vals[k] = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ValidationError("trace csv row " + std::to_string(row) +
                                      ": cannot parse '" + cell + "'");
            }
        }
        out.x.push_back(vals[0]);
        out.y.push_back(vals[1]);
        out.sigma.push_back(vals[2]);
    }
    if (!kind_seen) {
        throw ValidationError("trace csv: missing '# x_kind=...' header");
    }
    out.validate();
    return out;
}

SignalTrace read_trace_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ValidationError("cannot open: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_trace_csv(ss.str());
}

} // namespace spinid
