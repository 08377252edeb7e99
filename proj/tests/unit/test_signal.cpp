#include <doctest.h>

#include <cmath>
#include <random>

#include "spinid/errors.hpp"
#include "spinid/fit.hpp"
#include "spinid/levmar.hpp"
#include "spinid/psd.hpp"
#include "spinid/signal_trace.hpp"
#include "spinid/units.hpp"

using namespace spinid;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

SignalTrace make_trace(const std::vector<double>& x, const std::vector<double>& y,
                       XKind kind = XKind::time, double sigma = 0.0) {
    SignalTrace t;
    t.x = x;
    t.y = y;
    t.sigma.assign(x.size(), sigma);
    t.x_kind = kind;
    return t;
}

double lorentz(double x, double a, double g, double f, double b) {
    return a * g * g / (g * g + (x - f) * (x - f)) + b;
}

} // namespace

// ---------------------------------------------------------------------------
// Differential normalization
// ---------------------------------------------------------------------------

TEST_CASE("normalize_differential: trivial contrasts") {
    const size_t n = 32;
    CountTrace plus{std::vector<double>(n, 900.0)};
    CountTrace minus{std::vector<double>(n, 900.0)};
    CountTrace ref0{std::vector<double>(n, 1200.0)};
    CountTrace ref1{std::vector<double>(n, 800.0)};

    const SignalTrace zero = normalize_differential(plus, minus, ref0, ref1);
    for (double v : zero.y) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

    const SignalTrace one = normalize_differential(ref0, ref1, ref0, ref1);
    for (double v : one.y) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS_AS(normalize_differential(plus, minus, ref1, ref0), ValidationError);
}

TEST_CASE("normalize_differential: invariant under common count scaling") {
    std::mt19937 rng(5);
    std::poisson_distribution<long> bright(1200);
    std::poisson_distribution<long> dark(800);
    const size_t n = 64;
    CountTrace p, m, r0, r1;
    for (size_t i = 0; i < n; ++i) {
        p.counts.push_back(static_cast<double>(bright(rng)));
        m.counts.push_back(static_cast<double>(dark(rng)));
        r0.counts.push_back(static_cast<double>(bright(rng)));
        r1.counts.push_back(static_cast<double>(dark(rng)));
    }
    const SignalTrace base = normalize_differential(p, m, r0, r1);
    const double c = 7.25;
    CountTrace p2 = p, m2 = m, r02 = r0, r12 = r1;
    for (size_t i = 0; i < n; ++i) {
        p2.counts[i] *= c;
        m2.counts[i] *= c;
        r02.counts[i] *= c;
        r12.counts[i] *= c;
    }
    const SignalTrace scaled = normalize_differential(p2, m2, r02, r12);
    for (size_t i = 0; i < n; ++i) {
        CHECK(scaled.y[i] == doctest::Approx(base.y[i]).epsilon(1e-12));
    }
    CHECK(scaled.sigma[0] == doctest::Approx(base.sigma[0]).epsilon(1e-12));
}

TEST_CASE("normalize_differential: sigma matches a Monte-Carlo resampling estimate") {
    // Poisson counts with flat means; the per-point scatter of y across
    // replicas is the oracle for the reported sigma_y.
    const size_t n = 500;
    const int replicas = 2500;
    const double lam_plus = 1000.0, lam_minus = 1000.0;
    const double lam0 = 1200.0, lam1 = 800.0;

    std::mt19937 rng(11);
    std::poisson_distribution<long> dp(lam_plus), dm(lam_minus), d0(lam0), d1(lam1);

    // One realization: the value under test.
    CountTrace p, m, r0, r1;
    for (size_t i = 0; i < n; ++i) {
        p.counts.push_back(static_cast<double>(dp(rng)));
        m.counts.push_back(static_cast<double>(dm(rng)));
        r0.counts.push_back(static_cast<double>(d0(rng)));
        r1.counts.push_back(static_cast<double>(d1(rng)));
    }
    const SignalTrace trace = normalize_differential(p, m, r0, r1);

    // Monte-Carlo: spread of y_0 over fresh draws.
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < replicas; ++k) {
        const double y = (static_cast<double>(dp(rng)) - static_cast<double>(dm(rng))) /
                         (lam0 - lam1);
        sum += y;
        sum2 += y * y;
    }
    const double mc_sigma = std::sqrt(sum2 / replicas - (sum / replicas) * (sum / replicas));
    CHECK(trace.sigma[0] == doctest::Approx(mc_sigma).epsilon(0.05));
    // And the mean y is unbiased.
    const double mean_y =
        std::accumulate(trace.y.begin(), trace.y.end(), 0.0) / static_cast<double>(n);
    CHECK(std::abs(mean_y) < 3.0 * trace.sigma[0] / std::sqrt(static_cast<double>(n)));
}

// ---------------------------------------------------------------------------
// Lorentzian fits
// ---------------------------------------------------------------------------

TEST_CASE("single lorentzian: noiseless recovery is exact") {
    const std::vector<double> x = linspace(5.0, 17.0, 121);
    std::vector<double> y;
    for (double xi : x) y.push_back(lorentz(xi, 1.0, 0.4, 11.0, 0.0));
    const FitResult fit = fit_lorentzian(make_trace(x, y, XKind::frequency), 1);
    CHECK(fit.value("a1") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.value("f1") == doctest::Approx(11.0).epsilon(1e-6));
    CHECK(fit.value("gamma") == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(std::abs(fit.value("b")) < 1e-6);
    CHECK(fit.model == "lorentzian");
}

TEST_CASE("two-peak lorentzian: post-initialization spectrum parameters") {
    // Shared-width double Lorentzian with the grown/shrunk resonance pair.
    const double gamma = 0.65;
    const std::vector<double> x = linspace(1006.0, 1040.0, 341);
    std::vector<double> y;
    for (double xi : x) {
        y.push_back(lorentz(xi, -1.5, gamma, 1009.7, 1.0) +
                    lorentz(xi, -0.50, gamma, 1036.1, 0.0));
    }
    const FitResult fit = fit_lorentzian(make_trace(x, y, XKind::frequency), 2);
    CHECK(fit.value("a1") == doctest::Approx(-1.5).epsilon(1e-4));
    CHECK(fit.value("a2") == doctest::Approx(-0.50).epsilon(1e-4));
    CHECK(fit.value("gamma") == doctest::Approx(0.65).epsilon(1e-4));
    CHECK(fit.value("f1") == doctest::Approx(1009.7).epsilon(1e-6));
    CHECK(fit.value("f2") == doctest::Approx(1036.1).epsilon(1e-6));
    CHECK(fit.model == "multi-lorentzian");
}

TEST_CASE("eight-peak spectrum: all line positions recovered within the width") {
    const double gamma = 0.2;
    const std::vector<double> centers = {2.8, 3.8, 5.0, 7.0, 10.4, 11.2, 12.0, 32.0};
    const std::vector<double> amps = {-0.05, -0.04, -0.08, -0.10, -0.05, -0.06, -0.05, -0.09};
    const std::vector<double> x = linspace(1.5, 34.0, 651);
    std::vector<double> y;
    for (double xi : x) {
        double v = 0.5;
        for (size_t k = 0; k < centers.size(); ++k) {
            v += lorentz(xi, amps[k], gamma, centers[k], 0.0);
        }
        y.push_back(v);
    }
    std::vector<double> init;
    for (double a : amps) init.push_back(a * 0.8);
    for (double f : centers) init.push_back(f + 0.05);
    init.push_back(0.3);
    init.push_back(0.45);
    const FitResult fit = fit_lorentzian(make_trace(x, y, XKind::frequency), 8, init);
    for (size_t k = 0; k < centers.size(); ++k) {
        const double f = fit.value("f" + std::to_string(k + 1));
        CHECK(std::abs(f - centers[k]) < gamma);
    }
}

TEST_CASE("multi-lorentzian with one peak equals the single-peak residual bitwise") {
    LorentzianModel single{1};
    Eigen::VectorXd p(4);
    p << 0.7, -3.0, 0.5, 0.1; // a, f, gamma, b
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> xs(-10.0, 10.0);
    for (int i = 0; i < 100; ++i) {
        const double x = xs(rng);
        const double direct = p(0) * p(2) * p(2) / (p(2) * p(2) + (x - p(1)) * (x - p(1))) + p(3);
        CHECK(single.eval(x, p) == direct); // bitwise
    }
}

TEST_CASE("lorentzian peak collision warning") {
    const std::vector<double> x = linspace(0.0, 20.0, 201);
    std::vector<double> y;
    for (double xi : x) y.push_back(lorentz(xi, 1.0, 0.5, 10.0, 0.0));
    std::vector<double> init = {0.5, 0.5, 10.0, 10.02, 0.5, 0.0};
    const FitResult fit = fit_lorentzian(make_trace(x, y, XKind::frequency), 2, init);
    REQUIRE(!fit.warnings.empty());
    CHECK(fit.warnings.front().find("collision") != std::string::npos);
}

TEST_CASE("lorentzian fit precondition errors") {
    const std::vector<double> x = linspace(0.0, 3.0, 4);
    const std::vector<double> y = {0.1, 0.2, 0.3, 0.2};
    CHECK_THROWS_AS(fit_lorentzian(make_trace(x, y, XKind::frequency), 1), ValidationError);
    CHECK_THROWS_AS(fit_lorentzian(make_trace(linspace(0, 10, 64),
                                              std::vector<double>(64, 0.1), XKind::frequency),
                                   0),
                    ValidationError);
}

// ---------------------------------------------------------------------------
// Decaying cosine fits
// ---------------------------------------------------------------------------

TEST_CASE("decaying cosine: noiseless recovery is exact") {
    // omega/2pi = 70 kHz, T = 30 us.
    const double w = 2.0 * kPi * 0.070;
    const std::vector<double> x = linspace(0.0, 60.0, 121);
    std::vector<double> y;
    for (double t : x) y.push_back(0.8 * std::cos(w * t + 0.4) * std::exp(-t / 30.0));
    const FitResult fit = fit_decaying_cosine(make_trace(x, y), CosineDecay::free_decay);
    CHECK(fit.value("a") == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(fit.value("omega") == doctest::Approx(w).epsilon(1e-6));
    CHECK(fit.value("phi") == doctest::Approx(0.4).epsilon(1e-5));
    CHECK(fit.value("T") == doctest::Approx(30.0).epsilon(1e-6));
}

TEST_CASE("decaying cosine with linear baseline") {
    const double w = 2.0 * kPi * 0.047;
    const std::vector<double> x = linspace(0.0, 80.0, 161);
    std::vector<double> y;
    for (double t : x) {
        y.push_back(0.25 * std::cos(w * t) * std::exp(-t / 40.0) - 0.002 * t + 0.37);
    }
    const FitResult fit =
        fit_decaying_cosine(make_trace(x, y), CosineDecay::free_decay, BaselineKind::linear);
    CHECK(fit.value("omega") / kPi * 1e3 == doctest::Approx(94.0).epsilon(1e-5));
    CHECK(fit.value("b") == doctest::Approx(-0.002).epsilon(1e-4));
    CHECK(fit.value("c") == doctest::Approx(0.37).epsilon(1e-5));
}

TEST_CASE("fixed-t1e model recovers the intrinsic coherence time") {
    // Total rate 1/T = 1/T2 + 3/(2 T1e); the fit holds T1e and reports T2.
    const double t2 = 1000.0;  // us
    const double t1e = 120.0;  // us
    const double total_rate = 1.0 / t2 + 1.5 / t1e;
    const double w = 2.0 * kPi * 0.005;
    const std::vector<double> x = linspace(0.0, 400.0, 201);
    std::vector<double> y;
    for (double t : x) y.push_back(0.5 * std::cos(w * t) * std::exp(-t * total_rate));
    const FitResult fit = fit_decaying_cosine(make_trace(x, y), CosineDecay::fixed_t1e,
                                              BaselineKind::none, t1e);
    CHECK(fit.value("T") == doctest::Approx(t2).epsilon(1e-4));
    CHECK(fit.model == "decaying-cosine-fixed-t1e");
}

TEST_CASE("stretched cosine uses the squared-exponent envelope") {
    const double w = 2.0 * kPi * 0.005;
    const std::vector<double> x = linspace(0.0, 1500.0, 151);
    std::vector<double> y;
    for (double t : x) y.push_back(0.5 * std::cos(w * t) * std::exp(-(t / 900.0) * (t / 900.0)));
    std::vector<double> init = {0.45, w * 1.02, 0.05, 700.0};
    const FitResult fit = fit_decaying_cosine(make_trace(x, y), CosineDecay::stretched,
                                              BaselineKind::none,
                                              std::numeric_limits<double>::infinity(), init);
    CHECK(fit.value("T") == doctest::Approx(900.0).epsilon(1e-5));
    CHECK(fit.model == "stretched-cosine");
}

TEST_CASE("decaying cosine rejects growing envelopes") {
    const double w = 2.0 * kPi * 0.05;
    const std::vector<double> x = linspace(0.0, 60.0, 121);
    std::vector<double> y;
    for (double t : x) y.push_back(0.1 * std::cos(w * t) * std::exp(+t / 15.0));
    // An init near the true (growing) envelope converges to T < 0, which the
    // fit rejects as non-physical.
    std::vector<double> init = {0.1, w, 0.0, -15.5};
    CHECK_THROWS_AS(
        fit_decaying_cosine(make_trace(x, y), CosineDecay::free_decay, BaselineKind::none,
                            std::numeric_limits<double>::infinity(), init),
        ConvergenceError);
}

TEST_CASE("undamped cosine lands on the no-decay branch") {
    const double w = 2.0 * kPi * 0.05;
    const std::vector<double> x = linspace(0.0, 60.0, 121);
    std::vector<double> y;
    for (double t : x) y.push_back(0.3 * std::cos(w * t));
    const FitResult fit = fit_decaying_cosine(make_trace(x, y), CosineDecay::free_decay);
    CHECK(fit.value("omega") == doctest::Approx(w).epsilon(1e-6));
    const double t_fit = fit.value("T");
    CHECK((std::isinf(t_fit) || t_fit > 1e4));
}

// ---------------------------------------------------------------------------
// Exponential fit
// ---------------------------------------------------------------------------

TEST_CASE("exponential: noiseless recovery and the flat branch") {
    const std::vector<double> x = linspace(0.0, 500.0, 101);
    std::vector<double> y;
    for (double t : x) y.push_back(0.4 * std::exp(-t / 130.0) + 0.1);
    const FitResult fit = fit_exponential(make_trace(x, y));
    CHECK(fit.value("a0") == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(fit.value("T") == doctest::Approx(130.0).epsilon(1e-6));
    CHECK(fit.value("b0") == doctest::Approx(0.1).epsilon(1e-6));

    const FitResult flat = fit_exponential(make_trace(x, std::vector<double>(101, 0.25)));
    REQUIRE(!flat.warnings.empty());
    CHECK(flat.warnings.front() == "no decay detected");
    CHECK(std::isinf(flat.value("T")));
}

TEST_CASE("exponential: Monte-Carlo round-trip within 2% at SNR 20") {
    std::mt19937 rng(17);
    std::normal_distribution<double> noise(0.0, 0.02); // amplitude 0.4 -> SNR 20
    const std::vector<double> x = linspace(0.0, 600.0, 1001);
    double sum_dev = 0.0;
    const int trials = 12;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> y;
        for (double t : x) y.push_back(0.4 * std::exp(-t / 150.0) + 0.1 + noise(rng));
        const FitResult fit = fit_exponential(make_trace(x, y, XKind::time, 0.02));
        const double dev = std::abs(fit.value("T") - 150.0) / 150.0;
        sum_dev += dev;
        CHECK(dev < 0.06);
        // The reported uncertainty is the right scale for the actual error.
        CHECK(fit.uncertainty("T") / 150.0 < 0.04);
    }
    CHECK(sum_dev / trials < 0.02);
}

// ---------------------------------------------------------------------------
// Jacobians and error scaling
// ---------------------------------------------------------------------------

namespace {

template <typename Model>
void check_jacobian(const Model& model, const Eigen::VectorXd& p, double x) {
    Eigen::VectorXd analytic(model.n_params());
    model.gradient(x, p, analytic);
    for (int j = 0; j < model.n_params(); ++j) {
        const double h = 1e-6 * std::max(std::abs(p(j)), 1.0);
        Eigen::VectorXd pp = p, pm = p;
        pp(j) += h;
        pm(j) -= h;
        const double fd = (model.eval(x, pp) - model.eval(x, pm)) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(analytic(j)), std::abs(fd)});
        CHECK(std::abs(analytic(j) - fd) <= 1e-6 * scale);
    }
}

} // namespace

TEST_CASE("analytic jacobians match central finite differences") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int i = 0; i < 50; ++i) {
        LorentzianModel lor{2};
        Eigen::VectorXd p(6);
        p << u(rng), -u(rng), 5.0 * u(rng), 5.0 * u(rng) + 4.0, u(rng), 0.3 * u(rng);
        check_jacobian(lor, p, 4.0 * u(rng));

        for (CosineDecay decay :
             {CosineDecay::free_decay, CosineDecay::fixed_t1e, CosineDecay::stretched}) {
            DecayingCosineModel cos_model{decay, BaselineKind::linear, 80.0};
            Eigen::VectorXd q(6);
            q << u(rng), u(rng), 0.3 * u(rng), 30.0 * u(rng), 0.01 * u(rng), u(rng);
            check_jacobian(cos_model, q, 10.0 * u(rng));
        }

        ExponentialModel exp_model;
        Eigen::VectorXd r(3);
        r << u(rng), 40.0 * u(rng), 0.2 * u(rng);
        check_jacobian(exp_model, r, 20.0 * u(rng));
    }
}

TEST_CASE("fit errors scale with the noise and vanish without it") {
    std::mt19937 rng(31);
    const std::vector<double> x = linspace(5.0, 17.0, 121);
    const auto fit_dev = [&](double sigma) {
        std::normal_distribution<double> noise(0.0, sigma);
        double dev = 0.0;
        for (int k = 0; k < 8; ++k) {
            std::vector<double> y;
            for (double xi : x) {
                y.push_back(lorentz(xi, 1.0, 0.4, 11.0, 0.0) + (sigma > 0 ? noise(rng) : 0.0));
            }
            const FitResult fit =
                fit_lorentzian(make_trace(x, y, XKind::frequency, sigma), 1);
            dev += std::abs(fit.value("f1") - 11.0);
        }
        return dev / 8.0;
    };
    const double e0 = fit_dev(0.0);
    const double e1 = fit_dev(0.005);
    const double e2 = fit_dev(0.05);
    CHECK(e0 < 1e-9);
    CHECK(e1 < e2);
    CHECK(e2 / e1 == doctest::Approx(10.0).epsilon(0.8)); // ~linear in sigma
}

TEST_CASE("levmar reports non-convergence at the iteration cap") {
    // A stiff oscillatory residual with a hopeless tolerance and tiny budget.
    const auto residual = [](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        r.resize(2);
        r(0) = std::sin(50.0 * p(0)) + 0.1 * p(0);
        r(1) = std::cos(30.0 * p(0)) + 0.2;
    };
    const auto jacobian = [](const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
        jac.resize(2, 1);
        jac(0, 0) = 50.0 * std::cos(50.0 * p(0)) + 0.1;
        jac(1, 0) = -30.0 * std::sin(30.0 * p(0));
    };
    LevMarOptions opts;
    opts.max_iterations = 3;
    opts.gradient_tol = 0.0;
    opts.step_tol = 0.0;
    opts.residual_tol = 0.0;
    Eigen::VectorXd p0(1);
    p0 << 0.3;
    const LevMarResult res = levmar(residual, jacobian, p0, 2, opts);
    CHECK_FALSE(res.converged);
    CHECK(res.message == "iteration cap reached");
    CHECK(res.residual_norm > 0.0);
}

// ---------------------------------------------------------------------------
// Power spectral density
// ---------------------------------------------------------------------------

TEST_CASE("psd: pure cosine peaks in the right bin") {
    const double f0 = 0.070; // MHz
    const std::vector<double> x = linspace(0.0, 100.0, 256);
    std::vector<double> y;
    for (double t : x) y.push_back(std::cos(2.0 * kPi * f0 * t));
    const SignalTrace psd = fft_psd(make_trace(x, y));
    size_t best = 1;
    for (size_t k = 1; k < psd.size(); ++k) {
        if (psd.y[k] > psd.y[best]) best = k;
    }
    const double bin = psd.x[1] - psd.x[0];
    CHECK(std::abs(psd.x[best] - f0) <= bin);
    CHECK(psd.y[best] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(psd.x_kind == XKind::frequency);
}

TEST_CASE("psd: linear background subtraction leaves the peak in place") {
    const double f0 = 0.047;
    const std::vector<double> x = linspace(0.0, 120.0, 240);
    std::vector<double> clean, sloped;
    for (double t : x) {
        const double c = std::cos(2.0 * kPi * f0 * t);
        clean.push_back(c);
        sloped.push_back(c + 0.01 * t - 0.3);
    }
    const SignalTrace a = fft_psd(make_trace(x, clean));
    const SignalTrace b = fft_psd(make_trace(x, sloped), PsdBackground::linear_subtract);
    size_t pa = 1, pb = 1;
    for (size_t k = 1; k < a.size(); ++k) {
        if (a.y[k] > a.y[pa]) pa = k;
        if (b.y[k] > b.y[pb]) pb = k;
    }
    CHECK(pa == pb);
}

TEST_CASE("psd: two traces with equal coupling overlap") {
    // Same oscillation frequency, different amplitude/phase details.
    const double f0 = 0.035;
    const std::vector<double> x = linspace(0.0, 120.0, 200);
    std::vector<double> y1, y2;
    for (double t : x) {
        y1.push_back(0.25 * (1.0 + std::cos(2.0 * kPi * f0 * t)) * std::exp(-t / 300.0));
        y2.push_back(0.20 * (1.0 + std::cos(2.0 * kPi * f0 * t + 0.1)) * std::exp(-t / 250.0));
    }
    const SignalTrace a = fft_psd(make_trace(x, y1), PsdBackground::linear_subtract);
    const SignalTrace b = fft_psd(make_trace(x, y2), PsdBackground::linear_subtract);
    double gap = 0.0;
    for (size_t k = 1; k < a.size(); ++k) {
        gap = std::max(gap, std::abs(a.y[k] - b.y[k]));
    }
    CHECK(gap < 0.1);
}

TEST_CASE("psd: non-uniform grids are resampled; tiny traces are rejected") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    const double f0 = 0.08;
    std::vector<double> x, y;
    for (int i = 0; i < 128; ++i) {
        const double t = i * 1.0 + (i > 0 && i < 127 ? jitter(rng) : 0.0);
        x.push_back(t);
        y.push_back(std::cos(2.0 * kPi * f0 * t));
    }
    const SignalTrace psd = fft_psd(make_trace(x, y));
    size_t best = 1;
    for (size_t k = 1; k < psd.size(); ++k) {
        if (psd.y[k] > psd.y[best]) best = k;
    }
    CHECK(std::abs(psd.x[best] - f0) <= 2.0 * (psd.x[1] - psd.x[0]));

    CHECK_THROWS_AS(fft_psd(make_trace(linspace(0, 6, 7), std::vector<double>(7, 1.0))),
                    ValidationError);
}
