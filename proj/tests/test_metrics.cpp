#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsrfoc/metrics.hpp"
#include "test_util.hpp"

using namespace dsrfoc;

namespace {

std::vector<double> sine(double amp, double f0, double fs, int periods, double phase = 0.0) {
    const auto n = static_cast<std::size_t>(std::llround(periods * fs / f0));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = amp * std::sin(2.0 * M_PI * f0 * static_cast<double>(i) / fs + phase);
    return out;
}

}  // namespace

TEST_CASE("pure sine has zero distortion") {
    const auto s = sine(2.5, 50.0, 8000.0, 10);
    CHECK(thd({s, 8000.0, 50.0}, 40) <= 1e-9);
}

TEST_CASE("known third harmonic gives its exact ratio") {
    auto s = sine(1.0, 50.0, 8000.0, 10);
    const auto h3 = sine(0.1, 150.0, 8000.0, 30, 0.4);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += h3[i];
    CHECK(thd({s, 8000.0, 50.0}, 40) == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("square wave distortion matches the odd-harmonic sum") {
    // sample near Nyquist for 200 harmonics so folding keeps the full tail power
    const double f0 = 1.0;
    const double fs = 404.0;
    const int periods = 8;
    std::vector<double> s(static_cast<std::size_t>(periods * 404));
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double frac = std::fmod((static_cast<double>(i) + 0.5) / 404.0, 1.0);
        s[i] = (frac < 0.5) ? 1.0 : -1.0;
    }
    const double measured = thd({s, fs, f0}, 200);

    // brute-force oracle: sqrt(sum over odd k >= 3 of 1/k^2)
    double acc = 0.0;
    for (long k = 3; k <= 200001; k += 2) acc += 1.0 / (static_cast<double>(k) * k);
    const double oracle = std::sqrt(acc);
    CHECK(oracle == doctest::Approx(std::sqrt(M_PI * M_PI / 8.0 - 1.0)).epsilon(1e-5));
    CHECK(std::abs(measured - 0.4834) < 1e-3);
    CHECK(std::abs(measured - oracle) < 1e-3);
}

TEST_CASE("thd is amplitude invariant") {
    auto s = sine(1.0, 50.0, 8000.0, 10);
    const auto h5 = sine(0.03, 250.0, 8000.0, 50, 1.1);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += h5[i];
    const double base = thd({s, 8000.0, 50.0}, 40);
    for (double c : {-3.0, 0.2, 1700.0}) {
        std::vector<double> scaled(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) scaled[i] = c * s[i];
        CHECK(std::abs(thd({scaled, 8000.0, 50.0}, 40) - base) < 1e-9);
    }
}

TEST_CASE("thd input validation") {
    const auto s = sine(1.0, 50.0, 8000.0, 10);
    CHECK_THROWS_AS(thd({s, 8000.0, 50.0}, 100), std::invalid_argument);  // Nyquist
    const auto tiny = sine(1.0, 50.0, 8000.0, 1);
    CHECK_THROWS_AS(thd({tiny, 8000.0, 50.0}, 10), std::invalid_argument);  // < 2 periods

    std::vector<double> zeros(1600, 0.0);
    CHECK_THROWS_AS(thd({zeros, 8000.0, 50.0}, 10), NoFundamentalError);

    const auto second_only = sine(1.0, 100.0, 8000.0, 20);
    CHECK_THROWS_AS(thd({second_only, 8000.0, 50.0}, 10), NoFundamentalError);
}

TEST_CASE("tracking metrics basics") {
    const std::vector<double> a{1.0, 2.0, -3.0, 0.5};
    const TrackingStats same = tracking_metrics(a, a);
    CHECK(same.rmse == 0.0);
    CHECK(same.peak_to_peak_error == 0.0);

    std::vector<double> shifted(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) shifted[i] = a[i] - 0.25;
    const TrackingStats off = tracking_metrics(a, shifted);
    CHECK(off.rmse == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(off.peak_to_peak_error == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    const auto s = sine(1.0, 50.0, 8000.0, 10);
    const std::vector<double> zeros(s.size(), 0.0);
    const TrackingStats rms = tracking_metrics(zeros, s);
    CHECK(rms.rms_measured == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));

    CHECK_THROWS_AS(tracking_metrics(a, s), std::invalid_argument);
    CHECK_THROWS_AS(tracking_metrics(std::vector<double>{}, std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("rmse satisfies the triangle inequality") {
    TestRng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> a(64), b(64), c(64);
        for (std::size_t i = 0; i < 64; ++i) {
            a[i] = rng.uniform(-5.0, 5.0);
            b[i] = rng.uniform(-5.0, 5.0);
            c[i] = rng.uniform(-5.0, 5.0);
        }
        const double ac = tracking_metrics(a, c).rmse;
        const double ab = tracking_metrics(a, b).rmse;
        const double bc = tracking_metrics(b, c).rmse;
        CHECK(ac <= ab + bc + 1e-12);
    }
}
