#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dsrfoc/pi.hpp"
#include "dsrfoc/transforms.hpp"
#include "test_util.hpp"

using namespace dsrfoc;

namespace {

std::array<double, 3> balanced(double amplitude, double phase) {
    constexpr double k = 2.0943951023931953;
    return {amplitude * std::cos(phase), amplitude * std::cos(phase - k),
            amplitude * std::cos(phase + k)};
}

}  // namespace

TEST_CASE("park aligns a phase-a-peak set to the d-axis at theta = 0") {
    const DqPair dq = park(balanced(1.0, 0.0), 0.0);
    CHECK(dq.d == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dq.q == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("park at theta = pi/2 rotates the same set to (0, -1)") {
    const DqPair dq = park(balanced(1.0, 0.0), M_PI / 2.0);
    CHECK(dq.d == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(dq.q == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("park / inverse_park round trip on balanced sets") {
    TestRng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const double amp = rng.uniform(0.1, 40.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double theta = rng.uniform(-10.0, 10.0);
        const auto abc = balanced(amp, phase);
        const auto back = inverse_park(park(abc, theta), theta);
        for (int i = 0; i < 3; ++i)
            CHECK(back[i] == doctest::Approx(abc[i]).epsilon(1e-12).scale(amp));
    }
}

TEST_CASE("pi: pure proportional") {
    const PiGains g{1.5, 0.0, -100.0, 100.0};
    const PiResult r = pi_update(2.0, {}, g, 1e-3);
    CHECK(r.output == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.state.integ == 0.0);
}

TEST_CASE("pi: integral accumulation over 100 steps") {
    const PiGains g{0.0, 10.0, -100.0, 100.0};
    PiState st;
    double out = 0.0;
    for (int i = 0; i < 100; ++i) {
        const PiResult r = pi_update(1.0, st, g, 1e-3);
        st = r.state;
        out = r.output;
    }
    CHECK(st.integ == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pi: anti-windup freezes the integrator under saturation") {
    const PiGains g{2.0, 50.0, -0.5, 0.5};
    PiState st;
    for (int i = 0; i < 50; ++i) {
        const PiResult r = pi_update(1.0, st, g, 1e-3);
        CHECK(r.output == 0.5);
        CHECK(r.state.integ == st.integ);  // frozen in the saturated direction
        st = r.state;
    }
    CHECK(st.integ == 0.0);

    // a small error against the saturation sign unwinds the integrator
    const PiResult r = pi_update(-0.1, st, g, 1e-3);
    CHECK(r.state.integ < 0.0);
}

TEST_CASE("pi: |integ| non-increasing in the saturated direction") {
    const PiGains g{1.0, 20.0, -1.0, 1.0};
    PiState st{0.9};
    TestRng rng(19);
    for (int i = 0; i < 200; ++i) {
        const double e = rng.uniform(0.5, 3.0);  // persistent positive error
        const PiResult r = pi_update(e, st, g, 1e-3);
        if (r.output == g.out_max) CHECK(r.state.integ <= st.integ + 1e-15);
        st = r.state;
    }
}

TEST_CASE("pi rejects non-positive Ts") {
    CHECK_THROWS_AS(pi_update(1.0, {}, {1.0, 1.0, -1.0, 1.0}, 0.0), std::invalid_argument);
}
