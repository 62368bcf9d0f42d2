#include "dsrfoc/transforms.hpp"

#include <cmath>

namespace dsrfoc {

namespace {
constexpr double kTwoThirdsPi = 2.0943951023931954923;
}

DqPair park(const std::array<double, 3>& abc, double theta) {
    const double ca = std::cos(theta);
    const double cb = std::cos(theta - kTwoThirdsPi);
    const double cc = std::cos(theta + kTwoThirdsPi);
    const double sa = std::sin(theta);
    const double sb = std::sin(theta - kTwoThirdsPi);
    const double sc = std::sin(theta + kTwoThirdsPi);
    DqPair out;
    out.d = (2.0 / 3.0) * (abc[0] * ca + abc[1] * cb + abc[2] * cc);
    out.q = -(2.0 / 3.0) * (abc[0] * sa + abc[1] * sb + abc[2] * sc);
    return out;
}

std::array<double, 3> inverse_park(const DqPair& dq, double theta) {
    return {
        dq.d * std::cos(theta) - dq.q * std::sin(theta),
        dq.d * std::cos(theta - kTwoThirdsPi) - dq.q * std::sin(theta - kTwoThirdsPi),
        dq.d * std::cos(theta + kTwoThirdsPi) - dq.q * std::sin(theta + kTwoThirdsPi),
    };
}

}  // namespace dsrfoc
