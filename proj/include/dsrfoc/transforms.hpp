#pragma once

#include <array>

namespace dsrfoc {

struct DqPair {
    double d = 0.0;
    double q = 0.0;
};

/// Amplitude-invariant (2/3-scaled) abc -> dq transform at frame angle theta.
DqPair park(const std::array<double, 3>& abc, double theta);

/// dq -> abc, inverse of park on balanced (zero-sequence-free) sets.
std::array<double, 3> inverse_park(const DqPair& dq, double theta);

}  // namespace dsrfoc
