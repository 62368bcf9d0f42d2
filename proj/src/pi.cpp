#include "dsrfoc/pi.hpp"

#include <algorithm>
#include <stdexcept>

namespace dsrfoc {

PiResult pi_update(double e, PiState st, const PiGains& g, double Ts) {
    if (!(Ts > 0.0)) throw std::invalid_argument("pi_update: Ts must be > 0");

    const double increment = g.ki * Ts * e;
    const double candidate = g.kp * e + st.integ + increment;
    const double output = std::clamp(candidate, g.out_min, g.out_max);

    const bool windup = (candidate > g.out_max && e > 0.0) ||
                        (candidate < g.out_min && e < 0.0);
    if (!windup) st.integ += increment;

    return {output, st};
}

}  // namespace dsrfoc
