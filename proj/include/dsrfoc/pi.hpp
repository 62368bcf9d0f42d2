#pragma once

namespace dsrfoc {

struct PiGains {
    double kp = 0.0;
    double ki = 0.0;       // [1/s]
    double out_min = 0.0;
    double out_max = 0.0;
};

struct PiState {
    double integ = 0.0;
};

struct PiResult {
    double output = 0.0;
    PiState state;
};

/// Discrete PI with conditional anti-windup: the candidate kp*e + integ + ki*Ts*e
/// is clamped to [out_min, out_max]; the integrator takes the ki*Ts*e increment
/// only when the output is not saturated against the error sign.
PiResult pi_update(double e, PiState st, const PiGains& g, double Ts);

}  // namespace dsrfoc
