#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsrfoc {

/// Electrical and mechanical constants of the machine plus drive settings.
/// Lsigma is the total leakage referred to the stator, Ls - Lm^2/Lr.
struct MachineParams {
    double Rs = 0.0;      // stator resistance [ohm]
    double Rr = 0.0;      // rotor resistance [ohm]
    double Ls = 0.0;      // stator inductance [H]
    double Lr = 0.0;      // rotor inductance [H]
    double Lm = 0.0;      // mutual inductance [H]
    double Lsigma = 0.0;  // leakage inductance [H], Ls - Lm^2/Lr
    int P = 1;            // pole pairs
    double J = 0.0;       // rotor inertia [kg m^2]
    double B = 0.0;       // viscous friction [N m s/rad]
    double Vdc = 0.0;     // dc-link voltage [V]
    double Fs = 0.0;      // switching frequency [Hz]
    double Ts = 0.0;      // control sampling period [s]

    /// 3.7 kW machine used throughout the experiments.
    static MachineParams table1();

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Electromagnetic states of the d-q model plus mechanical speed and frame angle.
/// omega_r is the electrical rotor speed (P times the mechanical speed).
struct MachineState {
    double ids = 0.0;      // d-axis stator current [A]
    double iqs = 0.0;      // q-axis stator current [A]
    double lam_dr = 0.0;   // d-axis rotor flux linkage [Wb]
    double lam_qr = 0.0;   // q-axis rotor flux linkage [Wb]
    double omega_r = 0.0;  // electrical rotor speed [rad/s]
    double theta_e = 0.0;  // synchronous frame angle [rad], kept in [0, 2pi)
};

struct MachineInput {
    double vds = 0.0;      // d-axis stator voltage [V]
    double vqs = 0.0;      // q-axis stator voltage [V]
    double omega_e = 0.0;  // synchronous electrical speed [rad/s]
    double T_load = 0.0;   // load torque [N m]
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wraps an angle into [0, 2pi).
double wrap_angle(double theta);

/// Time derivatives of (ids, iqs, lam_dr, lam_qr) [A/s, A/s, Wb/s, Wb/s].
/// Throws std::domain_error if any state or input field is non-finite.
std::array<double, 4> electrical_derivative(const MachineState& state,
                                            const MachineInput& input,
                                            const MachineParams& params);

/// Reduced field-oriented current dynamics, valid when lam_qr = 0.
/// Agrees with rows 1-2 of electrical_derivative in that case.
std::array<double, 2> fo_current_derivative(const MachineState& state,
                                            const MachineInput& input,
                                            const MachineParams& params);

/// Electromagnetic torque Te = (3P/4)(Lm/Lr) lam_dr iqs [N m].
double torque(const MachineState& state, const MachineParams& params);

/// d(omega_r)/dt = P (Te - T_load - B omega_r / P) / J  [rad/s^2, electrical].
double mechanical_derivative(const MachineState& state, double Te,
                             const MachineInput& input, const MachineParams& params);

/// Classical RK4 update of y over one step h.
template <std::size_t N, typename Deriv>
std::array<double, N> rk4_step(const std::array<double, N>& y, double h, Deriv&& deriv) {
    std::array<double, N> k1 = deriv(y);
    std::array<double, N> tmp;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    std::array<double, N> k2 = deriv(tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    std::array<double, N> k3 = deriv(tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * k3[i];
    std::array<double, N> k4 = deriv(tmp);
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// One RK4 step of the five dynamic states with the input held constant
/// (zero-order hold); theta_e advances by omega_e * h and wraps to [0, 2pi).
/// Throws SimulationError naming the offending state if the result is non-finite.
MachineState step(const MachineState& state, const MachineInput& input,
                  const MachineParams& params, double h);

}  // namespace dsrfoc
