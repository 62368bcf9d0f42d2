#pragma once

#include <filesystem>
#include <string>

#include "dsrfoc/expr.hpp"
#include "dsrfoc/machine.hpp"
#include "dsrfoc/pi.hpp"

namespace dsrfoc {

/// Current errors and their running integrals in the rotating frame:
/// x1 = ids_ref - ids, x2 = iqs_ref - iqs, x3 = integral of x1, x4 = integral of x2.
struct ControllerInput {
    double x1 = 0.0;  // [A]
    double x2 = 0.0;  // [A]
    double x3 = 0.0;  // [A s]
    double x4 = 0.0;  // [A s]
};

struct ControllerOutput {
    double vd_ref = 0.0;  // [V]
    double vq_ref = 0.0;  // [V]
};

/// Integral feature clamp; keeps x3/x4 inside the envelope seen in training.
inline constexpr double kIntegralClamp = 50.0;

/// Rotor flux magnitude below which the slip calculation is disabled.
inline constexpr double kFluxFloor = 1e-3;

/// Magnitude clamp to the SVPWM linear region radius Vdc/sqrt(3), preserving
/// the vector angle.
ControllerOutput limit_voltage(ControllerOutput v, double vdc);

/// Rectangle-rule accumulation of the error features: x1/x2 are replaced with
/// the fresh errors, x3/x4 accumulate e*Ts and clamp at +/-x_int_max.
ControllerInput error_integrator(const ControllerInput& prev, double e_d, double e_q,
                                 double Ts, double x_int_max = kIntegralClamp);

struct SlipAngle {
    double omega_e = 0.0;  // [rad/s]
    double theta_e = 0.0;  // [rad], wrapped to [0, 2pi)
};

/// Indirect rotor-field orientation: slip = (Lm*Rr/(Lr*lam_dr)) * iqs_ref when
/// |lam_dr| exceeds lam_floor, else zero; the frame angle advances by omega_e*Ts.
SlipAngle slip_and_angle(double iqs_ref, double lam_dr_est, double omega_r,
                         double theta_prev, const MachineParams& params, double Ts,
                         double lam_floor = kFluxFloor);

/// Cross-coupling decoupling terms added to the PI current controller output.
struct Feedforward {
    double vd = 0.0;
    double vq = 0.0;
};

/// vd_ff = -we*Lsigma*iqs, vq_ff = we*Lsigma*ids + we*(Lm/Lr)*lam_dr.
Feedforward decoupling_feedforward(double omega_e, double ids, double iqs,
                                   double lam_dr, const MachineParams& params);

struct CurrentLoopState {
    PiState d;
    PiState q;
};

struct CurrentLoopGains {
    PiGains d;
    PiGains q;
};

/// Pole-placement tuning of the inner current loops to the given bandwidth:
/// kp = Lsigma*wbw, ki = (Rs + Rr*Lm^2/Lr^2)*wbw, per-axis bounds +/-Vdc/sqrt(3).
CurrentLoopGains tune_current_loops(const MachineParams& params, double bandwidth_hz);

/// Per-axis PI on (x1, x2) plus feedforward, then the circle voltage limiter.
ControllerOutput pi_current_controller(const ControllerInput& inp, CurrentLoopState& st,
                                       const CurrentLoopGains& gains, const Feedforward& ff,
                                       double Ts, double vdc);

/// Symbolic current control law: one expression per axis over (x1..x4),
/// evaluated through the expression engine so trained laws are drop-in
/// replacements. Output passes the same circle limiter as the PI path.
class DsrControlLaw {
public:
    DsrControlLaw(expr::Expression vd, expr::Expression vq);

    /// The published law shipped with the repository.
    static DsrControlLaw canonical();

    /// Loads from a directory containing vd.expr / vq.expr (optionally a
    /// metadata.json sidecar with feature scaling), or from a single file with
    /// exactly two expression lines (vd then vq).
    static DsrControlLaw load(const std::filesystem::path& path);

    ControllerOutput operator()(const ControllerInput& inp, double vdc) const;

    /// Raw law output before voltage limiting.
    ControllerOutput unlimited(const ControllerInput& inp) const;

    const expr::Expression& vd_law() const { return vd_; }
    const expr::Expression& vq_law() const { return vq_; }

private:
    expr::Expression vd_;
    expr::Expression vq_;
};

/// Canonical law text, identical to data/expressions/eq4_vd.expr / eq4_vq.expr.
extern const char* const kCanonicalVdText;
extern const char* const kCanonicalVqText;

struct OuterLoopGains {
    PiGains speed;            // speed error [rad/s electrical] -> iqs_ref [A]
    PiGains flux;             // flux error [Wb] -> ids_ref trim [A]
    bool flux_trim = false;   // when false ids_ref is the pure lam_ref/Lm feedforward
};

struct OuterLoopState {
    PiState speed;
    PiState flux;
};

struct CurrentRefs {
    double ids_ref = 0.0;
    double iqs_ref = 0.0;
};

/// Speed loop tuned to bandwidth_hz against the rigid-body model, torque
/// current saturated at +/-iq_limit. Flux trim gains are conservative and only
/// active when enabled.
OuterLoopGains tune_outer_loops(const MachineParams& params, double bandwidth_hz,
                                double iq_limit, double lam_ref);

/// iqs_ref from the speed PI, ids_ref = lam_ref/Lm plus the optional flux trim.
CurrentRefs outer_loops(double omega_ref, double omega_r, double lam_ref,
                        double lam_dr_est, OuterLoopState& st, const OuterLoopGains& gains,
                        const MachineParams& params, double Ts);

}  // namespace dsrfoc
