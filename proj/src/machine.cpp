#include "dsrfoc/machine.hpp"

#include <cmath>

namespace dsrfoc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool all_finite(const MachineState& s) {
    return std::isfinite(s.ids) && std::isfinite(s.iqs) && std::isfinite(s.lam_dr) &&
           std::isfinite(s.lam_qr) && std::isfinite(s.omega_r) && std::isfinite(s.theta_e);
}

bool all_finite(const MachineInput& u) {
    return std::isfinite(u.vds) && std::isfinite(u.vqs) && std::isfinite(u.omega_e) &&
           std::isfinite(u.T_load);
}

}  // namespace

MachineParams MachineParams::table1() {
    MachineParams p;
    p.Rs = 0.7025;
    p.Rr = 0.8783;
    p.Ls = 0.032;
    p.Lr = 0.032;
    p.Lm = 0.031;
    p.Lsigma = p.Ls - p.Lm * p.Lm / p.Lr;
    p.P = 2;
    p.J = 0.006;
    p.B = 0.0;
    p.Vdc = 311.0;
    p.Fs = 16000.0;
    p.Ts = 1.0 / p.Fs;
    return p;
}

void MachineParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(name) + " must be strictly positive");
    };
    positive(Rs, "Rs");
    positive(Rr, "Rr");
    positive(Ls, "Ls");
    positive(Lr, "Lr");
    positive(Lm, "Lm");
    positive(J, "J");
    positive(Vdc, "Vdc");
    positive(Fs, "Fs");
    positive(Ts, "Ts");
    if (!(B >= 0.0) || !std::isfinite(B))
        throw std::invalid_argument("B must be >= 0");
    if (P < 1) throw std::invalid_argument("P must be >= 1");
    if (Lm > std::min(Ls, Lr))
        throw std::invalid_argument("Lm must not exceed min(Ls, Lr)");
    const double expected = Ls - Lm * Lm / Lr;
    if (std::abs(Lsigma - expected) > 1e-9 * std::abs(expected))
        throw std::invalid_argument("Lsigma inconsistent with Ls - Lm^2/Lr");
}

double wrap_angle(double theta) {
    double w = theta - kTwoPi * std::floor(theta / kTwoPi);
    if (w >= kTwoPi) w -= kTwoPi;  // guards the floor rounding edge
    if (w < 0.0) w = 0.0;
    return w;
}

std::array<double, 4> electrical_derivative(const MachineState& state,
                                            const MachineInput& input,
                                            const MachineParams& params) {
    if (!all_finite(state) || !all_finite(input))
        throw std::domain_error("electrical_derivative: non-finite state or input");

    const double Lsig = params.Lsigma;
    const double gamma = (params.Rs + params.Rr * params.Lm * params.Lm / (params.Lr * params.Lr)) / Lsig;
    const double beta = params.Lm / (params.Lr * Lsig);   // flux coupling gain
    const double rtau = params.Rr / params.Lr;            // inverse rotor time constant
    const double we = input.omega_e;
    const double wr = state.omega_r;
    const double wsl = we - wr;

    std::array<double, 4> d;
    d[0] = -gamma * state.ids + we * state.iqs + beta * rtau * state.lam_dr +
           beta * wr * state.lam_qr + input.vds / Lsig;
    d[1] = -we * state.ids - gamma * state.iqs - beta * wr * state.lam_dr +
           beta * rtau * state.lam_qr + input.vqs / Lsig;
    d[2] = params.Rr * params.Lm / params.Lr * state.ids - rtau * state.lam_dr + wsl * state.lam_qr;
    d[3] = params.Rr * params.Lm / params.Lr * state.iqs - wsl * state.lam_dr - rtau * state.lam_qr;
    return d;
}

std::array<double, 2> fo_current_derivative(const MachineState& state,
                                            const MachineInput& input,
                                            const MachineParams& params) {
    if (!all_finite(state) || !all_finite(input))
        throw std::domain_error("fo_current_derivative: non-finite state or input");

    const double Lsig = params.Lsigma;
    const double gamma = (params.Rs + params.Rr * params.Lm * params.Lm / (params.Lr * params.Lr)) / Lsig;
    const double beta = params.Lm / (params.Lr * Lsig);
    const double rtau = params.Rr / params.Lr;

    std::array<double, 2> d;
    d[0] = -gamma * state.ids + input.omega_e * state.iqs + beta * rtau * state.lam_dr +
           input.vds / Lsig;
    d[1] = -gamma * state.iqs - input.omega_e * state.ids - beta * state.omega_r * state.lam_dr +
           input.vqs / Lsig;
    return d;
}

double torque(const MachineState& state, const MachineParams& params) {
    return 0.75 * params.P * params.Lm / params.Lr * state.lam_dr * state.iqs;
}

double mechanical_derivative(const MachineState& state, double Te,
                             const MachineInput& input, const MachineParams& params) {
    return params.P * (Te - input.T_load - params.B * state.omega_r / params.P) / params.J;
}

MachineState step(const MachineState& state, const MachineInput& input,
                  const MachineParams& params, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("step: h must be > 0");

    const std::array<double, 5> y0 = {state.ids, state.iqs, state.lam_dr, state.lam_qr,
                                      state.omega_r};
    auto deriv = [&](const std::array<double, 5>& y) {
        MachineState s = state;
        s.ids = y[0];
        s.iqs = y[1];
        s.lam_dr = y[2];
        s.lam_qr = y[3];
        s.omega_r = y[4];
        const auto de = electrical_derivative(s, input, params);
        const double Te = torque(s, params);
        return std::array<double, 5>{de[0], de[1], de[2], de[3],
                                     mechanical_derivative(s, Te, input, params)};
    };

    std::array<double, 5> y1;
    try {
        y1 = rk4_step(y0, h, deriv);
    } catch (const std::domain_error&) {
        // a stage evaluation overflowed before the result check could run
        throw SimulationError("integration diverged: non-finite intermediate state");
    }

    static const char* names[] = {"ids", "iqs", "lam_dr", "lam_qr", "omega_r"};
    for (std::size_t i = 0; i < y1.size(); ++i) {
        if (!std::isfinite(y1[i]))
            throw SimulationError(std::string("integration diverged: ") + names[i] +
                                  " is non-finite");
    }

    MachineState out = state;
    out.ids = y1[0];
    out.iqs = y1[1];
    out.lam_dr = y1[2];
    out.lam_qr = y1[3];
    out.omega_r = y1[4];
    out.theta_e = wrap_angle(state.theta_e + input.omega_e * h);
    return out;
}

}  // namespace dsrfoc
