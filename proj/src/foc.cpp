#include "dsrfoc/foc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dsrfoc {

namespace {
constexpr double kInvSqrt3 = 0.57735026918962576451;
}

const char* const kCanonicalVdText = "13*x1 - sin(x1 - x4)";
const char* const kCanonicalVqText =
    "12*x2 + x3 + 2*x4 + (x1*x1 + x1 - x2 - x4)*sin(x1) + sin(x1*(-x1 + 2*x3) - x2) + cos(2*x2)";

ControllerOutput limit_voltage(ControllerOutput v, double vdc) {
    const double vmax = vdc * kInvSqrt3;
    const double mag = std::hypot(v.vd_ref, v.vq_ref);
    if (mag > vmax) {
        const double scale = vmax / mag;
        v.vd_ref *= scale;
        v.vq_ref *= scale;
    }
    return v;
}

ControllerInput error_integrator(const ControllerInput& prev, double e_d, double e_q,
                                 double Ts, double x_int_max) {
    if (!(Ts > 0.0)) throw std::invalid_argument("error_integrator: Ts must be > 0");
    ControllerInput out;
    out.x1 = e_d;
    out.x2 = e_q;
    out.x3 = std::clamp(prev.x3 + e_d * Ts, -x_int_max, x_int_max);
    out.x4 = std::clamp(prev.x4 + e_q * Ts, -x_int_max, x_int_max);
    return out;
}

SlipAngle slip_and_angle(double iqs_ref, double lam_dr_est, double omega_r,
                         double theta_prev, const MachineParams& params, double Ts,
                         double lam_floor) {
    double omega_slip = 0.0;
    if (std::abs(lam_dr_est) > lam_floor)
        omega_slip = params.Lm * params.Rr / (params.Lr * lam_dr_est) * iqs_ref;
    SlipAngle out;
    out.omega_e = omega_r + omega_slip;
    out.theta_e = wrap_angle(theta_prev + out.omega_e * Ts);
    return out;
}

Feedforward decoupling_feedforward(double omega_e, double ids, double iqs,
                                   double lam_dr, const MachineParams& params) {
    Feedforward ff;
    ff.vd = -omega_e * params.Lsigma * iqs;
    ff.vq = omega_e * params.Lsigma * ids + omega_e * params.Lm / params.Lr * lam_dr;
    return ff;
}

CurrentLoopGains tune_current_loops(const MachineParams& params, double bandwidth_hz) {
    const double wbw = 2.0 * M_PI * bandwidth_hz;
    PiGains g;
    g.kp = params.Lsigma * wbw;
    g.ki = (params.Rs + params.Rr * params.Lm * params.Lm / (params.Lr * params.Lr)) * wbw;
    g.out_max = params.Vdc * kInvSqrt3;
    g.out_min = -g.out_max;
    return CurrentLoopGains{g, g};
}

ControllerOutput pi_current_controller(const ControllerInput& inp, CurrentLoopState& st,
                                       const CurrentLoopGains& gains, const Feedforward& ff,
                                       double Ts, double vdc) {
    const PiResult d = pi_update(inp.x1, st.d, gains.d, Ts);
    const PiResult q = pi_update(inp.x2, st.q, gains.q, Ts);
    st.d = d.state;
    st.q = q.state;
    return limit_voltage({d.output + ff.vd, q.output + ff.vq}, vdc);
}

DsrControlLaw::DsrControlLaw(expr::Expression vd, expr::Expression vq)
    : vd_(std::move(vd)), vq_(std::move(vq)) {
    if (!expr::arity_valid(vd_.tokens) || !expr::arity_valid(vq_.tokens))
        throw std::invalid_argument("DsrControlLaw: arity-invalid expression");
}

DsrControlLaw DsrControlLaw::canonical() {
    return DsrControlLaw(expr::parse(kCanonicalVdText), expr::parse(kCanonicalVqText));
}

DsrControlLaw DsrControlLaw::load(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    auto read_line_expr = [](const fs::path& file) {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot open expression file: " + file.string());
        std::string line;
        if (!std::getline(in, line) || line.empty())
            throw std::runtime_error("empty expression file: " + file.string());
        return expr::parse(line);
    };

    if (fs::is_directory(path)) {
        expr::Expression vd = read_line_expr(path / "vd.expr");
        expr::Expression vq = read_line_expr(path / "vq.expr");
        const fs::path meta_path = path / "metadata.json";
        if (fs::exists(meta_path)) {
            std::ifstream in(meta_path);
            nlohmann::json meta = nlohmann::json::parse(in);
            if (meta.contains("feature_scaling")) {
                expr::FeatureScaling fs_rec;
                const auto& sc = meta.at("feature_scaling");
                for (int i = 0; i < 4; ++i) {
                    fs_rec.offset[i] = sc.at("offset").at(i).get<double>();
                    fs_rec.scale[i] = sc.at("scale").at(i).get<double>();
                    if (fs_rec.scale[i] == 0.0)
                        throw std::runtime_error("feature_scaling: zero scale");
                }
                vd.meta = fs_rec;
                vq.meta = fs_rec;
            }
        }
        return DsrControlLaw(std::move(vd), std::move(vq));
    }

    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open expression file: " + path.string());
    std::string vd_line, vq_line;
    if (!std::getline(in, vd_line) || !std::getline(in, vq_line))
        throw std::runtime_error("expression file needs two lines (vd then vq): " +
                                 path.string());
    return DsrControlLaw(expr::parse(vd_line), expr::parse(vq_line));
}

ControllerOutput DsrControlLaw::unlimited(const ControllerInput& inp) const {
    const std::array<double, 4> x{inp.x1, inp.x2, inp.x3, inp.x4};
    return {expr::eval(vd_, x), expr::eval(vq_, x)};
}

ControllerOutput DsrControlLaw::operator()(const ControllerInput& inp, double vdc) const {
    return limit_voltage(unlimited(inp), vdc);
}

OuterLoopGains tune_outer_loops(const MachineParams& params, double bandwidth_hz,
                                double iq_limit, double lam_ref) {
    const double wbw = 2.0 * M_PI * bandwidth_hz;
    const double kt = 0.75 * params.P * params.Lm / params.Lr * lam_ref;  // N m per A
    OuterLoopGains g;
    g.speed.kp = params.J * wbw / (params.P * kt);
    g.speed.ki = g.speed.kp * wbw / 10.0;  // integral a decade below the crossover
    g.speed.out_max = iq_limit;
    g.speed.out_min = -iq_limit;
    g.flux.kp = 20.0;
    g.flux.ki = 200.0;
    g.flux.out_max = 0.25 * lam_ref / params.Lm;
    g.flux.out_min = -g.flux.out_max;
    g.flux_trim = false;
    return g;
}

CurrentRefs outer_loops(double omega_ref, double omega_r, double lam_ref,
                        double lam_dr_est, OuterLoopState& st, const OuterLoopGains& gains,
                        const MachineParams& params, double Ts) {
    CurrentRefs refs;

    const PiResult speed = pi_update(omega_ref - omega_r, st.speed, gains.speed, Ts);
    st.speed = speed.state;
    refs.iqs_ref = speed.output;

    refs.ids_ref = lam_ref / params.Lm;
    if (gains.flux_trim) {
        const PiResult flux = pi_update(lam_ref - lam_dr_est, st.flux, gains.flux, Ts);
        st.flux = flux.state;
        refs.ids_ref += flux.output;
    }
    return refs;
}

}  // namespace dsrfoc
