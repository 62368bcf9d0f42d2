#include "dsrfoc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dsrfoc/io.hpp"
#include "dsrfoc/metrics.hpp"
#include "dsrfoc/transforms.hpp"

namespace dsrfoc {

namespace {

constexpr int kSubsteps = 16;
constexpr double kRpmToMechRad = 2.0 * M_PI / 60.0;

double profile_interp_linear(const std::vector<std::pair<double, double>>& pts, double t) {
    if (pts.empty()) return 0.0;
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (t <= pts[i].first) {
            const auto [t0, v0] = pts[i - 1];
            const auto [t1, v1] = pts[i];
            if (t1 == t0) return v1;
            return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
    }
    return pts.back().second;
}

double profile_step(const std::vector<std::pair<double, double>>& pts, double t) {
    double v = 0.0;
    for (const auto& [ti, vi] : pts) {
        if (ti > t) break;
        v = vi;
    }
    return v;
}

void check_profile_sorted(const std::vector<std::pair<double, double>>& pts, double duration,
                          const char* what) {
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& [t, v] : pts) {
        if (!(t >= 0.0) || !(t <= duration))
            throw std::invalid_argument(std::string(what) + ": breakpoint time outside [0, duration]");
        if (!(t >= prev)) throw std::invalid_argument(std::string(what) + ": times not sorted");
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
        prev = t;
    }
}

// Per-scenario controller stack; one instance per run keeps everything
// deterministic and value-local.
class ControlStack {
public:
    explicit ControlStack(const Scenario& sc)
        : sc_(sc),
          params_(sc.machine),
          current_gains_(tune_current_loops(params_, sc.control.current_bw_hz)),
          outer_gains_(tune_outer_loops(params_, sc.control.speed_bw_hz, sc.control.iq_limit,
                                        sc.flux_ref)) {
        outer_gains_.flux_trim = sc.control.flux_trim;
        if (sc.controller == "pi") {
            use_dsr_ = false;
        } else if (sc.controller == "dsr") {
            use_dsr_ = true;
            law_ = DsrControlLaw::canonical();
        } else {
            use_dsr_ = true;
            law_ = DsrControlLaw::load(sc.controller);
        }
    }

    struct StepDecision {
        CurrentRefs refs;
        SlipAngle slip;
        ControllerOutput raw;
        ControllerOutput applied;
        ControllerInput features;
    };

    /// One control period: outer loops, feature integration, current control.
    /// `iqs_ref_override` bypasses the speed loop (decoupling experiment).
    StepDecision update(double t, const MachineState& m,
                        std::optional<double> iqs_ref_override) {
        const double Ts = params_.Ts;
        StepDecision d;

        const double omega_ref =
            sc_.speed_rpm_at(t) * kRpmToMechRad * static_cast<double>(params_.P);
        d.refs = outer_loops(omega_ref, m.omega_r, sc_.flux_ref, m.lam_dr, outer_state_,
                             outer_gains_, params_, Ts);
        if (iqs_ref_override) d.refs.iqs_ref = *iqs_ref_override;
        omega_ref_last_ = omega_ref;

        d.slip = slip_and_angle(d.refs.iqs_ref, m.lam_dr, m.omega_r, theta_ctrl_, params_, Ts);
        theta_ctrl_ = d.slip.theta_e;

        features_ = error_integrator(features_, d.refs.ids_ref - m.ids, d.refs.iqs_ref - m.iqs,
                                     Ts, sc_.control.x_int_max);
        d.features = features_;

        if (use_dsr_) {
            d.raw = law_->unlimited(features_);
        } else {
            Feedforward ff;
            if (sc_.control.feedforward)
                ff = decoupling_feedforward(d.slip.omega_e, m.ids, m.iqs, m.lam_dr, params_);
            const PiResult pd = pi_update(features_.x1, current_state_.d, current_gains_.d, Ts);
            const PiResult pq = pi_update(features_.x2, current_state_.q, current_gains_.q, Ts);
            current_state_.d = pd.state;
            current_state_.q = pq.state;
            d.raw = {pd.output + ff.vd, pq.output + ff.vq};
        }
        d.applied = limit_voltage(d.raw, params_.Vdc);
        return d;
    }

    double omega_ref_last() const { return omega_ref_last_; }
    const MachineParams& params() const { return params_; }

private:
    const Scenario& sc_;
    MachineParams params_;
    CurrentLoopGains current_gains_;
    OuterLoopGains outer_gains_;
    OuterLoopState outer_state_;
    CurrentLoopState current_state_;
    ControllerInput features_;
    double theta_ctrl_ = 0.0;
    double omega_ref_last_ = 0.0;
    bool use_dsr_ = false;
    std::optional<DsrControlLaw> law_;
};

TimePoint make_point(double t, const MachineState& m, const ControlStack::StepDecision& d,
                     double omega_ref, double T_load, double Te) {
    TimePoint p;
    p.t = t;
    p.omega_ref = omega_ref;
    p.omega_r = m.omega_r;
    p.ids_ref = d.refs.ids_ref;
    p.ids = m.ids;
    p.iqs_ref = d.refs.iqs_ref;
    p.iqs = m.iqs;
    p.lam_dr = m.lam_dr;
    p.vd_ref = d.applied.vd_ref;
    p.vq_ref = d.applied.vq_ref;
    p.Te = Te;
    p.T_load = T_load;
    p.x1 = d.features.x1;
    p.x2 = d.features.x2;
    p.x3 = d.features.x3;
    p.x4 = d.features.x4;
    p.theta_e = m.theta_e;
    p.omega_e = d.slip.omega_e;
    p.vd_raw = d.raw.vd_ref;
    p.vq_raw = d.raw.vq_ref;
    return p;
}

void check_point_finite(const TimePoint& p) {
    const double vals[] = {p.omega_ref, p.ids_ref, p.iqs_ref, p.vd_ref, p.vq_ref,
                           p.Te,        p.x1,      p.x2,      p.x3,     p.x4};
    for (double v : vals)
        if (!std::isfinite(v))
            throw SimulationError("non-finite control quantity at t = " + std::to_string(p.t));
}

// Shared closed-loop driver; `on_point` sees every control-step record.
template <typename OnPoint>
void simulate(const Scenario& sc, OnPoint&& on_point) {
    sc.validate();
    ControlStack stack(sc);
    const MachineParams& p = stack.params();
    const double Ts = p.Ts;
    const auto steps = static_cast<long>(std::llround(sc.duration / Ts));
    const double h = Ts / kSubsteps;

    MachineState m;  // zero initial state
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * Ts;
        const double T_load = sc.load_at(t);

        const auto decision = stack.update(t, m, std::nullopt);

        const double Te = torque(m, p);
        TimePoint point =
            make_point(t, m, decision, stack.omega_ref_last(), T_load, Te);
        check_point_finite(point);
        on_point(point);

        MachineInput input;
        input.vds = decision.applied.vd_ref;
        input.vqs = decision.applied.vq_ref;
        input.omega_e = decision.slip.omega_e;
        input.T_load = T_load;
        try {
            for (int s = 0; s < kSubsteps; ++s) m = step(m, input, p, h);
        } catch (const SimulationError& err) {
            throw SimulationError(std::string(err.what()) + " at t = " + std::to_string(t));
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario

void Scenario::validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be > 0");
    machine.validate();
    check_profile_sorted(speed_profile, duration, "speed_profile");
    check_profile_sorted(load_profile, duration, "load_profile");
    if (!(flux_ref > 0.0)) throw std::invalid_argument("scenario: flux_ref must be > 0");
    if (!(control.current_bw_hz > 0.0) || !(control.speed_bw_hz > 0.0))
        throw std::invalid_argument("scenario: loop bandwidths must be > 0");
    if (!(control.iq_limit > 0.0)) throw std::invalid_argument("scenario: iq_limit must be > 0");
    if (!(control.x_int_max > 0.0))
        throw std::invalid_argument("scenario: x_int_max must be > 0");
}

double Scenario::speed_rpm_at(double t) const { return profile_interp_linear(speed_profile, t); }

double Scenario::load_at(double t) const { return profile_step(load_profile, t); }

Scenario Scenario::from_file(const std::filesystem::path& path) {
    Scenario sc = from_json_text(io::read_file(path));
    if (sc.name == "scenario") sc.name = path.stem().string();
    return sc;
}

Scenario Scenario::from_json_text(std::string_view json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);

    const std::vector<std::string> known{"name",     "duration",  "speed_profile",
                                         "load_profile", "flux_ref", "controller",
                                         "machine",  "control",   "seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("scenario: unknown key '" + key + "'");
    }

    Scenario sc;
    sc.name = j.value("name", sc.name);
    sc.duration = j.at("duration").get<double>();
    for (const auto& bp : j.value("speed_profile", nlohmann::json::array()))
        sc.speed_profile.emplace_back(bp.at(0).get<double>(), bp.at(1).get<double>());
    for (const auto& bp : j.value("load_profile", nlohmann::json::array()))
        sc.load_profile.emplace_back(bp.at(0).get<double>(), bp.at(1).get<double>());
    sc.flux_ref = j.value("flux_ref", sc.flux_ref);
    sc.controller = j.value("controller", sc.controller);
    sc.seed = j.value("seed", sc.seed);

    if (j.contains("machine")) {
        MachineParams& m = sc.machine;
        bool lsigma_given = false;
        bool ts_given = false;
        for (const auto& [key, value] : j.at("machine").items()) {
            const double v = value.get<double>();
            if (key == "Rs") m.Rs = v;
            else if (key == "Rr") m.Rr = v;
            else if (key == "Ls") m.Ls = v;
            else if (key == "Lr") m.Lr = v;
            else if (key == "Lm") m.Lm = v;
            else if (key == "Lsigma") { m.Lsigma = v; lsigma_given = true; }
            else if (key == "P") m.P = value.get<int>();
            else if (key == "J") m.J = v;
            else if (key == "B") m.B = v;
            else if (key == "Vdc") m.Vdc = v;
            else if (key == "Fs") m.Fs = v;
            else if (key == "Ts") { m.Ts = v; ts_given = true; }
            else throw std::runtime_error("scenario: unknown machine key '" + key + "'");
        }
        if (!lsigma_given) m.Lsigma = m.Ls - m.Lm * m.Lm / m.Lr;
        if (!ts_given) m.Ts = 1.0 / m.Fs;
    }

    if (j.contains("control")) {
        ControlSettings& c = sc.control;
        for (const auto& [key, value] : j.at("control").items()) {
            if (key == "current_bw_hz") c.current_bw_hz = value.get<double>();
            else if (key == "speed_bw_hz") c.speed_bw_hz = value.get<double>();
            else if (key == "iq_limit") c.iq_limit = value.get<double>();
            else if (key == "feedforward") c.feedforward = value.get<bool>();
            else if (key == "flux_trim") c.flux_trim = value.get<bool>();
            else if (key == "x_int_max") c.x_int_max = value.get<double>();
            else throw std::runtime_error("scenario: unknown control key '" + key + "'");
        }
    }

    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Timeseries and reports

std::string Timeseries::to_csv() const {
    std::string out = kCsvHeader;
    out += '\n';
    for (const TimePoint& p : points) {
        const double cols[] = {p.t,  p.omega_ref, p.omega_r, p.ids_ref, p.ids, p.iqs_ref,
                               p.iqs, p.lam_dr,   p.vd_ref,  p.vq_ref,  p.Te,  p.T_load,
                               p.x1, p.x2,        p.x3,      p.x4};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            out += io::format_double(cols[i]);
            out += (i + 1 == std::size(cols)) ? '\n' : ',';
        }
    }
    return out;
}

void Timeseries::write_csv(const std::filesystem::path& path) const {
    io::atomic_write(path, to_csv());
}

std::string ComparisonReport::to_csv() const {
    std::string out = kCsvHeader;
    out += '\n';
    for (const ComparisonRow& r : rows) {
        out += r.controller + ',' + io::format_double(r.axis_d_rmse) + ',' +
               io::format_double(r.axis_q_rmse) + ',' + io::format_double(r.thd) + ',' +
               io::format_double(r.rms_ia) + ',' + io::format_double(r.pkpk_err) + '\n';
    }
    return out;
}

void ComparisonReport::write_csv(const std::filesystem::path& path) const {
    io::atomic_write(path, to_csv());
}

// ---------------------------------------------------------------------------
// Drivers

Timeseries run_scenario(const Scenario& sc) {
    Timeseries ts;
    const auto expected = static_cast<std::size_t>(std::llround(sc.duration / sc.machine.Ts));
    ts.points.reserve(expected);
    simulate(sc, [&ts](const TimePoint& p) { ts.points.push_back(p); });
    return ts;
}

ComparisonReport compare(const Scenario& base, const std::vector<std::string>& controllers) {
    if (controllers.empty()) throw std::invalid_argument("compare: empty controller list");

    ComparisonReport report;
    for (const std::string& ctrl : controllers) {
        Scenario sc = base;
        sc.controller = ctrl;
        const Timeseries ts = run_scenario(sc);
        if (ts.points.empty()) throw std::invalid_argument("compare: empty simulation");

        // steady-state fundamental from the trailing 0.2 s of omega_e
        const double Ts = sc.machine.Ts;
        const std::size_t n = ts.points.size();
        const auto tail02 = std::min<std::size_t>(n, static_cast<std::size_t>(0.2 / Ts));
        double omega_acc = 0.0;
        for (std::size_t i = n - tail02; i < n; ++i) omega_acc += ts.points[i].omega_e;
        const double f0 = omega_acc / static_cast<double>(tail02) / (2.0 * M_PI);
        if (!(f0 > 0.0))
            throw std::runtime_error("compare: non-positive fundamental at steady state");

        auto window = static_cast<std::size_t>(std::llround(kSteadyPeriods / f0 / Ts));
        window = std::min(window, n);
        const std::size_t begin = n - window;

        std::vector<double> ids_ref, ids, iqs_ref, iqs, ia_ref, ia_meas;
        for (std::size_t i = begin; i < n; ++i) {
            const TimePoint& p = ts.points[i];
            ids_ref.push_back(p.ids_ref);
            ids.push_back(p.ids);
            iqs_ref.push_back(p.iqs_ref);
            iqs.push_back(p.iqs);
            ia_ref.push_back(inverse_park({p.ids_ref, p.iqs_ref}, p.theta_e)[0]);
            ia_meas.push_back(inverse_park({p.ids, p.iqs}, p.theta_e)[0]);
        }

        ComparisonRow row;
        row.controller = ctrl;
        row.axis_d_rmse = tracking_metrics(ids_ref, ids).rmse;
        row.axis_q_rmse = tracking_metrics(iqs_ref, iqs).rmse;
        const TrackingStats phase = tracking_metrics(ia_ref, ia_meas);
        row.rms_ia = phase.rms_measured;
        row.pkpk_err = phase.peak_to_peak_error;
        // harmonic count limited by Nyquist at this operating point's fundamental
        const int n_harm = std::max(
            1, std::min(kThdHarmonics,
                        static_cast<int>(std::floor(0.5 / (Ts * f0))) - 1));
        row.thd = thd({ia_meas, 1.0 / Ts, f0}, n_harm);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::pair<dsr::Dataset, dsr::Dataset> generate_dataset(const std::vector<Scenario>& scenarios) {
    dsr::Dataset vd, vq;
    std::string meta;
    for (const Scenario& base : scenarios) {
        Scenario sc = base;
        sc.controller = "pi";
        simulate(sc, [&](const TimePoint& p) {
            vd.rows.push_back({p.x1, p.x2, p.x3, p.x4, p.vd_raw});
            vq.rows.push_back({p.x1, p.x2, p.x3, p.x4, p.vq_raw});
        });
        if (!meta.empty()) meta += ';';
        meta += sc.name;
    }
    vd.source_meta = "pi:" + meta;
    vq.source_meta = "pi:" + meta;
    vd.validate();
    vq.validate();
    return {std::move(vd), std::move(vq)};
}

DecouplingResult decoupling_test(const Scenario& sc, double step_time, double step_factor,
                                 double settle_window) {
    if (!(step_time > 0.0) || !(step_time < sc.duration))
        throw std::invalid_argument("decoupling_test: step_time outside scenario");

    // pass 1: find the pre-step steady iqs_ref and ids level
    double iqs_ref_pre = 0.0;
    double ids_acc = 0.0;
    std::size_t ids_count = 0;
    const double pre_window = std::min(0.1, step_time / 2.0);
    simulate(sc, [&](const TimePoint& p) {
        if (p.t <= step_time) iqs_ref_pre = p.iqs_ref;
        if (p.t > step_time - pre_window && p.t <= step_time) {
            ids_acc += p.ids;
            ++ids_count;
        }
    });
    if (ids_count == 0) throw std::invalid_argument("decoupling_test: empty pre-step window");

    DecouplingResult result;
    result.ids_steady = ids_acc / static_cast<double>(ids_count);

    // pass 2: hold the stepped torque-current reference from step_time onward,
    // shaft clamped at its pre-step speed so only the electrical coupling acts
    sc.validate();
    ControlStack stack(sc);
    const MachineParams& p = stack.params();
    const double Ts = p.Ts;
    const auto steps = static_cast<long>(std::llround(sc.duration / Ts));
    const double h = Ts / kSubsteps;
    const double iqs_ref_stepped = iqs_ref_pre * step_factor;

    MachineState m;
    bool clamped = false;
    double omega_hold = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * Ts;
        const bool stepped = t > step_time;
        if (stepped && !clamped) {
            omega_hold = m.omega_r;
            clamped = true;
        }

        std::optional<double> override_val;
        if (stepped) override_val = iqs_ref_stepped;
        const auto decision = stack.update(t, m, override_val);

        if (stepped) {
            const double dev = std::abs(m.ids - result.ids_steady);
            result.max_deviation = std::max(result.max_deviation, dev);
            if (t > step_time + settle_window)
                result.settled_deviation = std::max(result.settled_deviation, dev);
        }

        MachineInput input;
        input.vds = decision.applied.vd_ref;
        input.vqs = decision.applied.vq_ref;
        input.omega_e = decision.slip.omega_e;
        input.T_load = sc.load_at(t);
        for (int s = 0; s < kSubsteps; ++s) m = step(m, input, p, h);
        if (clamped) m.omega_r = omega_hold;
    }
    return result;
}

}  // namespace dsrfoc
