#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsrfoc/foc.hpp"
#include "dsrfoc/machine.hpp"
#include "dsrfoc/train.hpp"

namespace dsrfoc {

/// Harness knobs beyond the machine constants; every field has a JSON key in
/// the scenario "control" object.
struct ControlSettings {
    double current_bw_hz = 1000.0;
    double speed_bw_hz = 50.0;
    double iq_limit = 30.0;
    bool feedforward = true;   // PI decoupling terms
    bool flux_trim = false;    // flux PI on top of the lam_ref/Lm feedforward
    double x_int_max = kIntegralClamp;
};

/// Speed/load test profile plus controller selection. Speed breakpoints are
/// (time s, mechanical rpm) interpolated linearly; load breakpoints are
/// (time s, N m) held piecewise-constant.
struct Scenario {
    std::string name = "scenario";
    double duration = 0.0;
    std::vector<std::pair<double, double>> speed_profile;
    std::vector<std::pair<double, double>> load_profile;
    double flux_ref = 0.45;
    std::string controller = "pi";  // "pi" | "dsr" | expression file/dir path
    MachineParams machine = MachineParams::table1();
    ControlSettings control;
    std::uint64_t seed = 0;

    static Scenario from_file(const std::filesystem::path& path);
    static Scenario from_json_text(std::string_view json_text);
    void validate() const;

    double speed_rpm_at(double t) const;
    double load_at(double t) const;
};

/// One record per control step. The CSV schema serializes the first 16 fields;
/// the rest are in-memory diagnostics.
struct TimePoint {
    double t = 0.0;
    double omega_ref = 0.0;  // electrical rad/s
    double omega_r = 0.0;    // electrical rad/s
    double ids_ref = 0.0;
    double ids = 0.0;
    double iqs_ref = 0.0;
    double iqs = 0.0;
    double lam_dr = 0.0;
    double vd_ref = 0.0;  // applied (post-limiter)
    double vq_ref = 0.0;
    double Te = 0.0;
    double T_load = 0.0;
    double x1 = 0.0, x2 = 0.0, x3 = 0.0, x4 = 0.0;
    // diagnostics, not serialized
    double theta_e = 0.0;
    double omega_e = 0.0;
    double vd_raw = 0.0;  // controller output before the voltage limiter
    double vq_raw = 0.0;
};

struct Timeseries {
    static constexpr const char* kCsvHeader =
        "t,omega_ref,omega_r,ids_ref,ids,iqs_ref,iqs,lam_dr,vd_ref,vq_ref,Te,T_load,x1,x2,x3,x4";

    std::vector<TimePoint> points;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Simulates the cascaded loop at the machine's Ts with 16 RK4 substeps per
/// control period. Deterministic; throws SimulationError (with the failure
/// time) if the plant diverges.
Timeseries run_scenario(const Scenario& sc);

struct ComparisonRow {
    std::string controller;
    double axis_d_rmse = 0.0;
    double axis_q_rmse = 0.0;
    double thd = 0.0;
    double rms_ia = 0.0;
    double pkpk_err = 0.0;
};

struct ComparisonReport {
    static constexpr const char* kCsvHeader =
        "controller,axis_d_rmse,axis_q_rmse,thd,rms_ia,pkpk_err";

    std::vector<ComparisonRow> rows;

    std::string to_csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Number of trailing fundamental periods analyzed by compare().
inline constexpr int kSteadyPeriods = 10;
inline constexpr int kThdHarmonics = 40;

/// Runs the scenario once per controller with identical profiles and reports
/// steady-state tracking RMSE per axis, phase-a current THD at the synchronous
/// fundamental, and phase-a rms / peak-to-peak error over the same window.
ComparisonReport compare(const Scenario& base, const std::vector<std::string>& controllers);

/// Runs scenarios under the baseline PI current controller and logs
/// (x1..x4, pre-limiter voltage) per axis at every control step.
std::pair<dsr::Dataset, dsr::Dataset> generate_dataset(const std::vector<Scenario>& scenarios);

/// Torque-decoupling experiment: run closed-loop until step_time, then hold
/// iqs_ref at step_factor times its pre-step value (speed loop bypassed) with
/// the shaft speed clamped at its pre-step value, and watch the d-axis.
struct DecouplingResult {
    double ids_steady = 0.0;        // mean ids over the window before the step
    double max_deviation = 0.0;     // max |ids - ids_steady| after the step
    double settled_deviation = 0.0; // max |ids - ids_steady| beyond settle_window
};

DecouplingResult decoupling_test(const Scenario& sc, double step_time, double step_factor,
                                 double settle_window);

}  // namespace dsrfoc
