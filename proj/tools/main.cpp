#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsrfoc/harness.hpp"
#include "dsrfoc/io.hpp"
#include "dsrfoc/metrics.hpp"
#include "dsrfoc/train.hpp"
#include "dsrfoc/transforms.hpp"

namespace fs = std::filesystem;
using namespace dsrfoc;

namespace {

int cmd_sim(const std::string& scenario_path, const std::string& out_path) {
    const Scenario sc = Scenario::from_file(scenario_path);
    const Timeseries ts = run_scenario(sc);
    ts.write_csv(out_path);
    std::cerr << "wrote " << ts.points.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_compare(const std::string& scenario_path, const std::string& controllers_arg,
                const std::string& out_path) {
    std::vector<std::string> controllers;
    std::string token;
    std::stringstream ss(controllers_arg);
    while (std::getline(ss, token, ','))
        if (!token.empty()) controllers.push_back(token);

    const Scenario sc = Scenario::from_file(scenario_path);
    const ComparisonReport report = compare(sc, controllers);
    if (out_path.empty()) {
        std::cout << report.to_csv();
    } else {
        report.write_csv(out_path);
        std::cerr << "wrote " << report.rows.size() << " rows to " << out_path << "\n";
    }
    return 0;
}

int cmd_dataset(const std::string& scenario_dir, const std::string& out_prefix) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(scenario_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    if (files.empty())
        throw std::runtime_error("no scenario .json files in " + scenario_dir);
    std::sort(files.begin(), files.end());

    std::vector<Scenario> scenarios;
    scenarios.reserve(files.size());
    for (const auto& f : files) scenarios.push_back(Scenario::from_file(f));

    const auto [vd, vq] = generate_dataset(scenarios);
    vd.write_csv(out_prefix + "_vd.csv");
    vq.write_csv(out_prefix + "_vq.csv");
    std::cerr << "wrote " << vd.rows.size() << " rows per axis to " << out_prefix
              << "_{vd,vq}.csv\n";
    return 0;
}

int cmd_train(const std::string& dataset_prefix, const std::string& config_path,
              const std::string& out_dir) {
    dsr::TrainConfig cfg;
    if (!config_path.empty()) cfg = dsr::TrainConfig::from_json_file(config_path);

    const dsr::Dataset vd = dsr::Dataset::read_csv(dataset_prefix + "_vd.csv");
    const dsr::Dataset vq = dsr::Dataset::read_csv(dataset_prefix + "_vq.csv");

    const dsr::TrainResult result = dsr::train(vd, vq, cfg);
    dsr::write_training_output(out_dir, result, cfg, vd.content_hash(), vq.content_hash());

    std::cerr << "vd: reward " << result.vd.best_reward << " after " << result.vd.epochs_run
              << " epochs: " << expr::to_text(result.vd.best_expression) << "\n";
    std::cerr << "vq: reward " << result.vq.best_reward << " after " << result.vq.epochs_run
              << " epochs: " << expr::to_text(result.vq.best_expression) << "\n";
    return 0;
}

int cmd_metrics(const std::string& csv_path, double fundamental, int harmonics,
                int window_periods) {
    const io::CsvTable table = io::read_csv(csv_path);
    const std::size_t n = table.rows.size();
    if (n == 0) throw std::runtime_error("timeseries is empty: " + csv_path);

    const std::size_t c_t = table.column("t");
    const std::size_t c_ids_ref = table.column("ids_ref");
    const std::size_t c_ids = table.column("ids");
    const std::size_t c_iqs_ref = table.column("iqs_ref");
    const std::size_t c_iqs = table.column("iqs");

    const double ts = n > 1 ? table.rows[1][c_t] - table.rows[0][c_t] : 0.0;
    if (!(ts > 0.0)) throw std::runtime_error("cannot infer sample period from t column");

    auto window = static_cast<std::size_t>(
        std::llround(window_periods / fundamental / ts));
    window = std::min(std::max<std::size_t>(window, 2), n);
    const std::size_t begin = n - window;

    std::vector<double> ids_ref, ids, iqs_ref, iqs, ia_ref, ia;
    for (std::size_t i = begin; i < n; ++i) {
        const auto& r = table.rows[i];
        ids_ref.push_back(r[c_ids_ref]);
        ids.push_back(r[c_ids]);
        iqs_ref.push_back(r[c_iqs_ref]);
        iqs.push_back(r[c_iqs]);
        // steady-state reconstruction at the given fundamental
        const double theta = 2.0 * M_PI * fundamental * r[c_t];
        ia_ref.push_back(inverse_park({r[c_ids_ref], r[c_iqs_ref]}, theta)[0]);
        ia.push_back(inverse_park({r[c_ids], r[c_iqs]}, theta)[0]);
    }

    const TrackingStats d = tracking_metrics(ids_ref, ids);
    const TrackingStats q = tracking_metrics(iqs_ref, iqs);
    const TrackingStats phase = tracking_metrics(ia_ref, ia);
    const double distortion = thd({ia, 1.0 / ts, fundamental}, harmonics);

    std::cout << "thd,axis_d_rmse,axis_q_rmse,rms_ia,pkpk_err\n"
              << io::format_double(distortion) << ',' << io::format_double(d.rmse) << ','
              << io::format_double(q.rmse) << ',' << io::format_double(phase.rms_measured)
              << ',' << io::format_double(phase.peak_to_peak_error) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Induction-machine field-oriented control laboratory"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, controllers = "pi,dsr";
    std::string scenario_dir, dataset_prefix, config_path, out_dir, csv_path;
    double fundamental = 0.0;
    int harmonics = kThdHarmonics;
    int window_periods = kSteadyPeriods;

    auto* sim = app.add_subcommand("sim", "Run a scenario and write the timeseries CSV");
    sim->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    sim->add_option("--out", out_path, "Output CSV path")->required();

    auto* cmp = app.add_subcommand("compare", "Run one scenario per controller and report");
    cmp->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    cmp->add_option("--controllers", controllers, "Comma-separated list (pi, dsr, or paths)");
    cmp->add_option("--out", out_path, "Report CSV path (stdout when omitted)");

    auto* ds = app.add_subcommand("dataset", "Log PI training data from a scenario directory");
    ds->add_option("scenario-dir", scenario_dir, "Directory of scenario JSON files")->required();
    ds->add_option("--out", out_path, "Output prefix for <prefix>_vd.csv / <prefix>_vq.csv")
        ->required();

    auto* tr = app.add_subcommand("train", "Fit symbolic laws to a logged dataset pair");
    tr->add_option("dataset-prefix", dataset_prefix,
                   "Prefix of <prefix>_vd.csv / <prefix>_vq.csv")
        ->required();
    tr->add_option("--config", config_path, "Training config JSON");
    tr->add_option("--out", out_dir, "Output directory for expressions and metadata")
        ->required();

    auto* mt = app.add_subcommand("metrics", "Steady-state THD and tracking from a timeseries");
    mt->add_option("timeseries", csv_path, "Timeseries CSV from `sim`")->required();
    mt->add_option("--fundamental", fundamental, "Fundamental frequency [Hz]")->required();
    mt->add_option("--harmonics", harmonics, "Harmonic count for THD");
    mt->add_option("--window-periods", window_periods, "Fundamental periods analyzed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }

    try {
        if (sim->parsed()) return cmd_sim(scenario_path, out_path);
        if (cmp->parsed()) return cmd_compare(scenario_path, controllers, out_path);
        if (ds->parsed()) return cmd_dataset(scenario_dir, out_path);
        if (tr->parsed()) return cmd_train(dataset_prefix, config_path, out_dir);
        if (mt->parsed()) return cmd_metrics(csv_path, fundamental, harmonics, window_periods);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
