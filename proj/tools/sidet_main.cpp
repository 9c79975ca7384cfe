// sidet: online terrestrial-interference detection for satellite-to-device
// idle-phase snapshots.
//
// Unit conventions at the CLI boundary: angles in degrees (0 = broadside,
// i.e. perpendicular to the array axis), INR in dB (sigma^2 = 10^(dB/10)
// with sigma = sigma_I / sigma_n). Internally everything is radians and
// linear units. All logarithms, including the -log(FAR) axis, are natural.
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sidet/amplitude_stats.hpp"
#include "sidet/cusum.hpp"
#include "sidet/errors.hpp"
#include "sidet/glr.hpp"
#include "sidet/iqsn.hpp"
#include "sidet/mc.hpp"
#include "sidet/rootmusic.hpp"
#include "sidet/signal_model.hpp"

namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

void write_text_atomic(const std::string& path, const std::string& content) {
    sidet::detail::atomic_write(path, content);
}

sidet::ScenarioConfig parse_scenario(const json& j) {
    sidet::ScenarioConfig sc;
    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        sc.geometry = sidet::UlaGeometry(g.value("num_elements", 4),
                                         g.value("spacing_wavelengths", 0.5));
    }
    sc.noise_std = j.value("noise_std", 1.0);
    sc.rng_seed = j.value("rng_seed", std::uint64_t{0});
    if (j.contains("change_point")) {
        const auto& cp = j.at("change_point");
        if (cp.is_string()) {
            if (cp.get<std::string>() != "inf")
                throw std::invalid_argument("scenario: change_point must be an integer or \"inf\"");
            sc.change_point = sidet::kNoChange;
        } else {
            sc.change_point = cp.get<std::uint64_t>();
        }
    }
    if (j.contains("interference") && !j.at("interference").is_null()) {
        const auto& ji = j.at("interference");
        double amp;
        if (ji.contains("inr_db"))
            amp = std::sqrt(sidet::db_to_linear_power(ji.at("inr_db").get<double>())) * sc.noise_std;
        else
            amp = ji.at("amplitude").get<double>();
        const double theta = ji.value("direction_deg", 0.0) * kDegToRad;
        const std::string pm = ji.value("phase_model", "uniform");
        if (pm != "uniform" && pm != "fixed")
            throw std::invalid_argument("scenario: phase_model must be \"uniform\" or \"fixed\"");
        sc.interference = sidet::InterferenceParams(
            amp, theta,
            pm == "uniform" ? sidet::PhaseModel::UniformRandom : sidet::PhaseModel::Fixed,
            ji.value("fixed_phase_rad", 0.0));
    }
    sc.validate();
    return sc;
}

json scenario_to_json(const sidet::ScenarioConfig& sc) {
    json j;
    j["geometry"] = {{"num_elements", sc.geometry.num_elements},
                     {"spacing_wavelengths", sc.geometry.spacing_wavelengths}};
    j["noise_std"] = sc.noise_std;
    j["rng_seed"] = sc.rng_seed;
    if (sc.change_point == sidet::kNoChange)
        j["change_point"] = "inf";
    else
        j["change_point"] = sc.change_point;
    if (sc.interference) {
        const auto& i = *sc.interference;
        j["interference"] = {
            {"amplitude", i.amplitude},
            {"inr_db", 20.0 * std::log10(i.amplitude / sc.noise_std)},
            {"direction_deg", i.direction_rad / kDegToRad},
            {"phase_model", i.phase_model == sidet::PhaseModel::UniformRandom ? "uniform" : "fixed"},
            {"fixed_phase_rad", i.fixed_phase_rad}};
    } else {
        j["interference"] = nullptr;
    }
    return j;
}

int cmd_simulate(const std::string& scenario_path, std::uint64_t count,
                 const std::string& out_path, std::optional<std::uint64_t> seed_override) {
    std::ifstream is(scenario_path);
    if (!is) throw sidet::io_error("cannot open scenario file " + scenario_path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("malformed scenario JSON (" + scenario_path + "): " + e.what());
    }
    sidet::ScenarioConfig sc = parse_scenario(j);
    if (seed_override) sc.rng_seed = *seed_override;

    sidet::Rng rng(sc.rng_seed);
    std::vector<sidet::Snapshot> snapshots;
    snapshots.reserve(count);
    for (std::uint64_t k = 1; k <= count; ++k)
        snapshots.push_back(sidet::synthesize_snapshot(sc, k, rng));
    sidet::write_iqsn(out_path, snapshots, static_cast<std::uint32_t>(sc.geometry.num_elements));

    const json resolved = scenario_to_json(sc);
    write_text_atomic(out_path + ".scenario.json", resolved.dump(2) + "\n");
    std::cerr << "resolved scenario: " << resolved.dump() << "\n";
    std::cerr << "wrote " << count << " snapshots (M=" << sc.geometry.num_elements << ") to "
              << out_path << "\n";
    return 0;
}

std::vector<double> read_amplitude_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw sidet::io_error("cannot open amplitude CSV " + path);
    std::vector<double> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw std::invalid_argument("amplitude CSV: cannot parse line '" + line + "'");
        }
    }
    return out;
}

int cmd_detect(const std::string& mode, const std::string& in_path,
               const std::string& amplitude_csv, double inr_db, double noise_std,
               std::optional<double> theta_deg, double threshold, std::size_t max_window,
               const std::string& out_path) {
    const double sigma_i = std::sqrt(sidet::db_to_linear_power(inr_db)) * noise_std;
    const sidet::AmplitudeModel model(sigma_i, noise_std);

    std::ostringstream csv;
    csv.precision(12);
    std::optional<std::uint64_t> first_alarm;

    if (mode == "cusum") {
        if (!theta_deg)
            throw CLI::ValidationError(
                "detect", "--theta-deg is required in cusum mode: the CUSUM branch assumes the "
                          "interference direction is known");
        std::vector<double> amplitudes;
        sidet::UlaGeometry geometry;
        if (!amplitude_csv.empty()) {
            amplitudes = read_amplitude_csv(amplitude_csv);
        } else {
            const sidet::IqsnFile file = sidet::read_iqsn(in_path);
            geometry = sidet::UlaGeometry(static_cast<int>(file.num_elements));
            const Eigen::VectorXcd steer =
                sidet::steering_vector(geometry, *theta_deg * kDegToRad);
            for (const auto& snap : file.snapshots)
                amplitudes.push_back(sidet::amplitude(sidet::project(snap, steer)));
        }
        sidet::CusumDetector det(sidet::CusumConfig(model, threshold));
        csv << "k,r,g,alarm\n";
        for (std::size_t k = 0; k < amplitudes.size(); ++k) {
            const auto out = det.update(amplitudes[k]);
            const bool alarm = out.verdict == sidet::Verdict::Alarm;
            csv << (k + 1) << ',' << amplitudes[k] << ',' << out.statistic << ',' << alarm << '\n';
            if (alarm) {
                if (!first_alarm) first_alarm = k + 1;
                det.reset();
            }
        }
    } else if (mode == "glr") {
        const sidet::IqsnFile file = sidet::read_iqsn(in_path);
        const sidet::UlaGeometry geometry(static_cast<int>(file.num_elements));
        sidet::GlrDetector det(sidet::GlrConfig(model, threshold, max_window, geometry));
        csv << "k,G,theta_hat_deg,alarm,j_hat\n";
        for (const auto& snap : file.snapshots) {
            const auto out = det.update(snap);
            const bool alarm = out.detection.verdict == sidet::Verdict::Alarm;
            csv << snap.index << ',' << out.detection.statistic << ',';
            if (out.alarm)
                csv << out.alarm->theta_rad / kDegToRad;
            else
                csv << "";
            csv << ',' << alarm << ',' << (out.alarm ? std::to_string(out.alarm->change_candidate) : "")
                << '\n';
            if (alarm) {
                if (!first_alarm) first_alarm = snap.index;
                det.reset();
            }
        }
    } else {
        throw CLI::ValidationError("detect", "--mode must be cusum or glr");
    }

    write_text_atomic(out_path, csv.str());
    if (first_alarm)
        std::cout << "first alarm at k=" << *first_alarm << "\n";
    else
        std::cout << "first alarm: none\n";
    return 0;
}

int cmd_doa(const std::string& in_path, std::size_t window, const std::string& out_path) {
    const sidet::IqsnFile file = sidet::read_iqsn(in_path);
    const sidet::UlaGeometry geometry(static_cast<int>(file.num_elements));
    if (window < 1 || window > file.snapshots.size())
        throw CLI::ValidationError("doa", "--window must be in [1, snapshot count]");

    std::ostringstream csv;
    csv.precision(12);
    csv << "window_start,window_end,theta_deg,root_modulus\n";
    for (std::size_t end = window; end <= file.snapshots.size(); ++end) {
        std::span<const sidet::Snapshot> win(file.snapshots.data() + end - window, window);
        const sidet::DoaEstimate est = sidet::estimate_doa(win, geometry);
        csv << est.window_begin << ',' << est.window_end << ',' << est.theta_rad / kDegToRad << ','
            << est.root_modulus << '\n';
    }
    write_text_atomic(out_path, csv.str());
    return 0;
}

int cmd_theorem1(const std::vector<double>& sigma_db_list, const std::string& out_path) {
    std::ostringstream csv;
    csv.precision(12);
    csv << "sigma2_db,kl_information,inv_kl,lower_bound,upper_bound,fitted_a\n";
    bool violated = false;
    for (const double db : sigma_db_list) {
        const double s2 = sidet::db_to_linear_power(db);
        const double sigma = std::sqrt(s2);
        const auto bounds = sidet::theorem1_bounds(sigma);
        double info = 0.0;
        try {
            info = sidet::kl_information(sigma);
        } catch (const sidet::numerical_error& e) {
            std::cerr << "row " << db << " dB: " << e.what() << "\n";
            csv << db << ",nan,nan," << bounds.lower << ',' << bounds.upper << ",nan\n";
            violated = true;
            continue;
        }
        const double inv = 1.0 / info;
        const double fitted_a = s2 * s2 * inv - s2;  // sigma^4 / I - sigma^2
        csv << db << ',' << info << ',' << inv << ',' << bounds.lower << ',' << bounds.upper << ','
            << fitted_a << '\n';
        if (!(bounds.lower <= inv && inv <= bounds.upper)) {
            std::cerr << "bound violation at " << db << " dB: 1/I=" << inv << " outside ["
                      << bounds.lower << ", " << bounds.upper << "]\n";
            violated = true;
        }
    }
    if (out_path.empty())
        std::cout << csv.str();
    else
        write_text_atomic(out_path, csv.str());
    if (violated) throw sidet::numerical_error("theorem1: bound violation or quadrature failure");
    return 0;
}

int cmd_calibrate(const std::string& detector, double inr_db, double target_lnfar,
                  double tolerance, std::uint64_t trials, std::uint64_t t_max,
                  std::uint64_t seed, std::size_t max_window, unsigned workers) {
    const double sigma = std::sqrt(sidet::db_to_linear_power(inr_db));
    const sidet::AmplitudeModel model(sigma, 1.0);
    const double target_far = std::exp(-target_lnfar);
    sidet::CalibrationOptions options;
    options.trials = trials;
    options.t_max = t_max;
    options.workers = workers;

    double h = 0.0;
    if (detector == "cusum") {
        h = sidet::calibrate_cusum_threshold(model, target_far, tolerance, seed, options);
    } else if (detector == "glr") {
        h = sidet::calibrate_glr_threshold(model, sidet::UlaGeometry(4, 0.5), max_window,
                                           target_far, tolerance, seed, options);
    } else {
        throw CLI::ValidationError("calibrate", "--detector must be cusum or glr");
    }
    json out = {{"detector", detector}, {"inr_db", inr_db},   {"target_lnfar", target_lnfar},
                {"tolerance", tolerance}, {"threshold", h},   {"trials", trials},
                {"t_max", t_max},         {"seed", seed}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

sidet::SweepSpec parse_sweep_spec(const json& j) {
    sidet::SweepSpec spec;
    const std::string det = j.value("detector", "cusum");
    if (det == "cusum")
        spec.detector = sidet::DetectorKind::Cusum;
    else if (det == "glr")
        spec.detector = sidet::DetectorKind::Glr;
    else
        throw std::invalid_argument("sweep spec: detector must be cusum or glr");
    j.at("inr_db_list").get_to(spec.inr_db_list);
    j.at("threshold_list").get_to(spec.threshold_list);
    spec.trials = j.value("trials", std::uint64_t{100000});
    spec.far_run_cap = j.value("far_run_cap", std::uint64_t{1000000});
    spec.master_seed = j.value("master_seed", std::uint64_t{1});
    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        spec.geometry = sidet::UlaGeometry(g.value("num_elements", 4),
                                           g.value("spacing_wavelengths", 0.5));
    }
    spec.theta_rad = j.value("theta_deg", 0.0) * kDegToRad;
    spec.glr_max_window = j.value("glr_max_window", std::size_t{32});
    spec.workers = j.value("workers", 0u);
    spec.validate();
    return spec;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_prefix, bool resume) {
    std::ifstream is(spec_path);
    if (!is) throw sidet::io_error("cannot open sweep spec " + spec_path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("malformed sweep spec JSON: " + std::string(e.what()));
    }
    const sidet::SweepSpec spec = parse_sweep_spec(j);
    const auto records = sidet::run_sweep(spec, out_prefix + ".csv", out_prefix + ".json", resume);
    std::cout << "completed " << records.size() << " cells -> " << out_prefix << ".csv\n";
    for (const auto& rec : records)
        if (rec.censored_fraction > 0.0)
            std::cerr << "warning: " << rec.detector << " inr=" << rec.inr_db << " h="
                      << rec.threshold << " censored_fraction=" << rec.censored_fraction
                      << " (FAR is biased downward by no more than the censored mass)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "sidet: online terrestrial-interference detection on idle-phase array snapshots.\n"
        "Angles in degrees from broadside; INR in dB; all logs natural."};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Synthesize snapshots from a scenario JSON into an IQSN file");
    std::string sim_scenario, sim_out;
    std::uint64_t sim_count = 1000;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--scenario", sim_scenario, "Scenario JSON path")->required();
    sim->add_option("--count", sim_count, "Number of snapshots to write");
    sim->add_option("--out", sim_out, "Output IQSN path")->required();
    sim->add_option("--seed", sim_seed, "Override the scenario rng_seed");

    // detect
    auto* det = app.add_subcommand("detect", "Run a detector over an IQSN stream (or amplitude CSV for cusum)");
    std::string det_mode = "cusum", det_in, det_amp_csv, det_out = "detect.csv";
    double det_inr_db = 3.0, det_noise = 1.0, det_h = 3.0;
    std::optional<double> det_theta_deg;
    std::size_t det_window = 32;
    det->add_option("--mode", det_mode, "cusum or glr")->required();
    det->add_option("--input", det_in, "IQSN snapshot file");
    det->add_option("--amplitude-csv", det_amp_csv, "Amplitude CSV (one r per line, cusum only)");
    det->add_option("--inr-db", det_inr_db, "Assumed INR sigma^2 in dB")->required();
    det->add_option("--noise-std", det_noise, "Noise standard deviation (linear)");
    det->add_option("--theta-deg", det_theta_deg,
                    "Known interference direction, degrees from broadside (required for cusum)");
    det->add_option("--threshold", det_h, "Detection threshold h (natural-log scale)")->required();
    det->add_option("--max-window", det_window, "GLR window cap L");
    det->add_option("--out", det_out, "Per-sample CSV output path");

    // doa
    auto* doa = app.add_subcommand("doa", "Root-MUSIC direction estimates over sliding windows");
    std::string doa_in, doa_out = "doa.csv";
    std::size_t doa_window = 16;
    doa->add_option("--input", doa_in, "IQSN snapshot file")->required();
    doa->add_option("--window", doa_window, "Window length N (snapshots)");
    doa->add_option("--out", doa_out, "Output CSV path");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Bisection threshold calibration to a target -ln(FAR)");
    std::string cal_detector = "cusum";
    double cal_inr_db = 3.0, cal_target_lnfar = 3.0, cal_tol = 0.1;
    std::uint64_t cal_trials = 4096, cal_tmax = 200000, cal_seed = 1;
    std::size_t cal_window = 32;
    unsigned cal_workers = 0;
    cal->add_option("--detector", cal_detector, "cusum or glr");
    cal->add_option("--inr-db", cal_inr_db, "INR sigma^2 in dB")->required();
    cal->add_option("--target-lnfar", cal_target_lnfar, "Target -ln(FAR), natural log");
    cal->add_option("--tolerance", cal_tol, "Tolerance on |ln FAR - ln target|");
    cal->add_option("--trials", cal_trials, "Trials per FAR evaluation");
    cal->add_option("--t-max", cal_tmax, "Run-length cap per trial");
    cal->add_option("--seed", cal_seed, "Master seed");
    cal->add_option("--max-window", cal_window, "GLR window cap L");
    cal->add_option("--workers", cal_workers, "Worker threads (0 = all cores)");

    // sweep
    auto* swp = app.add_subcommand("sweep", "Monte-Carlo (INR x threshold) sweep from a JSON spec");
    std::string swp_spec, swp_out = "sweep";
    bool swp_resume = false;
    swp->add_option("--spec", swp_spec, "SweepSpec JSON path")->required();
    swp->add_option("--out", swp_out, "Output prefix (<prefix>.csv, <prefix>.json)");
    swp->add_flag("--resume", swp_resume, "Reuse completed cells from <prefix>.csv.cells.jsonl");

    // theorem1
    auto* thm = app.add_subcommand(
        "theorem1", "KL information I(sigma), 1/I, and the asymptotic delay/FAR bounds");
    std::vector<double> thm_db;
    std::string thm_out;
    thm->add_option("--sigma-db", thm_db, "INR sigma^2 values in dB")->required();
    thm->add_option("--out", thm_out, "Output CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_scenario, sim_count, sim_out, sim_seed);
        if (det->parsed())
            return cmd_detect(det_mode, det_in, det_amp_csv, det_inr_db, det_noise, det_theta_deg,
                              det_h, det_window, det_out);
        if (doa->parsed()) return cmd_doa(doa_in, doa_window, doa_out);
        if (cal->parsed())
            return cmd_calibrate(cal_detector, cal_inr_db, cal_target_lnfar, cal_tol, cal_trials,
                                 cal_tmax, cal_seed, cal_window, cal_workers);
        if (swp->parsed()) return cmd_sweep(swp_spec, swp_out, swp_resume);
        if (thm->parsed()) return cmd_theorem1(thm_db, thm_out);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const sidet::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const sidet::io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
