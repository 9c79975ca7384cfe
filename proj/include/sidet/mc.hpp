#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidet/cusum.hpp"
#include "sidet/errors.hpp"
#include "sidet/glr.hpp"
#include "sidet/rng.hpp"
#include "sidet/signal_model.hpp"

namespace sidet {

// Runs above this length without an alarm are excluded from CADD estimates
// (a mis-set threshold, not a delay sample).
inline constexpr std::uint64_t kCaddSampleCap = 1'000'000;

struct CaddEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::uint64_t trials_used = 0;
    std::uint64_t excluded = 0;
};

struct FarEstimate {
    double far = 0.0;
    double stderr_ = 0.0;
    double censored_fraction = 0.0;
    double arl = 0.0;
    std::uint64_t trials = 0;
    bool undersized_cap = false;  // T_max below the recommended 50 e^h
};

namespace detail {

// Compensated (Kahan) summation so aggregation is independent of how trials
// were scheduled across workers.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Executes fn(trial_index) for every trial, writing into a preallocated
// results vector. Worker count never affects the result: each trial owns its
// slot and its own derived RNG.
template <typename T, typename TrialFn>
std::vector<T> run_trials(std::uint64_t trials, unsigned workers, const TrialFn& fn) {
    std::vector<T> results(trials);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    if (workers == 1 || trials < 2) {
        for (std::uint64_t i = 0; i < trials; ++i) results[i] = fn(i);
        return results;
    }
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= trials) return;
            results[i] = fn(i);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
}

// Exact Rayleigh(sigma_n) draw by inverse CDF; one uniform per sample keeps
// the H0 run-length loops cheap.
inline double draw_rayleigh(Rng& rng, double sigma_n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return sigma_n * std::sqrt(-std::log1p(-u(rng)));
}

inline CaddEstimate reduce_cadd(const std::vector<std::int64_t>& stops) {
    CaddEstimate est;
    KahanSum sum, sumsq;
    for (const auto tau : stops) {
        if (tau < 0) {
            ++est.excluded;
            continue;
        }
        ++est.trials_used;
        sum.add(static_cast<double>(tau));
        sumsq.add(static_cast<double>(tau) * static_cast<double>(tau));
    }
    if (est.trials_used == 0) return est;
    const double n = static_cast<double>(est.trials_used);
    est.mean = sum.value() / n;
    const double var = std::max(0.0, sumsq.value() / n - est.mean * est.mean);
    est.stderr_ = est.trials_used > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return est;
}

inline FarEstimate reduce_far(const std::vector<std::uint64_t>& run_lengths,
                              std::uint64_t t_max, double threshold) {
    FarEstimate est;
    est.trials = run_lengths.size();
    KahanSum sum, sumsq;
    std::uint64_t censored = 0;
    for (const auto tau : run_lengths) {
        if (tau >= t_max) ++censored;
        sum.add(static_cast<double>(tau));
        sumsq.add(static_cast<double>(tau) * static_cast<double>(tau));
    }
    const double n = static_cast<double>(run_lengths.size());
    est.arl = sum.value() / n;
    const double var = std::max(0.0, sumsq.value() / n - est.arl * est.arl);
    const double arl_stderr = run_lengths.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    est.far = 1.0 / est.arl;
    est.stderr_ = arl_stderr / (est.arl * est.arl);  // delta method
    est.censored_fraction = static_cast<double>(censored) / n;
    est.undersized_cap = static_cast<double>(t_max) < 50.0 * std::exp(threshold);
    return est;
}

} // namespace detail

// --- CUSUM (known-direction) estimators -----------------------------------
//
// CUSUM operates on projected amplitudes, whose law under H1 from the first
// sample (nu = 1) is exactly Rice and under H0 exactly Rayleigh, so trials
// sample amplitudes directly instead of synthesizing full array snapshots.

inline CaddEstimate estimate_cusum_cadd(const CusumConfig& config, std::uint64_t trials,
                                        std::uint64_t seed, unsigned workers = 0,
                                        std::uint64_t cell_id = 0) {
    if (trials < 1) throw std::invalid_argument("estimate_cusum_cadd: trials must be >= 1");
    auto trial = [&](std::uint64_t i) -> std::int64_t {
        Rng rng(derive_seed(seed, cell_id, i));
        CusumDetector det(config);
        for (std::uint64_t k = 1; k <= kCaddSampleCap; ++k) {
            const double r = sample_amplitude(config.model, Hypothesis::H1, rng);
            if (det.update(r).verdict == Verdict::Alarm) return static_cast<std::int64_t>(k);
        }
        return -1;
    };
    return detail::reduce_cadd(detail::run_trials<std::int64_t>(trials, workers, trial));
}

inline FarEstimate estimate_cusum_far(const CusumConfig& config, std::uint64_t trials,
                                      std::uint64_t t_max, std::uint64_t seed,
                                      unsigned workers = 0, std::uint64_t cell_id = 0) {
    if (trials < 1 || t_max < 1)
        throw std::invalid_argument("estimate_cusum_far: trials and t_max must be >= 1");
    auto trial = [&](std::uint64_t i) -> std::uint64_t {
        Rng rng(derive_seed(seed, cell_id, i));
        CusumDetector det(config);
        for (std::uint64_t k = 1; k < t_max; ++k) {
            const double r = detail::draw_rayleigh(rng, config.model.sigma_n);
            if (det.update(r).verdict == Verdict::Alarm) return k;
        }
        return t_max;  // censored
    };
    return detail::reduce_far(detail::run_trials<std::uint64_t>(trials, workers, trial), t_max,
                              config.threshold);
}

// --- GLR (unknown-direction) estimators ------------------------------------

inline CaddEstimate estimate_glr_cadd(const GlrConfig& config, const ScenarioConfig& scenario,
                                      std::uint64_t trials, std::uint64_t seed,
                                      unsigned workers = 0, std::uint64_t cell_id = 0) {
    if (trials < 1) throw std::invalid_argument("estimate_glr_cadd: trials must be >= 1");
    if (scenario.change_point != 1 || !scenario.interference)
        throw std::invalid_argument("estimate_glr_cadd: CADD runs require interference from sample 1");
    auto trial = [&](std::uint64_t i) -> std::int64_t {
        Rng rng(derive_seed(seed, cell_id, i));
        GlrDetector det(config);
        for (std::uint64_t k = 1; k <= kCaddSampleCap; ++k) {
            const Snapshot snap = synthesize_snapshot(scenario, k, rng);
            if (det.update(snap).detection.verdict == Verdict::Alarm)
                return static_cast<std::int64_t>(k);
        }
        return -1;
    };
    return detail::reduce_cadd(detail::run_trials<std::int64_t>(trials, workers, trial));
}

inline FarEstimate estimate_glr_far(const GlrConfig& config, const ScenarioConfig& h0_scenario,
                                    std::uint64_t trials, std::uint64_t t_max, std::uint64_t seed,
                                    unsigned workers = 0, std::uint64_t cell_id = 0) {
    if (trials < 1 || t_max < 1)
        throw std::invalid_argument("estimate_glr_far: trials and t_max must be >= 1");
    auto trial = [&](std::uint64_t i) -> std::uint64_t {
        Rng rng(derive_seed(seed, cell_id, i));
        GlrDetector det(config);
        for (std::uint64_t k = 1; k < t_max; ++k) {
            const Snapshot snap = synthesize_snapshot(h0_scenario, k, rng);
            if (det.update(snap).detection.verdict == Verdict::Alarm) return k;
        }
        return t_max;
    };
    return detail::reduce_far(detail::run_trials<std::uint64_t>(trials, workers, trial), t_max,
                              config.threshold);
}

// --- Threshold calibration --------------------------------------------------

struct CalibrationOptions {
    std::uint64_t trials = 4096;
    std::uint64_t t_max = 200'000;
    double h_min = 0.01;
    double h_max = 50.0;
    // Initial bisection bracket; widened automatically towards [h_min, h_max]
    // if it does not straddle the target. A tight bracket matters for costly
    // detectors, where every censored run burns t_max updates.
    double bracket_lo = 0.5;
    double bracket_hi = 8.0;
    int max_iterations = 60;
    unsigned workers = 0;
};

// Bisection on h against a Monte-Carlo FAR evaluation until
// |ln FAR - ln target| <= tolerance. far_at(h, eval_index) must be
// deterministic in both arguments.
inline double calibrate_threshold(
    const std::function<FarEstimate(double, std::uint64_t)>& far_at, double target_far,
    double tolerance, const CalibrationOptions& options = {}) {
    if (!(target_far > 0.0 && target_far < 1.0))
        throw std::invalid_argument("calibrate_threshold: target_far must be in (0, 1)");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_threshold: tolerance must be > 0");

    const double target_ln = std::log(target_far);
    std::uint64_t eval = 0;
    const auto ln_far = [&](double h) {
        const FarEstimate est = far_at(h, eval++);
        return std::log(std::max(est.far, 1e-300));
    };

    // FAR is decreasing in h; widen the bracket until it straddles the target.
    double lo = options.bracket_lo, hi = options.bracket_hi;
    double f_lo = ln_far(lo), f_hi = ln_far(hi);
    while (f_lo < target_ln && lo > options.h_min) {
        lo = std::max(options.h_min, lo / 2.0);
        f_lo = ln_far(lo);
    }
    while (f_hi > target_ln && hi < options.h_max) {
        hi = std::min(options.h_max, hi * 1.5);
        f_hi = ln_far(hi);
    }
    if (f_lo < target_ln || f_hi > target_ln)
        throw numerical_error("calibrate_threshold: could not bracket the target FAR in h range [" +
                              std::to_string(options.h_min) + ", " + std::to_string(options.h_max) + "]");

    for (int it = 0; it < options.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = ln_far(mid);
        if (std::abs(f_mid - target_ln) <= tolerance) return mid;
        if (f_mid > target_ln)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-9) break;
    }
    throw numerical_error("calibrate_threshold: did not reach tolerance " + std::to_string(tolerance) +
                          "; increase trials or tolerance");
}

inline double calibrate_cusum_threshold(const AmplitudeModel& model, double target_far,
                                        double tolerance, std::uint64_t seed,
                                        const CalibrationOptions& options = {}) {
    return calibrate_threshold(
        [&](double h, std::uint64_t eval) {
            const CusumConfig cfg(model, h);
            return estimate_cusum_far(cfg, options.trials, options.t_max, seed, options.workers,
                                      /*cell_id=*/eval);
        },
        target_far, tolerance, options);
}

inline double calibrate_glr_threshold(const AmplitudeModel& model, const UlaGeometry& geometry,
                                      std::size_t max_window, double target_far, double tolerance,
                                      std::uint64_t seed, const CalibrationOptions& options = {}) {
    ScenarioConfig h0;
    h0.geometry = geometry;
    h0.noise_std = model.sigma_n;
    return calibrate_threshold(
        [&](double h, std::uint64_t eval) {
            const GlrConfig cfg(model, h, max_window, geometry);
            return estimate_glr_far(cfg, h0, options.trials, options.t_max, seed, options.workers,
                                    /*cell_id=*/eval);
        },
        target_far, tolerance, options);
}

// --- Sweep experiments -------------------------------------------------------

enum class DetectorKind { Cusum, Glr };

struct SweepSpec {
    DetectorKind detector = DetectorKind::Cusum;
    std::vector<double> inr_db_list;
    std::vector<double> threshold_list;
    std::uint64_t trials = 100'000;
    std::uint64_t far_run_cap = 1'000'000;
    std::uint64_t master_seed = 1;
    UlaGeometry geometry{4, 0.5};
    std::uint64_t change_point = 1;
    double theta_rad = 0.0;
    std::size_t glr_max_window = 32;
    unsigned workers = 0;

    void validate() const {
        if (inr_db_list.empty() || threshold_list.empty())
            throw std::invalid_argument("SweepSpec: inr_db_list and threshold_list must be nonempty");
        if (trials < 1 || far_run_cap < 1)
            throw std::invalid_argument("SweepSpec: trials and far_run_cap must be >= 1");
        for (double h : threshold_list)
            if (!(h > 0.0)) throw std::invalid_argument("SweepSpec: thresholds must be > 0");
    }
};

struct RunRecord {
    std::string detector;
    double inr_db = 0.0;
    double threshold = 0.0;
    double cadd_mean = 0.0;
    double cadd_stderr = 0.0;
    double far = 0.0;
    double far_stderr = 0.0;
    double censored_fraction = 0.0;
    std::uint64_t trials_used = 0;
    double wall_time_s = 0.0;
};

inline void to_json(nlohmann::json& j, const RunRecord& r) {
    j = nlohmann::json{{"detector", r.detector},
                       {"inr_db", r.inr_db},
                       {"threshold", r.threshold},
                       {"cadd_mean", r.cadd_mean},
                       {"cadd_stderr", r.cadd_stderr},
                       {"far", r.far},
                       {"far_stderr", r.far_stderr},
                       {"censored_fraction", r.censored_fraction},
                       {"trials_used", r.trials_used},
                       {"wall_time_s", r.wall_time_s}};
}

inline void from_json(const nlohmann::json& j, RunRecord& r) {
    j.at("detector").get_to(r.detector);
    j.at("inr_db").get_to(r.inr_db);
    j.at("threshold").get_to(r.threshold);
    j.at("cadd_mean").get_to(r.cadd_mean);
    j.at("cadd_stderr").get_to(r.cadd_stderr);
    j.at("far").get_to(r.far);
    j.at("far_stderr").get_to(r.far_stderr);
    j.at("censored_fraction").get_to(r.censored_fraction);
    j.at("trials_used").get_to(r.trials_used);
    j.at("wall_time_s").get_to(r.wall_time_s);
}

inline double db_to_linear_power(double db) { return std::pow(10.0, db / 10.0); }

// One sweep cell: CADD under nu = 1 plus FAR under H0 at the same threshold.
inline RunRecord run_sweep_cell(const SweepSpec& spec, double inr_db, double threshold,
                                std::uint64_t cell_id) {
    const auto start = std::chrono::steady_clock::now();
    const double sigma = std::sqrt(db_to_linear_power(inr_db));
    const AmplitudeModel model(sigma, 1.0);

    RunRecord rec;
    rec.inr_db = inr_db;
    rec.threshold = threshold;

    CaddEstimate cadd;
    FarEstimate far;
    if (spec.detector == DetectorKind::Cusum) {
        rec.detector = "cusum";
        const CusumConfig cfg(model, threshold);
        cadd = estimate_cusum_cadd(cfg, spec.trials, spec.master_seed, spec.workers, cell_id);
        far = estimate_cusum_far(cfg, spec.trials, spec.far_run_cap, spec.master_seed, spec.workers,
                                 cell_id + (1ULL << 32));
    } else {
        rec.detector = "glr";
        const GlrConfig cfg(model, threshold, spec.glr_max_window, spec.geometry);
        ScenarioConfig h1;
        h1.geometry = spec.geometry;
        h1.noise_std = 1.0;
        h1.interference = InterferenceParams(sigma, spec.theta_rad);
        h1.change_point = 1;
        cadd = estimate_glr_cadd(cfg, h1, spec.trials, spec.master_seed, spec.workers, cell_id);
        ScenarioConfig h0;
        h0.geometry = spec.geometry;
        h0.noise_std = 1.0;
        far = estimate_glr_far(cfg, h0, spec.trials, spec.far_run_cap, spec.master_seed,
                               spec.workers, cell_id + (1ULL << 32));
    }
    rec.cadd_mean = cadd.mean;
    rec.cadd_stderr = cadd.stderr_;
    rec.far = far.far;
    rec.far_stderr = far.stderr_;
    rec.censored_fraction = far.censored_fraction;
    rec.trials_used = cadd.trials_used;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

namespace detail {

inline std::string cell_key(const std::string& detector, double inr_db, double threshold) {
    std::ostringstream os;
    os.precision(12);
    os << detector << '|' << inr_db << '|' << threshold;
    return os.str();
}

inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw io_error("cannot open " + tmp + " for writing");
        os << content;
        if (!os) throw io_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

inline std::string run_records_csv(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    os.precision(12);
    os << "detector,inr_db,threshold,cadd_mean,cadd_stderr,far,far_stderr,"
          "censored_fraction,trials_used,wall_time_s\n";
    for (const auto& r : records)
        os << r.detector << ',' << r.inr_db << ',' << r.threshold << ',' << r.cadd_mean << ','
           << r.cadd_stderr << ',' << r.far << ',' << r.far_stderr << ',' << r.censored_fraction
           << ',' << r.trials_used << ',' << r.wall_time_s << '\n';
    return os.str();
}

// Cartesian product over (inr, threshold). Completed cells are appended to
// <csv_path>.cells.jsonl as they finish, and resume=true reuses them.
inline std::vector<RunRecord> run_sweep(const SweepSpec& spec, const std::string& csv_path,
                                        const std::string& json_path, bool resume = false) {
    spec.validate();
    const std::string log_path = csv_path + ".cells.jsonl";

    std::unordered_map<std::string, RunRecord> completed;
    if (resume && std::filesystem::exists(log_path)) {
        std::ifstream is(log_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const RunRecord rec = nlohmann::json::parse(line).get<RunRecord>();
            completed[detail::cell_key(rec.detector, rec.inr_db, rec.threshold)] = rec;
        }
    } else if (!resume) {
        std::filesystem::remove(log_path);
    }

    const std::string det_name = spec.detector == DetectorKind::Cusum ? "cusum" : "glr";
    std::ofstream log(log_path, std::ios::app);
    if (!log) throw io_error("run_sweep: cannot open cell log " + log_path);

    std::vector<RunRecord> records;
    std::uint64_t cell_id = 0;
    for (double inr_db : spec.inr_db_list) {
        for (double h : spec.threshold_list) {
            const std::string key = detail::cell_key(det_name, inr_db, h);
            if (auto it = completed.find(key); it != completed.end()) {
                records.push_back(it->second);
                ++cell_id;
                continue;
            }
            RunRecord rec;
            try {
                rec = run_sweep_cell(spec, inr_db, h, cell_id);
            } catch (const std::exception& e) {
                throw numerical_error("run_sweep: cell " + key + " failed: " + e.what());
            }
            records.push_back(rec);
            log << nlohmann::json(rec).dump() << '\n' << std::flush;
            ++cell_id;
        }
    }

    detail::atomic_write(csv_path, run_records_csv(records));
    nlohmann::json summary;
    summary["detector"] = det_name;
    summary["trials"] = spec.trials;
    summary["far_run_cap"] = spec.far_run_cap;
    summary["master_seed"] = spec.master_seed;
    summary["records"] = records;
    detail::atomic_write(json_path, summary.dump(2) + "\n");
    return records;
}

} // namespace sidet
