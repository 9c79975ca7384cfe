#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sidet/amplitude_stats.hpp"
#include "sidet/cusum.hpp"
#include "sidet/rootmusic.hpp"
#include "sidet/signal_model.hpp"

namespace sidet {

struct GlrConfig {
    AmplitudeModel model;  // sigma_i known, direction unknown
    double threshold = 1.0;
    std::size_t max_window = 32;
    UlaGeometry geometry;

    GlrConfig() = default;
    GlrConfig(AmplitudeModel m, double h, std::size_t window_cap, UlaGeometry geom)
        : model(m), threshold(h), max_window(window_cap), geometry(geom) {
        if (!(h > 0.0)) throw std::invalid_argument("GlrConfig: threshold must be > 0");
        if (window_cap < 1) throw std::invalid_argument("GlrConfig: max_window must be >= 1");
        if (!(m.sigma_i > 0.0)) throw std::invalid_argument("GlrConfig: sigma_i must be > 0");
    }
};

struct GlrWindowStat {
    double statistic = 0.0;
    double theta_rad = 0.0;
};

// One candidate window j..k at fixed j: Root-MUSIC estimate over the window,
// then the summed LLR of the projected amplitudes.
inline GlrWindowStat glr_statistic(std::span<const Snapshot> window, const AmplitudeModel& model,
                                   const UlaGeometry& geometry) {
    if (window.empty()) throw std::invalid_argument("glr_statistic: empty window");
    const DoaEstimate doa = estimate_doa(window, geometry);
    const Eigen::VectorXcd steer = steering_vector(geometry, doa.theta_rad);
    double sum = 0.0;
    for (const auto& snap : window) sum += llr(amplitude(project(snap, steer)), model);
    return {sum, doa.theta_rad};
}

struct GlrAlarm {
    std::uint64_t stopping_index = 0;
    double theta_rad = 0.0;
    std::uint64_t change_candidate = 0;  // the argmax onset j
};

struct GlrOutcome {
    DetectionOutcome detection;
    std::optional<GlrAlarm> alarm;
};

// Window-limited GLR detector: at each update the statistic is the max over
// candidate onsets j within the last max_window samples of the per-window
// GLR. Latches on alarm, like the CUSUM detector.
class GlrDetector {
public:
    explicit GlrDetector(GlrConfig config) : config_(std::move(config)) {}

    GlrOutcome update(const Snapshot& snapshot) {
        if (alarm_) throw std::logic_error("GlrDetector: update after alarm without reset");
        if (snapshot.index != samples_ + 1)
            throw std::invalid_argument("GlrDetector: snapshot index must be contiguous");
        ++samples_;
        buffer_.push_back(snapshot);
        if (buffer_.size() > config_.max_window) buffer_.erase(buffer_.begin());

        double best = -std::numeric_limits<double>::infinity();
        double best_theta = 0.0;
        std::uint64_t best_onset = 0;
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            std::span<const Snapshot> window(buffer_.data() + i, buffer_.size() - i);
            GlrWindowStat stat;
            try {
                stat = glr_statistic(window, config_.model, config_.geometry);
            } catch (const numerical_error&) {
                ++doa_failures_;
                continue;
            }
            if (stat.statistic > best) {
                best = stat.statistic;
                best_theta = stat.theta_rad;
                best_onset = window.front().index;
            }
        }
        last_statistic_ = best;

        GlrOutcome out;
        out.detection.statistic = best;
        if (best >= config_.threshold) {
            alarm_ = GlrAlarm{samples_, best_theta, best_onset};
            out.detection.verdict = Verdict::Alarm;
            out.detection.stopping_index = samples_;
            out.alarm = alarm_;
        }
        return out;
    }

    void reset() {
        buffer_.clear();
        alarm_.reset();
        last_statistic_ = -std::numeric_limits<double>::infinity();
    }

    double last_statistic() const { return last_statistic_; }
    std::uint64_t samples_consumed() const { return samples_; }
    std::uint64_t doa_failures() const { return doa_failures_; }
    const std::optional<GlrAlarm>& alarm() const { return alarm_; }
    std::span<const Snapshot> buffer() const { return buffer_; }
    const GlrConfig& config() const { return config_; }

private:
    GlrConfig config_;
    std::vector<Snapshot> buffer_;
    std::uint64_t samples_ = 0;
    std::uint64_t doa_failures_ = 0;
    double last_statistic_ = -std::numeric_limits<double>::infinity();
    std::optional<GlrAlarm> alarm_;
};

} // namespace sidet
