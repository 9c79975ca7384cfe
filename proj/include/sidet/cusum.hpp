#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>

#include "sidet/amplitude_stats.hpp"

namespace sidet {

enum class Verdict { Continue, Alarm };

struct DetectionOutcome {
    Verdict verdict = Verdict::Continue;
    double statistic = 0.0;
    std::optional<std::uint64_t> stopping_index;
};

struct CusumConfig {
    AmplitudeModel model;
    double threshold = 1.0;

    CusumConfig() = default;
    CusumConfig(AmplitudeModel m, double h) : model(m), threshold(h) {
        if (!(h > 0.0)) throw std::invalid_argument("CusumConfig: threshold must be > 0");
        if (!(m.sigma_i > 0.0)) throw std::invalid_argument("CusumConfig: sigma_i must be > 0");
    }
};

// Recursive CUSUM over projected amplitudes: g_k = max(0, g_{k-1} + llr(r_k)),
// alarm when g_k >= h. The detector latches on alarm; continual operation is
// caller-driven via reset().
class CusumDetector {
public:
    explicit CusumDetector(CusumConfig config) : config_(std::move(config)) {}

    DetectionOutcome update(double r) {
        if (alarm_index_) throw std::logic_error("CusumDetector: update after alarm without reset");
        ++samples_;
        g_ = std::max(0.0, g_ + llr(r, config_.model));
        DetectionOutcome out;
        out.statistic = g_;
        if (g_ >= config_.threshold) {
            alarm_index_ = samples_;
            out.verdict = Verdict::Alarm;
            out.stopping_index = samples_;
        }
        return out;
    }

    // Clears the statistic and any latched alarm; the sample counter is kept
    // so alarm indices stay monotone across a continual-operation run.
    void reset() {
        g_ = 0.0;
        alarm_index_.reset();
    }

    double statistic() const { return g_; }
    std::uint64_t samples_consumed() const { return samples_; }
    std::optional<std::uint64_t> alarm_index() const { return alarm_index_; }
    const CusumConfig& config() const { return config_; }

private:
    CusumConfig config_;
    double g_ = 0.0;
    std::uint64_t samples_ = 0;
    std::optional<std::uint64_t> alarm_index_;
};

// Direct evaluation of S_k = max_{1<=n<=k} sum_{i=n..k} llr(r_i) by explicit
// scan over suffix sums. Reference implementation for equivalence tests
// against the recursion; unlike g_k it may be negative.
inline double cusum_direct_statistic(std::span<const double> history, const AmplitudeModel& model) {
    if (history.empty()) throw std::invalid_argument("cusum_direct_statistic: empty history");
    double suffix = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        suffix += llr(*it, model);
        best = std::max(best, suffix);
    }
    return best;
}

} // namespace sidet
