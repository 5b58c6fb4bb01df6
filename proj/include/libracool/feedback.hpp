#pragma once

// Per-mode phase-locked loops driving parametric (2x frequency) feedback
// signals, summed onto a single clamped actuator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "libracool/error.hpp"
#include "libracool/physics.hpp"

namespace libracool {

struct PllConfig {
    double center_freq = 0.0;     // Hz
    double loop_bandwidth = 0.0;  // Hz, natural frequency of the loop
    double capture_range = 0.0;   // Hz, maximum |freq_estimate - center_freq|

    bool operator==(const PllConfig&) const = default;
};

/// Default loop for a mode: bandwidth f0/100, capture range f0/20.
inline PllConfig default_pll_config(double center_freq) {
    return PllConfig{center_freq, center_freq / 100.0, center_freq / 20.0};
}

inline void validate(const PllConfig& cfg) {
    detail::require(cfg.center_freq > 0.0, "pll: center_freq must be > 0");
    detail::require(cfg.loop_bandwidth > 0.0 && cfg.loop_bandwidth <= cfg.center_freq / 10.0,
                    "pll: loop_bandwidth must be in (0, center_freq/10]");
    detail::require(cfg.capture_range > 0.0 && cfg.capture_range < cfg.center_freq,
                    "pll: capture_range must be in (0, center_freq)");
}

/// Phase detector: the input is mixed with the NCO quadratures and both
/// products pass through two cascaded one-pole low-passes at
/// lowpass_factor * loop_bandwidth. The phase error is atan2(Q, I), which
/// makes the loop gain independent of signal amplitude. A proportional-integral
/// filter with damping 1/sqrt(2) steers the NCO frequency.
struct PllState {
    double nco_phase = 0.0;      // rad, wrapped to [0, 2 pi)
    double nco_cos = 1.0;        // cos/sin(nco_phase), advanced by rotation
    double nco_sin = 0.0;
    double freq_estimate = 0.0;  // Hz
    double integrator = 0.0;     // Hz, integral branch of the loop filter
    double i_lp[2] = {0.0, 0.0};
    double q_lp[2] = {0.0, 0.0};
    double lock_filter = 0.0;
    double phase_error = 0.0;

    /// Slow average of cos(phase error), clipped to [0, 1].
    double lock_metric() const { return std::clamp(lock_filter, 0.0, 1.0); }
};

inline constexpr double pll_lowpass_factor = 10.0;
inline constexpr double pll_damping = std::numbers::sqrt2 / 2.0;

inline double wrap_phase(double phase) {
    phase = std::fmod(phase, two_pi);
    return phase < 0.0 ? phase + two_pi : phase;
}

inline PllState make_pll_state(const PllConfig& cfg, double initial_phase = 0.0) {
    PllState s;
    s.nco_phase = wrap_phase(initial_phase);
    s.nco_cos = std::cos(s.nco_phase);
    s.nco_sin = std::sin(s.nco_phase);
    s.freq_estimate = cfg.center_freq;
    return s;
}

struct PllOutput {
    double phase;  // rad, NCO phase at the current sample
    double freq;   // Hz
    double cos_phase;
    double sin_phase;
};

/// Precomputed per-sample-period loop coefficients.
struct PllCoefficients {
    double lp_alpha = 0.0;
    double lock_alpha = 0.0;
    double kp = 0.0;  // Hz per rad
    double ki = 0.0;  // Hz per rad per s
    double center_increment = 0.0;
    double cos_center = 1.0;
    double sin_center = 0.0;

    PllCoefficients() = default;
    PllCoefficients(const PllConfig& cfg, double dt) {
        const double wn = two_pi * cfg.loop_bandwidth;
        lp_alpha = -std::expm1(-two_pi * pll_lowpass_factor * cfg.loop_bandwidth * dt);
        lock_alpha = -std::expm1(-two_pi * cfg.loop_bandwidth * dt / 4.0);
        kp = 2.0 * pll_damping * wn / two_pi;
        ki = wn * wn / two_pi;
        center_increment = two_pi * cfg.center_freq * dt;
        cos_center = std::cos(center_increment);
        sin_center = std::sin(center_increment);
    }
};

inline PllOutput pll_step(PllState& st, const PllConfig& cfg, const PllCoefficients& k, double sample, double dt) {
    const double c = st.nco_cos;
    const double s = st.nco_sin;
    const PllOutput out{st.nco_phase, st.freq_estimate, c, s};

    const double i_raw = 2.0 * sample * c;
    const double q_raw = -2.0 * sample * s;
    st.i_lp[0] += k.lp_alpha * (i_raw - st.i_lp[0]);
    st.q_lp[0] += k.lp_alpha * (q_raw - st.q_lp[0]);
    st.i_lp[1] += k.lp_alpha * (st.i_lp[0] - st.i_lp[1]);
    st.q_lp[1] += k.lp_alpha * (st.q_lp[0] - st.q_lp[1]);

    const double i = st.i_lp[1];
    const double q = st.q_lp[1];
    const double mag = std::sqrt(i * i + q * q);
    const double err = mag > 0.0 ? std::atan2(q, i) : 0.0;
    const double cos_err = mag > 0.0 ? i / mag : 0.0;
    st.phase_error = err;
    st.lock_filter += k.lock_alpha * (cos_err - st.lock_filter);

    st.integrator = std::clamp(st.integrator + k.ki * err * dt, -cfg.capture_range, cfg.capture_range);
    st.freq_estimate = std::clamp(cfg.center_freq + st.integrator + k.kp * err,
                                  cfg.center_freq - cfg.capture_range, cfg.center_freq + cfg.capture_range);

    const double delta = two_pi * (st.freq_estimate - cfg.center_freq) * dt;
    double cr = 0.0;
    double sr = 0.0;
    detail::rotate_angle(k.cos_center, k.sin_center, delta, cr, sr);
    const double nc = c * cr - s * sr;
    const double ns = s * cr + c * sr;
    // Undo the slow norm drift of the repeated rotation.
    const double renorm = 1.5 - 0.5 * (nc * nc + ns * ns);
    st.nco_cos = nc * renorm;
    st.nco_sin = ns * renorm;
    st.nco_phase += k.center_increment + delta;
    if (st.nco_phase >= two_pi) {
        st.nco_phase = wrap_phase(st.nco_phase);
    }
    return out;
}

/// Convenience overload that derives the loop coefficients on every call.
inline PllOutput pll_step(PllState& st, const PllConfig& cfg, double sample, double dt) {
    detail::require(dt * cfg.center_freq < 0.5, "pll: phase advance per sample must stay below pi");
    return pll_step(st, cfg, PllCoefficients(cfg, dt), sample, dt);
}

/// u_k = G sin(2 phase + psi).
inline double parametric_signal(double phase, double gain, double psi) {
    return gain * std::sin(2.0 * phase + psi);
}

/// Sum of channel signals clamped to [-limit, +limit]; empty input gives 0.
inline double combine_channels(std::span<const double> values, double limit) {
    detail::require(limit > 0.0, "combine_channels: limit must be > 0");
    double sum = 0.0;
    for (double v : values) {
        if (std::isnan(v)) {
            throw InvalidInput("combine_channels: NaN feedback value");
        }
        sum += v;
    }
    return std::clamp(sum, -limit, limit);
}

struct FeedbackChannel {
    std::string mode_label;
    PllConfig pll;
    double gain = 0.0;       // dimensionless modulation amplitude
    double phase_psi = 0.0;  // rad
    bool enabled = true;     // static flag, used outside any schedule window
    bool active = true;      // current state after applying the schedule

    bool operator==(const FeedbackChannel& o) const {
        return mode_label == o.mode_label && pll == o.pll && gain == o.gain && phase_psi == o.phase_psi &&
               enabled == o.enabled;
    }
};

/// One window forcing a set of channels on or off over [t_start, t_end).
struct ScheduleWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<std::string> channels;
    bool enabled = false;

    bool operator==(const ScheduleWindow&) const = default;
};

struct Schedule {
    std::vector<ScheduleWindow> windows;

    bool operator==(const Schedule&) const = default;
};

/// Checks ordering, bounds, label resolution and per-channel overlap.
inline void validate_schedule(const Schedule& schedule, std::span<const std::string> labels, double duration) {
    for (std::size_t i = 0; i < schedule.windows.size(); ++i) {
        const auto& w = schedule.windows[i];
        const std::string where = "schedule[" + std::to_string(i) + "]: ";
        if (!(w.t_start >= 0.0 && w.t_end > w.t_start)) {
            throw ConfigError(where + "window must satisfy 0 <= t_start < t_end");
        }
        if (duration > 0.0 && w.t_end > duration * (1.0 + 1e-12)) {
            throw ConfigError(where + "window ends after the simulation duration");
        }
        for (const auto& ch : w.channels) {
            if (std::find(labels.begin(), labels.end(), ch) == labels.end()) {
                throw ConfigError(where + "unknown channel '" + ch + "'");
            }
        }
        for (std::size_t j = 0; j < i; ++j) {
            const auto& o = schedule.windows[j];
            const bool overlap_time = w.t_start < o.t_end && o.t_start < w.t_end;
            if (!overlap_time) {
                continue;
            }
            for (const auto& ch : w.channels) {
                if (std::find(o.channels.begin(), o.channels.end(), ch) != o.channels.end()) {
                    throw ConfigError(where + "overlaps schedule[" + std::to_string(j) + "] on channel '" + ch + "'");
                }
            }
        }
    }
}

namespace detail {
inline bool time_reached(double t, double boundary) {
    return t + 1e-12 * std::max(1.0, std::abs(t)) >= boundary;
}
}  // namespace detail

/// Sets each channel's `active` flag for time t. PLLs are unaffected.
inline void apply_schedule(const Schedule& schedule, double t, std::span<FeedbackChannel> channels) {
    for (auto& ch : channels) {
        ch.active = ch.enabled;
        for (const auto& w : schedule.windows) {
            if (detail::time_reached(t, w.t_start) && !detail::time_reached(t, w.t_end) &&
                std::find(w.channels.begin(), w.channels.end(), ch.mode_label) != w.channels.end()) {
                ch.active = w.enabled;
            }
        }
    }
}

/// First sample index n with n*dt >= t (up to rounding of t).
inline std::size_t sample_index_at(double t, double dt) {
    const double x = t / dt;
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) {
        return static_cast<std::size_t>(std::max(0.0, r));
    }
    return static_cast<std::size_t>(std::max(0.0, std::ceil(x)));
}

/// Closed-loop controller for `simulate`: one PLL per feedback channel locks
/// onto that mode's detector output; each active channel contributes
/// G sin(2 phase + psi); the sum is clamped to the modulation depth limit.
class ParametricFeedback {
public:
    /// `mode_labels[k]` names the mode seen on detector k.
    ParametricFeedback(std::vector<FeedbackChannel> channels, std::span<const std::string> mode_labels,
                       Schedule schedule, double dt, double limit)
        : channels_(std::move(channels)), schedule_(std::move(schedule)), dt_(dt), limit_(limit) {
        detail::require(dt > 0.0, "feedback: dt must be > 0");
        detail::require(limit > 0.0 && limit < 1.0, "feedback: limit must lie in (0, 1)");
        std::vector<std::string> labels;
        for (const auto& ch : channels_) {
            labels.push_back(ch.mode_label);
        }
        validate_schedule(schedule_, labels, 0.0);
        for (auto& ch : channels_) {
            validate(ch.pll);
            detail::require(ch.gain >= 0.0 && std::isfinite(ch.gain), "feedback: gain must be >= 0");
            detail::require(dt * ch.pll.center_freq < 0.5, "feedback: dt too coarse for PLL center frequency");
            const auto it = std::find(mode_labels.begin(), mode_labels.end(), ch.mode_label);
            if (it == mode_labels.end()) {
                throw ConfigError("feedback channel refers to unknown mode '" + ch.mode_label + "'");
            }
            Runtime rt;
            rt.detector_index = static_cast<std::size_t>(it - mode_labels.begin());
            rt.state = make_pll_state(ch.pll);
            rt.coeffs = PllCoefficients(ch.pll, dt);
            rt.cos_psi = std::cos(ch.phase_psi);
            rt.sin_psi = std::sin(ch.phase_psi);
            for (const auto& w : schedule_.windows) {
                if (std::find(w.channels.begin(), w.channels.end(), ch.mode_label) != w.channels.end()) {
                    rt.windows.push_back({sample_index_at(w.t_start, dt), sample_index_at(w.t_end, dt), w.enabled});
                }
            }
            std::sort(rt.windows.begin(), rt.windows.end(),
                      [](const auto& a, const auto& b) { return a.begin < b.begin; });
            runtime_.push_back(std::move(rt));
        }
        values_.resize(channels_.size());
    }

    double actuate(std::size_t step, double /*t*/, std::span<const double> detector) {
        for (std::size_t k = 0; k < channels_.size(); ++k) {
            auto& ch = channels_[k];
            auto& rt = runtime_[k];
            const auto out = pll_step(rt.state, ch.pll, rt.coeffs, detector[rt.detector_index], dt_);
            ch.active = active_at(rt, ch.enabled, step);
            if (ch.active && ch.gain > 0.0) {
                // sin(2 phase + psi) from the NCO quadratures already at hand.
                const double sin2 = 2.0 * out.sin_phase * out.cos_phase;
                const double cos2 = out.cos_phase * out.cos_phase - out.sin_phase * out.sin_phase;
                values_[k] = ch.gain * (sin2 * rt.cos_psi + cos2 * rt.sin_psi);
            } else {
                values_[k] = 0.0;
            }
        }
        return combine_channels(values_, limit_);
    }

    std::span<const FeedbackChannel> channels() const { return channels_; }
    const PllState& pll_state(std::size_t k) const { return runtime_.at(k).state; }

private:
    struct IndexWindow {
        std::size_t begin;
        std::size_t end;
        bool enabled;
    };
    struct Runtime {
        std::size_t detector_index = 0;
        PllState state;
        PllCoefficients coeffs;
        double cos_psi = 1.0;
        double sin_psi = 0.0;
        std::vector<IndexWindow> windows;
        std::size_t cursor = 0;
    };

    static bool active_at(Runtime& rt, bool fallback, std::size_t step) {
        while (rt.cursor < rt.windows.size() && rt.windows[rt.cursor].end <= step) {
            ++rt.cursor;
        }
        if (rt.cursor < rt.windows.size() && rt.windows[rt.cursor].begin <= step) {
            return rt.windows[rt.cursor].enabled;
        }
        return fallback;
    }

    std::vector<FeedbackChannel> channels_;
    Schedule schedule_;
    std::vector<Runtime> runtime_;
    std::vector<double> values_;
    double dt_;
    double limit_;
};

/// Controller that never actuates.
struct NoFeedback {
    double actuate(std::size_t, double, std::span<const double>) { return 0.0; }
};

}  // namespace libracool
