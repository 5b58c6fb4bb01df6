#pragma once

// Stochastic integration of independent libration modes that share a single
// stiffness-modulating actuator.
//
// Equation of motion per mode:
//   I theta'' + I gamma theta' + I omega0^2 (1 + u(t)) theta = tau(t)
//
// One step of length dt (Lie splitting, first order in the dissipative part):
//   1. kick:   v <- v - gamma v dt + (tau_n / I) dt,
//              tau_n ~ N(0, S_tau / (2 dt))      (single-sided white noise)
//   2. rotate: (theta, v) advance along the exact harmonic flow with
//              Omega = omega0 sqrt(1 + u_n) for time dt:
//                theta' = theta cos(Omega dt) + (v / Omega) sin(Omega dt)
//                v'     = -theta Omega sin(Omega dt) + v cos(Omega dt)
// cos/sin(Omega dt) are evaluated as a rotation of the precomputed u = 0 angle
// by delta = omega0 dt (sqrt(1 + u) - 1) using Taylor series in delta, which is
// exact to double precision for |delta| < 1e-2.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "libracool/detection.hpp"
#include "libracool/error.hpp"
#include "libracool/physics.hpp"
#include "libracool/rng.hpp"
#include "libracool/timetrace.hpp"

namespace libracool {

struct OscState {
    double theta = 0.0;      // rad
    double theta_dot = 0.0;  // rad/s

    bool operator==(const OscState&) const = default;
};

enum class InitialState { thermal, zero };

struct SimConfig {
    double dt = 0.0;               // s; 0 derives it from sample_rate_out and the fastest mode
    double duration = 0.01;        // s
    std::uint64_t seed = 1;
    double sample_rate_out = 0.0;  // Hz; 0 selects 5x the fastest mode frequency
    double modulation_depth_limit = 0.01;
    double runaway_bound = 0.0;    // rad; 0 selects max(0.5, 20 x thermal rms at T_bath) per mode
    InitialState initial = InitialState::thermal;
    std::optional<std::vector<OscState>> initial_states;  // overrides `initial` when set

    bool record_angles = true;
    bool record_detectors = true;
    bool record_actuator = true;
    bool record_torques = false;  // diagnostic

    bool operator==(const SimConfig&) const = default;
};

/// Discretisation actually used for a run.
struct Timing {
    double dt = 0.0;
    std::size_t decimation = 1;
    double sample_rate_out = 0.0;
    std::size_t steps = 0;
};

inline constexpr double steps_per_period_min = 50.0;

inline double max_frequency(std::span<const ModeParams> modes) {
    double f = 0.0;
    for (const auto& m : modes) {
        f = std::max(f, m.frequency());
    }
    return f;
}

inline Timing resolve_timing(const SimConfig& cfg, std::span<const ModeParams> modes) {
    detail::require(!modes.empty(), "simulate: at least one mode required");
    detail::require(cfg.duration > 0.0 && std::isfinite(cfg.duration), "simulate: duration must be > 0");
    detail::require(cfg.modulation_depth_limit > 0.0 && cfg.modulation_depth_limit < 1.0,
                    "simulate: modulation_depth_limit must lie in (0, 1)");
    const double f_max = max_frequency(modes);
    Timing t;
    t.sample_rate_out = cfg.sample_rate_out > 0.0 ? cfg.sample_rate_out : 5.0 * f_max;
    detail::require(t.sample_rate_out > 2.0 * f_max, "simulate: sample_rate_out must exceed twice the fastest mode");
    const double dt_max = 1.0 / (steps_per_period_min * f_max);
    if (cfg.dt > 0.0) {
        detail::require(cfg.dt <= dt_max * (1.0 + 1e-9), "simulate: dt must resolve 50 steps per fastest period");
        const double ratio = 1.0 / (cfg.dt * t.sample_rate_out);
        const double k = std::round(ratio);
        detail::require(k >= 1.0 && std::abs(ratio - k) <= 1e-9 * k,
                        "simulate: sample_rate_out * dt must be the inverse of an integer");
        t.dt = cfg.dt;
        t.decimation = static_cast<std::size_t>(k);
    } else {
        t.decimation = static_cast<std::size_t>(std::ceil(steps_per_period_min * f_max / t.sample_rate_out - 1e-9));
        t.decimation = std::max<std::size_t>(t.decimation, 1);
        t.dt = 1.0 / (static_cast<double>(t.decimation) * t.sample_rate_out);
    }
    t.steps = static_cast<std::size_t>(std::llround(cfg.duration / t.dt));
    detail::require(t.steps >= 2 * t.decimation, "simulate: duration shorter than two output samples");
    return t;
}

/// Advances one mode by one step with fixed (omega0, gamma, dt).
class ModeStepper {
public:
    ModeStepper(double omega0, double gamma, double inertia, double dt)
        : omega0_(omega0), gamma_dt_(gamma * dt), dt_over_inertia_(dt / inertia), base_angle_(omega0 * dt),
          cos_base_(std::cos(omega0 * dt)), sin_base_(std::sin(omega0 * dt)) {}

    OscState advance(OscState s, double u, double torque) const {
        s.theta_dot += -gamma_dt_ * s.theta_dot + torque * dt_over_inertia_;
        double c = cos_base_;
        double sn = sin_base_;
        double omega = omega0_;
        if (u != 0.0) {
            const double root = std::sqrt(1.0 + u);
            omega = omega0_ * root;
            detail::rotate_angle(cos_base_, sin_base_, base_angle_ * (root - 1.0), c, sn);
        }
        const double theta = s.theta * c + (s.theta_dot / omega) * sn;
        const double theta_dot = -s.theta * omega * sn + s.theta_dot * c;
        return OscState{theta, theta_dot};
    }

private:
    double omega0_;
    double gamma_dt_;
    double dt_over_inertia_;
    double base_angle_;
    double cos_base_;
    double sin_base_;
};

inline bool finite(const OscState& s) { return std::isfinite(s.theta) && std::isfinite(s.theta_dot); }

/// Single integration step; `noise_torque` is the torque sample held over dt.
inline OscState step_mode(const OscState& state, const ModeParams& mode, double gamma, double u, double noise_torque,
                          double dt, std::size_t step_index = 0) {
    if (!finite(state) || std::isnan(gamma) || std::isnan(u) || std::isnan(noise_torque) || std::isnan(dt)) {
        throw IntegrationFault(step_index, "step_mode: NaN input at step " + std::to_string(step_index));
    }
    detail::require(dt > 0.0, "step_mode: dt must be > 0");
    return ModeStepper(mode.omega0, gamma, mode.inertia, dt).advance(state, u, noise_torque);
}

/// Energy (1/2) I (theta_dot^2 + omega0^2 theta^2).
inline double oscillator_energy(const OscState& s, const ModeParams& mode) {
    return 0.5 * mode.inertia * (s.theta_dot * s.theta_dot + mode.omega0 * mode.omega0 * s.theta * s.theta);
}

struct TrajectoryRecord {
    std::vector<std::string> labels;
    std::vector<Timetrace> angles;     // rad, one per mode
    std::vector<Timetrace> detectors;  // V, one per mode
    std::vector<Timetrace> torques;    // N m, one per mode (diagnostic)
    Timetrace actuator;                // dimensionless, clamped
    std::vector<OscState> final_states;
    Timing timing;
};

/// Controller hook: called once per internal step with the detector samples of
/// every mode; returns the requested actuator value.
template <class C>
concept Controller = requires(C& c, std::size_t step, double t, std::span<const double> v) {
    { c.actuate(step, t, v) } -> std::convertible_to<double>;
};

struct DetectorOptions {
    double lo_offset = 0.0;  // Hz
    double lo_phase = 0.0;   // rad

    bool operator==(const DetectorOptions&) const = default;
};

inline double default_runaway_bound(const ModeParams& mode, double T_bath) {
    return std::max(0.5, 20.0 * std::sqrt(equilibrium_angle_variance(mode, T_bath)));
}

/// Closed-loop run: per internal step, detect -> controller -> clamp -> step.
///
/// Output channels are picked off every `decimation` steps. The detector
/// imprecision noise is block-averaged over the same stride, which equals an
/// ideal anti-alias filter for the white noise while leaving the (band-limited)
/// mode signals unfiltered; the recorded noise floor therefore stays at
/// S_imp_exp. The diagnostic torque channel is treated the same way.
template <Controller C>
TrajectoryRecord simulate(const SimConfig& cfg, std::span<const ModeParams> modes, const Environment& env,
                          std::span<const NoiseBudget> budgets, C& controller, const DetectorOptions& det_opts = {}) {
    validate(env);
    for (const auto& m : modes) {
        validate(m);
    }
    detail::require(budgets.size() == modes.size(), "simulate: one noise budget per mode required");
    if (cfg.initial_states) {
        detail::require(cfg.initial_states->size() == modes.size(), "simulate: one initial state per mode required");
    }
    const Timing timing = resolve_timing(cfg, modes);
    const std::size_t n_modes = modes.size();
    const std::size_t k_dec = timing.decimation;
    const double dt = timing.dt;

    struct ModeRuntime {
        ModeStepper stepper;
        DetectorChannel detector;
        double sigma_th;
        double sigma_ba;
        double sigma_imp;
        double bound;
        rng::NormalStream thermal;
        rng::NormalStream backaction;
        rng::NormalStream imprecision;
        OscState state;
        double theta_pick = 0.0;
        double signal_pick = 0.0;
        double noise_acc = 0.0;
        double torque_acc = 0.0;
    };

    std::vector<ModeRuntime> rt;
    rt.reserve(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        const auto& m = modes[k];
        const auto idx = static_cast<std::uint32_t>(k);
        const double gamma = damping_from_pressure(m, env.pressure);
        const auto det = make_detector(m, budgets[k], det_opts.lo_offset, det_opts.lo_phase);
        OscState init;
        if (cfg.initial_states) {
            init = (*cfg.initial_states)[k];
        } else if (cfg.initial == InitialState::thermal) {
            rng::NormalStream s(cfg.seed, idx, rng::StreamKind::initial_state);
            const double var = equilibrium_angle_variance(m, env.T_bath);
            init.theta = std::sqrt(var) * s.normal();
            init.theta_dot = m.omega0 * std::sqrt(var) * s.normal();
        }
        rt.push_back(ModeRuntime{
            ModeStepper(m.omega0, gamma, m.inertia, dt),
            det,
            std::sqrt(budgets[k].S_th() / (2.0 * dt)),
            std::sqrt(budgets[k].S_ba() / (2.0 * dt)),
            det.noise_sigma(1.0 / dt),
            cfg.runaway_bound > 0.0 ? cfg.runaway_bound : default_runaway_bound(m, env.T_bath),
            rng::NormalStream(cfg.seed, idx, rng::StreamKind::thermal),
            rng::NormalStream(cfg.seed, idx, rng::StreamKind::backaction),
            rng::NormalStream(cfg.seed, idx, rng::StreamKind::imprecision),
            init,
        });
    }

    const std::size_t n_out = timing.steps / k_dec;
    const std::size_t steps = n_out * k_dec;
    TrajectoryRecord rec;
    rec.timing = timing;
    rec.timing.steps = steps;
    const auto make_trace = [&](const char* unit) {
        Timetrace tr;
        tr.sample_rate = timing.sample_rate_out;
        tr.unit = unit;
        tr.samples.reserve(n_out);
        return tr;
    };
    for (const auto& m : modes) {
        rec.labels.push_back(m.label);
        if (cfg.record_angles) {
            rec.angles.push_back(make_trace("rad"));
        }
        if (cfg.record_detectors) {
            rec.detectors.push_back(make_trace("V"));
        }
        if (cfg.record_torques) {
            rec.torques.push_back(make_trace("N m"));
        }
    }
    if (cfg.record_actuator) {
        rec.actuator = make_trace("1");
    }

    std::vector<double> v(n_modes, 0.0);
    const double limit = cfg.modulation_depth_limit;
    const double inv_k = 1.0 / static_cast<double>(k_dec);
    double u_pick = 0.0;

    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const std::size_t phase = n % k_dec;
        for (std::size_t k = 0; k < n_modes; ++k) {
            auto& r = rt[k];
            const double noise = r.sigma_imp > 0.0 ? r.sigma_imp * r.imprecision.normal() : 0.0;
            const double signal = measure(r.state.theta, r.detector, 0.0, t);
            v[k] = signal + noise;
            if (phase == 0) {
                r.theta_pick = r.state.theta;
                r.signal_pick = signal;
                r.noise_acc = 0.0;
                r.torque_acc = 0.0;
            }
            r.noise_acc += noise;
        }

        double u = static_cast<double>(controller.actuate(n, t, std::span<const double>(v)));
        if (std::isnan(u)) {
            throw IntegrationFault(n, "simulate: controller returned NaN at step " + std::to_string(n));
        }
        u = std::clamp(u, -limit, limit);
        if (phase == 0) {
            u_pick = u;
        }

        for (std::size_t k = 0; k < n_modes; ++k) {
            auto& r = rt[k];
            double torque = 0.0;
            if (r.sigma_th > 0.0) {
                torque += r.sigma_th * r.thermal.normal();
            }
            if (r.sigma_ba > 0.0) {
                torque += r.sigma_ba * r.backaction.normal();
            }
            r.torque_acc += torque;
            r.state = r.stepper.advance(r.state, u, torque);
            if (!finite(r.state)) {
                throw IntegrationFault(n, "simulate: non-finite state in mode '" + modes[k].label + "' at step " +
                                              std::to_string(n));
            }
            if (std::abs(r.state.theta) > r.bound) {
                throw RunawayError(n, modes[k].label, r.state.theta,
                                   "simulate: mode '" + modes[k].label + "' exceeded |theta| bound " +
                                       std::to_string(r.bound) + " rad at t = " + std::to_string(t) + " s (theta = " +
                                       std::to_string(r.state.theta) + ")");
            }
        }

        if (phase == k_dec - 1) {
            for (std::size_t k = 0; k < n_modes; ++k) {
                auto& r = rt[k];
                if (cfg.record_angles) {
                    rec.angles[k].samples.push_back(r.theta_pick);
                }
                if (cfg.record_detectors) {
                    rec.detectors[k].samples.push_back(r.signal_pick + r.noise_acc * inv_k);
                }
                if (cfg.record_torques) {
                    rec.torques[k].samples.push_back(r.torque_acc * inv_k);
                }
            }
            if (cfg.record_actuator) {
                rec.actuator.samples.push_back(u_pick);
            }
        }
    }
    for (const auto& r : rt) {
        rec.final_states.push_back(r.state);
    }
    return rec;
}

/// Open-loop convenience overload.
inline TrajectoryRecord simulate(const SimConfig& cfg, std::span<const ModeParams> modes, const Environment& env,
                                 std::span<const NoiseBudget> budgets, const DetectorOptions& det_opts = {}) {
    struct Idle {
        double actuate(std::size_t, double, std::span<const double>) { return 0.0; }
    } idle;
    return simulate(cfg, modes, env, budgets, idle, det_opts);
}

}  // namespace libracool
