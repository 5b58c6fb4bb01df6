#pragma once

// Orchestrated protocols: phase auto-tuning, cooling-vs-pressure sweeps, the
// reheating protocol, heating-rate-vs-pressure fits and the measurement
// efficiency estimate built from calibration, noise floor and heating rate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "libracool/analysis.hpp"
#include "libracool/detection.hpp"
#include "libracool/dynamics.hpp"
#include "libracool/error.hpp"
#include "libracool/feedback.hpp"
#include "libracool/parallel.hpp"
#include "libracool/physics.hpp"
#include "libracool/rng.hpp"

namespace libracool {

struct ModeNoise {
    double S_ba = 0.0;       // N^2 m^2 / Hz
    double S_imp_exp = 0.0;  // V^2 / Hz

    bool operator==(const ModeNoise&) const = default;
};

/// Physical system: modes, their noise, the bath and the detector options.
struct Plant {
    std::vector<ModeParams> modes;
    std::vector<ModeNoise> noise;
    Environment env;
    DetectorOptions detector;

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& m : modes) {
            out.push_back(m.label);
        }
        return out;
    }

    std::size_t index_of(const std::string& label) const {
        for (std::size_t k = 0; k < modes.size(); ++k) {
            if (modes[k].label == label) {
                return k;
            }
        }
        throw ConfigError("unknown mode '" + label + "'");
    }

    std::vector<NoiseBudget> budgets() const {
        detail::require(noise.size() == modes.size(), "plant: one noise entry per mode required");
        std::vector<NoiseBudget> out;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            out.emplace_back(modes[k], env, noise[k].S_ba, noise[k].S_imp_exp);
        }
        return out;
    }

    DetectorChannel detector_channel(std::size_t k) const {
        return DetectorChannel{modes.at(k).calibration_c, noise.at(k).S_imp_exp, detector.lo_offset, detector.lo_phase};
    }

    Plant at_pressure(double pressure) const {
        Plant p = *this;
        p.env.pressure = pressure;
        return p;
    }

    bool operator==(const Plant&) const = default;
};

struct AnalysisOptions {
    PsdOptions psd;
    double peak_half_width = 0.06;  // fraction of f0
    double noise_inner = 0.15;
    double noise_outer = 0.25;

    PeakRegion region_for(const ModeParams& mode) const {
        return peak_region_for(mode.frequency(), peak_half_width, noise_inner, noise_outer);
    }

    bool operator==(const AnalysisOptions&) const = default;
};

struct AutotuneConfig {
    std::size_t points = 8;
    double duration = 0.005;  // s per trial, starting from a thermal state
    double lockin_bandwidth = 4000.0;

    bool operator==(const AutotuneConfig&) const = default;
};

struct ExperimentSetup {
    Plant plant;
    std::vector<FeedbackChannel> channels;
    SimConfig sim;  // seed, timing, limits; duration is the measurement window
    double settle_time = 0.01;
    AnalysisOptions analysis;
    AutotuneConfig autotune;
    std::size_t threads = 1;
};

namespace detail {

enum class SeedPurpose : std::uint64_t { autotune = 1, sweep = 2, reheat = 3, calibration = 4, floor = 5 };

inline std::uint64_t job_seed(std::uint64_t seed, SeedPurpose purpose, std::uint64_t index) {
    return rng::derive_seed(rng::derive_seed(seed, static_cast<std::uint64_t>(purpose)), index);
}

inline std::vector<double> slice(const std::vector<double>& xs, std::size_t begin, std::size_t end) {
    end = std::min(end, xs.size());
    begin = std::min(begin, end);
    return {xs.begin() + static_cast<std::ptrdiff_t>(begin), xs.begin() + static_cast<std::ptrdiff_t>(end)};
}

inline Timetrace tail(const Timetrace& tr, std::size_t skip) {
    Timetrace out = tr;
    out.samples = slice(tr.samples, skip, tr.samples.size());
    out.start_time = tr.time(std::min(skip, tr.samples.size()));
    return out;
}

}  // namespace detail

/// Simulates the plant under parametric feedback from the setup's channels.
inline TrajectoryRecord run_closed_loop(const ExperimentSetup& setup, const Plant& plant,
                                        const std::vector<FeedbackChannel>& channels, const Schedule& schedule,
                                        SimConfig sim) {
    const auto budgets = plant.budgets();
    const auto timing = resolve_timing(sim, plant.modes);
    const auto labels = plant.labels();
    ParametricFeedback fb(channels, labels, schedule, timing.dt, sim.modulation_depth_limit);
    (void)setup;
    return simulate(sim, plant.modes, plant.env, budgets, fb, plant.detector);
}

/// Per-mode steady-state thermometry on the detector channels, skipping the
/// first `skip` output samples. Uses the detector's own calibration factor.
inline std::vector<ModeTemperature> thermometry(const TrajectoryRecord& rec, const Plant& plant,
                                                const AnalysisOptions& opts, std::size_t skip) {
    detail::require(rec.detectors.size() == plant.modes.size(), "thermometry: detector channels not recorded");
    std::vector<ModeTemperature> out;
    for (std::size_t k = 0; k < plant.modes.size(); ++k) {
        const auto& mode = plant.modes[k];
        const auto trace = detail::tail(rec.detectors[k], skip);
        const double c = mode.calibration_c;
        out.push_back(measure_temperature(trace, mode, c * c, opts.psd, opts.region_for(mode)));
    }
    return out;
}

struct AutotuneResult {
    std::vector<double> psi;                    // chosen phase per channel
    std::vector<double> candidates;             // scanned phases
    std::vector<std::vector<double>> energies;  // [channel][candidate], V^2; +inf on runaway
};

/// Scans psi over `points` equally spaced values for each channel separately
/// (only that channel enabled) and keeps the phase with the lowest mean
/// lock-in energy over the second half of each trial.
inline AutotuneResult autotune_phases(const ExperimentSetup& setup) {
    const auto& cfg = setup.autotune;
    detail::require(cfg.points >= 2, "autotune: at least two phase points required");
    detail::require(cfg.duration > 0.0, "autotune: duration must be > 0");
    AutotuneResult result;
    for (std::size_t j = 0; j < cfg.points; ++j) {
        result.candidates.push_back(two_pi * static_cast<double>(j) / static_cast<double>(cfg.points));
    }
    const std::size_t n_ch = setup.channels.size();
    const std::size_t n_jobs = n_ch * cfg.points;
    const auto jobs = run_jobs(n_jobs, setup.threads, [&](std::size_t job) {
        const std::size_t c = job / cfg.points;
        const std::size_t j = job % cfg.points;
        auto channels = setup.channels;
        for (std::size_t i = 0; i < channels.size(); ++i) {
            channels[i].enabled = i == c;
        }
        channels[c].phase_psi = result.candidates[j];
        SimConfig sim = setup.sim;
        sim.duration = cfg.duration;
        sim.seed = detail::job_seed(setup.sim.seed, detail::SeedPurpose::autotune, c);
        sim.record_angles = false;
        sim.record_actuator = false;
        sim.record_torques = false;
        sim.record_detectors = true;
        const auto rec = run_closed_loop(setup, setup.plant, channels, {}, sim);
        const std::size_t k = setup.plant.index_of(channels[c].mode_label);
        const auto energy = lockin_energy(rec.detectors[k], setup.plant.modes[k].frequency(), cfg.lockin_bandwidth);
        return mean(detail::slice(energy.samples, energy.size() / 2, energy.size()));
    });
    result.energies.assign(n_ch, std::vector<double>(cfg.points, std::numeric_limits<double>::infinity()));
    for (std::size_t job = 0; job < n_jobs; ++job) {
        if (jobs[job].ok()) {
            result.energies[job / cfg.points][job % cfg.points] = *jobs[job].value;
        } else {
            try {
                std::rethrow_exception(jobs[job].error);
            } catch (const RunawayError&) {
                // heating phase: leave +inf
            }
        }
    }
    for (std::size_t c = 0; c < n_ch; ++c) {
        const auto& e = result.energies[c];
        const auto best = static_cast<std::size_t>(std::min_element(e.begin(), e.end()) - e.begin());
        result.psi.push_back(result.candidates[best]);
    }
    return result;
}

struct SweepRow {
    double pressure = 0.0;  // mbar
    std::string mode;
    double T = std::numeric_limits<double>::quiet_NaN();
    double T_stderr = std::numeric_limits<double>::quiet_NaN();
    double n_bar = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string error;
};

/// Cooled steady-state temperature of every mode at each pressure. A failing
/// pressure point yields rows with ok = false instead of aborting the sweep.
inline std::vector<SweepRow> run_cooling_sweep(const ExperimentSetup& setup, const std::vector<double>& pressures) {
    detail::require(!pressures.empty(), "cooling sweep: no pressures given");
    for (double p : pressures) {
        detail::require(p > 0.0, "cooling sweep: pressures must be > 0");
    }
    const auto jobs = run_jobs(pressures.size(), setup.threads, [&](std::size_t i) {
        const Plant plant = setup.plant.at_pressure(pressures[i]);
        SimConfig sim = setup.sim;
        sim.duration = setup.settle_time + setup.sim.duration;
        sim.seed = detail::job_seed(setup.sim.seed, detail::SeedPurpose::sweep, i);
        sim.record_angles = false;
        sim.record_actuator = false;
        const auto rec = run_closed_loop(setup, plant, setup.channels, {}, sim);
        const auto skip = static_cast<std::size_t>(std::llround(setup.settle_time * rec.timing.sample_rate_out));
        return thermometry(rec, plant, setup.analysis, skip);
    });
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < pressures.size(); ++i) {
        for (std::size_t k = 0; k < setup.plant.modes.size(); ++k) {
            SweepRow row;
            row.pressure = pressures[i];
            row.mode = setup.plant.modes[k].label;
            if (jobs[i].ok()) {
                const auto& t = (*jobs[i].value)[k];
                row.T = t.T;
                row.T_stderr = t.T_stderr;
                row.n_bar = t.n_bar;
                row.ok = true;
            } else {
                try {
                    std::rethrow_exception(jobs[i].error);
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

struct ReheatConfig {
    std::string mode = "alpha";
    double off_time = 0.6;  // s
    double on_time = 0.6;   // s between off windows
    std::size_t cycles = 50;
    double lockin_bandwidth = 4000.0;  // Hz
    double settle_time = 0.05;         // s of continuous cooling before the first cycle
    std::size_t cycles_per_job = 10;
    bool toggle_feedback = true;  // false keeps cooling on (null check)

    bool operator==(const ReheatConfig&) const = default;
};

struct ReheatResult {
    Timetrace energy;         // averaged off-window lock-in energy, V^2
    Timetrace energy_stderr;  // standard error of the average, V^2
    double e0 = 0.0;          // V^2, mean energy under continuous cooling
    double gamma_exp = 0.0;   // V^2/s
    double gamma_stderr = 0.0;  // from the scatter of per-cycle slopes
    double fit_stderr = 0.0;    // from residuals of the averaged fit
    std::size_t cycles = 0;
    std::vector<double> cycle_slopes;
    double stationarity_ratio = 1.0;
};

/// Two-halves stationarity test on a steady-state energy record.
inline double stationarity_ratio(const std::vector<double>& energy) {
    detail::require(energy.size() >= 4, "stationarity: record too short");
    const std::size_t h = energy.size() / 2;
    const double first = mean(detail::slice(energy, 0, h));
    const double second = mean(detail::slice(energy, h, energy.size()));
    return first / second;
}

/// Repeated off/on cycles of one channel; off-window lock-in energies are
/// aligned on the actuation-disable sample and averaged, and the heating rate
/// is the slope of a line pinned to the cooled baseline at t = 0.
inline ReheatResult run_reheating(const ExperimentSetup& setup, const ReheatConfig& cfg) {
    detail::require(cfg.off_time > 0.0 && cfg.on_time > 0.0 && cfg.settle_time > 0.0,
                    "reheating: off_time, on_time and settle_time must be > 0");
    detail::require(cfg.cycles >= 1 && cfg.cycles_per_job >= 1, "reheating: cycles must be >= 1");
    detail::require(cfg.lockin_bandwidth > 0.0, "reheating: lockin_bandwidth must be > 0");
    const std::size_t k = setup.plant.index_of(cfg.mode);
    const auto& mode = setup.plant.modes[k];
    bool has_channel = false;
    for (const auto& ch : setup.channels) {
        has_channel = has_channel || ch.mode_label == cfg.mode;
    }
    if (!has_channel) {
        throw ConfigError("reheating: no feedback channel for mode '" + cfg.mode + "'");
    }

    const auto timing = resolve_timing(setup.sim, setup.plant.modes);
    const double fs = timing.sample_rate_out;
    const auto n_settle = static_cast<std::size_t>(std::llround(cfg.settle_time * fs));
    const auto n_off = static_cast<std::size_t>(std::llround(cfg.off_time * fs));
    const auto n_on = static_cast<std::size_t>(std::llround(cfg.on_time * fs));
    detail::require(n_off >= 2 && n_on >= 2 && n_settle >= 4, "reheating: windows shorter than the sample period");
    const std::size_t n_period = n_off + n_on;
    const std::size_t n_jobs = (cfg.cycles + cfg.cycles_per_job - 1) / cfg.cycles_per_job;

    struct ChunkOut {
        std::vector<std::vector<double>> segments;
        std::vector<double> settled;  // last half of the settle window
    };

    const auto chunks = run_jobs_or_throw(n_jobs, setup.threads, [&](std::size_t job) {
        const std::size_t first = job * cfg.cycles_per_job;
        const std::size_t n_cycles = std::min(cfg.cycles_per_job, cfg.cycles - first);
        const std::size_t n_total = n_settle + n_cycles * n_period;
        Schedule schedule;
        if (cfg.toggle_feedback) {
            for (std::size_t c = 0; c < n_cycles; ++c) {
                const std::size_t start = n_settle + c * n_period;
                schedule.windows.push_back(ScheduleWindow{static_cast<double>(start) / fs,
                                                          static_cast<double>(start + n_off) / fs, {cfg.mode}, false});
            }
        }
        SimConfig sim = setup.sim;
        sim.duration = static_cast<double>(n_total) / fs;
        sim.seed = detail::job_seed(setup.sim.seed, detail::SeedPurpose::reheat, job);
        sim.record_angles = false;
        sim.record_actuator = false;
        sim.record_torques = false;
        sim.record_detectors = true;
        const auto rec = run_closed_loop(setup, setup.plant, setup.channels, schedule, sim);
        const auto energy = lockin_energy(rec.detectors[k], mode.frequency(), cfg.lockin_bandwidth);

        ChunkOut out;
        out.settled = detail::slice(energy.samples, n_settle / 2, n_settle);
        for (std::size_t c = 0; c < n_cycles; ++c) {
            const std::size_t start = n_settle + c * n_period;
            out.segments.push_back(detail::slice(energy.samples, start, start + n_off));
        }
        return out;
    });

    ReheatResult res;
    // Stationarity of the chunk-averaged energy over the last half of the
    // settle window.
    std::vector<double> settled(chunks.front().settled.size(), 0.0);
    for (const auto& ch : chunks) {
        for (std::size_t i = 0; i < settled.size(); ++i) {
            settled[i] += ch.settled[i] / static_cast<double>(chunks.size());
        }
    }
    res.stationarity_ratio = stationarity_ratio(settled);
    if (!(res.stationarity_ratio <= 1.5 && res.stationarity_ratio >= 1.0 / 1.5)) {
        throw ProtocolError("reheating: cooled baseline not stationary (two-halves ratio " +
                            std::to_string(res.stationarity_ratio) + "); increase settle_time");
    }

    std::vector<std::vector<double>> segments;
    for (const auto& ch : chunks) {
        segments.insert(segments.end(), ch.segments.begin(), ch.segments.end());
    }
    res.cycles = segments.size();
    // Cooled baseline: mean energy under continuous cooling.
    res.e0 = mean(settled);

    std::vector<double> t(n_off);
    for (std::size_t i = 0; i < n_off; ++i) {
        t[i] = static_cast<double>(i) / fs;
    }
    res.energy.sample_rate = fs;
    res.energy.unit = "V^2";
    res.energy.samples.assign(n_off, 0.0);
    res.energy_stderr = res.energy;
    for (const auto& seg : segments) {
        for (std::size_t i = 0; i < n_off; ++i) {
            res.energy.samples[i] += seg[i];
        }
        res.cycle_slopes.push_back(linear_fit_fixed_intercept(t, seg, res.e0).slope);
    }
    const auto n = static_cast<double>(segments.size());
    for (double& v : res.energy.samples) {
        v /= n;
    }
    if (segments.size() > 1) {
        for (const auto& seg : segments) {
            for (std::size_t i = 0; i < n_off; ++i) {
                const double d = seg[i] - res.energy.samples[i];
                res.energy_stderr.samples[i] += d * d;
            }
        }
        for (double& v : res.energy_stderr.samples) {
            v = std::sqrt(v / (n - 1.0) / n);
        }
    }
    const auto fit = linear_fit_fixed_intercept(t, res.energy.samples, res.e0);
    res.gamma_exp = fit.slope;
    res.fit_stderr = fit.slope_stderr;
    res.gamma_stderr = segments.size() > 1 ? std::sqrt(variance(res.cycle_slopes) * n / (n - 1.0) / n)
                                           : std::numeric_limits<double>::infinity();
    return res;
}

struct HeatingPoint {
    double pressure = 0.0;
    double gamma_exp = 0.0;
    double gamma_stderr = 0.0;
    double e0 = 0.0;
};

struct HeatingSweep {
    std::vector<HeatingPoint> points;
    PressureFit fit;
};

/// Reheating at each pressure followed by the fit rate = a p + res.
inline HeatingSweep run_heating_vs_pressure(const ExperimentSetup& setup, const std::vector<double>& pressures,
                                            const ReheatConfig& cfg) {
    detail::require(pressures.size() >= 3, "heating sweep: at least three pressures required");
    const auto [lo, hi] = std::minmax_element(pressures.begin(), pressures.end());
    detail::require(*lo > 0.0, "heating sweep: pressures must be > 0");
    detail::require(*hi / *lo >= 10.0 * (1.0 - 1e-12), "heating sweep: pressures must span at least one decade");
    HeatingSweep out;
    std::vector<double> p;
    std::vector<double> rate;
    std::vector<double> rate_stderr;
    for (std::size_t i = 0; i < pressures.size(); ++i) {
        ExperimentSetup s = setup;
        s.plant = setup.plant.at_pressure(pressures[i]);
        s.sim.seed = rng::derive_seed(setup.sim.seed, 7000 + i);
        const auto r = run_reheating(s, cfg);
        out.points.push_back({pressures[i], r.gamma_exp, r.gamma_stderr, r.e0});
        p.push_back(pressures[i]);
        rate.push_back(r.gamma_exp);
        rate_stderr.push_back(r.gamma_stderr);
    }
    out.fit = fit_pressure_law(p, rate, rate_stderr);
    return out;
}

struct EfficiencyInputs {
    double omega = 0.0;      // rad/s
    double v_cal_sq = 0.0;   // V^2
    double T_cal = 0.0;      // K
    double gamma_exp = 0.0;  // V^2/s
    double S_imp_exp = 0.0;  // V^2/Hz
};

/// Measurement efficiency from measured quantities only:
///   eta = (hbar/2)^2 omega^2 v_cal^4 / (kB T_cal)^2 / (gamma_exp S_imp_exp).
/// The moment of inertia is not an input.
inline double estimate_efficiency(const EfficiencyInputs& in) {
    detail::require(in.omega > 0.0 && in.v_cal_sq > 0.0 && in.T_cal > 0.0 && in.gamma_exp > 0.0 &&
                        in.S_imp_exp > 0.0,
                    "estimate_efficiency: all inputs must be > 0");
    const double half_hbar = PhysConstants::hbar / 2.0;
    const double kT = PhysConstants::kB * in.T_cal;
    const double ratio = in.omega * in.v_cal_sq / kT;
    return half_hbar * half_hbar * ratio * ratio / (in.gamma_exp * in.S_imp_exp);
}

/// Fluctuation-dissipation conversion of a heating rate in V^2/s into the
/// single-sided torque PSD: S_tau = 4 I^2 omega^2 gamma_exp / c^2.
inline double torque_psd_from_heating(double gamma_exp, double c_sq, const ModeParams& mode) {
    detail::require(c_sq > 0.0, "torque_psd_from_heating: c_sq must be > 0");
    return 4.0 * mode.inertia * mode.inertia * mode.omega0 * mode.omega0 * gamma_exp / c_sq;
}

/// Expected heating rate in V^2/s for a torque PSD (inverse of the above).
inline double heating_rate_from_torque(double S_tau, double c_sq, const ModeParams& mode) {
    return S_tau * c_sq / (4.0 * mode.inertia * mode.inertia * mode.omega0 * mode.omega0);
}

/// Detector floor that makes a channel with calibration c reach efficiency
/// eta against torque noise S_tau_total.
inline double imprecision_for_efficiency(double calibration_c, double S_tau_total, double eta) {
    detail::require(calibration_c > 0.0 && S_tau_total > 0.0 && eta > 0.0,
                    "imprecision_for_efficiency: inputs must be > 0");
    return PhysConstants::hbar * PhysConstants::hbar * calibration_c * calibration_c / (eta * S_tau_total);
}

struct EfficiencyConfig {
    std::string mode = "alpha";
    double calibration_pressure = 1.0;  // mbar, uncooled record at T_bath
    double calibration_duration = 1.0;  // s, total over all chunks
    std::size_t calibration_chunks = 4;
    double floor_duration = 0.05;  // s of cooled record used for the noise floor

    bool operator==(const EfficiencyConfig&) const = default;
};

struct EfficiencyResult {
    double v_cal_sq = 0.0;
    double c_sq = 0.0;
    double T_cal = 0.0;
    double S_imp_exp = 0.0;  // measured floor
    double gamma_exp = 0.0;
    double gamma_stderr = 0.0;
    double eta = 0.0;
    double eta_product_route = 0.0;  // hbar^2 / (S_tau S_imp) from the same measurements
    double n_min = std::numeric_limits<double>::quiet_NaN();
    double S_tau_measured = 0.0;
    double eta_true = 0.0;  // ground truth of the simulated detector
    double S_tau_true = 0.0;
    double cooled_T = 0.0;
    double cooled_n_bar = 0.0;
    ReheatResult reheat;
};

/// Calibration at known temperature, noise floor from a cooled record and the
/// reheating rate, all at the setup's pressure except the calibration.
inline EfficiencyResult run_efficiency(const ExperimentSetup& setup, const EfficiencyConfig& cfg,
                                       const ReheatConfig& reheat_cfg) {
    detail::require(cfg.calibration_pressure > 0.0, "efficiency: calibration_pressure must be > 0");
    detail::require(cfg.calibration_duration > 0.0 && cfg.calibration_chunks >= 1,
                    "efficiency: calibration_duration and chunks must be > 0");
    detail::require(cfg.floor_duration > 0.0, "efficiency: floor_duration must be > 0");
    const std::size_t k = setup.plant.index_of(cfg.mode);
    const auto& mode = setup.plant.modes[k];
    const auto region = setup.analysis.region_for(mode);
    EfficiencyResult res;
    res.T_cal = setup.plant.env.T_bath;
    detail::require(res.T_cal > 0.0, "efficiency: calibration needs T_bath > 0");

    // Uncooled calibration record, split into independent equilibrium chunks.
    const Plant cal_plant = setup.plant.at_pressure(cfg.calibration_pressure);
    const auto areas = run_jobs_or_throw(cfg.calibration_chunks, setup.threads, [&](std::size_t j) {
        SimConfig sim = setup.sim;
        sim.duration = cfg.calibration_duration / static_cast<double>(cfg.calibration_chunks);
        sim.seed = detail::job_seed(setup.sim.seed, detail::SeedPurpose::calibration, j);
        sim.initial = InitialState::thermal;
        sim.initial_states.reset();
        sim.record_angles = false;
        sim.record_actuator = false;
        sim.record_torques = false;
        sim.record_detectors = true;
        const auto budgets = cal_plant.budgets();
        const auto rec = simulate(sim, cal_plant.modes, cal_plant.env, budgets, cal_plant.detector);
        PsdOptions o = setup.analysis.psd;
        o.segment_length = std::min(o.segment_length, rec.detectors[k].size());
        return integrate_peak(welch_psd(rec.detectors[k], o), region).area;
    });
    res.v_cal_sq = mean(areas);
    res.c_sq = calibrate(res.v_cal_sq, res.T_cal, mode);

    // Noise floor and cooled temperature from continuous feedback.
    {
        SimConfig sim = setup.sim;
        sim.duration = setup.settle_time + cfg.floor_duration;
        sim.seed = detail::job_seed(setup.sim.seed, detail::SeedPurpose::floor, 0);
        sim.record_angles = false;
        sim.record_actuator = false;
        const auto rec = run_closed_loop(setup, setup.plant, setup.channels, {}, sim);
        const auto skip = static_cast<std::size_t>(std::llround(setup.settle_time * rec.timing.sample_rate_out));
        const auto trace = detail::tail(rec.detectors[k], skip);
        PsdOptions o = setup.analysis.psd;
        o.segment_length = std::min(o.segment_length, trace.size());
        const auto psd = welch_psd(trace, o);
        res.S_imp_exp = noise_floor(psd, region);
        const auto peak = integrate_peak(psd, region);
        res.cooled_T = mode_temperature(peak.area, res.c_sq, mode);
        res.cooled_n_bar = phonon_occupation(res.cooled_T, mode.omega0);
    }

    ReheatConfig rc = reheat_cfg;
    rc.mode = cfg.mode;
    res.reheat = run_reheating(setup, rc);
    res.gamma_exp = res.reheat.gamma_exp;
    res.gamma_stderr = res.reheat.gamma_stderr;

    res.eta = estimate_efficiency({mode.omega0, res.v_cal_sq, res.T_cal, res.gamma_exp, res.S_imp_exp});
    res.S_tau_measured = torque_psd_from_heating(res.gamma_exp, res.c_sq, mode);
    const double S_imp_angle = res.S_imp_exp / res.c_sq;
    res.eta_product_route = PhysConstants::hbar * PhysConstants::hbar / (res.S_tau_measured * S_imp_angle);
    if (res.eta > 0.0 && res.eta <= 1.0) {
        res.n_min = min_occupation_from_efficiency(res.eta);
    }

    const auto budget = setup.plant.budgets()[k];
    res.S_tau_true = budget.S_tau_total();
    if (res.S_tau_true > 0.0 && budget.S_imp_exp() > 0.0) {
        res.eta_true = true_efficiency(setup.plant.detector_channel(k), res.S_tau_true);
    }
    return res;
}

}  // namespace libracool
