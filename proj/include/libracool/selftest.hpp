#pragma once

// Fast built-in checks: the closed-form examples of every module plus a few
// analytic oracles. Each check reports pass/fail with the observed value.

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "libracool/analysis.hpp"
#include "libracool/detection.hpp"
#include "libracool/dynamics.hpp"
#include "libracool/error.hpp"
#include "libracool/experiments.hpp"
#include "libracool/feedback.hpp"
#include "libracool/io.hpp"
#include "libracool/physics.hpp"
#include "libracool/rng.hpp"

namespace libracool {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

namespace detail {

inline bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::abs(b); }

inline std::string fmt(double x) { return format_number(x); }

template <class F>
bool throws_error(F&& f) {
    try {
        f();
    } catch (const Error&) {
        return true;
    }
    return false;
}

inline Timetrace tone(double amplitude, double f, double fs, std::size_t n, double phase = 0.0) {
    Timetrace tr;
    tr.sample_rate = fs;
    tr.unit = "V";
    tr.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tr.samples[i] = amplitude * std::sin(two_pi * f * static_cast<double>(i) / fs + phase);
    }
    return tr;
}

}  // namespace detail

inline std::vector<CheckResult> run_selftest() {
    using detail::fmt;
    using detail::rel_close;
    std::vector<CheckResult> out;
    const auto check = [&](std::string name, const std::function<std::pair<bool, std::string>()>& body) {
        CheckResult r{std::move(name), false, ""};
        try {
            std::tie(r.ok, r.detail) = body();
        } catch (const std::exception& e) {
            r.ok = false;
            r.detail = std::string("unexpected exception: ") + e.what();
        }
        out.push_back(std::move(r));
    };
    const ModeParams mode{"m", 1e-32, two_pi * 330e3, 6.283, 1.0, 10.0};

    // physics-core
    check("damping scales linearly with pressure", [&] {
        const double g = damping_from_pressure(mode, 0.5);
        return std::pair{rel_close(g, 3.1415, 1e-12), fmt(g)};
    });
    check("damping vanishes at p = 0", [&] {
        return std::pair{damping_from_pressure(mode, 0.0) == 0.0, std::string("0")};
    });
    check("negative pressure rejected",
          [&] { return std::pair{detail::throws_error([&] { damping_from_pressure(mode, -1.0); }), std::string()}; });
    check("thermal torque PSD zero at T = 0",
          [&] { return std::pair{thermal_torque_psd(1e-32, 1.0, 0.0) == 0.0, std::string()}; });
    check("thermal torque PSD linear in gamma", [&] {
        const double a = thermal_torque_psd(1e-32, 1e-2, 295.0);
        const double b = thermal_torque_psd(1e-32, 2e-2, 295.0);
        return std::pair{rel_close(b, 2.0 * a, 1e-15), fmt(b / a)};
    });
    check("n_bar = 0.5 at kB T = hbar omega", [&] {
        const double T = PhysConstants::hbar * mode.omega0 / PhysConstants::kB;
        const double n = phonon_occupation(T, mode.omega0);
        return std::pair{std::abs(n - 0.5) < 1e-12, fmt(n)};
    });
    check("n_min(1) = 0", [] {
        const double n = min_occupation_from_efficiency(1.0);
        return std::pair{n == 0.0, fmt(n)};
    });
    check("n_min(0.005) = 6.571", [] {
        const double n = min_occupation_from_efficiency(0.005);
        return std::pair{std::abs(n - 6.571067811865475) < 1e-9, fmt(n)};
    });
    check("n_min(0.0053) rounds to 6.4", [] {
        const double n = min_occupation_from_efficiency(0.0053);
        return std::pair{std::round(n * 10.0) / 10.0 == 6.4, fmt(n)};
    });
    check("Reference frequency and occupation pairs invert consistently", [] {
        const std::pair<double, double> rows[] = {{1.34e-3, 84.0}, {15e-3, 2298.0}, {4.1e-3, 742.0}};
        std::ostringstream os;
        bool ok = true;
        for (const auto& [T, n] : rows) {
            const double omega = PhysConstants::kB * T / (PhysConstants::hbar * (n + 0.5));
            const double back = phonon_occupation(T, omega);
            ok = ok && std::abs(back - n) <= 1.0;
            os << fmt(omega / two_pi) << " Hz ";
        }
        return std::pair{ok, os.str()};
    });

    // dynamics
    check("energy conserved over 1e4 periods without damping or noise", [&] {
        const double dt = 1.0 / (50.0 * mode.frequency());
        const ModeStepper stepper(mode.omega0, 0.0, mode.inertia, dt);
        OscState s{1e-3, 0.0};
        const double e0 = oscillator_energy(s, mode);
        for (int i = 0; i < 500000; ++i) {
            s = stepper.advance(s, 0.0, 0.0);
        }
        const double drift = std::abs(oscillator_energy(s, mode) / e0 - 1.0);
        return std::pair{drift < 1e-6, fmt(drift)};
    });
    check("same seed gives identical trajectories", [&] {
        SimConfig sim;
        sim.duration = 2e-4;
        sim.seed = 7;
        const std::vector<ModeParams> modes{mode};
        const Environment env{1.0, 295.0};
        const std::vector<NoiseBudget> b{NoiseBudget(mode, env, 1e-54, 1e-12)};
        const auto r1 = simulate(sim, modes, env, b);
        const auto r2 = simulate(sim, modes, env, b);
        return std::pair{r1.detectors[0].samples == r2.detectors[0].samples && r1.final_states == r2.final_states,
                         std::string()};
    });

    // detection
    check("noiseless detector gives v = c theta", [] {
        const DetectorChannel ch{10.0, 0.0, 0.0, 0.0};
        return std::pair{measure(0.25, ch, 0.0) == 2.5, fmt(measure(0.25, ch, 0.0))};
    });
    check("true efficiency is 1 at the Heisenberg product", [] {
        const DetectorChannel ch{10.0, PhysConstants::hbar * PhysConstants::hbar * 100.0 / 1e-50, 0.0, 0.0};
        const double eta = true_efficiency(ch, 1e-50);
        return std::pair{rel_close(eta, 1.0, 1e-12), fmt(eta)};
    });
    check("true efficiency invariant under detector gain", [] {
        const DetectorChannel a{10.0, 1e-12, 0.0, 0.0};
        const DetectorChannel b{30.0, 9e-12, 0.0, 0.0};
        return std::pair{rel_close(true_efficiency(a, 1e-52), true_efficiency(b, 1e-52), 1e-12), std::string()};
    });

    // feedback
    check("parametric signal closed forms", [] {
        const bool ok = parametric_signal(1.0, 0.0, 0.3) == 0.0 && parametric_signal(0.0, 0.1, 0.0) == 0.0 &&
                        rel_close(parametric_signal(std::numbers::pi / 4.0, 0.1, 0.0), 0.1, 1e-15);
        return std::pair{ok, std::string()};
    });
    check("channel combination clamps and cancels", [] {
        const double a[] = {0.3, 0.4};
        const double c[] = {0.1, -0.1};
        const bool ok = combine_channels(a, 0.5) == 0.5 && combine_channels({}, 0.5) == 0.0 &&
                        combine_channels(c, 0.5) == 0.0;
        return std::pair{ok, std::string()};
    });
    check("schedule boundary takes effect on that sample", [] {
        Schedule s;
        s.windows.push_back({1e-3, 2e-3, {"m"}, false});
        std::vector<FeedbackChannel> ch(1);
        ch[0].mode_label = "m";
        apply_schedule(s, 1e-3, ch);
        const bool off = !ch[0].active;
        apply_schedule(s, 2e-3, ch);
        return std::pair{off && ch[0].active, std::string()};
    });
    check("PLL locks on a clean tone", [] {
        const double f = 33e3;
        const auto cfg = default_pll_config(f);
        const double dt = 1.0 / (50.0 * f);
        auto st = make_pll_state(cfg);
        const auto n = static_cast<std::size_t>(10.0 / cfg.loop_bandwidth / dt);
        for (std::size_t i = 0; i < n; ++i) {
            pll_step(st, cfg, std::sin(two_pi * f * static_cast<double>(i) * dt + 1.0), dt);
        }
        return std::pair{std::abs(st.phase_error) < 0.01, fmt(st.phase_error)};
    });

    // analysis
    check("Parseval: white noise integrates to its variance", [] {
        rng::NormalStream s(3, 0, rng::StreamKind::thermal);
        Timetrace tr;
        tr.sample_rate = 1000.0;
        tr.samples.resize(1 << 16);
        for (double& x : tr.samples) {
            x = s.normal();
        }
        const auto psd = welch_psd(tr, 1024, 0.5, Window::hann);
        const double v = psd.integral();
        return std::pair{psd.n_segments_averaged >= 64 && std::abs(v - variance(tr.samples)) < 0.02, fmt(v)};
    });
    check("tone power A^2/2", [] {
        const auto tr = detail::tone(2.0, 1000.0, 48000.0, 1 << 16);
        const double v = welch_psd(tr, 4096, 0.5, Window::hann).integral();
        return std::pair{rel_close(v, 2.0, 0.01), fmt(v)};
    });
    check("calibration round trip returns T_cal", [&] {
        const double c_sq = calibrate(0.37, 295.0, mode);
        const double T = mode_temperature(0.37, c_sq, mode);
        return std::pair{rel_close(T, 295.0, 1e-14), fmt(T)};
    });
    check("calibration rejects T_cal = 0",
          [&] { return std::pair{detail::throws_error([&] { calibrate(0.37, 0.0, mode); }), std::string()}; });
    check("lock-in energy of a tone is A^2/2", [] {
        const auto tr = detail::tone(1.5, 10e3, 200e3, 40000, 0.7);
        const auto e = lockin_energy(tr, 10e3, 1e3);
        const double v = e.samples.back();
        return std::pair{rel_close(v, 1.125, 0.01), fmt(v)};
    });
    check("constrained fit recovers an exact slope", [] {
        const std::vector<double> t{0.0, 1.0, 2.0, 3.0};
        const std::vector<double> e{1.0, 4.0, 7.0, 10.0};
        const double s = linear_fit_fixed_intercept(t, e, 1.0).slope;
        return std::pair{rel_close(s, 3.0, 1e-14), fmt(s)};
    });
    check("pressure law exact for two points", [] {
        const std::vector<double> p{1.0, 3.0};
        const std::vector<double> r{5.0, 11.0};
        const auto f = fit_pressure_law(p, r);
        return std::pair{rel_close(f.a, 3.0, 1e-14) && rel_close(f.res, 2.0, 1e-14), fmt(f.a) + " " + fmt(f.res)};
    });

    // experiments
    check("efficiency invariant under detector gain rescaling", [] {
        const EfficiencyInputs a{two_pi * 330e3, 2.1e-3, 295.0, 3.3e-2, 4.4e-11};
        const double g2 = 7.3;
        const EfficiencyInputs b{a.omega, a.v_cal_sq * g2, a.T_cal, a.gamma_exp * g2, a.S_imp_exp * g2};
        const double ea = estimate_efficiency(a);
        const double eb = estimate_efficiency(b);
        return std::pair{rel_close(ea, eb, 1e-14), fmt(ea)};
    });

    // cli-io
    check("minimal config round trips", [] {
        const auto cfg = parse_config(R"({"modes": [{"label": "a", "frequency": 1000}]})");
        const auto again = config_from_json(Json::parse(config_to_json(cfg).dump()));
        return std::pair{cfg == again, std::string()};
    });
    check("unknown key rejected with its name", [] {
        try {
            parse_config(R"({"modess": []})");
        } catch (const ConfigError& e) {
            return std::pair{std::string(e.what()).find("modess") != std::string::npos, std::string(e.what())};
        }
        return std::pair{false, std::string("accepted")};
    });
    check("overlapping schedule windows rejected", [] {
        const bool threw = detail::throws_error([] {
            parse_config(R"({"modes": [{"label": "a", "frequency": 1000}],
                             "feedback": {"channels": [{"mode": "a"}]},
                             "simulation": {"duration": 1.0},
                             "schedule": [{"t_start": 0.1, "t_end": 0.3, "channels": ["a"]},
                                          {"t_start": 0.2, "t_end": 0.4, "channels": ["a"]}]})");
        });
        return std::pair{threw, std::string()};
    });
    return out;
}

}  // namespace libracool
