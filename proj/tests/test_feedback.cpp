#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "libracool/analysis.hpp"
#include "libracool/dynamics.hpp"
#include "libracool/feedback.hpp"

using namespace libracool;

TEST(Feedback, ParametricSignalClosedForms) {
    EXPECT_EQ(parametric_signal(1.0, 0.0, 0.3), 0.0);
    EXPECT_EQ(parametric_signal(0.0, 0.1, 0.0), 0.0);
    EXPECT_NEAR(parametric_signal(std::numbers::pi / 4.0, 0.1, 0.0), 0.1, 1e-15);
}

TEST(Feedback, CombineChannels) {
    const double a[] = {0.3, 0.4};
    const double b[] = {0.1, -0.1};
    const double c[] = {-0.3, -0.4};
    EXPECT_EQ(combine_channels(a, 0.5), 0.5);
    EXPECT_EQ(combine_channels({}, 0.5), 0.0);
    EXPECT_EQ(combine_channels(b, 0.5), 0.0);
    EXPECT_EQ(combine_channels(c, 0.5), -0.5);
    const double bad[] = {std::nan("")};
    EXPECT_THROW(combine_channels(bad, 0.5), InvalidInput);
}

TEST(Feedback, WrapPhase) {
    EXPECT_NEAR(wrap_phase(3.0 * std::numbers::pi), std::numbers::pi, 1e-12);
    EXPECT_NEAR(wrap_phase(-0.5), two_pi - 0.5, 1e-12);
}

TEST(Feedback, PllLocksOnCleanTone) {
    const double f = 33e3;
    const auto cfg = default_pll_config(f);
    const double dt = 1.0 / (50.0 * f);
    auto st = make_pll_state(cfg);
    const auto n = static_cast<std::size_t>(10.0 / cfg.loop_bandwidth / dt);
    double f_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pll_step(st, cfg, std::sin(two_pi * f * static_cast<double>(i) * dt + 1.0), dt);
        if (i >= n / 2) {
            f_mean += st.freq_estimate / static_cast<double>(n - n / 2);
        }
    }
    EXPECT_LT(std::abs(st.phase_error), 0.01);
    EXPECT_GT(st.lock_metric(), 0.95);
    // The instantaneous estimate carries a small 2f ripple; its mean is exact.
    EXPECT_NEAR(st.freq_estimate, f, 2.0);
    EXPECT_NEAR(f_mean, f, 0.05);
}

TEST(Feedback, PllTracksOffsetInsideCaptureRange) {
    const double f = 33e3;
    const auto cfg = default_pll_config(f);
    const double f_in = f + 0.4 * cfg.loop_bandwidth;
    const double dt = 1.0 / (50.0 * f);
    auto st = make_pll_state(cfg);
    const auto n = static_cast<std::size_t>(40.0 / cfg.loop_bandwidth / dt);
    for (std::size_t i = 0; i < n; ++i) {
        pll_step(st, cfg, 0.3 * std::cos(two_pi * f_in * static_cast<double>(i) * dt), dt);
    }
    EXPECT_NEAR(st.freq_estimate, f_in, 2.0);
    EXPECT_LT(std::abs(st.phase_error), 0.05);
}

TEST(Feedback, PllFrequencyClampedToCaptureRange) {
    const double f = 33e3;
    const auto cfg = default_pll_config(f);
    const double dt = 1.0 / (50.0 * f);
    auto st = make_pll_state(cfg);
    for (std::size_t i = 0; i < 200000; ++i) {
        pll_step(st, cfg, std::cos(two_pi * 1.5 * f * static_cast<double>(i) * dt), dt);
        ASSERT_LE(std::abs(st.freq_estimate - f), cfg.capture_range + 1e-9);
    }
}

TEST(Feedback, PllConfigValidation) {
    EXPECT_THROW(validate(PllConfig{0.0, 1.0, 1.0}), InvalidInput);
    EXPECT_THROW(validate(PllConfig{1000.0, 200.0, 50.0}), InvalidInput);
    EXPECT_THROW(validate(PllConfig{1000.0, 10.0, 1000.0}), InvalidInput);
    EXPECT_NO_THROW(validate(default_pll_config(1000.0)));
}

TEST(Feedback, ScheduleSemantics) {
    std::vector<FeedbackChannel> ch(2);
    ch[0].mode_label = "a";
    ch[1].mode_label = "b";
    ch[1].enabled = false;
    apply_schedule({}, 0.5, ch);
    EXPECT_TRUE(ch[0].active);
    EXPECT_FALSE(ch[1].active);

    Schedule s;
    s.windows.push_back({1e-3, 2e-3, {"a"}, false});
    s.windows.push_back({1e-3, 3e-3, {"b"}, true});
    apply_schedule(s, 0.999e-3, ch);
    EXPECT_TRUE(ch[0].active);
    apply_schedule(s, 1e-3, ch);  // start boundary is inclusive
    EXPECT_FALSE(ch[0].active);
    EXPECT_TRUE(ch[1].active);
    apply_schedule(s, 2e-3, ch);  // end boundary is exclusive
    EXPECT_TRUE(ch[0].active);
}

TEST(Feedback, ScheduleValidation) {
    const std::vector<std::string> labels{"a", "b"};
    Schedule overlap;
    overlap.windows.push_back({0.1, 0.3, {"a"}, false});
    overlap.windows.push_back({0.2, 0.4, {"a", "b"}, false});
    EXPECT_THROW(validate_schedule(overlap, labels, 1.0), ConfigError);

    Schedule disjoint_channels;
    disjoint_channels.windows.push_back({0.1, 0.3, {"a"}, false});
    disjoint_channels.windows.push_back({0.2, 0.4, {"b"}, false});
    EXPECT_NO_THROW(validate_schedule(disjoint_channels, labels, 1.0));

    Schedule unknown;
    unknown.windows.push_back({0.1, 0.3, {"zz"}, false});
    EXPECT_THROW(validate_schedule(unknown, labels, 1.0), ConfigError);

    Schedule late;
    late.windows.push_back({0.1, 1.3, {"a"}, false});
    EXPECT_THROW(validate_schedule(late, labels, 1.0), ConfigError);

    Schedule reversed;
    reversed.windows.push_back({0.3, 0.1, {"a"}, false});
    EXPECT_THROW(validate_schedule(reversed, labels, 1.0), ConfigError);
}

TEST(Feedback, SampleIndexAtBoundary) {
    const double dt = 1.0 / 1.65e6;
    EXPECT_EQ(sample_index_at(0.0, dt), 0u);
    EXPECT_EQ(sample_index_at(100.0 * dt, dt), 100u);
    EXPECT_EQ(sample_index_at(100.5 * dt, dt), 101u);
    EXPECT_EQ(sample_index_at(0.01, 1e-6), 10000u);
}

TEST(Feedback, ControllerHonoursWindows) {
    const double f = 33e3;
    const double dt = 1.0 / (50.0 * f);
    FeedbackChannel ch;
    ch.mode_label = "m";
    ch.pll = default_pll_config(f);
    ch.gain = 0.005;
    const std::vector<std::string> labels{"m"};
    Schedule s;
    s.windows.push_back({100 * dt, 200 * dt, {"m"}, false});
    ParametricFeedback fb({ch}, labels, s, dt, 0.01);
    for (std::size_t n = 0; n < 300; ++n) {
        const double v[] = {std::sin(two_pi * f * static_cast<double>(n) * dt)};
        const double u = fb.actuate(n, static_cast<double>(n) * dt, v);
        if (n >= 100 && n < 200) {
            ASSERT_EQ(u, 0.0) << n;
        }
        ASSERT_LE(std::abs(u), 0.005 + 1e-15);
    }
}

TEST(Feedback, ControllerRejectsUnknownMode) {
    FeedbackChannel ch;
    ch.mode_label = "x";
    ch.pll = default_pll_config(1e3);
    const std::vector<std::string> labels{"m"};
    EXPECT_THROW(ParametricFeedback({ch}, labels, {}, 1e-6, 0.01), ConfigError);
}

TEST(Feedback, CoolingAtPsiPiMatchesRateOracle) {
    // Energy decays at omega G / 2 under ideal-phase parametric feedback.
    const ModeParams m{"m", 1e-30, two_pi * 33e3, 0.0, 1.0, 10.0};
    const std::vector<ModeParams> modes{m};
    const Environment env{0.0, 0.0};
    const std::vector<NoiseBudget> b{NoiseBudget(m, env, 0.0, 0.0)};
    FeedbackChannel ch;
    ch.mode_label = "m";
    ch.pll = default_pll_config(33e3);
    ch.gain = 0.004;
    ch.phase_psi = std::numbers::pi;
    SimConfig cfg;
    cfg.duration = 0.02;
    cfg.initial_states = std::vector<OscState>{{1e-3, 0.0}};
    const auto timing = resolve_timing(cfg, modes);
    const std::vector<std::string> labels{"m"};
    ParametricFeedback fb({ch}, labels, {}, timing.dt, 0.01);
    const auto r = simulate(cfg, modes, env, b, fb);
    const auto e = lockin_energy(r.detectors[0], 33e3, 2000.0);
    const double fs = e.sample_rate;
    const double t1 = 0.008;
    const double t2 = 0.018;
    const double rate = std::log(e.samples[std::size_t(t1 * fs)] / e.samples[std::size_t(t2 * fs)]) / (t2 - t1);
    EXPECT_NEAR(rate / (m.omega0 * ch.gain / 2.0), 1.0, 0.05);
}
