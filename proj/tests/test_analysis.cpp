#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "libracool/analysis.hpp"
#include "libracool/rng.hpp"

using namespace libracool;

namespace {

Timetrace white(double sigma, double fs, std::size_t n, std::uint64_t seed) {
    rng::NormalStream s(seed, 0, rng::StreamKind::thermal);
    Timetrace tr;
    tr.sample_rate = fs;
    tr.unit = "V";
    tr.samples.resize(n);
    for (double& x : tr.samples) {
        x = sigma * s.normal();
    }
    return tr;
}

Timetrace tone(double a, double f, double fs, std::size_t n, double phase = 0.0) {
    Timetrace tr;
    tr.sample_rate = fs;
    tr.unit = "V";
    tr.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        tr.samples[i] = a * std::sin(two_pi * f * static_cast<double>(i) / fs + phase);
    }
    return tr;
}

}  // namespace

TEST(Analysis, ConventionString) { EXPECT_EQ(psd_convention, "single-sided, ⟨x²⟩=∫₀^∞ S df"); }

TEST(Analysis, ParsevalWhiteNoise) {
    const auto tr = white(1.0, 1000.0, 1 << 18, 1);
    const auto psd = welch_psd(tr, 4096, 0.5, Window::hann);
    ASSERT_GE(psd.n_segments_averaged, 64u);
    EXPECT_NEAR(psd.integral(), 1.0, 0.02);
}

TEST(Analysis, WhiteNoiseFloorLevel) {
    const double sigma = 0.3;
    const double fs = 2000.0;
    const auto tr = white(sigma, fs, 1 << 18, 2);
    const auto psd = welch_psd(tr, 2048, 0.5, Window::hann);
    double acc = 0.0;
    for (std::size_t k = 1; k + 1 < psd.values.size(); ++k) {
        acc += psd.values[k];
    }
    const double level = acc / static_cast<double>(psd.values.size() - 2);
    EXPECT_NEAR(level / (sigma * sigma / (fs / 2.0)), 1.0, 3.0 / std::sqrt(psd.n_segments_averaged));
}

TEST(Analysis, TonePowerIsHalfAmplitudeSquared) {
    for (Window w : {Window::hann, Window::rectangular}) {
        const auto tr = tone(2.0, 1000.0, 48000.0, 1 << 16, 0.4);
        EXPECT_NEAR(welch_psd(tr, 4096, 0.5, w).integral(), 2.0, 0.02);
    }
}

TEST(Analysis, DcGoesToZeroBin) {
    Timetrace tr;
    tr.sample_rate = 100.0;
    tr.samples.assign(4096, 1.5);
    const auto psd = welch_psd(tr, 512, 0.5, Window::rectangular);
    EXPECT_NEAR(psd.values[0] * psd.df, 2.25, 1e-12);
    for (std::size_t k = 1; k < psd.values.size(); ++k) {
        ASSERT_NEAR(psd.values[k], 0.0, 1e-20);
    }
}

TEST(Analysis, WelchValidation) {
    const auto tr = white(1.0, 100.0, 100, 3);
    EXPECT_THROW(welch_psd(tr, 200, 0.5, Window::hann), InvalidInput);
    EXPECT_THROW(welch_psd(tr, 64, 1.0, Window::hann), InvalidInput);
    EXPECT_THROW(parse_window("kaiser"), InvalidInput);
    EXPECT_EQ(parse_window("hann"), Window::hann);
}

TEST(Analysis, PeakRegionGeometry) {
    const auto r = peak_region_for(1000.0);
    EXPECT_DOUBLE_EQ(r.f_lo, 940.0);
    EXPECT_DOUBLE_EQ(r.f_hi, 1060.0);
    EXPECT_DOUBLE_EQ(r.noise_below.lo, 750.0);
    EXPECT_DOUBLE_EQ(r.noise_below.hi, 850.0);
    EXPECT_DOUBLE_EQ(r.noise_above.lo, 1150.0);
    EXPECT_DOUBLE_EQ(r.noise_above.hi, 1250.0);
    EXPECT_NO_THROW(validate(r, 5000.0));
    EXPECT_THROW(validate(r, 1100.0), InvalidInput);
}

TEST(Analysis, LorentzianAreaRecovered) {
    // Analytic OU-type peak plus a flat floor on a fine grid.
    Psd psd;
    psd.df = 1.0;
    const double f0 = 10000.0;
    const double hwhm = 20.0;
    const double area = 3.7e-4;
    // Floor well above the Lorentzian tails in the sidebands.
    const double floor = 2e-7;
    psd.values.resize(20001);
    for (std::size_t k = 0; k < psd.values.size(); ++k) {
        const double d = static_cast<double>(k) - f0;
        psd.values[k] = area * hwhm / std::numbers::pi / (d * d + hwhm * hwhm) + floor;
    }
    const auto r = integrate_peak(psd, peak_region_for(f0));
    EXPECT_NEAR(r.area / area, 1.0, 0.03);
    EXPECT_NEAR(r.floor / floor, 1.0, 0.05);
    EXPECT_FALSE(r.clamped);
}

TEST(Analysis, NoiseOnlyRegionClamps) {
    Psd psd;
    psd.df = 1.0;
    psd.values.assign(3000, 1.0);
    psd.values[1000] = 0.5;  // a dip inside the peak region
    const auto r = integrate_peak(psd, peak_region_for(1000.0));
    EXPECT_EQ(r.area, 0.0);
    EXPECT_TRUE(r.clamped);
}

TEST(Analysis, ZeroFloorGivesRawIntegral) {
    Psd psd;
    psd.df = 2.0;
    psd.values.assign(1500, 0.0);
    psd.values[500] = 3.0;
    psd.values[510] = 1.0;
    const auto r = integrate_peak(psd, peak_region_for(1000.0));
    EXPECT_DOUBLE_EQ(r.floor, 0.0);
    EXPECT_DOUBLE_EQ(r.area, 8.0);
}

TEST(Analysis, MedianFloorIgnoresOutliers) {
    Psd psd;
    psd.df = 1.0;
    psd.values.assign(3000, 1.0);
    psd.values[800] = 1e6;
    EXPECT_DOUBLE_EQ(noise_floor(psd, peak_region_for(1000.0)), 1.0);
}

TEST(Analysis, CalibrationAndTemperature) {
    const ModeParams m{"m", 1e-32, two_pi * 330e3, 1.0, 1.0, 10.0};
    const double c1 = calibrate(0.37, 295.0, m);
    EXPECT_DOUBLE_EQ(calibrate(0.74, 295.0, m), 2.0 * c1);
    EXPECT_NEAR(mode_temperature(0.37, c1, m), 295.0, 1e-12);
    EXPECT_NEAR(mode_temperature(0.37 * 9.0, c1 * 9.0, m), mode_temperature(0.37, c1, m), 1e-12);
    EXPECT_THROW(calibrate(0.37, 0.0, m), InvalidInput);
    EXPECT_THROW(calibrate(0.0, 295.0, m), InvalidInput);
    // c^2 = v^2 I omega^2 / (kB T)
    EXPECT_NEAR(c1, 0.37 * m.inertia * m.omega0 * m.omega0 / (PhysConstants::kB * 295.0), 1e-12 * c1);
}

TEST(Analysis, LockinToneEnergy) {
    for (double phi : {0.0, 0.7, 2.5}) {
        const auto e = lockin_energy(tone(1.5, 10e3, 200e3, 40000, phi), 10e3, 1e3);
        EXPECT_NEAR(e.samples.back(), 1.125, 0.01);
    }
    const auto far = lockin_energy(tone(1.5, 30e3, 200e3, 40000), 10e3, 1e3);
    EXPECT_LT(far.samples.back(), 1e-4);
    EXPECT_EQ(far.unit, "V^2");
}

TEST(Analysis, LockinLowpassIsMinus3dBAtBandwidth) {
    const double fs = 1e6;
    const double B = 1000.0;
    LockinLowpass lp(B, fs);
    double peak = 0.0;
    for (int i = 0; i < 200000; ++i) {
        const double y = lp(std::sin(two_pi * B * i / fs));
        if (i > 100000) {
            peak = std::max(peak, std::abs(y));
        }
    }
    EXPECT_NEAR(peak, 1.0 / std::sqrt(2.0), 0.01);
}

TEST(Analysis, ConstrainedFit) {
    const std::vector<double> t{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> e{1.0, 4.0, 7.0, 10.0};
    const auto f = linear_fit_fixed_intercept(t, e, 1.0);
    EXPECT_DOUBLE_EQ(f.slope, 3.0);
    EXPECT_DOUBLE_EQ(f.slope_stderr, 0.0);
    const std::vector<double> t0{0.0};
    const std::vector<double> e0{1.0};
    EXPECT_THROW(linear_fit_fixed_intercept(t0, e0, 1.0), InvalidInput);
}

TEST(Analysis, PressureLaw) {
    const std::vector<double> p2{1.0, 3.0};
    const std::vector<double> r2{5.0, 11.0};
    const auto f2 = fit_pressure_law(p2, r2);
    EXPECT_DOUBLE_EQ(f2.a, 3.0);
    EXPECT_DOUBLE_EQ(f2.res, 2.0);
    EXPECT_TRUE(std::isinf(f2.a_stderr));

    const std::vector<double> p{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> r{-0.9, 1.1, 2.9, 5.2};
    const auto f = fit_pressure_law(p, r);
    EXPECT_LT(f.res, 0.0);  // reported as-is
    EXPECT_GT(f.res_stderr, 0.0);
    const std::vector<double> same{1.0, 1.0};
    EXPECT_THROW(fit_pressure_law(same, r2), InvalidInput);
}

TEST(Analysis, PressureLawPropagatesPointErrors) {
    const std::vector<double> p{0.0, 1.0, 2.0};
    const std::vector<double> r{1.0, 3.0, 5.0};
    const std::vector<double> se{1.0, 1.0, 1.0};
    const auto f = fit_pressure_law(p, r, se);
    EXPECT_DOUBLE_EQ(f.a, 2.0);
    EXPECT_NEAR(f.a_stderr, std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(f.res_stderr, std::sqrt(1.0 / 3.0 + 0.5), 1e-12);
    const std::vector<double> bad{1.0};
    EXPECT_THROW(fit_pressure_law(p, r, bad), InvalidInput);
}

TEST(Analysis, MeasureTemperatureStderr) {
    const auto tr = tone(1.0, 1000.0, 10000.0, 1 << 15);
    const ModeParams m{"m", 1e-30, two_pi * 1000.0, 1.0, 1.0, 1.0};
    PsdOptions o;
    o.segment_length = 1024;
    const auto t = measure_temperature(tr, m, 1.0, o, peak_region_for(1000.0));
    EXPECT_GT(t.T, 0.0);
    EXPECT_NEAR(t.T_stderr, t.T / std::sqrt(63.0), 1e-9 * t.T);
}

TEST(Analysis, WelchEquivalentDof) {
    Timetrace t;
    t.sample_rate = 1000.0;
    t.samples.assign(1024 * 20, 1.0);
    const auto none = welch_psd(t, 1024, 0.0, Window::hann);
    EXPECT_DOUBLE_EQ(none.dof, 2.0 * static_cast<double>(none.n_segments_averaged));
    const auto half = welch_psd(t, 1024, 0.5, Window::hann);
    const double k = static_cast<double>(half.n_segments_averaged);
    // Hann at 50% overlap: adjacent-segment correlation rho^2 = 1/36.
    EXPECT_NEAR(half.dof, 2.0 * k / (1.0 + 2.0 * (1.0 - 1.0 / k) / 36.0), 1e-3 * half.dof);
}

TEST(Analysis, FloorCorrectsMedianBias) {
    Psd psd;
    psd.df = 1.0;
    psd.values.assign(2001, 1.0);
    const auto r = peak_region_for(1000.0);
    EXPECT_DOUBLE_EQ(noise_floor(psd, r), 1.0);
    psd.dof = 20.0;
    const double a = 1.0 - 2.0 / 180.0;
    EXPECT_DOUBLE_EQ(noise_floor(psd, r), 1.0 / (a * a * a));
}
