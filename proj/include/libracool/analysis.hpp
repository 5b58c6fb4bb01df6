#pragma once

// Spectral estimation, thermometry, calibration, lock-in demodulation and the
// two least-squares fits used by the reheating analysis.
//
// PSD convention everywhere: single-sided in real frequency,
//   <x^2> = integral_0^inf S(f) df.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "libracool/error.hpp"
#include "libracool/physics.hpp"
#include "libracool/timetrace.hpp"

namespace libracool {

inline constexpr std::string_view psd_convention = "single-sided, ⟨x²⟩=∫₀^∞ S df";

struct Psd {
    double df = 0.0;  // Hz
    std::vector<double> values;
    std::size_t n_segments_averaged = 0;
    double dof = 0.0;  // equivalent chi-square degrees of freedom per bin
    std::string unit;  // e.g. "V^2/Hz"

    double frequency(std::size_t k) const { return static_cast<double>(k) * df; }
    double nyquist() const { return df * static_cast<double>(values.empty() ? 0 : values.size() - 1); }
    double integral() const {
        double acc = 0.0;
        for (double v : values) {
            acc += v;
        }
        return acc * df;
    }
};

enum class Window { hann, rectangular };

inline Window parse_window(std::string_view name) {
    if (name == "hann") {
        return Window::hann;
    }
    if (name == "rect" || name == "rectangular" || name == "boxcar") {
        return Window::rectangular;
    }
    throw InvalidInput("unknown window '" + std::string(name) + "'");
}

inline std::string_view window_name(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

struct PsdOptions {
    std::size_t segment_length = 16384;
    double overlap = 0.5;
    Window window = Window::hann;

    bool operator==(const PsdOptions&) const = default;
};

namespace detail {

/// FFTW's planner is not re-entrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
public:
    explicit RealFft(std::size_t n)
        : n_(n), in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
          out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
        if (!in_ || !out_) {
            throw std::bad_alloc();
        }
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), reinterpret_cast<fftw_complex*>(out_.get()),
                                     FFTW_ESTIMATE);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }

    double* input() { return in_.get(); }
    void execute() { fftw_execute(plan_); }
    double power(std::size_t k) const {
        const auto& c = out_.get()[k];
        return c[0] * c[0] + c[1] * c[1];
    }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    std::unique_ptr<double, FftwDeleter> in_;
    std::unique_ptr<fftw_complex, FftwDeleter> out_;
    fftw_plan plan_ = nullptr;
};

}  // namespace detail

inline std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    if (w == Window::hann) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
        }
    }
    return out;
}

/// Welch estimate, normalised so that sum(values) * df equals the
/// window-weighted mean square of the input.
inline Psd welch_psd(const Timetrace& trace, std::size_t segment_length, double overlap, Window window) {
    validate(trace);
    detail::require(segment_length >= 2, "welch_psd: segment_length must be >= 2");
    detail::require(segment_length <= trace.size(), "welch_psd: trace shorter than one segment");
    detail::require(overlap >= 0.0 && overlap < 1.0, "welch_psd: overlap must lie in [0, 1)");

    const std::size_t n = segment_length;
    const auto step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - overlap))));
    const auto w = make_window(window, n);
    double w_sq = 0.0;
    for (double x : w) {
        w_sq += x * x;
    }

    detail::RealFft fft(n);
    const std::size_t n_bins = n / 2 + 1;
    std::vector<double> acc(n_bins, 0.0);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + n <= trace.size(); start += step) {
        double* in = fft.input();
        for (std::size_t i = 0; i < n; ++i) {
            in[i] = trace.samples[start + i] * w[i];
        }
        fft.execute();
        for (std::size_t k = 0; k < n_bins; ++k) {
            acc[k] += fft.power(k);
        }
        ++segments;
    }

    Psd psd;
    psd.df = trace.sample_rate / static_cast<double>(n);
    psd.n_segments_averaged = segments;
    // Welch's equivalent degrees of freedom for overlapping windowed segments.
    double corr_sum = 0.0;
    for (std::size_t j = 1; j < segments && j * step < n; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i + j * step < n; ++i) {
            c += w[i] * w[i + j * step];
        }
        const double rho = c / w_sq;
        corr_sum += (1.0 - static_cast<double>(j) / static_cast<double>(segments)) * rho * rho;
    }
    psd.dof = 2.0 * static_cast<double>(segments) / (1.0 + 2.0 * corr_sum);
    psd.unit = trace.unit.empty() ? "1/Hz" : trace.unit + "^2/Hz";
    psd.values.resize(n_bins);
    const double scale = 1.0 / (trace.sample_rate * w_sq * static_cast<double>(segments));
    for (std::size_t k = 0; k < n_bins; ++k) {
        const bool edge = k == 0 || (n % 2 == 0 && k == n_bins - 1);
        psd.values[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
    }
    return psd;
}

inline Psd welch_psd(const Timetrace& trace, const PsdOptions& opts = {}) {
    return welch_psd(trace, opts.segment_length, opts.overlap, opts.window);
}

struct Band {
    double lo = 0.0;
    double hi = 0.0;

    bool empty() const { return !(hi > lo); }
    bool operator==(const Band&) const = default;
};

/// Integration window [f_lo, f_hi] plus sidebands used to estimate the floor.
struct PeakRegion {
    double f_lo = 0.0;
    double f_hi = 0.0;
    Band noise_below;
    Band noise_above;
};

/// Peak region around f0: +-half_width_frac f0, with floor sidebands at
/// relative offsets [noise_inner, noise_outer] on both sides.
inline PeakRegion peak_region_for(double f0, double half_width_frac = 0.06, double noise_inner = 0.15,
                                  double noise_outer = 0.25) {
    detail::require(f0 > 0.0, "peak_region_for: f0 must be > 0");
    detail::require(half_width_frac > 0.0 && noise_inner > half_width_frac && noise_outer > noise_inner &&
                        noise_outer < 1.0,
                    "peak_region_for: need 0 < half_width < noise_inner < noise_outer < 1");
    return PeakRegion{f0 * (1.0 - half_width_frac), f0 * (1.0 + half_width_frac),
                      Band{f0 * (1.0 - noise_outer), f0 * (1.0 - noise_inner)},
                      Band{f0 * (1.0 + noise_inner), f0 * (1.0 + noise_outer)}};
}

inline void validate(const PeakRegion& r, double nyquist) {
    detail::require(r.f_lo >= 0.0 && r.f_lo < r.f_hi, "peak region: need 0 <= f_lo < f_hi");
    detail::require(r.f_hi <= nyquist * (1.0 + 1e-12), "peak region: f_hi beyond Nyquist");
    for (const Band* b : {&r.noise_below, &r.noise_above}) {
        if (b->empty()) {
            continue;
        }
        detail::require(b->lo >= 0.0 && b->hi <= nyquist * (1.0 + 1e-12), "peak region: noise band beyond Nyquist");
        detail::require(b->hi < r.f_lo || b->lo > r.f_hi, "peak region: noise band overlaps the peak");
    }
}

inline double median(std::vector<double> xs) {
    detail::require(!xs.empty(), "median of empty set");
    const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
    std::nth_element(xs.begin(), mid, xs.end());
    if (xs.size() % 2 == 1) {
        return *mid;
    }
    const double hi = *mid;
    const double lo = *std::max_element(xs.begin(), mid);
    return 0.5 * (lo + hi);
}

/// Median PSD level over the region's sidebands; 0 when none are configured.
inline double noise_floor(const Psd& psd, const PeakRegion& r) {
    std::vector<double> bins;
    for (const Band* b : {&r.noise_below, &r.noise_above}) {
        if (b->empty()) {
            continue;
        }
        for (std::size_t k = 0; k < psd.values.size(); ++k) {
            const double f = psd.frequency(k);
            if (f >= b->lo && f <= b->hi) {
                bins.push_back(psd.values[k]);
            }
        }
    }
    if (bins.empty()) {
        return 0.0;
    }
    // Bins are scaled chi-square variates; divide out the median-to-mean ratio
    // (Wilson-Hilferty) so the floor estimates the mean level.
    const double m = median(std::move(bins));
    if (psd.dof <= 0.0) {
        return m;
    }
    const double a = 1.0 - 2.0 / (9.0 * psd.dof);
    return m / (a * a * a);
}

struct PeakArea {
    double area = 0.0;   // unit^2
    double floor = 0.0;  // unit^2/Hz
    bool clamped = false;
};

/// Area under the peak minus the sideband floor. Negative areas clamp to 0.
inline PeakArea integrate_peak(const Psd& psd, const PeakRegion& region) {
    detail::require(psd.values.size() >= 2 && psd.df > 0.0, "integrate_peak: empty PSD");
    validate(region, psd.nyquist());
    PeakArea out;
    out.floor = noise_floor(psd, region);
    double acc = 0.0;
    for (std::size_t k = 0; k < psd.values.size(); ++k) {
        const double f = psd.frequency(k);
        if (f >= region.f_lo && f <= region.f_hi) {
            acc += psd.values[k] - out.floor;
        }
    }
    out.area = acc * psd.df;
    if (out.area < 0.0) {
        out.area = 0.0;
        out.clamped = true;
    }
    return out;
}

/// Equipartition calibration: c^2 = I omega0^2 <v_cal^2> / (kB T_cal).
inline double calibrate(double v_cal_sq, double T_cal, const ModeParams& mode) {
    detail::require(v_cal_sq > 0.0 && T_cal > 0.0, "calibrate: v_cal_sq and T_cal must be > 0");
    detail::require(mode.inertia > 0.0 && mode.omega0 > 0.0, "calibrate: invalid mode");
    return mode.inertia * mode.omega0 * mode.omega0 * v_cal_sq / (PhysConstants::kB * T_cal);
}

/// T = I omega0^2 (area / c^2) / kB.
inline double mode_temperature(double area_v_sq, double c_sq, const ModeParams& mode) {
    detail::require(c_sq > 0.0, "mode_temperature: c_sq must be > 0");
    detail::require(area_v_sq >= 0.0, "mode_temperature: area must be >= 0");
    return mode.inertia * mode.omega0 * mode.omega0 * (area_v_sq / c_sq) / PhysConstants::kB;
}

struct ModeTemperature {
    double T = 0.0;
    double T_stderr = 0.0;  // T / sqrt(n_segments_averaged)
    double n_bar = 0.0;
    double area = 0.0;
    double floor = 0.0;
    bool clamped = false;
};

/// Detector trace -> Welch PSD -> peak area -> temperature and occupation.
inline ModeTemperature measure_temperature(const Timetrace& detector, const ModeParams& mode, double c_sq,
                                           const PsdOptions& opts, const PeakRegion& region) {
    PsdOptions o = opts;
    o.segment_length = std::min(o.segment_length, detector.size());
    const auto psd = welch_psd(detector, o);
    const auto peak = integrate_peak(psd, region);
    ModeTemperature out;
    out.area = peak.area;
    out.floor = peak.floor;
    out.clamped = peak.clamped;
    out.T = mode_temperature(peak.area, c_sq, mode);
    out.T_stderr = out.T / std::sqrt(static_cast<double>(psd.n_segments_averaged));
    out.n_bar = phonon_occupation(out.T, mode.omega0);
    return out;
}

/// Cascade of four identical one-pole low-passes whose combined response is
/// -3 dB at `bandwidth`: each pole sits at bandwidth / sqrt(2^(1/4) - 1).
class LockinLowpass {
public:
    static constexpr int order = 4;

    LockinLowpass(double bandwidth, double sample_rate) {
        const double pole = bandwidth / std::sqrt(std::pow(2.0, 1.0 / order) - 1.0);
        alpha_ = -std::expm1(-two_pi * pole / sample_rate);
    }

    double operator()(double x) {
        for (double& s : state_) {
            s += alpha_ * (x - s);
            x = s;
        }
        return x;
    }

private:
    double alpha_ = 0.0;
    double state_[order] = {0.0, 0.0, 0.0, 0.0};
};

/// Narrowband energy around f_demod: X, Y = LP(2 v cos / sin(2 pi f t)),
/// energy = (X^2 + Y^2) / 2, i.e. the variance of the signal within the band.
/// Filter states start at zero.
inline Timetrace lockin_energy(const Timetrace& trace, double f_demod, double bandwidth) {
    validate(trace);
    const double nyquist = trace.sample_rate / 2.0;
    detail::require(f_demod > 0.0 && f_demod < nyquist, "lockin_energy: f_demod must lie in (0, Nyquist)");
    detail::require(bandwidth > 0.0, "lockin_energy: bandwidth must be > 0");
    detail::require(bandwidth < f_demod, "lockin_energy: bandwidth must be below f_demod");

    LockinLowpass lp_x(bandwidth, trace.sample_rate);
    LockinLowpass lp_y(bandwidth, trace.sample_rate);
    Timetrace out;
    out.sample_rate = trace.sample_rate;
    out.start_time = trace.start_time;
    out.unit = trace.unit.empty() ? "1" : trace.unit + "^2";
    out.samples.resize(trace.size());
    const double cycles_per_sample = f_demod / trace.sample_rate;
    const double start_cycles = std::fmod(f_demod * trace.start_time, 1.0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double cycles = std::fmod(start_cycles + cycles_per_sample * static_cast<double>(i), 1.0);
        const double ph = two_pi * cycles;
        const double v = trace.samples[i];
        const double x = lp_x(2.0 * v * std::cos(ph));
        const double y = lp_y(2.0 * v * std::sin(ph));
        out.samples[i] = 0.5 * (x * x + y * y);
    }
    return out;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Least squares for e = e0 + slope t with the intercept held at e0.
inline LinearFit linear_fit_fixed_intercept(std::span<const double> t, std::span<const double> e, double e0) {
    detail::require(t.size() == e.size(), "linear_fit_fixed_intercept: length mismatch");
    detail::require(!t.empty(), "linear_fit_fixed_intercept: empty input");
    double stt = 0.0;
    double ste = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += t[i] * t[i];
        ste += t[i] * (e[i] - e0);
    }
    detail::require(stt > 0.0, "linear_fit_fixed_intercept: all t are zero");
    LinearFit fit;
    fit.slope = ste / stt;
    fit.intercept = e0;
    if (t.size() > 1) {
        double rss = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = e[i] - e0 - fit.slope * t[i];
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / static_cast<double>(t.size() - 1) / stt);
    } else {
        fit.slope_stderr = std::numeric_limits<double>::infinity();
    }
    return fit;
}

struct PressureFit {
    double a = 0.0;    // rate per mbar
    double res = 0.0;  // residual rate at zero pressure
    double a_stderr = 0.0;
    double res_stderr = 0.0;
};

/// Ordinary least squares for rate = a p + res. Standard errors come from the
/// residual scatter (infinite with two points); when per-point standard errors
/// are given, the larger of that and their propagation through the estimator.
inline PressureFit fit_pressure_law(std::span<const double> p, std::span<const double> rate,
                                    std::span<const double> rate_stderr = {}) {
    detail::require(p.size() == rate.size(), "fit_pressure_law: length mismatch");
    detail::require(rate_stderr.empty() || rate_stderr.size() == p.size(), "fit_pressure_law: stderr length mismatch");
    detail::require(p.size() >= 2, "fit_pressure_law: at least two points required");
    for (double x : p) {
        detail::require(x >= 0.0, "fit_pressure_law: pressures must be >= 0");
    }
    const auto n = static_cast<double>(p.size());
    double mp = 0.0;
    double mr = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mp += p[i];
        mr += rate[i];
    }
    mp /= n;
    mr /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sxx += (p[i] - mp) * (p[i] - mp);
        sxy += (p[i] - mp) * (rate[i] - mr);
    }
    detail::require(sxx > 0.0 && sxx > 1e-24 * mp * mp * n, "fit_pressure_law: fewer than two distinct pressures");
    PressureFit fit;
    fit.a = sxy / sxx;
    fit.res = mr - fit.a * mp;
    if (p.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double r = rate[i] - fit.res - fit.a * p[i];
            rss += r * r;
        }
        const double s2 = rss / (n - 2.0);
        fit.a_stderr = std::sqrt(s2 / sxx);
        fit.res_stderr = std::sqrt(s2 * (1.0 / n + mp * mp / sxx));
    } else {
        fit.a_stderr = std::numeric_limits<double>::infinity();
        fit.res_stderr = std::numeric_limits<double>::infinity();
    }
    if (!rate_stderr.empty()) {
        double var_a = 0.0;
        double var_res = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double ca = (p[i] - mp) / sxx;
            const double cr = 1.0 / n - mp * ca;
            var_a += ca * ca * rate_stderr[i] * rate_stderr[i];
            var_res += cr * cr * rate_stderr[i] * rate_stderr[i];
        }
        fit.a_stderr = std::max(fit.a_stderr, std::sqrt(var_a));
        fit.res_stderr = std::max(fit.res_stderr, std::sqrt(var_res));
    }
    return fit;
}

}  // namespace libracool
