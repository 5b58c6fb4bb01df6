#pragma once

// Constants, mode parameters and the closed-form relations shared by every
// other module. SI units throughout; pressure is carried in mbar.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "libracool/error.hpp"

namespace libracool {

/// Exact SI (2019) values.
struct PhysConstants {
    static constexpr double h = 6.62607015e-34;
    static constexpr double hbar = h / (2.0 * std::numbers::pi);
    static constexpr double kB = 1.380649e-23;
};

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// One libration mode treated as an independent harmonic oscillator.
struct ModeParams {
    std::string label;
    double inertia = 1.0e-32;        // kg m^2
    double omega0 = two_pi * 330e3;  // rad/s
    double gamma_ref = 0.0;          // 1/s, energy damping rate at p_ref
    double p_ref = 1.0;              // mbar
    double calibration_c = 1.0;      // V/rad

    double frequency() const { return omega0 / two_pi; }

    bool operator==(const ModeParams&) const = default;
};

struct Environment {
    double pressure = 1.0;  // mbar
    double T_bath = 295.0;  // K

    bool operator==(const Environment&) const = default;
};

inline void validate(const ModeParams& mode) {
    const std::string where = "mode '" + mode.label + "': ";
    detail::require(mode.inertia > 0.0 && std::isfinite(mode.inertia), where + "inertia must be > 0");
    detail::require(mode.omega0 > 0.0 && std::isfinite(mode.omega0), where + "omega0 must be > 0");
    detail::require(mode.gamma_ref >= 0.0 && std::isfinite(mode.gamma_ref), where + "gamma_ref must be >= 0");
    detail::require(mode.p_ref > 0.0 && std::isfinite(mode.p_ref), where + "p_ref must be > 0");
    detail::require(mode.calibration_c > 0.0 && std::isfinite(mode.calibration_c),
                    where + "calibration_c must be > 0");
}

inline void validate(const Environment& env) {
    detail::require(env.pressure >= 0.0 && std::isfinite(env.pressure), "pressure must be >= 0");
    detail::require(env.T_bath >= 0.0 && std::isfinite(env.T_bath), "T_bath must be >= 0");
}

/// Gas damping, exactly proportional to pressure.
inline double damping_from_pressure(const ModeParams& mode, double pressure) {
    detail::require(pressure >= 0.0, "pressure must be >= 0");
    return mode.gamma_ref * pressure / mode.p_ref;
}

/// Single-sided thermal torque PSD, 4 kB T I gamma, in N^2 m^2 / Hz.
inline double thermal_torque_psd(double inertia, double gamma, double T) {
    detail::require(inertia >= 0.0 && gamma >= 0.0 && T >= 0.0,
                    "thermal_torque_psd: arguments must be >= 0");
    return 4.0 * PhysConstants::kB * T * inertia * gamma;
}

/// Mean occupation of a thermal mode, kB T / (hbar omega) - 1/2. Not clamped.
inline double phonon_occupation(double T, double omega0) {
    detail::require(T >= 0.0, "phonon_occupation: T must be >= 0");
    detail::require(omega0 > 0.0, "phonon_occupation: omega0 must be > 0");
    return PhysConstants::kB * T / (PhysConstants::hbar * omega0) - 0.5;
}

/// Lowest occupation reachable by linear feedback with measurement efficiency eta.
inline double min_occupation_from_efficiency(double eta) {
    detail::require(eta > 0.0 && eta <= 1.0, "efficiency must lie in (0, 1]");
    return (1.0 / std::sqrt(eta) - 1.0) / 2.0;
}

/// Angle variance of a mode in equilibrium at temperature T.
inline double equilibrium_angle_variance(const ModeParams& mode, double T) {
    return PhysConstants::kB * T / (mode.inertia * mode.omega0 * mode.omega0);
}

/// Single-sided torque PSDs acting on one mode plus the detector floor.
/// The thermal part is derived from (I, gamma(p), T) and cannot be set directly.
class NoiseBudget {
public:
    NoiseBudget() = default;

    NoiseBudget(const ModeParams& mode, const Environment& env, double S_ba, double S_imp_exp)
        : S_th_(thermal_torque_psd(mode.inertia, damping_from_pressure(mode, env.pressure), env.T_bath)),
          S_ba_(S_ba),
          S_imp_exp_(S_imp_exp) {
        detail::require(S_ba >= 0.0 && std::isfinite(S_ba), "S_ba must be >= 0");
        detail::require(S_imp_exp >= 0.0 && std::isfinite(S_imp_exp), "S_imp_exp must be >= 0");
    }

    double S_th() const noexcept { return S_th_; }
    double S_ba() const noexcept { return S_ba_; }
    double S_imp_exp() const noexcept { return S_imp_exp_; }
    double S_tau_total() const noexcept { return S_th_ + S_ba_; }

private:
    double S_th_ = 0.0;
    double S_ba_ = 0.0;
    double S_imp_exp_ = 0.0;
};

namespace detail {

/// cos/sin of (a + delta) from precomputed cos a, sin a. Series in delta for
/// |delta| < 1e-2 (exact to double precision there), libm otherwise.
inline void rotate_angle(double cos_a, double sin_a, double delta, double& cos_out, double& sin_out) {
    double cd = 0.0;
    double sd = 0.0;
    if (std::abs(delta) < 1e-2) {
        const double d2 = delta * delta;
        cd = 1.0 - d2 / 2.0 * (1.0 - d2 / 12.0 * (1.0 - d2 / 30.0 * (1.0 - d2 / 56.0)));
        sd = delta * (1.0 - d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0 * (1.0 - d2 / 72.0))));
    } else {
        cd = std::cos(delta);
        sd = std::sin(delta);
    }
    cos_out = cos_a * cd - sin_a * sd;
    sin_out = sin_a * cd + cos_a * sd;
}

}  // namespace detail

/// Desk-scale three-mode set: alpha, beta, gamma at 330, 136 and 115 kHz.
inline std::vector<ModeParams> default_modes() {
    const auto make = [](std::string label, double f) {
        ModeParams m;
        m.label = std::move(label);
        m.inertia = 1.0e-32;
        m.omega0 = two_pi * f;
        m.gamma_ref = two_pi * 1.0;
        m.p_ref = 1.0;
        m.calibration_c = 10.0;
        return m;
    };
    return {make("alpha", 330e3), make("beta", 136e3), make("gamma", 115e3)};
}

}  // namespace libracool
