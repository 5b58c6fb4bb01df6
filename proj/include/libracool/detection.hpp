#pragma once

#include <cmath>

#include "libracool/error.hpp"
#include "libracool/physics.hpp"

namespace libracool {

/// Angle-to-voltage conversion of one detector with white imprecision noise.
///
/// With lo_offset != 0 the detector output is multiplied by a slowly rotating
/// factor cos(2 pi lo_offset t + lo_phase). Averaged over the rotation this
/// halves the detected signal power, which is the whole cost of running the
/// local oscillator unlocked.
struct DetectorChannel {
    double calibration_c = 1.0;  // V/rad
    double S_imp_exp = 0.0;      // V^2/Hz, single-sided
    double lo_offset = 0.0;      // Hz
    double lo_phase = 0.0;       // rad

    /// Angle-domain imprecision, rad^2/Hz.
    double S_imp() const { return S_imp_exp / (calibration_c * calibration_c); }

    /// Standard deviation of one white-noise sample at the given sample rate.
    double noise_sigma(double sample_rate) const { return std::sqrt(S_imp_exp * sample_rate / 2.0); }
};

inline void validate(const DetectorChannel& ch) {
    detail::require(ch.calibration_c > 0.0 && std::isfinite(ch.calibration_c), "detector: calibration_c must be > 0");
    detail::require(ch.S_imp_exp >= 0.0 && std::isfinite(ch.S_imp_exp), "detector: S_imp_exp must be >= 0");
    detail::require(std::isfinite(ch.lo_offset) && std::isfinite(ch.lo_phase), "detector: LO settings must be finite");
}

inline DetectorChannel make_detector(const ModeParams& mode, const NoiseBudget& budget, double lo_offset = 0.0,
                                     double lo_phase = 0.0) {
    return DetectorChannel{mode.calibration_c, budget.S_imp_exp(), lo_offset, lo_phase};
}

/// v = c theta (times the LO rotation when enabled) + noise_sample.
inline double measure(double theta, const DetectorChannel& ch, double noise_sample, double t = 0.0) {
    double signal = ch.calibration_c * theta;
    if (ch.lo_offset != 0.0) {
        signal *= std::cos(two_pi * ch.lo_offset * t + ch.lo_phase);
    }
    return signal + noise_sample;
}

/// Ground-truth efficiency from the imprecision-backaction product:
/// eta = hbar^2 / (S_tau_total * S_imp_exp / c^2).
inline double true_efficiency(const DetectorChannel& ch, double S_tau_total) {
    detail::require(S_tau_total > 0.0, "true_efficiency: torque PSD must be > 0");
    detail::require(ch.S_imp_exp > 0.0, "true_efficiency: imprecision PSD must be > 0");
    detail::require(ch.calibration_c > 0.0, "true_efficiency: calibration must be > 0");
    return PhysConstants::hbar * PhysConstants::hbar / (S_tau_total * ch.S_imp());
}

}  // namespace libracool
