#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "libracool/libracool.hpp"

namespace libracool::testing {

/// Single 33 kHz mode used by the protocol tests: I = 1e-30 kg m^2,
/// c = 10 V/rad, gamma = 5 1/s at 1 mbar.
inline ModeParams desk_mode(double inertia = 1e-30) {
    return ModeParams{"desk", inertia, two_pi * 33000.0, 5.0, 1.0, 10.0};
}

inline FeedbackChannel desk_channel(double gain = 0.009, double psi = std::numbers::pi) {
    FeedbackChannel ch;
    ch.mode_label = "desk";
    ch.pll = default_pll_config(33000.0);
    ch.gain = gain;
    ch.phase_psi = psi;
    return ch;
}

inline ExperimentSetup desk_setup(double pressure, double S_ba = 0.0, double S_imp_exp = 1e-9,
                                  std::uint64_t seed = 1, double inertia = 1e-30) {
    ExperimentSetup s;
    s.plant.modes = {desk_mode(inertia)};
    s.plant.noise = {ModeNoise{S_ba, S_imp_exp}};
    s.plant.env = {pressure, 295.0};
    s.channels = {desk_channel()};
    s.sim.seed = seed;
    s.settle_time = 0.05;
    return s;
}

inline ReheatConfig desk_reheat(std::size_t cycles) {
    ReheatConfig rc;
    rc.mode = "desk";
    rc.off_time = 0.01;
    rc.on_time = 0.005;
    rc.cycles = cycles;
    rc.settle_time = 0.5;
    rc.cycles_per_job = 50;
    return rc;
}

/// Thermal heating rate of a mode in V^2/s: gamma kB T c^2 / (I omega^2).
inline double thermal_heating_rate(const ModeParams& m, double pressure, double T) {
    const double c = m.calibration_c;
    return damping_from_pressure(m, pressure) * PhysConstants::kB * T * c * c / (m.inertia * m.omega0 * m.omega0);
}

/// Low-pressure desk setup whose detector has true efficiency `eta`. The
/// heating rate in phonons/s is chosen so that eta * rate^2 = 2.5e6 s^-2,
/// which keeps the cooled peak's wings well below the floor in the noise
/// bands while leaving the phase-locked loop a usable signal.
struct EfficiencyScenario {
    ExperimentSetup setup;
    EfficiencyConfig eff;
    ReheatConfig reheat;
};

inline EfficiencyScenario efficiency_scenario(double eta, std::uint64_t seed = 11, double inertia = 1e-30) {
    constexpr double K = 2.5e6;
    const ModeParams m = desk_mode(inertia);
    const double T = 295.0;
    const double n_th = PhysConstants::kB * T / (PhysConstants::hbar * m.omega0);
    const double gamma = std::sqrt(K / eta) / n_th;
    const double pressure = gamma / m.gamma_ref * m.p_ref;
    const double S_tau = thermal_torque_psd(m.inertia, gamma, T);
    EfficiencyScenario sc;
    sc.setup = desk_setup(pressure, 0.0, imprecision_for_efficiency(m.calibration_c, S_tau, eta), seed, inertia);
    sc.eff.mode = "desk";
    sc.eff.calibration_pressure = 40.0;
    sc.eff.calibration_duration = 25.0;
    sc.eff.calibration_chunks = 5;
    sc.eff.floor_duration = 2.0;
    sc.reheat = desk_reheat(400);
    sc.reheat.settle_time = 0.5;
    sc.reheat.cycles_per_job = 100;
    return sc;
}

}  // namespace libracool::testing
