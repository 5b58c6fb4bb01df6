#include <gtest/gtest.h>

#include <cmath>

#include "libracool/physics.hpp"

using namespace libracool;

namespace {
const ModeParams mode{"m", 1e-32, two_pi * 330e3, 6.283, 1.0, 10.0};
}

TEST(Physics, ConstantsMatchCodata) {
    EXPECT_DOUBLE_EQ(PhysConstants::hbar, 1.054571817646156e-34);
    EXPECT_DOUBLE_EQ(PhysConstants::kB, 1.380649e-23);
}

TEST(Physics, DampingLinearInPressure) {
    EXPECT_NEAR(damping_from_pressure(mode, 0.5), 3.1415, 1e-12);
    EXPECT_EQ(damping_from_pressure(mode, 0.0), 0.0);
    EXPECT_THROW(damping_from_pressure(mode, -1.0), InvalidInput);
}

TEST(Physics, ThermalTorquePsdOracle) {
    // 4 kB T I gamma, frozen with mpmath.
    EXPECT_NEAR(thermal_torque_psd(1e-32, 1e-2, 295.0), 1.62916582e-54, 1e-62);
    EXPECT_EQ(thermal_torque_psd(1e-32, 1.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(thermal_torque_psd(1e-32, 2e-2, 295.0), 2.0 * thermal_torque_psd(1e-32, 1e-2, 295.0));
}

TEST(Physics, PhononOccupation) {
    const double T = PhysConstants::hbar * mode.omega0 / PhysConstants::kB;
    EXPECT_NEAR(phonon_occupation(T, mode.omega0), 0.5, 1e-12);
    EXPECT_NEAR(phonon_occupation(1.34e-3, two_pi * 330.4e3), 84.0068693, 1e-6);
    EXPECT_LT(phonon_occupation(0.0, mode.omega0), 0.0);  // not clamped
}

TEST(Physics, MinOccupationFromEfficiency) {
    EXPECT_EQ(min_occupation_from_efficiency(1.0), 0.0);
    EXPECT_NEAR(min_occupation_from_efficiency(0.005), 6.571067811865475, 1e-12);
    EXPECT_NEAR(min_occupation_from_efficiency(0.0053), 6.368028197434451, 1e-12);
    EXPECT_THROW(min_occupation_from_efficiency(0.0), InvalidInput);
    EXPECT_THROW(min_occupation_from_efficiency(1.5), InvalidInput);
}

TEST(Physics, TableOneInversions) {
    const struct {
        double T, n, f;
    } rows[] = {{1.34e-3, 84.0, 330426.85947}, {15e-3, 2298.0, 135979.67668}, {4.1e-3, 742.0, 115057.42546}};
    for (const auto& r : rows) {
        const double omega = PhysConstants::kB * r.T / (PhysConstants::hbar * (r.n + 0.5));
        EXPECT_NEAR(omega / two_pi, r.f, 1e-4);
        EXPECT_NEAR(phonon_occupation(r.T, omega), r.n, 1e-9);
    }
}

TEST(Physics, NoiseBudgetDerivesThermalPart) {
    const Environment env{0.5, 295.0};
    const NoiseBudget b(mode, env, 2e-54, 3e-12);
    EXPECT_DOUBLE_EQ(b.S_th(), thermal_torque_psd(mode.inertia, damping_from_pressure(mode, 0.5), 295.0));
    EXPECT_DOUBLE_EQ(b.S_tau_total(), b.S_th() + 2e-54);
    EXPECT_EQ(b.S_imp_exp(), 3e-12);
    EXPECT_THROW(NoiseBudget(mode, env, -1.0, 0.0), InvalidInput);
}

TEST(Physics, EquilibriumVariance) {
    EXPECT_DOUBLE_EQ(equilibrium_angle_variance(mode, 295.0),
                     PhysConstants::kB * 295.0 / (mode.inertia * mode.omega0 * mode.omega0));
}

TEST(Physics, RotateAngleMatchesLibm) {
    for (double a : {0.0, 0.3, 2.0, -1.1}) {
        for (double d : {1e-9, -3e-4, 5e-3, 9.9e-3, 0.2}) {
            double c = 0.0;
            double s = 0.0;
            detail::rotate_angle(std::cos(a), std::sin(a), d, c, s);
            EXPECT_NEAR(c, std::cos(a + d), 2e-16);
            EXPECT_NEAR(s, std::sin(a + d), 2e-16);
        }
    }
}

TEST(Physics, DefaultModesAreNonDegenerate) {
    const auto m = default_modes();
    ASSERT_EQ(m.size(), 3u);
    EXPECT_NEAR(m[0].frequency(), 330e3, 1e-6);
    EXPECT_NEAR(m[1].frequency(), 136e3, 1e-6);
    EXPECT_NEAR(m[2].frequency(), 115e3, 1e-6);
    for (const auto& x : m) {
        EXPECT_NO_THROW(validate(x));
    }
}
