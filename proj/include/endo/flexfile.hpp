#pragma once

#include "endo/sensing.hpp"

#include <string>

namespace endo {

/** @brief Uniform-diameter Euler-Bernoulli model of a rotary file. Units N, mm, mN·m. */
struct FileModel {
    double length = 21.0;
    double youngs_modulus = 80000.0;
    double effective_diameter = 0.6;
    double max_apical_force = 3.9;
    double max_axial_torque = 12.0;

    double second_moment() const;
    double flexural_rigidity() const { return youngs_modulus * second_moment(); }
    void validate() const;

    /** @brief Presets for the ProTaper sequence SX to F3; all 21 mm long. */
    static FileModel preset(const std::string& name);
};

constexpr double kFlexThreshold = 0.03;

/** @brief |tau| / |f| clamped to [0, l]; 0 when |f| is below the activation threshold. */
double leverage_length(double f_radial, double tau_radial, const FileModel& file, double threshold = kFlexThreshold);

/** @brief Deflection at the free end for a lateral force at distance l_a from the clamp. Signed like f. */
double tip_deflection(double f_radial, double l_a, const FileModel& file);

struct FlexGains {
    double x = 0.8;
    double y = 0.8;
};

/** @brief Virtual spring wrench [k_f dx, k_f dy, 0, 0, 0, 0] in {F}. */
Wrench6 flexibility_wrench(const Wrench6& wrench_F, const FileModel& file, const FlexGains& k_f,
                           double threshold = kFlexThreshold);

}  // namespace endo
