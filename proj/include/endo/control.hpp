#pragma once

#include "endo/flexfile.hpp"
#include "endo/geometry.hpp"
#include "endo/sensing.hpp"

#include <array>
#include <string>

namespace endo {

/**
 * @brief Unit system in which m_a, b_a and k_a are read.
 *
 * si: kg, N·s/m (kg·m², N·m·s/rad on rotary axes); the filter output is metres or radians and is
 * converted to mm / deg, torques are converted from mN·m to N·m on input.
 * mm_n: the filter runs directly on N and mN·m and its output is read as mm and deg.
 */
enum class AdmittanceUnits { si, mm_n };

std::string to_string(AdmittanceUnits u);
AdmittanceUnits admittance_units_from_string(const std::string& s);

/** @brief Per-axis gains ordered (x, y, z, phi, psi, theta). */
struct ControllerParams {
    Vec6 kp;
    Vec6 kd;
    Vec6 ma;
    Vec6 ba;
    Vec6 ka;
    Vec6 kf;
    double inner_period = 0.01;
    double outer_period = 0.05;
    bool tustin_exact = true;
    AdmittanceUnits units = AdmittanceUnits::si;
    double clamp_linear = 50.0;
    double clamp_angular = 30.0;

    static ControllerParams table2();
    int divider() const;
    FlexGains flex_gains() const { return {kf(0), kf(1)}; }
    void validate() const;
};

/** @brief Coefficients of y[k] = (b0 u[k] + b1 u[k-1] + b2 u[k-2] - a1 y[k-1] - a2 y[k-2]) / a0. */
struct AdmittanceCoefficients {
    std::array<double, 3> b{};
    std::array<double, 3> a{};
};

/**
 * @brief Discretization of k_a / (m s^2 + b s) at period T.
 *
 * tustin_exact = false gives k_a T (z+1)^2 / (4m(z-1)^2 + 2bT(z^2-1)); true replaces T by T^2 in
 * the numerator.
 */
AdmittanceCoefficients admittance_coefficients(double m, double b, double k, double T, bool tustin_exact);

/** @brief One-axis second-order difference equation with its two-sample history. */
struct AdmittanceFilter {
    AdmittanceCoefficients c;
    double u1 = 0, u2 = 0, y1 = 0, y2 = 0;

    double step(double u);
    /** @brief Overwrites the latest output in the history (used for anti-windup clamping). */
    void override_output(double y) { y1 = y; }
    void reset() { u1 = u2 = y1 = y2 = 0; }
};

struct AdmittanceState {
    std::array<AdmittanceFilter, 6> axes{};
    Vec6 p_adm = Vec6::Zero();
    int clamp_events = 0;

    static AdmittanceState make(const ControllerParams& params);
    void reset();
};

/** @brief p_adm in (mm, deg) from wrench_err = xi_d - xi_com in {F}. Call at the outer period. */
Vec6 admittance_step(AdmittanceState& state, const ControllerParams& params, const Wrench6& wrench_err);

/** @brief k_p e + k_d (e - e_prev) / dt per axis. */
Vec6 pd_step(const ControllerParams& params, const Vec6& p_err, const Vec6& prev_err, double dt);

/** @brief xi_d - (xi_s + xi_flx). */
Wrench6 compose_wrench_error(const Wrench6& xi_d, const Wrench6& wrench_F, const FileModel& file,
                             const FlexGains& k_f, double threshold = kFlexThreshold);

enum class ControlMode { HybridPositionForce, AdmittanceOnly };

std::string to_string(ControlMode m);

/**
 * @brief Two-rate controller state: one tick counter, outer update on every divider-th tick.
 *
 * The command is the commanded rate of the relative pose p_s (mm/s, deg/s).
 */
struct HybridController {
    ControllerParams params;
    AdmittanceState adm;
    long tick = 0;
    ControlMode mode = ControlMode::HybridPositionForce;
    bool started = false;
    Vec6 prev_err = Vec6::Zero();
    Vec6 p_adm_prev = Vec6::Zero();
    Vec6 held_velocity = Vec6::Zero();

    explicit HybridController(const ControllerParams& p);

    /** @brief p_err = p_d - p_adm - p_s with angular differences wrapped. */
    Vec6 step(ControlMode m, const Pose6& p_d, const Pose6& p_s, const Wrench6& wrench_com, const Wrench6& xi_d);
    bool outer_tick() const { return tick % params.divider() == 0; }
};

}  // namespace endo
