#include "endo/control.hpp"

#include <algorithm>
#include <cmath>

namespace endo {

std::string to_string(AdmittanceUnits u)
{
    return u == AdmittanceUnits::si ? "si" : "mm_n";
}

AdmittanceUnits admittance_units_from_string(const std::string& s)
{
    if (s == "si")
        return AdmittanceUnits::si;
    if (s == "mm_n")
        return AdmittanceUnits::mm_n;
    throw ConfigError("unknown admittance unit system '" + s + "' (expected si or mm_n)");
}

std::string to_string(ControlMode m)
{
    return m == ControlMode::HybridPositionForce ? "hybrid" : "admittance_only";
}

ControllerParams ControllerParams::table2()
{
    ControllerParams p;
    p.kp << 5.0, 5.0, 5.0, 1.5, 1.5, 1.5;
    p.kd << 0.0015, 0.0015, 0.0015, 0.0005, 0.0005, 0.0005;
    p.ma << 0.4, 0.4, 0.4, 0.001157, 0.001633, 0.001208;
    p.ba << 40, 40, 40, 0.1157, 0.1633, 0.1208;
    p.ka << 0.8, 0.8, 1.6, 1.6, 1.6, 0.0;
    p.kf << 0.8, 0.8, 0.0, 0.0, 0.0, 0.0;
    return p;
}

int ControllerParams::divider() const
{
    return static_cast<int>(std::lround(outer_period / inner_period));
}

void ControllerParams::validate() const
{
    if (!(inner_period > 0) || !(outer_period > 0))
        throw ConfigError("controller periods must be positive");
    const double ratio = outer_period / inner_period;
    if (std::lround(ratio) < 1 || std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("outer_period must be an integer multiple of inner_period");
    for (int i = 0; i < 6; ++i) {
        if (ka(i) != 0.0 && (!(ma(i) > 0) || !(ba(i) > 0)))
            throw ConfigError("m_a and b_a must be positive on every axis with nonzero k_a");
        if (!std::isfinite(kp(i)) || !std::isfinite(kd(i)) || !std::isfinite(ka(i)) || !std::isfinite(kf(i)))
            throw ConfigError("controller gains must be finite");
    }
    if (!(clamp_linear > 0) || !(clamp_angular > 0))
        throw ConfigError("admittance clamps must be positive");
}

AdmittanceCoefficients admittance_coefficients(double m, double b, double k, double T, bool tustin_exact)
{
    AdmittanceCoefficients c;
    const double g = k * (tustin_exact ? T * T : T);
    c.b = {g, 2 * g, g};
    c.a = {4 * m + 2 * b * T, -8 * m, 4 * m - 2 * b * T};
    return c;
}

double AdmittanceFilter::step(double u)
{
    const double y = (c.b[0] * u + c.b[1] * u1 + c.b[2] * u2 - c.a[1] * y1 - c.a[2] * y2) / c.a[0];
    u2 = u1;
    u1 = u;
    y2 = y1;
    y1 = y;
    return y;
}

AdmittanceState AdmittanceState::make(const ControllerParams& params)
{
    AdmittanceState s;
    for (int i = 0; i < 6; ++i) {
        if (params.ka(i) == 0.0)
            s.axes[i].c = AdmittanceCoefficients{{0, 0, 0}, {1, 0, 0}};
        else
            s.axes[i].c = admittance_coefficients(params.ma(i), params.ba(i), params.ka(i), params.outer_period,
                                                  params.tustin_exact);
    }
    return s;
}

void AdmittanceState::reset()
{
    for (auto& a : axes)
        a.reset();
    p_adm.setZero();
}

Vec6 admittance_step(AdmittanceState& state, const ControllerParams& params, const Wrench6& wrench_err)
{
    const bool si = params.units == AdmittanceUnits::si;
    // input scale (to filter units) and output scale (filter units to mm / deg)
    const double in_rot = si ? 1e-3 : 1.0;
    const double out_lin = si ? 1e3 : 1.0;
    const double out_rot = si ? rad2deg(1.0) : 1.0;

    const Vec6 u = wrench_err.vec();
    for (int i = 0; i < 6; ++i) {
        const bool lin = i < 3;
        const double y = state.axes[i].step(u(i) * (lin ? 1.0 : in_rot));
        double out = y * (lin ? out_lin : out_rot);
        const double lim = lin ? params.clamp_linear : params.clamp_angular;
        if (std::abs(out) > lim) {
            out = std::copysign(lim, out);
            state.axes[i].override_output(out / (lin ? out_lin : out_rot));
            ++state.clamp_events;
        }
        state.p_adm(i) = out;
    }
    return state.p_adm;
}

Vec6 pd_step(const ControllerParams& params, const Vec6& p_err, const Vec6& prev_err, double dt)
{
    if (!(dt > 0))
        throw ConfigError("pd_step needs dt > 0");
    return (params.kp.array() * p_err.array() + params.kd.array() * (p_err - prev_err).array() / dt).matrix();
}

Wrench6 compose_wrench_error(const Wrench6& xi_d, const Wrench6& wrench_F, const FileModel& file,
                             const FlexGains& k_f, double threshold)
{
    const Wrench6 flx = flexibility_wrench(wrench_F, file, k_f, threshold);
    Wrench6 err = xi_d - (wrench_F + flx);
    err.frame = Frame::F;
    return err;
}

HybridController::HybridController(const ControllerParams& p) : params(p), adm(AdmittanceState::make(p))
{
    params.validate();
}

Vec6 HybridController::step(ControlMode m, const Pose6& p_d, const Pose6& p_s, const Wrench6& wrench_com,
                            const Wrench6& xi_d)
{
    if (!started || m != mode) {
        adm.reset();
        prev_err.setZero();
        p_adm_prev.setZero();
        held_velocity.setZero();
        mode = m;
        started = true;
    }

    const bool outer = outer_tick();
    if (outer) {
        p_adm_prev = adm.p_adm;
        admittance_step(adm, params, xi_d - wrench_com);
    }

    Vec6 cmd;
    if (mode == ControlMode::HybridPositionForce) {
        const Vec6 e = pose_difference(p_d, p_s) - adm.p_adm;
        cmd = pd_step(params, e, prev_err, params.inner_period);
        prev_err = e;
    } else {
        // p_adm enters the reference with a minus sign, as in the hybrid error.
        if (outer)
            held_velocity = -(adm.p_adm - p_adm_prev) / params.outer_period;
        cmd = held_velocity;
    }
    ++tick;
    return cmd;
}

}  // namespace endo
