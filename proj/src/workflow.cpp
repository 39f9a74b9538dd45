#include "endo/workflow.hpp"

#include <cmath>

namespace endo {

std::string to_string(FsmStateKind s)
{
    switch (s) {
    case FsmStateKind::Idle: return "Idle";
    case FsmStateKind::Insertion: return "Insertion";
    case FsmStateKind::CleaningShaping: return "CleaningShaping";
    case FsmStateKind::Reverse: return "Reverse";
    case FsmStateKind::Disengage: return "Disengage";
    }
    return "?";
}

std::string to_string(DentistEvent e)
{
    switch (e) {
    case DentistEvent::none: return "none";
    case DentistEvent::ptm_connected: return "ptm_connected";
    case DentistEvent::apex_reached: return "apex_reached";
    case DentistEvent::flush_requested: return "flush_requested";
    }
    return "?";
}

std::string to_string(Emergency e)
{
    switch (e) {
    case Emergency::none: return "none";
    case Emergency::hrc_fallback: return "hrc_fallback";
    case Emergency::freeze: return "freeze";
    }
    return "?";
}

std::string to_string(SpindleDirection d)
{
    switch (d) {
    case SpindleDirection::off: return "off";
    case SpindleDirection::forward: return "forward";
    case SpindleDirection::reverse: return "reverse";
    }
    return "?";
}

DentistEvent dentist_event_from_string(const std::string& s)
{
    for (auto e : {DentistEvent::none, DentistEvent::ptm_connected, DentistEvent::apex_reached,
                   DentistEvent::flush_requested})
        if (to_string(e) == s)
            return e;
    throw ConfigError("unknown dentist event '" + s + "'");
}

Wrench6 FsmOutputs::desired_wrench() const
{
    Wrench6 w;
    w.frame = Frame::F;
    w.force.z() = desired_fz;
    return w;
}

FsmOutputs fsm_outputs(const FsmState& state, const FsmConfig& cfg)
{
    FsmOutputs out;
    if (state.frozen) {
        out.emergency = Emergency::freeze;
        return out;
    }
    switch (state.kind) {
    case FsmStateKind::Idle:
        out.control_mode = ControlMode::AdmittanceOnly;
        break;
    case FsmStateKind::Insertion:
        out.control_mode = ControlMode::HybridPositionForce;
        out.desired_fz = cfg.force_schedule[0];
        break;
    case FsmStateKind::CleaningShaping:
        out.control_mode = ControlMode::HybridPositionForce;
        out.desired_fz = cfg.force_schedule[state.force_schedule_index];
        out.spindle = {cfg.clean_rpm, SpindleDirection::forward};
        break;
    case FsmStateKind::Reverse:
        out.control_mode = ControlMode::HybridPositionForce;
        out.spindle = {cfg.reverse_rpm, SpindleDirection::reverse};
        break;
    case FsmStateKind::Disengage:
        out.control_mode = ControlMode::HybridPositionForce;
        out.desired_fz = cfg.disengage_force;
        break;
    }
    return out;
}

namespace {

FsmState enter(const FsmState& s, FsmStateKind kind, double t)
{
    FsmState n = s;
    n.kind = kind;
    n.entry_time = t;
    n.below_threshold_timer = 0.0;
    return n;
}

}  // namespace

FsmStepResult fsm_step(const FsmState& state, const FsmInputs& in, double dt, const FsmConfig& cfg)
{
    if (!(dt > 0))
        throw ConfigError("fsm_step needs dt > 0");

    FsmState s = state;
    if (s.frozen && in.manual_reset) {
        s = FsmState{};
        s.entry_time = in.time;
    }
    if (s.frozen || in.rapid_motion_detected) {
        s.frozen = true;
        return {s, fsm_outputs(s, cfg)};
    }
    if (in.ptm_near_limit) {
        FsmState n = enter(s, FsmStateKind::Idle, in.time);
        n.force_schedule_index = 0;
        FsmOutputs out = fsm_outputs(n, cfg);
        out.emergency = Emergency::hrc_fallback;
        return {n, out};
    }

    const double torque = std::abs(in.tau_z);
    bool record = false;
    bool fallback = false;
    switch (s.kind) {
    case FsmStateKind::Idle:
        if (in.dentist_event == DentistEvent::ptm_connected) {
            s = enter(s, FsmStateKind::Insertion, in.time);
            record = true;
        }
        break;
    case FsmStateKind::Insertion:
        if (std::abs(in.f_z) >= cfg.contact_force || in.insertion_depth >= cfg.previous_depth) {
            s = enter(s, FsmStateKind::CleaningShaping, in.time);
            s.force_schedule_index = 0;
        }
        break;
    case FsmStateKind::CleaningShaping:
        if (in.dentist_event == DentistEvent::apex_reached || in.dentist_event == DentistEvent::flush_requested) {
            s = enter(s, FsmStateKind::Disengage, in.time);
            s.force_schedule_index = 0;
        } else if (torque > cfg.torque_limit) {
            s = enter(s, FsmStateKind::Reverse, in.time);
        } else {
            s.below_threshold_timer += dt;
            if (s.below_threshold_timer >= cfg.step_up_time - 1e-9) {
                if (s.force_schedule_index < static_cast<int>(cfg.force_schedule.size()) - 1)
                    ++s.force_schedule_index;
                s.below_threshold_timer = 0.0;
            }
        }
        break;
    case FsmStateKind::Reverse:
        if (in.time - s.entry_time >= cfg.reverse_time - 1e-9) {
            if (torque > cfg.torque_limit) {
                s = enter(s, FsmStateKind::Idle, in.time);
                s.force_schedule_index = 0;
                fallback = true;
            } else {
                s = enter(s, FsmStateKind::CleaningShaping, in.time);
            }
        }
        break;
    case FsmStateKind::Disengage:
        if (in.insertion_depth <= 0.0)
            s = enter(s, FsmStateKind::Idle, in.time);
        break;
    }

    FsmOutputs out = fsm_outputs(s, cfg);
    out.record_initial_pose = record;
    if (fallback)
        out.emergency = Emergency::hrc_fallback;
    return {s, out};
}

SafetyFlags safety_monitor(const Wrench6& wrench_F, const FileModel& file, double patient_speed,
                           double max_patient_speed)
{
    SafetyFlags f;
    f.fracture_risk = std::abs(wrench_F.force.z()) > file.max_apical_force ||
                      std::abs(wrench_F.torque.z()) > file.max_axial_torque;
    f.rapid_motion = patient_speed > max_patient_speed;
    return f;
}

}  // namespace endo
