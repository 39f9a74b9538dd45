#pragma once

#include "endo/control.hpp"
#include "endo/flexfile.hpp"

#include <array>
#include <limits>
#include <string>

namespace endo {

enum class FsmStateKind { Idle, Insertion, CleaningShaping, Reverse, Disengage };
enum class DentistEvent { none, ptm_connected, apex_reached, flush_requested };
enum class Emergency { none, hrc_fallback, freeze };
enum class SpindleDirection { off, forward, reverse };

std::string to_string(FsmStateKind s);
std::string to_string(DentistEvent e);
std::string to_string(Emergency e);
std::string to_string(SpindleDirection d);
DentistEvent dentist_event_from_string(const std::string& s);

struct FsmConfig {
    std::array<double, 4> force_schedule{0.4, 0.6, 0.8, 1.0};
    double contact_force = 0.4;
    double torque_limit = 8.0;
    double step_up_time = 15.0;
    double reverse_time = 1.0;
    double disengage_force = -0.8;
    double clean_rpm = 150.0;
    double reverse_rpm = 250.0;
    /** Depth reached by the previous file; infinity lets the contact force decide. */
    double previous_depth = std::numeric_limits<double>::infinity();
};

struct FsmState {
    FsmStateKind kind = FsmStateKind::Idle;
    double entry_time = 0.0;
    int force_schedule_index = 0;
    double below_threshold_timer = 0.0;
    bool frozen = false;
};

struct FsmInputs {
    double tau_z = 0.0;
    /** Flexibility-compensated axial force, positive when the file pushes into the canal. */
    double f_z = 0.0;
    double insertion_depth = 0.0;
    DentistEvent dentist_event = DentistEvent::none;
    bool ptm_near_limit = false;
    bool rapid_motion_detected = false;
    bool manual_reset = false;
    double time = 0.0;
};

struct Spindle {
    double rpm = 0.0;
    SpindleDirection direction = SpindleDirection::off;
};

struct FsmOutputs {
    ControlMode control_mode = ControlMode::AdmittanceOnly;
    double desired_fz = 0.0;
    Spindle spindle;
    bool record_initial_pose = false;
    Emergency emergency = Emergency::none;

    Wrench6 desired_wrench() const;
};

struct FsmStepResult {
    FsmState state;
    FsmOutputs outputs;
};

/**
 * @brief One tick of the cleaning-and-shaping automaton.
 *
 * Priority: freeze (absorbing until manual_reset) over HRC fallback over the nominal transitions.
 * Torque comparisons use |tau_z| so reverse rotation is checked the same way.
 */
FsmStepResult fsm_step(const FsmState& state, const FsmInputs& in, double dt, const FsmConfig& cfg = {});

/** @brief Outputs implied by a state without stepping it (mode, spindle, desired force). */
FsmOutputs fsm_outputs(const FsmState& state, const FsmConfig& cfg = {});

struct SafetyFlags {
    bool fracture_risk = false;
    bool rapid_motion = false;
};

SafetyFlags safety_monitor(const Wrench6& wrench_F, const FileModel& file, double patient_speed,
                           double max_patient_speed = 2.5);

}  // namespace endo
