#pragma once

#include "endo/control.hpp"
#include "endo/flexfile.hpp"
#include "endo/ptm.hpp"
#include "endo/robot.hpp"
#include "endo/sensing.hpp"
#include "endo/workflow.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace endo {

// ---------------------------------------------------------------------------------------------
// Canal geometry

/**
 * @brief Root canal in the patient frame {P}: origin at the entrance, +z toward the apex.
 *
 * Centerline x(z) = sum g_i z^i, y(z) = sum h_i z^i (i = 0..6) with g_0 = h_0 = 0 for a canal
 * whose entrance sits on the P origin. The radius tapers linearly from entrance to apex.
 */
struct CanalModel {
    std::array<double, 7> g{};
    std::array<double, 7> h{};
    double entrance_radius = 0.75;
    double apex_radius = 0.2;
    double length = 18.0;
    double wall_stiffness = 10.0;
    double wall_damping = 0.05;
    /** Removed volume per second per newton of axial force at 150 rpm, mm^3/(s N). */
    double cut_rate = 0.1;

    double x(double z) const;
    double y(double z) const;
    double dx(double z) const;
    double dy(double z) const;
    Vec3 center(double z) const { return {x(z), y(z), z}; }
    /** @brief Linear taper on [0, length], held constant outside. */
    double radius(double z) const;
    void validate() const;

    static CanalModel straight(double length = 18.0);
};

struct CenterlineFit {
    std::array<double, 7> g{};
    std::array<double, 7> h{};
};

/** @brief Degree-6 least squares of x(z) and y(z). Throws RankError with fewer than 7 distinct z. */
CenterlineFit fit_centerline(const std::vector<Vec3>& points);

/** @brief Arc length of the centerline between two z values (adaptive Simpson, 1e-6 mm). */
double centerline_length(const CanalModel& canal, double z_from, double z_to, double tol = 1e-6);

/** @brief Centerline parameter z of the point nearest to p (the centerline is extended past both ends). */
double project_to_centerline(const CanalModel& canal, const Vec3& p);

/**
 * @brief Arc-length coordinate of the tip's projection onto the centerline.
 *
 * `file_in_P` is the pose of {F} in {P}; the tip is at z_F = file.length. Negative above the entrance.
 */
double insertion_depth(const RigidTransform& file_in_P, const CanalModel& canal, const FileModel& file);

// ---------------------------------------------------------------------------------------------
// Contact

struct ContactParams {
    double sample_spacing = 0.5;
    double file_tip_radius = 0.1;
    /** Radius growth per mm away from the tip (ISO 2 % taper on the diameter). */
    double file_taper = 0.01;
    /** Stiffness ramps in over this depth below the entrance so the wrench stays continuous. */
    double entrance_ramp = 0.5;
    /** Penetration scale for the smooth count of engaged samples in the bending correction, mm. */
    double engage_scale = 0.01;
    /** Axial resistance per mm of tip advance beyond the cut frontier, N/mm. */
    double axial_stiffness = 0.1;
    double axial_damping = 0.005;
    /** Relative growth of the axial resistance with spindle speed, per 150 rpm. */
    double axial_speed_gain = 0.25;
    /** Cutting torque per newton of axial resistance at 150 rpm, mN·m/N. */
    double torque_coefficient = 5.0;
    /** Wall friction coefficient for the rotation torque of lateral contacts. */
    double wall_friction = 0.2;
    /** When false the file is treated as rigid (no bending correction). */
    bool flexible_file = true;
};

struct ContactState {
    double cut_frontier = 0.0;
    std::vector<double> prev_penetration;
    double prev_axial = 0.0;
    bool initialized = false;
};

struct ContactResult {
    Wrench6 wrench;
    double lateral_rigid = 0;
    int contacts = 0;
    double insertion_depth = 0;
};

/**
 * @brief Penalty wrench the file exerts on the canal, in {F}.
 *
 * The state carries penetration history for damping and the cut frontier; pass dt <= 0 for a
 * purely static evaluation that leaves the state untouched.
 */
ContactResult contact_wrench(const CanalModel& canal, const RigidTransform& file_in_P, const FileModel& file,
                             const ContactParams& params, const Spindle& spindle, ContactState& state, double dt);

// ---------------------------------------------------------------------------------------------
// Patient motion and string measurement

enum class TrajectoryKind { static_pose, slanted_circle, sinusoid_angles, circle_and_angles, random_walk };

std::string to_string(TrajectoryKind k);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct PatientTrajectory {
    TrajectoryKind kind = TrajectoryKind::static_pose;
    double speed = 2.0;
    double circle_radius = 20.0;
    double circle_depth = 20.0;
    double angle_amplitude = 5.0;
    double max_angular_rate = 1.0;
    /** Random-walk samples (relative to the start), used only for kind random_walk. */
    std::vector<Pose6> samples;
    double sample_dt = 0.01;
};

/** @brief Displacement of the patient at time t: translation in {G}, rotation about the patient origin. */
Pose6 patient_pose(const PatientTrajectory& traj, double t);

struct StringMeasurement {
    StringLengths lengths = StringLengths::Zero();
    std::array<bool, 6> stroke_exceeded{};
    bool any_exceeded() const;
};

struct PtmSensor {
    double sigma = 0.02;
    double quantization = 0.2;
    double stroke_limit = 19.0;
    StringLengths home_lengths = StringLengths::Zero();
};

StringMeasurement measure_strings(const PtmGeometry& geom, const Pose6& true_relative_pose, const PtmSensor& sensor,
                                  std::mt19937_64& rng);
StringMeasurement measure_strings(const PtmGeometry& geom, const Pose6& true_relative_pose, const PtmSensor& sensor,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------------------------
// Episodes

enum class Scheme { hybrid, admittance_only, admittance_flex };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct ScriptedEvent {
    double time = 0;
    DentistEvent event = DentistEvent::none;
};

struct EpisodeConfig {
    DhTable dh = DhTable::representative();
    JointLimits joint_limits;
    Vec6 q0 = Vec6::Zero();
    ToolCalibration tool;
    FileModel file;
    CanalModel canal = CanalModel::straight();
    ContactParams contact;
    ControllerParams controller = ControllerParams::table2();
    Scheme scheme = Scheme::hybrid;
    PatientTrajectory trajectory;
    /** Constant patient displacement applied after the reference is recorded. */
    Pose6 patient_offset;
    PtmGeometry ptm = PtmGeometry::table1();
    PtmSensor ptm_sensor;
    NewtonOptions newton;
    /** A PTM estimate further than this from the previous one is rejected as a branch jump (mm, deg). */
    double ptm_gate_translation = 2.0;
    double ptm_gate_rotation = 6.0;
    /** The episode aborts once more than this many consecutive estimates have been rejected. */
    int ptm_max_rejections = 20;
    SensorNoise sensor_noise;
    SensorQuantization sensor_quant;
    GravityParams gravity;
    Vec3 t_FS = Vec3(0, 0, -45.0);
    double duration = 10.0;
    /** Tip depth below the canal entrance at t = 0 (negative: above the entrance). */
    double initial_depth = 6.0;
    double initial_frontier = 6.0;
    /** Fixed mode run: no automaton, constant desired wrench and control mode from the scheme. */
    bool use_fsm = false;
    double desired_fz = 0.4;
    FsmConfig fsm;
    std::vector<ScriptedEvent> events;
    /** Emits apex_reached once the insertion depth reaches this value (FSM runs only). */
    std::optional<double> apex_depth;
    std::uint64_t seed = 1;

    static EpisodeConfig defaults();
    void validate() const;
};

struct EpisodeSample {
    double t = 0;
    Pose6 patient;
    Pose6 relative_true;
    Pose6 relative_measured;
    Vec6 alignment_error = Vec6::Zero();
    StringLengths strings = StringLengths::Zero();
    Wrench6 wrench_true;
    Wrench6 wrench_sensed;
    Vec6 command = Vec6::Zero();
    Vec6 p_adm = Vec6::Zero();
    Vec6 q = Vec6::Zero();
    FsmStateKind state = FsmStateKind::Idle;
    ControlMode mode = ControlMode::HybridPositionForce;
    double desired_fz = 0;
    double insertion_depth = 0;
    double cut_frontier = 0;
    bool fracture_risk = false;
    Emergency emergency = Emergency::none;
};

struct EpisodeLog {
    std::vector<EpisodeSample> samples;
    std::vector<FsmStateKind> state_sequence;
    bool aborted = false;
    std::string abort_reason;
    int clamp_events = 0;
    int joint_clamps = 0;
    int ptm_failures = 0;
    bool fracture_flag = false;
    std::uint64_t seed = 0;
};

EpisodeLog simulate_episode(const EpisodeConfig& cfg);

struct EpisodeSummary {
    Vec6 rms_error = Vec6::Zero();
    Vec6 mean_abs_wrench = Vec6::Zero();
    double mean_lateral_force = 0;
    int samples = 0;
};

/** @brief RMS alignment error per axis and mean absolute wrench per axis over samples with t >= t_from. */
EpisodeSummary summarize(const EpisodeLog& log, double t_from = 0.0);

/**
 * @brief Robot-patient alignment run: slanted circle with sinusoidal angles, one lap, fixed control mode.
 *
 * Plant, sensors and controller come from `base`.
 */
EpisodeConfig alignment_config(Scheme scheme, double speed, std::uint64_t seed = 1,
                               const EpisodeConfig& base = EpisodeConfig::defaults());

// ---------------------------------------------------------------------------------------------
// One-axis linear platform (gain selection and file-flexibility experiments)

enum class PlatformMotion { ramp_hold, triangle };

struct PlatformConfig {
    ControllerParams controller = ControllerParams::table2();
    FileModel file;
    double insertion_depth = 12.0;
    double platform_stiffness = 0.7;
    PlatformMotion motion = PlatformMotion::triangle;
    double speed = 2.5;
    double travel = 5.0;
    double ramp_time = 0.75;
    double duration = 12.0;
    SensorNoise sensor_noise;
    SensorQuantization sensor_quant;
    double inner_period = 0.01;
    std::uint64_t seed = 1;
};

struct PlatformLog {
    std::vector<double> t;
    std::vector<double> platform;
    std::vector<double> robot;
    std::vector<double> force;
    std::vector<double> error;
};

PlatformLog simulate_platform(const PlatformConfig& cfg);

/** @brief RMS of the platform-robot distance after `settle` seconds. */
double platform_tracking_rms(const PlatformConfig& cfg, double settle = 2.0);

// ---------------------------------------------------------------------------------------------
// Synthetic calibration data

/** @brief Mean recovery errors of TCP and gravity calibration under Gaussian measurement noise. */
struct CalibrationDemo {
    double sigma = 0;
    double tcp_position_error = 0;
    double tcp_axis_error_deg = 0;
    double gravity_weight_error = 0;
    double gravity_centroid_error = 0;
    double gravity_yaw_error_deg = 0;
};

/**
 * @brief Builds noisy synthetic calibration data and runs both identifications.
 *
 * Flange translations get sigma mm of noise, force readings sigma N and torque readings sigma mN·m.
 * The same normalized noise draws are reused for every sigma of a given seed.
 */
CalibrationDemo calibration_demo(double sigma, std::uint64_t seed, int trials = 20);

double rms(const std::vector<double>& v, std::size_t from = 0);
double peak_to_peak(const std::vector<double>& v, std::size_t from = 0);

}  // namespace endo
