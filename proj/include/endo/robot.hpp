#pragma once

#include "endo/geometry.hpp"

#include <array>
#include <string>
#include <vector>

namespace endo {

/** @brief Standard DH row: T = Rz(q + theta_offset) Tz(d) Tx(a) Rx(alpha). Lengths mm, angles deg. */
struct DhRow {
    double a = 0;
    double alpha = 0;
    double d = 0;
    double theta_offset = 0;
};

struct DhTable {
    std::array<DhRow, 6> rows{};

    /** @brief A compact desktop 6R arm of Meca500-like proportions. */
    static DhTable representative();
    void validate() const;
};

struct JointLimits {
    Vec6 lower = Vec6::Constant(-175.0);
    Vec6 upper = Vec6::Constant(175.0);
};

/** @brief Joint angles in deg and rates in deg/s. */
struct JointState {
    Vec6 q = Vec6::Zero();
    Vec6 q_dot = Vec6::Zero();
};

struct ToolCalibration {
    Vec3 t_F = Vec3::Zero();
    Mat3 R_RF = Mat3::Identity();
    double working_part_length = 0;
};

/** @brief Pose of the flange frame {R} in the robot base frame {G}. */
RigidTransform forward_kinematics(const DhTable& dh, const Vec6& q);

/** @brief Frames {0}..{6}; element i is the pose of link frame i in {G}. */
std::array<RigidTransform, 7> link_frames(const DhTable& dh, const Vec6& q);

struct JacobianResult {
    Mat6 J = Mat6::Zero();
    double condition = 0;
    bool singular = false;
};

constexpr double kSingularCondition = 1e8;

/**
 * @brief Geometric Jacobian of the flange in {G}.
 *
 * Joint rates are in deg/s, so linear rows are in mm/deg and angular rows map deg/s to deg/s.
 */
JacobianResult geometric_jacobian(const DhTable& dh, const Vec6& q);

/**
 * @brief Jacobian of the tool point t_F expressed in the flange frame {R}.
 *
 * This is the matrix that makes q_dot = J^-1 diag(R_RF, R_RF) p_dot_F exact for a twist given in {F}.
 */
JacobianResult tool_jacobian_in_flange(const DhTable& dh, const Vec6& q, const Vec3& t_F);

double condition_number(const Mat6& m);

/** @brief q_dot = J^-1 blockdiag(R_RF, R_RF) p_dot_F. Throws SingularityError when cond(J) > 1e8. */
Vec6 file_velocity_to_joint_rates(const Mat6& jac, const ToolCalibration& tool, const Vec6& p_dot_F);

/**
 * @brief Two-file TCP calibration from four flange poses per file with the tip held on a fixed point.
 *
 * Throws RankError when the stacked rotation differences have rank < 3 and
 * NumericalError when the two tips are closer than 0.1 mm.
 */
ToolCalibration tcp_calibrate(const std::array<RigidTransform, 4>& poses_file1,
                              const std::array<RigidTransform, 4>& poses_file2,
                              double working_len1);

/** @brief Least-squares tip position in {R} from flange poses sharing a fixed tip point. */
Vec3 solve_fixed_point_tip(const std::vector<RigidTransform>& poses);

struct IntegrationResult {
    JointState state;
    bool clamped = false;
};

IntegrationResult integrate_joint_command(const JointState& state, const Vec6& q_dot_cmd, double dt,
                                          const JointLimits& limits = {});

}  // namespace endo
