#include "endo/robot.hpp"

#include <cmath>
#include <limits>

namespace endo {

DhTable DhTable::representative()
{
    DhTable t;
    t.rows[0] = {0.0, -90.0, 135.0, 0.0};
    t.rows[1] = {135.0, 0.0, 0.0, -90.0};
    t.rows[2] = {38.0, -90.0, 0.0, 0.0};
    t.rows[3] = {0.0, 90.0, 120.0, 0.0};
    t.rows[4] = {0.0, -90.0, 0.0, 0.0};
    t.rows[5] = {0.0, 0.0, 70.0, 0.0};
    return t;
}

void DhTable::validate() const
{
    for (const auto& r : rows) {
        if (!std::isfinite(r.a) || !std::isfinite(r.alpha) || !std::isfinite(r.d) || !std::isfinite(r.theta_offset))
            throw ConfigError("DH table has non-finite entries");
    }
}

static RigidTransform dh_link(const DhRow& row, double q)
{
    RigidTransform t;
    t.rotation = rot_z(q + row.theta_offset) * rot_x(row.alpha);
    t.translation = rot_z(q + row.theta_offset) * Vec3(row.a, 0.0, 0.0) + Vec3(0.0, 0.0, row.d);
    return t;
}

std::array<RigidTransform, 7> link_frames(const DhTable& dh, const Vec6& q)
{
    std::array<RigidTransform, 7> frames;
    frames[0] = RigidTransform::identity();
    for (int i = 0; i < 6; ++i)
        frames[i + 1] = compose(frames[i], dh_link(dh.rows[i], q(i)));
    return frames;
}

RigidTransform forward_kinematics(const DhTable& dh, const Vec6& q)
{
    return link_frames(dh, q)[6];
}

double condition_number(const Mat6& m)
{
    Eigen::JacobiSVD<Mat6> svd(m);
    const auto& s = svd.singularValues();
    if (s(5) <= 0.0)
        return std::numeric_limits<double>::infinity();
    return s(0) / s(5);
}

static JacobianResult finish(const Mat6& J)
{
    JacobianResult r;
    r.J = J;
    r.condition = condition_number(J);
    r.singular = !(r.condition <= kSingularCondition);
    return r;
}

JacobianResult geometric_jacobian(const DhTable& dh, const Vec6& q)
{
    auto frames = link_frames(dh, q);
    const Vec3 pe = frames[6].translation;
    const double k = deg2rad(1.0);
    Mat6 J;
    for (int i = 0; i < 6; ++i) {
        Vec3 z = frames[i].rotation.col(2);
        Vec3 p = frames[i].translation;
        J.block<3, 1>(0, i) = z.cross(pe - p) * k;
        J.block<3, 1>(3, i) = z;
    }
    return finish(J);
}

JacobianResult tool_jacobian_in_flange(const DhTable& dh, const Vec6& q, const Vec3& t_F)
{
    auto flange = forward_kinematics(dh, q);
    Mat6 Jg = geometric_jacobian(dh, q).J;
    Vec3 r = flange.rotation * t_F;
    Mat6 J;
    J.topRows<3>() = Jg.topRows<3>() - skew(r) * Jg.bottomRows<3>() * deg2rad(1.0);
    J.bottomRows<3>() = Jg.bottomRows<3>();
    Mat6 to_flange = Mat6::Zero();
    to_flange.topLeftCorner<3, 3>() = flange.rotation.transpose();
    to_flange.bottomRightCorner<3, 3>() = flange.rotation.transpose();
    return finish(to_flange * J);
}

Vec6 file_velocity_to_joint_rates(const Mat6& jac, const ToolCalibration& tool, const Vec6& p_dot_F)
{
    double cond = condition_number(jac);
    if (!(cond <= kSingularCondition))
        throw SingularityError("Jacobian is singular (condition " + std::to_string(cond) + "); halt motion");
    Vec6 twist;
    twist.head<3>() = tool.R_RF * p_dot_F.head<3>();
    twist.tail<3>() = tool.R_RF * p_dot_F.tail<3>();
    return jac.partialPivLu().solve(twist);
}

Vec3 solve_fixed_point_tip(const std::vector<RigidTransform>& poses)
{
    if (poses.size() < 2)
        throw RankError("fixed-point calibration needs at least two poses");
    const int rows = 3 * static_cast<int>(poses.size() - 1);
    Eigen::MatrixXd A(rows, 3);
    Eigen::VectorXd b(rows);
    for (std::size_t j = 1; j < poses.size(); ++j) {
        const int r = 3 * static_cast<int>(j - 1);
        A.block(r, 0, 3, 3) = poses[0].rotation - poses[j].rotation;
        b.segment(r, 3) = poses[j].translation - poses[0].translation;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s(0) < 1e-12 || s(2) < 1e-9 * s(0))
        throw RankError("calibration orientations are degenerate (stacked rotation differences rank < 3)");
    return svd.solve(b);
}

ToolCalibration tcp_calibrate(const std::array<RigidTransform, 4>& poses_file1,
                              const std::array<RigidTransform, 4>& poses_file2,
                              double working_len1)
{
    Vec3 t1 = solve_fixed_point_tip({poses_file1.begin(), poses_file1.end()});
    Vec3 t2 = solve_fixed_point_tip({poses_file2.begin(), poses_file2.end()});
    Vec3 base = t1 - t2;
    if (base.norm() < 0.1)
        throw NumericalError("file tips closer than 0.1 mm; the two files must differ in length");

    ToolCalibration tool;
    tool.working_part_length = working_len1;
    Vec3 z = base.normalized();
    tool.t_F = t1 - working_len1 * z;

    Vec3 x = Vec3::UnitX() - z * z.x();
    if (x.norm() < 1e-6)
        x = Vec3::UnitY() - z * z.y();
    x.normalize();
    tool.R_RF.col(0) = x;
    tool.R_RF.col(1) = z.cross(x);
    tool.R_RF.col(2) = z;
    return tool;
}

IntegrationResult integrate_joint_command(const JointState& state, const Vec6& q_dot_cmd, double dt,
                                          const JointLimits& limits)
{
    IntegrationResult out;
    out.state.q = state.q + q_dot_cmd * dt;
    out.state.q_dot = q_dot_cmd;
    for (int i = 0; i < 6; ++i) {
        if (out.state.q(i) > limits.upper(i)) {
            out.state.q(i) = limits.upper(i);
            out.state.q_dot(i) = 0;
            out.clamped = true;
        } else if (out.state.q(i) < limits.lower(i)) {
            out.state.q(i) = limits.lower(i);
            out.state.q_dot(i) = 0;
            out.clamped = true;
        }
    }
    return out;
}

}  // namespace endo
