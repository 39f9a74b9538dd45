#include "endo/robot.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace endo;
using endo::test::uniform;

namespace {

// Homogeneous DH product written out element by element.
Eigen::Matrix4d dh_matrix(const DhRow& r, double q_deg)
{
    const double th = (q_deg + r.theta_offset) * kPi / 180.0, al = r.alpha * kPi / 180.0;
    const double ct = std::cos(th), st = std::sin(th), ca = std::cos(al), sa = std::sin(al);
    Eigen::Matrix4d m;
    m << ct, -st * ca, st * sa, r.a * ct,
         st, ct * ca, -ct * sa, r.a * st,
         0, sa, ca, r.d,
         0, 0, 0, 1;
    return m;
}

Eigen::Matrix4d fk_oracle(const DhTable& dh, const Vec6& q)
{
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    for (int i = 0; i < 6; ++i)
        t = t * dh_matrix(dh.rows[i], q(i));
    return t;
}

Vec6 random_q(std::mt19937_64& rng)
{
    Vec6 q;
    for (int i = 0; i < 6; ++i)
        q(i) = uniform(rng, -170.0, 170.0);
    return q;
}

// Rotation vector of r in radians.
Vec3 log_so3(const Mat3& r)
{
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

}  // namespace

TEST_CASE("forward kinematics of a pure-d table stacks along z")
{
    DhTable dh;
    for (int i = 0; i < 6; ++i)
        dh.rows[i] = {0, 0, 10.0 * (i + 1), 0};
    const RigidTransform t = forward_kinematics(dh, Vec6::Zero());
    CHECK((t.translation - Vec3(0, 0, 210)).norm() < 1e-12);
    CHECK((t.rotation - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("single revolute link at 90 deg is Rz(90)")
{
    DhTable dh;
    Vec6 q = Vec6::Zero();
    q(0) = 90;
    CHECK((forward_kinematics(dh, q).rotation - rot_z(90)).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches the per-link matrix product")
{
    const DhTable dh = DhTable::representative();
    std::mt19937_64 rng(5);
    for (int n = 0; n < 200; ++n) {
        const Vec6 q = random_q(rng);
        const RigidTransform t = forward_kinematics(dh, q);
        const Eigen::Matrix4d o = fk_oracle(dh, q);
        CHECK((t.rotation - o.topLeftCorner<3, 3>()).norm() < 1e-10);
        CHECK((t.translation - o.topRightCorner<3, 1>()).norm() < 1e-10);
    }
}

TEST_CASE("geometric Jacobian agrees with central differences")
{
    const DhTable dh = DhTable::representative();
    std::mt19937_64 rng(9);
    const double h = 1e-6;
    for (int n = 0; n < 100; ++n) {
        const Vec6 q = random_q(rng);
        const Mat6 J = geometric_jacobian(dh, q).J;
        Mat6 fd;
        for (int i = 0; i < 6; ++i) {
            Vec6 qp = q, qm = q;
            qp(i) += h;
            qm(i) -= h;
            const RigidTransform tp = forward_kinematics(dh, qp), tm = forward_kinematics(dh, qm);
            fd.block<3, 1>(0, i) = (tp.translation - tm.translation) / (2 * h);
            fd.block<3, 1>(3, i) = log_so3(tp.rotation * tm.rotation.transpose()) / deg2rad(2 * h);
        }
        CHECK((J - fd).norm() <= 1e-5 * J.norm());
    }
}

TEST_CASE("stretched planar arm is flagged singular")
{
    DhTable dh;
    for (int i = 0; i < 6; ++i)
        dh.rows[i] = {50, 0, 0, 0};
    const JacobianResult r = geometric_jacobian(dh, Vec6::Zero());
    CHECK(r.singular);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r.J.topRows<3>() * r.J.topRows<3>().transpose());
    CHECK(svd.singularValues()(2) < 1e-12);
}

TEST_CASE("theta offset shift compensated by q leaves the Jacobian unchanged")
{
    DhTable a = DhTable::representative(), b = a;
    b.rows[2].theta_offset += 30;
    Vec6 q;
    q << 10, -20, 35, 5, 40, -15;
    Vec6 qb = q;
    qb(2) -= 30;
    const Mat6 ja = geometric_jacobian(a, q).J, jb = geometric_jacobian(b, qb).J;
    for (int i = 0; i < 6; ++i)
        CHECK(ja.col(i).norm() == doctest::Approx(jb.col(i).norm()).epsilon(1e-12));
}

TEST_CASE("file velocity mapping")
{
    ToolCalibration tool;
    CHECK(file_velocity_to_joint_rates(Mat6::Identity(), tool, Vec6::Zero()).norm() == 0.0);
    Vec6 v;
    v << 1, 2, 3, 4, 5, 6;
    CHECK((file_velocity_to_joint_rates(Mat6::Identity(), tool, v) - v).norm() < 1e-15);

    const DhTable dh = DhTable::representative();
    Vec6 q;
    q << 10, -30, 40, 15, 50, -20;
    tool.t_F = Vec3(3, -2, 40);
    tool.R_RF = rot_x(8) * rot_y(-5);
    const Mat6 J = tool_jacobian_in_flange(dh, q, tool.t_F).J;
    const Vec6 qd = file_velocity_to_joint_rates(J, tool, v);
    Vec6 rotated;
    rotated << tool.R_RF * v.head<3>(), tool.R_RF * v.tail<3>();
    CHECK((J * qd - rotated).norm() < 1e-9);
    CHECK((file_velocity_to_joint_rates(J, tool, 2.5 * v) - 2.5 * qd).norm() <= 1e-12 * qd.norm());

    CHECK_THROWS_AS(file_velocity_to_joint_rates(Mat6::Zero(), tool, v), SingularityError);
}

TEST_CASE("tool Jacobian moves the tip as predicted")
{
    const DhTable dh = DhTable::representative();
    Vec6 q;
    q << 20, -10, 30, -25, 45, 60;
    const Vec3 t_F(3, -2, 40);
    const Mat6 J = tool_jacobian_in_flange(dh, q, t_F).J;
    const double h = 1e-6;
    const RigidTransform f0 = forward_kinematics(dh, q);
    for (int i = 0; i < 6; ++i) {
        Vec6 qp = q, qm = q;
        qp(i) += h;
        qm(i) -= h;
        const Vec3 dp = (forward_kinematics(dh, qp).apply(t_F) - forward_kinematics(dh, qm).apply(t_F)) / (2 * h);
        CHECK((f0.rotation.transpose() * dp - J.block<3, 1>(0, i)).norm() < 1e-6);
    }
}

namespace {

std::array<RigidTransform, 4> pivot_poses(const Vec3& tip, const Vec3& pivot, int phase)
{
    std::array<RigidTransform, 4> out;
    for (int i = 0; i < 4; ++i) {
        RigidTransform t;
        t.rotation = rpy_to_rotation(20.0 * std::cos(i + phase), 25.0 * std::sin(1.4 * i), 35.0 * i - 50.0);
        t.translation = pivot - t.rotation * tip;
        out[static_cast<std::size_t>(i)] = t;
    }
    return out;
}

}  // namespace

TEST_CASE("TCP calibration recovers a synthetic tool")
{
    const Vec3 t_F(2, 1.5, 45), axis = Vec3(0.04, 0.02, 1).normalized(), pivot(120, -40, 250);
    const double len1 = 21, len2 = 16;
    const ToolCalibration est =
        tcp_calibrate(pivot_poses(t_F + len1 * axis, pivot, 0), pivot_poses(t_F + len2 * axis, pivot, 1), len1);
    CHECK((est.t_F - t_F).norm() < 1e-9);
    CHECK((est.R_RF.col(2) - axis).norm() < 1e-9);
    CHECK((est.R_RF.transpose() * est.R_RF - Mat3::Identity()).norm() < 1e-12);
    CHECK(est.R_RF.determinant() == doctest::Approx(1.0));
    // Gram-Schmidt completion: x lies in the plane of the robot x axis and z.
    CHECK(est.R_RF.col(0).dot(Vec3::UnitX().cross(axis)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(est.R_RF.col(0).x() > 0);
    CHECK(est.working_part_length == len1);
}

TEST_CASE("TCP calibration error grows with flange noise")
{
    const Vec3 t_F(2, 1.5, 45), axis = Vec3(0.04, 0.02, 1).normalized(), pivot(120, -40, 250);
    double prev = 0;
    for (double sigma : {1e-4, 1e-3, 1e-2}) {
        std::mt19937_64 rng(21);
        std::normal_distribution<double> n(0, sigma);
        double err = 0;
        for (int trial = 0; trial < 30; ++trial) {
            auto p1 = pivot_poses(t_F + 21 * axis, pivot, 0), p2 = pivot_poses(t_F + 16 * axis, pivot, 1);
            for (auto* set : {&p1, &p2})
                for (auto& t : *set)
                    t.translation += Vec3(n(rng), n(rng), n(rng));
            err += (tcp_calibrate(p1, p2, 21).t_F - t_F).norm() / 30;
        }
        if (prev > 0)
            CHECK(err / prev == doctest::Approx(10.0).epsilon(0.25));
        prev = err;
    }
}

TEST_CASE("TCP calibration failure modes")
{
    const Vec3 tip(2, 1, 60), pivot(100, 0, 200);
    const auto poses = pivot_poses(tip, pivot, 0);
    CHECK_THROWS_AS(tcp_calibrate(poses, poses, 21), NumericalError);
    try {
        tcp_calibrate(poses, poses, 21);
    } catch (const RankError&) {
        FAIL("identical files must report the zero baseline, not rank loss");
    } catch (const NumericalError&) {
    }

    std::array<RigidTransform, 4> same;
    same.fill(poses[0]);
    CHECK_THROWS_AS(tcp_calibrate(same, poses, 21), RankError);
}

TEST_CASE("joint integration")
{
    JointState s;
    s.q << 1, 2, 3, 4, 5, 6;
    CHECK((integrate_joint_command(s, Vec6::Zero(), 0.01).state.q - s.q).norm() == 0.0);

    Vec6 qd;
    qd << 1, -2, 0.5, 3, -1, 0;
    JointState cur = s;
    for (int n = 0; n < 100; ++n) {
        const IntegrationResult r = integrate_joint_command(cur, qd, 0.01);
        CHECK_FALSE(r.clamped);
        cur = r.state;
    }
    CHECK((cur.q - (s.q + 100 * 0.01 * qd)).norm() < 1e-12);

    JointLimits lim;
    lim.upper(0) = 10;
    Vec6 push = Vec6::Zero();
    push(0) = 1000;
    const IntegrationResult r = integrate_joint_command(s, push, 0.01, lim);
    CHECK(r.clamped);
    CHECK(r.state.q(0) == 10.0);
    CHECK(r.state.q_dot(0) == 0.0);
}
