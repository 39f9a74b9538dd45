#include "endo/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace endo {

Vec6 Pose6::vec() const
{
    Vec6 v;
    v << x, y, z, phi, psi, theta;
    return v;
}

Pose6 Pose6::from_vec(const Vec6& v)
{
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
}

Pose6 operator+(const Pose6& a, const Pose6& b) { return Pose6::from_vec(a.vec() + b.vec()); }
Pose6 operator-(const Pose6& a, const Pose6& b) { return Pose6::from_vec(a.vec() - b.vec()); }

Mat3 orthonormalize(const Mat3& m)
{
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 u = svd.matrixU();
        u.col(2) *= -1;
        r = u * svd.matrixV().transpose();
    }
    return r;
}

RigidTransform compose(const RigidTransform& t1, const RigidTransform& t2)
{
    RigidTransform out;
    out.rotation = t1.rotation * t2.rotation;
    out.translation = t1.rotation * t2.translation + t1.translation;
    double drift = (out.rotation.transpose() * out.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (drift > 1e-12)
        out.rotation = orthonormalize(out.rotation);
    return out;
}

RigidTransform invert(const RigidTransform& t)
{
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

Mat3 rot_x(double deg)
{
    return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double deg)
{
    return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double deg)
{
    return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitZ()).toRotationMatrix();
}

double wrap_deg(double deg)
{
    double r = std::fmod(deg, 360.0);
    if (r <= -180.0)
        r += 360.0;
    else if (r > 180.0)
        r -= 360.0;
    return r;
}

Pose6 normalized(const Pose6& p)
{
    Pose6 out = p;
    out.phi = wrap_deg(p.phi);
    out.psi = wrap_deg(p.psi);
    out.theta = wrap_deg(p.theta);
    return out;
}

Vec6 pose_difference(const Pose6& a, const Pose6& b)
{
    Vec6 d = a.vec() - b.vec();
    for (int i = 3; i < 6; ++i)
        d(i) = wrap_deg(d(i));
    return d;
}

Mat3 rpy_to_rotation(double phi, double psi, double theta)
{
    return rot_z(theta) * rot_y(psi) * rot_x(phi);
}

RigidTransform pose_to_transform(const Pose6& p)
{
    RigidTransform t;
    t.rotation = rpy_to_rotation(p.phi, p.psi, p.theta);
    t.translation = p.position();
    return t;
}

PoseChart transform_to_pose(const RigidTransform& t)
{
    const Mat3& r = t.rotation;
    PoseChart out;
    out.pose.x = t.translation.x();
    out.pose.y = t.translation.y();
    out.pose.z = t.translation.z();

    double s = std::clamp(-r(2, 0), -1.0, 1.0);
    double psi = std::atan2(s, std::hypot(r(0, 0), r(1, 0)));
    if (std::abs(std::abs(rad2deg(psi)) - 90.0) < 1e-6) {
        out.gimbal_lock = true;
        out.pose.phi = 0.0;
        out.pose.psi = s > 0 ? 90.0 : -90.0;
        // With phi = 0 the remaining freedom is carried by theta.
        out.pose.theta = rad2deg(std::atan2(-r(0, 1), r(1, 1)));
    } else {
        out.pose.psi = rad2deg(psi);
        out.pose.phi = rad2deg(std::atan2(r(2, 1), r(2, 2)));
        out.pose.theta = rad2deg(std::atan2(r(1, 0), r(0, 0)));
    }
    out.pose = normalized(out.pose);
    return out;
}

double rotation_distance(const Mat3& r1, const Mat3& r2)
{
    Eigen::Quaterniond q(Mat3(r1.transpose() * r2));
    double v = q.vec().norm();
    return rad2deg(2.0 * std::atan2(v, std::abs(q.w())));
}

Mat3 skew(const Vec3& v)
{
    Mat3 s;
    s << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return s;
}

}  // namespace endo
