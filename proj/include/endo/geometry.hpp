#pragma once

#include "endo/common.hpp"

namespace endo {

/**
 * @brief Pose vector chart: translation in mm, roll/pitch/yaw in degrees.
 *
 * The rotation is R = Rz(theta) * Ry(psi) * Rx(phi) (fixed-axis roll-pitch-yaw).
 * This is the only Euler convention used anywhere in the library.
 */
struct Pose6 {
    double x = 0, y = 0, z = 0;
    double phi = 0, psi = 0, theta = 0;

    Vec6 vec() const;
    static Pose6 from_vec(const Vec6& v);
    Vec3 position() const { return {x, y, z}; }
};

Pose6 operator+(const Pose6& a, const Pose6& b);
Pose6 operator-(const Pose6& a, const Pose6& b);

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

RigidTransform compose(const RigidTransform& t1, const RigidTransform& t2);
RigidTransform invert(const RigidTransform& t);
inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

Mat3 rot_x(double deg);
Mat3 rot_y(double deg);
Mat3 rot_z(double deg);

/** @brief Maps an angle in degrees to (-180, 180]. */
double wrap_deg(double deg);

/** @brief Pose with every angle wrapped to (-180, 180]. */
Pose6 normalized(const Pose6& p);

/** @brief Difference a - b with angular components wrapped. */
Vec6 pose_difference(const Pose6& a, const Pose6& b);

Mat3 rpy_to_rotation(double phi, double psi, double theta);
RigidTransform pose_to_transform(const Pose6& p);

struct PoseChart {
    Pose6 pose;
    bool gimbal_lock = false;
};

/** @brief Inverse chart. At |pitch| = 90 deg (within 1e-6 deg) phi is fixed to 0 and the flag is set. */
PoseChart transform_to_pose(const RigidTransform& t);

/** @brief Angle of r1^T r2 in degrees, in [0, 180]. */
double rotation_distance(const Mat3& r1, const Mat3& r2);

/** @brief Nearest rotation matrix (SVD projection). */
Mat3 orthonormalize(const Mat3& m);

Mat3 skew(const Vec3& v);

}  // namespace endo
