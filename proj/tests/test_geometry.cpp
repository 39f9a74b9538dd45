#include "test_support.hpp"

#include <doctest.h>

using namespace endo;
using endo::test::random_pose;
using endo::test::random_transform;

TEST_CASE("zero pose gives the identity transform")
{
    const RigidTransform t = pose_to_transform(Pose6{});
    CHECK((t.rotation - Mat3::Identity()).norm() == doctest::Approx(0.0));
    CHECK(t.translation.norm() == doctest::Approx(0.0));
}

TEST_CASE("roll of 90 deg maps y onto z")
{
    const Mat3 r = pose_to_transform({0, 0, 0, 90, 0, 0}).rotation;
    CHECK((r * Vec3::UnitY() - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("rotation order is Rz Ry Rx")
{
    const Mat3 expected = rot_z(30) * rot_y(-20) * rot_x(10);
    CHECK((rpy_to_rotation(10, -20, 30) - expected).norm() < 1e-12);
}

TEST_CASE("compose and invert")
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const RigidTransform a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
        const RigidTransform l = (a * b) * c, r = a * (b * c);
        CHECK((l.rotation - r.rotation).norm() < 1e-12);
        CHECK((l.translation - r.translation).norm() < 1e-12 * (1 + l.translation.norm()));

        const RigidTransform id = a * invert(a);
        CHECK((id.rotation - Mat3::Identity()).norm() < 1e-12);
        CHECK(id.translation.norm() < 1e-12);

        const Vec3 p(1, -2, 3);
        CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-10);
    }
}

TEST_CASE("pose chart round trip away from gimbal lock")
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Pose6 p = random_pose(rng, 50.0, 85.0);
        const PoseChart back = transform_to_pose(pose_to_transform(p));
        CHECK_FALSE(back.gimbal_lock);
        CHECK(pose_difference(back.pose, p).norm() < 1e-9);
    }
}

TEST_CASE("gimbal lock fixes roll to zero and keeps the rotation")
{
    const RigidTransform t = pose_to_transform({1, 2, 3, 25, 90, 40});
    const PoseChart c = transform_to_pose(t);
    CHECK(c.gimbal_lock);
    CHECK(c.pose.phi == 0.0);
    CHECK((pose_to_transform(c.pose).rotation - t.rotation).norm() < 1e-9);
}

TEST_CASE("wrap_deg lands in (-180, 180]")
{
    CHECK(wrap_deg(180.0) == doctest::Approx(180.0));
    CHECK(wrap_deg(-180.0) == doctest::Approx(180.0));
    CHECK(wrap_deg(190.0) == doctest::Approx(-170.0));
    CHECK(wrap_deg(725.0) == doctest::Approx(5.0));
    const Vec6 d = pose_difference({0, 0, 0, 179, 0, 0}, {0, 0, 0, -179, 0, 0});
    CHECK(d(3) == doctest::Approx(-2.0));
}

TEST_CASE("rotation_distance examples and metric properties")
{
    CHECK(rotation_distance(rot_x(12), rot_x(12)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(rotation_distance(Mat3::Identity(), rot_z(30)) == doctest::Approx(30.0));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const Mat3 a = random_transform(rng).rotation, b = random_transform(rng).rotation,
                   c = random_transform(rng).rotation;
        const double ab = rotation_distance(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab <= 180.0);
        CHECK(ab == doctest::Approx(rotation_distance(b, a)));
        CHECK(rotation_distance(a, c) <= ab + rotation_distance(b, c) + 1e-9);
    }
}

TEST_CASE("orthonormalize returns the nearest rotation")
{
    Mat3 m = rot_y(20);
    m(0, 1) += 1e-3;
    const Mat3 r = orthonormalize(m);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
    CHECK(rotation_distance(r, rot_y(20)) < 0.1);
}

TEST_CASE("skew matches the cross product")
{
    const Vec3 a(1, -2, 0.5), b(0.3, 4, -1);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-14);
}
