#include "endo/ptm.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace endo;
using endo::test::uniform;

namespace {

Pose6 cylinder_pose(std::mt19937_64& rng)
{
    const CylinderSpec c;
    Vec3 p;
    do {
        p = Vec3(uniform(rng, -c.diameter / 2, c.diameter / 2), uniform(rng, -c.diameter / 2, c.diameter / 2),
                 uniform(rng, -c.height / 2, c.height / 2));
    } while (!inside_cylinder(c, p));
    Pose6 home = ptm_home_pose();
    return {p.x(), p.y(), p.z(), uniform(rng, -10, 10), uniform(rng, -10, 10), home.theta + uniform(rng, -10, 10)};
}

// Norm gradient per string: translation part is the unit string vector; rotation by the chain rule
// through finite rotations of the anchor only.
Mat6 gradient_oracle(const PtmGeometry& g, const Pose6& p)
{
    Mat6 J;
    const Mat3 R = rpy_to_rotation(p.phi, p.psi, p.theta);
    const Mat3 dRx = rpy_to_rotation(p.phi, p.psi, p.theta) * skew(Vec3::UnitX());
    const Mat3 dRy = rot_z(p.theta) * rot_y(p.psi) * skew(Vec3::UnitY()) * rot_x(p.phi);
    const Mat3 dRz = skew(Vec3::UnitZ()) * R;
    for (int i = 0; i < 6; ++i) {
        const Vec3 v = R * g.anchors[i] + p.position() - g.bases[i];
        const Vec3 u = v / v.norm();
        J.block<1, 3>(i, 0) = u.transpose();
        J(i, 3) = u.dot(dRx * g.anchors[i]) * kPi / 180;
        J(i, 4) = u.dot(dRy * g.anchors[i]) * kPi / 180;
        J(i, 5) = u.dot(dRz * g.anchors[i]) * kPi / 180;
    }
    return J;
}

double brute_segment_distance(const Segment& s1, const Segment& s2)
{
    double best = 1e300;
    const int n = 1000;
    for (int i = 0; i <= n; ++i) {
        const Vec3 p = s1.a + (s1.b - s1.a) * (double(i) / n);
        for (int j = 0; j <= n; ++j)
            best = std::min(best, (p - (s2.a + (s2.b - s2.a) * (double(j) / n))).squaredNorm());
    }
    return std::sqrt(best);
}

}  // namespace

TEST_CASE("identity pose string length matches Table I distance")
{
    const PtmGeometry g = PtmGeometry::table1();
    const StringLengths l = string_lengths(g, Pose6{});
    CHECK(l(0) == doctest::Approx(58.82).epsilon(1e-4));
    for (int i = 0; i < 6; ++i)
        CHECK(l(i) == doctest::Approx((g.anchors[i] - g.bases[i]).norm()));
}

TEST_CASE("string lengths respond to z translation with the sign of (a - b).z")
{
    const PtmGeometry g = PtmGeometry::table1();
    const StringLengths l0 = string_lengths(g, Pose6{});
    const StringLengths l1 = string_lengths(g, {0, 0, 1e-3, 0, 0, 0});
    for (int i = 0; i < 6; ++i) {
        const double s = (g.anchors[i] - g.bases[i]).z();
        CHECK((l1(i) - l0(i)) * s > 0);
    }
}

TEST_CASE("string lengths are invariant under a common rigid motion")
{
    std::mt19937_64 rng(2);
    const PtmGeometry g = PtmGeometry::table1();
    for (int n = 0; n < 50; ++n) {
        const Pose6 p = endo::test::random_pose(rng, 10.0, 30.0);
        const Vec3 shift(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -50, 50));
        PtmGeometry moved = g;
        for (auto& b : moved.bases)
            b += shift;
        Pose6 q = p;
        q.x += shift.x();
        q.y += shift.y();
        q.z += shift.z();
        CHECK((string_lengths(moved, q) - string_lengths(g, p)).norm() < 1e-10);
    }
}

TEST_CASE("ptm Jacobian: finite differences, closed form and independent gradient agree")
{
    std::mt19937_64 rng(4);
    const PtmGeometry g = PtmGeometry::table1();
    for (int n = 0; n < 100; ++n) {
        const Pose6 p = cylinder_pose(rng);
        const Mat6 fd = ptm_jacobian(g, p), an = ptm_jacobian_analytic(g, p), orc = gradient_oracle(g, p);
        for (int i = 0; i < 6; ++i) {
            CHECK((fd.row(i) - orc.row(i)).norm() <= 1e-6 * orc.row(i).norm());
            CHECK((an.row(i) - orc.row(i)).norm() <= 1e-12 * (1 + orc.row(i).norm()));
        }
    }
}

TEST_CASE("ptm Jacobian stays well conditioned in the required cylinder")
{
    std::mt19937_64 rng(8);
    const PtmGeometry g = PtmGeometry::table1();
    for (int n = 0; n < 500; ++n) {
        Eigen::JacobiSVD<Mat6> svd(ptm_jacobian_analytic(g, cylinder_pose(rng)));
        CHECK(svd.singularValues()(0) / svd.singularValues()(5) < 1e6);
    }
}

TEST_CASE("pose_estimate fixed point and cold start")
{
    const PtmGeometry g = PtmGeometry::table1();
    const Pose6 p{1.5, -2, 3, 4, -3, 182};
    const PoseEstimate at = pose_estimate(g, string_lengths(g, p), p);
    CHECK(at.iterations <= 1);
    CHECK(pose_difference(at.pose, p).norm() < 1e-12);

    Pose6 start = p;
    start.z += 20;
    const PoseEstimate cold = pose_estimate(g, string_lengths(g, p), start);
    const Vec6 d = pose_difference(cold.pose, p);
    CHECK(d.head<3>().norm() < 1e-9);
    CHECK(d.tail<3>().norm() < 1e-9);
}

TEST_CASE("pose_estimate round trip with warm starts along a random walk")
{
    RandomWalkParams rw;
    rw.duration = 50.0;
    const auto traj = random_walk_trajectory(rw, 3);
    const PtmGeometry g = PtmGeometry::table1();
    Pose6 warm = traj.front();
    double worst = 0;
    for (const auto& p : traj) {
        warm = pose_estimate(g, string_lengths(g, p), warm).pose;
        worst = std::max(worst, pose_difference(warm, p).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("pose_estimate reports non-convergence")
{
    const PtmGeometry g = PtmGeometry::table1();
    NewtonOptions opts;
    opts.max_iterations = 1;
    Pose6 start = ptm_home_pose();
    start.z += 20;
    CHECK_THROWS_AS(pose_estimate(g, string_lengths(g, ptm_home_pose()), start, opts), ConvergenceError);
}

TEST_CASE("comparison variants merge anchors with the stated multiplicities")
{
    auto multiplicities = [](const PtmGeometry& g) {
        std::vector<int> counts;
        std::vector<Vec3> distinct;
        for (const auto& a : g.anchors) {
            auto it = std::find_if(distinct.begin(), distinct.end(), [&](const Vec3& d) { return (d - a).norm() < 1e-12; });
            if (it == distinct.end()) {
                distinct.push_back(a);
                counts.push_back(1);
            } else {
                ++counts[static_cast<std::size_t>(it - distinct.begin())];
            }
        }
        std::sort(counts.rbegin(), counts.rend());
        return counts;
    };
    CHECK(multiplicities(PtmConfigVariant::make(PtmVariantTag::proposed).geometry) == std::vector<int>{1, 1, 1, 1, 1, 1});
    CHECK(multiplicities(PtmConfigVariant::make(PtmVariantTag::type_321).geometry) == std::vector<int>{3, 2, 1});
    CHECK(multiplicities(PtmConfigVariant::make(PtmVariantTag::type_222).geometry) == std::vector<int>{2, 2, 2});
    const PtmGeometry src = PtmGeometry::table1();
    for (auto tag : {PtmVariantTag::type_321, PtmVariantTag::type_222}) {
        const PtmGeometry v = PtmConfigVariant::make(tag).geometry;
        for (int i = 0; i < 6; ++i)
            CHECK((v.bases[i] - src.bases[i]).norm() == 0.0);
    }
    CHECK(variant_from_string(to_string(PtmVariantTag::type_222)) == PtmVariantTag::type_222);
    CHECK_THROWS_AS(variant_from_string("type_411"), ConfigError);
}

TEST_CASE("Monte Carlo: noiseless, deterministic and monotone in eps")
{
    const auto v = PtmConfigVariant::make(PtmVariantTag::type_222);
    const McResult zero = monte_carlo_sensitivity(v, 0.0, 20, 1);
    CHECK(zero.max_error < 1e-9);
    CHECK(zero.failures == 0);

    const McResult a = monte_carlo_sensitivity(v, 0.2, 200, 42), b = monte_carlo_sensitivity(v, 0.2, 200, 42);
    CHECK(a.max_error == b.max_error);
    CHECK(a.mean_error == b.mean_error);

    double prev = -1;
    for (double eps : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
        const McResult r = monte_carlo_sensitivity(v, eps, 300, 9);
        CHECK(r.max_error >= prev);
        prev = r.max_error;
    }
}

TEST_CASE("workspace with zero stroke keeps only the initialization point")
{
    WorkspaceOptions o;
    o.cube_width = 4;
    o.resolution = 1;
    o.stroke_limit = 0;
    o.dexterity_range = 0;
    const WorkspaceResult r = workspace_analysis(PtmGeometry::table1(), o);
    int members = 0, stroke = 0;
    for (std::size_t i = 0; i < r.member.size(); ++i) {
        members += r.member[i];
        stroke += r.stroke_ok[i];
    }
    CHECK(members == 1);
    CHECK(stroke == 1);
    CHECK(r.member[r.index(2, 2, 2)] == 1);
    CHECK(r.offset(2, 2, 2).norm() == doctest::Approx(0.0));
}

TEST_CASE("workspace of a y-mirrored layout is symmetric about y = 0")
{
    const PtmGeometry t = PtmGeometry::table1();
    PtmGeometry g = t;
    for (int i = 0; i < 3; ++i) {
        g.anchors[i + 3] = Vec3(t.anchors[i].x(), -t.anchors[i].y(), t.anchors[i].z());
        g.bases[i + 3] = Vec3(t.bases[i].x(), -t.bases[i].y(), t.bases[i].z());
    }
    WorkspaceOptions o;
    o.resolution = 2;
    o.home = Pose6{};
    const WorkspaceResult r = workspace_analysis(g, o);
    int mismatched = 0, members = 0;
    for (int i = 0; i < r.n; ++i)
        for (int j = 0; j < r.n; ++j)
            for (int k = 0; k < r.n; ++k) {
                CHECK(r.offset(i, j, k).y() == doctest::Approx(-r.offset(i, r.n - 1 - j, k).y()));
                mismatched += r.member[r.index(i, j, k)] != r.member[r.index(i, r.n - 1 - j, k)];
                members += r.member[r.index(i, j, k)];
            }
    CHECK(members > 0);
    CHECK(mismatched == 0);
}

TEST_CASE("segment distance examples")
{
    const Segment a{{0, 0, 0}, {1, 0, 0}}, b{{0, 3, 0}, {1, 3, 0}};
    CHECK(segment_distance(a, b) == doctest::Approx(3.0));
    CHECK(segment_distance(a, a) == doctest::Approx(0.0));
    const Segment c{{0.5, -1, 0}, {0.5, 1, 0}};
    CHECK(segment_distance(a, c) == doctest::Approx(0.0));
    const Segment point{{2, 1, 0}, {2, 1, 0}};
    CHECK(segment_distance(a, point) == doctest::Approx(std::sqrt(2.0)));
    CHECK(segment_distance(point, point) == 0.0);
}

TEST_CASE("segment distance matches a dense parameter grid")
{
    std::mt19937_64 rng(17);
    for (int n = 0; n < 6; ++n) {
        Segment s1, s2;
        for (Vec3* v : {&s1.a, &s1.b, &s2.a, &s2.b})
            *v = Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
        if (n == 5)
            s2 = {s1.a + Vec3(0, 0, 0.7), s1.b + Vec3(0, 0, 0.7)};
        // The grid oracle overestimates by at most half a grid step times the segment lengths.
        const double d = segment_distance(s1, s2), o = brute_segment_distance(s1, s2);
        CHECK(d <= o + 1e-12);
        CHECK(o - d < 1e-6 + 1e-5 * ((s1.b - s1.a).norm() + (s2.b - s2.a).norm()));
    }
}

TEST_CASE("interference assessment covers 24 pairs and 15 string pairs")
{
    const PtmGeometry g = PtmGeometry::table1();
    const HandpiecePrism prism = HandpiecePrism::default_prism();
    const auto pairs = assessed_prism_pairs(g, prism);
    CHECK(pairs.size() == 24);
    std::set<std::pair<int, int>> unique(pairs.begin(), pairs.end());
    CHECK(unique.size() == 24);

    const InterferenceResult r = interference_analysis(g, {ptm_home_pose()}, prism);
    int string_pairs = 0, prism_pairs = 0;
    for (const auto& p : r.pairs)
        (p.prism ? prism_pairs : string_pairs)++;
    CHECK(string_pairs == 15);
    CHECK(prism_pairs == 24);
    const auto seg = string_segments(g, ptm_home_pose());
    double best = 1e300;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j)
            best = std::min(best, segment_distance(seg[i], seg[j]));
    CHECK(r.min_string_string == doctest::Approx(best));
}

TEST_CASE("random walk respects its bounds")
{
    RandomWalkParams rw;
    rw.duration = 100;
    const auto traj = random_walk_trajectory(rw, 5);
    CHECK(traj.size() >= static_cast<std::size_t>(rw.duration / rw.dt));
    const Pose6 home = rw.home;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Vec6 off = pose_difference(traj[i], home);
        CHECK(inside_cylinder(rw.cylinder, off.head<3>()));
        CHECK(std::abs(off(3)) <= rw.max_tilt + 1e-9);
        CHECK(std::abs(off(4)) <= rw.max_tilt + 1e-9);
        if (i > 0)
            CHECK((traj[i].position() - traj[i - 1].position()).norm() / rw.dt <= rw.max_speed + 1e-9);
    }
    const auto again = random_walk_trajectory(rw, 5);
    CHECK(pose_difference(again.back(), traj.back()).norm() == 0.0);
}
