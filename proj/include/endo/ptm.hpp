#pragma once

#include "endo/geometry.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace endo {

/** @brief Six anchors in the jaw-side frame {A} and six bases in the robot-side frame {B}, mm. */
struct PtmGeometry {
    std::array<Vec3, 6> anchors{};
    std::array<Vec3, 6> bases{};

    static PtmGeometry table1();
    void validate() const;
};

using StringLengths = Vec6;

/**
 * @brief Pose of {A} in {B} at initialization: zero translation, yaw 180 deg.
 *
 * With this orientation the anchor ordering along y and z matches the base ordering and
 * no two strings cross.
 */
Pose6 ptm_home_pose();

enum class PtmVariantTag { proposed, type_321, type_222 };

std::string to_string(PtmVariantTag tag);
PtmVariantTag variant_from_string(const std::string& s);

struct PtmConfigVariant {
    PtmVariantTag tag = PtmVariantTag::proposed;
    PtmGeometry geometry;

    /**
     * @brief Builds a comparison variant by merging anchors into cluster centroids.
     *
     * The partition with the stated multiplicities (3-2-1 or 2-2-2) minimizing the total
     * within-cluster scatter of the source anchors is used; bases are unchanged.
     */
    static PtmConfigVariant make(PtmVariantTag tag, const PtmGeometry& source = PtmGeometry::table1());
    void validate() const;
};

/** @brief l_i = |R a_i + t - b_i| with (R, t) the pose of {A} in {B}. */
StringLengths string_lengths(const PtmGeometry& geom, const Pose6& pose);

/** @brief Central-difference sensitivity d l / d p (mm per mm, mm per deg). */
Mat6 ptm_jacobian(const PtmGeometry& geom, const Pose6& pose, double h = 1e-6);

/** @brief Closed-form gradient of the string lengths with respect to the pose vector. */
Mat6 ptm_jacobian_analytic(const PtmGeometry& geom, const Pose6& pose);

struct NewtonOptions {
    double tol = 1e-10;
    int max_iterations = 100;
    int max_halvings = 8;
    double fd_step = 1e-6;
};

struct PoseEstimate {
    Pose6 pose;
    double residual = 0;
    int iterations = 0;
};

/** @brief Damped Newton-Raphson forward kinematics. Throws ConvergenceError or SingularityError. */
PoseEstimate pose_estimate(const PtmGeometry& geom, const StringLengths& l_meas, const Pose6& p0,
                           const NewtonOptions& opts = {});

struct McOptions {
    Pose6 truth = ptm_home_pose();
    double start_offset = 20.0;
    Vec3 start_direction = Vec3::UnitZ();
    bool random_start_direction = false;
    NewtonOptions newton{};
};

struct McTrial {
    double error = 0;
    bool converged = false;
    int iterations = 0;
};

struct McResult {
    double max_error = 0;
    double mean_error = 0;
    int trials = 0;
    int failures = 0;
    std::vector<McTrial> per_trial;
};

/**
 * @brief Translational pose error under uniform string-length noise in [-eps_max, eps_max].
 *
 * Each trial draws from its own generator seeded by (seed, trial), so results do not depend on
 * evaluation order. Non-converged trials are counted in `failures` and excluded from max/mean.
 */
McResult monte_carlo_sensitivity(const PtmConfigVariant& variant, double eps_max, int n, std::uint64_t seed,
                                 const McOptions& opts = {});

struct CylinderSpec {
    double height = 28.0;
    double diameter = 13.0;
    Vec3 axis = Vec3::UnitZ();
};

struct WorkspaceOptions {
    double cube_width = 40.0;
    double resolution = 0.5;
    double stroke_limit = 19.0;
    double dexterity_range = 5.0;
    double dexterity_step = 1.0;
    Pose6 home = ptm_home_pose();
    CylinderSpec cylinder{};
};

struct WorkspaceResult {
    int n = 0;
    double resolution = 0;
    Vec3 origin = Vec3::Zero();
    std::vector<float> dexterity;
    std::vector<std::uint8_t> stroke_ok;
    std::vector<std::uint8_t> member;
    int cylinder_points = 0;
    int cylinder_members = 0;
    bool cylinder_contained = false;

    std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n + j) * n + k; }
    Vec3 offset(int i, int j, int k) const { return origin + resolution * Vec3(i, j, k); }
};

bool inside_cylinder(const CylinderSpec& c, const Vec3& offset);

/**
 * @brief Stroke-feasible, full-dexterity region around the home pose.
 *
 * A grid point (offset from the home translation) is a member when every string stays within
 * stroke_limit of its home length at the home orientation and at every roll/pitch sample on the
 * +-dexterity_range grid.
 */
WorkspaceResult workspace_analysis(const PtmGeometry& geom, const WorkspaceOptions& opts = {});

struct Segment {
    Vec3 a = Vec3::Zero();
    Vec3 b = Vec3::Zero();
};

/** @brief Minimum distance between two closed segments (either may be a point). */
double segment_distance(const Segment& s1, const Segment& s2);

struct HandpiecePrism {
    std::array<Segment, 6> edges{};

    /**
     * @brief Regular hexagonal prism with lateral edges parallel to `axis`.
     *
     * Vertex i sits at angle phase + 60 i measured in the cross-section plane from u = up x axis
     * toward `up`.
     */
    static HandpiecePrism hexagonal(const Vec3& start_center, const Vec3& axis, const Vec3& up, double circumradius,
                                    double length, double phase_deg = 0.0);
    static HandpiecePrism default_prism();
};

std::array<Segment, 6> string_segments(const PtmGeometry& geom, const Pose6& pose);

struct InterferencePair {
    int string_index = 0;
    int other_index = 0;
    bool prism = false;
    double min_distance = 0;
    std::size_t sample = 0;
};

struct InterferenceResult {
    double min_string_string = 0;
    double min_string_prism = 0;
    std::vector<InterferencePair> pairs;
};

/** @brief For each string, the four prism edges nearest at `reference`, giving 24 assessed pairs. */
std::vector<std::pair<int, int>> assessed_prism_pairs(const PtmGeometry& geom, const HandpiecePrism& prism,
                                                      const Pose6& reference = ptm_home_pose());

InterferenceResult interference_analysis(const PtmGeometry& geom, const std::vector<Pose6>& trajectory,
                                         const HandpiecePrism& prism);

struct RandomWalkParams {
    double duration = 500.0;
    double dt = 0.01;
    double max_speed = 2.5;
    double accel_sigma = 2.0;
    double max_tilt = 10.0;
    double max_angular_rate = 1.0;
    double angular_accel_sigma = 1.0;
    CylinderSpec cylinder{};
    Pose6 home = ptm_home_pose();
};

/** @brief Bounded random walk inside the required cylinder with speed and tilt limits. */
std::vector<Pose6> random_walk_trajectory(const RandomWalkParams& params, std::uint64_t seed);

}  // namespace endo
