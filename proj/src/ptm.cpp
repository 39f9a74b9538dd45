#include "endo/ptm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace endo {

PtmGeometry PtmGeometry::table1()
{
    PtmGeometry g;
    g.anchors = {Vec3(-1.51, -9.55, -10.36), Vec3(-0.17, -3.64, -5.76), Vec3(1.24, -16.37, -6.91),
                 Vec3(-1.51, 8.10, -8.47),   Vec3(-0.06, 12.38, -4.20), Vec3(-0.41, 4.25, -4.70)};
    g.bases = {Vec3(29.73, 34.78, 12.41),  Vec3(29.73, 35.22, 45.59),  Vec3(29.73, 44.78, 31.41),
               Vec3(29.73, -35.22, 12.41), Vec3(29.73, -45.22, 31.41), Vec3(29.73, -34.78, 45.59)};
    return g;
}

void PtmGeometry::validate() const
{
    for (int i = 0; i < 6; ++i) {
        if (!anchors[i].allFinite() || !bases[i].allFinite())
            throw ConfigError("PTM geometry has non-finite coordinates");
    }
}

Pose6 ptm_home_pose()
{
    Pose6 p;
    p.theta = 180.0;
    return p;
}

std::string to_string(PtmVariantTag tag)
{
    switch (tag) {
    case PtmVariantTag::proposed: return "proposed";
    case PtmVariantTag::type_321: return "type_321";
    case PtmVariantTag::type_222: return "type_222";
    }
    return "proposed";
}

PtmVariantTag variant_from_string(const std::string& s)
{
    if (s == "proposed")
        return PtmVariantTag::proposed;
    if (s == "type_321" || s == "3-2-1")
        return PtmVariantTag::type_321;
    if (s == "type_222" || s == "2-2-2")
        return PtmVariantTag::type_222;
    throw ConfigError("unknown PTM variant '" + s + "'");
}

namespace {

// Assigns each anchor a cluster label so that cluster sizes equal `sizes`, minimizing scatter.
std::array<int, 6> best_partition(const std::array<Vec3, 6>& pts, const std::vector<int>& sizes)
{
    std::array<int, 6> label{};
    std::array<int, 6> best{};
    double best_cost = std::numeric_limits<double>::infinity();
    const int k = static_cast<int>(sizes.size());

    auto evaluate = [&]() {
        double cost = 0;
        for (int c = 0; c < k; ++c) {
            Vec3 centroid = Vec3::Zero();
            int count = 0;
            for (int i = 0; i < 6; ++i) {
                if (label[i] == c) {
                    centroid += pts[i];
                    ++count;
                }
            }
            if (count != sizes[c])
                return;
            centroid /= count;
            for (int i = 0; i < 6; ++i) {
                if (label[i] == c)
                    cost += (pts[i] - centroid).squaredNorm();
            }
        }
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best = label;
        }
    };

    int total = 1;
    for (int i = 0; i < 6; ++i)
        total *= k;
    for (int code = 0; code < total; ++code) {
        int c = code;
        for (int i = 0; i < 6; ++i) {
            label[i] = c % k;
            c /= k;
        }
        evaluate();
    }
    return best;
}

}  // namespace

PtmConfigVariant PtmConfigVariant::make(PtmVariantTag tag, const PtmGeometry& source)
{
    PtmConfigVariant v;
    v.tag = tag;
    v.geometry = source;
    if (tag == PtmVariantTag::proposed)
        return v;

    std::vector<int> sizes = tag == PtmVariantTag::type_321 ? std::vector<int>{3, 2, 1} : std::vector<int>{2, 2, 2};
    auto label = best_partition(source.anchors, sizes);
    for (int c = 0; c < 3; ++c) {
        Vec3 centroid = Vec3::Zero();
        int count = 0;
        for (int i = 0; i < 6; ++i) {
            if (label[i] == c) {
                centroid += source.anchors[i];
                ++count;
            }
        }
        centroid /= count;
        for (int i = 0; i < 6; ++i) {
            if (label[i] == c)
                v.geometry.anchors[i] = centroid;
        }
    }
    return v;
}

void PtmConfigVariant::validate() const
{
    geometry.validate();
    std::vector<int> mult;
    std::array<bool, 6> seen{};
    for (int i = 0; i < 6; ++i) {
        if (seen[i])
            continue;
        int m = 0;
        for (int j = i; j < 6; ++j) {
            if ((geometry.anchors[j] - geometry.anchors[i]).norm() < 1e-12) {
                seen[j] = true;
                ++m;
            }
        }
        mult.push_back(m);
    }
    std::sort(mult.begin(), mult.end(), std::greater<>());
    std::vector<int> expect;
    switch (tag) {
    case PtmVariantTag::proposed: expect = {1, 1, 1, 1, 1, 1}; break;
    case PtmVariantTag::type_321: expect = {3, 2, 1}; break;
    case PtmVariantTag::type_222: expect = {2, 2, 2}; break;
    }
    if (mult != expect)
        throw ConfigError("anchor multiplicities do not match variant " + to_string(tag));
}

StringLengths string_lengths(const PtmGeometry& geom, const Pose6& pose)
{
    RigidTransform t = pose_to_transform(pose);
    StringLengths l;
    for (int i = 0; i < 6; ++i)
        l(i) = (t.apply(geom.anchors[i]) - geom.bases[i]).norm();
    return l;
}

Mat6 ptm_jacobian(const PtmGeometry& geom, const Pose6& pose, double h)
{
    Mat6 J;
    Vec6 p = pose.vec();
    for (int j = 0; j < 6; ++j) {
        Vec6 plus = p, minus = p;
        plus(j) += h;
        minus(j) -= h;
        J.col(j) = (string_lengths(geom, Pose6::from_vec(plus)) - string_lengths(geom, Pose6::from_vec(minus))) / (2 * h);
    }
    return J;
}

Mat6 ptm_jacobian_analytic(const PtmGeometry& geom, const Pose6& pose)
{
    const Mat3 rx = rot_x(pose.phi), ry = rot_y(pose.psi), rz = rot_z(pose.theta);
    const Mat3 R = rz * ry * rx;
    const double k = deg2rad(1.0);
    const Mat3 dphi = rz * ry * rx * skew(Vec3::UnitX()) * k;
    const Mat3 dpsi = rz * ry * skew(Vec3::UnitY()) * rx * k;
    const Mat3 dtheta = skew(Vec3::UnitZ()) * R * k;
    Mat6 J;
    for (int i = 0; i < 6; ++i) {
        Vec3 v = R * geom.anchors[i] + pose.position() - geom.bases[i];
        Vec3 u = v / v.norm();
        J.block<1, 3>(i, 0) = u.transpose();
        J(i, 3) = u.dot(dphi * geom.anchors[i]);
        J(i, 4) = u.dot(dpsi * geom.anchors[i]);
        J(i, 5) = u.dot(dtheta * geom.anchors[i]);
    }
    return J;
}

PoseEstimate pose_estimate(const PtmGeometry& geom, const StringLengths& l_meas, const Pose6& p0,
                           const NewtonOptions& opts)
{
    Vec6 p = p0.vec();
    Vec6 dl = l_meas - string_lengths(geom, p0);
    double res = dl.norm();
    for (int it = 1; it <= opts.max_iterations; ++it) {
        Mat6 J = ptm_jacobian(geom, Pose6::from_vec(p), opts.fd_step);
        Eigen::PartialPivLU<Mat6> lu(J);
        if (!(lu.rcond() > 1e-14))
            throw SingularityError("PTM sensitivity matrix is singular");
        Vec6 step = lu.solve(dl);

        Vec6 trial = p + step;
        Vec6 dl_trial = l_meas - string_lengths(geom, Pose6::from_vec(trial));
        double alpha = 1.0;
        for (int k = 0; k < opts.max_halvings && dl_trial.norm() > res; ++k) {
            alpha *= 0.5;
            trial = p + alpha * step;
            dl_trial = l_meas - string_lengths(geom, Pose6::from_vec(trial));
        }
        const bool done = res <= opts.tol;
        p = trial;
        dl = dl_trial;
        if (done) {
            PoseEstimate out;
            out.pose = normalized(Pose6::from_vec(p));
            out.residual = res;
            out.iterations = it;
            return out;
        }
        res = dl.norm();
        if (!std::isfinite(res))
            break;
    }
    throw ConvergenceError("PTM pose estimation did not converge", opts.max_iterations, res);
}

McResult monte_carlo_sensitivity(const PtmConfigVariant& variant, double eps_max, int n, std::uint64_t seed,
                                 const McOptions& opts)
{
    McResult out;
    out.trials = n;
    out.per_trial.resize(static_cast<std::size_t>(n));
    const StringLengths l_true = string_lengths(variant.geometry, opts.truth);
    double sum = 0;
    int ok = 0;
    for (int trial = 0; trial < n; ++trial) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(trial)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);

        Vec3 dir = opts.start_direction.normalized();
        if (opts.random_start_direction) {
            dir = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
        }
        Pose6 p0 = opts.truth;
        p0.x += opts.start_offset * dir.x();
        p0.y += opts.start_offset * dir.y();
        p0.z += opts.start_offset * dir.z();

        StringLengths l = l_true;
        for (int i = 0; i < 6; ++i)
            l(i) += eps_max * unif(rng);

        McTrial& rec = out.per_trial[static_cast<std::size_t>(trial)];
        try {
            PoseEstimate est = pose_estimate(variant.geometry, l, p0, opts.newton);
            rec.converged = true;
            rec.iterations = est.iterations;
            rec.error = (est.pose.position() - opts.truth.position()).norm();
            out.max_error = std::max(out.max_error, rec.error);
            sum += rec.error;
            ++ok;
        } catch (const NumericalError&) {
            rec.converged = false;
            rec.error = std::numeric_limits<double>::quiet_NaN();
            ++out.failures;
        }
    }
    out.mean_error = ok > 0 ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    return out;
}

bool inside_cylinder(const CylinderSpec& c, const Vec3& offset)
{
    Vec3 axis = c.axis.normalized();
    double h = offset.dot(axis);
    double r = (offset - h * axis).norm();
    return std::abs(h) <= c.height / 2 + 1e-9 && r <= c.diameter / 2 + 1e-9;
}

WorkspaceResult workspace_analysis(const PtmGeometry& geom, const WorkspaceOptions& opts)
{
    if (!(opts.resolution > 0))
        throw ConfigError("workspace resolution must be positive");
    WorkspaceResult out;
    out.resolution = opts.resolution;
    out.n = static_cast<int>(std::floor(opts.cube_width / opts.resolution + 1e-9)) + 1;
    const double half = (out.n - 1) * opts.resolution / 2;
    out.origin = Vec3::Constant(-half);
    const std::size_t total = static_cast<std::size_t>(out.n) * out.n * out.n;
    out.dexterity.assign(total, 0.0f);
    out.stroke_ok.assign(total, 0);
    out.member.assign(total, 0);

    const StringLengths l0 = string_lengths(geom, opts.home);

    // Per orientation sample, the string vectors are (R a_i - b_i) + t.
    std::vector<std::array<Vec3, 6>> samples;
    std::array<Vec3, 6> nominal;
    {
        Mat3 R = rpy_to_rotation(opts.home.phi, opts.home.psi, opts.home.theta);
        for (int i = 0; i < 6; ++i)
            nominal[i] = R * geom.anchors[i] - geom.bases[i];
    }
    const int steps = opts.dexterity_step > 0 ? static_cast<int>(std::floor(opts.dexterity_range / opts.dexterity_step + 1e-9)) : 0;
    for (int a = -steps; a <= steps; ++a) {
        for (int b = -steps; b <= steps; ++b) {
            double roll = steps > 0 ? opts.dexterity_range * a / steps : 0.0;
            double pitch = steps > 0 ? opts.dexterity_range * b / steps : 0.0;
            Mat3 R = rpy_to_rotation(opts.home.phi + roll, opts.home.psi + pitch, opts.home.theta);
            std::array<Vec3, 6> s;
            for (int i = 0; i < 6; ++i)
                s[i] = R * geom.anchors[i] - geom.bases[i];
            samples.push_back(s);
        }
    }

    const Vec3 t0 = opts.home.position();
    auto within = [&](const std::array<Vec3, 6>& s, const Vec3& t) {
        for (int i = 0; i < 6; ++i) {
            if (std::abs((s[i] + t).norm() - l0(i)) > opts.stroke_limit + 1e-12)
                return false;
        }
        return true;
    };

    for (int i = 0; i < out.n; ++i) {
        for (int j = 0; j < out.n; ++j) {
            for (int k = 0; k < out.n; ++k) {
                const std::size_t idx = out.index(i, j, k);
                const Vec3 off = out.offset(i, j, k);
                const Vec3 t = t0 + off;
                bool stroke = within(nominal, t);
                int good = 0;
                for (const auto& s : samples)
                    good += within(s, t) ? 1 : 0;
                float dex = static_cast<float>(good) / static_cast<float>(samples.size());
                out.stroke_ok[idx] = stroke ? 1 : 0;
                out.dexterity[idx] = dex;
                out.member[idx] = (stroke && good == static_cast<int>(samples.size())) ? 1 : 0;
                if (inside_cylinder(opts.cylinder, off)) {
                    ++out.cylinder_points;
                    out.cylinder_members += out.member[idx];
                }
            }
        }
    }
    out.cylinder_contained = out.cylinder_points > 0 && out.cylinder_points == out.cylinder_members;
    return out;
}

double segment_distance(const Segment& s1, const Segment& s2)
{
    const Vec3 d1 = s1.b - s1.a;
    const Vec3 d2 = s2.b - s2.a;
    const Vec3 r = s1.a - s2.a;
    const double a = d1.squaredNorm();
    const double e = d2.squaredNorm();
    const double f = d2.dot(r);
    const double eps = 1e-24;
    double s = 0, t = 0;

    if (a <= eps && e <= eps)
        return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > eps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((s1.a + s * d1) - (s2.a + t * d2)).norm();
}

HandpiecePrism HandpiecePrism::hexagonal(const Vec3& start_center, const Vec3& axis, const Vec3& up,
                                         double circumradius, double length, double phase_deg)
{
    Vec3 w = axis.normalized();
    Vec3 v = (up - w * w.dot(up)).normalized();
    Vec3 u = v.cross(w);
    HandpiecePrism p;
    for (int i = 0; i < 6; ++i) {
        double ang = deg2rad(phase_deg + 60.0 * i);
        Vec3 c = start_center + circumradius * (std::cos(ang) * u + std::sin(ang) * v);
        p.edges[i] = {c, c + length * w};
    }
    return p;
}

std::array<Segment, 6> string_segments(const PtmGeometry& geom, const Pose6& pose)
{
    RigidTransform t = pose_to_transform(pose);
    std::array<Segment, 6> s;
    for (int i = 0; i < 6; ++i)
        s[i] = {geom.bases[i], t.apply(geom.anchors[i])};
    return s;
}

std::vector<std::pair<int, int>> assessed_prism_pairs(const PtmGeometry& geom, const HandpiecePrism& prism,
                                                      const Pose6& reference)
{
    auto strings = string_segments(geom, reference);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < 6; ++i) {
        std::array<int, 6> order{0, 1, 2, 3, 4, 5};
        std::array<double, 6> dist{};
        for (int h = 0; h < 6; ++h)
            dist[h] = segment_distance(strings[i], prism.edges[h]);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return dist[x] < dist[y]; });
        std::array<int, 4> chosen{order[0], order[1], order[2], order[3]};
        std::sort(chosen.begin(), chosen.end());
        for (int h : chosen)
            pairs.emplace_back(i, h);
    }
    return pairs;
}

InterferenceResult interference_analysis(const PtmGeometry& geom, const std::vector<Pose6>& trajectory,
                                         const HandpiecePrism& prism)
{
    if (trajectory.empty())
        throw ConfigError("interference analysis needs a nonempty trajectory");
    InterferenceResult out;
    for (int i = 0; i < 6; ++i) {
        for (int j = i + 1; j < 6; ++j)
            out.pairs.push_back({i, j, false, std::numeric_limits<double>::infinity(), 0});
    }
    for (auto [i, h] : assessed_prism_pairs(geom, prism))
        out.pairs.push_back({i, h, true, std::numeric_limits<double>::infinity(), 0});

    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        auto strings = string_segments(geom, trajectory[k]);
        for (auto& pr : out.pairs) {
            const Segment& other = pr.prism ? prism.edges[pr.other_index] : strings[pr.other_index];
            double d = segment_distance(strings[pr.string_index], other);
            if (d < pr.min_distance) {
                pr.min_distance = d;
                pr.sample = k;
            }
        }
    }
    out.min_string_string = std::numeric_limits<double>::infinity();
    out.min_string_prism = std::numeric_limits<double>::infinity();
    for (const auto& pr : out.pairs) {
        double& target = pr.prism ? out.min_string_prism : out.min_string_string;
        target = std::min(target, pr.min_distance);
    }
    return out;
}

std::vector<Pose6> random_walk_trajectory(const RandomWalkParams& params, std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x70u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto steps = static_cast<std::size_t>(std::llround(params.duration / params.dt));
    const Vec3 axis = params.cylinder.axis.normalized();
    const double sq = std::sqrt(params.dt);
    Vec3 pos = Vec3::Zero(), vel = Vec3::Zero();
    double ang[2] = {0, 0}, rate[2] = {0, 0};

    std::vector<Pose6> out;
    out.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        Pose6 p = params.home;
        p.x += pos.x();
        p.y += pos.y();
        p.z += pos.z();
        p.phi += ang[0];
        p.psi += ang[1];
        out.push_back(p);

        for (int i = 0; i < 3; ++i)
            vel(i) += params.accel_sigma * sq * normal(rng);
        if (vel.norm() > params.max_speed)
            vel *= params.max_speed / vel.norm();
        pos += vel * params.dt;

        double h = pos.dot(axis);
        Vec3 radial = pos - h * axis;
        const double hmax = params.cylinder.height / 2, rmax = params.cylinder.diameter / 2;
        if (std::abs(h) > hmax) {
            h = std::copysign(hmax, h);
            double vh = vel.dot(axis);
            vel -= 2 * vh * axis;
        }
        if (radial.norm() > rmax) {
            Vec3 n = radial.normalized();
            radial = n * rmax;
            double vn = vel.dot(n);
            if (vn > 0)
                vel -= 2 * vn * n;
        }
        pos = h * axis + radial;

        for (int i = 0; i < 2; ++i) {
            rate[i] += params.angular_accel_sigma * sq * normal(rng);
            rate[i] = std::clamp(rate[i], -params.max_angular_rate, params.max_angular_rate);
            ang[i] += rate[i] * params.dt;
            if (std::abs(ang[i]) > params.max_tilt) {
                ang[i] = std::copysign(params.max_tilt, ang[i]);
                rate[i] = -rate[i];
            }
        }
    }
    return out;
}

}  // namespace endo

namespace endo {

HandpiecePrism HandpiecePrism::default_prism()
{
    // Contra-angle handpiece: the body runs along +x of {B} above the file, whose tip sits at the
    // {B} origin at initialization. Edges h1..h3 face +y (strings 1-3), h4..h6 face -y.
    return hexagonal(Vec3(-10.0, 0.0, 33.0), Vec3::UnitX(), Vec3::UnitZ(), 12.0, 100.0, -60.0);
}

}  // namespace endo
