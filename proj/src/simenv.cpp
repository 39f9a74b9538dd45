#include "endo/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace endo {

// ---------------------------------------------------------------------------------------------
// Canal geometry

namespace {

double poly(const std::array<double, 7>& c, double z)
{
    double v = 0;
    for (int i = 6; i >= 0; --i)
        v = v * z + c[i];
    return v;
}

double poly_d(const std::array<double, 7>& c, double z)
{
    double v = 0;
    for (int i = 6; i >= 1; --i)
        v = v * z + i * c[i];
    return v;
}

double poly_dd(const std::array<double, 7>& c, double z)
{
    double v = 0;
    for (int i = 6; i >= 2; --i)
        v = v * z + i * (i - 1) * c[i];
    return v;
}

}  // namespace

double CanalModel::x(double z) const { return poly(g, z); }
double CanalModel::y(double z) const { return poly(h, z); }
double CanalModel::dx(double z) const { return poly_d(g, z); }
double CanalModel::dy(double z) const { return poly_d(h, z); }

double CanalModel::radius(double z) const
{
    const double u = std::clamp(z / length, 0.0, 1.0);
    return entrance_radius + (apex_radius - entrance_radius) * u;
}

void CanalModel::validate() const
{
    if (!(length > 0))
        throw ConfigError("canal length must be positive");
    if (!(apex_radius > 0) || !(entrance_radius > apex_radius))
        throw ConfigError("canal radius must decrease strictly from entrance to apex");
    if (entrance_radius > 0.75 + 1e-12)
        throw ConfigError("canal entrance radius exceeds 0.75 mm");
    if (wall_stiffness < 0 || wall_damping < 0 || cut_rate < 0)
        throw ConfigError("canal wall parameters must be non-negative");
}

CanalModel CanalModel::straight(double length)
{
    CanalModel c;
    c.length = length;
    return c;
}

CenterlineFit fit_centerline(const std::vector<Vec3>& points)
{
    std::vector<double> zs;
    for (const auto& p : points)
        zs.push_back(p.z());
    std::sort(zs.begin(), zs.end());
    int distinct = zs.empty() ? 0 : 1;
    for (std::size_t i = 1; i < zs.size(); ++i)
        if (zs[i] - zs[i - 1] > 1e-12 * std::max(1.0, std::abs(zs[i])))
            ++distinct;
    if (distinct < 7)
        throw RankError("centerline fit needs at least 7 distinct z values");

    const int n = static_cast<int>(points.size());
    Eigen::MatrixXd V(n, 7);
    Eigen::MatrixXd rhs(n, 2);
    for (int r = 0; r < n; ++r) {
        double zp = 1.0;
        for (int c = 0; c < 7; ++c) {
            V(r, c) = zp;
            zp *= points[r].z();
        }
        rhs(r, 0) = points[r].x();
        rhs(r, 1) = points[r].y();
    }
    // Column equilibration keeps the monomial basis usable over a ~20 mm range.
    Eigen::VectorXd scale(7);
    for (int c = 0; c < 7; ++c) {
        scale(c) = V.col(c).norm();
        if (scale(c) == 0)
            throw RankError("degenerate centerline samples");
        V.col(c) /= scale(c);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < 7)
        throw RankError("centerline Vandermonde matrix is rank-deficient");
    Eigen::MatrixXd sol = qr.solve(rhs);
    CenterlineFit fit;
    for (int c = 0; c < 7; ++c) {
        fit.g[c] = sol(c, 0) / scale(c);
        fit.h[c] = sol(c, 1) / scale(c);
    }
    return fit;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm)
{
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa, double b, double fb, double m,
                        double fm, double whole, double tol, int depth)
{
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol)
        return left + right + diff / 15.0;
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double centerline_length(const CanalModel& canal, double z_from, double z_to, double tol)
{
    if (z_from == z_to)
        return 0.0;
    const double sign = z_to > z_from ? 1.0 : -1.0;
    const double a = std::min(z_from, z_to), b = std::max(z_from, z_to);
    auto f = [&](double z) {
        const double u = canal.dx(z), v = canal.dy(z);
        return std::sqrt(1.0 + u * u + v * v);
    };
    // Split into unit-length panels so the tolerance is met uniformly.
    const int panels = std::max(1, static_cast<int>(std::ceil(b - a)));
    const double w = (b - a) / panels;
    double total = 0;
    for (int i = 0; i < panels; ++i) {
        const double pa = a + i * w, pb = (i + 1 == panels) ? b : pa + w, pm = 0.5 * (pa + pb);
        const double fa = f(pa), fb = f(pb), fm = f(pm);
        const double whole = simpson(pa, fa, pb, fb, fm);
        total += adaptive_simpson(f, pa, fa, pb, fb, pm, fm, whole, tol / panels, 40);
    }
    return sign * total;
}

double project_to_centerline(const CanalModel& canal, const Vec3& p)
{
    auto dist2 = [&](double z) { return (canal.center(z) - p).squaredNorm(); };
    // Coarse bracket around the tip's own z, then Newton on the stationarity condition.
    double best = p.z(), best_d = dist2(best);
    for (int i = -60; i <= 60; ++i) {
        const double z = p.z() + 0.05 * i;
        const double d = dist2(z);
        if (d < best_d) {
            best_d = d;
            best = z;
        }
    }
    double z = best;
    for (int it = 0; it < 20; ++it) {
        const double ex = canal.x(z) - p.x(), ey = canal.y(z) - p.y(), ez = z - p.z();
        const double d1 = ex * canal.dx(z) + ey * canal.dy(z) + ez;
        const double d2 = canal.dx(z) * canal.dx(z) + ex * poly_dd(canal.g, z) + canal.dy(z) * canal.dy(z) +
                          ey * poly_dd(canal.h, z) + 1.0;
        if (!(d2 > 0))
            break;
        const double step = d1 / d2;
        z -= step;
        if (std::abs(step) < 1e-12)
            break;
    }
    return dist2(z) <= best_d ? z : best;
}

double insertion_depth(const RigidTransform& file_in_P, const CanalModel& canal, const FileModel& file)
{
    const Vec3 tip = file_in_P.apply(Vec3(0, 0, file.length));
    const double z = project_to_centerline(canal, tip);
    return centerline_length(canal, 0.0, z);
}

// ---------------------------------------------------------------------------------------------
// Contact

ContactResult contact_wrench(const CanalModel& canal, const RigidTransform& file_in_P, const FileModel& file,
                             const ContactParams& params, const Spindle& spindle, ContactState& state, double dt)
{
    const double l = file.length;
    const int n = static_cast<int>(std::floor(l / params.sample_spacing + 1e-9)) + 1;
    const bool dynamic = dt > 0 && state.initialized;
    if (static_cast<int>(state.prev_penetration.size()) != n)
        state.prev_penetration.assign(n, 0.0);

    const Mat3& R = file_in_P.rotation;
    const Vec3 axis = R.col(2);
    const double rpm_ratio = spindle.direction == SpindleDirection::off ? 0.0 : spindle.rpm / 150.0;
    const double spin_sign = spindle.direction == SpindleDirection::reverse ? -1.0 : 1.0;

    ContactResult out;
    Vec3 force_P = Vec3::Zero();
    Vec3 torque_F = Vec3::Zero();
    double engaged = 0;
    double friction_moment = 0;
    std::vector<double> pen_now(n, 0.0);

    for (int i = 0; i < n; ++i) {
        const double s = l - i * params.sample_spacing;
        const Vec3 p = file_in_P.translation + s * axis;
        const double z = p.z();
        if (z <= 0)
            continue;
        const double ramp = params.entrance_ramp > 0 ? std::min(1.0, z / params.entrance_ramp) : 1.0;
        const Vec3 c = canal.center(z);
        Vec3 d(p.x() - c.x(), p.y() - c.y(), 0.0);
        const double dist = d.norm();
        const double r_file = params.file_tip_radius + params.file_taper * (l - s);
        const double clearance = std::max(0.0, canal.radius(z) - r_file);
        const double pen = dist - clearance;
        if (pen <= 0 || dist == 0)
            continue;
        pen_now[i] = pen;
        const double rate = dynamic ? (pen - state.prev_penetration[i]) / dt : 0.0;
        const double mag = std::max(0.0, ramp * (canal.wall_stiffness * pen + canal.wall_damping * rate));
        const Vec3 f_P = mag * d / dist;
        force_P += f_P;
        const Vec3 f_F = R.transpose() * f_P;
        torque_F += Vec3(0, 0, s).cross(f_F);
        engaged += ramp * canal.wall_stiffness * pen / (pen + params.engage_scale);
        friction_moment += mag * r_file;
        ++out.contacts;
    }

    Vec3 force_F = R.transpose() * force_P;
    out.lateral_rigid = std::hypot(force_F.x(), force_F.y());
    double alpha = 1.0;
    if (params.flexible_file && out.contacts > 0) {
        // The file acts as one cantilever spring at the resultant lever in series with the walls.
        const double f_lat = out.lateral_rigid;
        const double t_lat = std::hypot(torque_F.x(), torque_F.y());
        double la = f_lat > 1e-12 ? t_lat / f_lat : l;
        la = std::clamp(la, params.sample_spacing, l);
        const double k_b = 3.0 * file.flexural_rigidity() / (la * la * la);
        alpha = k_b / (k_b + engaged);
    }
    force_F *= alpha;
    torque_F *= alpha;
    torque_F.z() += spin_sign * params.wall_friction * friction_moment * alpha * (rpm_ratio > 0 ? 1.0 : 0.0);

    const double depth = insertion_depth(file_in_P, canal, file);
    out.insertion_depth = depth;
    const double ax_pen = depth - state.cut_frontier;
    double f_ax = 0;
    if (ax_pen > 0) {
        const double rate = dynamic ? (ax_pen - state.prev_axial) / dt : 0.0;
        f_ax = std::max(0.0, (params.axial_stiffness * ax_pen + params.axial_damping * rate) *
                                 (1.0 + params.axial_speed_gain * rpm_ratio));
        force_F.z() += f_ax;
        torque_F.z() += spin_sign * params.torque_coefficient * f_ax * rpm_ratio;
    }

    if (dt > 0) {
        if (spindle.direction == SpindleDirection::forward && f_ax > 0) {
            const double r = canal.radius(state.cut_frontier);
            const double volume = canal.cut_rate * f_ax * rpm_ratio * dt;
            state.cut_frontier = std::min(canal.length, state.cut_frontier + volume / (kPi * r * r));
        }
        state.prev_penetration = std::move(pen_now);
        state.prev_axial = std::max(0.0, ax_pen);
        state.initialized = true;
    }

    out.wrench = {force_F, torque_F, Frame::F};
    return out;
}

// ---------------------------------------------------------------------------------------------
// Patient motion and string measurement

std::string to_string(TrajectoryKind k)
{
    switch (k) {
    case TrajectoryKind::static_pose: return "static";
    case TrajectoryKind::slanted_circle: return "slanted_circle";
    case TrajectoryKind::sinusoid_angles: return "sinusoid_angles";
    case TrajectoryKind::circle_and_angles: return "circle_and_angles";
    case TrajectoryKind::random_walk: return "random_walk";
    }
    return "?";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s)
{
    for (auto k : {TrajectoryKind::static_pose, TrajectoryKind::slanted_circle, TrajectoryKind::sinusoid_angles,
                   TrajectoryKind::circle_and_angles, TrajectoryKind::random_walk})
        if (to_string(k) == s)
            return k;
    throw ConfigError("unknown trajectory kind '" + s + "'");
}

Pose6 patient_pose(const PatientTrajectory& traj, double t)
{
    Pose6 p;
    const bool circle = traj.kind == TrajectoryKind::slanted_circle || traj.kind == TrajectoryKind::circle_and_angles;
    const bool angles = traj.kind == TrajectoryKind::sinusoid_angles || traj.kind == TrajectoryKind::circle_and_angles;
    if (circle && traj.circle_radius > 0) {
        const double R = traj.circle_radius;
        const double tilt = std::asin(std::clamp(traj.circle_depth / (2.0 * R), 0.0, 1.0));
        const Vec3 u(std::cos(tilt), 0.0, std::sin(tilt));
        const Vec3 v(0.0, 1.0, 0.0);
        const double w = traj.speed / R;
        const Vec3 pos = R * ((std::cos(w * t) - 1.0) * u + std::sin(w * t) * v);
        p.x = pos.x();
        p.y = pos.y();
        p.z = pos.z();
    }
    if (angles && traj.angle_amplitude > 0) {
        const double A = traj.angle_amplitude;
        // Periods in ratio 1 : 1.25 : 1.5 keep each peak rate at or below max_angular_rate.
        const double w0 = deg2rad(traj.max_angular_rate) / deg2rad(A);
        p.phi = A * std::sin(w0 * t);
        p.psi = A * std::sin(w0 / 1.25 * t);
        p.theta = A * std::sin(w0 / 1.5 * t);
    }
    if (traj.kind == TrajectoryKind::random_walk && !traj.samples.empty()) {
        const double u = t / traj.sample_dt;
        const std::size_t i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), traj.samples.size() - 1);
        const std::size_t j = std::min(i + 1, traj.samples.size() - 1);
        const double a = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
        const Vec6 d = traj.samples[i].vec() + a * pose_difference(traj.samples[j], traj.samples[i]);
        p = Pose6::from_vec(d - traj.samples.front().vec());
    }
    return p;
}

bool StringMeasurement::any_exceeded() const
{
    return std::any_of(stroke_exceeded.begin(), stroke_exceeded.end(), [](bool b) { return b; });
}

StringMeasurement measure_strings(const PtmGeometry& geom, const Pose6& true_relative_pose, const PtmSensor& sensor,
                                  std::mt19937_64& rng)
{
    StringMeasurement m;
    const StringLengths truth = string_lengths(geom, true_relative_pose);
    const StringLengths home =
        sensor.home_lengths.isZero() ? string_lengths(geom, ptm_home_pose()) : sensor.home_lengths;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 6; ++i) {
        const double noisy = truth(i) + (sensor.sigma > 0 ? sensor.sigma * normal(rng) : 0.0);
        m.lengths(i) = quantize(noisy, sensor.quantization);
        m.stroke_exceeded[i] = std::abs(truth(i) - home(i)) > sensor.stroke_limit;
    }
    return m;
}

StringMeasurement measure_strings(const PtmGeometry& geom, const Pose6& true_relative_pose, const PtmSensor& sensor,
                                  std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return measure_strings(geom, true_relative_pose, sensor, rng);
}

// ---------------------------------------------------------------------------------------------
// Episodes

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::hybrid: return "hybrid";
    case Scheme::admittance_only: return "admittance_only";
    case Scheme::admittance_flex: return "admittance_flex";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s)
{
    for (auto k : {Scheme::hybrid, Scheme::admittance_only, Scheme::admittance_flex})
        if (to_string(k) == s)
            return k;
    throw ConfigError("unknown control scheme '" + s + "'");
}

EpisodeConfig EpisodeConfig::defaults()
{
    EpisodeConfig c;
    c.q0 << 0.0, 0.0, 0.0, 0.0, -90.0, 0.0;
    // Straight head: the file lies on the flange axis, 40 mm out.
    c.tool.R_RF = Mat3::Identity();
    c.tool.t_F = Vec3(0.0, 0.0, 40.0);
    c.tool.working_part_length = c.file.length;
    c.gravity.w_h = Vec3(0.0, 0.0, -1.5);
    c.gravity.r_h = Vec3(5.0, 0.0, 30.0);
    c.gravity.mount_yaw = 2.0;
    return c;
}

void EpisodeConfig::validate() const
{
    dh.validate();
    file.validate();
    canal.validate();
    controller.validate();
    ptm.validate();
    if (!(duration > 0))
        throw ConfigError("episode duration must be positive");
    if (!(contact.sample_spacing > 0))
        throw ConfigError("contact sample spacing must be positive");
    if (initial_frontier < 0 || initial_frontier > canal.length)
        throw ConfigError("initial cut frontier must lie within the canal");
    if (initial_depth > canal.length)
        throw ConfigError("initial insertion depth exceeds the canal length");
    for (int i = 0; i < 6; ++i)
        if (!(joint_limits.lower(i) < joint_limits.upper(i)) || q0(i) < joint_limits.lower(i) ||
            q0(i) > joint_limits.upper(i))
            throw ConfigError("joint limits must be ordered and contain q0");
    if (!(ptm_gate_translation > 0) || !(ptm_gate_rotation > 0))
        throw ConfigError("PTM gate bounds must be positive");
    if (ptm_max_rejections < 0)
        throw ConfigError("ptm_max_rejections must be non-negative");
}

namespace {

RigidTransform make_transform(const Mat3& R, const Vec3& t)
{
    RigidTransform T;
    T.rotation = R;
    T.translation = t;
    return T;
}

}  // namespace

EpisodeLog simulate_episode(const EpisodeConfig& cfg)
{
    cfg.validate();
    EpisodeLog log;
    log.seed = cfg.seed;
    std::mt19937_64 rng(cfg.seed);

    const double dt = cfg.controller.inner_period;
    const long steps = std::lround(cfg.duration / dt);
    const double l = cfg.file.length;

    const RigidTransform T_RF = make_transform(cfg.tool.R_RF, cfg.tool.t_F);
    const RigidTransform T_GR0 = forward_kinematics(cfg.dh, cfg.q0);
    const RigidTransform T_FP0 = make_transform(Mat3::Identity(), Vec3(0, 0, l - cfg.initial_depth));
    const RigidTransform T_GP0 = compose(compose(T_GR0, T_RF), T_FP0);
    const RigidTransform T_PF_d = invert(T_FP0);

    // PTM mounting: file tip on the {B} origin with the file along -z_B at the home pose.
    const RigidTransform T_BF = make_transform(rot_x(180.0), Vec3(0, 0, l));
    const RigidTransform T_RB = compose(T_RF, invert(T_BF));
    const RigidTransform T_AP = compose(compose(invert(pose_to_transform(ptm_home_pose())), T_BF), T_FP0);
    const RigidTransform T_PA = invert(T_AP);

    // Sensor orientation consistent with a yaw-only mounting error about the flange axis.
    const Mat3 R_SR = cfg.gravity.R_SR();
    const Mat3 R_FS = cfg.tool.R_RF.transpose() * R_SR.transpose();

    ControllerParams ctrl = cfg.controller;
    if (cfg.scheme == Scheme::admittance_only)
        ctrl.kf.setZero();
    HybridController controller(ctrl);
    const FlexGains kf = ctrl.flex_gains();
    const bool use_ptm = cfg.scheme == Scheme::hybrid;
    const ControlMode fixed_mode =
        cfg.scheme == Scheme::hybrid ? ControlMode::HybridPositionForce : ControlMode::AdmittanceOnly;

    PtmSensor ptm_sensor = cfg.ptm_sensor;
    if (ptm_sensor.home_lengths.isZero())
        ptm_sensor.home_lengths = string_lengths(cfg.ptm, ptm_home_pose());

    ContactState cstate;
    cstate.cut_frontier = cfg.initial_frontier;
    FsmState fsm;
    FsmOutputs fsm_out = fsm_outputs(fsm, cfg.fsm);
    log.state_sequence.push_back(fsm.kind);
    std::size_t next_event = 0;
    bool apex_sent = false;

    Pose6 ptm_est = ptm_home_pose();
    int ptm_rejections = 0;
    Pose6 p_d = transform_to_pose(T_FP0).pose;
    JointState js;
    js.q = cfg.q0;
    Vec3 prev_patient_pos = Vec3::Zero();
    Wrench6 xi_s;
    Spindle spindle;

    // Without the automaton the reference is a PTM reading taken in the aligned start configuration.
    if (use_ptm && !cfg.use_fsm) {
        const RigidTransform T_BA0 = compose(invert(compose(T_GR0, T_RB)), compose(T_GP0, T_PA));
        const StringMeasurement m0 = measure_strings(cfg.ptm, transform_to_pose(T_BA0).pose, ptm_sensor, rng);
        ptm_est = pose_estimate(cfg.ptm, m0.lengths, ptm_est, cfg.newton).pose;
        p_d = transform_to_pose(compose(compose(compose(invert(T_RF), T_RB), pose_to_transform(ptm_est)), T_AP)).pose;
    }

    std::vector<ScriptedEvent> events = cfg.events;
    std::stable_sort(events.begin(), events.end(),
                     [](const ScriptedEvent& a, const ScriptedEvent& b) { return a.time < b.time; });

    log.samples.reserve(static_cast<std::size_t>(steps));
    for (long k = 0; k < steps; ++k) {
        const double t = k * dt;
        EpisodeSample s;
        s.t = t;

        const Pose6 delta = patient_pose(cfg.trajectory, t) + cfg.patient_offset;
        const RigidTransform T_GP =
            make_transform(rpy_to_rotation(delta.phi, delta.psi, delta.theta) * T_GP0.rotation,
                           T_GP0.translation + delta.position());
        const double patient_speed = k == 0 ? 0.0 : (delta.position() - prev_patient_pos).norm() / dt;
        prev_patient_pos = delta.position();

        const RigidTransform T_GR = forward_kinematics(cfg.dh, js.q);
        const RigidTransform T_GF = compose(T_GR, T_RF);
        const RigidTransform T_FP = compose(invert(T_GF), T_GP);
        const RigidTransform T_PF = invert(T_FP);

        const ContactResult contact =
            contact_wrench(cfg.canal, T_PF, cfg.file, cfg.contact, spindle, cstate, dt);

        // Sensor chain: contact wrench in {S} plus handpiece gravity, noise, quantization, compensation.
        const Mat3 R_RG = T_GR.rotation.transpose();
        Wrench6 raw = wrench_to_sensor_frame(contact.wrench, R_FS, cfg.t_FS);
        const Vec3 g_S = R_SR * R_RG * cfg.gravity.w_h;
        raw.force += g_S;
        raw.torque += cfg.gravity.r_h.cross(g_S);
        raw = simulate_sensor(raw, cfg.sensor_noise, cfg.sensor_quant, rng);
        xi_s = wrench_to_file_frame(gravity_compensate(raw, R_RG, cfg.gravity), R_FS, cfg.t_FS);

        Pose6 p_s = transform_to_pose(T_FP).pose;
        StringMeasurement meas;
        if (use_ptm) {
            const RigidTransform T_GB = compose(T_GR, T_RB);
            const RigidTransform T_BA = compose(invert(T_GB), compose(T_GP, T_PA));
            meas = measure_strings(cfg.ptm, transform_to_pose(T_BA).pose, ptm_sensor, rng);
            try {
                const Pose6 est = pose_estimate(cfg.ptm, meas.lengths, ptm_est, cfg.newton).pose;
                const Vec6 jump = pose_difference(est, ptm_est);
                if (jump.head<3>().norm() <= cfg.ptm_gate_translation && jump.tail<3>().norm() <= cfg.ptm_gate_rotation) {
                    ptm_est = est;
                    ptm_rejections = 0;
                } else {
                    ++log.ptm_failures;
                    ++ptm_rejections;
                }
            } catch (const NumericalError&) {
                ++log.ptm_failures;
                ++ptm_rejections;
            }
            if (ptm_rejections > cfg.ptm_max_rejections) {
                log.aborted = true;
                log.abort_reason = "ptm: tracking lost after " + std::to_string(ptm_rejections) +
                                   " consecutive rejected estimates";
            }
            p_s = transform_to_pose(compose(compose(compose(invert(T_RF), T_RB), pose_to_transform(ptm_est)), T_AP))
                      .pose;
            s.strings = meas.lengths;
        }

        const Wrench6 flx = flexibility_wrench(xi_s, cfg.file, kf);
        const Wrench6 wrench_com = xi_s + flx;
        const SafetyFlags safety = safety_monitor(contact.wrench, cfg.file, patient_speed);
        if (safety.fracture_risk)
            log.fracture_flag = true;

        ControlMode mode = fixed_mode;
        Wrench6 xi_d;
        xi_d.force.z() = cfg.desired_fz;
        if (cfg.use_fsm) {
            if (controller.outer_tick()) {
                FsmInputs in;
                in.time = t;
                in.tau_z = xi_s.torque.z();
                in.f_z = wrench_com.force.z();
                in.insertion_depth = contact.insertion_depth;
                in.ptm_near_limit = meas.any_exceeded();
                in.rapid_motion_detected = safety.rapid_motion;
                if (next_event < events.size() && events[next_event].time <= t + 1e-9)
                    in.dentist_event = events[next_event++].event;
                else if (cfg.apex_depth && !apex_sent && fsm.kind == FsmStateKind::CleaningShaping &&
                         contact.insertion_depth >= *cfg.apex_depth) {
                    in.dentist_event = DentistEvent::apex_reached;
                    apex_sent = true;
                }
                const FsmStepResult r = fsm_step(fsm, in, ctrl.outer_period, cfg.fsm);
                if (r.state.kind != fsm.kind)
                    log.state_sequence.push_back(r.state.kind);
                fsm = r.state;
                fsm_out = r.outputs;
                if (fsm_out.record_initial_pose)
                    p_d = p_s;
                spindle = fsm_out.spindle;
                s.emergency = fsm_out.emergency;
            }
            mode = fsm_out.control_mode;
            xi_d = fsm_out.desired_wrench();
        }

        Vec6 cmd = controller.step(mode, p_d, p_s, wrench_com, xi_d);
        if (fsm.frozen)
            cmd.setZero();

        Vec6 q_dot = Vec6::Zero();
        try {
            const JacobianResult J = tool_jacobian_in_flange(cfg.dh, js.q, cfg.tool.t_F);
            q_dot = file_velocity_to_joint_rates(J.J, cfg.tool, -cmd);
        } catch (const NumericalError& e) {
            log.aborted = true;
            log.abort_reason = std::string("robot: ") + e.what();
        }

        s.patient = delta;
        s.relative_true = transform_to_pose(T_FP).pose;
        s.relative_measured = p_s;
        s.alignment_error = pose_difference(transform_to_pose(T_PF).pose, transform_to_pose(T_PF_d).pose);
        s.wrench_true = contact.wrench;
        s.wrench_sensed = xi_s;
        s.command = cmd;
        s.p_adm = controller.adm.p_adm;
        s.q = js.q;
        s.state = fsm.kind;
        s.mode = mode;
        s.desired_fz = xi_d.force.z();
        s.insertion_depth = contact.insertion_depth;
        s.cut_frontier = cstate.cut_frontier;
        s.fracture_risk = safety.fracture_risk;
        log.samples.push_back(s);
        if (log.aborted)
            break;

        const IntegrationResult ir = integrate_joint_command(js, q_dot, dt, cfg.joint_limits);
        js = ir.state;
        if (ir.clamped)
            ++log.joint_clamps;
    }
    log.clamp_events = controller.adm.clamp_events;
    return log;
}

EpisodeSummary summarize(const EpisodeLog& log, double t_from)
{
    EpisodeSummary sum;
    Vec6 sq = Vec6::Zero();
    Vec6 abs_w = Vec6::Zero();
    double lat = 0;
    for (const auto& s : log.samples) {
        if (s.t < t_from)
            continue;
        sq += s.alignment_error.cwiseAbs2();
        abs_w += s.wrench_true.vec().cwiseAbs();
        lat += std::hypot(s.wrench_true.force.x(), s.wrench_true.force.y());
        ++sum.samples;
    }
    if (sum.samples > 0) {
        sum.rms_error = (sq / sum.samples).cwiseSqrt();
        sum.mean_abs_wrench = abs_w / sum.samples;
        sum.mean_lateral_force = lat / sum.samples;
    }
    return sum;
}

EpisodeConfig alignment_config(Scheme scheme, double speed, std::uint64_t seed, const EpisodeConfig& base)
{
    if (!(speed > 0))
        throw ConfigError("alignment speed must be positive");
    EpisodeConfig c = base;
    c.use_fsm = false;
    c.scheme = scheme;
    c.seed = seed;
    c.trajectory.kind = TrajectoryKind::circle_and_angles;
    c.trajectory.speed = speed;
    c.duration = 2.0 * kPi * c.trajectory.circle_radius / speed;
    // Start at the equilibrium of the axial contact so the z error is not biased by the settling.
    c.initial_frontier = c.initial_depth - c.desired_fz / c.contact.axial_stiffness;
    return c;
}

// ---------------------------------------------------------------------------------------------
// Linear platform

PlatformLog simulate_platform(const PlatformConfig& cfg)
{
    cfg.file.validate();
    ControllerParams ctrl = cfg.controller;
    ctrl.inner_period = cfg.inner_period;
    HybridController controller(ctrl);
    std::mt19937_64 rng(cfg.seed);

    const double l = cfg.file.length;
    const double s_c = std::clamp(l - cfg.insertion_depth, 0.5, l);
    const double k_b = 3.0 * cfg.file.flexural_rigidity() / (s_c * s_c * s_c);
    const double k_s = k_b * cfg.platform_stiffness / (k_b + cfg.platform_stiffness);
    const FlexGains kf = ctrl.flex_gains();

    PlatformLog log;
    double x_r = 0.0;
    const long steps = std::lround(cfg.duration / cfg.inner_period);
    for (long k = 0; k < steps; ++k) {
        const double t = k * cfg.inner_period;
        double x_p = 0;
        if (cfg.motion == PlatformMotion::ramp_hold) {
            x_p = cfg.speed * std::min(t, cfg.ramp_time);
        } else {
            const double leg = cfg.travel / cfg.speed;
            const double ph = std::fmod(t, 2.0 * leg);
            x_p = cfg.speed * (ph < leg ? ph : 2.0 * leg - ph);
        }
        // The file sits in a hole in the platform, so the contact acts in both directions.
        const double f = k_s * (x_p - x_r);

        // The file pushes back on the platform: -x force at lever s_c.
        Wrench6 w;
        w.force.x() = -f;
        w.torque.y() = s_c * w.force.x();
        const Wrench6 xi_s = simulate_sensor(w, cfg.sensor_noise, cfg.sensor_quant, rng);
        const Wrench6 com = xi_s + flexibility_wrench(xi_s, cfg.file, kf);
        Wrench6 com_x;
        com_x.force.x() = com.force.x();

        const Vec6 cmd = controller.step(ControlMode::AdmittanceOnly, Pose6{}, Pose6{}, com_x, Wrench6{});
        x_r += -cmd(0) * cfg.inner_period;

        log.t.push_back(t);
        log.platform.push_back(x_p);
        log.robot.push_back(x_r);
        log.force.push_back(f);
        log.error.push_back(x_p - x_r);
    }
    return log;
}

double platform_tracking_rms(const PlatformConfig& cfg, double settle)
{
    const PlatformLog log = simulate_platform(cfg);
    const auto from = static_cast<std::size_t>(std::lround(settle / cfg.inner_period));
    return rms(log.error, from);
}

CalibrationDemo calibration_demo(double sigma, std::uint64_t seed, int trials)
{
    if (!(sigma >= 0) || trials < 1)
        throw ConfigError("calibration demo needs sigma >= 0 and at least one trial");
    CalibrationDemo out;
    out.sigma = sigma;

    ToolCalibration truth;
    const Vec3 axis = Vec3(0.05, -0.03, 1.0).normalized();
    truth.t_F = Vec3(3.0, -2.0, 40.0);
    const double len1 = 21.0, len2 = 16.0;
    const Vec3 pivot(150.0, 20.0, 300.0);

    GravityParams g_truth;
    g_truth.w_h = Vec3(0.02, -0.01, -1.5);
    g_truth.r_h = Vec3(5.0, -1.0, 30.0);
    g_truth.mount_yaw = 2.0;

    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(trial));
        std::normal_distribution<double> n01(0.0, 1.0);

        std::array<RigidTransform, 4> p1, p2;
        for (int f = 0; f < 2; ++f) {
            const Vec3 tip = truth.t_F + (f == 0 ? len1 : len2) * axis;
            for (int i = 0; i < 4; ++i) {
                RigidTransform T;
                T.rotation = rpy_to_rotation(25.0 * std::cos(1.7 * i + f), 25.0 * std::sin(1.3 * i + 0.5 * f),
                                             40.0 * i - 60.0);
                T.translation = pivot - T.rotation * tip;
                T.translation += sigma * Vec3(n01(rng), n01(rng), n01(rng));
                (f == 0 ? p1 : p2)[static_cast<std::size_t>(i)] = T;
            }
        }
        const ToolCalibration est = tcp_calibrate(p1, p2, len1);
        out.tcp_position_error += (est.t_F - truth.t_F).norm();
        const Vec3 z = est.R_RF.col(2);
        out.tcp_axis_error_deg += rad2deg(std::atan2(z.cross(axis).norm(), z.dot(axis)));

        std::vector<GravitySample> samples;
        for (int i = 0; i < 12; ++i) {
            GravitySample s;
            s.R_RG = rpy_to_rotation(70.0 * std::sin(0.9 * i), 60.0 * std::cos(1.1 * i), 30.0 * i);
            const Vec3 f = g_truth.R_SR() * s.R_RG * g_truth.w_h;
            s.raw.force = f + sigma * Vec3(n01(rng), n01(rng), n01(rng));
            s.raw.torque = g_truth.r_h.cross(f) + sigma * Vec3(n01(rng), n01(rng), n01(rng));
            s.raw.frame = Frame::S;
            samples.push_back(s);
        }
        const GravityParams ge = identify_gravity_params(samples).params;
        out.gravity_weight_error += (ge.w_h - g_truth.w_h).norm();
        out.gravity_centroid_error += (ge.r_h - g_truth.r_h).norm();
        out.gravity_yaw_error_deg += std::abs(wrap_deg(ge.mount_yaw - g_truth.mount_yaw));
    }
    out.tcp_position_error /= trials;
    out.tcp_axis_error_deg /= trials;
    out.gravity_weight_error /= trials;
    out.gravity_centroid_error /= trials;
    out.gravity_yaw_error_deg /= trials;
    return out;
}

double rms(const std::vector<double>& v, std::size_t from)
{
    if (from >= v.size())
        return 0.0;
    double s = 0;
    for (std::size_t i = from; i < v.size(); ++i)
        s += v[i] * v[i];
    return std::sqrt(s / static_cast<double>(v.size() - from));
}

double peak_to_peak(const std::vector<double>& v, std::size_t from)
{
    if (from >= v.size())
        return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
    return *hi - *lo;
}

}  // namespace endo
