#include "endo/sensing.hpp"

#include <cmath>
#include <limits>

namespace endo {

Vec6 Wrench6::vec() const
{
    Vec6 v;
    v << force, torque;
    return v;
}

Wrench6 Wrench6::from_vec(const Vec6& v, Frame frame)
{
    return {v.head<3>(), v.tail<3>(), frame};
}

Wrench6 operator+(const Wrench6& a, const Wrench6& b) { return {a.force + b.force, a.torque + b.torque, a.frame}; }
Wrench6 operator-(const Wrench6& a, const Wrench6& b) { return {a.force - b.force, a.torque - b.torque, a.frame}; }

Wrench6 gravity_compensate(const Wrench6& raw, const Mat3& R_RG, const GravityParams& params)
{
    Wrench6 out;
    out.frame = Frame::S;
    out.force = raw.force - params.R_SR() * R_RG * params.w_h;
    out.torque = raw.torque - params.r_h.cross(raw.force - out.force);
    return out;
}

namespace {

struct YawFit {
    Vec3 w = Vec3::Zero();
    double cost = std::numeric_limits<double>::infinity();
};

YawFit fit_weight_for_yaw(const std::vector<GravitySample>& samples, double yaw)
{
    const int n = static_cast<int>(samples.size());
    Eigen::MatrixXd A(3 * n, 3);
    Eigen::VectorXd b(3 * n);
    const Mat3 Rz = rot_z(yaw);
    for (int k = 0; k < n; ++k) {
        A.block<3, 3>(3 * k, 0) = Rz * samples[k].R_RG;
        b.segment<3>(3 * k) = samples[k].raw.force;
    }
    YawFit fit;
    fit.w = A.colPivHouseholderQr().solve(b);
    fit.cost = (A * fit.w - b).squaredNorm();
    return fit;
}

double condition_of(const Eigen::MatrixXd& A)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    return smin > 0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

}  // namespace

GravityIdentification identify_gravity_params(const std::vector<GravitySample>& samples)
{
    const int n = static_cast<int>(samples.size());
    if (n < 6)
        throw RankError("gravity identification needs at least 6 sample poses");

    // Coarse yaw scan; the weight is linear given the yaw.
    double best_yaw = 0;
    YawFit best;
    for (int i = 0; i < 720; ++i) {
        double yaw = -180.0 + 0.5 * i;
        YawFit f = fit_weight_for_yaw(samples, yaw);
        if (f.cost < best.cost) {
            best = f;
            best_yaw = yaw;
        }
    }

    // Gauss-Newton on (w_h, yaw).
    Eigen::Vector4d x(best.w.x(), best.w.y(), best.w.z(), best_yaw);
    Eigen::MatrixXd J(3 * n, 4);
    Eigen::VectorXd r(3 * n);
    auto linearize = [&](const Eigen::Vector4d& p) {
        const Mat3 Rz = rot_z(p(3));
        const Mat3 dRz = skew(Vec3::UnitZ()) * Rz * deg2rad(1.0);
        const Vec3 w = p.head<3>();
        for (int k = 0; k < n; ++k) {
            r.segment<3>(3 * k) = samples[k].raw.force - Rz * samples[k].R_RG * w;
            J.block<3, 3>(3 * k, 0) = -Rz * samples[k].R_RG;
            J.block<3, 1>(3 * k, 3) = -dRz * samples[k].R_RG * w;
        }
    };
    for (int it = 0; it < 50; ++it) {
        linearize(x);
        Eigen::Vector4d step = J.colPivHouseholderQr().solve(-r);
        x += step;
        if (step.norm() < 1e-13 * (1.0 + x.norm()))
            break;
    }
    linearize(x);

    GravityIdentification out;
    out.force_condition = condition_of(J);
    if (!(out.force_condition < 1e9))
        throw RankError("gravity samples do not excite weight and mounting yaw (rank-deficient)");
    out.params.w_h = x.head<3>();
    out.params.mount_yaw = wrap_deg(x(3));

    Eigen::MatrixXd A(3 * n, 3);
    Eigen::VectorXd b(3 * n);
    for (int k = 0; k < n; ++k) {
        A.block<3, 3>(3 * k, 0) = -skew(samples[k].raw.force);
        b.segment<3>(3 * k) = samples[k].raw.torque;
    }
    out.torque_condition = condition_of(A);
    if (!(out.torque_condition < 1e9))
        throw RankError("gravity samples do not excite the centroid lever (rank-deficient)");
    out.params.r_h = A.colPivHouseholderQr().solve(b);
    return out;
}

Wrench6 wrench_to_file_frame(const Wrench6& w, const Mat3& R_FS, const Vec3& t_FS)
{
    Wrench6 out;
    out.frame = Frame::F;
    out.force = R_FS * w.force;
    out.torque = R_FS * w.torque + t_FS.cross(out.force);
    return out;
}

Wrench6 wrench_to_sensor_frame(const Wrench6& w, const Mat3& R_FS, const Vec3& t_FS)
{
    Wrench6 out;
    out.frame = Frame::S;
    out.force = R_FS.transpose() * w.force;
    out.torque = R_FS.transpose() * (w.torque - t_FS.cross(w.force));
    return out;
}

double quantize(double value, double step)
{
    if (!(step > 0))
        return value;
    const double inv = 1.0 / step;
    const double inv_round = std::round(inv);
    if (std::abs(inv - inv_round) < 1e-9 * inv)
        return std::round(value * inv_round) / inv_round;
    return std::round(value / step) * step;
}

Wrench6 simulate_sensor(const Wrench6& true_wrench, const SensorNoise& noise, const SensorQuantization& quant,
                        std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Wrench6 out = true_wrench;
    for (int i = 0; i < 3; ++i) {
        double f = true_wrench.force(i) + (noise.sigma_f > 0 ? noise.sigma_f * normal(rng) : 0.0);
        out.force(i) = quantize(f, quant.force_step);
    }
    for (int i = 0; i < 3; ++i) {
        double t = true_wrench.torque(i) + (noise.sigma_tau > 0 ? noise.sigma_tau * normal(rng) : 0.0);
        out.torque(i) = quantize(t, quant.torque_step);
    }
    return out;
}

Wrench6 simulate_sensor(const Wrench6& true_wrench, const SensorNoise& noise, const SensorQuantization& quant,
                        std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return simulate_sensor(true_wrench, noise, quant, rng);
}

}  // namespace endo
