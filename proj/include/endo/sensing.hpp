#pragma once

#include "endo/geometry.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace endo {

enum class Frame { S, F };

/** @brief Force in N and torque in mN·m. mm x N lands in mN·m with no scale factor. */
struct Wrench6 {
    Vec3 force = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
    Frame frame = Frame::F;

    Vec6 vec() const;
    static Wrench6 from_vec(const Vec6& v, Frame frame);
};

Wrench6 operator+(const Wrench6& a, const Wrench6& b);
Wrench6 operator-(const Wrench6& a, const Wrench6& b);

struct GravityParams {
    Vec3 w_h = Vec3::Zero();
    Vec3 r_h = Vec3::Zero();
    double mount_yaw = 0.0;

    Mat3 R_SR() const { return rot_z(mount_yaw); }
};

/** @brief f_s = f0 - R_SR R_RG w_h; tau_s = tau0 - r_h x (f0 - f_s). */
Wrench6 gravity_compensate(const Wrench6& raw, const Mat3& R_RG, const GravityParams& params);

struct GravitySample {
    Mat3 R_RG;
    Wrench6 raw;
};

struct GravityIdentification {
    GravityParams params;
    double force_condition = 0;
    double torque_condition = 0;
};

/**
 * @brief Least-squares weight, mounting yaw and centroid from contact-free readings.
 *
 * Needs at least 6 samples; throws RankError when the orientations do not excite all parameters.
 */
GravityIdentification identify_gravity_params(const std::vector<GravitySample>& samples);

/** @brief f_F = R_FS f; tau_F = R_FS tau + t_FS x f_F. */
Wrench6 wrench_to_file_frame(const Wrench6& w, const Mat3& R_FS, const Vec3& t_FS);

/** @brief Inverse of wrench_to_file_frame. */
Wrench6 wrench_to_sensor_frame(const Wrench6& w, const Mat3& R_FS, const Vec3& t_FS);

struct SensorNoise {
    double sigma_f = 0.005;
    double sigma_tau = 0.125;
};

struct SensorQuantization {
    double force_step = 0.01;
    double torque_step = 0.25;
};

/** @brief Rounds to the nearest multiple of `step`; step <= 0 disables quantization. */
double quantize(double value, double step);

/** @brief Adds zero-mean Gaussian noise, then quantizes. */
Wrench6 simulate_sensor(const Wrench6& true_wrench, const SensorNoise& noise, const SensorQuantization& quant,
                        std::mt19937_64& rng);

Wrench6 simulate_sensor(const Wrench6& true_wrench, const SensorNoise& noise, const SensorQuantization& quant,
                        std::uint64_t seed);

}  // namespace endo
