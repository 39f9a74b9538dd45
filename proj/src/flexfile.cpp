#include "endo/flexfile.hpp"

#include <algorithm>
#include <cmath>

namespace endo {

double FileModel::second_moment() const
{
    return kPi * std::pow(effective_diameter, 4) / 64.0;
}

void FileModel::validate() const
{
    if (!(length > 0) || !(youngs_modulus > 0) || !(effective_diameter > 0))
        throw ConfigError("file model needs positive length, modulus and diameter");
}

FileModel FileModel::preset(const std::string& name)
{
    FileModel f;
    if (name == "SX" || name == "S1" || name == "S2" || name == "F1" || name == "F2" || name == "F3" || name == "default")
        f.length = 21.0;
    else
        throw ConfigError("unknown file preset '" + name + "'");
    return f;
}

double leverage_length(double f_radial, double tau_radial, const FileModel& file, double threshold)
{
    const double f = std::abs(f_radial);
    if (f < threshold)
        return 0.0;
    return std::clamp(std::abs(tau_radial) / f, 0.0, file.length);
}

double tip_deflection(double f_radial, double l_a, const FileModel& file)
{
    const double l = file.length;
    return f_radial * l_a * l_a * (3.0 * l - l_a) / (6.0 * file.flexural_rigidity());
}

Wrench6 flexibility_wrench(const Wrench6& wrench_F, const FileModel& file, const FlexGains& k_f, double threshold)
{
    Wrench6 out;
    out.frame = Frame::F;
    const double fx = wrench_F.force.x(), fy = wrench_F.force.y();
    if (std::abs(fx) >= threshold) {
        double la = leverage_length(fx, wrench_F.torque.y(), file, threshold);
        out.force.x() = k_f.x * tip_deflection(fx, la, file);
    }
    if (std::abs(fy) >= threshold) {
        double la = leverage_length(fy, wrench_F.torque.x(), file, threshold);
        out.force.y() = k_f.y * tip_deflection(fy, la, file);
    }
    return out;
}

}  // namespace endo
