#include "endo/flexfile.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace endo;
using endo::test::shooting_deflection;

TEST_CASE("file model basics")
{
    const FileModel f;
    CHECK(f.second_moment() == doctest::Approx(kPi * std::pow(0.6, 4) / 64));
    CHECK(f.flexural_rigidity() == doctest::Approx(508.9).epsilon(1e-3));
    for (const char* name : {"SX", "S1", "S2", "F1", "F2", "F3"})
        CHECK(FileModel::preset(name).length == 21.0);
    CHECK_THROWS_AS(FileModel::preset("F9"), ConfigError);
    FileModel bad;
    bad.effective_diameter = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("leverage length examples and range")
{
    const FileModel f;
    CHECK(leverage_length(0.5, 5.0, f) == doctest::Approx(10.0));
    CHECK(leverage_length(0.1, 50.0, f) == doctest::Approx(21.0));
    CHECK(leverage_length(0.01, 5.0, f) == 0.0);
    CHECK(leverage_length(-0.5, -5.0, f) == doctest::Approx(10.0));
    for (double fr : {-2.0, -0.1, 0.04, 0.3, 3.0})
        for (double tau : {-40.0, -1.0, 0.0, 2.0, 100.0}) {
            const double l = leverage_length(fr, tau, f);
            CHECK(l >= 0.0);
            CHECK(l <= f.length);
        }
}

TEST_CASE("end-load deflection matches the closed form")
{
    const FileModel f;
    const double closed = 1.0 * std::pow(21.0, 3) / (3 * f.flexural_rigidity());
    CHECK(closed == doctest::Approx(6.07).epsilon(0.002));
    CHECK(tip_deflection(1.0, 21.0, f) == doctest::Approx(closed).epsilon(0.005));
    CHECK(tip_deflection(0.0, 12.0, f) == 0.0);
}

TEST_CASE("deflection matches the Euler-Bernoulli shooting oracle")
{
    const FileModel file;
    for (double la : {5.0, 10.0, 15.0, 21.0})
        for (double f : {0.1, 0.5, 1.0}) {
            const double oracle = shooting_deflection(f, la, file);
            CHECK(tip_deflection(f, la, file) == doctest::Approx(oracle).epsilon(0.01));
            CHECK(tip_deflection(-f, la, file) == doctest::Approx(-oracle).epsilon(0.01));
            CHECK(tip_deflection(2 * f, la, file) == doctest::Approx(2 * tip_deflection(f, la, file)));
        }
}

TEST_CASE("deflection is monotone in the lever arm")
{
    const FileModel file;
    double prev = 0;
    for (int i = 1; i <= 210; ++i) {
        const double d = tip_deflection(0.4, 0.1 * i, file);
        CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("flexibility wrench")
{
    const FileModel file;
    const FlexGains k{0.8, 0.8};
    CHECK(flexibility_wrench(Wrench6{}, file, k).vec().norm() == 0.0);

    Wrench6 w;
    w.force = Vec3(0.5, 0, 2.0);
    w.torque = Vec3(0, 5.0, 0);
    const Wrench6 flx = flexibility_wrench(w, file, k);
    CHECK(flx.force.x() == doctest::Approx(0.8 * tip_deflection(0.5, 10.0, file)));
    CHECK(flx.force.y() == 0.0);
    CHECK(flx.force.z() == 0.0);
    CHECK(flx.torque.norm() == 0.0);

    // Pairing: y deflection from (f_y, tau_x); sign follows the force.
    Wrench6 wy;
    wy.force = Vec3(0, -0.4, 0);
    wy.torque = Vec3(6.0, 0, 0);
    const Wrench6 fy = flexibility_wrench(wy, file, k);
    CHECK(fy.force.y() == doctest::Approx(-0.8 * tip_deflection(0.4, 15.0, file)));
    CHECK(fy.force.x() == 0.0);

    Wrench6 axial;
    axial.force = Vec3(0.02, -0.02, 3.0);
    axial.torque = Vec3(3, 3, 5);
    CHECK(flexibility_wrench(axial, file, k).vec().norm() == 0.0);
}
