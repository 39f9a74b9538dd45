#include "endo/control.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <vector>

using namespace endo;
using endo::test::long_division;
using endo::test::run_filter;

namespace {

Wrench6 axis_wrench(int axis, double v)
{
    Vec6 w = Vec6::Zero();
    w(axis) = v;
    return Wrench6::from_vec(w, Frame::F);
}

}  // namespace

TEST_CASE("Table II defaults")
{
    const ControllerParams p = ControllerParams::table2();
    CHECK(p.kp(0) == 5.0);
    CHECK(p.ka(2) == 1.6);
    CHECK(p.ka(5) == 0.0);
    CHECK(p.divider() == 5);
    CHECK_NOTHROW(p.validate());
    ControllerParams bad = p;
    bad.outer_period = 0.033;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("impulse response equals long division of the transfer function")
{
    for (bool squared : {false, true}) {
        const double m = 0.4, b = 40, k = 1.6, T = 0.05;
        AdmittanceFilter f;
        f.c = admittance_coefficients(m, b, k, T, squared);
        std::vector<double> impulse(10, 0.0);
        impulse[0] = 1.0;
        const auto y = run_filter(f, impulse);
        const auto q = long_division(m, b, k, T, squared, 10);
        for (int n = 0; n < 10; ++n)
            CHECK(std::abs(y[n] - q[n]) <= 1e-12);
    }
}

TEST_CASE("admittance filter is linear and time invariant")
{
    std::mt19937_64 rng(31);
    AdmittanceFilter f;
    f.c = admittance_coefficients(0.001157, 0.1157, 1.6, 0.05, false);
    std::vector<double> u(60);
    for (auto& v : u)
        v = endo::test::uniform(rng, -1, 1);
    const auto y = run_filter(f, u);

    std::vector<double> scaled(u);
    for (auto& v : scaled)
        v *= -3.5;
    const auto ys = run_filter(f, scaled);
    std::vector<double> delayed(7, 0.0);
    delayed.insert(delayed.end(), u.begin(), u.end());
    const auto yd = run_filter(f, delayed);
    for (std::size_t i = 0; i < u.size(); ++i) {
        CHECK(std::abs(ys[i] + 3.5 * y[i]) <= 1e-12 * (1 + std::abs(ys[i])));
        CHECK(std::abs(yd[i + 7] - y[i]) <= 1e-12 * (1 + std::abs(y[i])));
    }
}

TEST_CASE("constant force produces a ramp of slope k_a f / b_a")
{
    const double m = 0.4, b = 40, k = 1.6, T = 0.05, f = 0.4;
    // Printed numerator: the slope is k f / b per outer step.
    AdmittanceFilter printed;
    printed.c = admittance_coefficients(m, b, k, T, false);
    std::vector<double> y = run_filter(printed, std::vector<double>(200, f));
    CHECK(y[50] - y[49] == doctest::Approx(k * f / b).epsilon(0.02));
    CHECK(y[199] - y[198] == doctest::Approx(k * f / b).epsilon(1e-9));

    // T^2 numerator: the slope is k f / b per second.
    AdmittanceFilter exact;
    exact.c = admittance_coefficients(m, b, k, T, true);
    y = run_filter(exact, std::vector<double>(200, f));
    CHECK((y[199] - y[198]) / T == doctest::Approx(0.016).epsilon(1e-9));
    CHECK((y[50] - y[49]) / T == doctest::Approx(0.016).epsilon(0.02));
}

TEST_CASE("admittance_step units and zero input")
{
    ControllerParams p = ControllerParams::table2();
    AdmittanceState s = AdmittanceState::make(p);
    for (int i = 0; i < 100; ++i)
        CHECK(admittance_step(s, p, Wrench6{}).norm() == 0.0);

    // With mm/N units the filter output is read directly as mm.
    p.units = AdmittanceUnits::mm_n;
    p.tustin_exact = false;
    s = AdmittanceState::make(p);
    AdmittanceFilter ref;
    ref.c = admittance_coefficients(0.4, 40, 1.6, 0.05, false);
    for (int i = 0; i < 20; ++i)
        CHECK(admittance_step(s, p, axis_wrench(2, 0.4))(2) == doctest::Approx(ref.step(0.4)));

    // In SI the linear output is metres, reported in mm.
    p.units = AdmittanceUnits::si;
    p.tustin_exact = true;
    s = AdmittanceState::make(p);
    AdmittanceFilter si;
    si.c = admittance_coefficients(0.4, 40, 1.6, 0.05, true);
    for (int i = 0; i < 20; ++i)
        CHECK(admittance_step(s, p, axis_wrench(2, 0.4))(2) == doctest::Approx(1e3 * si.step(0.4)));
    CHECK(admittance_units_from_string("mm_n") == AdmittanceUnits::mm_n);
    CHECK_THROWS_AS(admittance_units_from_string("furlong"), ConfigError);
}

TEST_CASE("theta axis never moves and the clamp bounds p_adm")
{
    ControllerParams p = ControllerParams::table2();
    AdmittanceState s = AdmittanceState::make(p);
    for (int i = 0; i < 200; ++i) {
        const Vec6 out = admittance_step(s, p, Wrench6::from_vec(Vec6::Constant(5.0), Frame::F));
        CHECK(out(5) == 0.0);
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(out(a)) <= p.clamp_linear);
        for (int a = 3; a < 6; ++a)
            CHECK(std::abs(out(a)) <= p.clamp_angular);
    }
    CHECK(s.clamp_events > 0);
    s.reset();
    CHECK(s.p_adm.norm() == 0.0);
}

TEST_CASE("pd_step examples")
{
    const ControllerParams p = ControllerParams::table2();
    CHECK(pd_step(p, Vec6::Zero(), Vec6::Zero(), 0.01).norm() == 0.0);
    Vec6 e = Vec6::Zero();
    e(0) = 1.0;
    CHECK(pd_step(p, e, e, 0.01)(0) == doctest::Approx(5.0));
    CHECK(pd_step(p, e, Vec6::Zero(), 0.01)(0) == doctest::Approx(5.0 + 0.0015 * 1.0 / 0.01));
    CHECK_THROWS_AS(pd_step(p, e, e, 0.0), ConfigError);
}

TEST_CASE("compose_wrench_error")
{
    const FileModel file;
    Wrench6 xi_d;
    xi_d.force.z() = 0.4;
    CHECK((compose_wrench_error(xi_d, Wrench6{}, file, {0.8, 0.8}).vec() - xi_d.vec()).norm() == 0.0);

    Wrench6 meas;
    meas.force = Vec3(0.5, 0, 0.3);
    meas.torque = Vec3(0, 5, 0);
    const Wrench6 plain = compose_wrench_error(xi_d, meas, file, {0.0, 0.0});
    CHECK((plain.vec() - (xi_d - meas).vec()).norm() == 0.0);
    const Wrench6 comp = compose_wrench_error(xi_d, meas, file, {0.8, 0.8});
    CHECK(std::abs(comp.force.x()) > std::abs(plain.force.x()));
    CHECK(comp.force.x() == doctest::Approx(plain.force.x() - 0.8 * tip_deflection(0.5, 10, file)));
}

TEST_CASE("hybrid controller at equilibrium commands nothing")
{
    HybridController c(ControllerParams::table2());
    const Pose6 p{1, 2, 3, 4, 5, 6};
    for (int i = 0; i < 50; ++i)
        CHECK(c.step(ControlMode::HybridPositionForce, p, p, Wrench6{}, Wrench6{}).norm() == 0.0);
}

TEST_CASE("zero wrench reduces the hybrid loop to pure PD bitwise")
{
    const ControllerParams params = ControllerParams::table2();
    HybridController c(params);
    std::mt19937_64 rng(41);
    Vec6 prev = Vec6::Zero();
    Wrench6 w;
    w.force = Vec3(0.1, -0.2, 0.3);
    for (int i = 0; i < 100; ++i) {
        const Pose6 pd = endo::test::random_pose(rng, 5, 20), ps = endo::test::random_pose(rng, 5, 20);
        const Vec6 e = pose_difference(pd, ps);
        const Vec6 expected = pd_step(params, e, prev, params.inner_period);
        prev = e;
        const Vec6 got = c.step(ControlMode::HybridPositionForce, pd, ps, w, w);
        for (int a = 0; a < 6; ++a)
            CHECK(got(a) == expected(a));
    }
}

TEST_CASE("p_adm is held between outer ticks")
{
    HybridController c(ControllerParams::table2());
    Wrench6 xi_d;
    xi_d.force.z() = 0.4;
    Vec6 held;
    for (int i = 0; i < 40; ++i) {
        c.step(ControlMode::HybridPositionForce, Pose6{}, Pose6{}, Wrench6{}, xi_d);
        if (i % 5 == 0)
            held = c.adm.p_adm;
        else
            CHECK(c.adm.p_adm == held);
    }
    CHECK(held(2) != 0.0);
}

TEST_CASE("theta wrench never reaches the command while theta error is still tracked")
{
    const ControllerParams params = ControllerParams::table2();
    HybridController a(params), b(params);
    Wrench6 tz;
    tz.torque.z() = 7.0;
    Pose6 pd;
    pd.theta = 2.0;
    for (int i = 0; i < 30; ++i) {
        const Vec6 with = a.step(ControlMode::HybridPositionForce, pd, Pose6{}, tz, Wrench6{});
        const Vec6 without = b.step(ControlMode::HybridPositionForce, pd, Pose6{}, Wrench6{}, Wrench6{});
        CHECK(with(5) == without(5));
        CHECK(with(5) == doctest::Approx(1.5 * 2.0).epsilon(0.1));
    }
}

TEST_CASE("closed loop settles after a patient step")
{
    const ControllerParams params = ControllerParams::table2();
    HybridController c(params);
    Pose6 pd;
    pd.x = 3.0;
    Vec6 ps = Vec6::Zero();
    Vec6 cmd;
    for (int i = 0; i < 800; ++i) {
        cmd = c.step(ControlMode::HybridPositionForce, pd, Pose6::from_vec(ps), Wrench6{}, Wrench6{});
        ps += cmd * params.inner_period;
    }
    CHECK(std::abs(ps(0) - 3.0) < 1e-6);
    CHECK(cmd.norm() < 1e-5);
}

TEST_CASE("admittance-only mode differences p_adm into a held velocity")
{
    ControllerParams p = ControllerParams::table2();
    HybridController c(p);
    Wrench6 xi_d;
    xi_d.force.x() = 0.5;
    Vec6 prev_adm = Vec6::Zero(), held = Vec6::Zero();
    for (int i = 0; i < 30; ++i) {
        const Vec6 cmd = c.step(ControlMode::AdmittanceOnly, Pose6{}, Pose6{}, Wrench6{}, xi_d);
        if (i % 5 == 0) {
            held = -(c.adm.p_adm - prev_adm) / p.outer_period;
            prev_adm = c.adm.p_adm;
        }
        CHECK((cmd - held).norm() < 1e-12);
    }
    CHECK(held(0) != 0.0);
    // Switching mode resets the filters.
    c.step(ControlMode::HybridPositionForce, Pose6{}, Pose6{}, Wrench6{}, Wrench6{});
    CHECK(c.adm.p_adm.norm() == 0.0);
}
