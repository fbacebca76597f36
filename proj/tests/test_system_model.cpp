#include "safety/scenarios.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace safety;

namespace {

BarrierFunction cubic_barrier() {
    return BarrierFunction([](const Vec& x) { return -x(0) * x(0) * x(0); },
                           [](const Vec& x) { return RowVec::Constant(1, -3.0 * x(0) * x(0)); },
                           [](const Vec& x) { return mat1(-6.0 * x(0)); });
}

}  // namespace

TEST_CASE("Lie data on the log barrier example at the origin") {
    const StochSpec s = make_log_barrier_example(2.0, false, 1.0);
    const LieData ld = lie_data(s.sys, s.bf, vec1(0.0));
    CHECK(ld.h_val == 0.0);
    CHECK(ld.Lfh == 0.0);
    CHECK(ld.Lg1h(0) == doctest::Approx(-1.0));
    CHECK(ld.Lg2h(0) == doctest::Approx(-1.0));
    CHECK(ld.trace_term == doctest::Approx(-0.5));
}

TEST_CASE("zero disturbance field gives zero disturbance terms") {
    const ControlAffineSystem sys = scalar_system({});
    const LieData ld = lie_data(sys, cubic_barrier(), vec1(0.7));
    CHECK(ld.Lg1h.size() == 0);
    CHECK(ld.trace_term == 0.0);
    CHECK(ld.frob_term == 0.0);
}

TEST_CASE("Frobenius term on the cubic barrier example") {
    const ControlAffineSystem sys = scalar_system([](const Vec& x) { return mat1(1.0 + x(0) * x(0)); });
    CHECK(lie_data(sys, cubic_barrier(), vec1(1.0)).frob_term == doctest::Approx(24.0));
}

TEST_CASE("gradient check examples") {
    CHECK(check_gradient(minus_x(), vec1(3.7)) <= 1e-8);
    CHECK(check_gradient(make_log_barrier_example(2.0, false, 1.0).bf, vec1(0.0)) <= 1e-5);
    CHECK(check_gradient(cubic_barrier(), vec1(2.0)) <= 1e-5);
}

TEST_CASE("finite differences reproduce analytic derivatives in three dimensions") {
    const BarrierFunction a = test_util::quadratic_barrier(true), n = test_util::quadratic_barrier(false);
    CHECK_FALSE(n.has_analytic_gradient());
    for (int i = 0; i < 50; ++i) {
        const Vec x = test_util::uniform_vec(3, -2.0, 2.0);
        CHECK(check_gradient(a, x) <= 1e-5);
        CHECK((n.gradient(x) - a.gradient(x)).norm() <= 1e-6 * (1 + a.gradient(x).norm()));
        const Mat H = n.hessian(x);
        CHECK((H - a.hessian(x)).norm() <= 1e-4);
        CHECK((H - H.transpose()).norm() <= 1e-10);
    }
}

TEST_CASE("Lie data invariants on a multi-input system") {
    const ControlAffineSystem sys = test_util::planar_system();
    const BarrierFunction bf = test_util::quadratic_barrier(true);
    for (int i = 0; i < 100; ++i) {
        const Vec x = test_util::uniform_vec(3, -2.0, 2.0);
        const LieData ld = lie_data(sys, bf, x);
        const LieData again = lie_data(sys, bf, x);
        CHECK(ld.frob_term >= 0.0);
        CHECK(std::abs(ld.frob_term * ld.frob_term - (ld.curvature.transpose() * ld.curvature).trace()) <= 1e-10);
        CHECK(ld.trace_term == again.trace_term);
        CHECK(ld.Lfh == again.Lfh);
        CHECK(ld.Lg2h == again.Lg2h);
        // independent recomputation
        const RowVec g = bf.gradient(x);
        CHECK(ld.Lfh == doctest::Approx(g.dot(sys.f(x))));
        CHECK((ld.Lg2h - g * sys.g2(x)).norm() <= 1e-12);
        const Mat c = sys.g1(x).transpose() * bf.hessian(x) * sys.g1(x);
        CHECK(ld.trace_term == doctest::Approx(0.5 * c.trace()));
        const Vec u = test_util::uniform_vec(2, -1.0, 1.0);
        CHECK(ld.drift_with(u) == doctest::Approx(g.dot(sys.f(x) + sys.g2(x) * u)));
    }
}

TEST_CASE("reciprocal barrier gradient matches the chain rule") {
    auto B = [](const Vec& x) { return 1.0 / (1.0 - x.squaredNorm()); };
    const BarrierFunction hB([B](const Vec& x) { return 1.0 / B(x); });
    for (int i = 0; i < 30; ++i) {
        const Vec x = test_util::uniform_vec(2, -0.6, 0.6);
        const RowVec gB = 2.0 * x.transpose() / std::pow(1.0 - x.squaredNorm(), 2);
        CHECK((hB.gradient(x) + gB / (B(x) * B(x))).norm() <= 1e-6);
    }
}

TEST_CASE("model errors") {
    CHECK_THROWS(BarrierFunction([](const Vec&) { return 0.0; }, {}, {}, 0.0, 1.0));
    const ControlAffineSystem sys = scalar_system({});
    CHECK_THROWS_AS(lie_data(sys, minus_x(), vec1(std::nan(""))), DomainError);
    CHECK_THROWS(lie_data(sys, minus_x(), Vec::Zero(2)));
    ControlAffineSystem bad = sys;
    bad.g2 = [](const Vec&) { return Mat::Zero(2, 1); };
    CHECK_THROWS(lie_data(bad, minus_x(), vec1(0.0)));
}
