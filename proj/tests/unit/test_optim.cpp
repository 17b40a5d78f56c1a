#include "smcae/optim.hpp"
#include "smcae/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace smcae;
using namespace smcae::optim;

namespace {

double rosenbrock(const Vector& x, Vector& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

double sphere(const Vector& x, Vector& g) {
    g = 2.0 * x;
    return x.squaredNorm();
}

}  // namespace

TEST_CASE("options validation") {
    LbfgsOptions o;
    CHECK_NOTHROW(o.validate());
    o.memory = 0;
    CHECK_THROWS(o.validate());
    o = {};
    o.line_search.c1 = 0.95;
    CHECK_THROWS(o.validate());
    o = {};
    o.max_iterations = 0;
    CHECK_THROWS(o.validate());
}

TEST_CASE("sphere converges in a few iterations") {
    Vector x0(2);
    x0 << 3, -4;
    const auto r = minimize(sphere, x0, LbfgsOptions{});
    CHECK(r.value <= 1e-12);
    CHECK(r.iterations <= 10);
    CHECK(r.x.norm() < 1e-6);
    REQUIRE(!r.trace.empty());
    CHECK(r.trace.front().iteration == 0);
    CHECK(r.trace.front().value == 25.0);
}

TEST_CASE("rosenbrock") {
    Vector x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions o;
    o.max_iterations = 200;
    o.tolerance = 0.0;  // run until the gradient vanishes or the cap
    const auto r = minimize(rosenbrock, x0, o);
    CHECK(r.value <= 1e-8);
    CHECK(r.iterations <= 200);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("already at the minimum") {
    Vector x0 = Vector::Zero(3);
    const auto r = minimize(sphere, x0, LbfgsOptions{});
    CHECK(r.iterations <= 1);
    CHECK(r.x == x0);
    CHECK(r.status == Status::gradient_small);
}

TEST_CASE("trace is non-increasing and the result never exceeds the start") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        Vector x0(2);
        x0 << rng.uniform(-2, 2), rng.uniform(-1, 3);
        LbfgsOptions o;
        o.max_iterations = 60;
        const auto r = minimize(rosenbrock, x0, o);
        Vector g;
        CHECK(r.value <= rosenbrock(x0, g));
        for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].value <= r.trace[i - 1].value);
    }
}

TEST_CASE("strictly convex quadratics converge within d+1 iterations") {
    for (int d : {2, 4, 7, 10}) {
        Rng rng(static_cast<std::uint64_t>(d));
        Matrix q(d, d);
        for (int i = 0; i < q.size(); ++i) q.data()[i] = rng.uniform(-1, 1);
        const Matrix a = q * q.transpose() + Matrix::Identity(d, d);
        Vector b(d);
        for (int i = 0; i < d; ++i) b[i] = rng.uniform(-1, 1);
        const Vector xstar = a.ldlt().solve(b);
        const double fstar = -0.5 * b.dot(xstar);
        auto fg = [&](const Vector& x, Vector& g) {
            g = a * x - b;
            return 0.5 * x.dot(a * x) - b.dot(x);
        };
        LbfgsOptions o;
        o.memory = 10;
        o.tolerance = 0.0;
        o.gradient_tolerance = 1e-9;
        o.max_iterations = d + 1;
        o.line_search.c2 = 1e-3;  // near-exact line search, as the finite-termination property requires
        const auto r = minimize(fg, Vector::Zero(d), o);
        CAPTURE(d);
        CHECK(r.iterations <= d + 1);
        CHECK((r.x - xstar).norm() <= 1e-7 * std::max(1.0, xstar.norm()));
        CHECK(std::abs(r.value - fstar) <= 1e-12 * std::max(1.0, std::abs(fstar)));
    }
}

TEST_CASE("determinism") {
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto a = minimize(rosenbrock, x0, LbfgsOptions{});
    const auto b = minimize(rosenbrock, x0, LbfgsOptions{});
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].value == b.trace[i].value);
    CHECK(a.x == b.x);
}

TEST_CASE("non-finite objective raises with the last finite iterate") {
    // Finite only at the starting point.
    auto fg = [](const Vector& x, Vector& g) {
        g = Vector::Constant(x.size(), -1.0);
        if (x.norm() > 0.0) return std::numeric_limits<double>::quiet_NaN();
        return 0.0;
    };
    Vector x0 = Vector::Zero(2);
    try {
        (void)minimize(fg, x0, LbfgsOptions{});
        FAIL("expected OptimizationError");
    } catch (const OptimizationError& e) {
        CHECK(e.last_value() == 0.0);
        CHECK(e.last_x() == x0);
    }
    Vector bad(2);
    bad << 1, 1;
    CHECK_THROWS_AS((void)minimize(fg, bad, LbfgsOptions{}), OptimizationError);
}

TEST_CASE("line search backs off from a non-finite region") {
    // Infinite outside the ball of radius 2; the minimum at (1, 1) lies inside.
    auto fg = [](const Vector& x, Vector& g) {
        g = 2.0 * (x - Vector::Ones(2));
        if (x.norm() > 2.0) return std::numeric_limits<double>::infinity();
        return (x - Vector::Ones(2)).squaredNorm();
    };
    Vector x0(2);
    x0 << -1.0, -1.0;
    const auto r = minimize(fg, x0, LbfgsOptions{});
    CHECK(r.value < 1e-10);
}

TEST_CASE("line-search failure returns the best point with a warning") {
    // Gradient points the wrong way, so no step along -g decreases f.
    auto fg = [](const Vector& x, Vector& g) {
        g = -2.0 * x - Vector::Ones(x.size());
        return x.squaredNorm();
    };
    Vector x0(2);
    x0 << 1.0, 1.0;
    const auto r = minimize(fg, x0, LbfgsOptions{});
    CHECK(r.status == Status::line_search_failed);
    CHECK(r.warning());
    CHECK(r.value <= 2.0);
}

TEST_CASE("separate objective and gradient overload") {
    Objective f = [](const Vector& x) { return x.squaredNorm(); };
    Gradient g = [](const Vector& x) { return Vector(2.0 * x); };
    Vector x0(3);
    x0 << 1, 2, 3;
    const auto r = minimize(f, g, x0, LbfgsOptions{});
    CHECK(r.value <= 1e-12);
}

TEST_CASE("finite differences") {
    Vector x(1);
    x << 3.0;
    const Vector d = finite_diff([](const Vector& v) { return v[0] * v[0]; }, x);
    CHECK(std::abs(d[0] - 6.0) <= 1e-8);
    const Vector z = finite_diff([](const Vector&) { return 4.2; }, Vector::Ones(4));
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("check_gradient") {
    Objective f = [](const Vector& x) { return std::sin(x[0]) + x[1] * x[1] * x[0]; };
    Gradient g = [](const Vector& x) {
        Vector out(2);
        out << std::cos(x[0]) + x[1] * x[1], 2 * x[0] * x[1];
        return out;
    };
    Vector x(2);
    x << 0.7, -1.3;
    CHECK(check_gradient(f, g, x) <= 1e-8);

    // Doubled gradient: |2g - g| / (|2g| + |g|) = 1/3 once |g| dominates 1.
    Objective quad = [](const Vector& v) { return 50.0 * v.squaredNorm(); };
    Gradient doubled = [](const Vector& v) { return Vector(200.0 * v); };
    Vector y(2);
    y << 1.0, -2.0;
    CHECK(check_gradient(quad, doubled, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

    Objective zero = [](const Vector&) { return 0.0; };
    Gradient zero_g = [](const Vector& v) { return Vector(Vector::Zero(v.size())); };
    CHECK(check_gradient(zero, zero_g, y) == 0.0);
}
