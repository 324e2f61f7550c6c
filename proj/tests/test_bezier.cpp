#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vecsketch/bezier.hpp"
#include "vecsketch/rng.hpp"

using namespace vecsketch;
using namespace vecsketch::bezier;

namespace {

ControlPolygon random_polygon(int degree, Rng& rng) {
    Polyline pts(degree + 1);
    for (Vec2& p : pts) p = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    return ControlPolygon(degree, std::move(pts));
}

const ControlPolygon kCubic(3, {{0, 0}, {0, 1}, {1, 1}, {1, 0}});

}  // namespace

TEST_CASE("bernstein basis values") {
    CHECK(bernstein(0, 5, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bernstein(1, 2, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    // C(4,2) * 0.3^2 * 0.7^2 = 6 * 0.09 * 0.49
    CHECK(bernstein(2, 4, 0.3) == doctest::Approx(0.2646).epsilon(1e-12));

    CHECK_THROWS(bernstein(3, 2, 0.5));
    CHECK_THROWS(bernstein(-1, 2, 0.5));
    CHECK_THROWS(bernstein(0, 2, 1.5));
    CHECK_THROWS(bernstein(0, 2, -0.1));
}

TEST_CASE("partition of unity") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.index(12));
        double t = rng.uniform();
        double sum = 0.0;
        for (int i = 0; i <= n; ++i) sum += bernstein(i, n, t);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("eval_curve basics") {
    ControlPolygon line(1, {{0, 0}, {1, 1}});
    Vec2 mid = eval_curve(line, 0.5);
    CHECK(mid.x == doctest::Approx(0.5));
    CHECK(mid.y == doctest::Approx(0.5));

    Vec2 p = eval_curve(kCubic, 0.5);
    CHECK(p.x == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.y == doctest::Approx(0.75).epsilon(1e-14));

    CHECK_THROWS(eval_curve(line, 1.1));
}

TEST_CASE("endpoint interpolation is exact") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng.index(12));
        ControlPolygon poly = random_polygon(n, rng);
        Vec2 start = eval_curve(poly, 0.0);
        Vec2 end = eval_curve(poly, 1.0);
        CHECK(start.x == poly.points.front().x);
        CHECK(start.y == poly.points.front().y);
        CHECK(end.x == poly.points.back().x);
        CHECK(end.y == poly.points.back().y);
    }
}

TEST_CASE("de casteljau agrees with bernstein form") {
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.index(12));
        ControlPolygon poly = random_polygon(n, rng);
        double t = rng.uniform();
        Vec2 a = eval_curve(poly, t);
        Vec2 b = decasteljau(poly, t).point;
        double scale = std::max({1.0, std::fabs(a.x), std::fabs(a.y)});
        CHECK(std::fabs(a.x - b.x) / scale < 1e-12);
        CHECK(std::fabs(a.y - b.y) / scale < 1e-12);
    }
}

TEST_CASE("de casteljau subdivision") {
    auto sub = decasteljau(kCubic, 0.5);
    CHECK(sub.point.x == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(sub.point.y == doctest::Approx(0.75).epsilon(1e-14));

    // Halves reproduce the original pointwise.
    for (double u = 0.0; u <= 1.0; u += 0.125) {
        Vec2 left = eval_curve(sub.left, u);
        Vec2 orig = eval_curve(kCubic, 0.5 * u);
        CHECK(std::fabs(left.x - orig.x) < 1e-9);
        CHECK(std::fabs(left.y - orig.y) < 1e-9);
        Vec2 right = eval_curve(sub.right, u);
        Vec2 orig2 = eval_curve(kCubic, 0.5 + 0.5 * u);
        CHECK(std::fabs(right.x - orig2.x) < 1e-9);
        CHECK(std::fabs(right.y - orig2.y) < 1e-9);
    }

    ControlPolygon seg(1, {{0, 0}, {2, 0}});
    auto half = decasteljau(seg, 0.5);
    CHECK(half.left.points[1].x == doctest::Approx(1.0));
    CHECK(half.right.points[0].x == doctest::Approx(1.0));

    // Subdividing at t=0 degenerates the left half onto P_0.
    auto at_zero = decasteljau(kCubic, 0.0);
    for (const Vec2& p : at_zero.left.points) {
        CHECK(p.x == doctest::Approx(0.0));
        CHECK(p.y == doctest::Approx(0.0));
    }
}

TEST_CASE("decode_stroke sampling") {
    ControlPolygon line(1, {{0, 0}, {2, 2}});
    Polyline three = decode_stroke(line, 3);
    REQUIRE(three.size() == 3);
    CHECK(three[1].x == doctest::Approx(1.0));

    Polyline two = decode_stroke(kCubic, 2);
    REQUIRE(two.size() == 2);
    CHECK(two.front().x == 0.0);
    CHECK(two.back().x == 1.0);

    Polyline five = decode_stroke(kCubic, 5);
    for (int k = 0; k < 5; ++k) {
        Vec2 expect = eval_curve(kCubic, k / 4.0);
        CHECK(five[k].x == doctest::Approx(expect.x).epsilon(1e-14));
        CHECK(five[k].y == doctest::Approx(expect.y).epsilon(1e-14));
    }

    CHECK_THROWS(decode_stroke(kCubic, 1));
}

TEST_CASE("perturb determinism and degenerate noise") {
    DiagonalNoise zero = DiagonalNoise::isotropic(3, 0.0);
    Rng rng(5);
    ControlPolygon same = perturb(kCubic, zero, rng);
    for (std::size_t i = 0; i < same.points.size(); ++i) {
        CHECK(same.points[i].x == kCubic.points[i].x);
        CHECK(same.points[i].y == kCubic.points[i].y);
    }

    DiagonalNoise noise = DiagonalNoise::isotropic(3, 5.0);
    Rng a(42), b(42);
    ControlPolygon pa = perturb(kCubic, noise, a);
    ControlPolygon pb = perturb(kCubic, noise, b);
    for (std::size_t i = 0; i < pa.points.size(); ++i) {
        CHECK(pa.points[i].x == pb.points[i].x);
        CHECK(pa.points[i].y == pb.points[i].y);
    }

    DiagonalNoise wrong = DiagonalNoise::isotropic(4, 1.0);
    Rng c(1);
    CHECK_THROWS(perturb(kCubic, wrong, c));
}

TEST_CASE("curve noise covariance") {
    DiagonalNoise noise({{2.0, 3.0}, {1.0, 1.0}, {4.0, 0.5}, {2.5, 2.5}});
    Cov2 at_zero = curve_noise_cov(noise, 3, 0.0);
    CHECK(at_zero.var_x == doctest::Approx(2.0));
    CHECK(at_zero.var_y == doctest::Approx(3.0));

    DiagonalNoise iso1 = DiagonalNoise::isotropic(1, 2.0);
    Cov2 mid = curve_noise_cov(iso1, 1, 0.5);
    CHECK(mid.var_x == doctest::Approx(1.0));  // 0.25*2 + 0.25*2

    DiagonalNoise iso3 = DiagonalNoise::isotropic(3, 5.0);
    double sum_sq = 0.0;
    for (int i = 0; i <= 3; ++i) {
        double b = bernstein(i, 3, 0.5);
        sum_sq += b * b;
    }
    Cov2 c3 = curve_noise_cov(iso3, 3, 0.5);
    CHECK(c3.var_x == doctest::Approx(5.0 * sum_sq).epsilon(1e-14));
    CHECK(c3.var_y == doctest::Approx(5.0 * sum_sq).epsilon(1e-14));
}

TEST_CASE("perturbed curves distribute as the propagated gaussian") {
    // Smaller-sample version of the acceptance Monte Carlo check.
    const int samples = 20000;
    DiagonalNoise noise = DiagonalNoise::isotropic(3, 5.0);
    Rng rng(123);
    for (double t : {0.2, 0.5, 0.8}) {
        Vec2 expect_mean = eval_curve(kCubic, t);
        Cov2 expect_cov = curve_noise_cov(noise, 3, t);
        double sx = 0, sy = 0, sxx = 0, syy = 0;
        for (int k = 0; k < samples; ++k) {
            Vec2 p = eval_curve(perturb(kCubic, noise, rng), t);
            sx += p.x;
            sy += p.y;
            sxx += (p.x - expect_mean.x) * (p.x - expect_mean.x);
            syy += (p.y - expect_mean.y) * (p.y - expect_mean.y);
        }
        double mx = sx / samples, my = sy / samples;
        double vx = sxx / (samples - 1), vy = syy / (samples - 1);
        double se_mean = std::sqrt(expect_cov.var_x / samples);
        double se_var = expect_cov.var_x * std::sqrt(2.0 / (samples - 1));
        CHECK(std::fabs(mx - expect_mean.x) < 4 * se_mean);
        CHECK(std::fabs(my - expect_mean.y) < 4 * se_mean);
        CHECK(std::fabs(vx - expect_cov.var_x) < 4 * se_var);
        CHECK(std::fabs(vy - expect_cov.var_y) < 4 * se_var);
    }
}

TEST_CASE("affine invariance") {
    Rng rng(17);
    // A(p) = M p + b
    const double m[4] = {1.4, -0.3, 0.6, 0.9};
    const Vec2 shift{2.0, -1.0};
    auto apply = [&](const Vec2& p) -> Vec2 {
        return {m[0] * p.x + m[1] * p.y + shift.x, m[2] * p.x + m[3] * p.y + shift.y};
    };
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng.index(9));
        ControlPolygon poly = random_polygon(n, rng);
        Polyline mapped;
        for (const Vec2& p : poly.points) mapped.push_back(apply(p));
        ControlPolygon poly2(n, std::move(mapped));
        double t = rng.uniform();
        Vec2 lhs = eval_curve(poly2, t);
        Vec2 rhs = apply(eval_curve(poly, t));
        CHECK(std::fabs(lhs.x - rhs.x) < 1e-10);
        CHECK(std::fabs(lhs.y - rhs.y) < 1e-10);
    }
}

TEST_CASE("degree elevation preserves the curve") {
    Rng rng(19);
    ControlPolygon poly = random_polygon(4, rng);
    ControlPolygon up = elevate_degree(poly);
    REQUIRE(up.degree == 5);
    for (double t = 0.0; t <= 1.0; t += 0.1) {
        Vec2 a = eval_curve(poly, t);
        Vec2 b = eval_curve(up, t);
        CHECK(std::fabs(a.x - b.x) < 1e-12);
        CHECK(std::fabs(a.y - b.y) < 1e-12);
    }
}

TEST_CASE("control polygon validation") {
    CHECK_THROWS(ControlPolygon(2, {{0, 0}, {1, 1}}));
    CHECK_THROWS(ControlPolygon(1, {{0, 0}, {std::nan(""), 1}}));

    auto flat = kCubic.flatten();
    REQUIRE(flat.size() == 8);
    ControlPolygon back = ControlPolygon::unflatten(flat);
    CHECK(back.degree == 3);
    CHECK(back.points[2].x == kCubic.points[2].x);

    CHECK_THROWS(ParamVector({0.0, 0.5, 0.4, 1.0}));
    CHECK_THROWS(ParamVector({0.1, 0.5, 1.0}));
    CHECK_NOTHROW(ParamVector({0.0, 0.5, 1.0}));
}
