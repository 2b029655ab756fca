#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polysplat/errors.hpp"
#include "polysplat/projection.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

using namespace polysplat;

namespace {

Camera unit_camera() {
    Camera cam;
    cam.width = 100;
    cam.height = 100;
    cam.fx = cam.fy = 1.0;
    cam.cx = cam.cy = 0.0;
    return cam;
}

Splat3D basic_splat() {
    Splat3D s;
    s.mean = {0.0, 0.0, 1.0};
    s.scale = {1.0, 1.0, 1.0};
    s.opacity = 1.0;
    return s;
}

KernelSpec nominal_poly1() {
    return make_polynomial_kernel(KernelKind::PolynomialRelu, {0.773, -0.176});
}

} // namespace

TEST_CASE("covariance from scale and rotation") {
    Mat3 c = build_covariance3d({1, 1, 1}, Quat{});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(c(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));

    c = build_covariance3d({2, 1, 1}, Quat{});
    CHECK(c(0, 0) == doctest::Approx(4.0));
    CHECK(c(1, 1) == doctest::Approx(1.0));
    CHECK(c(2, 2) == doctest::Approx(1.0));
}

TEST_CASE("covariance eigenvalues are the squared scales") {
    oracles::Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        Vec3 scale{rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)};
        Quat q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (q.norm() < 1e-3) continue;
        Mat3 c = build_covariance3d(scale, q);

        Eigen::Matrix3d m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = c(i, j);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
        std::array<double, 3> expect{scale.x * scale.x, scale.y * scale.y, scale.z * scale.z};
        std::sort(expect.begin(), expect.end());
        for (int i = 0; i < 3; ++i) CHECK(std::abs(es.eigenvalues()[i] - expect[i]) < 1e-9);
    }
}

TEST_CASE("on-axis unit splat projects to the identity covariance") {
    auto p = project_splat(basic_splat(), unit_camera(), 0.0);
    REQUIRE(p.has_value());
    CHECK(p->cov_aa.xx == doctest::Approx(1.0));
    CHECK(p->cov_aa.xy == doctest::Approx(0.0));
    CHECK(p->cov_aa.yy == doctest::Approx(1.0));
    CHECK(p->depth == doctest::Approx(1.0));
    CHECK(p->mean2d.x == doctest::Approx(0.0));
    CHECK(p->opacity_eff == doctest::Approx(1.0));
}

TEST_CASE("anti-aliasing dilation and the normalization ratio") {
    auto p = project_splat(basic_splat(), unit_camera(), 0.3);
    REQUIRE(p.has_value());
    // axes dilate to sqrt(s_i^2 + v)
    CHECK(p->cov_aa.xx == doctest::Approx(1.3));
    CHECK(p->cov_aa.yy == doctest::Approx(1.3));
    CHECK(p->opacity_eff == doctest::Approx(std::sqrt(1.0 / 1.69)));

    // ratio approaches 1 as the dilation vanishes
    auto tiny = project_splat(basic_splat(), unit_camera(), 1e-8);
    REQUIRE(tiny.has_value());
    CHECK(std::abs(tiny->opacity_eff - 1.0) < 1e-6);
}

TEST_CASE("near-plane culling") {
    Splat3D s = basic_splat();
    s.mean.z = 0.1;
    CHECK(!project_splat(s, unit_camera(), 0.3).has_value());
    s.mean.z = 0.2;
    CHECK(!project_splat(s, unit_camera(), 0.3).has_value());
    s.mean.z = 0.21;
    CHECK(project_splat(s, unit_camera(), 0.3).has_value());
}

TEST_CASE("degenerate covariance is rejected") {
    Splat3D s = basic_splat();
    s.scale = {1e-9, 1e-9, 1e-9};
    CHECK_THROWS_AS((void)project_splat(s, unit_camera(), 0.0), DegenerateCovariance);
}

TEST_CASE("projection scales with the focal length") {
    Splat3D s = basic_splat();
    s.mean = {0.3, -0.2, 2.0};
    s.scale = {0.5, 0.25, 0.125};
    Camera cam = unit_camera();
    cam.fx = cam.fy = 100.0;
    auto a = project_splat(s, cam, 0.0);
    cam.fx = cam.fy = 200.0;
    auto b = project_splat(s, cam, 0.0);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(b->mean2d.x == doctest::Approx(2.0 * a->mean2d.x));
    CHECK(b->mean2d.y == doctest::Approx(2.0 * a->mean2d.y));
    CHECK(b->cov_aa.xx == doctest::Approx(4.0 * a->cov_aa.xx));
    CHECK(b->cov_aa.xy == doctest::Approx(4.0 * a->cov_aa.xy));
    CHECK(b->cov_aa.yy == doctest::Approx(4.0 * a->cov_aa.yy));
}

TEST_CASE("conic inverts the dilated covariance") {
    oracles::Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        Splat3D s;
        s.mean = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 4.0)};
        s.scale = {rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
        s.rotation = Quat{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1)}
                         .normalized();
        s.opacity = rng.uniform(0.1, 1.0);
        Camera cam = unit_camera();
        cam.fx = cam.fy = 50.0;
        auto p = project_splat(s, cam, 0.3);
        REQUIRE(p.has_value());
        const Sym2& c = p->conic;
        const Sym2& m = p->cov_aa;
        CHECK(std::abs(c.xx * m.xx + c.xy * m.xy - 1.0) < 1e-9);
        CHECK(std::abs(c.xy * m.xx + c.yy * m.xy - 0.0) < 1e-9);
        CHECK(std::abs(c.xy * m.xy + c.yy * m.yy - 1.0) < 1e-9);
        CHECK(p->opacity_eff <= s.opacity);
        CHECK(p->conic.positive_definite());
    }
}

// ------------------------------------------------------------------- sh

namespace {

// Textbook real spherical harmonics (cartesian forms, constants computed in
// place) with the Condon-Shortley phase (-1)^m the splatting tables bake in.
double sh_oracle_channel(const std::array<double, 16>& c, double x, double y, double z) {
    const double pi = std::numbers::pi;
    double b[16];
    b[0] = 0.5 * std::sqrt(1.0 / pi);
    b[1] = -std::sqrt(3.0 / (4.0 * pi)) * y;
    b[2] = std::sqrt(3.0 / (4.0 * pi)) * z;
    b[3] = -std::sqrt(3.0 / (4.0 * pi)) * x;
    b[4] = 0.5 * std::sqrt(15.0 / pi) * x * y;
    b[5] = -0.5 * std::sqrt(15.0 / pi) * y * z;
    b[6] = 0.25 * std::sqrt(5.0 / pi) * (3.0 * z * z - 1.0);
    b[7] = -0.5 * std::sqrt(15.0 / pi) * x * z;
    b[8] = 0.25 * std::sqrt(15.0 / pi) * (x * x - y * y);
    b[9] = -0.25 * std::sqrt(35.0 / (2.0 * pi)) * y * (3.0 * x * x - y * y);
    b[10] = 0.5 * std::sqrt(105.0 / pi) * x * y * z;
    b[11] = -0.25 * std::sqrt(21.0 / (2.0 * pi)) * y * (5.0 * z * z - 1.0);
    b[12] = 0.25 * std::sqrt(7.0 / pi) * (5.0 * z * z * z - 3.0 * z);
    b[13] = -0.25 * std::sqrt(21.0 / (2.0 * pi)) * x * (5.0 * z * z - 1.0);
    b[14] = 0.25 * std::sqrt(105.0 / pi) * z * (x * x - y * y);
    b[15] = -0.25 * std::sqrt(35.0 / (2.0 * pi)) * x * (x * x - y * y);
    double v = 0.0;
    for (int i = 0; i < 16; ++i) v += c[i] * b[i];
    return std::max(v + 0.5, 0.0);
}

} // namespace

TEST_CASE("sh color basics") {
    std::array<Vec3, 16> sh{};
    Vec3 c = eval_sh_color(sh, Vec3{0, 0, 1}, 3);
    CHECK(c.x == doctest::Approx(0.5));
    CHECK(c.y == doctest::Approx(0.5));
    CHECK(c.z == doctest::Approx(0.5));

    sh[0] = {1, 1, 1};
    c = eval_sh_color(sh, Vec3{0, 0, 1}, 0);
    CHECK(c.x == doctest::Approx(0.5 + 0.28209479));
    // values above one are allowed
    sh[0] = {10, 10, 10};
    c = eval_sh_color(sh, Vec3{0, 0, 1}, 0);
    CHECK(c.x > 1.0);
    // but never below zero
    sh[0] = {-10, -10, -10};
    c = eval_sh_color(sh, Vec3{0, 0, 1}, 0);
    CHECK(c.x == 0.0);
}

TEST_CASE("degree-3 sh matches the textbook oracle") {
    oracles::Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        std::array<Vec3, 16> sh;
        std::array<double, 16> cr, cg, cb;
        for (int i = 0; i < 16; ++i) {
            sh[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            cr[i] = sh[i].x;
            cg[i] = sh[i].y;
            cb[i] = sh[i].z;
        }
        Vec3 d{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (d.norm() < 1e-3) continue;
        d = d.normalized();
        Vec3 got = eval_sh_color(sh, d, 3);
        CHECK(std::abs(got.x - sh_oracle_channel(cr, d.x, d.y, d.z)) < 1e-6);
        CHECK(std::abs(got.y - sh_oracle_channel(cg, d.x, d.y, d.z)) < 1e-6);
        CHECK(std::abs(got.z - sh_oracle_channel(cb, d.x, d.y, d.z)) < 1e-6);
    }
}

// --------------------------------------------------- normalization

TEST_CASE("normalization integral reference values") {
    KernelSpec expk = make_exponential_kernel();
    CHECK(normalization_integral(expk, Sym2{1, 0, 1}) ==
          doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-4));
    CHECK(normalization_integral(nominal_poly1(), Sym2{1, 0, 1}) ==
          doctest::Approx(5.333).epsilon(0.01 / 5.333));
}

TEST_CASE("normalization factor scales with sqrt det for any kernel") {
    oracles::Rng rng(47);
    KernelSpec kernels[3] = {make_exponential_kernel(), nominal_poly1(),
                             make_polynomial_kernel(KernelKind::PolynomialPiecewise,
                                                    {0.773, -0.176})};
    for (const KernelSpec& k : kernels) {
        double base = normalization_integral(k, Sym2{1, 0, 1});
        for (int trial = 0; trial < 25; ++trial) {
            double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
            double c = rng.uniform(-2, 2), d = rng.uniform(-2, 2);
            Sym2 sigma{a * a + b * b + 0.05, a * c + b * d, c * c + d * d + 0.05};
            double n = normalization_integral(k, sigma);
            double ratio = n / std::sqrt(sigma.det());
            CHECK(std::abs(ratio - base) / base < 1e-3);
        }
    }
}

TEST_CASE("camera validation") {
    Camera cam = unit_camera();
    CHECK_NOTHROW(cam.validate());
    cam.rotation(0, 0) = -1.0; // reflection: determinant -1
    CHECK_THROWS_AS(cam.validate(), NonOrthonormalRotation);
    cam.rotation(0, 0) = 0.9; // not orthonormal
    CHECK_THROWS_AS(cam.validate(), NonOrthonormalRotation);
}
