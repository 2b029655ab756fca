#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polysplat/errors.hpp"
#include "polysplat/raster.hpp"
#include "polysplat/scene_io.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace polysplat;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

// minimal hand-built PLY: header plus packed float32 records
std::string minimal_ply(int count, const std::vector<float>& payload,
                        const std::string& extra_property = "",
                        const std::string& format = "binary_little_endian") {
    std::string h = "ply\nformat " + format + " 1.0\nelement vertex " +
                    std::to_string(count) + "\n";
    const char* names[] = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (const char* n : names) h += std::string("property float ") + n + "\n";
    h += "property float opacity\n";
    for (int i = 0; i < 3; ++i) h += "property float scale_" + std::to_string(i) + "\n";
    for (int i = 0; i < 4; ++i) h += "property float rot_" + std::to_string(i) + "\n";
    if (!extra_property.empty()) h += extra_property + "\n";
    h += "end_header\n";
    std::string body(payload.size() * 4, '\0');
    std::memcpy(body.data(), payload.data(), body.size());
    return h + body;
}

} // namespace

TEST_CASE("ply activations: sigmoid opacity, exp scale, normalized quaternion") {
    // raw opacity 0, raw scale 0, quaternion (2,0,0,0)
    std::vector<float> rec = {1, 2, 3, 0, 0, 0, 0.1f, 0.2f, 0.3f,
                              0.0f, 0, 0, 0, 2.0f, 0, 0, 0};
    auto p = tmp_path("minimal.ply");
    write_file(p, minimal_ply(1, rec));
    SceneFile scene = load_ply(p.string());
    REQUIRE(scene.splats.size() == 1);
    const Splat3D& s = scene.splats[0];
    CHECK(s.opacity == doctest::Approx(0.5));
    CHECK(s.scale.x == doctest::Approx(1.0));
    CHECK(s.scale.y == doctest::Approx(1.0));
    CHECK(s.scale.z == doctest::Approx(1.0));
    CHECK(s.rotation.w == doctest::Approx(1.0)); // normalized
    CHECK(scene.sh_degree == 0);                 // no f_rest properties
    std::filesystem::remove(p);
}

TEST_CASE("ply skips unknown properties by stride") {
    std::vector<float> rec = {1, 2, 3, 0, 0, 0, 0.1f, 0.2f, 0.3f,
                              0.0f, 0, 0, 0, 1.0f, 0, 0, 0, 42.0f};
    auto p = tmp_path("extra.ply");
    write_file(p, minimal_ply(1, rec, "property float mystery"));
    SceneFile scene = load_ply(p.string());
    CHECK(scene.splats.size() == 1);
    CHECK(scene.splats[0].mean.x == doctest::Approx(1.0));
    std::filesystem::remove(p);
}

TEST_CASE("ply loader raises typed errors") {
    auto p = tmp_path("bad.ply");

    write_file(p, "not a ply at all");
    CHECK_THROWS_AS((void)load_ply(p.string()), MalformedHeader);

    write_file(p, minimal_ply(1, std::vector<float>(17, 0.f), "", "ascii"));
    CHECK_THROWS_AS((void)load_ply(p.string()), UnsupportedFormat);

    write_file(p, minimal_ply(1, std::vector<float>(17, 0.f), "", "binary_big_endian"));
    CHECK_THROWS_AS((void)load_ply(p.string()), UnsupportedFormat);

    // missing opacity: build a header without it
    std::string h = "ply\nformat binary_little_endian 1.0\nelement vertex 0\n";
    h += "property float x\nproperty float y\nproperty float z\nend_header\n";
    write_file(p, h);
    CHECK_THROWS_AS((void)load_ply(p.string()), MissingProperty);

    // truncated body: claims 2 records, carries 1
    write_file(p, minimal_ply(2, std::vector<float>(17, 0.f)));
    CHECK_THROWS_AS((void)load_ply(p.string()), TruncatedData);

    CHECK_THROWS_AS((void)load_ply("/nonexistent/x.ply"), IoError);
    std::filesystem::remove(p);
}

TEST_CASE("ply round trip preserves a synthetic scene") {
    SceneFile scene = generate_synthetic_scene(SyntheticKind::Random, 42);
    auto p = tmp_path("roundtrip.ply");
    write_ply(scene, p.string());
    SceneFile back = load_ply(p.string());
    REQUIRE(back.splats.size() == scene.splats.size());
    CHECK(back.sh_degree == 3);
    for (std::size_t i = 0; i < scene.splats.size(); i += 97) {
        const Splat3D& a = scene.splats[i];
        const Splat3D& b = back.splats[i];
        CHECK(std::abs(a.mean.x - b.mean.x) < 1e-6);
        CHECK(std::abs(a.opacity - b.opacity) < 1e-6);
        CHECK(std::abs(a.scale.x - b.scale.x) / a.scale.x < 1e-5);
        CHECK(std::abs(a.rotation.w - b.rotation.w) < 1e-6);
        CHECK(std::abs(a.rotation.z - b.rotation.z) < 1e-6);
        for (int j = 0; j < 16; ++j) CHECK(std::abs(a.sh[j].y - b.sh[j].y) < 1e-6);
    }
    std::filesystem::remove(p);
}

TEST_CASE("camera json round trip and validation") {
    std::vector<Camera> cams = orbit_cameras(4, 640, 480);
    auto p = tmp_path("cams.json");
    write_cameras(cams, p.string());
    std::vector<Camera> back = load_cameras(p.string());
    REQUIRE(back.size() == cams.size());
    for (std::size_t i = 0; i < cams.size(); ++i) {
        CHECK(back[i].id == cams[i].id);
        CHECK(back[i].width == cams[i].width);
        CHECK(back[i].fx == cams[i].fx);
        for (int k = 0; k < 9; ++k) CHECK(back[i].rotation.m[k] == cams[i].rotation.m[k]);
        CHECK(back[i].translation.z == cams[i].translation.z);
    }
    std::filesystem::remove(p);

    write_file(p, "{ not json");
    CHECK_THROWS_AS((void)load_cameras(p.string()), ParseError);

    // reflection: determinant -1
    write_file(p, R"([{"id":0,"width":8,"height":8,"fx":1,"fy":1,"cx":4,"cy":4,
      "rotation":[-1,0,0, 0,1,0, 0,0,1],"translation":[0,0,0]}])");
    CHECK_THROWS_AS((void)load_cameras(p.string()), NonOrthonormalRotation);
    std::filesystem::remove(p);
}

TEST_CASE("identity camera looks down +z from the origin") {
    auto p = tmp_path("idcam.json");
    write_file(p, R"([{"id":7,"width":32,"height":32,"fx":10,"fy":10,"cx":16,"cy":16,
      "rotation":[1,0,0, 0,1,0, 0,0,1],"translation":[0,0,0]}])");
    std::vector<Camera> cams = load_cameras(p.string());
    REQUIRE(cams.size() == 1);
    Vec3 pos = cams[0].position();
    CHECK(pos.norm() == doctest::Approx(0.0));
    Splat3D s;
    s.mean = {0, 0, 2};
    s.scale = {0.1, 0.1, 0.1};
    auto proj = project_splat(s, cams[0], 0.3);
    REQUIRE(proj.has_value());
    CHECK(proj->depth == doctest::Approx(2.0));
    std::filesystem::remove(p);
}

TEST_CASE("png quantization and round trip") {
    Framebuffer fb(3, 2);
    // pixel 0: zero rgb, transmittance 1 -> white background shows through
    // pixel 1: rgb 0.5, transmittance 0 -> exactly 0.5
    std::size_t i = 1;
    fb.rgb[3 * i + 0] = fb.rgb[3 * i + 1] = fb.rgb[3 * i + 2] = 0.5;
    fb.transmittance[i] = 0.0;
    Image8 img = quantize_framebuffer(fb, {1, 1, 1});
    CHECK(img.rgb[0] == 255);
    CHECK(img.rgb[1] == 255);
    CHECK(img.rgb[2] == 255);
    CHECK(img.rgb[3] == 128); // round half up
    CHECK(img.rgb[4] == 128);

    auto p = tmp_path("fb.png");
    write_png(fb, p.string(), {1, 1, 1});
    Image8 back = read_png(p.string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    CHECK(back.rgb == img.rgb);
    std::filesystem::remove(p);
}

TEST_CASE("synthetic scenes are deterministic and valid") {
    SceneFile a = generate_synthetic_scene(SyntheticKind::Grid, 1);
    SceneFile b = generate_synthetic_scene(SyntheticKind::Grid, 1);
    REQUIRE(a.splats.size() == b.splats.size());
    CHECK(a.splats.size() == 100);
    for (std::size_t i = 0; i < a.splats.size(); ++i) {
        CHECK(a.splats[i].mean.x == b.splats[i].mean.x);
        CHECK(a.splats[i].opacity == b.splats[i].opacity);
    }

    SceneFile r1 = generate_synthetic_scene(SyntheticKind::Random, 9);
    SceneFile r2 = generate_synthetic_scene(SyntheticKind::Random, 9);
    CHECK(r1.splats.size() == 5000);
    CHECK(r1.splats[4999].mean.z == r2.splats[4999].mean.z);
    for (std::size_t i = 0; i < r1.splats.size(); i += 131) {
        const Splat3D& s = r1.splats[i];
        CHECK(s.scale.x > 0.0);
        CHECK(s.scale.y > 0.0);
        CHECK(s.scale.z > 0.0);
        CHECK(std::abs(s.rotation.norm() - 1.0) < 1e-6);
        CHECK(s.opacity >= 0.05);
        CHECK(s.opacity <= 1.0);
    }
}

TEST_CASE("overexposed sky has colors far above one") {
    SceneFile sky = generate_synthetic_scene(SyntheticKind::OverexposedSky, 5);
    int bright = 0;
    for (const Splat3D& s : sky.splats) {
        Vec3 c = eval_sh_color(s.sh, Vec3{0, 0, 1}, 0);
        if (c.x > 2.0) ++bright;
    }
    CHECK(bright >= 40);
}
