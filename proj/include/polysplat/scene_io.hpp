#pragma once

#include "polysplat/projection.hpp"
#include "polysplat/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace polysplat {

struct SceneFile {
    std::vector<Splat3D> splats;
    std::string source_path;
    int sh_degree = 0;
};

// Standard 3DGS checkpoint: binary little-endian PLY with float32 vertex
// properties x,y,z,nx,ny,nz,f_dc_0..2,f_rest_0..44,opacity,scale_0..2,
// rot_0..3. Activations applied on load: sigmoid(opacity), exp(scale),
// normalized (w,x,y,z) quaternion. Unknown properties are skipped by stride.
SceneFile load_ply(const std::string& path);
void write_ply(const SceneFile& scene, const std::string& path);

// JSON array of {id, width, height, fx, fy, cx, cy, rotation[9] row-major
// world-to-camera, translation[3]}.
std::vector<Camera> load_cameras(const std::string& path);
void write_cameras(const std::vector<Camera>& cams, const std::string& path);

enum class SyntheticKind { Grid, Random, OverexposedSky };

// Deterministic test scenes. Grid: 10x10 isotropic splats in a plane.
// Random: 5000 anisotropic splats in a unit cube, opacities in [0.05, 1].
// OverexposedSky: large low-opacity splats whose SH dc pushes the color to
// about 3, plus a small opaque foreground.
SceneFile generate_synthetic_scene(SyntheticKind kind, std::uint64_t seed);

// Cameras on a ring looking at the origin.
std::vector<Camera> orbit_cameras(int count, int width, int height, double fov_deg = 50.0,
                                  double radius = 2.0, double elevation = 0.3);

// --- png output ---

struct Image8 {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;
};

// Composites remaining transmittance against the background, clamps to [0,1]
// and quantizes to 8 bits (round half up).
Image8 quantize_framebuffer(const Framebuffer& fb, const Vec3& background);

void write_png(const Framebuffer& fb, const std::string& path, const Vec3& background);
void write_png(const Image8& img, const std::string& path);
Image8 read_png(const std::string& path);

} // namespace polysplat
