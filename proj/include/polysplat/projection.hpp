#pragma once

#include "polysplat/geometry.hpp"
#include "polysplat/kernel.hpp"

#include <array>
#include <cstdint>
#include <optional>

namespace polysplat {

// A 3D splat with activated parameters (linear scales, opacity in [0,1]).
struct Splat3D {
    Vec3 mean;
    Vec3 scale;    // positive, world units
    Quat rotation; // unit
    double opacity = 1.0;
    std::array<Vec3, 16> sh{}; // degree <= 3 spherical harmonics, sh[0] = dc
};

// Pinhole camera, world-to-camera extrinsics.
struct Camera {
    int id = 0;
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat3 rotation;
    Vec3 translation;

    Vec3 position() const { return rotation.transposed_mul(translation) * -1.0; }
    void validate() const; // throws std::invalid_argument / NonOrthonormalRotation
};

struct ProjectedSplat {
    Vec2 mean2d;
    Sym2 conic;  // inverse of the dilated 2D covariance
    Sym2 cov_aa; // dilated 2D covariance (anti-aliasing applied)
    double depth = 0.0;
    double opacity_eff = 0.0; // opacity times the normalization ratio
    Vec3 color;
    CullingBound bound;  // filled by the rasterizer per its culling mode
    std::uint32_t index = 0; // original splat index (depth-sort tie break)
};

inline constexpr double kNearPlane = 0.2;
inline constexpr double kDefaultDilation = 0.3;

// Sigma = R S S^T R^T
Mat3 build_covariance3d(const Vec3& scale, const Quat& rotation);

// EWA-style projection with anti-aliasing dilation and opacity normalization.
// Returns nullopt when the splat is behind the near plane. Throws
// DegenerateCovariance when the dilated covariance is singular.
std::optional<ProjectedSplat> project_splat(const Splat3D& splat, const Camera& cam,
                                            double v_dilation, int sh_degree = 3);

// Integral of kernel(Q(v)) over the plane; equals sqrt(det Sigma) * integral
// of kernel(|y|^2) by the substitution argument this verifies numerically.
double normalization_integral(const KernelSpec& spec, const Sym2& cov2d);

// Standard 3DGS spherical-harmonics color: 0.5 offset, clamped below at 0,
// not clamped above.
Vec3 eval_sh_color(const std::array<Vec3, 16>& sh, const Vec3& view_dir, int degree);

} // namespace polysplat
