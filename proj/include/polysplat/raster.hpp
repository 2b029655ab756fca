#pragma once

#include "polysplat/projection.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace polysplat {

enum class CullingMode {
    StopThePop,  // opacity-aware exponential-style bound sqrt(2 ln(o/eps))
    ZeroCrossing, // universal bound at the polynomial's first root
    OpacityAware, // per-splat bound solving o * kernel(t^2) = eps
};

struct RasterConfig {
    int tile_size = 16;
    double epsilon = 1.0 / 255.0;
    double transmittance_floor = 1e-4;
    CullingMode culling_mode = CullingMode::StopThePop;
    KernelSpec kernel; // blending kernel
    // Bounds are computed from this kernel when set (used to demonstrate the
    // blocky-artifact failure mode of mismatched culling); defaults to kernel.
    std::optional<KernelSpec> culling_kernel;
    double v_dilation = kDefaultDilation;
    int sh_degree = 3;
    bool clamp_before_blend = false; // clamp colors to [0,1] per fragment
    int thread_count = 0;            // 0 = auto (POLYSPLAT_THREADS or OpenMP default)

    const KernelSpec& bound_kernel() const { return culling_kernel ? *culling_kernel : kernel; }
    void validate() const; // throws std::invalid_argument
};

struct PerfCounters {
    std::uint64_t splats_submitted = 0;
    std::uint64_t splats_frustum_culled = 0;
    std::uint64_t tile_pairs_coarse = 0;
    std::uint64_t tile_pairs_after_tight_test = 0;
    std::uint64_t kernel_evaluations = 0;
    std::uint64_t fragments_blended = 0;

    PerfCounters& operator+=(const PerfCounters& o) {
        splats_submitted += o.splats_submitted;
        splats_frustum_culled += o.splats_frustum_culled;
        tile_pairs_coarse += o.tile_pairs_coarse;
        tile_pairs_after_tight_test += o.tile_pairs_after_tight_test;
        kernel_evaluations += o.kernel_evaluations;
        fragments_blended += o.fragments_blended;
        return *this;
    }
};

struct Framebuffer {
    int width = 0, height = 0;
    std::vector<double> rgb;           // 3 per pixel, accumulated sum alpha_i T_i color_i
    std::vector<double> transmittance; // remaining light fraction per pixel

    Framebuffer() = default;
    Framebuffer(int w, int h)
        : width(w), height(h), rgb(3ull * w * h, 0.0), transmittance(1ull * w * h, 1.0) {}
};

// Inclusive tile-coordinate rectangle.
struct TileRect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    std::uint64_t count() const {
        if (x1 < x0 || y1 < y0) return 0;
        return std::uint64_t(x1 - x0 + 1) * std::uint64_t(y1 - y0 + 1);
    }
};

// Axis-aligned box of pixel centers (continuous coordinates).
struct PixelBox {
    double x0, y0, x1, y1;
};

PixelBox tile_pixel_box(int tx, int ty, int tile_size);

// Exact minimum of the convex quadric (v - mean)^T conic (v - mean) over a box.
double min_quadric_over_box(const Sym2& conic, const Vec2& mean, const PixelBox& box);

// Culling bound for the configured mode; nullopt means the splat contributes
// below epsilon everywhere and produces no tiles.
std::optional<CullingBound> culling_bound_for(const RasterConfig& cfg, double opacity_eff);

// Tile rectangle covering the bound ellipse; pre: p.bound set. nullopt when
// the rectangle misses the image.
std::optional<TileRect> tile_rect(const ProjectedSplat& p, int tile_size, int width, int height);

// Spec-shaped wrapper: computes the bound from cfg, then the rectangle.
// Throws EmptyBounds when the splat is fully culled.
std::optional<TileRect> screen_bounds(const ProjectedSplat& p, const RasterConfig& cfg,
                                      int width, int height);

// True iff the splat's bound ellipse reaches the tile's pixel-center box.
bool tight_tile_test(const ProjectedSplat& p, const PixelBox& box);

// Projects, bounds and depth-sorts the splats (ties broken by input index).
// Splats behind the near plane or fully off screen are dropped and counted.
std::vector<ProjectedSplat> prepare_splats(std::span<const Splat3D> splats, const Camera& cam,
                                           const RasterConfig& cfg, PerfCounters& counters);

// Tile-parallel front-to-back alpha blending. Bit-identical output for any
// thread count.
std::pair<Framebuffer, PerfCounters> render(std::span<const Splat3D> splats, const Camera& cam,
                                            const RasterConfig& cfg);

// Binning and tight tests only; kernel_evaluations and fragments_blended stay 0.
PerfCounters count_pairs(std::span<const Splat3D> splats, const Camera& cam,
                         const RasterConfig& cfg);

int resolve_thread_count(int requested);

} // namespace polysplat
