#include "polysplat/raster.hpp"
#include "polysplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <omp.h>

namespace polysplat {

void RasterConfig::validate() const {
    if (tile_size < 1) throw std::invalid_argument("tile_size must be >= 1");
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
        throw std::invalid_argument("epsilon must be in (0,1)");
    if (!(transmittance_floor >= 0.0) || !(transmittance_floor < 1.0))
        throw std::invalid_argument("transmittance_floor must be in [0,1)");
    if (culling_mode == CullingMode::ZeroCrossing && !bound_kernel().is_polynomial())
        throw std::invalid_argument("zero-crossing culling requires a polynomial kernel");
    if (v_dilation < 0.0) throw std::invalid_argument("v_dilation must be >= 0");
    if (thread_count < 0) throw std::invalid_argument("thread_count must be >= 0");
}

int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("POLYSPLAT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return omp_get_max_threads();
}

namespace {

// Quadric-space slack added to every rasterizer bound. The blender skips on
// alpha < epsilon while tiles are culled on the level-set radius; at the set
// boundary the two predicates can disagree by rounding, and a fragment the
// blender would accept must never sit in a culled tile.
constexpr double kBoundSlack = 1e-7;

CullingBound widen(CullingBound b) {
    b.quadric_root += kBoundSlack;
    b.radius_sigma = std::sqrt(b.quadric_root);
    return b;
}

} // namespace

std::optional<CullingBound> culling_bound_for(const RasterConfig& cfg, double opacity_eff) {
    if (!(opacity_eff > 0.0)) return std::nullopt;
    switch (cfg.culling_mode) {
        case CullingMode::StopThePop: {
            if (!(opacity_eff > cfg.epsilon)) return std::nullopt;
            double x = 2.0 * std::log(opacity_eff / cfg.epsilon);
            return widen(CullingBound{std::sqrt(x), x, true});
        }
        case CullingMode::ZeroCrossing: {
            double x = cfg.bound_kernel().first_root;
            return widen(CullingBound{std::sqrt(x), x, false});
        }
        case CullingMode::OpacityAware: {
            auto b = try_culling_radius(cfg.bound_kernel(), opacity_eff, cfg.epsilon);
            if (!b) return std::nullopt;
            return widen(*b);
        }
    }
    return std::nullopt;
}

std::optional<TileRect> tile_rect(const ProjectedSplat& p, int tile_size, int width, int height) {
    double hx = p.bound.radius_sigma * std::sqrt(std::max(p.cov_aa.xx, 0.0));
    double hy = p.bound.radius_sigma * std::sqrt(std::max(p.cov_aa.yy, 0.0));
    int tiles_x = (width + tile_size - 1) / tile_size;
    int tiles_y = (height + tile_size - 1) / tile_size;
    int x0 = static_cast<int>(std::floor((p.mean2d.x - hx) / tile_size));
    int x1 = static_cast<int>(std::floor((p.mean2d.x + hx) / tile_size));
    int y0 = static_cast<int>(std::floor((p.mean2d.y - hy) / tile_size));
    int y1 = static_cast<int>(std::floor((p.mean2d.y + hy) / tile_size));
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, tiles_x - 1);
    y1 = std::min(y1, tiles_y - 1);
    if (x0 > x1 || y0 > y1) return std::nullopt;
    return TileRect{x0, y0, x1, y1};
}

std::optional<TileRect> screen_bounds(const ProjectedSplat& p, const RasterConfig& cfg,
                                      int width, int height) {
    auto bound = culling_bound_for(cfg, p.opacity_eff);
    if (!bound) throw EmptyBounds("splat contributes below epsilon everywhere");
    ProjectedSplat q = p;
    q.bound = *bound;
    return tile_rect(q, cfg.tile_size, width, height);
}

PixelBox tile_pixel_box(int tx, int ty, int tile_size) {
    double x0 = tx * static_cast<double>(tile_size) + 0.5;
    double y0 = ty * static_cast<double>(tile_size) + 0.5;
    return {x0, y0, x0 + tile_size - 1, y0 + tile_size - 1};
}

double min_quadric_over_box(const Sym2& conic, const Vec2& mean, const PixelBox& box) {
    double lx = box.x0 - mean.x, hx = box.x1 - mean.x;
    double ly = box.y0 - mean.y, hy = box.y1 - mean.y;
    if (lx <= 0.0 && hx >= 0.0 && ly <= 0.0 && hy >= 0.0) return 0.0;

    double a = conic.xx, b = conic.xy, c = conic.yy;
    // minimum of the convex quadric is on one of the four edges; each edge is
    // a 1D quadratic minimized by clamping its unconstrained minimizer
    auto edge_x_fixed = [&](double dx) {
        double dy = std::clamp(c != 0.0 ? -b * dx / c : ly, ly, hy);
        return conic.quadric(dx, dy);
    };
    auto edge_y_fixed = [&](double dy) {
        double dx = std::clamp(a != 0.0 ? -b * dy / a : lx, lx, hx);
        return conic.quadric(dx, dy);
    };
    double m = edge_x_fixed(lx);
    m = std::min(m, edge_x_fixed(hx));
    m = std::min(m, edge_y_fixed(ly));
    m = std::min(m, edge_y_fixed(hy));
    return m;
}

bool tight_tile_test(const ProjectedSplat& p, const PixelBox& box) {
    return min_quadric_over_box(p.conic, p.mean2d, box) <= p.bound.quadric_root;
}

// ------------------------------------------------------------ pipeline

std::vector<ProjectedSplat> prepare_splats(std::span<const Splat3D> splats, const Camera& cam,
                                           const RasterConfig& cfg, PerfCounters& counters) {
    counters.splats_submitted += splats.size();
    const int n = static_cast<int>(splats.size());
    enum : unsigned char { kOk, kFrustum, kBelowEpsilon };
    std::vector<ProjectedSplat> slots(n);
    std::vector<unsigned char> status(n, kFrustum);

    int threads = resolve_thread_count(cfg.thread_count);
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        auto proj = project_splat(splats[i], cam, cfg.v_dilation, cfg.sh_degree);
        if (!proj) {
            status[i] = kFrustum;
            continue;
        }
        auto bound = culling_bound_for(cfg, proj->opacity_eff);
        if (!bound) {
            status[i] = kBelowEpsilon;
            continue;
        }
        proj->bound = *bound;
        proj->index = static_cast<std::uint32_t>(i);
        slots[i] = *proj;
        status[i] = kOk;
    }

    std::vector<ProjectedSplat> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (status[i] == kFrustum) {
            ++counters.splats_frustum_culled;
        } else if (status[i] == kOk) {
            if (tile_rect(slots[i], cfg.tile_size, cam.width, cam.height)) {
                out.push_back(slots[i]);
            } else {
                ++counters.splats_frustum_culled; // off screen
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const ProjectedSplat& a, const ProjectedSplat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });
    return out;
}

namespace {

struct TileBins {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> bins; // indices into the prepared list
};

TileBins bin_splats(const std::vector<ProjectedSplat>& prepared, const RasterConfig& cfg,
                    int width, int height, PerfCounters& counters) {
    TileBins tb;
    tb.tiles_x = (width + cfg.tile_size - 1) / cfg.tile_size;
    tb.tiles_y = (height + cfg.tile_size - 1) / cfg.tile_size;
    tb.bins.resize(static_cast<std::size_t>(tb.tiles_x) * tb.tiles_y);

    for (std::uint32_t k = 0; k < prepared.size(); ++k) {
        const ProjectedSplat& p = prepared[k];
        auto rect = tile_rect(p, cfg.tile_size, width, height);
        if (!rect) continue;
        counters.tile_pairs_coarse += rect->count();
        for (int ty = rect->y0; ty <= rect->y1; ++ty) {
            for (int tx = rect->x0; tx <= rect->x1; ++tx) {
                if (tight_tile_test(p, tile_pixel_box(tx, ty, cfg.tile_size))) {
                    tb.bins[static_cast<std::size_t>(ty) * tb.tiles_x + tx].push_back(k);
                    ++counters.tile_pairs_after_tight_test;
                }
            }
        }
    }
    return tb;
}

} // namespace

std::pair<Framebuffer, PerfCounters> render(std::span<const Splat3D> splats, const Camera& cam,
                                            const RasterConfig& cfg) {
    cfg.validate();
    cam.validate();

    PerfCounters counters;
    Framebuffer fb(cam.width, cam.height);
    std::vector<ProjectedSplat> prepared = prepare_splats(splats, cam, cfg, counters);
    TileBins tb = bin_splats(prepared, cfg, cam.width, cam.height, counters);

    const int n_tiles = tb.tiles_x * tb.tiles_y;
    const int T = cfg.tile_size;
    std::vector<std::uint64_t> tile_evals(n_tiles, 0), tile_blended(n_tiles, 0);

    int threads = resolve_thread_count(cfg.thread_count);
#pragma omp parallel num_threads(threads)
    {
        std::vector<double> trans(static_cast<std::size_t>(T) * T);
        std::vector<double> accum(3ull * T * T);
        std::vector<unsigned char> done(static_cast<std::size_t>(T) * T);

#pragma omp for schedule(dynamic)
        for (int tile = 0; tile < n_tiles; ++tile) {
            const auto& bin = tb.bins[tile];
            int tx = tile % tb.tiles_x, ty = tile / tb.tiles_x;
            int px0 = tx * T, py0 = ty * T;
            int px1 = std::min(px0 + T, cam.width);
            int py1 = std::min(py0 + T, cam.height);
            int tw = px1 - px0, th = py1 - py0;
            int n_px = tw * th;
            if (n_px <= 0) continue;

            std::fill(trans.begin(), trans.begin() + n_px, 1.0);
            std::fill(accum.begin(), accum.begin() + 3 * n_px, 0.0);
            std::fill(done.begin(), done.begin() + n_px, 0);
            int remaining = n_px;

            std::uint64_t evals = 0, blended = 0;
            for (std::uint32_t k : bin) {
                if (remaining == 0) break;
                const ProjectedSplat& p = prepared[k];
                double a = p.conic.xx, b = p.conic.xy, c = p.conic.yy;
                double mx = p.mean2d.x, my = p.mean2d.y;
                double cr = p.color.x, cg = p.color.y, cb = p.color.z;
                if (cfg.clamp_before_blend) {
                    cr = std::clamp(cr, 0.0, 1.0);
                    cg = std::clamp(cg, 0.0, 1.0);
                    cb = std::clamp(cb, 0.0, 1.0);
                }
                for (int iy = 0; iy < th; ++iy) {
                    double dy = py0 + iy + 0.5 - my;
                    for (int ix = 0; ix < tw; ++ix) {
                        int idx = iy * tw + ix;
                        if (done[idx]) continue;
                        double dx = px0 + ix + 0.5 - mx;
                        double q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
                        ++evals;
                        double alpha =
                            std::min(0.999, p.opacity_eff * eval_kernel(cfg.kernel, q));
                        if (alpha < cfg.epsilon) continue;
                        double test_t = trans[idx] * (1.0 - alpha);
                        if (test_t < cfg.transmittance_floor) {
                            done[idx] = 1;
                            --remaining;
                            continue;
                        }
                        double w = alpha * trans[idx];
                        accum[3 * idx + 0] += cr * w;
                        accum[3 * idx + 1] += cg * w;
                        accum[3 * idx + 2] += cb * w;
                        trans[idx] = test_t;
                        ++blended;
                    }
                }
            }

            for (int iy = 0; iy < th; ++iy) {
                for (int ix = 0; ix < tw; ++ix) {
                    int idx = iy * tw + ix;
                    std::size_t out = static_cast<std::size_t>(py0 + iy) * cam.width + (px0 + ix);
                    fb.transmittance[out] = trans[idx];
                    fb.rgb[3 * out + 0] = accum[3 * idx + 0];
                    fb.rgb[3 * out + 1] = accum[3 * idx + 1];
                    fb.rgb[3 * out + 2] = accum[3 * idx + 2];
                }
            }
            tile_evals[tile] = evals;
            tile_blended[tile] = blended;
        }
    }

    for (int t = 0; t < n_tiles; ++t) {
        counters.kernel_evaluations += tile_evals[t];
        counters.fragments_blended += tile_blended[t];
    }
    return {std::move(fb), counters};
}

PerfCounters count_pairs(std::span<const Splat3D> splats, const Camera& cam,
                         const RasterConfig& cfg) {
    cfg.validate();
    cam.validate();
    PerfCounters counters;
    std::vector<ProjectedSplat> prepared = prepare_splats(splats, cam, cfg, counters);
    bin_splats(prepared, cfg, cam.width, cam.height, counters);
    return counters;
}

} // namespace polysplat
