#include "polysplat/reference.hpp"

#include <algorithm>
#include <cmath>

namespace polysplat::reference {

Framebuffer render_serial(std::span<const Splat3D> splats, const Camera& cam,
                          const RasterConfig& cfg) {
    cfg.validate();
    cam.validate();

    RasterConfig serial_cfg = cfg;
    serial_cfg.thread_count = 1;
    PerfCounters unused;
    std::vector<ProjectedSplat> prepared = prepare_splats(splats, cam, serial_cfg, unused);

    const int T = cfg.tile_size;
    Framebuffer fb(cam.width, cam.height);

    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            int tx = px / T, ty = py / T;
            PixelBox box = tile_pixel_box(tx, ty, T);
            double trans = 1.0;
            double r = 0.0, g = 0.0, b = 0.0;
            for (const ProjectedSplat& p : prepared) {
                auto rect = tile_rect(p, T, cam.width, cam.height);
                if (!rect || tx < rect->x0 || tx > rect->x1 || ty < rect->y0 || ty > rect->y1)
                    continue;
                if (!tight_tile_test(p, box)) continue;
                double dx = px + 0.5 - p.mean2d.x;
                double dy = py + 0.5 - p.mean2d.y;
                double q = p.conic.quadric(dx, dy);
                double alpha = std::min(0.999, p.opacity_eff * eval_kernel(cfg.kernel, q));
                if (alpha < cfg.epsilon) continue;
                double test_t = trans * (1.0 - alpha);
                if (test_t < cfg.transmittance_floor) break;
                double cr = p.color.x, cg = p.color.y, cb = p.color.z;
                if (cfg.clamp_before_blend) {
                    cr = std::clamp(cr, 0.0, 1.0);
                    cg = std::clamp(cg, 0.0, 1.0);
                    cb = std::clamp(cb, 0.0, 1.0);
                }
                double w = alpha * trans;
                r += cr * w;
                g += cg * w;
                b += cb * w;
                trans = test_t;
            }
            std::size_t out = static_cast<std::size_t>(py) * cam.width + px;
            fb.transmittance[out] = trans;
            fb.rgb[3 * out + 0] = r;
            fb.rgb[3 * out + 1] = g;
            fb.rgb[3 * out + 2] = b;
        }
    }
    return fb;
}

} // namespace polysplat::reference
