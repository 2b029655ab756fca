#include "polysplat/npu.hpp"
#include "polysplat/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace polysplat::npu {

SplatVector build_splat_vector(const ProjectedSplat& p, const KernelSpec& kernel) {
    if (!kernel.is_polynomial() || kernel.order != 1)
        throw WrongOrder("splat vector requires an order-1 polynomial kernel");

    double a = p.conic.xx, b = p.conic.xy, c = p.conic.yy;
    double mx = p.mean2d.x, my = p.mean2d.y;
    double o = p.opacity_eff;
    double oc1 = o * kernel.coeffs[1];

    // quadric expanded over (px^2, px*py, py^2, px, py, 1)
    SplatVector v;
    v.s[0] = oc1 * a;
    v.s[1] = oc1 * 2.0 * b;
    v.s[2] = oc1 * c;
    v.s[3] = oc1 * -2.0 * (a * mx + b * my);
    v.s[4] = oc1 * -2.0 * (b * mx + c * my);
    v.s[5] = oc1 * (a * mx * mx + 2.0 * b * mx * my + c * my * my) + o * kernel.coeffs[0];
    return v;
}

double eval(const PixelVector& u, const SplatVector& s) {
    double acc = 0.0;
    for (int k = 0; k < 6; ++k) acc += u.u[k] * s.s[k];
    return std::max(acc, 0.0);
}

std::vector<double> batch_eval(std::span<const PixelVector> pixels,
                               std::span<const SplatVector> splats) {
    if (pixels.empty() || splats.empty())
        throw std::invalid_argument("batch_eval requires nonempty inputs");
    const std::size_t rows = pixels.size(), cols = splats.size();
    std::vector<double> out(rows * cols);

    constexpr std::size_t B = 16; // matmul-unit tile
    for (std::size_t i0 = 0; i0 < rows; i0 += B) {
        std::size_t i1 = std::min(i0 + B, rows);
        for (std::size_t j0 = 0; j0 < cols; j0 += B) {
            std::size_t j1 = std::min(j0 + B, cols);
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = j0; j < j1; ++j)
                    out[i * cols + j] = eval(pixels[i], splats[j]);
        }
    }
    return out;
}

int vector_dimension(int order) {
    if (order < 1) throw std::invalid_argument("order must be >= 1");
    int n = 2 * (order + 1);
    return n * (n - 1) / 2;
}

} // namespace polysplat::npu
