#pragma once

#include "polysplat/projection.hpp"

#include <array>
#include <span>
#include <vector>

namespace polysplat::npu {

// Pixel-dependent half of the quadric decomposition:
// u = (px^2, px*py, py^2, px, py, 1) for the pixel center (px, py).
struct PixelVector {
    std::array<double, 6> u{};

    static PixelVector from_pixel(double px, double py) {
        return {{px * px, px * py, py * py, px, py, 1.0}};
    }
};

// Splat-dependent half: ReLU(u . s) reproduces opacity_eff * kernel(Q(v))
// for an order-1 kernel.
struct SplatVector {
    std::array<double, 6> s{};
};

// Throws WrongOrder unless the kernel is order 1.
SplatVector build_splat_vector(const ProjectedSplat& p, const KernelSpec& kernel);

double eval(const PixelVector& u, const SplatVector& s);

// Contribution matrix (pixels x splats, row-major), computed as a blocked
// product over 16x16 tiles with a ReLU epilogue.
std::vector<double> batch_eval(std::span<const PixelVector> pixels,
                               std::span<const SplatVector> splats);

// Component count of the splat/pixel vectors for an order-N kernel:
// binom(2(N+1), 2).
int vector_dimension(int order);

} // namespace polysplat::npu
