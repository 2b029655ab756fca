#pragma once

#include "polysplat/raster.hpp"

namespace polysplat::reference {

// Serial reference renderer: a plain per-pixel loop over the depth-sorted
// splats, re-deriving each splat's tile membership for the pixel's own tile.
// No binning, no shared state, one thread. Kept as the ground truth the
// tile-parallel renderer is tested against; they must agree bit for bit.
Framebuffer render_serial(std::span<const Splat3D> splats, const Camera& cam,
                          const RasterConfig& cfg);

} // namespace polysplat::reference
