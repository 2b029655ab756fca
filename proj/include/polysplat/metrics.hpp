#pragma once

#include "polysplat/raster.hpp"

#include <string>
#include <vector>

namespace polysplat {

// Float image used by the quality metrics (computed pre-quantization).
struct Image {
    int width = 0, height = 0;
    std::vector<double> rgb; // 3 per pixel
};

// Composites the framebuffer's remaining transmittance against a background.
Image composite(const Framebuffer& fb, const Vec3& background);

// Peak signal-to-noise ratio, peak 1.0, MSE over all channels.
// Identical images give +infinity.
double psnr(const Image& a, const Image& b);

// Structural similarity, 11x11 Gaussian window sigma 1.5, C1=(0.01)^2,
// C2=(0.03)^2, averaged over channels. Requires dims >= 11x11.
double ssim(const Image& a, const Image& b);

double max_abs_diff(const Image& a, const Image& b);

struct CompareReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double max_abs_diff = 0.0;
    PerfCounters counters_a, counters_b;
    double pair_ratio = 0.0; // pairs_b / pairs_a (after tight test)
};

// Renders both configs (cfg_a as reference) and compares.
CompareReport compare(std::span<const Splat3D> splats, const Camera& cam,
                      const RasterConfig& cfg_a, const RasterConfig& cfg_b,
                      const Vec3& background = {1.0, 1.0, 1.0});

std::string report_to_json(const CompareReport& r);
std::string report_to_table(const CompareReport& r);
std::string counters_to_json(const PerfCounters& c);

// CSV rows for ablation grids; values round-trip exactly.
struct CsvRow {
    std::string label_a, label_b;
    double psnr_db = 0.0, ssim = 0.0, max_abs_diff = 0.0;
    std::uint64_t pairs_a = 0, pairs_b = 0;
    double pair_ratio = 0.0;
};

std::string csv_header();
std::string csv_row(const std::string& label_a, const std::string& label_b,
                    const CompareReport& r);
std::vector<CsvRow> parse_csv(const std::string& text); // throws ParseError

} // namespace polysplat
