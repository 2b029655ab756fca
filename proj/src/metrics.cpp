#include "polysplat/metrics.hpp"
#include "polysplat/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace polysplat {

Image composite(const Framebuffer& fb, const Vec3& background) {
    Image img;
    img.width = fb.width;
    img.height = fb.height;
    img.rgb.resize(3ull * fb.width * fb.height);
    const double bg[3] = {background.x, background.y, background.z};
    for (std::size_t i = 0; i < fb.transmittance.size(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            img.rgb[3 * i + ch] = fb.rgb[3 * i + ch] + fb.transmittance[i] * bg[ch];
    return img;
}

namespace {

void check_dims(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("image dimensions differ");
}

} // namespace

double psnr(const Image& a, const Image& b) {
    check_dims(a, b);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
        double d = a.rgb[i] - b.rgb[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double max_abs_diff(const Image& a, const Image& b) {
    check_dims(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i)
        m = std::max(m, std::abs(a.rgb[i] - b.rgb[i]));
    return m;
}

// ------------------------------------------------------------------ ssim

namespace {

constexpr int kWin = 11;

std::array<double, kWin> gaussian_taps() {
    std::array<double, kWin> w{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double d = i - (kWin - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// separable valid-mode Gaussian filter of a single-channel plane
std::vector<double> blur(const std::vector<double>& src, int w, int h, int& ow, int& oh) {
    static const std::array<double, kWin> taps = gaussian_taps();
    ow = w - kWin + 1;
    oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += taps[k] * src[y * w + x + k];
            tmp[y * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += taps[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    check_dims(a, b);
    if (a.width < kWin || a.height < kWin)
        throw TooSmall("ssim needs images at least 11x11");

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::size_t n = static_cast<std::size_t>(a.width) * a.height;
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);

    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t i = 0; i < n; ++i) {
            double va = a.rgb[3 * i + ch], vb = b.rgb[3 * i + ch];
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
        int ow, oh;
        auto mu_a = blur(pa, a.width, a.height, ow, oh);
        auto mu_b = blur(pb, a.width, a.height, ow, oh);
        auto m_aa = blur(paa, a.width, a.height, ow, oh);
        auto m_bb = blur(pbb, a.width, a.height, ow, oh);
        auto m_ab = blur(pab, a.width, a.height, ow, oh);

        double sum = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            double ma = mu_a[i], mb = mu_b[i];
            double va = m_aa[i] - ma * ma;
            double vb = m_bb[i] - mb * mb;
            double cov = m_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / static_cast<double>(mu_a.size());
    }
    return total / 3.0;
}

// --------------------------------------------------------------- compare

CompareReport compare(std::span<const Splat3D> splats, const Camera& cam,
                      const RasterConfig& cfg_a, const RasterConfig& cfg_b,
                      const Vec3& background) {
    auto [fb_a, counters_a] = render(splats, cam, cfg_a);
    auto [fb_b, counters_b] = render(splats, cam, cfg_b);
    Image ia = composite(fb_a, background);
    Image ib = composite(fb_b, background);

    CompareReport r;
    r.psnr_db = psnr(ia, ib);
    r.ssim = ssim(ia, ib);
    r.max_abs_diff = max_abs_diff(ia, ib);
    r.counters_a = counters_a;
    r.counters_b = counters_b;
    r.pair_ratio = counters_a.tile_pairs_after_tight_test
                       ? double(counters_b.tile_pairs_after_tight_test) /
                             double(counters_a.tile_pairs_after_tight_test)
                       : 0.0;
    return r;
}

namespace {

std::string fmt17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json counters_json(const PerfCounters& c) {
    return {{"splats_submitted", c.splats_submitted},
            {"splats_frustum_culled", c.splats_frustum_culled},
            {"tile_pairs_coarse", c.tile_pairs_coarse},
            {"tile_pairs_after_tight_test", c.tile_pairs_after_tight_test},
            {"kernel_evaluations", c.kernel_evaluations},
            {"fragments_blended", c.fragments_blended}};
}

} // namespace

std::string counters_to_json(const PerfCounters& c) {
    return counters_json(c).dump(2) + "\n";
}

std::string report_to_json(const CompareReport& r) {
    nlohmann::json j;
    if (std::isinf(r.psnr_db))
        j["psnr_db"] = "inf";
    else
        j["psnr_db"] = r.psnr_db;
    j["ssim"] = r.ssim;
    j["max_abs_diff"] = r.max_abs_diff;
    j["counters_a"] = counters_json(r.counters_a);
    j["counters_b"] = counters_json(r.counters_b);
    j["pair_ratio"] = r.pair_ratio;
    return j.dump(2) + "\n";
}

std::string report_to_table(const CompareReport& r) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-22s %14s\n", "metric", "value");
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14s\n", "psnr_db",
                  std::isinf(r.psnr_db) ? "inf" : fmt17(r.psnr_db).substr(0, 10).c_str());
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14.6f\n", "ssim", r.ssim);
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14.6g\n", "max_abs_diff", r.max_abs_diff);
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14llu\n", "pairs_a",
                  static_cast<unsigned long long>(r.counters_a.tile_pairs_after_tight_test));
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14llu\n", "pairs_b",
                  static_cast<unsigned long long>(r.counters_b.tile_pairs_after_tight_test));
    out << line;
    std::snprintf(line, sizeof line, "%-22s %14.4f\n", "pair_ratio", r.pair_ratio);
    out << line;
    return out.str();
}

std::string csv_header() {
    return "label_a,label_b,psnr_db,ssim,max_abs_diff,pairs_a,pairs_b,pair_ratio\n";
}

std::string csv_row(const std::string& label_a, const std::string& label_b,
                    const CompareReport& r) {
    std::ostringstream out;
    out << label_a << ',' << label_b << ',' << fmt17(r.psnr_db) << ',' << fmt17(r.ssim) << ','
        << fmt17(r.max_abs_diff) << ',' << r.counters_a.tile_pairs_after_tight_test << ','
        << r.counters_b.tile_pairs_after_tight_test << ',' << fmt17(r.pair_ratio) << "\n";
    return out.str();
}

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header().substr(0, csv_header().size() - 1))
        throw ParseError("csv: bad header");

    auto parse_double = [](const std::string& s) {
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw ParseError("csv: bad number '" + s + "'");
        return v;
    };

    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw ParseError("csv: expected 8 fields");
        CsvRow r;
        r.label_a = f[0];
        r.label_b = f[1];
        r.psnr_db = parse_double(f[2]);
        r.ssim = parse_double(f[3]);
        r.max_abs_diff = parse_double(f[4]);
        r.pairs_a = std::stoull(f[5]);
        r.pairs_b = std::stoull(f[6]);
        r.pair_ratio = parse_double(f[7]);
        rows.push_back(r);
    }
    return rows;
}

} // namespace polysplat
