// polysplat: fit polynomial splatting kernels, render 3DGS scenes with them,
// and compare quality/culling tradeoffs against the exponential kernel.

#include <CLI11.hpp>

#include "polysplat/errors.hpp"
#include "polysplat/kernel.hpp"
#include "polysplat/metrics.hpp"
#include "polysplat/raster.hpp"
#include "polysplat/scene_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

using namespace polysplat;

namespace {

double parse_epsilon_arg(const std::string& s) {
    std::size_t slash = s.find('/');
    if (slash != std::string::npos) {
        double num = std::stod(s.substr(0, slash));
        double den = std::stod(s.substr(slash + 1));
        return num / den;
    }
    return std::stod(s);
}

KernelSpec kernel_from_arg(const std::string& arg) {
    if (arg == "exp" || arg == "exponential") return make_exponential_kernel();
    return load_kernel_file(arg).kernel;
}

CullingMode culling_from_arg(const std::string& arg) {
    if (arg == "stp") return CullingMode::StopThePop;
    if (arg == "zero") return CullingMode::ZeroCrossing;
    if (arg == "opacity") return CullingMode::OpacityAware;
    throw std::invalid_argument("unknown culling mode '" + arg + "' (stp|zero|opacity)");
}

const char* culling_name(CullingMode m) {
    switch (m) {
        case CullingMode::StopThePop: return "stp";
        case CullingMode::ZeroCrossing: return "zero";
        case CullingMode::OpacityAware: return "opacity";
    }
    return "?";
}

// scenes: a .ply path or synthetic:{grid|random|overexposed-sky}[:seed]
SceneFile scene_from_arg(const std::string& arg) {
    if (arg.rfind("synthetic:", 0) != 0) return load_ply(arg);
    std::string rest = arg.substr(10);
    std::string kind = rest;
    std::uint64_t seed = 1;
    std::size_t colon = rest.find(':');
    if (colon != std::string::npos) {
        kind = rest.substr(0, colon);
        seed = std::stoull(rest.substr(colon + 1));
    }
    if (kind == "grid") return generate_synthetic_scene(SyntheticKind::Grid, seed);
    if (kind == "random") return generate_synthetic_scene(SyntheticKind::Random, seed);
    if (kind == "overexposed-sky" || kind == "sky")
        return generate_synthetic_scene(SyntheticKind::OverexposedSky, seed);
    throw std::invalid_argument("unknown synthetic scene '" + kind + "'");
}

// cameras: a .json path or synthetic:orbit:N[:WxH]
std::vector<Camera> cameras_from_arg(const std::string& arg) {
    if (arg.rfind("synthetic:", 0) != 0) return load_cameras(arg);
    std::string rest = arg.substr(10);
    if (rest.rfind("orbit", 0) != 0)
        throw std::invalid_argument("unknown synthetic cameras '" + rest + "'");
    int count = 4, width = 640, height = 480;
    std::size_t c1 = rest.find(':');
    if (c1 != std::string::npos) {
        std::string tail = rest.substr(c1 + 1);
        std::size_t c2 = tail.find(':');
        count = std::stoi(tail.substr(0, c2));
        if (c2 != std::string::npos) {
            std::string wh = tail.substr(c2 + 1);
            std::size_t x = wh.find('x');
            if (x == std::string::npos)
                throw std::invalid_argument("expected WxH in '" + wh + "'");
            width = std::stoi(wh.substr(0, x));
            height = std::stoi(wh.substr(x + 1));
        }
    }
    return orbit_cameras(count, width, height);
}

Vec3 background_from_arg(const std::string& arg) {
    if (arg == "white") return {1, 1, 1};
    if (arg == "black") return {0, 0, 0};
    std::size_t a = arg.find(','), b = arg.rfind(',');
    if (a == std::string::npos || b == a)
        throw std::invalid_argument("background must be white, black or r,g,b");
    return {std::stod(arg.substr(0, a)), std::stod(arg.substr(a + 1, b - a - 1)),
            std::stod(arg.substr(b + 1))};
}

const Camera& pick_camera(const std::vector<Camera>& cams, int id) {
    for (const Camera& c : cams)
        if (c.id == id) return c;
    throw Error("camera id " + std::to_string(id) + " not found");
}

// "<kernel>,<culling>[,<culling kernel>]"
struct PairSpec {
    KernelSpec kernel;
    CullingMode mode = CullingMode::StopThePop;
    std::optional<KernelSpec> culling_kernel;
    std::string label;
};

PairSpec pair_from_arg(const std::string& arg) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = arg.find(',', start);
        parts.push_back(arg.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (parts.size() < 2 || parts.size() > 3)
        throw std::invalid_argument("expected <kernel>,<culling>[,<culling kernel>]: '" + arg +
                                    "'");
    PairSpec p;
    p.kernel = kernel_from_arg(parts[0]);
    p.mode = culling_from_arg(parts[1]);
    p.label = (parts[0] == "exponential" ? "exp" : parts[0]) + std::string("/") + parts[1];
    if (parts.size() == 3) {
        p.culling_kernel = kernel_from_arg(parts[2]);
        p.label += "/" + parts[2];
    }
    return p;
}

struct CommonRenderOpts {
    std::string scene_arg, cameras_arg;
    int camera_id = 0;
    std::string epsilon = "1/255";
    int tile_size = 16;
    double v_dilation = kDefaultDilation;
    int threads = 0;
    std::string background = "white";
    bool clamp_before_blend = false;
};

void add_common_render_options(CLI::App* cmd, CommonRenderOpts& o, bool with_camera_id = true) {
    cmd->add_option("--scene", o.scene_arg, "PLY checkpoint or synthetic:<kind>[:seed]")
        ->required();
    cmd->add_option("--cameras", o.cameras_arg, "camera JSON or synthetic:orbit:N[:WxH]")
        ->required();
    if (with_camera_id) cmd->add_option("--camera-id", o.camera_id, "camera id to render");
    cmd->add_option("--epsilon", o.epsilon, "contribution cutoff (accepts fractions)");
    cmd->add_option("--tile-size", o.tile_size, "rasterizer tile size in pixels");
    cmd->add_option("--v-dilation", o.v_dilation, "anti-aliasing variance added to the 2D cov");
    cmd->add_option("--threads", o.threads, "worker threads (0 = auto, POLYSPLAT_THREADS)");
    cmd->add_option("--background", o.background, "white, black or r,g,b");
    cmd->add_flag("--clamp-before-blend", o.clamp_before_blend,
                  "clamp colors to [0,1] per fragment before blending");
}

RasterConfig base_config(const CommonRenderOpts& o, const SceneFile& scene) {
    RasterConfig cfg;
    cfg.epsilon = parse_epsilon_arg(o.epsilon);
    cfg.tile_size = o.tile_size;
    cfg.v_dilation = o.v_dilation;
    cfg.thread_count = o.threads;
    cfg.sh_degree = scene.sh_degree;
    cfg.clamp_before_blend = o.clamp_before_blend;
    return cfg;
}

// ------------------------------------------------------------------ fit

struct FitOpts {
    int order = 1;
    std::string epsilon = "1/255";
    std::string out = "kernel.txt";
    bool extended_range = false;
    double tile_size = 16.0;
    double s_min = 0.5477225575051661; // sqrt(0.3), the anti-aliasing floor
    int iterations = 30000;
    int samples = 4096;
    double step_size = 0.01;
};

int run_fit(const FitOpts& o) {
    FitConfig cfg;
    cfg.order = o.order;
    cfg.epsilon = parse_epsilon_arg(o.epsilon);
    cfg.iterations = o.iterations;
    cfg.sample_count = o.samples;
    cfg.step_size = o.step_size;
    if (o.extended_range)
        cfg.x_max_override = extended_fit_range_xmax(o.tile_size, o.s_min, cfg.epsilon);

    FitResult fr = fit_polynomial(cfg);
    std::printf("order %d  fit range [0, %.6g]\n", cfg.order, cfg.fit_range());
    for (std::size_t i = 0; i < fr.kernel.coeffs.size(); ++i)
        std::printf("c_%zu = %.17g\n", i, fr.kernel.coeffs[i]);
    std::printf("first_root = %.17g\n", fr.kernel.first_root);
    std::printf("l1_loss = %.17g\n", fr.final_l1_loss);

    KernelFile kf{fr.kernel, cfg.epsilon, cfg.fit_range()};
    save_kernel_file(kf, o.out);
    std::printf("wrote %s\n", o.out.c_str());
    return 0;
}

// ---------------------------------------------------------------- render

struct RenderOpts {
    CommonRenderOpts common;
    std::string kernel = "exp";
    std::string culling = "stp";
    std::string culling_kernel;
    std::string out = "render.png";
    std::string counters_out;
};

int run_render(const RenderOpts& o) {
    SceneFile scene = scene_from_arg(o.common.scene_arg);
    std::vector<Camera> cams = cameras_from_arg(o.common.cameras_arg);
    const Camera& cam = pick_camera(cams, o.common.camera_id);

    RasterConfig cfg = base_config(o.common, scene);
    cfg.kernel = kernel_from_arg(o.kernel);
    cfg.culling_mode = culling_from_arg(o.culling);
    if (!o.culling_kernel.empty()) cfg.culling_kernel = kernel_from_arg(o.culling_kernel);
    cfg.validate();

    auto [fb, counters] = render(scene.splats, cam, cfg);
    write_png(fb, o.out, background_from_arg(o.common.background));
    std::printf("wrote %s (%dx%d), pairs %llu, blended %llu\n", o.out.c_str(), cam.width,
                cam.height, (unsigned long long)counters.tile_pairs_after_tight_test,
                (unsigned long long)counters.fragments_blended);
    if (!o.counters_out.empty()) {
        std::ofstream out(o.counters_out);
        if (!out) throw IoError("cannot open '" + o.counters_out + "'");
        out << counters_to_json(counters);
    }
    return 0;
}

// --------------------------------------------------------------- compare

struct CompareOpts {
    CommonRenderOpts common;
    std::string a, b;
    std::string json_out, csv_out;
    bool ablate = false;
    int fit_iterations = 30000;
};

int run_compare(const CompareOpts& o) {
    SceneFile scene = scene_from_arg(o.common.scene_arg);
    std::vector<Camera> cams = cameras_from_arg(o.common.cameras_arg);
    const Camera& cam = pick_camera(cams, o.common.camera_id);
    Vec3 bg = background_from_arg(o.common.background);

    auto config_for = [&](const PairSpec& p) {
        RasterConfig cfg = base_config(o.common, scene);
        cfg.kernel = p.kernel;
        cfg.culling_mode = p.mode;
        cfg.culling_kernel = p.culling_kernel;
        cfg.validate();
        return cfg;
    };

    if (!o.ablate) {
        if (o.a.empty() || o.b.empty())
            throw std::invalid_argument("--a and --b are required without --ablate");
        PairSpec pa = pair_from_arg(o.a), pb = pair_from_arg(o.b);
        CompareReport r = compare(scene.splats, cam, config_for(pa), config_for(pb), bg);
        std::printf("a = %s   b = %s\n", pa.label.c_str(), pb.label.c_str());
        std::fputs(report_to_table(r).c_str(), stdout);
        if (!o.json_out.empty()) {
            std::ofstream out(o.json_out);
            if (!out) throw IoError("cannot open '" + o.json_out + "'");
            out << report_to_json(r);
        }
        if (!o.csv_out.empty()) {
            std::ofstream out(o.csv_out);
            if (!out) throw IoError("cannot open '" + o.csv_out + "'");
            out << csv_header() << csv_row(pa.label, pb.label, r);
        }
        return 0;
    }

    // ablation grid over kernel x culling, exponential + StopThePop as the
    // reference row
    FitConfig fc;
    fc.epsilon = parse_epsilon_arg(o.common.epsilon);
    fc.iterations = o.fit_iterations;
    fc.order = 1;
    KernelSpec f1 = fit_polynomial(fc).kernel;
    fc.order = 2;
    KernelSpec f2p =
        make_polynomial_kernel(KernelKind::PolynomialPiecewise, fit_polynomial(fc).kernel.coeffs);
    fc.order = 3;
    KernelSpec f3 = fit_polynomial(fc).kernel;

    struct Cell {
        const char* label;
        KernelSpec kernel;
        CullingMode mode;
    };
    const Cell cells[] = {
        {"exp/stp", make_exponential_kernel(), CullingMode::StopThePop},
        {"poly1/stp", f1, CullingMode::StopThePop},
        {"poly1/zero", f1, CullingMode::ZeroCrossing},
        {"poly1/opacity", f1, CullingMode::OpacityAware},
        {"poly2p/opacity", f2p, CullingMode::OpacityAware},
        {"poly3/stp", f3, CullingMode::StopThePop},
        {"poly3/opacity", f3, CullingMode::OpacityAware},
    };

    PairSpec ref;
    ref.kernel = make_exponential_kernel();
    ref.mode = CullingMode::StopThePop;
    RasterConfig ref_cfg = config_for(ref);

    std::string csv = csv_header();
    for (const Cell& cell : cells) {
        RasterConfig cfg = base_config(o.common, scene);
        cfg.kernel = cell.kernel;
        cfg.culling_mode = cell.mode;
        cfg.validate();
        CompareReport r = compare(scene.splats, cam, ref_cfg, cfg, bg);
        csv += csv_row("exp/stp", cell.label, r);
        std::printf("%-16s psnr %8s  ssim %.6f  pairs %8llu  ratio %.4f\n", cell.label,
                    std::isinf(r.psnr_db) ? "inf" : std::to_string(r.psnr_db).c_str(), r.ssim,
                    (unsigned long long)r.counters_b.tile_pairs_after_tight_test, r.pair_ratio);
    }
    if (!o.csv_out.empty()) {
        std::ofstream out(o.csv_out);
        if (!out) throw IoError("cannot open '" + o.csv_out + "'");
        out << csv;
        std::printf("wrote %s\n", o.csv_out.c_str());
    }
    return 0;
}

// ----------------------------------------------------------------- bench

struct BenchOpts {
    CommonRenderOpts common;
    std::string kernel = "exp";
    std::string culling = "stp";
    std::string csv_out;
};

int run_bench(const BenchOpts& o) {
    SceneFile scene = scene_from_arg(o.common.scene_arg);
    std::vector<Camera> cams = cameras_from_arg(o.common.cameras_arg);
    if (cams.empty()) throw std::invalid_argument("bench needs at least one camera");

    RasterConfig cfg = base_config(o.common, scene);
    cfg.kernel = kernel_from_arg(o.kernel);
    cfg.culling_mode = culling_from_arg(o.culling);
    cfg.validate();

    std::printf("%6s %14s %14s %14s %14s %10s\n", "cam", "pairs_coarse", "pairs_tight",
                "kernel_evals", "blended", "ms");
    std::uint64_t sum = 0, lo = UINT64_MAX, hi = 0;
    double total_ms = 0.0;
    std::string csv = "camera,pairs_coarse,pairs_tight,kernel_evals,blended,ms\n";
    for (const Camera& cam : cams) {
        auto t0 = std::chrono::steady_clock::now();
        auto [fb, c] = render(scene.splats, cam, cfg);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              t0)
                        .count();
        std::printf("%6d %14llu %14llu %14llu %14llu %10.2f\n", cam.id,
                    (unsigned long long)c.tile_pairs_coarse,
                    (unsigned long long)c.tile_pairs_after_tight_test,
                    (unsigned long long)c.kernel_evaluations,
                    (unsigned long long)c.fragments_blended, ms);
        char row[160];
        std::snprintf(row, sizeof row, "%d,%llu,%llu,%llu,%llu,%.3f\n", cam.id,
                      (unsigned long long)c.tile_pairs_coarse,
                      (unsigned long long)c.tile_pairs_after_tight_test,
                      (unsigned long long)c.kernel_evaluations,
                      (unsigned long long)c.fragments_blended, ms);
        csv += row;
        sum += c.tile_pairs_after_tight_test;
        lo = std::min(lo, c.tile_pairs_after_tight_test);
        hi = std::max(hi, c.tile_pairs_after_tight_test);
        total_ms += ms;
    }
    std::printf("pairs_tight mean %.1f  min %llu  max %llu   wall %.2f ms (informational)\n",
                double(sum) / cams.size(), (unsigned long long)lo, (unsigned long long)hi,
                total_ms);
    if (!o.csv_out.empty()) {
        std::ofstream out(o.csv_out);
        if (!out) throw IoError("cannot open '" + o.csv_out + "'");
        out << csv;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polynomial-kernel splatting toolkit"};
    app.require_subcommand(1);

    FitOpts fit_opts;
    CLI::App* fit = app.add_subcommand("fit", "fit a ReLU-polynomial kernel to exp(-x/2)");
    fit->add_option("--order", fit_opts.order, "polynomial order (1..3)")->required();
    fit->add_option("--epsilon", fit_opts.epsilon, "cutoff (accepts fractions like 1/255)");
    fit->add_option("--out", fit_opts.out, "output kernel file");
    fit->add_flag("--extended-range", fit_opts.extended_range,
                  "fit over the tile worst-case range");
    fit->add_option("--tile-size", fit_opts.tile_size, "tile size for the extended range");
    fit->add_option("--s-min", fit_opts.s_min, "smallest splat scale for the extended range");
    fit->add_option("--iterations", fit_opts.iterations, "optimizer iterations");
    fit->add_option("--samples", fit_opts.samples, "dense grid size");
    fit->add_option("--step-size", fit_opts.step_size, "optimizer step size");

    RenderOpts render_opts;
    CLI::App* rnd = app.add_subcommand("render", "render a scene to PNG");
    add_common_render_options(rnd, render_opts.common);
    rnd->add_option("--kernel", render_opts.kernel, "'exp' or a kernel file");
    rnd->add_option("--culling", render_opts.culling, "stp|zero|opacity");
    rnd->add_option("--culling-kernel", render_opts.culling_kernel,
                    "compute bounds from a different kernel (artifact demo)");
    rnd->add_option("--out", render_opts.out, "output PNG")->required();
    rnd->add_option("--counters", render_opts.counters_out, "write counters JSON here");

    CompareOpts cmp_opts;
    CLI::App* cmp = app.add_subcommand("compare", "render two configs and compare");
    add_common_render_options(cmp, cmp_opts.common);
    cmp->add_option("--a", cmp_opts.a, "<kernel>,<culling>[,<culling kernel>] (reference)");
    cmp->add_option("--b", cmp_opts.b, "<kernel>,<culling>[,<culling kernel>]");
    cmp->add_option("--json", cmp_opts.json_out, "write the report as JSON");
    cmp->add_option("--csv", cmp_opts.csv_out, "write CSV row(s)");
    cmp->add_flag("--ablate", cmp_opts.ablate, "run the kernel x culling grid");
    cmp->add_option("--fit-iterations", cmp_opts.fit_iterations,
                    "iterations for the ablation fits");

    BenchOpts bench_opts;
    CLI::App* bench = app.add_subcommand("bench", "render every camera and report counters");
    add_common_render_options(bench, bench_opts.common, /*with_camera_id=*/false);
    bench->add_option("--kernel", bench_opts.kernel, "'exp' or a kernel file");
    bench->add_option("--culling", bench_opts.culling, "stp|zero|opacity");
    bench->add_option("--csv", bench_opts.csv_out, "write per-camera counters CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) return run_fit(fit_opts);
        if (rnd->parsed()) return run_render(render_opts);
        if (cmp->parsed()) return run_compare(cmp_opts);
        if (bench->parsed()) return run_bench(bench_opts);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
