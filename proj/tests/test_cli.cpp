#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polysplat/kernel.hpp"
#include "polysplat/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const std::string cli = POLYSPLAT_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args, const std::string& env = "") {
    fs::path log = fs::temp_directory_path() / "cli_out.txt";
    std::string cmd = env + " " + cli + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / name; }

} // namespace

TEST_CASE("fit writes a kernel file with the reported values") {
    fs::path out = tmp("cli_k1.txt");
    RunResult r = run("fit --order 1 --epsilon 1/255 --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("c_0") != std::string::npos);
    polysplat::KernelFile kf = polysplat::load_kernel_file(out.string());
    CHECK(std::abs(kf.kernel.coeffs[0] - 0.773) <= 0.02);
    CHECK(std::abs(kf.kernel.coeffs[1] + 0.176) <= 0.01);
    CHECK(kf.epsilon == doctest::Approx(1.0 / 255.0));
}

TEST_CASE("fit rejects unsupported orders with exit 2") {
    CHECK(run("fit --order 9").exit_code == 2);
    CHECK(run("fit --order 1 --epsilon 1.0").exit_code == 2); // degenerate range
}

TEST_CASE("extended-range fit reaches the appendix value") {
    fs::path out = tmp("cli_k2ext.txt");
    RunResult r = run("fit --order 2 --extended-range --tile-size 16 --s-min 0.5477 "
                      "--iterations 6000 --out " + out.string());
    CHECK(r.exit_code == 0);
    polysplat::KernelFile kf = polysplat::load_kernel_file(out.string());
    CHECK(kf.fit_range == doctest::Approx(1992.8).epsilon(0.002));
}

TEST_CASE("render produces a deterministic golden image") {
    fs::path a = tmp("cli_a.png"), b = tmp("cli_b.png");
    std::string common = "render --scene synthetic:grid --cameras synthetic:orbit:1:160x120 "
                         "--camera-id 0 --kernel exp --culling stp --out ";
    CHECK(run(common + a.string()).exit_code == 0);
    CHECK(run(common + b.string() + " --threads 2").exit_code == 0);
    std::string bytes_a = slurp(a);
    CHECK(!bytes_a.empty());
    CHECK(bytes_a == slurp(b)); // bit-identical across runs and thread counts

    // env fallback picks the thread count, output stays identical
    fs::path c = tmp("cli_c.png");
    CHECK(run(common + c.string(), "POLYSPLAT_THREADS=2").exit_code == 0);
    CHECK(bytes_a == slurp(c));
}

TEST_CASE("invalid kernel-culling combination exits 2") {
    RunResult r = run("render --scene synthetic:grid --cameras synthetic:orbit:1 "
                      "--kernel exp --culling zero --out " + tmp("x.png").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("clamp-before-blend changes the overexposed-sky image") {
    fs::path a = tmp("sky_plain.png"), b = tmp("sky_clamped.png");
    std::string common = "render --scene synthetic:overexposed-sky:5 "
                         "--cameras synthetic:orbit:1:160x120 --kernel exp --culling stp --out ";
    CHECK(run(common + a.string()).exit_code == 0);
    CHECK(run(common + b.string() + " --clamp-before-blend").exit_code == 0);
    CHECK(slurp(a) != slurp(b));
}

TEST_CASE("render writes counters json") {
    fs::path png = tmp("cnt.png"), json = tmp("cnt.json");
    RunResult r = run("render --scene synthetic:grid --cameras synthetic:orbit:1:160x120 "
                      "--kernel exp --culling stp --out " + png.string() + " --counters " +
                      json.string());
    CHECK(r.exit_code == 0);
    std::string doc = slurp(json);
    CHECK(doc.find("tile_pairs_after_tight_test") != std::string::npos);
    CHECK(doc.find("fragments_blended") != std::string::npos);
}

TEST_CASE("compare with identical configs reports identity") {
    fs::path csv = tmp("cmp.csv");
    RunResult r = run("compare --scene synthetic:grid --cameras synthetic:orbit:1:160x120 "
                      "--a exp,stp --b exp,stp --csv " + csv.string());
    CHECK(r.exit_code == 0);
    auto rows = polysplat::parse_csv(slurp(csv));
    REQUIRE(rows.size() == 1);
    CHECK(std::isinf(rows[0].psnr_db));
    CHECK(rows[0].ssim == doctest::Approx(1.0));
    CHECK(rows[0].pair_ratio == doctest::Approx(1.0));
}

TEST_CASE("ablation emits the seven table rows") {
    fs::path csv = tmp("ablate.csv");
    RunResult r = run("compare --scene synthetic:grid --cameras synthetic:orbit:1:160x120 "
                      "--ablate --fit-iterations 4000 --csv " + csv.string());
    CHECK(r.exit_code == 0);
    auto rows = polysplat::parse_csv(slurp(csv));
    REQUIRE(rows.size() == 7);
    CHECK(rows[0].label_b == "exp/stp");
    CHECK(rows[1].label_b == "poly1/stp");
    CHECK(rows[2].label_b == "poly1/zero");
    CHECK(rows[3].label_b == "poly1/opacity");
    CHECK(rows[4].label_b == "poly2p/opacity");
    CHECK(rows[5].label_b == "poly3/stp");
    CHECK(rows[6].label_b == "poly3/opacity");
    for (const auto& row : rows) CHECK(row.label_a == "exp/stp");
    // reference row is the identity
    CHECK(std::isinf(rows[0].psnr_db));
    // the paper's ordering at a glance: higher order tracks the exponential closer
    CHECK(rows[6].ssim >= rows[3].ssim);
}

TEST_CASE("bench needs cameras and reports one row per camera") {
    CHECK(run("bench --scene synthetic:grid --cameras synthetic:orbit:0 --kernel exp "
              "--culling stp").exit_code == 2);

    fs::path csv = tmp("bench.csv");
    RunResult r = run("bench --scene synthetic:grid --cameras synthetic:orbit:4:160x120 "
                      "--kernel exp --culling stp --csv " + csv.string());
    CHECK(r.exit_code == 0);
    std::string doc = slurp(csv);
    int lines = 0;
    for (char ch : doc)
        if (ch == '\n') ++lines;
    CHECK(lines == 5); // header + 4 cameras
    CHECK(r.output.find("pairs_tight mean") != std::string::npos);
}

TEST_CASE("missing scene file exits 1") {
    RunResult r = run("render --scene /nonexistent.ply --cameras synthetic:orbit:1 "
                      "--out " + tmp("x.png").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("error") != std::string::npos);
}
