#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polysplat {

enum class KernelKind {
    Exponential,         // exp(-x/2)
    PolynomialRelu,      // max(sum c_i x^i, 0)
    PolynomialPiecewise, // sum c_i x^i for x < first_root, 0 otherwise
};

// A splatting kernel: scalar function of the quadric value x = Q(v) >= 0.
struct KernelSpec {
    KernelKind kind = KernelKind::Exponential;
    int order = 0;              // polynomial order N in {1,2,3}; unused for Exponential
    std::vector<double> coeffs; // c_0..c_N, constant term first; unused for Exponential
    double first_root = std::numeric_limits<double>::infinity();

    bool is_polynomial() const { return kind != KernelKind::Exponential; }
};

KernelSpec make_exponential_kernel();

// Builds a polynomial kernel, computing and caching the first positive root.
// Throws std::invalid_argument on bad order/coefficients, NoPositiveRoot if
// the polynomial never crosses zero.
KernelSpec make_polynomial_kernel(KernelKind kind, std::vector<double> coeffs);

double eval_kernel(const KernelSpec& spec, double x);

// Evaluates the raw polynomial (no ReLU / truncation), constant term first.
double eval_poly(std::span<const double> coeffs, double x);

// Smallest x > 0 with p(x) = 0 for polynomials of order <= 3 (closed forms,
// trigonometric fallback for the three-real-root cubic case). Requires p(0) > 0.
// Throws NoPositiveRoot when no positive real root exists.
double first_positive_root(std::span<const double> coeffs);

struct FitConfig {
    int order = 1;
    double epsilon = 1.0 / 255.0; // cutoff defining the fit range -2 ln(eps)
    int sample_count = 4096;
    int iterations = 30000;
    double step_size = 0.01;
    std::uint64_t seed = 0; // reserved; the dense-grid fit is fully deterministic
    std::optional<double> x_max_override; // extended-range fit (tile worst case)

    double fit_range() const;
    void validate() const; // throws std::invalid_argument
};

struct FitResult {
    KernelSpec kernel; // PolynomialRelu with the fitted coefficients
    double final_l1_loss = 0.0;
    std::vector<double> loss_history; // best-so-far loss per iteration
};

// Fits an order-N ReLU polynomial to exp(-x/2) on a dense uniform grid over
// [0, fit range] with an L1 loss and Adam-style subgradient descent. The
// order-N fit starts from the order-(N-1) coefficients padded with a zero
// leading term (order 1 starts from the least-squares line), so the final
// loss is nonincreasing in N. Deterministic given the config.
FitResult fit_polynomial(const FitConfig& cfg);

// Radius (in sigma units) at which a splat's contribution drops to epsilon.
struct CullingBound {
    double radius_sigma = 0.0;
    double quadric_root = 0.0; // radius_sigma^2
    bool opacity_aware = false;
};

// Solves opacity * kernel(t^2) = epsilon for the smallest positive t.
// epsilon = 0 gives the universal zero-crossing bound (polynomials only).
// Throws FullyCulled when opacity * kernel(0) <= epsilon, and
// EpsilonZeroUnbounded for the exponential with epsilon = 0.
CullingBound culling_radius(const KernelSpec& spec, double opacity, double epsilon);

// Non-throwing variant for the rasterizer hot path; nullopt means fully culled.
// Exponential with epsilon = 0 still throws (config error, not a data case).
std::optional<CullingBound> try_culling_radius(const KernelSpec& spec, double opacity,
                                               double epsilon);

// Worst-case quadric value reachable under tile-based culling:
// x_max = (sqrt(2) p_t / s_min + sqrt(-2 ln eps))^2.
double extended_fit_range_xmax(double tile_size_px, double s_min, double epsilon);

// --- kernel file (small text document: key/value) ---

struct KernelFile {
    KernelSpec kernel;
    double epsilon = 1.0 / 255.0;
    double fit_range = 0.0;
};

std::string kernel_file_to_text(const KernelFile& kf);
KernelFile kernel_file_from_text(const std::string& text); // throws ParseError
void save_kernel_file(const KernelFile& kf, const std::string& path);
KernelFile load_kernel_file(const std::string& path); // throws IoError/ParseError

} // namespace polysplat
