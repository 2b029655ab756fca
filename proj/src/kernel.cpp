#include "polysplat/kernel.hpp"
#include "polysplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace polysplat {

namespace {

double horner(std::span<const double> c, double x) {
    double p = c.back();
    for (int i = static_cast<int>(c.size()) - 2; i >= 0; --i) p = p * x + c[i];
    return p;
}

double horner_derivative(std::span<const double> c, double x) {
    int n = static_cast<int>(c.size()) - 1;
    double p = c[n] * n;
    for (int i = n - 1; i >= 1; --i) p = p * x + c[i] * i;
    return p;
}

// One or two guarded Newton steps to tighten a closed-form root.
double polish_root(std::span<const double> c, double x) {
    for (int it = 0; it < 2; ++it) {
        double f = horner(c, x);
        double d = horner_derivative(c, x);
        if (d == 0.0) break;
        double nx = x - f / d;
        if (!(nx > 0.0) || !std::isfinite(nx)) break;
        if (std::abs(horner(c, nx)) >= std::abs(f)) break;
        x = nx;
    }
    return x;
}

double root_linear(double c0, double c1) {
    if (c1 == 0.0) throw NoPositiveRoot("constant polynomial has no root");
    double x = -c0 / c1;
    if (!(x > 0.0)) throw NoPositiveRoot("linear root is not positive");
    return x;
}

double root_quadratic(std::span<const double> c) {
    double c0 = c[0], c1 = c[1], c2 = c[2];
    double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) throw NoPositiveRoot("quadratic has no real root");
    double s = std::sqrt(disc);
    double q = -0.5 * (c1 + std::copysign(s, c1));
    double best = std::numeric_limits<double>::infinity();
    if (q != 0.0) {
        double r = q / c2;
        if (r > 0.0 && std::isfinite(r)) best = std::min(best, r);
        r = c0 / q;
        if (r > 0.0 && std::isfinite(r)) best = std::min(best, r);
    } else {
        // c1 == 0 and disc == 0: double root at zero
        throw NoPositiveRoot("quadratic touches zero only at x = 0");
    }
    if (!std::isfinite(best)) throw NoPositiveRoot("quadratic has no positive root");
    return best;
}

double root_cubic(std::span<const double> c) {
    double c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3];
    double d0 = c2 * c2 - 3.0 * c3 * c1;
    double d1 = 2.0 * c2 * c2 * c2 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0;
    double disc = d1 * d1 - 4.0 * d0 * d0 * d0;

    double best = std::numeric_limits<double>::infinity();
    if (disc > 0.0) {
        // single real root
        double sq = std::sqrt(disc);
        double n = (d1 >= 0.0) ? 0.5 * (d1 + sq) : 0.5 * (d1 - sq); // avoid cancellation
        double C = std::cbrt(n);
        double x;
        if (C == 0.0) {
            x = -c2 / (3.0 * c3); // triple root
        } else {
            x = -(c2 + C + d0 / C) / (3.0 * c3);
        }
        if (x > 0.0) best = x;
    } else {
        // casus irreducibilis: three real roots, solve trigonometrically
        double p = (3.0 * c3 * c1 - c2 * c2) / (3.0 * c3 * c3);
        double q = (2.0 * c2 * c2 * c2 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0) /
                   (27.0 * c3 * c3 * c3);
        double mp3 = -p / 3.0;
        double m = 2.0 * std::sqrt(std::max(mp3, 0.0));
        double arg = 0.0;
        if (m > 0.0) arg = 3.0 * q / (p * m);
        arg = std::clamp(arg, -1.0, 1.0);
        double theta = std::acos(arg) / 3.0;
        double shift = -c2 / (3.0 * c3);
        for (int k = 0; k < 3; ++k) {
            double t = m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0);
            double x = t + shift;
            if (x > 0.0) best = std::min(best, x);
        }
    }
    if (!std::isfinite(best)) throw NoPositiveRoot("cubic has no positive root");
    return best;
}

} // namespace

double eval_poly(std::span<const double> coeffs, double x) {
    return horner(coeffs, x);
}

double first_positive_root(std::span<const double> coeffs) {
    if (coeffs.empty() || !(coeffs[0] > 0.0))
        throw std::invalid_argument("first_positive_root: polynomial must be positive at 0");
    std::size_t n = coeffs.size();
    if (n > 4) throw std::invalid_argument("first_positive_root: order above 3 unsupported");

    // degenerate leading coefficients fall back to the lower-order formulas
    while (n > 1 && std::abs(coeffs[n - 1]) < 1e-12) --n;
    std::span<const double> c = coeffs.subspan(0, n);

    double x;
    switch (n) {
        case 1: throw NoPositiveRoot("constant polynomial has no root");
        case 2: x = root_linear(c[0], c[1]); break;
        case 3: x = root_quadratic(c); break;
        default: x = root_cubic(c); break;
    }
    return polish_root(c, x);
}

KernelSpec make_exponential_kernel() {
    return KernelSpec{};
}

KernelSpec make_polynomial_kernel(KernelKind kind, std::vector<double> coeffs) {
    if (kind == KernelKind::Exponential)
        throw std::invalid_argument("make_polynomial_kernel: kind must be polynomial");
    int order = static_cast<int>(coeffs.size()) - 1;
    if (order < 1 || order > 3)
        throw std::invalid_argument("polynomial order must be in {1,2,3}");
    if (!(coeffs[0] > 0.0))
        throw std::invalid_argument("kernel must be positive at the splat center");
    if (order == 1 && !(coeffs[1] < 0.0))
        throw std::invalid_argument("order-1 kernel must decay (c_1 < 0)");

    KernelSpec spec;
    spec.kind = kind;
    spec.order = order;
    spec.first_root = first_positive_root(coeffs);
    spec.coeffs = std::move(coeffs);
    if (std::abs(eval_poly(spec.coeffs, spec.first_root)) >= 1e-9)
        throw Error("first root failed verification");
    return spec;
}

double eval_kernel(const KernelSpec& spec, double x) {
    switch (spec.kind) {
        case KernelKind::Exponential:
            return std::exp(-0.5 * x);
        case KernelKind::PolynomialRelu:
            return std::max(horner(spec.coeffs, x), 0.0);
        case KernelKind::PolynomialPiecewise:
            return x < spec.first_root ? horner(spec.coeffs, x) : 0.0;
    }
    return 0.0;
}

// ---------------------------------------------------------------- fitting

double FitConfig::fit_range() const {
    return x_max_override ? *x_max_override : -2.0 * std::log(epsilon);
}

void FitConfig::validate() const {
    if (order < 1 || order > 3) throw std::invalid_argument("fit order must be in {1,2,3}");
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
        throw std::invalid_argument("epsilon must be in (0,1)");
    if (sample_count < 2) throw std::invalid_argument("sample_count must be >= 2");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
    if (x_max_override && !(*x_max_override > 0.0))
        throw std::invalid_argument("x_max_override must be positive");
}

namespace {

double l1_loss(std::span<const double> c, std::span<const double> xs,
               std::span<const double> gs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double p = horner(c, xs[i]);
        double f = std::max(p, 0.0);
        sum += std::abs(f - gs[i]);
    }
    return sum / static_cast<double>(xs.size());
}

std::vector<double> least_squares_line(std::span<const double> xs, std::span<const double> gs) {
    double n = static_cast<double>(xs.size());
    double sx = 0, sxx = 0, sg = 0, sxg = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sxx += xs[i] * xs[i];
        sg += gs[i];
        sxg += xs[i] * gs[i];
    }
    double det = n * sxx - sx * sx;
    double slope = (n * sxg - sx * sg) / det;
    double intercept = (sg - slope * sx) / n;
    return {intercept, slope};
}

// Initial line for the order-1 fit. On extended ranges the grid is almost
// entirely past the exponential's support; a least-squares line over all of
// it is flat at zero, where the ReLU subgradient vanishes and the optimizer
// cannot recover. Restrict the init to the base support instead.
std::vector<double> initial_line(std::span<const double> xs, std::span<const double> gs,
                                 double epsilon) {
    double support = -2.0 * std::log(epsilon);
    std::size_t n = xs.size();
    while (n > 2 && xs[n - 1] > support) --n;
    return least_squares_line(xs.subspan(0, n), gs.subspan(0, n));
}

} // namespace

FitResult fit_polynomial(const FitConfig& cfg) {
    cfg.validate();
    const double range = cfg.fit_range();
    const int M = cfg.sample_count;
    const int nc = cfg.order + 1;

    std::vector<double> xs(M), gs(M);
    for (int i = 0; i < M; ++i) {
        xs[i] = range * static_cast<double>(i) / static_cast<double>(M - 1);
        gs[i] = std::exp(-0.5 * xs[i]);
    }

    // warm start: order N-1 coefficients padded with a zero leading term
    std::vector<double> c;
    if (cfg.order == 1) {
        c = initial_line(xs, gs, cfg.epsilon);
    } else {
        FitConfig sub = cfg;
        sub.order = cfg.order - 1;
        FitResult lower = fit_polynomial(sub);
        c = lower.kernel.coeffs;
        c.push_back(0.0);
    }

    const double initial_loss = l1_loss(c, xs, gs);
    double best_loss = initial_loss;
    std::vector<double> best_c = c;

    std::vector<double> m(nc, 0.0), v(nc, 0.0), grad(nc);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double b1t = 1.0, b2t = 1.0;

    std::vector<double> history;
    history.reserve(cfg.iterations);

    for (int t = 1; t <= cfg.iterations; ++t) {
        // one pass: loss and L1 subgradient of the current coefficients
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int i = 0; i < M; ++i) {
            double x = xs[i];
            double p = horner(c, x);
            if (p > 0.0) {
                double r = p - gs[i];
                loss += std::abs(r);
                double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                if (s != 0.0) {
                    double pw = s;
                    for (int j = 0; j < nc; ++j) {
                        grad[j] += pw;
                        pw *= x;
                    }
                }
            } else {
                loss += gs[i]; // ReLU clamps: zero subgradient
            }
        }
        loss /= M;
        if (loss < best_loss) {
            best_loss = loss;
            best_c = c;
        }
        history.push_back(best_loss);

        double step = cfg.step_size * (1.0 - static_cast<double>(t) / cfg.iterations);
        b1t *= beta1;
        b2t *= beta2;
        for (int j = 0; j < nc; ++j) {
            double g = grad[j] / M;
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            double mh = m[j] / (1.0 - b1t);
            double vh = v[j] / (1.0 - b2t);
            c[j] -= step * mh / (std::sqrt(vh) + adam_eps);
        }
    }

    double final_candidate = l1_loss(c, xs, gs);
    if (final_candidate < best_loss) {
        best_loss = final_candidate;
        best_c = c;
    }
    if (!history.empty()) history.back() = best_loss;

    if (best_loss > initial_loss)
        throw FitDiverged("final loss exceeds initial loss");
    if (!(best_c[0] > 0.0))
        throw FitDiverged("fitted kernel is not positive at the splat center");

    double root = first_positive_root(best_c);
    if (root > 4.0 * range)
        throw NoPositiveRoot("fitted polynomial does not cross zero on (0, 4*range]");

    FitResult result;
    result.kernel = make_polynomial_kernel(KernelKind::PolynomialRelu, best_c);
    result.final_l1_loss = best_loss;
    result.loss_history = std::move(history);
    return result;
}

// ---------------------------------------------------------------- culling

CullingBound culling_radius(const KernelSpec& spec, double opacity, double epsilon) {
    if (!(opacity > 0.0) || opacity > 1.0)
        throw std::invalid_argument("opacity must be in (0,1]");
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");

    if (spec.kind == KernelKind::Exponential) {
        if (epsilon == 0.0)
            throw EpsilonZeroUnbounded("exponential kernel has unbounded support at epsilon 0");
        if (!(opacity > epsilon)) throw FullyCulled("opacity below cutoff");
        double x = 2.0 * std::log(opacity / epsilon);
        return {std::sqrt(x), x, true};
    }

    if (!(opacity * spec.coeffs[0] > epsilon)) throw FullyCulled("opacity below cutoff");
    double x;
    if (epsilon == 0.0) {
        x = spec.first_root;
    } else {
        std::vector<double> shifted = spec.coeffs;
        shifted[0] -= epsilon / opacity;
        x = first_positive_root(shifted);
    }
    return {std::sqrt(x), x, epsilon > 0.0};
}

std::optional<CullingBound> try_culling_radius(const KernelSpec& spec, double opacity,
                                               double epsilon) {
    if (spec.kind == KernelKind::Exponential && epsilon == 0.0)
        throw EpsilonZeroUnbounded("exponential kernel has unbounded support at epsilon 0");
    try {
        return culling_radius(spec, opacity, epsilon);
    } catch (const FullyCulled&) {
        return std::nullopt;
    }
}

double extended_fit_range_xmax(double tile_size_px, double s_min, double epsilon) {
    if (tile_size_px < 0.0) throw std::invalid_argument("tile size must be >= 0");
    if (!(s_min > 0.0)) throw std::invalid_argument("s_min must be positive");
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
        throw std::invalid_argument("epsilon must be in (0,1)");
    double r = std::numbers::sqrt2 * tile_size_px / s_min + std::sqrt(-2.0 * std::log(epsilon));
    return r * r;
}

// ---------------------------------------------------------------- file io

namespace {

const char* kind_name(KernelKind k) {
    switch (k) {
        case KernelKind::Exponential: return "exponential";
        case KernelKind::PolynomialRelu: return "polynomial_relu";
        case KernelKind::PolynomialPiecewise: return "polynomial_piecewise";
    }
    return "?";
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string kernel_file_to_text(const KernelFile& kf) {
    std::ostringstream out;
    out << "kind " << kind_name(kf.kernel.kind) << "\n";
    out << "order " << kf.kernel.order << "\n";
    out << "coeffs";
    for (double c : kf.kernel.coeffs) out << ' ' << fmt17(c);
    out << "\n";
    out << "first_root "
        << (std::isinf(kf.kernel.first_root) ? std::string("inf") : fmt17(kf.kernel.first_root))
        << "\n";
    out << "epsilon " << fmt17(kf.epsilon) << "\n";
    out << "fit_range " << fmt17(kf.fit_range) << "\n";
    return out.str();
}

KernelFile kernel_file_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::string kind;
    std::vector<double> coeffs;
    KernelFile kf;
    bool have_kind = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "kind") {
            if (!(ls >> kind)) throw ParseError("kernel file: missing kind value");
            have_kind = true;
        } else if (key == "order") {
            int dummy; // order is implied by the coefficient count
            ls >> dummy;
        } else if (key == "coeffs") {
            double v;
            while (ls >> v) coeffs.push_back(v);
        } else if (key == "epsilon") {
            if (!(ls >> kf.epsilon)) throw ParseError("kernel file: bad epsilon");
        } else if (key == "fit_range") {
            if (!(ls >> kf.fit_range)) throw ParseError("kernel file: bad fit_range");
        } else if (key == "first_root") {
            std::string v; // recomputed below from the coefficients
            ls >> v;
        } else {
            throw ParseError("kernel file: unknown key '" + key + "'");
        }
    }
    if (!have_kind) throw ParseError("kernel file: missing kind");
    try {
        if (kind == "exponential") {
            kf.kernel = make_exponential_kernel();
        } else if (kind == "polynomial_relu") {
            kf.kernel = make_polynomial_kernel(KernelKind::PolynomialRelu, coeffs);
        } else if (kind == "polynomial_piecewise") {
            kf.kernel = make_polynomial_kernel(KernelKind::PolynomialPiecewise, coeffs);
        } else {
            throw ParseError("kernel file: unknown kind '" + kind + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("kernel file: ") + e.what());
    } catch (const NoPositiveRoot& e) {
        throw ParseError(std::string("kernel file: ") + e.what());
    }
    return kf;
}

void save_kernel_file(const KernelFile& kf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << kernel_file_to_text(kf);
    if (!out) throw IoError("failed writing '" + path + "'");
}

KernelFile load_kernel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return kernel_file_from_text(buf.str());
}

} // namespace polysplat
