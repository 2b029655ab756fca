#include "polysplat/projection.hpp"
#include "polysplat/errors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polysplat {

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
    Mat3 rtr = rotation.transposed() * rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double expect = (i == j) ? 1.0 : 0.0;
            if (std::abs(rtr(i, j) - expect) > 1e-3)
                throw NonOrthonormalRotation("camera rotation is not orthonormal");
        }
    if (rotation.det() < 0.0)
        throw NonOrthonormalRotation("camera rotation is a reflection");
}

Mat3 build_covariance3d(const Vec3& scale, const Quat& rotation) {
    Mat3 r = rotation_from_quat(rotation);
    Mat3 rs = r;
    // columns scaled: R * diag(scale)
    for (int i = 0; i < 3; ++i) {
        rs(i, 0) *= scale.x;
        rs(i, 1) *= scale.y;
        rs(i, 2) *= scale.z;
    }
    return rs * rs.transposed();
}

std::optional<ProjectedSplat> project_splat(const Splat3D& splat, const Camera& cam,
                                            double v_dilation, int sh_degree) {
    Vec3 p = cam.rotation * splat.mean + cam.translation;
    if (p.z <= kNearPlane) return std::nullopt;

    double inv_z = 1.0 / p.z;
    Vec2 mean2d{cam.fx * p.x * inv_z + cam.cx, cam.fy * p.y * inv_z + cam.cy};

    // J W, with J the 2x3 perspective Jacobian at the splat center
    double jr0[3] = {cam.fx * inv_z, 0.0, -cam.fx * p.x * inv_z * inv_z};
    double jr1[3] = {0.0, cam.fy * inv_z, -cam.fy * p.y * inv_z * inv_z};
    const Mat3& w = cam.rotation;
    double m0[3], m1[3];
    for (int j = 0; j < 3; ++j) {
        m0[j] = jr0[0] * w(0, j) + jr0[1] * w(1, j) + jr0[2] * w(2, j);
        m1[j] = jr1[0] * w(0, j) + jr1[1] * w(1, j) + jr1[2] * w(2, j);
    }

    Mat3 cov3d = build_covariance3d(splat.scale, splat.rotation);
    double t0[3], t1[3]; // M * Sigma
    for (int j = 0; j < 3; ++j) {
        t0[j] = m0[0] * cov3d(0, j) + m0[1] * cov3d(1, j) + m0[2] * cov3d(2, j);
        t1[j] = m1[0] * cov3d(0, j) + m1[1] * cov3d(1, j) + m1[2] * cov3d(2, j);
    }
    Sym2 cov;
    cov.xx = t0[0] * m0[0] + t0[1] * m0[1] + t0[2] * m0[2];
    cov.xy = t0[0] * m1[0] + t0[1] * m1[1] + t0[2] * m1[2];
    cov.yy = t1[0] * m1[0] + t1[1] * m1[1] + t1[2] * m1[2];

    Sym2 cov_aa{cov.xx + v_dilation, cov.xy, cov.yy + v_dilation};
    double det_aa = cov_aa.det();
    if (det_aa <= 1e-12) throw DegenerateCovariance("dilated 2D covariance is singular");
    double det = cov.det();
    double ratio = det > 0.0 ? std::sqrt(det / det_aa) : 0.0;

    ProjectedSplat out;
    out.mean2d = mean2d;
    out.cov_aa = cov_aa;
    out.conic = cov_aa.inverse();
    out.depth = p.z;
    out.opacity_eff = splat.opacity * ratio;
    out.color = eval_sh_color(splat.sh, (splat.mean - cam.position()).normalized(), sh_degree);
    return out;
}

// ------------------------------------------------------------- sh color

namespace {
constexpr double kSH0 = 0.28209479177387814;
constexpr double kSH1 = 0.4886025119029199;
constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                            -1.0925484305920792, 0.5462742152960396};
constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                            0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                            -0.5900435899266435};
} // namespace

Vec3 eval_sh_color(const std::array<Vec3, 16>& sh, const Vec3& d, int degree) {
    Vec3 c = sh[0] * kSH0;
    if (degree >= 1) {
        c = c - sh[1] * (kSH1 * d.y) + sh[2] * (kSH1 * d.z) - sh[3] * (kSH1 * d.x);
    }
    if (degree >= 2) {
        double xx = d.x * d.x, yy = d.y * d.y, zz = d.z * d.z;
        double xy = d.x * d.y, yz = d.y * d.z, xz = d.x * d.z;
        c = c + sh[4] * (kSH2[0] * xy) + sh[5] * (kSH2[1] * yz) +
            sh[6] * (kSH2[2] * (2.0 * zz - xx - yy)) + sh[7] * (kSH2[3] * xz) +
            sh[8] * (kSH2[4] * (xx - yy));
        if (degree >= 3) {
            c = c + sh[9] * (kSH3[0] * d.y * (3.0 * xx - yy)) + sh[10] * (kSH3[1] * xy * d.z) +
                sh[11] * (kSH3[2] * d.y * (4.0 * zz - xx - yy)) +
                sh[12] * (kSH3[3] * d.z * (2.0 * zz - 3.0 * xx - 3.0 * yy)) +
                sh[13] * (kSH3[4] * d.x * (4.0 * zz - xx - yy)) +
                sh[14] * (kSH3[5] * d.z * (xx - yy)) + sh[15] * (kSH3[6] * d.x * (xx - yy));
        }
    }
    c.x = std::max(c.x + 0.5, 0.0);
    c.y = std::max(c.y + 0.5, 0.0);
    c.z = std::max(c.z + 0.5, 0.0);
    return c;
}

// ------------------------------------------------- normalization integral

double normalization_integral(const KernelSpec& spec, const Sym2& cov2d) {
    if (!cov2d.positive_definite())
        throw std::invalid_argument("covariance must be positive definite");

    double x_max = spec.is_polynomial() ? spec.first_root : -2.0 * std::log(1e-7);
    double r_max = std::sqrt(x_max);

    // Ellipse-aligned polar parametrization; the quadric is evaluated through
    // the numerically inverted covariance rather than assumed to equal r^2.
    auto lam = eigenvalues(cov2d);
    Vec2 e0 = eigenvector(cov2d, lam[0]);
    Vec2 e1{-e0.y, e0.x};
    double a0 = std::sqrt(lam[0]), a1 = std::sqrt(lam[1]);
    Sym2 conic = cov2d.inverse();

    const int n_theta = 256;
    const int n_r = 512; // Simpson intervals (even)
    const double dth = 2.0 * std::numbers::pi / n_theta;
    const double dr = r_max / n_r;

    double total = 0.0;
    for (int it = 0; it < n_theta; ++it) {
        double th = (it + 0.5) * dth;
        double ux = std::cos(th) * a0 * e0.x + std::sin(th) * a1 * e1.x;
        double uy = std::cos(th) * a0 * e0.y + std::sin(th) * a1 * e1.y;
        double line = 0.0;
        for (int ir = 0; ir <= n_r; ++ir) {
            double r = ir * dr;
            double q = conic.quadric(r * ux, r * uy);
            double f = eval_kernel(spec, q) * r;
            double w = (ir == 0 || ir == n_r) ? 1.0 : (ir % 2 ? 4.0 : 2.0);
            line += w * f;
        }
        total += line * dr / 3.0;
    }
    // area element |d v| = sqrt(lam0 * lam1) r dr dtheta
    return total * dth * a0 * a1;
}

} // namespace polysplat
