#pragma once

#include <array>
#include <cmath>

namespace polysplat {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{0.0, 0.0, 0.0};
    }
};

// Unit quaternion, scalar part first (w, x, y, z).
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        double n = norm();
        if (n < 1e-12) return Quat{};
        return {w / n, x / n, y / n, z / n};
    }
};

// Symmetric 2x2 matrix [ [xx, xy], [xy, yy] ].
struct Sym2 {
    double xx = 0.0, xy = 0.0, yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }
    Sym2 inverse() const {
        double d = det();
        return {yy / d, -xy / d, xx / d};
    }
    bool positive_definite() const { return xx > 0.0 && det() > 0.0; }
    // Quadric (v)^T M (v) for v = (dx, dy).
    double quadric(double dx, double dy) const {
        return xx * dx * dx + 2.0 * xy * dx * dy + yy * dy * dy;
    }
};

struct Mat3 {
    // row-major
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[r * 3 + c]; }
    double& operator()(int r, int c) { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
    Vec3 transposed_mul(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }
};

inline Mat3 rotation_from_quat(const Quat& q0) {
    Quat q = q0.normalized();
    double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r(0, 0) = 1 - 2 * (y * y + z * z);
    r(0, 1) = 2 * (x * y - w * z);
    r(0, 2) = 2 * (x * z + w * y);
    r(1, 0) = 2 * (x * y + w * z);
    r(1, 1) = 1 - 2 * (x * x + z * z);
    r(1, 2) = 2 * (y * z - w * x);
    r(2, 0) = 2 * (x * z - w * y);
    r(2, 1) = 2 * (y * z + w * x);
    r(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

// Eigenvalues of a symmetric 2x2, descending order.
inline std::array<double, 2> eigenvalues(const Sym2& s) {
    double half_tr = 0.5 * s.trace();
    double d = std::sqrt(std::max(0.0, half_tr * half_tr - s.det()));
    return {half_tr + d, half_tr - d};
}

// Unit eigenvector for the given eigenvalue of a symmetric 2x2.
inline Vec2 eigenvector(const Sym2& s, double lambda) {
    // (xx - l) vx + xy vy = 0
    double ax = s.xy, ay = lambda - s.xx;
    double bx = lambda - s.yy, by = s.xy;
    double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    if (na >= nb) {
        if (na < 1e-300) return {1.0, 0.0};
        return {ax / na, ay / na};
    }
    return {bx / nb, by / nb};
}

} // namespace polysplat
