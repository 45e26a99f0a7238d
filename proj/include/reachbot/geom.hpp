#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace reachbot {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    Vec3 normalized() const {
        const double n = norm();
        if (n < 1e-12) throw std::domain_error("cannot normalize near-zero vector");
        return {x / n, y / n, z / n};
    }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
    double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                            (*this)(r, 2) * o(2, c);
            }
        }
        return out;
    }

    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
        return out;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    // Frobenius distance to orthonormality, used by validity checks.
    double orthonormality_error() const {
        const Mat3 g = transposed() * (*this);
        double err = 0.0;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                const double target = (r == c) ? 1.0 : 0.0;
                err += (g(r, c) - target) * (g(r, c) - target);
            }
        }
        return std::sqrt(err);
    }
};

// Rodrigues rotation about a unit axis.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double t = 1.0 - c;
    const double ax = axis.x, ay = axis.y, az = axis.z;
    Mat3 r;
    r(0, 0) = t * ax * ax + c;
    r(0, 1) = t * ax * ay - s * az;
    r(0, 2) = t * ax * az + s * ay;
    r(1, 0) = t * ax * ay + s * az;
    r(1, 1) = t * ay * ay + c;
    r(1, 2) = t * ay * az - s * ax;
    r(2, 0) = t * ax * az - s * ay;
    r(2, 1) = t * ay * az + s * ax;
    r(2, 2) = t * az * az + c;
    return r;
}

// Intrinsic roll-pitch-yaw: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rpy_rotation(double roll, double pitch, double yaw) {
    const Mat3 rx = axis_angle({1, 0, 0}, roll);
    const Mat3 ry = axis_angle({0, 1, 0}, pitch);
    const Mat3 rz = axis_angle({0, 0, 1}, yaw);
    return rz * ry * rx;
}

struct RigidTransform {
    Mat3 rotation;
    Vec3 translation;

    bool valid(double tol = 1e-9) const {
        return rotation.orthonormality_error() <= tol &&
               std::abs(rotation.det() - 1.0) <= tol;
    }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform compose(const RigidTransform& o) const {
        return {rotation * o.rotation, rotation * o.translation + translation};
    }

    RigidTransform inverse() const {
        const Mat3 rt = rotation.transposed();
        return {rt, -(rt * translation)};
    }

    static RigidTransform identity() { return {}; }
};

inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) { return t.apply(p); }

}  // namespace reachbot
