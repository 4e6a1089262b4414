#pragma once

#include <array>
#include <cmath>

namespace avatar::geometry {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;

    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

/// Unit vector along v. Throws ZeroVector when |v| <= 1e-9.
Vec3 normalized(const Vec3& v);

inline constexpr Vec3 kUnitX{1.0, 0.0, 0.0};
inline constexpr Vec3 kUnitY{0.0, 1.0, 0.0};
inline constexpr Vec3 kUnitZ{0.0, 0.0, 1.0};

struct HomogeneousPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double w = 1.0;

    static constexpr HomogeneousPoint from(const Vec3& v) { return {v.x, v.y, v.z, 1.0}; }
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Row-major 4x4.
struct Mat4 {
    std::array<double, 16> m{};

    static constexpr Mat4 identity() {
        Mat4 r;
        r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
        return r;
    }

    constexpr double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 4 + col)]; }
    constexpr double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 4 + col)]; }

    Mat4 operator*(const Mat4& o) const;
};

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{};

    static constexpr Mat3 identity() {
        Mat3 r;
        r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return r;
    }

    constexpr double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 3 + col)]; }
    constexpr double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 3 + col)]; }

    Mat3 operator*(const Mat3& o) const;
    Vec3 operator*(const Vec3& v) const;

    [[nodiscard]] Mat3 transposed() const;
    [[nodiscard]] double determinant() const;
};

/// Roll about x (phi), yaw about y (theta), pitch about z (psi). Applied x first, then y, then z.
struct EulerAngles {
    double phi = 0.0;
    double theta = 0.0;
    double psi = 0.0;
};

struct Quaternion {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double w = 1.0;

    static constexpr Quaternion identity() { return {0.0, 0.0, 0.0, 1.0}; }

    [[nodiscard]] constexpr Quaternion conjugate() const { return {-x, -y, -z, w}; }
    [[nodiscard]] double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }
    [[nodiscard]] Quaternion normalized() const;

    /// Rotation of `angle` radians about `axis` (normalized internally).
    static Quaternion from_axis_angle(const Vec3& axis, double angle);
};

/// Camera for the reduced 3x3 perspective projection. `surface` is the display surface
/// offset e; surface.z must be non-zero.
struct CameraPose {
    Vec3 position;
    EulerAngles orientation;
    Vec3 surface{0.0, 0.0, 1.0};
};

// Homogeneous transform constructors.
Mat4 make_scale(double sx, double sy, double sz);
Mat4 make_rotation_x(double theta);
Mat4 make_rotation_y(double theta);
Mat4 make_rotation_z(double theta);
Mat4 make_translation(double tx, double ty, double tz);

HomogeneousPoint transform(const Mat4& m, const HomogeneousPoint& p);

/// Perspective projection through the four-factor 3x3 product applied to (p - c), followed
/// by the divide by f_w. Throws DegenerateProjection when |f_w| < 1e-12.
Point2 project(const CameraPose& camera, const Vec3& p);

inline constexpr double kDegenerateProjectionEpsilon = 1e-12;

Mat3 euler_to_matrix(const EulerAngles& a);
Quaternion euler_to_quaternion(const EulerAngles& a);

/// Hamilton product a*b, renormalized. Rotating by the result applies b first, then a.
Quaternion quaternion_multiply(const Quaternion& a, const Quaternion& b);

Vec3 rotate_vector(const Quaternion& q, const Vec3& v);

/// Minimal-arc rotation taking unit(a) onto unit(b). Throws ZeroVector for |a| or |b| <= 1e-9.
Quaternion quaternion_between(const Vec3& a, const Vec3& b);

Mat3 quaternion_to_matrix(const Quaternion& q);

}  // namespace avatar::geometry
