#include "avatar/geometry.hpp"

#include "avatar/error.hpp"

namespace avatar::geometry {

Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    if (!(n > 1e-9)) throw Error(ErrorCode::ZeroVector, "cannot normalize a near-zero vector");
    return v / n;
}

Mat4 Mat4::operator*(const Mat4& o) const {
    Mat4 r;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += (*this)(i, k) * o(k, j);
            r(i, j) = s;
        }
    return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
            r(i, j) = s;
        }
    return r;
}

Vec3 Mat3::operator*(const Vec3& v) const {
    const auto& a = *this;
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

Mat3 Mat3::transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
}

double Mat3::determinant() const {
    const auto& a = *this;
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Quaternion Quaternion::normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n, w / n};
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
    const Vec3 u = geometry::normalized(axis);
    const double s = std::sin(angle / 2.0);
    return {u.x * s, u.y * s, u.z * s, std::cos(angle / 2.0)};
}

Mat4 make_scale(double sx, double sy, double sz) {
    Mat4 r = Mat4::identity();
    r(0, 0) = sx;
    r(1, 1) = sy;
    r(2, 2) = sz;
    return r;
}

Mat4 make_rotation_x(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat4 r = Mat4::identity();
    r(1, 1) = c;
    r(1, 2) = -s;
    r(2, 1) = s;
    r(2, 2) = c;
    return r;
}

Mat4 make_rotation_y(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat4 r = Mat4::identity();
    r(0, 0) = c;
    r(0, 2) = s;
    r(2, 0) = -s;
    r(2, 2) = c;
    return r;
}

Mat4 make_rotation_z(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat4 r = Mat4::identity();
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

Mat4 make_translation(double tx, double ty, double tz) {
    Mat4 r = Mat4::identity();
    r(0, 3) = tx;
    r(1, 3) = ty;
    r(2, 3) = tz;
    return r;
}

HomogeneousPoint transform(const Mat4& m, const HomogeneousPoint& p) {
    const std::array<double, 4> in{p.x, p.y, p.z, p.w};
    std::array<double, 4> out{};
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += m(i, k) * in[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return {out[0], out[1], out[2], out[3]};
}

Point2 project(const CameraPose& camera, const Vec3& p) {
    const Vec3& e = camera.surface;
    if (e.z == 0.0) throw Error(ErrorCode::DegenerateProjection, "display surface has e_z = 0");

    const double cx = std::cos(camera.orientation.phi), sx = std::sin(camera.orientation.phi);
    const double cy = std::cos(camera.orientation.theta), sy = std::sin(camera.orientation.theta);
    const double cz = std::cos(camera.orientation.psi), sz = std::sin(camera.orientation.psi);

    Mat3 surface;
    surface.m = {1, 0, e.x / e.z, 0, 1, e.y / e.z, 0, 0, 1.0 / e.z};
    Mat3 rx;
    rx.m = {1, 0, 0, 0, cx, sx, 0, -sx, cx};
    Mat3 ry;
    ry.m = {cy, 0, -sy, 0, 1, 0, sy, 0, cy};
    Mat3 rz;
    rz.m = {cz, sz, 0, -sz, cz, 0, 0, 0, 1};

    const Vec3 f = surface * (rx * (ry * (rz * (p - camera.position))));
    if (std::abs(f.z) < kDegenerateProjectionEpsilon)
        throw Error(ErrorCode::DegenerateProjection, "point lies on the camera plane");
    return {f.x / f.z, f.y / f.z};
}

Mat3 euler_to_matrix(const EulerAngles& a) {
    const double cp = std::cos(a.phi), sp = std::sin(a.phi);
    const double ct = std::cos(a.theta), st = std::sin(a.theta);
    const double cs = std::cos(a.psi), ss = std::sin(a.psi);
    Mat3 rz;
    rz.m = {cs, -ss, 0, ss, cs, 0, 0, 0, 1};
    Mat3 ry;
    ry.m = {ct, 0, st, 0, 1, 0, -st, 0, ct};
    Mat3 rx;
    rx.m = {1, 0, 0, 0, cp, -sp, 0, sp, cp};
    return rz * ry * rx;
}

Quaternion euler_to_quaternion(const EulerAngles& a) {
    const double cp = std::cos(a.phi / 2), sp = std::sin(a.phi / 2);
    const double ct = std::cos(a.theta / 2), st = std::sin(a.theta / 2);
    const double cs = std::cos(a.psi / 2), ss = std::sin(a.psi / 2);
    return {sp * ct * cs - cp * st * ss,
            cp * st * cs + sp * ct * ss,
            cp * ct * ss - sp * st * cs,
            cp * ct * cs + sp * st * ss};
}

Quaternion quaternion_multiply(const Quaternion& a, const Quaternion& b) {
    const Quaternion r{a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                       a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                       a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
                       a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z};
    return r.normalized();
}

Vec3 rotate_vector(const Quaternion& q, const Vec3& v) {
    // v' = v + 2w(u x v) + 2 u x (u x v), u the vector part.
    const Vec3 u{q.x, q.y, q.z};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * q.w + cross(u, t);
}

Quaternion quaternion_between(const Vec3& a, const Vec3& b) {
    const Vec3 ua = normalized(a);
    const Vec3 ub = normalized(b);
    const double d = dot(ua, ub);
    if (d < -1.0 + 1e-6) {
        // Half turn about a fixed axis made perpendicular to a.
        const Vec3 fallback = std::abs(dot(ua, kUnitY)) < 0.9 ? kUnitY : kUnitZ;
        const Vec3 axis = normalized(fallback - ua * dot(fallback, ua));
        return {axis.x, axis.y, axis.z, 0.0};
    }
    const Vec3 c = cross(ua, ub);
    return Quaternion{c.x, c.y, c.z, 1.0 + d}.normalized();
}

Mat3 quaternion_to_matrix(const Quaternion& q) {
    const double x = q.x, y = q.y, z = q.z, w = q.w;
    Mat3 r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
           2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
           2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
    return r;
}

}  // namespace avatar::geometry
