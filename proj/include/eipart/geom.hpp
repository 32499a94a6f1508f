// geom.hpp -- small vector/box/transform types shared by every module.
//
// Double precision throughout. Meshes are normalized into [-1,1]^3 early in
// the pipeline and all downstream code assumes that range.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace eipart {

// Base class for all library errors; concrete error types live in the
// module that raises them.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (OBJ, GLB, .voxels, JSON).
struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(what) {}
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec3{};
}

inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

// Axis-aligned box, min <= max componentwise once at least one point is in.
struct Aabb {
    Vec3 min{+std::numeric_limits<double>::infinity(),
             +std::numeric_limits<double>::infinity(),
             +std::numeric_limits<double>::infinity()};
    Vec3 max{-std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
    void extend(const Vec3& p) { min = cwise_min(min, p); max = cwise_max(max, p); }
    void extend(const Aabb& b) { min = cwise_min(min, b.min); max = cwise_max(max, b.max); }
    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
    double longest_extent() const {
        const Vec3 e = extent();
        return std::max(e.x, std::max(e.y, e.z));
    }
    double volume() const {
        const Vec3 e = extent();
        return e.x * e.y * e.z;
    }
    bool overlaps(const Aabb& o) const {
        return min.x <= o.max.x && o.min.x <= max.x &&
               min.y <= o.max.y && o.min.y <= max.y &&
               min.z <= o.max.z && o.min.z <= max.z;
    }
    Aabb inflated(double margin) const {
        Aabb r;
        r.min = min - Vec3{margin, margin, margin};
        r.max = max + Vec3{margin, margin, margin};
        return r;
    }
};

// Uniform scale followed by translation: p' = scale * p + translation.
struct SimilarityTransform {
    double scale = 1.0;
    Vec3 translation{};

    Vec3 apply(const Vec3& p) const { return p * scale + translation; }
    SimilarityTransform inverse() const {
        return {1.0 / scale, translation / -scale};
    }
    bool is_identity(double eps = 0.0) const {
        return std::abs(scale - 1.0) <= eps && std::abs(translation.x) <= eps &&
               std::abs(translation.y) <= eps && std::abs(translation.z) <= eps;
    }
};

// Column-major 4x4 affine matrix; just enough for glTF node flattening.
struct Mat4 {
    std::array<double, 16> m{};  // m[col*4 + row]

    static Mat4 identity() {
        Mat4 r;
        r.m[0] = r.m[5] = r.m[10] = r.m[15] = 1.0;
        return r;
    }

    static Mat4 from_trs(const Vec3& t, const std::array<double, 4>& quat_xyzw, const Vec3& s) {
        const double qx = quat_xyzw[0], qy = quat_xyzw[1], qz = quat_xyzw[2], qw = quat_xyzw[3];
        Mat4 r = identity();
        // rotation matrix from unit quaternion, columns scaled by s
        r.m[0] = (1 - 2 * (qy * qy + qz * qz)) * s.x;
        r.m[1] = (2 * (qx * qy + qz * qw)) * s.x;
        r.m[2] = (2 * (qx * qz - qy * qw)) * s.x;
        r.m[4] = (2 * (qx * qy - qz * qw)) * s.y;
        r.m[5] = (1 - 2 * (qx * qx + qz * qz)) * s.y;
        r.m[6] = (2 * (qy * qz + qx * qw)) * s.y;
        r.m[8] = (2 * (qx * qz + qy * qw)) * s.z;
        r.m[9] = (2 * (qy * qz - qx * qw)) * s.z;
        r.m[10] = (1 - 2 * (qx * qx + qy * qy)) * s.z;
        r.m[12] = t.x;
        r.m[13] = t.y;
        r.m[14] = t.z;
        return r;
    }

    Mat4 operator*(const Mat4& o) const {
        Mat4 r;
        for (int c = 0; c < 4; ++c)
            for (int row = 0; row < 4; ++row) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += m[k * 4 + row] * o.m[c * 4 + k];
                r.m[c * 4 + row] = acc;
            }
        return r;
    }

    Vec3 transform_point(const Vec3& p) const {
        return {m[0] * p.x + m[4] * p.y + m[8] * p.z + m[12],
                m[1] * p.x + m[5] * p.y + m[9] * p.z + m[13],
                m[2] * p.x + m[6] * p.y + m[10] * p.z + m[14]};
    }
};

}  // namespace eipart
