// Small fixed-size vector types used by the physics and geometry code.
#pragma once

#include <cmath>

namespace trajnet {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 &operator+=(const Vec2 &o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
    friend constexpr Vec2 operator-(const Vec2 &a, const Vec2 &b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(const Vec2 &a, double s) { return {a.x * s, a.y * s}; }
    friend constexpr Vec2 operator*(double s, const Vec2 &a) { return {a.x * s, a.y * s}; }
    friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    friend constexpr bool operator==(const Vec3 &, const Vec3 &) = default;
};

constexpr double dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(const Vec2 &v) { return dot(v, v); }
inline double norm(const Vec2 &v) { return std::hypot(v.x, v.y); }
inline double distance(const Vec2 &a, const Vec2 &b) { return norm(a - b); }
inline bool is_finite(const Vec2 &v) { return std::isfinite(v.x) && std::isfinite(v.y); }
inline bool is_finite(const Vec3 &v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Distance from `p` to the closed segment [a, b].
inline double point_segment_distance(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
    const Vec2 ab = b - a;
    const double len2 = squared_norm(ab);
    if (len2 == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len2;
    t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
    return distance(p, a + ab * t);
}

} // namespace trajnet
