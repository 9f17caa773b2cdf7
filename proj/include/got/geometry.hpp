#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace got {

// Points always carry three coordinates; planar data leaves z at zero.
struct Point {
    std::array<double, 3> x{0.0, 0.0, 0.0};

    constexpr double operator[](std::size_t i) const { return x[i]; }
    constexpr double& operator[](std::size_t i) { return x[i]; }
    friend constexpr bool operator==(const Point&, const Point&) = default;
    friend constexpr auto operator<=>(const Point&, const Point&) = default;
};

constexpr Point make_point(double x, double y, double z = 0.0) { return Point{{x, y, z}}; }

inline Point operator+(Point a, const Point& b) {
    for (std::size_t i = 0; i < 3; ++i) a[i] += b[i];
    return a;
}
inline Point operator-(Point a, const Point& b) {
    for (std::size_t i = 0; i < 3; ++i) a[i] -= b[i];
    return a;
}
inline Point operator*(double s, Point a) {
    for (auto& v : a.x) v *= s;
    return a;
}
inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }

struct SegmentProjection {
    double t = 0.0;         // parameter in [0,1]
    double distance = 0.0;  // Euclidean distance to the closest point
};

SegmentProjection project_onto_segment(const Point& p, const Point& a, const Point& b);

class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Point> vertices);

    std::span<const Point> vertices() const { return vertices_; }
    bool empty() const { return vertices_.size() < 2; }
    double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    const Point& front() const { return vertices_.front(); }
    const Point& back() const { return vertices_.back(); }

    // Point at arclength s, clamped to [0, length()].
    Point at(double s) const;

    struct Closest {
        double arclength = 0.0;
        double distance = 0.0;
    };
    // Lowest arclength wins ties.
    Closest closest(const Point& p) const;

private:
    std::vector<Point> vertices_;
    std::vector<double> cumulative_;
};

}  // namespace got
