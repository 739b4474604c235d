#pragma once

#include <array>
#include <span>
#include <vector>

namespace gk {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
};

/// Oriented grasp rectangle. (x, y) is the center in pixels, w the gripper
/// opening measured along the closing direction, h the rectangle width
/// perpendicular to it, theta the angle in degrees between the closing
/// direction and the image x-axis, normalized to [0, 180).
struct GraspRect {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    double theta = 0.0;
    int category = 0;
    double confidence = 1.0;
};

/// Convex quadrilateral, vertices in counter-clockwise order.
using Quad = std::array<Vec2, 4>;

/// Maps any finite angle into [0, 180); a grasp at theta and theta + 180
/// is the same physical grasp.
double normalize_angle_deg(double theta);

/// Throws std::invalid_argument when w/h are non-positive or any field is
/// non-finite.
void validate_rect(const GraspRect& r);

/// Returns a rect with theta normalized and fields validated.
GraspRect make_rect(double x, double y, double w, double h, double theta,
                    int category = 0, double confidence = 1.0);

/// Corners of the w x h rectangle centered at (x, y) rotated by theta.
/// Vertex 0 -> 1 runs along the closing direction (the w side); order is
/// counter-clockwise in the conventional y-down image frame.
Quad rect_to_quad(const GraspRect& r);

/// Least-squares rectangle fit to four vertices (exact for true rectangles).
/// The fitted w side follows the v0 -> v1 edge direction.
GraspRect fit_rect_to_quad(const Quad& q);

/// Signed shoelace area; counter-clockwise polygons are positive.
double polygon_area(std::span<const Vec2> pts);

double quad_area(const Quad& q);

/// Area of the intersection of two convex quads (Sutherland-Hodgman
/// clipping + shoelace). Disjoint quads yield 0.
double convex_intersection_area(const Quad& a, const Quad& b);

/// |A n B| / |A u B| over the rotated rectangles, in [0, 1].
double jaccard(const GraspRect& a, const GraspRect& b);

/// min_k |a - b + 180k|, in [0, 90].
double angle_diff_deg(double theta_a, double theta_b);

double center_distance_sq(const GraspRect& a, const GraspRect& b);

/// Squared diagonal of the smallest axis-aligned box containing all eight
/// corners of both rectangles.
double enclosing_diagonal_sq(const GraspRect& a, const GraspRect& b);

}  // namespace gk
