#include "graspkit/geom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gk {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Clip epsilon for degenerate intersection edges; areas below this count as 0.
constexpr double kAreaEps = 1e-12;

double deg_to_rad(double d) { return d * kPi / 180.0; }
double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace

double normalize_angle_deg(double theta) {
    double t = std::fmod(theta, 180.0);
    if (t < 0.0) t += 180.0;
    if (t >= 180.0) t = 0.0;  // fmod can land exactly on 180 after the add
    return t;
}

void validate_rect(const GraspRect& r) {
    if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.theta))
        throw std::invalid_argument("GraspRect: non-finite center or angle");
    if (!std::isfinite(r.w) || !std::isfinite(r.h) || r.w <= 0.0 || r.h <= 0.0)
        throw std::invalid_argument("GraspRect: w and h must be positive, got w=" +
                                    std::to_string(r.w) + " h=" + std::to_string(r.h));
}

GraspRect make_rect(double x, double y, double w, double h, double theta,
                    int category, double confidence) {
    GraspRect r{x, y, w, h, normalize_angle_deg(theta), category, confidence};
    validate_rect(r);
    return r;
}

Quad rect_to_quad(const GraspRect& r) {
    validate_rect(r);
    const double a = deg_to_rad(r.theta);
    const Vec2 u{std::cos(a), std::sin(a)};   // closing direction (w side)
    const Vec2 v{-std::sin(a), std::cos(a)};  // perpendicular (h side)
    const Vec2 c{r.x, r.y};
    const Vec2 du = u * (r.w * 0.5);
    const Vec2 dv = v * (r.h * 0.5);
    return Quad{c - du - dv, c + du - dv, c + du + dv, c - du + dv};
}

GraspRect fit_rect_to_quad(const Quad& q) {
    const Vec2 c = (q[0] + q[1] + q[2] + q[3]) * 0.25;
    // Mean edge vectors of the two opposite-side pairs.
    const Vec2 e1 = ((q[1] - q[0]) + (q[2] - q[3])) * 0.5;
    const Vec2 e2 = ((q[3] - q[0]) + (q[2] - q[1])) * 0.5;
    const double A = e1.dot(e1);
    const double B = e2.dot(e2);
    if (A <= kAreaEps || B <= kAreaEps)
        throw std::invalid_argument("fit_rect_to_quad: degenerate quad");
    const double a1 = std::atan2(e1.y, e1.x);
    const double a2 = std::atan2(e2.y, e2.x);
    // Orientation minimizing the squared corner residual
    //   f(t) = A sin^2(a1 - t) + B cos^2(a2 - t).
    double t = 0.5 * std::atan2(A * std::sin(2 * a1) - B * std::sin(2 * a2),
                                A * std::cos(2 * a1) - B * std::cos(2 * a2));
    // Two stationary points 90 degrees apart; keep w along the e1 edge.
    const double alt = t + kPi / 2.0;
    auto resid = [&](double th) {
        const double s1 = std::sin(a1 - th);
        const double c2 = std::cos(a2 - th);
        return A * s1 * s1 + B * c2 * c2;
    };
    if (resid(alt) < resid(t)) t = alt;
    const Vec2 u{std::cos(t), std::sin(t)};
    const Vec2 v{-std::sin(t), std::cos(t)};
    const double w = std::abs(e1.dot(u));
    const double h = std::abs(e2.dot(v));
    return make_rect(c.x, c.y, w, h, rad_to_deg(t));
}

double polygon_area(std::span<const Vec2> pts) {
    const size_t n = pts.size();
    if (n < 3) return 0.0;
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = pts[i];
        const Vec2& q = pts[(i + 1) % n];
        s += p.cross(q);
    }
    return 0.5 * s;
}

double quad_area(const Quad& q) {
    return std::abs(polygon_area(std::span<const Vec2>(q.data(), 4)));
}

double convex_intersection_area(const Quad& a, const Quad& b) {
    // Sutherland-Hodgman: clip polygon `a` against each edge of convex `b`.
    std::vector<Vec2> poly(a.begin(), a.end());
    // Ensure the clip polygon winds counter-clockwise.
    std::array<Vec2, 4> clip = b;
    if (polygon_area(std::span<const Vec2>(clip.data(), 4)) < 0.0)
        std::reverse(clip.begin(), clip.end());

    std::vector<Vec2> next;
    for (int e = 0; e < 4 && !poly.empty(); ++e) {
        const Vec2 p0 = clip[e];
        const Vec2 p1 = clip[(e + 1) % 4];
        const Vec2 dir = p1 - p0;
        next.clear();
        const size_t n = poly.size();
        for (size_t i = 0; i < n; ++i) {
            const Vec2 cur = poly[i];
            const Vec2 nxt = poly[(i + 1) % n];
            const double dc = dir.cross(cur - p0);
            const double dn = dir.cross(nxt - p0);
            const bool cur_in = dc >= -kAreaEps;
            const bool nxt_in = dn >= -kAreaEps;
            if (cur_in) next.push_back(cur);
            if (cur_in != nxt_in) {
                const double denom = dc - dn;
                if (std::abs(denom) > kAreaEps) {
                    const double s = dc / denom;
                    next.push_back(cur + (nxt - cur) * s);
                }
            }
        }
        poly.swap(next);
    }
    const double area = std::abs(polygon_area(poly));
    return area < kAreaEps ? 0.0 : area;
}

double jaccard(const GraspRect& a, const GraspRect& b) {
    const Quad qa = rect_to_quad(a);
    const Quad qb = rect_to_quad(b);
    const double inter = convex_intersection_area(qa, qb);
    const double uni = quad_area(qa) + quad_area(qb) - inter;
    if (uni <= kAreaEps) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double angle_diff_deg(double theta_a, double theta_b) {
    double d = std::fmod(std::abs(theta_a - theta_b), 180.0);
    return std::min(d, 180.0 - d);
}

double center_distance_sq(const GraspRect& a, const GraspRect& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double enclosing_diagonal_sq(const GraspRect& a, const GraspRect& b) {
    const Quad qa = rect_to_quad(a);
    const Quad qb = rect_to_quad(b);
    double lo_x = qa[0].x, hi_x = qa[0].x, lo_y = qa[0].y, hi_y = qa[0].y;
    auto grow = [&](const Quad& q) {
        for (const Vec2& p : q) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
    };
    grow(qa);
    grow(qb);
    const double dx = hi_x - lo_x;
    const double dy = hi_y - lo_y;
    return dx * dx + dy * dy;
}

}  // namespace gk
