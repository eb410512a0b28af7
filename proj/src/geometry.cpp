#include "faultrom/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace faultrom::geom {

double signed_area_xy(std::span<const Point> poly) {
    double twice = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * twice;
}

Point centroid_xy(std::span<const Point> poly) {
    // Shift to the first vertex to limit cancellation for small cells far from the origin.
    const Point origin = poly[0];
    double twice = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i] - origin;
        const Point b = poly[(i + 1) % n] - origin;
        const double cross = a.x() * b.y() - b.x() * a.y();
        twice += cross;
        cx += (a.x() + b.x()) * cross;
        cy += (a.y() + b.y()) * cross;
    }
    Point c = origin;
    c.x() += cx / (3.0 * twice);
    c.y() += cy / (3.0 * twice);
    return c;
}

Point vector_area(std::span<const Point> poly) {
    Point mid = Point::Zero();
    for (const auto& p : poly) mid += p;
    mid /= static_cast<double>(poly.size());
    Point sum = Point::Zero();
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
        sum += (poly[i] - mid).cross(poly[(i + 1) % n] - mid);
    return 0.5 * sum;
}

Point polygon_centroid(std::span<const Point> poly) {
    Point mid = Point::Zero();
    for (const auto& p : poly) mid += p;
    mid /= static_cast<double>(poly.size());
    const Point total_normal = vector_area(poly);
    const double total = total_normal.norm();
    if (total == 0.0) return mid;
    const Point unit = total_normal / total;
    Point acc = Point::Zero();
    double weight = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        const double w = 0.5 * (a - mid).cross(b - mid).dot(unit);
        acc += w * (mid + a + b) / 3.0;
        weight += w;
    }
    return acc / weight;
}

VolumeAndCentroid polyhedron_volume(const std::vector<std::vector<Point>>& outward_faces) {
    Point apex = Point::Zero();
    std::size_t count = 0;
    for (const auto& f : outward_faces)
        for (const auto& p : f) {
            apex += p;
            ++count;
        }
    apex /= static_cast<double>(count);

    VolumeAndCentroid out;
    Point moment = Point::Zero();
    for (const auto& f : outward_faces) {
        Point fc = Point::Zero();
        for (const auto& p : f) fc += p;
        fc /= static_cast<double>(f.size());
        const std::size_t n = f.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = f[i];
            const Point& b = f[(i + 1) % n];
            const double v = (fc - apex).dot((a - apex).cross(b - apex)) / 6.0;
            out.volume += v;
            moment += v * (apex + fc + a + b) / 4.0;
        }
    }
    out.centroid = out.volume != 0.0 ? Point(moment / out.volume) : apex;
    return out;
}

namespace {

double cross2(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

std::vector<Point2> clip_convex(const std::vector<Point2>& subject, const std::vector<Point2>& clip) {
    std::vector<Point2> output = subject;
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !output.empty(); ++e) {
        const Point2& c0 = clip[e];
        const Point2& c1 = clip[(e + 1) % m];
        const Point2 edge = c1 - c0;
        auto inside = [&](const Point2& p) { return cross2(edge, p - c0) >= 0.0; };
        std::vector<Point2> input;
        input.swap(output);
        const std::size_t n = input.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point2& cur = input[i];
            const Point2& prev = input[(i + n - 1) % n];
            const bool cur_in = inside(cur);
            const bool prev_in = inside(prev);
            if (cur_in != prev_in) {
                const Point2 d = cur - prev;
                const double denom = cross2(edge, d);
                if (denom != 0.0) {
                    const double t = cross2(edge, c0 - prev) / denom;
                    output.push_back(prev + t * d);
                }
            }
            if (cur_in) output.push_back(cur);
        }
    }
    return output;
}

double area2(const std::vector<Point2>& poly) {
    double twice = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) twice += cross2(poly[i], poly[(i + 1) % n]);
    return 0.5 * std::abs(twice);
}

double segment_overlap(const Point& a0, const Point& a1, const Point& b0, const Point& b1) {
    const Point axis = a1 - a0;
    const double length = axis.norm();
    const Point unit = axis / length;
    const double t0 = (b0 - a0).dot(unit);
    const double t1 = (b1 - a0).dot(unit);
    const double lo = std::max(0.0, std::min(t0, t1));
    const double hi = std::min(length, std::max(t0, t1));
    return std::max(0.0, hi - lo);
}

double polygon_overlap(std::span<const Point> a, std::span<const Point> b, const Point& normal) {
    // In-plane orthonormal frame (u, v) with u x v = normal.
    Point helper = std::abs(normal.x()) < 0.9 ? Point(1, 0, 0) : Point(0, 1, 0);
    const Point u = normal.cross(helper).normalized();
    const Point v = normal.cross(u);
    auto project = [&](std::span<const Point> poly) {
        std::vector<Point2> out;
        out.reserve(poly.size());
        for (const auto& p : poly) out.emplace_back(p.dot(u), p.dot(v));
        double twice = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i)
            twice += cross2(out[i], out[(i + 1) % out.size()]);
        if (twice < 0.0) std::reverse(out.begin(), out.end());
        return out;
    };
    return area2(clip_convex(project(a), project(b)));
}

}  // namespace faultrom::geom
