#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace faultrom::geom {

/// Points are stored in 3D; planar problems keep z = 0.
using Point = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

/// Signed area of a planar polygon in the xy plane (counter-clockwise positive).
double signed_area_xy(std::span<const Point> poly);

/// Area centroid of a planar polygon in the xy plane.
Point centroid_xy(std::span<const Point> poly);

/// Vector area of a (possibly non-planar) polygon: half the sum of edge cross
/// products about the vertex average. Its norm is the area, its direction the
/// right-hand normal.
Point vector_area(std::span<const Point> poly);

/// Area-weighted centroid of a polygon in 3D, triangulated as a fan around the
/// vertex average.
Point polygon_centroid(std::span<const Point> poly);

/// Signed volume and centroid of a polyhedron given its faces as outward
/// oriented vertex loops.
struct VolumeAndCentroid {
    double volume = 0.0;
    Point centroid = Point::Zero();
};
VolumeAndCentroid polyhedron_volume(const std::vector<std::vector<Point>>& outward_faces);

/// Sutherland-Hodgman clipping of `subject` against the convex polygon `clip`
/// (both counter-clockwise in the plane).
std::vector<Point2> clip_convex(const std::vector<Point2>& subject, const std::vector<Point2>& clip);

/// Absolute area of a planar polygon.
double area2(const std::vector<Point2>& poly);

/// Length of the overlap of the projections of segments [a0,a1] and [b0,b1]
/// onto the line through a0 and a1.
double segment_overlap(const Point& a0, const Point& a1, const Point& b0, const Point& b1);

/// Area of the overlap of two convex planar polygons living in the plane with
/// unit normal `normal`. Both are projected onto that plane first.
double polygon_overlap(std::span<const Point> a, std::span<const Point> b, const Point& normal);

}  // namespace faultrom::geom
