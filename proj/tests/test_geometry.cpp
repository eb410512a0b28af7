#include <doctest.h>

#include <cmath>

#include "faultrom/geometry.hpp"

using namespace faultrom::geom;

TEST_CASE("polygon area and centroid") {
    std::vector<Point> sq{{0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0}};
    CHECK(signed_area_xy(sq) == doctest::Approx(2.0));
    const Point c = centroid_xy(sq);
    CHECK(c.x() == doctest::Approx(1.0));
    CHECK(c.y() == doctest::Approx(0.5));
    std::vector<Point> cw(sq.rbegin(), sq.rend());
    CHECK(signed_area_xy(cw) == doctest::Approx(-2.0));

    // Triangle centroid is the vertex mean.
    std::vector<Point> tri{{0, 0, 0}, {3, 0, 0}, {0, 3, 0}};
    CHECK(centroid_xy(tri).x() == doctest::Approx(1.0));
    CHECK(polygon_centroid(tri).y() == doctest::Approx(1.0));
    CHECK(vector_area(tri).z() == doctest::Approx(4.5));
}

TEST_CASE("polyhedron volume of a unit cube") {
    auto P = [](double x, double y, double z) { return Point(x, y, z); };
    std::vector<std::vector<Point>> faces{
        {P(0, 0, 0), P(0, 1, 0), P(1, 1, 0), P(1, 0, 0)},  // z = 0, outward -z
        {P(0, 0, 1), P(1, 0, 1), P(1, 1, 1), P(0, 1, 1)},
        {P(0, 0, 0), P(1, 0, 0), P(1, 0, 1), P(0, 0, 1)},
        {P(1, 0, 0), P(1, 1, 0), P(1, 1, 1), P(1, 0, 1)},
        {P(1, 1, 0), P(0, 1, 0), P(0, 1, 1), P(1, 1, 1)},
        {P(0, 1, 0), P(0, 0, 0), P(0, 0, 1), P(0, 1, 1)},
    };
    const auto vc = polyhedron_volume(faces);
    CHECK(vc.volume == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vc.centroid.x() == doctest::Approx(0.5));
    CHECK(vc.centroid.z() == doctest::Approx(0.5));
}

TEST_CASE("overlaps") {
    CHECK(segment_overlap({0, 0, 0}, {1, 0, 0}, {0.5, 0, 0}, {2, 0, 0}) == doctest::Approx(0.5));
    CHECK(segment_overlap({0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1.5, 0, 0}) == 0.0);
    CHECK(segment_overlap({0, 0, 0}, {1, 1, 0}, {1, 1, 0}, {0.5, 0.5, 0}) == doctest::Approx(std::sqrt(0.5)));

    std::vector<Point> a{{0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}};
    std::vector<Point> b{{1, 1, 0}, {3, 1, 0}, {3, 3, 0}, {1, 3, 0}};
    CHECK(polygon_overlap(a, b, Point(0, 0, 1)) == doctest::Approx(1.0));
    std::vector<Point> b_cw(b.rbegin(), b.rend());
    CHECK(polygon_overlap(a, b_cw, Point(0, 0, -1)) == doctest::Approx(1.0));
    std::vector<Point> far{{5, 5, 0}, {6, 5, 0}, {6, 6, 0}};
    CHECK(polygon_overlap(a, far, Point(0, 0, 1)) == 0.0);
}
