#include <cmath>
#include <numbers>

#include "faultrom/error.hpp"
#include "faultrom/meshkit.hpp"

namespace faultrom::mesh {

using nlohmann::json;

json rectangle_grid(int nx, int ny, double x0, double x1, double y0, double y1) {
    if (nx < 1 || ny < 1) throw ConfigError("grid needs at least one cell per direction");
    json nodes = json::array(), cells = json::array();
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            nodes.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny});
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    json tags = {{"xmin", json::array()}, {"xmax", json::array()}, {"ymin", json::array()}, {"ymax", json::array()}};
    for (int j = 0; j < ny; ++j) {
        tags["xmin"].push_back({id(0, j), id(0, j + 1)});
        tags["xmax"].push_back({id(nx, j), id(nx, j + 1)});
    }
    for (int i = 0; i < nx; ++i) {
        tags["ymin"].push_back({id(i, 0), id(i + 1, 0)});
        tags["ymax"].push_back({id(i, ny), id(i + 1, ny)});
    }
    return {{"dim", 2}, {"nodes", nodes}, {"cells", cells}, {"boundary_tags", tags}};
}

json faulted_rectangle(const FaultedRectangle& p) {
    if (p.rows_per_layer.size() != p.horizons.size() + 1)
        throw ConfigError("rows_per_layer needs one entry per layer");
    if (p.cols_left < 1 || p.cols_right < 1) throw ConfigError("need at least one column per fault side");
    std::vector<double> levels{0.0};
    levels.insert(levels.end(), p.horizons.begin(), p.horizons.end());
    levels.push_back(p.height);
    std::vector<double> ys{0.0};
    std::vector<int> row_layer;
    for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
        if (!(levels[l + 1] > levels[l]) || p.rows_per_layer[l] < 1) throw ConfigError("invalid layer specification");
        for (int r = 1; r <= p.rows_per_layer[l]; ++r) {
            ys.push_back(r == p.rows_per_layer[l] ? levels[l + 1]
                                                  : levels[l] + (levels[l + 1] - levels[l]) * r / p.rows_per_layer[l]);
            row_layer.push_back(static_cast<int>(l));
        }
    }
    const double cot = 1.0 / std::tan(p.fault_angle_deg * std::numbers::pi / 180.0);
    auto xf = [&](double y) { return p.fault_center.x() + (y - p.fault_center.y()) * cot; };
    for (double y : {0.0, p.height})
        if (!(xf(y) > 0.0 && xf(y) < p.width)) throw ConfigError("fault leaves the rectangle through a side");

    const int ny = static_cast<int>(ys.size()) - 1;
    const int cl = p.cols_left, cr = p.cols_right;
    auto left = [&](int i, int j) { return j * (cl + 1) + i; };
    const int right_base = (ny + 1) * (cl + 1);
    auto right = [&](int i, int j) { return right_base + j * (cr + 1) + i; };

    json nodes = json::array(), cells = json::array(), regions = json::array();
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= cl; ++i) nodes.push_back({xf(ys[j]) * i / cl, ys[j]});
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= cr; ++i) {
            const double x0 = xf(ys[j]);
            nodes.push_back({i == cr ? p.width : x0 + (p.width - x0) * i / cr, ys[j]});
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < cl; ++i) {
            cells.push_back({left(i, j), left(i + 1, j), left(i + 1, j + 1), left(i, j + 1)});
            regions.push_back(row_layer[j]);
        }
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < cr; ++i) {
            cells.push_back({right(i, j), right(i + 1, j), right(i + 1, j + 1), right(i, j + 1)});
            regions.push_back(row_layer[j]);
        }
    json tags = {{"xmin", json::array()}, {"xmax", json::array()}, {"ymin", json::array()}, {"ymax", json::array()}};
    for (int j = 0; j < ny; ++j) {
        tags["xmin"].push_back({left(0, j), left(0, j + 1)});
        tags["xmax"].push_back({right(cr, j), right(cr, j + 1)});
    }
    for (int i = 0; i < cl; ++i) {
        tags["ymin"].push_back({left(i, 0), left(i + 1, 0)});
        tags["ymax"].push_back({left(i, ny), left(i + 1, ny)});
    }
    for (int i = 0; i < cr; ++i) {
        tags["ymin"].push_back({right(i, 0), right(i + 1, 0)});
        tags["ymax"].push_back({right(i, ny), right(i + 1, ny)});
    }
    json poly_nodes = json::array(), pairs = json::array();
    for (int j = 0; j <= ny; ++j) {
        poly_nodes.push_back(left(cl, j));
        pairs.push_back({left(cl, j), right(0, j)});
    }
    return {{"dim", 2},
            {"nodes", nodes},
            {"cells", cells},
            {"cell_regions", regions},
            {"boundary_tags", tags},
            {"fault_polylines", json::array({{{"id", 0}, {"nodes", poly_nodes}, {"side_pairs", pairs}}})},
            {"intersections", json::array()}};
}

}  // namespace faultrom::mesh
