#pragma once

#include <cmath>
#include <memory>

#include <json.hpp>

#include "faultrom/darcy_fom.hpp"
#include "faultrom/meshkit.hpp"
#include "faultrom/snapshots.hpp"

namespace fixtures {

using nlohmann::json;

inline json two_triangles() {
    return {{"dim", 2},
            {"nodes", {{0, 0}, {1, 0}, {1, 1}, {0, 1}}},
            {"cells", {{0, 1, 2}, {0, 2, 3}}},
            {"boundary_tags", {{"outer", {{0, 1}, {1, 2}, {2, 3}, {3, 0}}}}}};
}

/// Square [0,2]^2 of four unit cells cut by a horizontal and a vertical fault
/// crossing at (1,1); the centre node has four copies.
inline json crossing_faults() {
    // 0 (0,0)  1 (1,0)L  2 (1,0)R  3 (2,0)
    // 4 (0,1)B 5 (0,1)T  6 c_ll 7 c_lr 8 c_ul 9 c_ur  10 (2,1)B 11 (2,1)T
    // 12 (0,2) 13 (1,2)L 14 (1,2)R 15 (2,2)
    json nodes = {{0, 0}, {1, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 1}, {1, 1}, {1, 1},
                  {1, 1}, {1, 1}, {2, 1}, {2, 1}, {0, 2}, {1, 2}, {1, 2}, {2, 2}};
    json cells = {{0, 1, 6, 4}, {2, 3, 10, 7}, {9, 11, 15, 14}, {5, 8, 13, 12}};
    json faults = json::array();
    faults.push_back({{"id", 1}, {"nodes", {4, 6, 10}}, {"side_pairs", {{4, 5}, {6, 8}, {7, 9}, {10, 11}}}});
    faults.push_back({{"id", 2}, {"nodes", {1, 6, 13}}, {"side_pairs", {{1, 2}, {6, 7}, {8, 9}, {13, 14}}}});
    json tags = {{"outer",
                  {{0, 1}, {2, 3}, {3, 10}, {11, 15}, {15, 14}, {13, 12}, {12, 5}, {4, 0}}}};
    return {{"dim", 2},
            {"nodes", nodes},
            {"cells", cells},
            {"fault_polylines", faults},
            {"intersections", {{{"node", 6}, {"branches", {1, 2}}}}},
            {"boundary_tags", tags}};
}

/// Faulted unit square with a 60 degree fault and three layers, coarse.
inline faultrom::mesh::FaultedRectangle small_faulted(int rows = 4, int cols = 4) {
    faultrom::mesh::FaultedRectangle p;
    p.horizons = {0.45, 0.55};
    p.rows_per_layer = {rows, 2, rows};
    p.cols_left = cols;
    p.cols_right = cols;
    return p;
}

/// Parameter-dependent physics on a fixed faulted mesh:
/// mu = (log K bottom, log K caprock, log K fault). Left boundary p = 1, right p = 0.
inline faultrom::snap::ProblemBuilder toy_builder(int rows = 4, int cols = 4) {
    using namespace faultrom;
    auto base = std::make_shared<const mesh::MixedDimMesh>(mesh::load_mesh(mesh::faulted_rectangle(small_faulted(rows, cols))));
    return [base](const Eigen::VectorXd& mu) {
        snap::Problem pb{*base, {}, fom::neumann_everywhere(*base)};
        pb.params.region_permeability = {std::exp(mu[0]), std::exp(mu[1]), 1.0};
        pb.params.fault_k_tangential = {std::exp(mu[2])};
        pb.params.fault_k_normal = {2.0 * std::exp(mu[2]) / 1e-2};
        pb.params.fault_aperture = {1e-2};
        fom::set_tag_bc(pb.bc, pb.mesh, "xmin", {fom::BcKind::Dirichlet, 1.0});
        fom::set_tag_bc(pb.bc, pb.mesh, "xmax", {fom::BcKind::Dirichlet, 0.0});
        return pb;
    };
}

inline faultrom::snap::ParameterSpace toy_space() {
    using faultrom::snap::Scale;
    return {{{"k_bottom", 0.1, 1.0, Scale::Exponent}, {"k_cap", 1e-3, 1e-2, Scale::Exponent}, {"k_fault", 1e-2, 1.0, Scale::Exponent}}};
}

}  // namespace fixtures
