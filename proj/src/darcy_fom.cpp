#include "faultrom/darcy_fom.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "faultrom/error.hpp"

namespace faultrom::fom {

using mesh::FaultFaceKind;
using mesh::MixedDimMesh;
using mesh::Side;

namespace {

double center_distance(const mesh::Subdomain& g, int cell, int face) {
    const double d = (g.face_centers[face] - g.cell_centers[cell]).norm();
    if (!(d > 0.0)) throw NumericalError("zero center-to-face distance at face " + std::to_string(face));
    return d;
}

double cell_k(const MixedDimMesh& m, const PhysicalParams& p, int cell) {
    return p.region_permeability[m.matrix.cell_region[cell]];
}

double sigma(Side s) { return s == Side::Minus ? 1.0 : -1.0; }

/// Per matrix face: the (coupling, column) pairs it belongs to.
std::vector<std::vector<std::pair<int, int>>> coupled_faces(const MixedDimMesh& m) {
    std::vector<std::vector<std::pair<int, int>>> out(m.matrix.num_faces());
    for (std::size_t c = 0; c < m.couplings.size(); ++c)
        for (std::size_t i = 0; i < m.couplings[c].matrix_face_ids.size(); ++i)
            out[m.couplings[c].matrix_face_ids[i]].emplace_back(static_cast<int>(c), static_cast<int>(i));
    return out;
}

/// Per coupling, per column: list of (mortar row, overlap measure).
std::vector<std::vector<std::vector<std::pair<int, double>>>> column_overlaps(const MixedDimMesh& m) {
    std::vector<std::vector<std::vector<std::pair<int, double>>>> out(m.couplings.size());
    for (std::size_t c = 0; c < m.couplings.size(); ++c) {
        const auto& cp = m.couplings[c];
        const auto& g = m.faults[cp.fault_index].grid;
        out[c].resize(cp.matrix_face_ids.size());
        for (int k = 0; k < cp.projection.outerSize(); ++k)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(cp.projection, k); it; ++it)
                out[c][it.col()].emplace_back(k, it.value() * g.cell_measures[cp.fault_cell_ids[k]]);
    }
    return out;
}

double fault_face_transmissibility(const mesh::Fault& f, double eps_k, int face) {
    const auto& g = f.grid;
    const int c0 = g.face_cells[face][0], c1 = g.face_cells[face][1];
    const double d0 = center_distance(g, c0, face);
    if (c1 < 0) return eps_k * g.face_measures[face] / d0;
    return eps_k * g.face_measures[face] / (d0 + center_distance(g, c1, face));
}

const FaceBc& external_bc(const BoundaryConditions& bc, const mesh::Fault& f, int face) {
    const int mf = f.face_matrix_face[face];
    static const FaceBc no_flow{};
    return mf < 0 ? no_flow : bc.faces[mf];
}

double matrix_source_total(const MixedDimMesh& m, const PhysicalParams& p, int cell) {
    double s = p.matrix_source.empty() ? 0.0 : p.matrix_source[cell] * m.matrix.cell_measures[cell];
    for (const auto& [c, rate] : p.point_sources)
        if (c == cell) s += rate;
    return s;
}

}  // namespace

BoundaryConditions neumann_everywhere(const MixedDimMesh& m) {
    BoundaryConditions bc;
    bc.faces.assign(m.matrix.num_faces(), FaceBc{});
    return bc;
}

void set_tag_bc(BoundaryConditions& bc, const MixedDimMesh& m, const std::string& tag, FaceBc value) {
    const int t = m.tag_index(tag);
    if (t < 0) throw ConfigError("unknown boundary tag " + tag);
    if (bc.faces.size() != m.matrix.num_faces()) bc.faces.resize(m.matrix.num_faces());
    for (std::size_t f = 0; f < m.matrix.num_faces(); ++f)
        if (m.matrix.face_tag[f] == t) bc.faces[f] = value;
}

void check_params(const MixedDimMesh& m, const PhysicalParams& p) {
    int max_region = -1;
    for (int r : m.matrix.cell_region) max_region = std::max(max_region, r);
    if (static_cast<int>(p.region_permeability.size()) <= max_region)
        throw ConfigError("missing permeability for region " + std::to_string(max_region));
    for (double k : p.region_permeability)
        if (!(k > 0.0)) throw ConfigError("matrix permeability must be positive");
    const std::size_t nf = m.faults.size();
    if (p.fault_k_tangential.size() != nf || p.fault_k_normal.size() != nf || p.fault_aperture.size() != nf)
        throw ConfigError("fault parameters must be given per fault");
    for (std::size_t i = 0; i < nf; ++i)
        if (!(p.fault_k_tangential[i] > 0.0) || !(p.fault_k_normal[i] > 0.0) || !(p.fault_aperture[i] > 0.0))
            throw ConfigError("fault permeabilities and aperture must be positive");
    if (p.intersection_k.size() != m.intersections.size())
        throw ConfigError("intersection permeability must be given per intersection");
    for (double k : p.intersection_k)
        if (!(k > 0.0)) throw ConfigError("intersection permeability must be positive");
    if (!p.matrix_source.empty() && p.matrix_source.size() != m.matrix.num_cells())
        throw ConfigError("matrix source size mismatch");
    if (!p.fault_source.empty() && p.fault_source.size() != m.layout.n_p_gamma())
        throw ConfigError("fault source size mismatch");
    for (const auto& [c, rate] : p.point_sources)
        if (c < 0 || static_cast<std::size_t>(c) >= m.matrix.num_cells()) throw ConfigError("point source cell out of range");
    if (p.intersection_aperture_power != 1 && p.intersection_aperture_power != 2)
        throw ConfigError("intersection aperture power must be 1 or 2");
}

std::vector<double> transmissibilities(const MixedDimMesh& m, const PhysicalParams& p) {
    const auto& g = m.matrix;
    std::vector<double> t(g.num_faces());
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const int face = static_cast<int>(f);
        const int c0 = g.face_cells[f][0], c1 = g.face_cells[f][1];
        const double r0 = center_distance(g, c0, face) / cell_k(m, p, c0);
        t[f] = c1 < 0 ? g.face_measures[f] / r0 : g.face_measures[f] / (r0 + center_distance(g, c1, face) / cell_k(m, p, c1));
    }
    return t;
}

FomSystem assemble(const MixedDimMesh& m, const PhysicalParams& p, const BoundaryConditions& bc) {
    check_params(m, p);
    const auto& g = m.matrix;
    if (bc.faces.size() != g.num_faces()) throw ConfigError("missing boundary condition: one entry per matrix face needed");
    const auto& L = m.layout;
    const auto N = static_cast<Eigen::Index>(L.total);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
    auto add = [&](std::size_t i, std::size_t j, double v) {
        trip.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    };

    const auto trans = transmissibilities(m, p);
    const auto coupled = coupled_faces(m);
    int dirichlet = 0;
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const int c0 = g.face_cells[f][0], c1 = g.face_cells[f][1];
        if (c1 >= 0) {
            add(c0, c0, trans[f]);
            add(c1, c1, trans[f]);
            add(c0, c1, -trans[f]);
            add(c1, c0, -trans[f]);
        } else if (coupled[f].empty()) {
            const FaceBc& fb = bc.faces[f];
            if (fb.kind == BcKind::Dirichlet) {
                add(c0, c0, trans[f]);
                b[c0] += trans[f] * fb.value;
                ++dirichlet;
            } else {
                b[c0] -= fb.value * g.face_measures[f];
            }
        }
    }
    for (std::size_t c = 0; c < g.num_cells(); ++c) b[c] += matrix_source_total(m, p, static_cast<int>(c));

    for (std::size_t fi = 0; fi < m.faults.size(); ++fi) {
        const auto& fault = m.faults[fi];
        const auto& fg = fault.grid;
        const std::size_t off = m.fault_offsets[fi];
        const double eps = p.fault_aperture[fi];
        const double eps_k = eps * p.fault_k_tangential[fi];
        for (std::size_t f = 0; f < fg.num_faces(); ++f) {
            const int face = static_cast<int>(f);
            const int c0 = fg.face_cells[f][0], c1 = fg.face_cells[f][1];
            switch (fault.face_kind[f]) {
                case FaultFaceKind::Interior: {
                    const double t = fault_face_transmissibility(fault, eps_k, face);
                    add(off + c0, off + c0, t);
                    add(off + c1, off + c1, t);
                    add(off + c0, off + c1, -t);
                    add(off + c1, off + c0, -t);
                    break;
                }
                case FaultFaceKind::External: {
                    const FaceBc& fb = external_bc(bc, fault, face);
                    if (fb.kind == BcKind::Dirichlet) {
                        const double t = fault_face_transmissibility(fault, eps_k, face);
                        add(off + c0, off + c0, t);
                        b[off + c0] += t * fb.value;
                        ++dirichlet;
                    } else {
                        b[off + c0] -= fb.value * eps * fg.face_measures[f];
                    }
                    break;
                }
                case FaultFaceKind::Tip:
                case FaultFaceKind::Branch:
                    break;
            }
        }
        if (!p.fault_source.empty())
            for (std::size_t c = 0; c < fg.num_cells(); ++c)
                b[off + c] += p.fault_source[off - L.p_gamma + c] * fg.cell_measures[c];
    }
    if (dirichlet == 0) throw ConfigError("missing boundary condition: no Dirichlet face, pressure is undetermined");

    const auto overlaps = column_overlaps(m);
    for (std::size_t ci = 0; ci < m.couplings.size(); ++ci) {
        const auto& cp = m.couplings[ci];
        const auto& fg = m.faults[cp.fault_index].grid;
        const std::size_t off = m.fault_offsets[cp.fault_index];
        const double eps = p.fault_aperture[cp.fault_index];
        const double kn = p.fault_k_normal[cp.fault_index];
        const double s = sigma(cp.side);
        for (std::size_t k = 0; k < cp.fault_cell_ids.size(); ++k) {
            const std::size_t row = cp.lambda_offset + k;
            const int cell = cp.fault_cell_ids[k];
            const double meas = fg.cell_measures[cell];
            add(off + cell, row, -s * meas);
            add(row, off + cell, -s * meas);
            add(row, row, -eps * meas / (2.0 * kn));
        }
        for (std::size_t i = 0; i < cp.matrix_face_ids.size(); ++i) {
            const int f = cp.matrix_face_ids[i];
            const int cm = g.face_cells[f][0];
            const double r = center_distance(g, cm, f) / (cell_k(m, p, cm) * g.face_measures[f]);
            const auto& col = overlaps[ci][i];
            for (const auto& [k, ov] : col) {
                add(cm, cp.lambda_offset + k, s * ov);
                add(cp.lambda_offset + k, cm, s * ov);
                for (const auto& [k2, ov2] : col) add(cp.lambda_offset + k, cp.lambda_offset + k2, -r * ov * ov2);
            }
        }
    }

    std::size_t branch = m.branch_lambda_offset;
    for (std::size_t q = 0; q < m.intersections.size(); ++q) {
        const std::size_t iota = m.intersection_offset + q;
        for (const auto& br : m.intersections[q].branches) {
            const auto& fault = m.faults[br.fault_index];
            const auto& fg = fault.grid;
            const double eps = p.fault_aperture[br.fault_index];
            const double eps_k = eps * p.fault_k_tangential[br.fault_index];
            const double meas = fg.face_measures[br.fault_face];
            const double r = center_distance(fg, br.fault_cell, br.fault_face) / (eps_k * meas);
            const std::size_t pg = m.fault_offsets[br.fault_index] + br.fault_cell;
            add(pg, branch, meas);
            add(branch, pg, meas);
            add(iota, branch, -meas);
            add(branch, iota, -meas);
            add(branch, branch,
                -std::pow(eps, p.intersection_aperture_power) * meas / (2.0 * p.intersection_k[q]) - r * meas * meas);
            ++branch;
        }
    }

    FomSystem sys;
    sys.layout = L;
    sys.matrix.resize(N, N);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.matrix.makeCompressed();
    sys.rhs = std::move(b);
    return sys;
}

FomBlocks split_blocks(const FomSystem& s) {
    const auto& L = s.layout;
    auto block = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
        Eigen::SparseMatrix<double> out = s.matrix.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0),
                                                         static_cast<Eigen::Index>(r1 - r0), static_cast<Eigen::Index>(c1 - c0));
        return out;
    };
    FomBlocks b;
    b.A_p = block(L.p, L.p_gamma, L.p, L.p_gamma);
    b.A_pg = block(L.p_gamma, L.lambda, L.p_gamma, L.lambda);
    b.B1 = block(L.lambda, L.total, L.p, L.p_gamma);
    b.B2 = block(L.lambda, L.total, L.p_gamma, L.lambda);
    b.C = -block(L.lambda, L.total, L.lambda, L.total);
    return b;
}

FomSolution solve(const FomSystem& sys) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(sys.matrix);
    if (lu.info() != Eigen::Success)
        throw NumericalError("sparse factorization failed: " + lu.lastErrorMessage() +
                             " (check for subdomains without Dirichlet data or coupling)");
    FomSolution sol;
    sol.layout = sys.layout;
    sol.u = lu.solve(sys.rhs);
    const double bnorm = sys.rhs.norm();
    const double scale = bnorm > 0.0 ? bnorm : 1.0;
    Eigen::VectorXd r = sys.rhs - sys.matrix * sol.u;
    if (r.norm() > 1e-12 * scale) {
        sol.u += lu.solve(r);
        r = sys.rhs - sys.matrix * sol.u;
    }
    sol.residual = r.norm() / scale;
    if (!sol.u.allFinite() || sol.residual > 1e-9)
        throw NumericalError("linear solve residual " + std::to_string(sol.residual) + " exceeds tolerance");
    return sol;
}

FomSolution solve(const MixedDimMesh& m, const PhysicalParams& p, const BoundaryConditions& bc) {
    return solve(assemble(m, p, bc));
}

FaceFluxes reconstruct_velocity(const FomSolution& sol, const MixedDimMesh& m, const PhysicalParams& p,
                                const BoundaryConditions& bc) {
    check_params(m, p);
    const auto& g = m.matrix;
    const auto& u = sol.u;
    const auto& L = m.layout;
    FaceFluxes out;
    out.lambda = u.segment(static_cast<Eigen::Index>(L.lambda), static_cast<Eigen::Index>(L.n_lambda()));
    const auto trans = transmissibilities(m, p);
    const auto coupled = coupled_faces(m);
    const auto overlaps = column_overlaps(m);
    out.matrix.assign(g.num_faces(), 0.0);
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const int c0 = g.face_cells[f][0], c1 = g.face_cells[f][1];
        if (c1 >= 0) {
            out.matrix[f] = trans[f] * (u[c0] - u[c1]);
        } else if (!coupled[f].empty()) {
            double flux = 0.0;
            for (const auto& [ci, col] : coupled[f]) {
                const auto& cp = m.couplings[ci];
                for (const auto& [k, ov] : overlaps[ci][col]) flux += sigma(cp.side) * ov * u[cp.lambda_offset + k];
            }
            out.matrix[f] = flux;
        } else if (bc.faces[f].kind == BcKind::Dirichlet) {
            out.matrix[f] = trans[f] * (u[c0] - bc.faces[f].value);
        } else {
            out.matrix[f] = bc.faces[f].value * g.face_measures[f];
        }
    }
    out.fault.resize(m.faults.size());
    std::size_t branch = m.branch_lambda_offset;
    std::vector<std::vector<double>> branch_flux(m.faults.size());
    for (std::size_t fi = 0; fi < m.faults.size(); ++fi) branch_flux[fi].assign(m.faults[fi].grid.num_faces(), 0.0);
    for (const auto& ix : m.intersections)
        for (const auto& br : ix.branches)
            branch_flux[br.fault_index][br.fault_face] =
                m.faults[br.fault_index].grid.face_measures[br.fault_face] * u[branch++];
    for (std::size_t fi = 0; fi < m.faults.size(); ++fi) {
        const auto& fault = m.faults[fi];
        const auto& fg = fault.grid;
        const std::size_t off = m.fault_offsets[fi];
        const double eps = p.fault_aperture[fi];
        const double eps_k = eps * p.fault_k_tangential[fi];
        auto& flux = out.fault[fi];
        flux.assign(fg.num_faces(), 0.0);
        for (std::size_t f = 0; f < fg.num_faces(); ++f) {
            const int face = static_cast<int>(f);
            const int c0 = fg.face_cells[f][0], c1 = fg.face_cells[f][1];
            switch (fault.face_kind[f]) {
                case FaultFaceKind::Interior:
                    flux[f] = fault_face_transmissibility(fault, eps_k, face) * (u[off + c0] - u[off + c1]);
                    break;
                case FaultFaceKind::External: {
                    const FaceBc& fb = external_bc(bc, fault, face);
                    flux[f] = fb.kind == BcKind::Dirichlet
                                  ? fault_face_transmissibility(fault, eps_k, face) * (u[off + c0] - fb.value)
                                  : fb.value * eps * fg.face_measures[f];
                    break;
                }
                case FaultFaceKind::Tip:
                    flux[f] = 0.0;
                    break;
                case FaultFaceKind::Branch:
                    flux[f] = branch_flux[fi][f];
                    break;
            }
        }
    }
    return out;
}

ConservationReport check_conservation(const FomSolution& sol, const MixedDimMesh& m, const PhysicalParams& p,
                                      const BoundaryConditions& bc) {
    const auto fluxes = reconstruct_velocity(sol, m, p, bc);
    const auto& g = m.matrix;
    ConservationReport rep;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        double out = 0.0;
        for (int f : g.cell_faces[c])
            out += g.face_cells[f][0] == static_cast<int>(c) ? fluxes.matrix[f] : -fluxes.matrix[f];
        const double src = matrix_source_total(m, p, static_cast<int>(c));
        rep.matrix = std::max(rep.matrix, std::abs(out - src) / std::max(1.0, std::abs(src)));
    }
    for (std::size_t fi = 0; fi < m.faults.size(); ++fi) {
        const auto& fg = m.faults[fi].grid;
        std::vector<double> out(fg.num_cells(), 0.0);
        for (std::size_t f = 0; f < fg.num_faces(); ++f) {
            out[fg.face_cells[f][0]] += fluxes.fault[fi][f];
            if (fg.face_cells[f][1] >= 0) out[fg.face_cells[f][1]] -= fluxes.fault[fi][f];
        }
        for (const auto& cp : m.couplings) {
            if (cp.fault_index != static_cast<int>(fi)) continue;
            for (std::size_t k = 0; k < cp.fault_cell_ids.size(); ++k) {
                const int cell = cp.fault_cell_ids[k];
                out[cell] -= sigma(cp.side) * fg.cell_measures[cell] * sol.u[cp.lambda_offset + k];
            }
        }
        for (std::size_t c = 0; c < fg.num_cells(); ++c) {
            const double src =
                p.fault_source.empty() ? 0.0 : p.fault_source[m.fault_offsets[fi] - m.layout.p_gamma + c] * fg.cell_measures[c];
            rep.fault = std::max(rep.fault, std::abs(out[c] - src) / std::max(1.0, std::abs(src)));
        }
    }
    std::size_t branch = m.branch_lambda_offset;
    for (const auto& ix : m.intersections) {
        double sum = 0.0;
        for (const auto& br : ix.branches)
            sum += m.faults[br.fault_index].grid.face_measures[br.fault_face] * sol.u[branch++];
        rep.intersection = std::max(rep.intersection, std::abs(sum));
    }
    return rep;
}

double qoi_delta_p(const FomSolution& sol, int injection_cell, int production_cell) {
    const auto n = static_cast<int>(sol.layout.n_p());
    if (injection_cell < 0 || injection_cell >= n || production_cell < 0 || production_cell >= n)
        throw ConfigError("quantity-of-interest cell out of range");
    return sol.u[injection_cell] - sol.u[production_cell];
}

double max_trace_jump(const FomSolution& sol, const MixedDimMesh& m, const PhysicalParams& p,
                      const BoundaryConditions& bc) {
    const auto fluxes = reconstruct_velocity(sol, m, p, bc);
    const auto& g = m.matrix;
    double worst = 0.0;
    for (const auto& cp : m.couplings) {
        const std::size_t off = m.fault_offsets[cp.fault_index];
        for (int k = 0; k < cp.projection.outerSize(); ++k) {
            double trace = 0.0;
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(cp.projection, k); it; ++it) {
                const int f = cp.matrix_face_ids[it.col()];
                const int c = g.face_cells[f][0];
                const double pf = sol.u[c] - fluxes.matrix[f] * center_distance(g, c, f) /
                                                 (cell_k(m, p, c) * g.face_measures[f]);
                trace += it.value() * pf;
            }
            worst = std::max(worst, std::abs(trace - sol.u[off + cp.fault_cell_ids[k]]));
        }
    }
    return worst;
}

}  // namespace faultrom::fom
