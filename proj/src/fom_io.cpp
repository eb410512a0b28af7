#include <fstream>
#include <iomanip>

#include "faultrom/binary_io.hpp"
#include "faultrom/darcy_fom.hpp"

namespace faultrom::fom {

namespace {
constexpr std::uint32_t kVersion = 1;
}

void write_solution(const std::string& path, const FomSolution& sol, const Eigen::VectorXd& mu) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    io::put_magic(os, "FOMS");
    io::put(os, kVersion);
    const auto& L = sol.layout;
    for (std::uint64_t v : {L.total, L.p, L.p_gamma, L.lambda}) io::put(os, v);
    io::put(os, static_cast<std::uint64_t>(mu.size()));
    io::put_span(os, std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())));
    io::put_span(os, std::span<const double>(sol.u.data(), static_cast<std::size_t>(sol.u.size())));
    io::put(os, sol.residual);
    if (!os) throw ConfigError("write failed: " + path);
}

FomSolution read_solution(const std::string& path, Eigen::VectorXd* mu) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open " + path);
    io::expect_magic(is, "FOMS");
    if (io::get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported FOMS version in " + path);
    FomSolution sol;
    auto& L = sol.layout;
    L.total = io::get<std::uint64_t>(is);
    L.p = io::get<std::uint64_t>(is);
    L.p_gamma = io::get<std::uint64_t>(is);
    L.lambda = io::get<std::uint64_t>(is);
    if (!(L.p <= L.p_gamma && L.p_gamma <= L.lambda && L.lambda <= L.total) || L.total > (1ull << 32))
        throw ConfigError("corrupt layout in " + path);
    const auto e = io::get<std::uint64_t>(is);
    if (e > 1024) throw ConfigError("corrupt parameter count in " + path);
    Eigen::VectorXd m(static_cast<Eigen::Index>(e));
    io::get_span(is, std::span<double>(m.data(), e));
    sol.u.resize(static_cast<Eigen::Index>(L.total));
    io::get_span(is, std::span<double>(sol.u.data(), L.total));
    sol.residual = io::get<double>(is);
    if (mu) *mu = std::move(m);
    return sol;
}

void write_pressure_csv(const std::string& path, const FomSolution& sol, const mesh::MixedDimMesh& m) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    const bool three = m.dim == 3;
    os << (three ? "id,x,y,z,value\n" : "id,x,y,value\n") << std::setprecision(12);
    auto row = [&](std::size_t id, const mesh::Subdomain& g, std::size_t c) {
        const auto& x = g.cell_centers[c];
        os << id << ',' << x[0] << ',' << x[1];
        if (three) os << ',' << x[2];
        os << ',' << sol.u[static_cast<Eigen::Index>(id)] << '\n';
    };
    for (std::size_t c = 0; c < m.matrix.num_cells(); ++c) row(c, m.matrix, c);
    for (std::size_t fi = 0; fi < m.faults.size(); ++fi)
        for (std::size_t c = 0; c < m.faults[fi].grid.num_cells(); ++c) row(m.fault_offsets[fi] + c, m.faults[fi].grid, c);
}

}  // namespace faultrom::fom
