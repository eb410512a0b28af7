#include "faultrom/cases.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "faultrom/error.hpp"

namespace faultrom::cases {

using Eigen::VectorXd;
using geom::Point;
using nlohmann::json;

double Permeability::at(const snap::ParameterSpace& space, const VectorXd& mu) const {
    if (axis.empty()) return value;
    const int i = space.index(axis);
    if (i < 0) throw ConfigError("permeability refers to unknown parameter '" + axis + "'");
    return space.physical(mu)[i];
}

namespace {

snap::ParameterSpace case1_space() {
    using snap::Scale;
    return {{{"K1", 1e-2, 1e-1, Scale::Exponent},
             {"K2", 1e2, 1e3, Scale::Exponent},
             {"K3", 1e-4, 1e-3, Scale::Exponent},
             {"K4", 1e-4, 1e-3, Scale::Exponent},
             {"h", 0.0, 0.07, Scale::Linear}}};
}

Physics layered_physics() {
    Physics ph;
    // Regions from the bottom: reservoir, caprock, upper layer.
    ph.regions = {{"K1", 0.0}, {"K3", 0.0}, {"K2", 0.0}};
    FaultPhysics f;
    f.k_tangential = {"K4", 0.0};
    f.kn_factor = 2.0;
    f.aperture = 1e-3;
    ph.faults = {f};
    return ph;
}

}  // namespace

CaseDefinition case1() {
    CaseDefinition d;
    d.id = 1;
    d.name = "faulted-reservoir-2d";
    d.mesh.rect.horizons = {0.45, 0.55};
    d.mesh.rect.rows_per_layer = {12, 5, 12};
    d.mesh.rect.cols_left = 16;
    d.mesh.rect.cols_right = 17;
    d.space = case1_space();
    d.physics = layered_physics();
    d.deform = {"throw", "h", 0, {0.45, 0.55}, {}};
    d.bc.kind = "corner";
    d.bc.calibrate_target = 1.0;  // delta p of order one at the centre of the box
    d.qoi = {true, {0.0, 0.0}, {1.0, 1.0}};
    d.dlrom.encoder_hidden = {181};
    d.dlrom.latent = 5;
    d.dlrom.training.epochs = 4000;
    d.pod.modes = {5, 15, 45};
    d.pod.reference = 45;
    return d;
}

CaseDefinition case2() {
    CaseDefinition d = case1();
    d.id = 2;
    d.name = "faulted-reservoir-3d";
    d.mesh.rect.rows_per_layer = {6, 3, 6};
    d.mesh.rect.cols_left = 8;
    d.mesh.rect.cols_right = 8;
    d.mesh.extrude_layers = 4;
    d.mesh.extrude_height = 1.0;
    d.bc.calibrate_target = kCase2Target;
    d.bc.calibrate_at = case2_inverse_reference();
    d.qoi = {true, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    // Hidden width scaled with the dof count of this coarser mesh (N = 1140).
    d.dlrom.encoder_hidden = {224};
    d.dlrom.training.epochs = 6000;
    d.pod.modes = {5, 18};
    d.pod.reference = 18;
    return d;
}

CaseDefinition case3() {
    CaseDefinition d;
    d.id = 3;
    d.name = "fracture-network";
    d.mesh.kind = "file";
    d.mesh.file = "case3_mesh.json";
    d.space = {{{"omega0", 0.0, std::numbers::pi / 2, snap::Scale::Linear},
                {"delta", 0.0, 0.05, snap::Scale::Linear}}};
    d.physics.regions = {{"", 1e-2}, {"", 1e2}};
    FaultPhysics conductive;
    conductive.k_tangential = {"", 1e4};
    conductive.k_normal = {"", 1e4};
    conductive.aperture = 1e-4;
    FaultPhysics blocking = conductive;
    blocking.k_tangential = {"", 1e-4};
    blocking.k_normal = {"", 1e-4};
    blocking.id = 4;
    d.physics.faults = {conductive, blocking};
    blocking.id = 5;
    d.physics.faults.push_back(blocking);
    d.deform = {"horizon_shift", "delta", 3, {0.5}, {1, 2}};
    d.bc.kind = "sinusoidal";
    d.bc.p1 = 1.0;
    d.bc.p2 = 0.0;
    d.bc.axis = "omega0";
    d.qoi.enabled = false;
    d.dlrom.encoder_hidden = {404};
    d.dlrom.latent = 2;
    d.dlrom.training.epochs = 5000;
    d.pod.modes = {5, 15, 44};
    d.pod.reference = 44;
    return d;
}

CaseDefinition by_id(int id) {
    switch (id) {
        case 1: return case1();
        case 2: return case2();
        case 3: return case3();
        default: throw ConfigError("unknown case " + std::to_string(id) + " (expected 1, 2 or 3)");
    }
}

snap::ParameterSpace case2_inverse_space() {
    using snap::Scale;
    return {{{"K1", 1e-4, 1.0, Scale::Exponent},
             {"K2", 100.0, 200.0, Scale::Exponent},
             {"K3", 1e-6, 1e-4, Scale::Exponent},
             {"K4", 9e-4, 1e-3, Scale::Exponent},
             {"h", 0.01, 0.1, Scale::Linear}}};
}

std::vector<double> case2_inverse_reference() { return {0.1, 150.0, 1e-4, 9.5e-4, 0.09}; }

VectorXd parameter_point(const snap::ParameterSpace& space, const std::vector<double>& physical) {
    if (physical.size() != space.dim()) throw ConfigError("parameter point has the wrong number of entries");
    VectorXd mu(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i) {
        if (space.axes[i].scale == snap::Scale::Exponent) {
            if (!(physical[i] > 0.0)) throw ConfigError("exponent parameter '" + space.axes[i].name + "' must be positive");
            mu[static_cast<Eigen::Index>(i)] = std::log(physical[i]);
        } else {
            mu[static_cast<Eigen::Index>(i)] = physical[i];
        }
    }
    return mu;
}

// ---------------------------------------------------------------- json

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ConfigError("unknown key '" + k + "' in section '" + section + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json perm_to_json(const Permeability& p) {
    return p.axis.empty() ? json(p.value) : json{{"axis", p.axis}};
}

Permeability perm_from_json(const json& j) {
    if (j.is_number()) return {"", j.get<double>()};
    check_keys(j, {"axis"}, "permeability");
    return {j.at("axis").get<std::string>(), 0.0};
}

json space_to_json(const snap::ParameterSpace& s) {
    json axes = json::array();
    for (const auto& a : s.axes)
        axes.push_back({{"name", a.name},
                        {"lo", a.lo},
                        {"hi", a.hi},
                        {"scale", a.scale == snap::Scale::Exponent ? "exponent" : "linear"}});
    return axes;
}

snap::ParameterSpace space_from_json(const json& j) {
    snap::ParameterSpace s;
    if (!j.is_array()) throw ConfigError("parameter axes must be an array");
    for (const auto& a : j) {
        check_keys(a, {"name", "lo", "hi", "scale"}, "axis");
        snap::Axis ax;
        read(a, "name", ax.name);
        read(a, "lo", ax.lo);
        read(a, "hi", ax.hi);
        const std::string scale = a.value("scale", "linear");
        if (scale == "exponent") ax.scale = snap::Scale::Exponent;
        else if (scale != "linear") throw ConfigError("axis scale must be 'linear' or 'exponent'");
        s.axes.push_back(ax);
    }
    s.validate();
    return s;
}

json training_to_json(const dl::TrainingConfig& t) {
    return {{"alpha", t.alpha},         {"beta", t.beta},
            {"gamma_qoi", t.gamma_qoi}, {"epochs", t.epochs},
            {"batch_size", t.batch_size}, {"lr", t.lr},
            {"decay_factor", t.decay_factor}, {"decay_every", t.decay_every},
            {"adam_beta1", t.adam_beta1}, {"adam_beta2", t.adam_beta2},
            {"adam_eps", t.adam_eps},   {"seed", t.seed},
            {"two_stage", t.two_stage}};
}

void training_from_json(const json& j, dl::TrainingConfig& t) {
    check_keys(j,
               {"alpha", "beta", "gamma_qoi", "epochs", "batch_size", "lr", "decay_factor", "decay_every", "adam_beta1",
                "adam_beta2", "adam_eps", "seed", "two_stage"},
               "dlrom.training");
    read(j, "alpha", t.alpha);
    read(j, "beta", t.beta);
    read(j, "gamma_qoi", t.gamma_qoi);
    read(j, "epochs", t.epochs);
    read(j, "batch_size", t.batch_size);
    read(j, "lr", t.lr);
    read(j, "decay_factor", t.decay_factor);
    read(j, "decay_every", t.decay_every);
    read(j, "adam_beta1", t.adam_beta1);
    read(j, "adam_beta2", t.adam_beta2);
    read(j, "adam_eps", t.adam_eps);
    read(j, "seed", t.seed);
    read(j, "two_stage", t.two_stage);
}

}  // namespace

json to_json(const CaseDefinition& d) {
    json mesh;
    mesh["kind"] = d.mesh.kind;
    const auto& r = d.mesh.rect;
    mesh["rect"] = {{"width", r.width},
                    {"height", r.height},
                    {"fault_angle_deg", r.fault_angle_deg},
                    {"fault_center", {r.fault_center.x(), r.fault_center.y()}},
                    {"horizons", r.horizons},
                    {"rows_per_layer", r.rows_per_layer},
                    {"cols_left", r.cols_left},
                    {"cols_right", r.cols_right}};
    mesh["file"] = d.mesh.file;
    mesh["extrude_layers"] = d.mesh.extrude_layers;
    mesh["extrude_height"] = d.mesh.extrude_height;

    json regions = json::array(), faults = json::array();
    for (const auto& p : d.physics.regions) regions.push_back(perm_to_json(p));
    for (const auto& f : d.physics.faults)
        faults.push_back({{"id", f.id},
                          {"k_tangential", perm_to_json(f.k_tangential)},
                          {"kn_factor", f.kn_factor},
                          {"k_normal", perm_to_json(f.k_normal)},
                          {"aperture", f.aperture}});

    return {{"id", d.id},
            {"name", d.name},
            {"mesh", mesh},
            {"parameters", {{"axes", space_to_json(d.space)}, {"regions", regions}, {"faults", faults}}},
            {"deform",
             {{"kind", d.deform.kind},
              {"axis", d.deform.axis},
              {"fault_id", d.deform.fault_id},
              {"horizons", d.deform.horizons},
              {"rigid_faults", d.deform.rigid_faults}}},
            {"bc",
             {{"kind", d.bc.kind},
              {"pressure", d.bc.pressure},
              {"rate", d.bc.rate},
              {"calibrate_target", d.bc.calibrate_target},
              {"calibrate_at", d.bc.calibrate_at},
              {"p1", d.bc.p1},
              {"p2", d.bc.p2},
              {"axis", d.bc.axis},
              {"center", d.bc.center}}},
            {"qoi", {{"enabled", d.qoi.enabled}, {"injection", d.qoi.injection}, {"production", d.qoi.production}}},
            {"dataset",
             {{"train", d.dataset.sizes.train},
              {"val", d.dataset.sizes.val},
              {"test", d.dataset.sizes.test},
              {"seed", d.dataset.seed}}},
            {"dlrom",
             {{"encoder_hidden", d.dlrom.encoder_hidden},
              {"map_hidden", d.dlrom.map_hidden},
              {"latent", d.dlrom.latent},
              {"init_seed", d.dlrom.init_seed},
              {"training", training_to_json(d.dlrom.training)}}},
            {"pod", {{"modes", d.pod.modes}, {"reference", d.pod.reference}, {"block", d.pod.block}}}};
}

CaseDefinition from_json(const json& doc) {
    check_keys(doc, {"id", "name", "mesh", "parameters", "deform", "bc", "qoi", "dataset", "dlrom", "pod"}, "case");
    CaseDefinition d;
    if (doc.contains("id")) {
        const int id = doc.at("id").get<int>();
        if (id != 0) d = by_id(id);
    }
    read(doc, "name", d.name);
    if (doc.contains("mesh")) {
        const auto& m = doc["mesh"];
        check_keys(m, {"kind", "rect", "file", "extrude_layers", "extrude_height"}, "mesh");
        read(m, "kind", d.mesh.kind);
        read(m, "file", d.mesh.file);
        read(m, "extrude_layers", d.mesh.extrude_layers);
        read(m, "extrude_height", d.mesh.extrude_height);
        if (m.contains("rect")) {
            const auto& r = m["rect"];
            check_keys(r,
                       {"width", "height", "fault_angle_deg", "fault_center", "horizons", "rows_per_layer", "cols_left",
                        "cols_right"},
                       "mesh.rect");
            auto& o = d.mesh.rect;
            read(r, "width", o.width);
            read(r, "height", o.height);
            read(r, "fault_angle_deg", o.fault_angle_deg);
            if (r.contains("fault_center")) {
                const auto c = r["fault_center"].get<std::vector<double>>();
                if (c.size() != 2) throw ConfigError("fault_center needs two entries");
                o.fault_center = Point(c[0], c[1], 0.0);
            }
            read(r, "horizons", o.horizons);
            read(r, "rows_per_layer", o.rows_per_layer);
            read(r, "cols_left", o.cols_left);
            read(r, "cols_right", o.cols_right);
        }
        if (d.mesh.kind != "faulted_rectangle" && d.mesh.kind != "file")
            throw ConfigError("mesh kind must be 'faulted_rectangle' or 'file'");
    }
    if (doc.contains("parameters")) {
        const auto& p = doc["parameters"];
        check_keys(p, {"axes", "regions", "faults"}, "parameters");
        if (p.contains("axes")) d.space = space_from_json(p["axes"]);
        if (p.contains("regions")) {
            d.physics.regions.clear();
            for (const auto& r : p["regions"]) d.physics.regions.push_back(perm_from_json(r));
        }
        if (p.contains("faults")) {
            d.physics.faults.clear();
            for (const auto& f : p["faults"]) {
                check_keys(f, {"id", "k_tangential", "kn_factor", "k_normal", "aperture"}, "parameters.faults");
                FaultPhysics fp;
                read(f, "id", fp.id);
                if (f.contains("k_tangential")) fp.k_tangential = perm_from_json(f["k_tangential"]);
                read(f, "kn_factor", fp.kn_factor);
                if (f.contains("k_normal")) fp.k_normal = perm_from_json(f["k_normal"]);
                read(f, "aperture", fp.aperture);
                d.physics.faults.push_back(fp);
            }
        }
    }
    if (doc.contains("deform")) {
        const auto& j = doc["deform"];
        check_keys(j, {"kind", "axis", "fault_id", "horizons", "rigid_faults"}, "deform");
        read(j, "kind", d.deform.kind);
        read(j, "axis", d.deform.axis);
        read(j, "fault_id", d.deform.fault_id);
        read(j, "horizons", d.deform.horizons);
        read(j, "rigid_faults", d.deform.rigid_faults);
        if (d.deform.kind != "none" && d.deform.kind != "throw" && d.deform.kind != "horizon_shift")
            throw ConfigError("deform kind must be 'none', 'throw' or 'horizon_shift'");
    }
    if (doc.contains("bc")) {
        const auto& j = doc["bc"];
        check_keys(j, {"kind", "pressure", "rate", "calibrate_target", "calibrate_at", "p1", "p2", "axis", "center"}, "bc");
        read(j, "kind", d.bc.kind);
        read(j, "pressure", d.bc.pressure);
        read(j, "rate", d.bc.rate);
        read(j, "calibrate_target", d.bc.calibrate_target);
        read(j, "calibrate_at", d.bc.calibrate_at);
        read(j, "p1", d.bc.p1);
        read(j, "p2", d.bc.p2);
        read(j, "axis", d.bc.axis);
        read(j, "center", d.bc.center);
        if (d.bc.kind != "corner" && d.bc.kind != "sinusoidal")
            throw ConfigError("bc kind must be 'corner' or 'sinusoidal'");
    }
    if (doc.contains("qoi")) {
        const auto& j = doc["qoi"];
        check_keys(j, {"enabled", "injection", "production"}, "qoi");
        read(j, "enabled", d.qoi.enabled);
        read(j, "injection", d.qoi.injection);
        read(j, "production", d.qoi.production);
    }
    if (doc.contains("dataset")) {
        const auto& j = doc["dataset"];
        check_keys(j, {"train", "val", "test", "seed"}, "dataset");
        read(j, "train", d.dataset.sizes.train);
        read(j, "val", d.dataset.sizes.val);
        read(j, "test", d.dataset.sizes.test);
        read(j, "seed", d.dataset.seed);
    }
    if (doc.contains("dlrom")) {
        const auto& j = doc["dlrom"];
        check_keys(j, {"encoder_hidden", "map_hidden", "latent", "init_seed", "training"}, "dlrom");
        read(j, "encoder_hidden", d.dlrom.encoder_hidden);
        read(j, "map_hidden", d.dlrom.map_hidden);
        read(j, "latent", d.dlrom.latent);
        read(j, "init_seed", d.dlrom.init_seed);
        if (j.contains("training")) training_from_json(j["training"], d.dlrom.training);
    }
    if (doc.contains("pod")) {
        const auto& j = doc["pod"];
        check_keys(j, {"modes", "reference", "block"}, "pod");
        read(j, "modes", d.pod.modes);
        read(j, "reference", d.pod.reference);
        read(j, "block", d.pod.block);
    }
    return d;
}

void save(const CaseDefinition& def, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write case file " + path);
    out << to_json(def).dump(2) << '\n';
    if (!out) throw ConfigError("cannot write case file " + path);
}

CaseDefinition load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("case file not found: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return from_json(doc);
}

// ---------------------------------------------------------------- deformation

namespace {

struct BoundaryNodes {
    std::map<std::string, std::set<int>> by_tag;
    bool has(const std::string& tag, int n) const {
        const auto it = by_tag.find(tag);
        return it != by_tag.end() && it->second.count(n) > 0;
    }
};

BoundaryNodes boundary_nodes(const mesh::MixedDimMesh& m) {
    BoundaryNodes b;
    const auto& g = m.matrix;
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        if (g.face_tag[f] < 0) continue;
        auto& s = b.by_tag[m.tag_names[static_cast<std::size_t>(g.face_tag[f])]];
        s.insert(g.faces[f].begin(), g.faces[f].end());
    }
    return b;
}

/// Straight line of a fault: bottom end and upward unit tangent.
std::pair<Point, Point> fault_line(const mesh::MixedDimMesh& m, int fi) {
    const auto& pts = m.faults[static_cast<std::size_t>(fi)].grid.node_coords;
    Point a = pts.front(), b = pts.back();
    for (const auto& p : pts) {
        if (p.y() < a.y()) a = p;
        if (p.y() > b.y()) b = p;
    }
    const Point t = (b - a).normalized();
    if (std::abs(t.y()) < 1e-12) throw ConfigError("sliding fault must not be horizontal");
    return {a, t};
}

deform::AffineDisplacement fixed() { return {Point::Zero(), {Point::Zero()}}; }
deform::AffineDisplacement along(const Point& c) { return {Point::Zero(), {c}}; }

bool on_level(double y, const std::vector<double>& levels) {
    return std::any_of(levels.begin(), levels.end(), [&](double l) { return std::abs(y - l) < 1e-9; });
}

}  // namespace

deform::DeformConfig control_points(const mesh::MixedDimMesh& m, const DeformSpec& spec,
                                    const snap::ParameterSpace& space) {
    if (m.dim != 2) throw ConfigError("control points are built on a 2D mesh");
    if (space.index(spec.axis) < 0) throw ConfigError("deformation refers to unknown parameter '" + spec.axis + "'");
    const int fi = m.fault_index(spec.fault_id);
    if (fi < 0) throw ConfigError("deformation refers to unknown fault " + std::to_string(spec.fault_id));

    deform::DeformConfig c;
    c.dim = 2;
    const auto [a, t] = fault_line(m, fi);
    const Point nu(t.y(), -t.x(), 0.0);  // points to the right of the upward tangent
    c.surfaces.push_back({spec.fault_id, nu, {t}, a, true, spec.fault_id});
    c.surfaces.push_back({100, Point(1, 0, 0), {Point(0, 1, 0)}, Point::Zero(), false, -1});
    const int fault_s = 0, wall_s = 1;

    const auto sides = deform::node_side_values(m, c);
    const auto topo = mesh::fault_node_sides(m, fi);
    const auto bnd = boundary_nodes(m);
    const auto& X = m.matrix.node_coords;
    double xmax = 0.0;
    for (const auto& p : X) xmax = std::max(xmax, p.x());
    const auto fault_x = [&](double y) { return a.x() + (y - a.y()) * t.x() / t.y(); };
    const Point slope(t.x() / t.y(), 1.0, 0.0);  // along the fault with unit vertical rise

    auto add = [&](int n, deform::SetTag set, deform::AffineDisplacement disp, int surface, int side) {
        deform::ControlPoint cp;
        cp.position = X[static_cast<std::size_t>(n)];
        cp.set = set;
        cp.displacement = std::move(disp);
        cp.surface = surface;
        cp.side = side;
        cp.node = n;
        c.controls.push_back(std::move(cp));
    };
    using deform::SetTag;

    if (spec.kind == "throw") {
        for (int n = 0; n < static_cast<int>(X.size()); ++n) {
            const Point& x = X[static_cast<std::size_t>(n)];
            const bool ends = bnd.has("ymin", n) || bnd.has("ymax", n);
            const int s = sides[static_cast<std::size_t>(n)];
            if (s == 0 || s == 1) {
                if (ends || s == 0) add(n, SetTag::Cdf, fixed(), -1, s);
                else if (on_level(x.y(), spec.horizons)) add(n, SetTag::Cdf, along(slope), -1, s);
                else add(n, SetTag::Csf, {}, fault_s, s);
                continue;
            }
            if (ends || topo[static_cast<std::size_t>(n)] == 2) {
                add(n, SetTag::Cd, fixed(), -1, -1);
            } else if (x.x() > fault_x(x.y()) && on_level(x.y(), spec.horizons)) {
                // The horizontal part of the throw fades out towards the far wall.
                const double xf = fault_x(x.y());
                const double w = 1.0 - (x.x() - xf) / (xmax - xf);
                add(n, SetTag::Cd, along(Point(slope.x() * w, 1.0, 0.0)), -1, -1);
            } else if (bnd.has("xmin", n) || bnd.has("xmax", n)) {
                add(n, SetTag::Cs, {}, wall_s, -1);
            }
        }
    } else if (spec.kind == "horizon_shift") {
        std::vector<std::vector<int>> other;  // fault node sides per other fault
        std::vector<bool> rigid;
        for (std::size_t k = 0; k < m.faults.size(); ++k) {
            if (static_cast<int>(k) == fi) continue;
            other.push_back(mesh::fault_node_sides(m, static_cast<int>(k)));
            const int id = m.faults[k].id;
            rigid.push_back(std::find(spec.rigid_faults.begin(), spec.rigid_faults.end(), id) != spec.rigid_faults.end());
        }
        std::set<std::pair<long long, long long>> placed;  // coincident copies share one point
        auto once = [&](const Point& x) {
            const auto key = std::make_pair(std::llround(x.x() * 1e9), std::llround(x.y() * 1e9));
            return placed.insert(key).second;
        };
        const Point up(0.0, 1.0, 0.0);
        for (int n = 0; n < static_cast<int>(X.size()); ++n) {
            const Point& x = X[static_cast<std::size_t>(n)];
            const int s = sides[static_cast<std::size_t>(n)];
            if (s == 0 || s == 1) {
                // A prescribed fault node here would be reachable only through distant
                // points (its own kernel vanishes), so the whole fault slides.
                add(n, SetTag::Csf, {}, fault_s, s);
                continue;
            }
            if (topo[static_cast<std::size_t>(n)] == 2) {
                add(n, SetTag::Cd, fixed(), -1, -1);
                continue;
            }
            int on_other = -1;
            for (std::size_t k = 0; k < other.size() && on_other < 0; ++k)
                if (other[k][static_cast<std::size_t>(n)] >= 0) on_other = static_cast<int>(k);
            if (on_other >= 0) {
                if (once(x)) add(n, SetTag::Cd, rigid[static_cast<std::size_t>(on_other)] ? along(up) : fixed(), -1, -1);
                continue;
            }
            if (bnd.has("ymin", n) || bnd.has("ymax", n) || bnd.has("xmax", n)) {
                add(n, SetTag::Cd, fixed(), -1, -1);
            } else if (on_level(x.y(), spec.horizons) && x.x() < fault_x(x.y())) {
                add(n, SetTag::Cd, along(up), -1, -1);
            } else if (bnd.has("xmin", n)) {
                add(n, SetTag::Cs, {}, wall_s, -1);
            }
        }
    } else {
        throw ConfigError("no control point rule for deformation kind '" + spec.kind + "'");
    }
    deform::validate(c);
    return c;
}

VectorXd AffineDeformation::geometric(const VectorXd& mu) const {
    VectorXd g(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t k = 0; k < axes.size(); ++k) g[static_cast<Eigen::Index>(k)] = mu[axes[k]];
    return g;
}

VectorXd AffineDeformation::zeta(const VectorXd& mu) const { return zeta0 + dzeta * geometric(mu); }

namespace {

AffineDeformation make_affine(deform::DeformConfig cfg, std::vector<int> axes) {
    AffineDeformation d;
    d.config = std::move(cfg);
    d.axes = std::move(axes);
    const auto e = static_cast<Eigen::Index>(d.axes.size());
    VectorXd mu = VectorXd::Zero(e);
    d.zeta0 = deform::solve_system(deform::assemble_system(d.config, mu), d.config);
    d.dzeta.resize(d.zeta0.size(), e);
    for (Eigen::Index k = 0; k < e; ++k) {
        mu.setZero();
        mu[k] = 1.0;
        d.dzeta.col(k) = deform::solve_system(deform::assemble_system(d.config, mu), d.config) - d.zeta0;
    }
    return d;
}

std::string resolve_data(const std::string& file) {
    namespace fs = std::filesystem;
    if (fs::path(file).is_absolute() || fs::exists(file)) return file;
    if (const char* env = std::getenv("FAULTROM_DATA")) {
        const auto p = fs::path(env) / file;
        if (fs::exists(p)) return p.string();
    }
    return (fs::path(FAULTROM_DATA_DIR) / file).string();
}

int nearest_cell(const mesh::Subdomain& g, const std::vector<double>& point) {
    if (point.size() < 2 || point.size() > 3) throw ConfigError("QoI point needs 2 or 3 coordinates");
    const Point p(point[0], point[1], point.size() == 3 ? point[2] : 0.0);
    int best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const double d = (g.cell_centers[c] - p).squaredNorm();
        if (d < dist) {
            dist = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

CaseModel::CaseModel(CaseDefinition def) : def_(std::move(def)) {
    def_.space.validate();
    mesh::MixedDimMesh base;
    if (def_.mesh.kind == "file") {
        const auto path = resolve_data(def_.mesh.file);
        if (!std::filesystem::exists(path)) throw MissingInputError("mesh file not found: " + path);
        base = mesh::load_mesh_file(path);
    } else {
        base = mesh::load_mesh(mesh::faulted_rectangle(def_.mesh.rect));
    }
    if (base.dim != 2) throw ConfigError("case meshes are given in 2D (3D cases extrude them)");
    reference2d_ = std::make_shared<const mesh::MixedDimMesh>(std::move(base));
    reference_ = def_.mesh.extrude_layers > 0
                     ? std::make_shared<const mesh::MixedDimMesh>(
                           mesh::extrude(*reference2d_, def_.mesh.extrude_layers, def_.mesh.extrude_height))
                     : reference2d_;

    int regions = 0;
    for (int r : reference_->matrix.cell_region) regions = std::max(regions, r + 1);
    if (static_cast<int>(def_.physics.regions.size()) < regions)
        throw ConfigError("case needs a permeability for each of the " + std::to_string(regions) + " regions");

    if (def_.deform.kind != "none") {
        const int axis = def_.space.index(def_.deform.axis);
        deformation_ = make_affine(control_points(*reference2d_, def_.deform, def_.space), {axis});
    }
    if (def_.qoi.enabled)
        qoi_cells_ = std::make_pair(nearest_cell(reference_->matrix, def_.qoi.injection),
                                    nearest_cell(reference_->matrix, def_.qoi.production));
    if (def_.bc.kind == "corner" && !qoi_cells_) throw ConfigError("corner boundary conditions need QoI cells");

    if (def_.bc.calibrate_target > 0.0) {
        const VectorXd mu = def_.bc.calibrate_at.empty()
                                ? VectorXd(0.5 * (def_.space.lower() + def_.space.upper()))
                                : parameter_point(def_.space, def_.bc.calibrate_at);
        def_.bc.rate = 1.0;
        const auto pb = problem(mu);
        const double dp = delta_p(fom::solve(pb.mesh, pb.params, pb.bc).u);
        if (!(std::abs(dp) > 0.0) || !std::isfinite(dp)) throw NumericalError("rate calibration gave delta p = 0");
        def_.bc.rate = def_.bc.calibrate_target / dp;
        def_.bc.calibrate_target = 0.0;
        def_.bc.calibrate_at.clear();
    }
}

mesh::MixedDimMesh CaseModel::mesh_at(const VectorXd& mu) const {
    if (static_cast<std::size_t>(mu.size()) != def_.space.dim())
        throw ConfigError("parameter point has " + std::to_string(mu.size()) + " entries, expected " +
                          std::to_string(def_.space.dim()));
    if (!deformation_) return *reference_;
    const auto moved = deform::displace(*reference2d_, deformation_->zeta(mu), deformation_->config);
    if (def_.mesh.extrude_layers > 0) return mesh::extrude(moved, def_.mesh.extrude_layers, def_.mesh.extrude_height);
    return moved;
}

snap::Problem CaseModel::problem(const VectorXd& mu) const {
    snap::Problem pb{mesh_at(mu), {}, {}};
    const auto& m = pb.mesh;
    const auto& S = def_.space;
    auto& p = pb.params;
    for (const auto& r : def_.physics.regions) p.region_permeability.push_back(r.at(S, mu));

    std::vector<double> kt(m.faults.size());
    for (std::size_t k = 0; k < m.faults.size(); ++k) {
        const FaultPhysics* chosen = nullptr;
        for (const auto& f : def_.physics.faults)
            if (f.id == m.faults[k].id || (f.id == -1 && !chosen)) chosen = &f;
        if (!chosen) throw ConfigError("no physics for fault " + std::to_string(m.faults[k].id));
        kt[k] = chosen->k_tangential.at(S, mu);
        p.fault_k_tangential.push_back(kt[k]);
        p.fault_k_normal.push_back(chosen->kn_factor > 0.0 ? chosen->kn_factor * kt[k] / chosen->aperture
                                                           : chosen->k_normal.at(S, mu));
        p.fault_aperture.push_back(chosen->aperture);
    }
    // The most restrictive branch controls flow through an intersection.
    for (const auto& ix : m.intersections) {
        double k = std::numeric_limits<double>::infinity();
        for (int id : ix.branch_fault_ids) k = std::min(k, kt[static_cast<std::size_t>(m.fault_index(id))]);
        p.intersection_k.push_back(k);
    }

    pb.bc = fom::neumann_everywhere(m);
    const auto& g = m.matrix;
    if (def_.bc.kind == "corner") {
        const auto [inj, prod] = *qoi_cells_;
        for (int f : g.cell_faces[static_cast<std::size_t>(inj)])
            if (g.is_boundary(f) && g.face_tag[static_cast<std::size_t>(f)] >= 0)
                pb.bc.faces[static_cast<std::size_t>(f)] = {fom::BcKind::Dirichlet, def_.bc.pressure};
        p.point_sources = {{inj, def_.bc.rate}, {prod, -def_.bc.rate}};
    } else {
        const int axis = S.index(def_.bc.axis);
        if (axis < 0) throw ConfigError("boundary condition refers to unknown parameter '" + def_.bc.axis + "'");
        if (def_.bc.center.size() != 2) throw ConfigError("bc center needs two coordinates");
        const double omega0 = mu[axis], two_pi = 2.0 * std::numbers::pi;
        for (std::size_t f = 0; f < g.num_faces(); ++f) {
            if (!g.is_boundary(static_cast<int>(f)) || g.face_tag[f] < 0) continue;
            const Point& fc = g.face_centers[f];
            double theta = std::fmod(std::atan2(fc.y() - def_.bc.center[1], fc.x() - def_.bc.center[0]) - omega0, two_pi);
            if (theta < 0.0) theta += two_pi;
            const double s = std::sin(0.5 * theta);
            pb.bc.faces[f] = {fom::BcKind::Dirichlet, def_.bc.p1 * (1.0 - s) + def_.bc.p2 * s};
        }
    }
    return pb;
}

snap::ProblemBuilder CaseModel::builder() const {
    auto self = std::make_shared<const CaseModel>(*this);
    return [self](const VectorXd& mu) { return self->problem(mu); };
}

std::optional<dl::QoiIndices> CaseModel::qoi_dofs() const {
    if (!qoi_cells_) return std::nullopt;
    const auto p = static_cast<Eigen::Index>(layout().p);
    return dl::QoiIndices{p + qoi_cells_->first, p + qoi_cells_->second};
}

double CaseModel::delta_p(const VectorXd& u) const {
    const auto q = qoi_dofs();
    if (!q) throw ConfigError("case has no pressure-difference QoI");
    if (u.size() != static_cast<Eigen::Index>(layout().total)) throw ConfigError("dof vector has the wrong size");
    return u[q->injection] - u[q->production];
}

dl::Architecture CaseModel::architecture() const {
    dl::Architecture a;
    a.N = static_cast<Eigen::Index>(layout().total);
    a.e = static_cast<Eigen::Index>(def_.space.dim());
    a.n = def_.dlrom.latent;
    a.encoder_hidden = def_.dlrom.encoder_hidden;
    a.map_hidden = def_.dlrom.map_hidden;
    return a;
}

double calibrate_rate(const CaseDefinition& def, const VectorXd& mu, double target) {
    CaseDefinition d = def;
    d.bc.rate = 1.0;
    d.bc.calibrate_target = 0.0;
    d.bc.calibrate_at.clear();
    const CaseModel model(d);
    const auto pb = model.problem(mu);
    const double dp = model.delta_p(fom::solve(pb.mesh, pb.params, pb.bc).u);
    if (!(std::abs(dp) > 0.0) || !std::isfinite(dp)) throw NumericalError("rate calibration gave delta p = 0");
    return target / dp;
}

}  // namespace faultrom::cases
