#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

#include "faultrom/cli.hpp"
#include "faultrom/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace faultrom;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "faultrom_test_cli";

fs::path tiny_config() {
    fs::create_directories(kRoot);
    const fs::path p = kRoot / "tiny.json";
    std::ofstream(p) << R"({"id": 1,
        "dataset": {"train": 24, "val": 4, "test": 6, "seed": 3},
        "dlrom": {"encoder_hidden": [16], "map_hidden": [8], "training": {"epochs": 4}},
        "pod": {"modes": [2, 4], "reference": 4}})";
    return p;
}

int faultrom_cmd(std::vector<std::string> args) {
    args.insert(args.begin(), "faultrom");
    return cli::run(args);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

fs::path only_run_dir(const fs::path& out) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(out))
        if (e.is_directory()) dirs.push_back(e.path());
    REQUIRE(dirs.size() == 1);
    return dirs[0];
}

/// Output hashes over all manifests of a run directory.
std::map<std::string, std::string> output_hashes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("manifest-", 0) != 0) continue;
        const json m = read_json(e.path());
        for (const auto& [k, v] : m.at("outputs").items()) out[k] = v.get<std::string>();
    }
    return out;
}

bool is_timing(const std::string& name) {
    return name.find("timing") != std::string::npos || name.find("samples") != std::string::npos;
}

}  // namespace

TEST_CASE("exit codes") {
    const auto cfg = tiny_config().string();
    const auto out = (kRoot / "codes").string();
    fs::remove_all(out);
    CHECK(faultrom_cmd({"mesh", "--out", out}) == 2);                          // no case selected
    CHECK(faultrom_cmd({"--case", "7", "mesh", "--out", out}) == 2);           // out of range
    CHECK(faultrom_cmd({"--case", "1", "frobnicate"}) == 2);                   // unknown command
    CHECK(faultrom_cmd({"--config", (kRoot / "absent.json").string(), "mesh"}) == 4);
    {
        std::ofstream(kRoot / "bad.json") << R"({"id": 1, "colour": "blue"})";
        CHECK(faultrom_cmd({"--config", (kRoot / "bad.json").string(), "--out", out, "mesh"}) == 2);
        std::ofstream(kRoot / "broken.json") << "{ not json";
        CHECK(faultrom_cmd({"--config", (kRoot / "broken.json").string(), "--out", out, "mesh"}) == 2);
    }
    // Pipeline steps need their inputs.
    CHECK(faultrom_cmd({"--config", cfg, "--out", out, "pod", "build"}) == 4);
    CHECK(faultrom_cmd({"--config", cfg, "--out", out, "dlrom", "eval"}) == 4);
    CHECK(faultrom_cmd({"--config", cfg, "--out", out, "errors", "--rom", "pod"}) == 4);
    CHECK(faultrom_cmd({"--config", cfg, "--out", out, "errors", "--rom", "svd"}) == 2);
    // Case 3 has no pressure-difference quantity.
    CHECK(faultrom_cmd({"--case", "3", "--out", out, "sensitivity", "--rom", "fom", "--samples", "4"}) == 2);
    CHECK(faultrom_cmd({"--config", cfg, "--case", "2", "--out", out, "mesh"}) == 2);
    CHECK(faultrom_cmd({"--help"}) == 0);

    CHECK(cli::exit_code(ConfigError("x")) == 2);
    CHECK(cli::exit_code(NumericalError("x")) == 3);
    CHECK(cli::exit_code(MissingInputError("x")) == 4);
    CHECK(cli::exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("case pipeline: manifests, content addressing, determinism") {
    const auto cfg = tiny_config().string();
    const fs::path a = kRoot / "run_a", b = kRoot / "run_b", c = kRoot / "run_c";
    for (const auto& p : {a, b, c}) fs::remove_all(p);

    REQUIRE(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "--jobs", "1", "case", "1", "all"}) == 0);
    // Same seed, different worker count: identical artifacts.
    REQUIRE(faultrom_cmd({"--config", cfg, "--out", b.string(), "--seed", "7", "--jobs", "3", "case", "1", "all"}) == 0);
    const auto da = only_run_dir(a), db = only_run_dir(b);
    CHECK(da.filename() == db.filename());
    CHECK(da.filename().string().rfind("case1-", 0) == 0);

    const auto ha = output_hashes(da), hb = output_hashes(db);
    REQUIRE(ha.size() == hb.size());
    std::size_t compared = 0;
    for (const auto& [name, hash] : ha) {
        if (is_timing(name)) continue;
        CAPTURE(name);
        CHECK(hb.at(name) == hash);
        ++compared;
    }
    CHECK(compared >= 12);
    for (const char* must : {"snapshots.snap", "pod-mono-n2.podb", "pod-mono-n4.podb", "errors-pod-mono.csv", "mesh.json"})
        CHECK(ha.count(must) == 1);

    // Every artifact points at the manifest that wrote it, and that manifest lists it.
    const auto artifacts = read_json(da / "artifacts.json");
    for (const auto& [name, manifest] : artifacts.items()) {
        CAPTURE(name);
        REQUIRE(fs::exists(da / manifest.get<std::string>()));
        if (name.rfind("manifest-", 0) == 0) continue;
        CHECK(read_json(da / manifest.get<std::string>()).at("outputs").contains(name));
    }
    const auto snap_manifest = read_json(da / "manifest-snapshots.json");
    CHECK(snap_manifest.at("seeds").at("dataset") == 7);
    CHECK(snap_manifest.at("timings").at("offline_data").get<double>() > 0.0);
    const auto train_manifests = std::count_if(fs::directory_iterator(da), fs::directory_iterator{}, [](const auto& e) {
        return e.path().filename().string().rfind("manifest-train-dlrom-", 0) == 0;
    });
    CHECK(train_manifests == 1);

    // The error report for one n has one row.
    REQUIRE(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "errors", "--rom", "pod", "--modes", "4"}) == 0);
    std::ifstream rep(da / "errors-pod-mono.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(rep, line)) lines.push_back(line);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "n,e_ave,e_max,e_min");
    CHECK(lines[1].rfind("4,", 0) == 0);

    // Another seed lands in another directory; training flags only change the model tag.
    REQUIRE(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "8", "mesh"}) == 0);
    std::set<std::string> dirs;
    for (const auto& e : fs::directory_iterator(a)) dirs.insert(e.path().filename().string());
    CHECK(dirs.size() == 2);
    REQUIRE(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "dlrom", "train", "--epochs", "2"}) == 0);
    std::size_t models = 0;
    for (const auto& e : fs::directory_iterator(da)) models += e.path().extension() == ".dlrm" && e.path().string().find("best") == std::string::npos;
    CHECK(models == 2);

    // Online queries and Monte Carlo on the trained surrogate.
    CHECK(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "dlrom", "eval", "--mu", "0.05,500,5e-4,5e-4,0.03"}) == 0);
    CHECK(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "pod", "eval", "--modes", "4", "--mu",
               "0.05,500,5e-4,5e-4,0.03"}) == 0);
    CHECK(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "deform", "--mu", "0.05,500,5e-4,5e-4,0.07", "--solve"}) == 0);
    CHECK(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "deform", "--mu", "1,2"}) == 2);
    REQUIRE(faultrom_cmd({"--config", cfg, "--out", a.string(), "--seed", "7", "sensitivity", "--rom", "dlrom", "--samples", "64"}) == 0);
    bool found = false;
    for (const auto& e : fs::directory_iterator(da)) {
        const auto n = e.path().filename().string();
        if (n.rfind("sensitivity-dlrom-", 0) == 0 && e.path().extension() == ".json") {
            const auto s = read_json(e.path());
            CHECK(s.at("base_samples") == 64);
            CHECK(s.at("first_order").size() == 5);
            found = true;
        }
    }
    CHECK(found);

    // FAULTROM_OUT supplies the default output root.
    ::setenv("FAULTROM_OUT", c.string().c_str(), 1);
    CHECK(faultrom_cmd({"--config", cfg, "--seed", "7", "mesh"}) == 0);
    ::unsetenv("FAULTROM_OUT");
    CHECK(only_run_dir(c).filename() == da.filename());
}
