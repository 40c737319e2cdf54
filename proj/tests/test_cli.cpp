#include "gradflow/cli.hpp"
#include "gradflow/eval.hpp"
#include "gradflow/tiling.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace gradflow;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result gf(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double summary_value(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + " = ", 0) == 0) return std::stod(line.substr(key.size() + 3));
    FAIL("missing key " << key);
    return 0;
}

}  // namespace

TEST_CASE("synth, info and provenance") {
    const auto dir = test::scratch_dir("cli_info");
    const auto labels = (dir / "labels.gf3d").string();
    auto r = gf({"synth", "--dims", "24,20,16", "--cells", "6", "--seed", "3", "--out", labels, "--image",
                 (dir / "image.gf3d").string()});
    REQUIRE(r.code == 0);

    r = gf({"info", "--in", labels});
    CHECK(r.code == 0);
    CHECK(r.out.find("dtype: uint32") != std::string::npos);
    CHECK(r.out.find("dims: 24 20 16") != std::string::npos);
    CHECK(r.out.find("channels: 1") != std::string::npos);

    const auto prov = slurp(labels + ".provenance.txt");
    CHECK(prov.find("command = synth") != std::string::npos);
    CHECK(prov.find("cells = 6") != std::string::npos);
    CHECK(prov.find(cli::file_sha256(labels)) != std::string::npos);
    CHECK(cli::file_sha256(labels).size() == 64u);
}

TEST_CASE("exit codes") {
    const auto dir = test::scratch_dir("cli_codes");
    Result r = gf({"info", "--bogus-flag", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: code=2 kind=bad_args", 0) == 0);
    CHECK(gf({}).code == 2);
    CHECK(gf({"reconstruct", "--out", (dir / "x.gf3d").string()}).code == 2);  // missing input
    CHECK(gf({"synth", "--cells", "many", "--out", (dir / "x.gf3d").string()}).code == 2);
    CHECK(gf({"synth", "--encoding", "sdf", "--out", (dir / "x.gf3d").string()}).code == 2);

    r = gf({"info", "--in", (dir / "missing.gf3d").string()});
    CHECK(r.code == 3);
    CHECK(r.err.rfind("error: code=3 kind=io", 0) == 0);

    std::ofstream(dir / "bad.gf3d") << "XXXX not a volume at all";
    r = gf({"info", "--in", (dir / "bad.gf3d").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("not a GF3D file") != std::string::npos);

    CHECK(gf({"synth", "--dims", "8,8,8", "--cells", "300", "--out", (dir / "x.gf3d").string()}).code == 4);

    std::ofstream(dir / "cfg.txt") << "cells = 4\nnot_a_key = 1\n";
    r = gf({"synth", "--config", (dir / "cfg.txt").string(), "--out", (dir / "x.gf3d").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("not_a_key") != std::string::npos);
}

TEST_CASE("flags override the config file") {
    const auto dir = test::scratch_dir("cli_config");
    std::ofstream(dir / "cfg.txt") << "# phantom\ndims = 20,20,20\ncells = 4   # few\nseed = 2\n";
    const auto a = (dir / "a.gf3d").string();
    REQUIRE(gf({"synth", "--config", (dir / "cfg.txt").string(), "--cells", "7", "--out", a}).code == 0);
    const auto labels = to_labels(read_volume(a));
    std::uint32_t mx = 0;
    for (auto v : labels.data()) mx = std::max(mx, v);
    CHECK(mx == 7u);
    CHECK(labels.dims() == Dims{20, 20, 20});
    const auto prov = slurp(a + ".provenance.txt");
    CHECK(prov.find("cells = 7") != std::string::npos);
    CHECK(prov.find("seed = 2") != std::string::npos);

    // Dashed and underscored spellings are the same key.
    const auto b = (dir / "b.gf3d").string();
    REQUIRE(gf({"synth", "--dims", "20,20,20", "--cells", "3", "--min-seed-separation", "6", "--out", b}).code == 0);
    CHECK(slurp(b + ".provenance.txt").find("min_seed_separation = 6") != std::string::npos);
}

TEST_CASE("end-to-end pipeline is accurate and reproducible") {
    const auto dir = test::scratch_dir("cli_pipeline");
    auto p = [&](const char* name) { return (dir / name).string(); };
    REQUIRE(gf({"synth", "--dims", "96,96,96", "--cells", "80", "--seed", "3", "--out", p("gt.gf3d")}).code == 0);
    REQUIRE(gf({"encode", "--labels", p("gt.gf3d"), "--prediction", p("pred4.gf3d")}).code == 0);
    CHECK(read_header(p("pred4.gf3d")).channels == 4u);
    REQUIRE(gf({"reconstruct", "--prediction", p("pred4.gf3d"), "--out", p("seg.gf3d"), "--report",
                p("report.tsv")})
                .code == 0);
    const auto r = gf({"eval", "--gt", p("gt.gf3d"), "--pred", p("seg.gf3d"), "--out", p("dice.csv"), "--summary",
                       p("summary.txt")});
    REQUIRE(r.code == 0);
    CHECK(summary_value(r.out, "mean") >= 0.95);
    CHECK(summary_value(slurp(p("summary.txt")), "mean") >= 0.95);
    CHECK(slurp(p("dice.csv")).rfind("gt_id,pred_id,", 0) == 0);

    REQUIRE(gf({"reconstruct", "--prediction", p("pred4.gf3d"), "--out", p("seg2.gf3d"), "--threads", "3"}).code ==
            0);
    CHECK(slurp(p("seg.gf3d")) == slurp(p("seg2.gf3d")));

    // Separate field and foreground inputs give the same result.
    REQUIRE(gf({"encode", "--labels", p("gt.gf3d"), "--out", p("field.gf3d"), "--foreground", p("fg.gf3d")}).code ==
            0);
    REQUIRE(gf({"reconstruct", "--field", p("field.gf3d"), "--foreground", p("fg.gf3d"), "--out", p("seg3.gf3d")})
                .code == 0);
    CHECK(slurp(p("seg.gf3d")) == slurp(p("seg3.gf3d")));
}

TEST_CASE("import-raw") {
    const auto dir = test::scratch_dir("cli_raw");
    std::vector<std::uint16_t> raw(6 * 5 * 4 * 2);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint16_t>(i * 11);
    std::ofstream(dir / "a.raw", std::ios::binary)
        .write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
    const auto out = (dir / "a.gf3d").string();
    REQUIRE(gf({"import-raw", "--in", (dir / "a.raw").string(), "--raw-dims", "6,5,4", "--raw-channels", "2",
                "--raw-dtype", "uint16", "--out", out})
                .code == 0);
    const auto v = read_volume(out);
    REQUIRE(v.get_if<std::uint16_t>() != nullptr);
    CHECK(v.channels() == 2u);
    CHECK((*v.get_if<std::uint16_t>())(5, 4, 3, 1) == raw.back());
    CHECK(gf({"import-raw", "--in", (dir / "a.raw").string(), "--raw-dims", "6,5,5", "--raw-dtype", "uint16", "--out",
              out})
              .code == 4);
}

TEST_CASE("tile manifest with an external predictor") {
    const auto dir = test::scratch_dir("cli_tiles");
    const auto labels = (dir / "labels.gf3d").string();
    REQUIRE(gf({"synth", "--dims", "40,36,30", "--cells", "10", "--out", labels}).code == 0);
    const auto field = (dir / "pred.gf3d").string();
    REQUIRE(gf({"encode", "--labels", labels, "--prediction", field}).code == 0);
    REQUIRE(gf({"tile-plan", "--in", field, "--out_dir", (dir / "tiles").string(), "--patch-dims", "16,16,16",
                "--overlap", "4,4,4"})
                .code == 0);

    // Stand-in predictor: negate every tile and append the prediction path.
    auto manifest = read_manifest(dir / "tiles" / "manifest.txt");
    REQUIRE(manifest.tiles.size() == 27u);
    for (auto& t : manifest.tiles) {
        auto a = to_float(read_volume(t.input));
        for (auto& v : a.data()) v = -v;
        t.prediction = dir / "tiles" / ("pred_" + std::to_string(t.index) + ".gf3d");
        write_volume(t.prediction, a);
    }
    write_manifest(dir / "tiles" / "manifest.txt", manifest);

    const auto merged = (dir / "merged.gf3d").string();
    REQUIRE(gf({"merge", "--manifest", (dir / "tiles" / "manifest.txt").string(), "--out", merged}).code == 0);
    const auto orig = to_float(read_volume(field));
    const auto back = to_float(read_volume(merged));
    REQUIRE(back.dims() == orig.dims());
    REQUIRE(back.channels() == 4u);
    double worst = 0;
    for (std::size_t i = 0; i < orig.data().size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(back.data()[i]) + orig.data()[i]));
    CHECK(worst <= 1e-6);
}

TEST_CASE("the installed binary reports exit codes to the shell") {
    const std::string bin = GRADFLOW_CLI_PATH;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(bin + " --help") == 0);
    CHECK(status(bin + " info --nope") == 2);
    CHECK(status(bin + " info --in /nonexistent/x.gf3d") == 3);
}
