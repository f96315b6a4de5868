#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "endnet/cli.hpp"
#include "endnet/io.hpp"
#include "helpers.hpp"

using namespace endnet;
using endnet::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Small noisy scene shared by the pipeline tests.
fs::path make_scene(const std::string& name) {
    const fs::path dir = scratch_dir(name);
    const Run r = run({"synth", "--k", "3", "--bands", "20", "--pixels", "144", "--snr", "40", "--seed", "3",
                       "--out-dir", (dir / "scene").string()});
    REQUIRE(r.code == kExitOk);
    return dir;
}

std::vector<std::string> extract_args(const fs::path& dir, const std::string& out, const std::string& seed) {
    return {"extract", "--input", (dir / "scene" / "cube.csv").string(), "--k", "3", "--iters", "150",
            "--batch", "16", "--seed", seed, "--out-dir", (dir / out).string()};
}

} // namespace

TEST_CASE("synth writes a cube, endmembers and abundances; envi format also works") {
    const fs::path dir = make_scene("cli_synth");
    CHECK(fs::exists(dir / "scene" / "cube.csv"));
    CHECK(fs::exists(dir / "scene" / "endmembers.csv"));
    CHECK(fs::exists(dir / "scene" / "abundances.csv"));
    const HyperCube cube = load_cube_csv(dir / "scene" / "cube.csv");
    CHECK(cube.bands() == 20);
    CHECK(cube.height() == 12);
    CHECK(cube.width() == 12);

    const Run envi = run({"synth", "--k", "3", "--bands", "10", "--pixels", "16", "--format", "envi",
                          "--out-dir", (dir / "envi").string()});
    CHECK(envi.code == kExitOk);
    CHECK(load_envi(dir / "envi" / "cube.img.hdr").bands() == 10);
}

TEST_CASE("extract -> abundances -> eval pipeline") {
    const fs::path dir = make_scene("cli_pipeline");
    const Run ex = run(extract_args(dir, "model", "7"));
    REQUIRE(ex.code == kExitOk);
    for (const char* f : {"model.endn", "train_log.csv", "endmembers.csv"}) CHECK(fs::exists(dir / "model" / f));
    CHECK(load_spectra_csv(dir / "model" / "endmembers.csv").count() == 3);
    CHECK(slurp(dir / "model" / "train_log.csv").rfind("iter,loss,z_l1,recon_sad\n", 0) == 0);

    const Run ab = run({"abundances", "--input", (dir / "scene" / "cube.csv").string(), "--checkpoint",
                        (dir / "model" / "model.endn").string(), "--out-dir", (dir / "abund").string()});
    REQUIRE(ab.code == kExitOk);
    for (const char* f : {"abundance_01.pgm", "abundance_02.pgm", "abundance_03.pgm", "abundances.csv"})
        CHECK(fs::exists(dir / "abund" / f));

    const Run hidden = run({"abundances", "--input", (dir / "scene" / "cube.csv").string(), "--checkpoint",
                            (dir / "model" / "model.endn").string(), "--method", "hidden", "--out-dir",
                            (dir / "hidden").string()});
    CHECK(hidden.code == kExitOk);
    CHECK(slurp(dir / "abund" / "abundances.csv") != slurp(dir / "hidden" / "abundances.csv"));

    const Run ev = run({"eval", "--estimated", (dir / "model" / "endmembers.csv").string(),
                        "--estimated-abundances", (dir / "abund" / "abundances.csv").string(), "--truth",
                        (dir / "scene" / "endmembers.csv").string(), "--truth-abundances",
                        (dir / "scene" / "abundances.csv").string(), "--out-dir", (dir / "eval").string()});
    REQUIRE(ev.code == kExitOk);
    const std::string csv = slurp(dir / "eval" / "report.csv");
    CHECK(csv.rfind("endmember,estimated_index,sad,rmse\n", 0) == 0);
    CHECK(csv.find("average,,") != std::string::npos);
    CHECK(slurp(dir / "eval" / "report.txt") == ev.out);
}

TEST_CASE("subcommands are deterministic given their flags") {
    const fs::path dir = make_scene("cli_determinism");
    REQUIRE(run(extract_args(dir, "a", "5")).code == kExitOk);
    REQUIRE(run(extract_args(dir, "b", "5")).code == kExitOk);
    REQUIRE(run(extract_args(dir, "c", "6")).code == kExitOk);
    CHECK(slurp(dir / "a" / "model.endn") == slurp(dir / "b" / "model.endn"));
    CHECK(slurp(dir / "a" / "train_log.csv") == slurp(dir / "b" / "train_log.csv"));
    CHECK(slurp(dir / "a" / "model.endn") != slurp(dir / "c" / "model.endn"));

    const Run g1 = run({"gradcheck", "--trials", "100", "--seed", "1"});
    const Run g2 = run({"gradcheck", "--trials", "100", "--seed", "1"});
    CHECK(g1.code == kExitOk);
    CHECK(g1.out == g2.out);
}

TEST_CASE("gradcheck passes by default and exits 4 when a gradient sign is flipped") {
    const Run ok = run({"gradcheck"});
    CHECK(ok.code == kExitOk);
    for (const std::string fault : {"sad", "batchnorm", "l1norm", "loss"}) {
        CAPTURE(fault);
        CHECK(run({"gradcheck", "--trials", "10", "--inject-fault", fault}).code == kExitGradCheck);
    }
}

TEST_CASE("eval --repeats reruns with consecutive seeds and reports mean and std") {
    const fs::path dir = make_scene("cli_repeats");
    const std::vector<std::string> base{"eval", "--input", (dir / "scene" / "cube.csv").string(), "--truth",
                                        (dir / "scene" / "endmembers.csv").string(), "--truth-abundances",
                                        (dir / "scene" / "abundances.csv").string(), "--k", "3", "--iters",
                                        "100", "--batch", "16", "--seed", "10"};
    auto args = base;
    args.insert(args.end(), {"--repeats", "2", "--out-dir", (dir / "two").string()});
    REQUIRE(run(args).code == kExitOk);
    CHECK(fs::exists(dir / "two" / "report_seed10.csv"));
    CHECK(fs::exists(dir / "two" / "report_seed11.csv"));
    const std::string summary = slurp(dir / "two" / "summary.csv");
    CHECK(summary.rfind("endmember,sad_mean,sad_std,rmse_mean,rmse_std\n", 0) == 0);

    args = base;
    args.insert(args.end(), {"--repeats", "1", "--out-dir", (dir / "one").string()});
    REQUIRE(run(args).code == kExitOk);
    // One run: every std column is exactly zero.
    std::istringstream lines(slurp(dir / "one" / "summary.csv"));
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        REQUIRE(cells.size() == 5);
        CHECK(cells[2] == "0");
        CHECK(cells[4] == "0");
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("exit codes: I/O 1, configuration and dimension errors 2") {
    const fs::path dir = make_scene("cli_errors");
    const std::string cube = (dir / "scene" / "cube.csv").string();

    const Run missing_ckpt = run({"abundances", "--input", cube, "--checkpoint", (dir / "none.endn").string(),
                                  "--out-dir", (dir / "x").string()});
    CHECK(missing_ckpt.code == kExitIo);
    CHECK(missing_ckpt.err.find("error:") == 0);
    CHECK(run({"extract", "--input", (dir / "none.csv").string(), "--out-dir", (dir / "x").string()}).code ==
          kExitIo);

    CHECK(run({"extract", "--input", cube, "--k", "3", "--lr", "-1", "--out-dir", (dir / "x").string()}).code ==
          kExitConfig);
    CHECK(run({"extract", "--input", cube, "--k", "3", "--top-n", "5", "--out-dir", (dir / "x").string()})
              .code == kExitConfig);
    CHECK(run({"extract", "--input", cube, "--init", "nfindr"}).code == kExitConfig);
    CHECK(run({"extract", "--bogus-flag"}).code == kExitConfig);
    CHECK(run({}).code == kExitConfig);

    // Band-count mismatch between estimate and truth.
    REQUIRE(run({"synth", "--k", "3", "--bands", "25", "--pixels", "16", "--out-dir", (dir / "wide").string()})
                .code == kExitOk);
    const Run mismatch = run({"eval", "--estimated", (dir / "wide" / "endmembers.csv").string(), "--truth",
                              (dir / "scene" / "endmembers.csv").string(), "--out-dir", (dir / "x").string()});
    CHECK(mismatch.code == kExitConfig);
}

TEST_CASE("--help lists every flag with its default value") {
    const Run h = run({"extract", "--help"});
    CHECK(h.code == kExitOk);
    for (const std::string expect : {"--lr FLOAT [0.001]", "--batch INT [64]", "--beta1 FLOAT [0.7]",
                               "--lambda0 FLOAT [0.01]", "--lambda1 FLOAT [10]", "--lambda2 FLOAT [0.1]",
                               "--lambda3 FLOAT [1e-05]", "--lambda4 FLOAT [1e-05]", "--lambda5 FLOAT [0.001]",
                               "--dropout FLOAT [1]", "--top-n INT [2]", "--mask-noise FLOAT [0.4]",
                               "--iters INT [20000]", "--init TEXT:{vca,dmaxd} [dmaxd]"}) {
        CAPTURE(expect);
        CHECK(h.out.find(expect) != std::string::npos);
    }
    const Run top = run({"--help"});
    CHECK(top.code == kExitOk);
    for (const char* sub : {"synth", "extract", "abundances", "eval", "gradcheck"})
        CHECK(top.out.find(sub) != std::string::npos);
}
