// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"
#include "msplat/diagnostics.hpp"
#include "msplat/trainer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace msplat;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("msplat_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MetricsOfAnImageAgainstItself) {
    write_ppm(make_synthetic_target(TargetKind::edge_halfplane, 16, 16, 1).image, path("a.ppm"));
    const CliResult r = run({"metrics", path("a.ppm"), path("a.ppm")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("99.0000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("1.000000"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("0.00000000"), std::string::npos) << r.out;
}

TEST_F(CliTest, GradcheckPassesOnTheDefaultFixture) {
    const CliResult r = run({"gradcheck"});
    EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
    EXPECT_NE(r.out.find("overall"), std::string::npos);
    EXPECT_EQ(run({"gradcheck", "--compositing", "front_to_back", "--seed", "3"}).code, cli::kOk);
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
    EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"render", "--out", path("x.ppm")}).code, cli::kUsage);
    EXPECT_EQ(run({"gradcheck", "--samples", "3"}).code, cli::kUsage);
    EXPECT_EQ(run({"train", "--arm", "sideways", "--iterations", "1"}).code, cli::kUsage);
    EXPECT_EQ(run({"gradcheck", "--tolerance", "-1"}).code, cli::kUsage);
}

TEST_F(CliTest, RuntimeErrorsExitWithTwo) {
    std::ofstream(path("bad.gsscene")) << "gaussian 1 2\n";
    const CliResult r = run({"render", "--scene", path("bad.gsscene"), "--out", path("x.ppm"), "--width", "8", "--height", "8"});
    EXPECT_EQ(r.code, cli::kRuntime);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, RenderMultisampleDiffersFromSingleSample) {
    const CameraModel cam = synthetic_camera(24, 24);
    save_scene(make_sharp_scene(TargetKind::edge_halfplane, cam), path("s.gsscene"));
    for (const char* n : {"1", "4"}) {
        const CliResult r = run({"render", "--scene", path("s.gsscene"), "--width", "24", "--height", "24", "--samples", n,
                           "--out", path(std::string("r") + n + ".ppm")});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    const ImageBuffer one = read_ppm(path("r1.ppm")), four = read_ppm(path("r4.ppm"));
    EXPECT_EQ(one.height(), 24);
    EXPECT_NE(one, four);
}

TEST_F(CliTest, TrainOutputsAreByteDeterministic) {
    for (const char* tag : {"a", "b"}) {
        const CliResult r = run({"train", "--bench", "checker_edge", "--width", "24", "--height", "24", "--gaussians", "30",
                           "--iterations", "6", "--log-interval", "2", "--log", path(std::string(tag) + ".csv"),
                           "--out", path(std::string(tag) + ".gsscene"), "--checkpoint-dir",
                           path(std::string("ck_") + tag)});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_NE(r.out.find("best PSNR"), std::string::npos);
    }
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(slurp(path("a.gsscene")), slurp(path("b.gsscene")));
    EXPECT_TRUE(fs::exists(path("ck_a") + "/full_6.gsscene"));
    EXPECT_EQ(slurp(path("ck_a") + "/full_6.gsscene"), slurp(path("ck_b") + "/full_6.gsscene"));
}

TEST_F(CliTest, DiffAndWaveletWriteFiles) {
    write_ppm(make_synthetic_target(TargetKind::edge_halfplane, 16, 16, 1).image, path("a.ppm"));
    write_ppm(make_synthetic_target(TargetKind::checkerboard, 16, 16, 1).image, path("b.ppm"));
    ASSERT_EQ(run({"diff", path("a.ppm"), path("b.ppm"), "--out", path("d.ppm")}).code, 0);
    EXPECT_EQ(read_ppm(path("d.ppm")).width(), 16);
    ASSERT_EQ(run({"wavelet", path("a.ppm"), "--out-dir", path("w")}).code, 0);
    for (const char* n : {"LL.ppm", "LH.ppm", "HL.ppm", "HH.ppm", "wavelet_coefficients.csv"})
        EXPECT_TRUE(fs::exists(path("w") + "/" + n)) << n;
}

TEST_F(CliTest, MakeBenchWritesFixtures) {
    const CliResult r = run({"make-bench", "--out", path("bench"), "--width", "24", "--height", "24", "--gaussians", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(path("bench") + "/camera.gscam"));
    for (const std::string& id : benchmark_ids()) {
        EXPECT_TRUE(fs::exists(path("bench") + "/" + id + "_target.ppm")) << id;
        EXPECT_TRUE(fs::exists(path("bench") + "/" + id + "_init.gsscene")) << id;
    }
}

TEST_F(CliTest, AblateWritesTable) {
    const CliResult r = run({"ablate", "--width", "24", "--height", "24", "--gaussians", "20", "--iterations", "2", "--csv",
                       path("t.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(path("t.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    for (Arm a : kAllArms) EXPECT_NE(r.out.find(std::string(to_string(a))), std::string::npos);
}
