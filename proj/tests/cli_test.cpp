#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "icarus/image.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("icarus_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args) {
        const std::string cmd = std::string(ICARUS_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        std::ifstream in(path("stdout.txt"));
        std::stringstream ss;
        ss << in.rdbuf();
        out_ = ss.str();
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path dir_;
    std::string out_;
};

}  // namespace

TEST_F(Cli, RenderPipeline) {
    ASSERT_EQ(run("random-model --out " + path("f.icm") + " --layers 2 --width 64 --pos-freqs 4 --dir-freqs 2 --seed 3"), 0);
    ASSERT_EQ(run("quantize " + path("f.icm") + " " + path("q.icm") + " --calibrate --width 8 --height 8 --coarse 8 --fine 0"), 0);
    const std::string scene = " --width 8 --height 8 --coarse 8 --fine 8 --seed 1";
    ASSERT_EQ(run("render " + path("q.icm") + " --mode exact --out " + path("exact.ppm") + scene), 0);
    ASSERT_EQ(run("render " + path("q.icm") + " --mode approx --out " + path("approx.png") + scene + " --workers 2"), 0);
    ASSERT_EQ(run("render " + path("f.icm") + " --mode float --out " + path("float.ppm") + scene), 0);
    const icarus::Image img = icarus::read_image(path("exact.ppm"));
    EXPECT_EQ(img.width, 8);
    EXPECT_EQ(img.height, 8);
    ASSERT_EQ(run("psnr " + path("exact.ppm") + " " + path("approx.png") + " --json"), 0);
    EXPECT_NE(out_.find("psnr"), std::string::npos);
}

TEST_F(Cli, Stats) {
    ASSERT_EQ(run("stats 800 800 192"), 0);
    EXPECT_NE(out_.find("1,474,560,000"), std::string::npos);
    EXPECT_NE(out_.find("19.22 GiB"), std::string::npos);
    EXPECT_NE(out_.find("3.66 MiB"), std::string::npos);
}

TEST_F(Cli, VerifyRmcm) {
    ASSERT_EQ(run("verify-rmcm"), 0);
    EXPECT_NE(out_.find("33,488,896"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("render"), 2);
    EXPECT_EQ(run("stats 0 800 192"), 2);
    EXPECT_EQ(run("render " + path("missing.icm") + " --out " + path("x.ppm")), 5);
    {
        std::ofstream f(path("junk.icm"), std::ios::binary);
        f << "not a model";
    }
    EXPECT_EQ(run("render " + path("junk.icm") + " --out " + path("x.ppm")), 3);
    EXPECT_EQ(run("psnr " + path("junk.icm") + " " + path("junk.icm")), 5);
    ASSERT_EQ(run("orbit-poses --out " + path("poses.json") + " --count 2"), 0);
    {
        std::ofstream f(path("bad_poses.json"));
        f << "{\"frames\": 3}";
    }
    ASSERT_EQ(run("random-model --out " + path("f.icm") + " --layers 1 --width 64 --pos-freqs 2 --dir-freqs 0"), 0);
    EXPECT_EQ(run("render " + path("f.icm") + " --out " + path("x.ppm") + " --poses " + path("bad_poses.json")), 3);
    EXPECT_EQ(run("render " + path("f.icm") + " --out " + path("x.ppm") + " --width 4 --height 4 --coarse 4 --fine 0 --poses " +
                  path("poses.json") + " --frame 1"),
              0);
}
