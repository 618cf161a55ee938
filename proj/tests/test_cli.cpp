// Copyright 2026 The lhfc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lhfc/codec.hpp"
#include "lhfc/formats.hpp"
#include "lhfc/image_io.hpp"
#include "test_util.hpp"

namespace lhfc {
namespace {

namespace fs = std::filesystem;
using testing::temp_path;

const std::string kCli = LHFC_CLI_PATH;
const std::string kData = LHFC_DATA_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run(const std::string& args) {
  const std::string out = temp_path("cli_stdout.txt");
  const std::string err = temp_path("cli_stderr.txt");
  const std::string cmd = "'" + kCli + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

TEST(CliAnalyze, ThreeShippedSpecsGiveThreeRows) {
  const CliResult r = run("analyze " + kData + "/arch/loc-lic-ref.json " + kData + "/arch/cheng2020-style.json " +
                    kData + "/arch/mlic-style.json --size 256");
  ASSERT_EQ(r.code, 0) << r.err;
  // Header, three models, footer.
  EXPECT_EQ(count_lines(r.out), 5) << r.out;
  EXPECT_NE(r.out.find("loc-lic-ref"), std::string::npos);
  EXPECT_NE(r.out.find("cheng2020-style"), std::string::npos);
  EXPECT_NE(r.out.find("mlic-style"), std::string::npos);
}

TEST(CliAnalyze, SingleSpecHasRatioOne) {
  const std::string csv = temp_path("single.csv");
  const CliResult r = run("analyze " + kData + "/arch/cheng2020-style.json --csv '" + csv + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(csv);
  EXPECT_EQ(text.rfind("name,kmac_per_pixel,ratio\n", 0), 0u);
  EXPECT_NE(text.find(",1.0000\n"), std::string::npos) << text;
  EXPECT_EQ(count_lines(text), 2);
}

TEST(CliAnalyze, BuiltInArchAndLayerCsv) {
  const std::string layers = temp_path("layers.csv");
  const CliResult r = run("analyze --arch ref --height 512 --width 256 --layers-csv '" + layers + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("271.8"), std::string::npos) << r.out;
  // One "# model" line, then the per-layer table.
  EXPECT_EQ(slurp(layers).rfind("# loc-lic-ref\nsubnet,role,layer,macs", 0), 0u);
}

TEST(CliAnalyze, InvalidJsonExitsTwoWithLineNumber) {
  const std::string bad = temp_path("bad_spec.json");
  std::ofstream(bad) << "{\n  \"name\": \"x\",\n  \"subnets\": [\n    oops\n  ]\n}\n";
  const CliResult r = run("analyze '" + bad + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

TEST(CliUsage, BadFlagsExitOne) {
  EXPECT_EQ(run("analyze --size -3").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("encode -i only.ppm").code, 1);
}

TEST(CliCodec, TrainEncodeDecodeBench) {
  const std::string dir = temp_path("cli_images");
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_ppm(dir + "/a.ppm", testing::textured_image(1, 32, 32));
  write_ppm(dir + "/b.ppm", testing::textured_image(2, 40, 24));
  const std::string cfg = temp_path("cli_train.json");
  std::ofstream(cfg) << R"({"steps": 4, "crop": 32, "lr": 0.001, "lambda_index": 2, "seed": 3})";
  const std::string ckpt = temp_path("cli_model.lhfw");
  const std::string log = temp_path("cli_log.csv");

  CliResult r = run("train --arch tiny --config '" + cfg + "' --images '" + dir + "' -o '" + ckpt + "' --log '" + log + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(log)), 5);
  EXPECT_EQ(load_checkpoint(ckpt).lambda_index, 2);

  const std::string bits = temp_path("cli_a.lhfc");
  const std::string out = temp_path("cli_a_out.ppm");
  r = run("encode -i '" + dir + "/b.ppm' -c '" + ckpt + "' -o '" + bits + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"bpp\""), std::string::npos) << r.out;
  r = run("decode -i '" + bits + "' -c '" + ckpt + "' -o '" + out + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const Image8 decoded = read_ppm(out);
  EXPECT_EQ(decoded.width, 24);
  EXPECT_EQ(decoded.height, 40);

  const std::string rd = temp_path("cli_rd.csv");
  r = run("bench --checkpoints '" + ckpt + "' '" + ckpt + "' --images '" + dir + "' -o '" + rd + "' --threads 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(rd);
  EXPECT_EQ(text.rfind("label,bpp,psnr_db,ms_ssim\n", 0), 0u);
  EXPECT_EQ(count_lines(text), 3);

  // A corrupted bitstream is a data error.
  auto bytes = read_file(bits);
  bytes.resize(bytes.size() - 3);
  write_file(bits, bytes);
  r = run("decode -i '" + bits + "' -c '" + ckpt + "' -o '" + out + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("offset"), std::string::npos) << r.err;
}

TEST(CliCodec, MissingInputIsADataError) {
  const CliResult r = run("encode -i '" + temp_path("nope.ppm") + "' -c '" + temp_path("nope.lhfw") + "' -o '" +
                    temp_path("nope.lhfc") + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

}  // namespace
}  // namespace lhfc
