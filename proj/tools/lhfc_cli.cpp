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

// Command-line front end: encode, decode, train, analyze, bench.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lhfc/codec.hpp"
#include "lhfc/complexity.hpp"
#include "lhfc/error.hpp"
#include "lhfc/formats.hpp"
#include "lhfc/image_io.hpp"
#include "lhfc/metrics.hpp"
#include "lhfc/model.hpp"
#include "lhfc/trainer.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

lhfc::HFTConfig resolve_arch(const std::string& arch) {
  if (arch == "loc-lic-ref" || arch == "ref") return lhfc::reference_config();
  if (arch == "toy") return lhfc::toy_config();
  if (arch == "tiny") return lhfc::tiny_config();
  return lhfc::load_config(arch);
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw lhfc::FormatError("cannot write " + path);
  out << text;
}

struct EncodeArgs {
  std::string input, checkpoint, output;
};

int run_encode(const EncodeArgs& a) {
  const lhfc::EncodeStats s = lhfc::encode_file(a.input, a.checkpoint, a.output);
  nlohmann::json j;
  j["bpp"] = s.bpp;
  j["z_bits"] = s.z_bits;
  j["y_bits"] = s.y_bits;
  j["estimated_bpp"] = s.estimated_bpp;
  j["estimated_z_bits"] = s.estimated_z_bits;
  j["estimated_y_bits"] = s.estimated_y_bits;
  std::cout << j.dump() << "\n";
  return 0;
}

struct TrainArgs {
  std::string arch = "toy";
  std::string config;
  std::string images;
  std::string output;
  std::string log;
  std::string init;
  std::uint64_t init_seed = 1;
  int steps = -1;
  double lambda = -1.0;
  int lambda_index = -1;
  double lr = -1.0;
};

int run_train(const TrainArgs& a) {
  lhfc::TrainConfig cfg;
  if (!a.config.empty()) cfg = lhfc::load_train_config(a.config);
  if (a.steps >= 0) cfg.steps = a.steps;
  if (a.lr >= 0.0) cfg.lr = a.lr;
  if (a.lambda_index >= 0) {
    if (a.lambda_index >= static_cast<int>(lhfc::kLambdaGrid.size())) {
      throw lhfc::ArgumentError("--lambda-index out of range");
    }
    cfg.lambda_index = a.lambda_index;
    cfg.lambda = lhfc::kLambdaGrid[a.lambda_index];
  }
  if (a.lambda >= 0.0) cfg.lambda = a.lambda;

  lhfc::Model model = a.init.empty()
                          ? lhfc::init_model(resolve_arch(a.arch), a.init_seed)
                          : lhfc::load_checkpoint(a.init);
  std::vector<lhfc::Image8> images;
  for (const auto& p : lhfc::list_images(a.images)) images.push_back(lhfc::read_ppm(p));
  if (images.empty()) throw lhfc::ArgumentError("no .ppm images in " + a.images);

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw lhfc::FormatError("cannot write " + a.log);
    log << lhfc::training_log_header();
  }
  lhfc::train(model, cfg, images, [&](int step, const lhfc::RDLossBreakdown& l) {
    if (log.is_open()) log << lhfc::training_log_row(step, l);
    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      std::fprintf(stderr, "step %d total %.5f mse %.6g bpp %.4f\n", step,
                   l.total, l.mse, l.bpp_y + l.bpp_z);
    }
  });
  lhfc::save_checkpoint(a.output, model);
  return 0;
}

struct AnalyzeArgs {
  std::vector<std::string> specs;
  std::vector<std::string> archs;
  int size = 256;
  int height = 0;
  int width = 0;
  std::string csv;
  std::string layers_csv;
  std::string emit_spec;
};

int run_analyze(const AnalyzeArgs& a) {
  std::vector<lhfc::ArchSpec> specs;
  for (const auto& arch : a.archs) {
    specs.push_back(lhfc::arch_spec_from_config(resolve_arch(arch)));
  }
  for (const auto& path : a.specs) specs.push_back(lhfc::load_arch_spec(path));
  if (specs.empty()) throw lhfc::ArgumentError("analyze: give at least one spec");
  if (!a.emit_spec.empty()) {
    if (specs.size() != 1) throw lhfc::ArgumentError("--emit-spec needs exactly one model");
    write_text(a.emit_spec, lhfc::arch_spec_to_json(specs.front()) + "\n");
  }
  const int h = a.height > 0 ? a.height : a.size;
  const int w = a.width > 0 ? a.width : a.size;
  std::vector<lhfc::ComplexityReport> reports;
  std::string layers;
  for (const auto& s : specs) {
    reports.push_back(lhfc::model_report(s, h, w));
    layers += "# " + s.name + "\n" + lhfc::report_csv(reports.back());
  }
  const auto rows = lhfc::compare(reports);
  std::cout << lhfc::comparison_table(reports, rows);
  if (!a.csv.empty()) write_text(a.csv, lhfc::comparison_csv(rows));
  if (!a.layers_csv.empty()) write_text(a.layers_csv, layers);
  return 0;
}

struct BenchArgs {
  std::vector<std::string> checkpoints;
  std::string images;
  std::string output = "-";
  int threads = 0;
};

int run_bench(const BenchArgs& a) {
  const int threads = a.threads > 0 ? a.threads : lhfc::bench_threads_from_env();
  const auto rows = lhfc::run_bench(a.checkpoints, a.images, threads);
  write_text(a.output, lhfc::rd_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lhfc: learned image codec with hierarchical feature transforms"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Compress a PPM image");
  c_enc->add_option("-i,--input", enc.input, "input image (binary PPM)")->required();
  c_enc->add_option("-c,--checkpoint", enc.checkpoint, "model checkpoint")->required();
  c_enc->add_option("-o,--output", enc.output, "output bitstream")->required();

  EncodeArgs dec;
  auto* c_dec = app.add_subcommand("decode", "Decompress a bitstream to PPM");
  c_dec->add_option("-i,--input", dec.input, "input bitstream")->required();
  c_dec->add_option("-c,--checkpoint", dec.checkpoint, "model checkpoint")->required();
  c_dec->add_option("-o,--output", dec.output, "output image (PPM)")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a model on a directory of PPM images");
  c_tr->add_option("--arch", tr.arch, "ref | toy | tiny | architecture JSON path");
  c_tr->add_option("--config", tr.config, "training config JSON");
  c_tr->add_option("--images", tr.images, "image directory")->required();
  c_tr->add_option("-o,--output", tr.output, "checkpoint to write")->required();
  c_tr->add_option("--log", tr.log, "CSV training log");
  c_tr->add_option("--init", tr.init, "start from this checkpoint");
  c_tr->add_option("--init-seed", tr.init_seed, "parameter initialization seed");
  c_tr->add_option("--steps", tr.steps, "override steps");
  c_tr->add_option("--lambda", tr.lambda, "override lambda");
  c_tr->add_option("--lambda-index", tr.lambda_index, "use the lambda grid entry");
  c_tr->add_option("--lr", tr.lr, "override learning rate");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Static kMAC/pixel analysis");
  c_an->add_option("specs", an.specs, "architecture spec JSON files");
  c_an->add_option("--arch", an.archs, "built-in or config-file models to analyze first");
  c_an->add_option("--size", an.size, "square input size")->check(CLI::PositiveNumber);
  c_an->add_option("--height", an.height, "input height")->check(CLI::PositiveNumber);
  c_an->add_option("--width", an.width, "input width")->check(CLI::PositiveNumber);
  c_an->add_option("--csv", an.csv, "comparison CSV path ('-' for stdout)");
  c_an->add_option("--layers-csv", an.layers_csv, "per-layer CSV path");
  c_an->add_option("--emit-spec", an.emit_spec, "write the model's layer table as spec JSON");

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "Rate-distortion evaluation");
  c_be->add_option("--checkpoints", be.checkpoints, "checkpoints, one RD row each")
      ->required();
  c_be->add_option("--images", be.images, "image directory")->required();
  c_be->add_option("-o,--output", be.output, "RD CSV path ('-' for stdout)");
  c_be->add_option("--threads", be.threads, "workers (default LOC_LIC_THREADS or 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_enc) return run_encode(enc);
    if (*c_dec) {
      lhfc::decode_file(dec.input, dec.checkpoint, dec.output);
      return 0;
    }
    if (*c_tr) return run_train(tr);
    if (*c_an) return run_analyze(an);
    if (*c_be) return run_bench(be);
  } catch (const lhfc::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
