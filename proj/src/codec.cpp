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

#include "lhfc/codec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "lhfc/entropy.hpp"
#include "lhfc/error.hpp"
#include "lhfc/image_io.hpp"
#include "lhfc/range_coder.hpp"

namespace lhfc {

namespace {

void check_window(const SymbolWindow& w, const char* what) {
  const std::int64_t n = std::int64_t{w.hi} - w.lo + 1;
  if (n < 1 || n > kMaxWindowSymbols) {
    throw DecodeError(std::string(what) + " symbol window [" +
                          std::to_string(w.lo) + ", " + std::to_string(w.hi) +
                          "] is invalid",
                      0);
  }
}

// Per-channel [min(lo, observed), max(hi, observed)] of integer values.
std::vector<SymbolWindow> channel_windows(const Tensor& symbols) {
  const Shape s = symbols.shape();
  std::vector<SymbolWindow> ws(s.c, SymbolWindow{kWindowLo, kWindowHi});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double v = symbols[symbols.offset(n, c, 0, 0) + i];
        if (!std::isfinite(v) || std::abs(v) > kMaxWindowSymbols) {
          throw ArgumentError(
              "latent value out of codable range; the model diverged");
        }
        const auto q = static_cast<std::int32_t>(v);
        ws[c].lo = std::min(ws[c].lo, q);
        ws[c].hi = std::max(ws[c].hi, q);
      }
  for (const auto& w : ws) {
    if (std::int64_t{w.hi} - w.lo + 1 > kMaxWindowSymbols) {
      throw ArgumentError("latent channel spans more than " +
                          std::to_string(kMaxWindowSymbols) + " symbols");
    }
  }
  return ws;
}

std::vector<QuantizedCdf> prior_tables(const FactorizedPrior& prior,
                                       const std::vector<SymbolWindow>& ws) {
  std::vector<QuantizedCdf> out;
  for (int c = 0; c < static_cast<int>(ws.size()); ++c) {
    out.push_back(build_cdf(factorized_pmf(prior, c, ws[c].lo, ws[c].hi)));
  }
  return out;
}

QuantizedCdf gaussian_table(double sigma, const SymbolWindow& w) {
  return build_cdf(gaussian_pmf(sigma, w.lo, w.hi));
}

// Visits the elements owned by a slice in coding order.
template <typename F>
void for_slice(const Slice& sl, const Shape& group_shape, F&& f) {
  const bool anchor = sl.parity == Parity::kAnchor;
  for (int n = 0; n < group_shape.n; ++n)
    for (int c = 0; c < group_shape.c; ++c)
      for (int h = 0; h < group_shape.h; ++h)
        for (int w = 0; w < group_shape.w; ++w)
          if (ContextSchedule::is_anchor(h, w) == anchor) f(n, c, h, w);
}

Dims padded_dims(const HFTConfig& config, int h, int w) {
  const int m = config.pad_multiple();
  return Dims{3, (h + m - 1) / m * m, (w + m - 1) / m * m};
}

Tensor reconstruct(const Tensor& y_hat, const ParamVars& vars, Tape& tape,
                   const StagePlan& plan, int h, int w) {
  return crop(synthesis(tape.constant(y_hat), vars, plan), h, w).value();
}

}  // namespace

EncodeResult encode_image(const Model& model, const Tensor& x) {
  const HFTConfig& cfg = model.config;
  const Shape xs = x.shape();
  if (xs.n != 1 || xs.c != 3) {
    throw ShapeError("encode: expected a (1,3,h,w) image, got " + xs.str());
  }
  const Tensor xp = pad_replicate(x, cfg.pad_multiple());
  const StagePlan plan = plan_stages(cfg, Dims{3, xp.shape().h, xp.shape().w});
  Tape tape;
  const ParamVars vars = bind_params(tape, model.params, false);

  Var y = analysis(tape.constant(xp), vars, plan);
  Var z = hyper_transform(y, vars, plan, HyperDirection::kAnalysis);
  EncodeResult out;
  out.z_hat = quantize_hard(z.value());

  Bitstream& bs = out.bitstream;
  bs.width = static_cast<std::uint32_t>(xs.w);
  bs.height = static_cast<std::uint32_t>(xs.h);
  bs.model_id = cfg.model_id;
  bs.lambda_index = model.lambda_index >= 0 && model.lambda_index < kNoLambdaIndex
                        ? static_cast<std::uint8_t>(model.lambda_index)
                        : kNoLambdaIndex;

  // Hyper-latent: one table per channel.
  const FactorizedPrior prior =
      FactorizedPrior::from_params(model.params, cfg.hyper_channels);
  bs.z_windows = channel_windows(out.z_hat);
  const auto z_tables = prior_tables(prior, bs.z_windows);
  {
    RangeEncoder enc;
    const Shape zs = out.z_hat.shape();
    for (int c = 0; c < zs.c; ++c)
      for (std::size_t i = 0; i < zs.plane(); ++i) {
        const int v = static_cast<int>(out.z_hat[out.z_hat.offset(0, c, 0, 0) + i]);
        enc.encode(v - bs.z_windows[c].lo, z_tables[c]);
      }
    bs.z_payload = enc.finish();
  }
  out.stats.estimated_z_bits = factorized_rate(out.z_hat, prior).bits;

  // Latent: slices in schedule order. The first pass fixes every symbol so
  // the windows can precede the payload.
  Var features =
      hyper_transform(tape.constant(out.z_hat), vars, plan, HyperDirection::kSynthesis);
  ContextDecoder ctx(cfg, model.params, features.value());
  const ContextSchedule& schedule = ctx.schedule();
  const Shape ys = y.shape();
  Tensor symbols(ys), mu_all(ys), sigma_all(ys);
  out.y_hat = Tensor(ys);
  for (int i = 0; i < static_cast<int>(schedule.slices().size()); ++i) {
    const Slice& sl = schedule.slices()[i];
    const auto tables = ctx.params_for(i);
    Tensor group(tables.mu.shape());
    for_slice(sl, group.shape(), [&](int n, int c, int h, int w) {
      const int ch = sl.channel_begin + c;
      const double mu = tables.mu.at(n, c, h, w);
      const double q = std::round(y.value().at(n, ch, h, w) - mu);
      group.at(n, c, h, w) = q + mu;
      symbols.at(n, ch, h, w) = q;
      mu_all.at(n, ch, h, w) = mu;
      sigma_all.at(n, ch, h, w) = tables.sigma.at(n, c, h, w);
      out.y_hat.at(n, ch, h, w) = q + mu;
    });
    ctx.commit(group);
  }
  bs.y_windows = channel_windows(symbols);
  {
    RangeEncoder enc;
    for (const Slice& sl : schedule.slices()) {
      const Shape gs{ys.n, sl.channel_end - sl.channel_begin, ys.h, ys.w};
      for_slice(sl, gs, [&](int n, int c, int h, int w) {
        const int ch = sl.channel_begin + c;
        const SymbolWindow& win = bs.y_windows[ch];
        enc.encode(static_cast<int>(symbols.at(n, ch, h, w)) - win.lo,
                   gaussian_table(sigma_all.at(n, ch, h, w), win));
      });
    }
    bs.y_payload = enc.finish();
  }
  out.stats.estimated_y_bits = gaussian_rate(out.y_hat, mu_all, sigma_all).bits;

  out.reconstruction = reconstruct(out.y_hat, vars, tape, plan, xs.h, xs.w);
  const double pixels = static_cast<double>(xs.h) * xs.w;
  out.stats.z_bits = bs.z_payload.size() * 8;
  out.stats.y_bits = bs.y_payload.size() * 8;
  out.stats.bpp = static_cast<double>(out.stats.z_bits + out.stats.y_bits) / pixels;
  out.stats.estimated_bpp =
      (out.stats.estimated_z_bits + out.stats.estimated_y_bits) / pixels;
  return out;
}

DecodeResult decode_image(const Model& model, const Bitstream& bs) {
  const HFTConfig& cfg = model.config;
  if (bs.model_id != cfg.model_id) {
    throw FormatError("bitstream was produced by model id " +
                      std::to_string(bs.model_id) + " but the checkpoint is '" +
                      cfg.name + "' (id " + std::to_string(cfg.model_id) + ")");
  }
  if (bs.width > (1u << 16) || bs.height > (1u << 16)) {
    throw FormatError("bitstream image size is implausibly large");
  }
  const int h = static_cast<int>(bs.height);
  const int w = static_cast<int>(bs.width);
  const StagePlan plan = plan_stages(cfg, padded_dims(cfg, h, w));
  if (static_cast<int>(bs.z_windows.size()) != plan.hyper_latent.c ||
      static_cast<int>(bs.y_windows.size()) != plan.latent.c) {
    throw FormatError("bitstream channel tables do not match the checkpoint");
  }
  for (const auto& win : bs.z_windows) check_window(win, "hyper-latent");
  for (const auto& win : bs.y_windows) check_window(win, "latent");

  Tape tape;
  const ParamVars vars = bind_params(tape, model.params, false);
  DecodeResult out;

  const FactorizedPrior prior =
      FactorizedPrior::from_params(model.params, cfg.hyper_channels);
  const auto z_tables = prior_tables(prior, bs.z_windows);
  out.z_hat = Tensor(Shape{1, plan.hyper_latent.c, plan.hyper_latent.h,
                           plan.hyper_latent.w});
  {
    RangeDecoder dec(bs.z_payload);
    const Shape zs = out.z_hat.shape();
    for (int c = 0; c < zs.c; ++c)
      for (std::size_t i = 0; i < zs.plane(); ++i) {
        out.z_hat[out.z_hat.offset(0, c, 0, 0) + i] =
            dec.decode(z_tables[c]) + bs.z_windows[c].lo;
      }
    if (!dec.exhausted()) {
      throw DecodeError("z payload: trailing bytes", dec.position());
    }
  }

  Var features =
      hyper_transform(tape.constant(out.z_hat), vars, plan, HyperDirection::kSynthesis);
  ContextDecoder ctx(cfg, model.params, features.value());
  RangeDecoder dec(bs.y_payload);
  for (int i = 0; i < static_cast<int>(ctx.schedule().slices().size()); ++i) {
    const Slice& sl = ctx.schedule().slices()[i];
    const auto tables = ctx.params_for(i);
    Tensor group(tables.mu.shape());
    for_slice(sl, group.shape(), [&](int n, int c, int hh, int ww) {
      const int ch = sl.channel_begin + c;
      const SymbolWindow& win = bs.y_windows[ch];
      const int q = dec.decode(gaussian_table(tables.sigma.at(n, c, hh, ww), win)) + win.lo;
      group.at(n, c, hh, ww) = q + tables.mu.at(n, c, hh, ww);
    });
    ctx.commit(group);
  }
  if (!dec.exhausted()) {
    throw DecodeError("y payload: trailing bytes", dec.position());
  }
  out.y_hat = ctx.known();
  out.reconstruction = reconstruct(out.y_hat, vars, tape, plan, h, w);
  return out;
}

EncodeStats encode_file(const std::string& image_path,
                        const std::string& checkpoint_path,
                        const std::string& output_path) {
  const Model model = load_checkpoint(checkpoint_path);
  const Tensor x = to_tensor(read_ppm(image_path));
  EncodeResult r = encode_image(model, x);
  write_file(output_path, serialize_bitstream(r.bitstream));
  return r.stats;
}

void decode_file(const std::string& bitstream_path,
                 const std::string& checkpoint_path,
                 const std::string& output_path) {
  const Model model = load_checkpoint(checkpoint_path);
  const auto bytes = read_file(bitstream_path);
  const DecodeResult r = decode_image(model, parse_bitstream(bytes));
  write_ppm(output_path, to_image(r.reconstruction));
}

std::vector<std::string> list_images(const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) {
    throw ArgumentError("not a directory: " + directory);
  }
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(directory)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".ppm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

BenchImage bench_image(const Model& model, const Tensor& x) {
  const EncodeResult r = encode_image(model, x);
  const Tensor rec = round_to_8bit(r.reconstruction);
  return {r.stats.bpp, psnr(x, rec, 1.0), ms_ssim(x, rec, 1.0)};
}

std::vector<RDCurve> run_bench(const std::vector<std::string>& checkpoints,
                               const std::string& image_directory,
                               int threads) {
  if (checkpoints.empty()) throw ArgumentError("bench: no checkpoints given");
  const auto paths = list_images(image_directory);
  if (paths.empty()) {
    throw ArgumentError("bench: no .ppm images in " + image_directory);
  }
  std::vector<Tensor> images;
  for (const auto& p : paths) images.push_back(to_tensor(read_ppm(p)));
  threads = std::clamp(threads, 1, static_cast<int>(images.size()));

  std::vector<RDCurve> rows;
  for (const auto& ck : checkpoints) {
    const Model model = load_checkpoint(ck);
    std::vector<BenchImage> results(images.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < images.size(); i = next++) {
        results[i] = bench_image(model, images[i]);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    RDPoint mean;
    for (const auto& r : results) {
      mean.bpp += r.bpp;
      mean.psnr_db += r.psnr_db;
      mean.ms_ssim += r.ms_ssim;
    }
    const double n = static_cast<double>(results.size());
    mean.bpp /= n;
    mean.psnr_db /= n;
    mean.ms_ssim /= n;
    rows.push_back({std::filesystem::path(ck).stem().string(), {mean}});
  }
  return rows;
}

int bench_threads_from_env() {
  const char* v = std::getenv("LOC_LIC_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1 || n > 256) return 1;
  return static_cast<int>(n);
}

}  // namespace lhfc
