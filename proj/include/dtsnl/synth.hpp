/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "dtsnl/config.hpp"
#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/image.hpp"
#include "dtsnl/manifest.hpp"
#include "dtsnl/random.hpp"
#include "dtsnl/trainer.hpp"

// Synthetic seven-class image generator. Each class is a parametric motif
// (disk, square, triangle, horizontal bars, vertical bars, cross, ring) drawn
// with random pose, colours, background gradient, clutter and pixel noise.

namespace dtsnl {

enum class Motif { kDisk, kSquare, kTriangle, kHBars, kVBars, kCross, kRing };
inline constexpr int kNumMotifs = 7;

/// Full-dataset class frequencies of the RAF-DB basic-expression set.
inline constexpr std::array<int, 7> kRafDbClassCounts = {5957, 2460, 1619, 355, 867, 877, 3204};

/// Per-class labeled counts for the semi-supervised label budgets (fear gets fewer).
inline std::vector<int> label_budget_preset(int total) {
  int fear = 0, other = 0;
  switch (total) {
    case 100: fear = 10, other = 15; break;
    case 400: fear = 40, other = 60; break;
    case 2000: fear = 200, other = 300; break;
    case 4000: fear = 250, other = 625; break;
    default: throw InvalidArgument("no label budget preset for " + std::to_string(total) + " labels");
  }
  std::vector<int> counts(7, other);
  counts[3] = fear;
  return counts;
}

struct SynthSpec {
  int num_classes = 7;
  int image_size = 32;
  std::vector<int> labeled = label_budget_preset(100);
  std::vector<int> unlabeled = std::vector<int>(7, 128);
  std::vector<int> eval = std::vector<int>(7, 429);
  double scale_min = 0.28;      // motif radius as a fraction of the half-width
  double scale_max = 0.5;
  double max_rotation = 20.0;   // degrees
  double min_contrast = 0.25;   // minimum mean |fg - bg| over channels
  double colour_spread = 1.0;   // 1: uniform colours; 0: dark background, light motif
  double noise_std = 0.08;
  int clutter_max = 3;
  uint64_t seed = 0;

  void validate() const {
    std::vector<std::string> errors;
    if (num_classes < 2 || num_classes > kNumMotifs)
      errors.push_back("synth.num_classes must be in [2, " + std::to_string(kNumMotifs) + "]");
    if (image_size < 8) errors.push_back("synth.image_size must be >= 8");
    auto check_counts = [&](const std::vector<int>& v, const char* name, bool allow_zero) {
      if (static_cast<int>(v.size()) != num_classes)
        errors.push_back(std::string("synth.") + name + " needs " + std::to_string(num_classes) + " entries");
      for (int n : v)
        if (n < (allow_zero ? 0 : 1)) errors.push_back(std::string("synth.") + name + " entries must be >= " + (allow_zero ? "0" : "1"));
    };
    check_counts(labeled, "labeled", false);
    check_counts(unlabeled, "unlabeled", true);
    check_counts(eval, "eval", false);
    if (!(scale_min > 0 && scale_min <= scale_max && scale_max <= 1.0))
      errors.push_back("synth.scale_min/scale_max must satisfy 0 < min <= max <= 1");
    if (min_contrast < 0 || min_contrast > 0.9) errors.push_back("synth.min_contrast must be in [0, 0.9]");
    if (noise_std < 0) errors.push_back("synth.noise_std must be >= 0");
    if (colour_spread < 0 || colour_spread > 1) errors.push_back("synth.colour_spread must be in [0, 1]");
    if (clutter_max < 0) errors.push_back("synth.clutter_max must be >= 0");
    if (!errors.empty()) throw ConfigError(ConfigFile::join(errors));
  }

  /// Reads `synth.*` keys. A scalar count is broadcast to every class; the
  /// string "budget:N" selects a label budget preset.
  static SynthSpec resolve(const ConfigFile& file) {
    SynthSpec s;
    std::vector<std::string> errors;
    auto counts = [&](const nlohmann::json& v, const std::string& key) -> std::vector<int> {
      if (v.is_number_integer()) return std::vector<int>(static_cast<size_t>(s.num_classes), v.get<int>());
      if (v.is_string() && v.get<std::string>().rfind("budget:", 0) == 0)
        return label_budget_preset(std::stoi(v.get<std::string>().substr(7)));
      if (v.is_array()) {
        std::vector<int> out;
        for (const auto& e : v) {
          if (!e.is_number_integer()) throw ConfigError("'" + key + "' entries must be integers");
          out.push_back(e.get<int>());
        }
        return out;
      }
      throw ConfigError("'" + key + "' must be an integer, an integer array or \"budget:N\"");
    };
    // num_classes first so scalar broadcasts use it
    if (auto it = file.values().find("synth.num_classes"); it != file.values().end() && it->second.is_number_integer()) {
      s.num_classes = it->second.get<int>();
      s.labeled.assign(static_cast<size_t>(s.num_classes), 15);
      s.unlabeled.assign(static_cast<size_t>(s.num_classes), 128);
      s.eval.assign(static_cast<size_t>(s.num_classes), 429);
    }
    for (const auto& [key, v] : file.values()) {
      try {
        if (key == "synth.num_classes") {
          if (!v.is_number_integer()) throw ConfigError("'synth.num_classes' must be an integer");
        } else if (key == "synth.image_size") {
          s.image_size = config_detail::as_int(v);
        } else if (key == "synth.labeled") {
          s.labeled = counts(v, key);
        } else if (key == "synth.unlabeled") {
          s.unlabeled = counts(v, key);
        } else if (key == "synth.eval") {
          s.eval = counts(v, key);
        } else if (key == "synth.scale_min") {
          s.scale_min = config_detail::as_double(v);
        } else if (key == "synth.scale_max") {
          s.scale_max = config_detail::as_double(v);
        } else if (key == "synth.max_rotation") {
          s.max_rotation = config_detail::as_double(v);
        } else if (key == "synth.min_contrast") {
          s.min_contrast = config_detail::as_double(v);
        } else if (key == "synth.colour_spread") {
          s.colour_spread = config_detail::as_double(v);
        } else if (key == "synth.noise_std") {
          s.noise_std = config_detail::as_double(v);
        } else if (key == "synth.clutter_max") {
          s.clutter_max = static_cast<int>(config_detail::as_int(v));
        } else if (key == "synth.seed") {
          s.seed = static_cast<uint64_t>(config_detail::as_int(v));
        } else {
          errors.push_back("unknown key '" + key + "'");
        }
      } catch (const std::exception& e) {
        errors.push_back("'" + key + "': " + e.what());
      }
    }
    if (!errors.empty()) throw ConfigError(ConfigFile::join(errors));
    s.validate();
    return s;
  }

  const std::vector<int>& counts(Split split) const {
    switch (split) {
      case Split::kLabeled: return labeled;
      case Split::kUnlabeled: return unlabeled;
      default: return eval;
    }
  }
};

namespace synth_detail {

inline double smoothstep_edge(double d, double softness) {
  // d < 0 inside; linear ramp over one pixel-equivalent
  return std::clamp(0.5 - d / softness, 0.0, 1.0);
}

inline double triangle_sdf(double x, double y) {
  const double k = std::sqrt(3.0);
  x = std::abs(x) - 1.0;
  y = y + 1.0 / k;
  if (x + k * y > 0.0) {
    const double nx = (x - k * y) / 2.0, ny = (-k * x - y) / 2.0;
    x = nx, y = ny;
  }
  x -= std::clamp(x, -2.0, 0.0);
  return -std::hypot(x, y) * (y < 0 ? -1.0 : 1.0);
}

/// Coverage in [0,1] of the motif at local coordinates (unit radius).
inline double motif_coverage(Motif m, double x, double y, double softness) {
  switch (m) {
    case Motif::kDisk: return smoothstep_edge(std::hypot(x, y) - 0.9, softness);
    case Motif::kSquare: return smoothstep_edge(std::max(std::abs(x), std::abs(y)) - 0.75, softness);
    case Motif::kTriangle: return smoothstep_edge(triangle_sdf(x * 1.1, -y * 1.1 + 0.1) / 1.1, softness);
    case Motif::kHBars:
    case Motif::kVBars: {
      const double box = smoothstep_edge(std::max(std::abs(x), std::abs(y)) - 0.9, softness);
      const double t = m == Motif::kHBars ? y : x;
      const double stripe = std::sin(t * std::numbers::pi * 2.2);
      return box * std::clamp(0.5 + stripe / (softness * 4.0), 0.0, 1.0);
    }
    case Motif::kCross: {
      const double ax = std::abs(x), ay = std::abs(y);
      const double d = std::min(std::max(ax - 0.28, ay - 0.95), std::max(ay - 0.28, ax - 0.95));
      return smoothstep_edge(d, softness);
    }
    case Motif::kRing: return smoothstep_edge(std::abs(std::hypot(x, y) - 0.65) - 0.22, softness);
  }
  return 0.0;
}

inline std::array<double, 3> random_colour(Rng& rng) {
  return {uniform01(rng), uniform01(rng), uniform01(rng)};
}

// Uniform colour pulled toward `centre` grey; spread 1 leaves it uniform.
inline std::array<double, 3> random_colour(Rng& rng, double centre, double spread) {
  auto c = random_colour(rng);
  for (double& v : c) v = centre + spread * (v - centre);
  return c;
}

inline double colour_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return (std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2])) / 3.0;
}

}  // namespace synth_detail

/// Renders one sample. Pixel values are quantized to 8-bit levels so an image
/// written to disk and read back is identical to the in-memory one.
inline Image render_motif(const SynthSpec& spec, ClassIndex label, uint64_t sample_seed) {
  using namespace synth_detail;
  Rng rng(sample_seed);
  const int S = spec.image_size;
  const auto bg0 = random_colour(rng, 0.3, spec.colour_spread);
  auto bg1 = bg0;
  for (double& v : bg1) v = std::clamp(v + (uniform01(rng) - 0.5) * 0.4, 0.0, 1.0);
  std::array<double, 3> fg;
  int tries = 0;
  do fg = random_colour(rng, 0.7, spec.colour_spread);
  while ((colour_distance(fg, bg0) < spec.min_contrast || colour_distance(fg, bg1) < spec.min_contrast) && ++tries < 64);
  if (tries == 64)  // narrow palettes can make the constraint unsatisfiable; fall back to the far corner
    for (int c = 0; c < 3; ++c) fg[c] = bg0[c] + bg1[c] < 1.0 ? 1.0 : 0.0;
  const double grad_angle = uniform01(rng) * 2.0 * std::numbers::pi;

  const double radius = spec.scale_min + (spec.scale_max - spec.scale_min) * uniform01(rng);
  const double margin = std::max(0.0, 1.0 - radius * 1.1);
  const double cx = (uniform01(rng) * 2.0 - 1.0) * margin;
  const double cy = (uniform01(rng) * 2.0 - 1.0) * margin;
  const double theta = (uniform01(rng) * 2.0 - 1.0) * spec.max_rotation * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double softness = 2.0 / (S * radius);

  struct Blob {
    double x, y, r;
    std::array<double, 3> colour;
  };
  std::vector<Blob> clutter(uniform_index(rng, static_cast<uint64_t>(spec.clutter_max) + 1));
  for (auto& b : clutter) b = {uniform01(rng) * 2 - 1, uniform01(rng) * 2 - 1, 0.05 + 0.08 * uniform01(rng), random_colour(rng)};

  const auto motif = static_cast<Motif>(label);
  Image img(3, S, S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double u = (x + 0.5) / S * 2.0 - 1.0, v = (y + 0.5) / S * 2.0 - 1.0;
      const double g = 0.5 + 0.5 * (u * std::cos(grad_angle) + v * std::sin(grad_angle)) / std::numbers::sqrt2;
      std::array<double, 3> px;
      for (int c = 0; c < 3; ++c) px[c] = bg0[c] * (1 - g) + bg1[c] * g;
      for (const auto& b : clutter) {
        const double cov = smoothstep_edge(std::hypot(u - b.x, v - b.y) - b.r, 2.0 / S);
        for (int c = 0; c < 3; ++c) px[c] += (b.colour[c] - px[c]) * cov;
      }
      const double lx = ((u - cx) * cs + (v - cy) * sn) / radius;
      const double ly = (-(u - cx) * sn + (v - cy) * cs) / radius;
      const double cov = motif_coverage(motif, lx, ly, softness);
      for (int c = 0; c < 3; ++c) px[c] += (fg[c] - px[c]) * cov;
      for (int c = 0; c < 3; ++c) {
        const double noisy = std::clamp(px[c] + spec.noise_std * normal01(rng), 0.0, 1.0);
        img.at(c, y, x) = static_cast<float>(std::lround(noisy * 255.0)) / 255.0f;
      }
    }
  return img;
}

inline std::string synth_sample_path(Split split, ClassIndex label, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "images/%s/c%d-%05d.ppm", split_name(split), label, index);
  return buf;
}

inline uint64_t synth_sample_seed(const SynthSpec& spec, Split split, ClassIndex label, int index) {
  const uint64_t split_seed = derive_seed(spec.seed, 100 + static_cast<uint64_t>(split));
  return derive_seed(split_seed, static_cast<uint64_t>(label) * 1000003ULL + static_cast<uint64_t>(index));
}

inline LabelSpace synth_label_space(const SynthSpec& spec) {
  auto names = default_class_names();
  names.resize(static_cast<size_t>(spec.num_classes));
  return LabelSpace(names);
}

/// Builds the dataset in memory; sample ids equal the manifest paths synth_gen() writes.
inline Dataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Dataset d;
  d.label_space = synth_label_space(spec);
  for (Split split : {Split::kLabeled, Split::kUnlabeled, Split::kEval}) {
    auto& out = split == Split::kLabeled ? d.labeled : split == Split::kUnlabeled ? d.unlabeled : d.eval;
    for (int c = 0; c < spec.num_classes; ++c)
      for (int i = 0; i < spec.counts(split)[static_cast<size_t>(c)]; ++i) {
        ImageSample s{synth_sample_path(split, c, i), render_motif(spec, c, synth_sample_seed(spec, split, c, i)), {}};
        if (split != Split::kUnlabeled) s.label = c;
        out.push_back(std::move(s));
      }
  }
  return d;
}

/// Writes images plus `manifest.jsonl` under `out_dir` and returns the manifest.
inline DatasetManifest synth_gen(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  std::vector<ManifestRecord> records;
  for (Split split : {Split::kLabeled, Split::kUnlabeled, Split::kEval}) {
    std::filesystem::create_directories(out_dir / "images" / split_name(split), ec);
    if (ec) throw IoError("cannot create " + (out_dir / "images" / split_name(split)).string());
    for (int c = 0; c < spec.num_classes; ++c)
      for (int i = 0; i < spec.counts(split)[static_cast<size_t>(c)]; ++i) {
        const std::string path = synth_sample_path(split, c, i);
        write_pnm(out_dir / path, render_motif(spec, c, synth_sample_seed(spec, split, c, i)));
        ManifestRecord r{path, std::nullopt, split};
        if (split != Split::kUnlabeled) r.label = c;
        records.push_back(std::move(r));
      }
  }
  DatasetManifest manifest(synth_label_space(spec), std::move(records), out_dir);
  manifest.save(out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace dtsnl
